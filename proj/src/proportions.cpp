#include "gcs/proportions.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "gcs/errors.hpp"

namespace gcs {

namespace {
constexpr double kTol = 1e-10;
constexpr int kMaxIterations = 10000;

bool rows_flat(const Matrix& r) {
    for (std::size_t j = 0; j < r.rows; ++j) {
        double lo = r(j, 0);
        double hi = lo;
        for (std::size_t l = 1; l < r.cols; ++l) {
            lo = std::min(lo, r(j, l));
            hi = std::max(hi, r(j, l));
        }
        if (hi - lo > 1e-12 * std::max(1.0, hi)) return false;
    }
    return true;
}
} // namespace

RatioWeights ratio_weights(const SourceModel& model, const Dataset& target) {
    const std::size_t k = model.pi_P.size();
    for (std::size_t l = 0; l < k; ++l)
        if (!(model.pi_P[l] > 0.0)) throw DataError("ratio_weights: empty source class");

    std::vector<double> alpha(k - 1, 0.0);
    for (std::size_t l = 0; l + 1 < k; ++l)
        alpha[l] = std::log(model.pi_P[k - 1] / model.pi_P[l]);

    RatioWeights rw;
    rw.r = Matrix(target.n(), k);
    for (std::size_t j = 0; j < target.n(); ++j) {
        const auto phi = model.phi(target.x(j));
        for (std::size_t l = 0; l + 1 < k; ++l) {
            const double v = std::exp(alpha[l] + phi[l]);
            if (!(v > 0.0) || !std::isfinite(v))
                throw NumericError("ratio_weights: non-finite ratio");
            rw.r(j, l) = v;
        }
        rw.r(j, k - 1) = 1.0;
    }
    return rw;
}

double pseudo_log_likelihood(const RatioWeights& rw, const SimplexVector& pi) {
    if (pi.size() != rw.k()) throw DataError("pseudo_log_likelihood: dimension mismatch");
    double total = 0.0;
    for (std::size_t j = 0; j < rw.n(); ++j) {
        double mix = 0.0;
        for (std::size_t l = 0; l < rw.k(); ++l) mix += pi[l] * rw.r(j, l);
        if (!(mix > 0.0)) throw NumericError("pseudo_log_likelihood: non-positive mixture value");
        total += std::log(mix);
    }
    return total;
}

namespace {

// Score of the binary pseudo-likelihood: S(p) = sum_j (r_j - 1)/(p r_j + 1 - p).
double binary_score(const Matrix& r, double p) {
    double s = 0.0;
    for (std::size_t j = 0; j < r.rows; ++j) {
        const double rj = r(j, 0);
        s += (rj - 1.0) / (p * rj + 1.0 - p);
    }
    return s;
}

TargetProportionEstimate degenerate_estimate(std::size_t k, const RatioWeights& rw,
                                             const std::string& solver) {
    TargetProportionEstimate est;
    est.pi_Q = SimplexVector::uniform(k);
    est.iterations = 0;
    est.final_pseudo_loglik = pseudo_log_likelihood(rw, est.pi_Q);
    est.converged = false;
    est.degenerate = true;
    est.solver = solver;
    return est;
}

} // namespace

TargetProportionEstimate solve_pmle(const RatioWeights& rw) {
    const std::size_t k = rw.k();
    if (k < 2) throw DataError("solve_pmle: needs k >= 2");

    if (k == 2) {
        if (rows_flat(rw.r)) return degenerate_estimate(k, rw, "bisection-score");
        TargetProportionEstimate est;
        est.solver = "bisection-score";
        double p;
        int iters = 0;
        if (binary_score(rw.r, 0.0) <= 0.0) {
            p = 0.0;
        } else if (binary_score(rw.r, 1.0) >= 0.0) {
            p = 1.0;
        } else {
            double lo = 0.0;
            double hi = 1.0;
            while (hi - lo > kTol) {
                const double mid = 0.5 * (lo + hi);
                if (binary_score(rw.r, mid) > 0.0)
                    lo = mid;
                else
                    hi = mid;
                ++iters;
            }
            p = 0.5 * (lo + hi);
        }
        est.pi_Q = SimplexVector::checked({p, 1.0 - p});
        est.iterations = iters;
        est.final_pseudo_loglik = pseudo_log_likelihood(rw, est.pi_Q);
        est.converged = true;
        return est;
    }

    if (rows_flat(rw.r)) return degenerate_estimate(k, rw, "em-fixed-point");
    return em_fixed_point(rw.r, SimplexVector::uniform(k));
}

TargetProportionEstimate em_fixed_point(const Matrix& weights, SimplexVector init,
                                        std::vector<double>* objective_trace) {
    const std::size_t n = weights.rows;
    const std::size_t k = weights.cols;
    if (init.size() != k) throw DataError("em_fixed_point: init dimension mismatch");
    for (std::size_t j = 0; j < n; ++j) {
        double row_max = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            const double w = weights(j, l);
            if (!(w >= 0.0) || !std::isfinite(w))
                throw NumericError("em_fixed_point: invalid weight");
            row_max = std::max(row_max, w);
        }
        if (!(row_max > 0.0)) throw NumericError("em_fixed_point: all-zero weight row");
    }

    std::vector<double> pi = init.probs;
    TargetProportionEstimate est;
    est.solver = "em-fixed-point";

    auto objective = [&](const std::vector<double>& p) {
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double mix = 0.0;
            for (std::size_t l = 0; l < k; ++l) mix += p[l] * weights(j, l);
            total += std::log(mix);
        }
        return total;
    };

    int it = 0;
    bool converged = false;
    std::vector<double> next(k, 0.0);
    while (it < kMaxIterations) {
        ++it;
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            double mix = 0.0;
            for (std::size_t l = 0; l < k; ++l) mix += pi[l] * weights(j, l);
            if (!(mix > 0.0)) throw NumericError("em_fixed_point: zero mixture value");
            for (std::size_t l = 0; l < k; ++l) next[l] += pi[l] * weights(j, l) / mix;
        }
        double sum = 0.0;
        for (std::size_t l = 0; l < k; ++l) {
            next[l] /= static_cast<double>(n);
            sum += next[l];
        }
        for (std::size_t l = 0; l < k; ++l) next[l] /= sum;

        double change = 0.0;
        for (std::size_t l = 0; l < k; ++l) change = std::max(change, std::abs(next[l] - pi[l]));
        pi = next;
        if (objective_trace) objective_trace->push_back(objective(pi));
        if (change < kTol) {
            converged = true;
            break;
        }
    }

    est.pi_Q = SimplexVector::checked(pi);
    est.iterations = it;
    est.final_pseudo_loglik = objective(pi);
    est.converged = converged;
    return est;
}

TargetProportionEstimate em_saerens(const SourceModel& model, const Dataset& target) {
    const RatioWeights rw = ratio_weights(model, target);
    return em_fixed_point(rw.r, model.pi_P);
}

std::string TargetProportionEstimate::to_json_string() const {
    nlohmann::json j{{"pi_Q", pi_Q.probs},
                     {"iterations", iterations},
                     {"final_pseudo_loglik", final_pseudo_loglik},
                     {"converged", converged},
                     {"degenerate", degenerate},
                     {"solver", solver}};
    return j.dump(2);
}

void TargetProportionEstimate::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write estimate file: " + path.string());
    out << to_json_string() << '\n';
}

} // namespace gcs
