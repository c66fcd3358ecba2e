#include "gcs/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gcs/classifier.hpp"
#include "gcs/errors.hpp"
#include "gcs/rng.hpp"

namespace gcs {

namespace {
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

KdeModel KdeModel::fit(const Dataset& data, double bandwidth) {
    if (!(bandwidth > 0.0)) throw ConfigError("KdeModel: bandwidth must be positive");
    if (!data.has_labels()) throw DataError("KdeModel: labels absent");
    KdeModel m;
    m.bandwidth = bandwidth;
    std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(data.k));
    for (std::size_t i = 0; i < data.n(); ++i)
        rows[static_cast<std::size_t>(data.label(i) - 1)].push_back(i);
    for (int cls = 1; cls <= data.k; ++cls) {
        const auto& rr = rows[static_cast<std::size_t>(cls - 1)];
        if (rr.empty()) throw DataError("KdeModel: empty class " + std::to_string(cls));
        Matrix f(rr.size(), data.d());
        for (std::size_t i = 0; i < rr.size(); ++i) {
            const auto src = data.x(rr[i]);
            std::copy(src.begin(), src.end(), f.row(i).begin());
        }
        m.class_features.push_back(std::move(f));
    }
    return m;
}

double KdeModel::log_density(int cls, std::span<const double> x) const {
    const auto idx = static_cast<std::size_t>(cls - 1);
    if (idx >= class_features.size()) throw DataError("KdeModel: unknown class");
    const Matrix& f = class_features[idx];
    if (x.size() != f.cols) throw DataError("KdeModel: dimension mismatch");
    const double inv_b = 1.0 / bandwidth;
    const double log_kernel_norm =
        -static_cast<double>(f.cols) * (std::log(bandwidth) + kLogSqrt2Pi);

    // logsumexp over training points
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(f.rows, 0.0);
    for (std::size_t i = 0; i < f.rows; ++i) {
        double q = 0.0;
        const auto xi = f.row(i);
        for (std::size_t j = 0; j < f.cols; ++j) {
            const double z = (x[j] - xi[j]) * inv_b;
            q += z * z;
        }
        terms[i] = -0.5 * q;
        max_term = std::max(max_term, terms[i]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - max_term);
    return log_kernel_norm + max_term + std::log(s) - std::log(static_cast<double>(f.rows));
}

double KdeModel::density(int cls, std::span<const double> x) const {
    return std::exp(log_density(cls, x));
}

double kde_density(const KdeModel& m, int cls, std::span<const double> x) {
    return m.density(cls, x);
}

int KdeClassifier::classify(std::span<const double> x) const {
    std::vector<double> scores(pi.size(), 0.0);
    for (std::size_t l = 0; l < pi.size(); ++l) {
        scores[l] = pi[l] > 0.0
                        ? std::log(pi[l]) + kde.log_density(static_cast<int>(l) + 1, x)
                        : -std::numeric_limits<double>::infinity();
    }
    return argmax_label(scores);
}

RatioWeights kde_ratio_weights(const KdeModel& kde, const Dataset& target) {
    const std::size_t k = kde.class_features.size();
    RatioWeights rw;
    rw.r = Matrix(target.n(), k);
    for (std::size_t j = 0; j < target.n(); ++j) {
        const double ref = kde.log_density(static_cast<int>(k), target.x(j));
        for (std::size_t l = 0; l + 1 < k; ++l) {
            const double log_ratio = kde.log_density(static_cast<int>(l) + 1, target.x(j)) - ref;
            rw.r(j, l) = std::exp(std::clamp(log_ratio, -500.0, 500.0));
        }
        rw.r(j, k - 1) = 1.0;
    }
    return rw;
}

KdeClassifier maity_pc(const Dataset& source, const Dataset& target, double bandwidth) {
    KdeClassifier c;
    c.kde = KdeModel::fit(source, bandwidth);
    c.estimate = solve_pmle(kde_ratio_weights(c.kde, target));
    c.pi = c.estimate.pi_Q;
    return c;
}

KdeClassifier maity_ic(const Dataset& source, const Dataset& target_with_labels, double bandwidth) {
    if (!target_with_labels.has_labels()) throw DataError("maity_ic: target labels absent");
    KdeClassifier c;
    c.kde = KdeModel::fit(source, bandwidth);
    c.pi = class_proportions(target_with_labels);
    c.estimate.pi_Q = c.pi;
    c.estimate.solver = "ideal-frequencies";
    c.estimate.converged = true;
    return c;
}

KnnModel KnnModel::fit(const Dataset& data, int neighbors) {
    if (!data.has_labels()) throw DataError("KnnModel: labels absent");
    if (neighbors < 1 || static_cast<std::size_t>(neighbors) > data.n())
        throw ConfigError("KnnModel: neighbors must lie in [1, n]");
    KnnModel m;
    m.features = data.features;
    m.labels = *data.labels;
    m.k_classes = data.k;
    m.neighbors = neighbors;
    return m;
}

SimplexVector KnnModel::eta(std::span<const double> x) const {
    if (x.size() != features.cols) throw DataError("KnnModel: dimension mismatch");
    const std::size_t n = features.rows;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double q = 0.0;
        const auto xi = features.row(i);
        for (std::size_t j = 0; j < features.cols; ++j) {
            const double diff = x[j] - xi[j];
            q += diff * diff;
        }
        dist[i] = {q, i};
    }
    const auto m = static_cast<std::size_t>(neighbors);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(m), dist.end());
    std::vector<double> counts(static_cast<std::size_t>(k_classes), 0.0);
    for (std::size_t i = 0; i < m; ++i)
        counts[static_cast<std::size_t>(labels[dist[i].second] - 1)] += 1.0;
    for (double& c : counts) c /= static_cast<double>(m);
    return SimplexVector::checked(std::move(counts));
}

SimplexVector knn_eta(const KnnModel& m, std::span<const double> x) {
    return m.eta(x);
}

int SaerensClassifier::classify(std::span<const double> x) const {
    const SimplexVector eta = knn.eta(x);
    std::vector<double> weights(pi_P.size(), 0.0);
    for (std::size_t l = 0; l < pi_P.size(); ++l) weights[l] = estimate.pi_Q[l] / pi_P[l];
    return classify_weighted(eta, weights);
}

SaerensClassifier saerens_classifier(const Dataset& source, const Dataset& target, int neighbors) {
    SaerensClassifier c;
    c.knn = KnnModel::fit(source, neighbors);
    c.pi_P = class_proportions(source);

    Matrix w(target.n(), c.pi_P.size());
    for (std::size_t j = 0; j < target.n(); ++j) {
        const SimplexVector eta = c.knn.eta(target.x(j));
        for (std::size_t l = 0; l < c.pi_P.size(); ++l) w(j, l) = eta[l] / c.pi_P[l];
    }
    c.estimate = em_fixed_point(w, c.pi_P);
    return c;
}

namespace {

template <typename Fit, typename Classify>
std::size_t select_by_accuracy(const Dataset& source, std::size_t grid_size, std::uint64_t seed,
                               Fit&& fit, Classify&& classify_one) {
    const auto [train, valid] = split(source, 0.8, derive_seed(seed, "tune"));
    const SimplexVector pi = class_proportions(train);
    std::size_t best = 0;
    double best_acc = -1.0;
    for (std::size_t g = 0; g < grid_size; ++g) {
        auto model = fit(train, g);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < valid.n(); ++i)
            if (classify_one(model, pi, valid.x(i)) == valid.label(i)) ++correct;
        const double acc = static_cast<double>(correct) / static_cast<double>(valid.n());
        if (acc > best_acc) {
            best_acc = acc;
            best = g;
        }
    }
    return best;
}

} // namespace

double select_bandwidth(const Dataset& source, std::span<const double> grid, std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("select_bandwidth: empty grid");
    const std::size_t best = select_by_accuracy(
        source, grid.size(), seed,
        [&](const Dataset& train, std::size_t g) { return KdeModel::fit(train, grid[g]); },
        [](const KdeModel& m, const SimplexVector& pi, std::span<const double> x) {
            std::vector<double> scores(pi.size(), 0.0);
            for (std::size_t l = 0; l < pi.size(); ++l)
                scores[l] = pi[l] > 0.0
                                ? std::log(pi[l]) + m.log_density(static_cast<int>(l) + 1, x)
                                : -std::numeric_limits<double>::infinity();
            return argmax_label(scores);
        });
    return grid[best];
}

int select_neighbors(const Dataset& source, std::span<const int> grid, std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("select_neighbors: empty grid");
    const std::size_t best = select_by_accuracy(
        source, grid.size(), seed,
        [&](const Dataset& train, std::size_t g) {
            const int capped = std::min<int>(grid[g], static_cast<int>(train.n()));
            return KnnModel::fit(train, capped);
        },
        [](const KnnModel& m, const SimplexVector&, std::span<const double> x) {
            return argmax_label(m.eta(x).probs);
        });
    return grid[best];
}

} // namespace gcs
