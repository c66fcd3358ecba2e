#include "gcs/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "gcs/errors.hpp"
#include "gcs/rng.hpp"

namespace gcs {

namespace {

double log1p_exp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

constexpr double kGradTol = 1e-8;
constexpr double kCoefCap = 50.0;
constexpr int kMaxIter = 200000;

} // namespace

double LogisticFit::ratio(std::span<const double> x) const {
    if (x.size() != slopes.size()) throw DataError("LogisticFit: dimension mismatch");
    double z = log_count_correction + intercept;
    for (std::size_t j = 0; j < slopes.size(); ++j) z += slopes[j] * x[j];
    return std::exp(z);
}

LogisticFit fit_ratio(const Dataset& source_class, const Dataset& target_class,
                      std::vector<double>* loglik_trace) {
    if (source_class.d() != target_class.d()) throw DataError("fit_ratio: dimension mismatch");
    const std::size_t d = source_class.d();
    const std::size_t n_s = source_class.n();
    const std::size_t n_t = target_class.n();
    const std::size_t n = n_s + n_t;

    // pooled design: source rows (D=0) then target rows (D=1)
    Matrix x(n, d);
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n_s; ++i) {
        const auto r = source_class.x(i);
        std::copy(r.begin(), r.end(), x.row(i).begin());
    }
    for (std::size_t i = 0; i < n_t; ++i) {
        const auto r = target_class.x(i);
        std::copy(r.begin(), r.end(), x.row(n_s + i).begin());
        y[n_s + i] = 1.0;
    }

    // the ascent runs on standardized features; that decouples intercept and
    // slopes and keeps the step count small, while the objective value and
    // the fixed point are those of the original coordinates
    std::vector<double> mean(d, 0.0);
    std::vector<double> sd(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += x(i, j);
        m /= static_cast<double>(n);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += (x(i, j) - m) * (x(i, j) - m);
        v /= static_cast<double>(n);
        mean[j] = m;
        sd[j] = v > 1e-24 ? std::sqrt(v) : 1.0;
        for (std::size_t i = 0; i < n; ++i) x(i, j) = (x(i, j) - mean[j]) / sd[j];
    }

    std::vector<double> gamma(d + 1, 0.0); // gamma[0] = intercept (standardized)
    std::vector<double> grad(d + 1, 0.0);
    std::vector<double> trial(d + 1, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    auto loglik = [&](const std::vector<double>& b) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b[0];
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) z += b[j + 1] * xi[j];
            ll += y[i] * z - log1p_exp(z);
        }
        return ll * inv_n;
    };

    auto compute_grad = [&](const std::vector<double>& b, std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double z = b[0];
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j) z += b[j + 1] * xi[j];
            const double resid = y[i] - sigmoid(z);
            g[0] += resid;
            for (std::size_t j = 0; j < d; ++j) g[j + 1] += resid * xi[j];
        }
        for (double& v : g) v *= inv_n;
    };

    // original-coordinate coefficients for a standardized parameter vector
    auto unstandardize = [&](const std::vector<double>& g, double& intercept,
                             std::vector<double>& slopes) {
        intercept = g[0];
        for (std::size_t j = 0; j < d; ++j) {
            slopes[j] = g[j + 1] / sd[j];
            intercept -= g[j + 1] * mean[j] / sd[j];
        }
    };

    LogisticFit fit;
    fit.slopes.assign(d, 0.0);
    std::vector<double> slopes(d, 0.0);
    std::vector<double> prev_gamma(d + 1, 0.0);
    std::vector<double> prev_grad(d + 1, 0.0);
    double intercept = 0.0;
    double ll = loglik(gamma);
    int it = 0;
    bool have_prev = false;
    for (; it < kMaxIter; ++it) {
        compute_grad(gamma, grad);
        double gnorm2 = 0.0;
        for (double g : grad) gnorm2 += g * g;
        if (std::sqrt(gnorm2) < kGradTol) {
            fit.converged = true;
            break;
        }
        // Barzilai-Borwein spectral step, safeguarded by Armijo backtracking
        // so the log-likelihood never decreases
        double step = 1.0;
        if (have_prev) {
            double sy = 0.0;
            double yy = 0.0;
            for (std::size_t j = 0; j <= d; ++j) {
                const double sj = gamma[j] - prev_gamma[j];
                const double yj = grad[j] - prev_grad[j];
                sy += sj * yj;
                yy += yj * yj;
            }
            if (yy > 0.0 && sy < 0.0) step = std::clamp(-sy / yy, 1e-12, 1e8);
        }
        prev_gamma = gamma;
        prev_grad = grad;
        have_prev = true;

        double trial_ll = -std::numeric_limits<double>::infinity();
        for (;;) {
            for (std::size_t j = 0; j <= d; ++j) trial[j] = gamma[j] + step * grad[j];
            trial_ll = loglik(trial);
            if (trial_ll >= ll + 1e-4 * step * gnorm2) break;
            step *= 0.5;
            if (step < 1e-18) break;
        }
        if (trial_ll < ll) break; // no ascent direction progress possible
        bool moved = false;
        for (std::size_t j = 0; j <= d; ++j) moved |= trial[j] != gamma[j];
        if (!moved) break; // stagnant at floating-point resolution
        gamma = trial;
        ll = trial_ll;
        if (loglik_trace) loglik_trace->push_back(ll);

        unstandardize(gamma, intercept, slopes);
        double bnorm2 = intercept * intercept;
        for (double s : slopes) bnorm2 += s * s;
        if (bnorm2 > kCoefCap * kCoefCap) {
            const double scale = kCoefCap / std::sqrt(bnorm2);
            intercept *= scale;
            for (double& s : slopes) s *= scale;
            gamma[0] = intercept;
            for (std::size_t j = 0; j < d; ++j) {
                gamma[j + 1] = slopes[j] * sd[j];
                gamma[0] += slopes[j] * mean[j];
            }
            fit.separation_flagged = true;
            ll = loglik(gamma);
            break;
        }
    }

    unstandardize(gamma, fit.intercept, fit.slopes);
    fit.log_count_correction =
        std::log(static_cast<double>(n_s)) - std::log(static_cast<double>(n_t));
    fit.iterations = it;
    fit.final_loglik = ll;
    return fit;
}

Histogram make_histogram(std::span<const double> values, int bins) {
    if (bins < 1) throw ConfigError("make_histogram: bins must be >= 1");
    if (values.empty()) throw DataError("make_histogram: no values");
    Histogram h;
    h.lo = *std::min_element(values.begin(), values.end());
    h.hi = *std::max_element(values.begin(), values.end());
    if (!(h.hi > h.lo)) h.hi = h.lo + 1.0; // all values identical
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    const double width = (h.hi - h.lo) / bins;
    for (double v : values) {
        auto idx = static_cast<std::size_t>((v - h.lo) / width);
        if (idx >= h.counts.size()) idx = h.counts.size() - 1;
        ++h.counts[idx];
    }
    return h;
}

namespace {

double quantile(std::vector<double> sorted, double p) {
    // linear interpolation between order statistics
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::vector<std::size_t> class_rows(const Dataset& data, int cls) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.n(); ++i)
        if (data.label(i) == cls) rows.push_back(i);
    return rows;
}

} // namespace

RatioDiagnostic gcs_report(const Dataset& source, const Dataset& target_with_labels, int bins,
                           std::uint64_t seed) {
    if (!source.has_labels() || !target_with_labels.has_labels())
        throw DataError("gcs_report: both datasets must be labeled");
    if (source.d() != target_with_labels.d()) throw DataError("gcs_report: dimension mismatch");
    const int k = source.k;

    RatioDiagnostic diag;
    std::vector<Dataset> eval_parts;
    for (int cls = 1; cls <= k; ++cls) {
        const auto src_rows = class_rows(source, cls);
        const auto tgt_rows = class_rows(target_with_labels, cls);
        if (src_rows.size() < 2 || tgt_rows.size() < 2)
            throw DataError("gcs_report: class " + std::to_string(cls) +
                            " too small in source or target");
        const auto [src_train, src_test] =
            split(subset(source, src_rows), 0.5, derive_seed(seed, "diag-src", cls));
        const auto [tgt_train, tgt_test] =
            split(subset(target_with_labels, tgt_rows), 0.5, derive_seed(seed, "diag-tgt", cls));
        diag.fits.push_back(fit_ratio(src_train, tgt_train));
        eval_parts.push_back(src_test);
        eval_parts.push_back(tgt_test);
    }

    std::size_t eval_n = 0;
    for (const auto& p : eval_parts) eval_n += p.n();
    Matrix eval(eval_n, source.d());
    std::size_t row = 0;
    for (const auto& p : eval_parts)
        for (std::size_t i = 0; i < p.n(); ++i, ++row) {
            const auto src = p.x(i);
            std::copy(src.begin(), src.end(), eval.row(row).begin());
        }

    diag.ratios = Matrix(eval_n, static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < eval_n; ++i)
        for (int cls = 1; cls <= k; ++cls)
            diag.ratios(i, static_cast<std::size_t>(cls - 1)) =
                diag.fits[static_cast<std::size_t>(cls - 1)].ratio(eval.row(i));

    for (int cls = 0; cls < k; ++cls) {
        std::vector<double> col(eval_n, 0.0);
        for (std::size_t i = 0; i < eval_n; ++i) col[i] = diag.ratios(i, cls);
        diag.ratio_hists.push_back(make_histogram(col, bins));
    }

    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            RatioPairSummary s;
            s.class_a = a + 1;
            s.class_b = b + 1;
            std::vector<double> diff(eval_n, 0.0);
            std::vector<double> abs_diff(eval_n, 0.0);
            double sum = 0.0;
            for (std::size_t i = 0; i < eval_n; ++i) {
                diff[i] = diag.ratios(i, a) - diag.ratios(i, b);
                abs_diff[i] = std::abs(diff[i]);
                sum += diff[i];
            }
            s.mean_diff = sum / static_cast<double>(eval_n);
            s.diff_hist = make_histogram(diff, bins);
            std::sort(diff.begin(), diff.end());
            std::sort(abs_diff.begin(), abs_diff.end());
            for (double p : {0.05, 0.25, 0.5, 0.75, 0.95}) s.quantiles.push_back(quantile(diff, p));
            s.median_abs_diff = quantile(abs_diff, 0.5);
            diag.pairs.push_back(std::move(s));
        }
    }
    return diag;
}

namespace {

nlohmann::json hist_to_json(const Histogram& h) {
    return {{"lo", h.lo}, {"hi", h.hi}, {"counts", h.counts}};
}

} // namespace

std::string RatioDiagnostic::to_json_string() const {
    nlohmann::json j;
    auto& fits_json = j["fits"] = nlohmann::json::array();
    for (const auto& f : fits) {
        fits_json.push_back({{"intercept", f.intercept},
                             {"slopes", f.slopes},
                             {"log_count_correction", f.log_count_correction},
                             {"iterations", f.iterations},
                             {"converged", f.converged},
                             {"separation_flagged", f.separation_flagged},
                             {"final_loglik", f.final_loglik}});
    }
    auto& rh = j["ratio_histograms"] = nlohmann::json::array();
    for (const auto& h : ratio_hists) rh.push_back(hist_to_json(h));
    auto& pj = j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs) {
        pj.push_back({{"class_a", p.class_a},
                      {"class_b", p.class_b},
                      {"mean_diff", p.mean_diff},
                      {"median_abs_diff", p.median_abs_diff},
                      {"quantiles", p.quantiles},
                      {"diff_histogram", hist_to_json(p.diff_hist)}});
    }
    j["evaluation_points"] = ratios.rows;
    return j.dump(2);
}

void RatioDiagnostic::save_json(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write diagnostic file: " + path.string());
    out << to_json_string() << '\n';
}

void RatioDiagnostic::save_hist_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write histogram file: " + path.string());
    out << "series,bin_lo,bin_hi,count\n";
    auto emit = [&out](const std::string& name, const Histogram& h) {
        const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            char lo[32];
            char hi[32];
            std::snprintf(lo, sizeof(lo), "%.17g", h.lo + width * static_cast<double>(b));
            std::snprintf(hi, sizeof(hi), "%.17g", h.lo + width * static_cast<double>(b + 1));
            out << name << ',' << lo << ',' << hi << ',' << h.counts[b] << '\n';
        }
    };
    for (std::size_t c = 0; c < ratio_hists.size(); ++c)
        emit("ratio_class_" + std::to_string(c + 1), ratio_hists[c]);
    for (const auto& p : pairs)
        emit("diff_" + std::to_string(p.class_a) + "_" + std::to_string(p.class_b), p.diff_hist);
}

} // namespace gcs
