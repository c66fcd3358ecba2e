#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/matrix.hpp"

namespace gcs {

// Domain-indicator logistic regression fitted to one class's source and
// target samples. The odds identity turns the fitted posterior into a
// density-ratio estimate:
//   r_hat(x) = (n_source/n_target) * exp(intercept + slopes' x).
struct LogisticFit {
    double intercept = 0.0;
    std::vector<double> slopes;
    double log_count_correction = 0.0; // log(n_source/n_target)
    int iterations = 0;
    bool converged = false;
    bool separation_flagged = false;
    double final_loglik = 0.0;

    double ratio(std::span<const double> x) const;
};

// Fits target-vs-source by monotone full-batch gradient ascent on the mean
// log-likelihood until the gradient norm falls below 1e-8. Perfect
// separation caps the coefficient norm at 50 and sets the flag. When given,
// loglik_trace records the objective after every accepted step.
LogisticFit fit_ratio(const Dataset& source_class, const Dataset& target_class,
                      std::vector<double>* loglik_trace = nullptr);

struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<std::size_t> counts;
};

Histogram make_histogram(std::span<const double> values, int bins);

struct RatioPairSummary {
    int class_a = 1;
    int class_b = 2;
    double mean_diff = 0.0;
    double median_abs_diff = 0.0;
    // 5%, 25%, 50%, 75%, 95% quantiles of the signed differences
    std::vector<double> quantiles;
    Histogram diff_hist;
};

// Per-class ratio fits with evaluation on held-out halves. GCS predicts all
// per-class ratios coincide, so the pairwise differences concentrate at 0.
struct RatioDiagnostic {
    std::vector<LogisticFit> fits;    // per class
    Matrix ratios;                    // evaluation points x k
    std::vector<Histogram> ratio_hists;
    std::vector<RatioPairSummary> pairs;

    std::string to_json_string() const;
    void save_json(const std::filesystem::path& path) const;
    // bin edges/counts for external plotting
    void save_hist_csv(const std::filesystem::path& path) const;
};

// Splits each class of each domain in half, fits the per-class ratios on the
// training halves and evaluates every ratio and pairwise difference on the
// pooled test halves.
RatioDiagnostic gcs_report(const Dataset& source, const Dataset& target_with_labels, int bins,
                           std::uint64_t seed = 0);

} // namespace gcs
