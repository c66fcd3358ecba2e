#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/mlp.hpp"

namespace gcs {

// argmax over 1-based labels; ties break to the smallest label index.
int argmax_label(std::span<const double> scores);

// Plug-in target conditional probabilities: renormalize eta_P by the
// per-class prior ratios pi_Q/pi_P. The shift function h(x) cancels and
// never appears.
SimplexVector plugin_eta(const SimplexVector& eta_p, const SimplexVector& pi_p,
                         const SimplexVector& pi_q);

// Plug-in label from arbitrary positive class weights w_l applied to eta_P:
// argmax_l w_l * eta_{P,l}(x). Invariant under rescaling all weights by a
// common positive constant.
int classify_weighted(const SimplexVector& eta_p, std::span<const double> weights);

// The target classifier: a trained source model combined with estimated
// target proportions.
struct PluginClassifier {
    SourceModel model;
    SimplexVector pi_Q;

    SimplexVector eta_q(std::span<const double> x) const;
    int classify(std::span<const double> x) const;
};

SimplexVector eta_q_hat(const PluginClassifier& c, std::span<const double> x);
int classify(const PluginClassifier& c, std::span<const double> x);

// The Bayes rule built from the true target conditional probabilities;
// available in simulations only.
struct OracleClassifier {
    std::function<SimplexVector(std::span<const double>)> eta_Q;

    int classify(std::span<const double> x) const { return argmax_label(eta_Q(x).probs); }
};

// Paired empirical excess risk: misclassification rate of `predictions`
// minus that of the oracle's own predictions on the same test set.
double excess_risk(std::span<const int> predictions, const OracleClassifier& oracle,
                   const Matrix& test_features, std::span<const int> test_labels);

double error_rate(std::span<const int> predictions, std::span<const int> labels);

// Row-wise classification of a feature matrix with any classifier callable.
std::vector<int> classify_rows(const Matrix& features,
                               const std::function<int(std::span<const double>)>& clf);

// Single-column prediction CSV aligned to input row order.
void save_predictions_csv(const std::filesystem::path& path, std::span<const int> predictions);
std::vector<int> load_predictions_csv(const std::filesystem::path& path);

} // namespace gcs
