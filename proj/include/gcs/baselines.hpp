#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/matrix.hpp"
#include "gcs/proportions.hpp"

namespace gcs {

// Per-class kernel density estimator with a Gaussian product kernel and a
// single bandwidth shared across dimensions.
struct KdeModel {
    std::vector<Matrix> class_features; // index = class - 1
    double bandwidth = 0.1;

    static KdeModel fit(const Dataset& data, double bandwidth);

    // (1/n_y) sum_i prod_j (1/b) phi((x_j - X_ij)/b)
    double density(int cls, std::span<const double> x) const;
    // log of the above, safe against underflow
    double log_density(int cls, std::span<const double> x) const;
};

double kde_density(const KdeModel& m, int cls, std::span<const double> x);

// Kernel-density plug-in classifier: argmax_l pi_l * P_hat(x | l).
struct KdeClassifier {
    KdeModel kde;
    SimplexVector pi;
    TargetProportionEstimate estimate; // PMLE diagnostics (maity-pc only)

    int classify(std::span<const double> x) const;
};

// Density ratios P_hat(x_j|l)/P_hat(x_j|k) for the target sample, assembled
// in log space. Log ratios are clamped to +-500 so the weights stay finite.
RatioWeights kde_ratio_weights(const KdeModel& kde, const Dataset& target);

// PMLE target proportions through kernel-density ratios.
KdeClassifier maity_pc(const Dataset& source, const Dataset& target, double bandwidth);

// Same classifier with the ideal proportions taken from target label
// frequencies; benchmark-only.
KdeClassifier maity_ic(const Dataset& source, const Dataset& target_with_labels, double bandwidth);

// Brute-force K-nearest-neighbors posterior estimator.
struct KnnModel {
    Matrix features;
    std::vector<int> labels;
    int k_classes = 2;
    int neighbors = 5;

    static KnnModel fit(const Dataset& data, int neighbors);

    // fraction of each label among the nearest neighbors; distance ties
    // include the smaller row index
    SimplexVector eta(std::span<const double> x) const;
};

SimplexVector knn_eta(const KnnModel& m, std::span<const double> x);

// KNN posterior + EM-estimated target proportions, classifying by the
// plug-in rule.
struct SaerensClassifier {
    KnnModel knn;
    SimplexVector pi_P;
    TargetProportionEstimate estimate;

    int classify(std::span<const double> x) const;
};

SaerensClassifier saerens_classifier(const Dataset& source, const Dataset& target, int neighbors);

// Hyperparameter selection by validation accuracy on a source split
// (target labels are unavailable). Ties break to the earliest grid entry.
double select_bandwidth(const Dataset& source, std::span<const double> grid, std::uint64_t seed);
int select_neighbors(const Dataset& source, std::span<const int> grid, std::uint64_t seed);

inline constexpr double kBandwidthGrid[] = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
inline constexpr int kNeighborGrid[] = {1, 3, 5, 11, 21, 51};

} // namespace gcs
