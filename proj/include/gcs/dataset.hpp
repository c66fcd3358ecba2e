#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcs/matrix.hpp"

namespace gcs {

// A probability vector over the k classes. Entries are non-negative and sum
// to 1 within 1e-12. Holds class proportions (pi) as well as conditional
// class probabilities eta(x).
struct SimplexVector {
    std::vector<double> probs;

    // Validates non-negativity and the sum constraint.
    static SimplexVector checked(std::vector<double> p);
    // Divides by the (positive) sum; entries must be non-negative.
    static SimplexVector from_unnormalized(std::vector<double> p);
    static SimplexVector uniform(std::size_t k);

    std::size_t size() const { return probs.size(); }
    double operator[](std::size_t i) const { return probs[i]; }
};

// Per-column affine map onto [0,1], fitted on training data. Columns with
// max == min are mapped to the constant 0.5.
struct ScalingSpec {
    std::vector<double> mins;
    std::vector<double> maxs;

    static ScalingSpec unit(std::size_t d); // identity on data already in [0,1]
    std::size_t dim() const { return mins.size(); }
};

// The universal sample container: an n x d feature matrix with optional
// integer labels in {1..k}. Feature entries live in [0,1] once scaling has
// been applied; raw (pre-scaling) data may lie outside.
struct Dataset {
    Matrix features;
    std::optional<std::vector<int>> labels;
    int k = 2;

    Dataset() = default;
    Dataset(Matrix f, std::optional<std::vector<int>> y, int k_classes);

    std::size_t n() const { return features.rows; }
    std::size_t d() const { return features.cols; }
    bool has_labels() const { return labels.has_value(); }
    int label(std::size_t i) const { return (*labels)[i]; }
    std::span<const double> x(std::size_t i) const { return features.row(i); }
};

// CSV ingestion. Header row required, comma delimiter, decimal-point reals.
// If label_column is given, that column must hold integers >= 1 and k is
// inferred as the maximum observed label unless k_override is supplied.
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::string> label_column = std::nullopt,
                 std::optional<int> k_override = std::nullopt);

ScalingSpec fit_scaling(const Dataset& data);

// Applies the per-column affine map and clamps results into [0,1].
Dataset apply_scaling(const Dataset& data, const ScalingSpec& spec);

// Empirical class frequencies; requires labels.
SimplexVector class_proportions(const Dataset& data);

// Deterministic random partition. First part holds round(fraction * n) rows.
std::pair<Dataset, Dataset> split(const Dataset& data, double fraction, std::uint64_t seed);

// Row subset in the given order.
Dataset subset(const Dataset& data, const std::vector<std::size_t>& rows);

} // namespace gcs
