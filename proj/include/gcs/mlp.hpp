#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/matrix.hpp"

namespace gcs {

// Fully-connected ReLU network configuration. depth counts hidden layers,
// all of the same width; output_dim must equal k-1 (reference-class
// parameterization with the k-th logit pinned to zero). output_clip bounds
// every output component to [-output_clip, +output_clip].
struct MlpConfig {
    int depth = 2;
    int width = 16;
    int output_dim = 1;
    double learning_rate = 1e-2;
    int batch_size = 32;
    int epochs = 200;
    std::uint64_t seed = 0;
    double output_clip = 30.0;

    void validate() const;
};

// Network parameters: weights W_0..W_K and biases mu_0..mu_{K-1}. The output
// layer carries no bias. W_0 is width x d, hidden W_j width x width, W_K is
// output_dim x width.
struct MlpParams {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    std::size_t input_dim() const { return weights.front().cols; }
    std::size_t output_dim() const { return weights.back().rows; }
    std::size_t hidden_layers() const { return biases.size(); }
};

// He-style uniform initialization, biases zero, drawn from the seeded stream.
MlpParams init_params(const MlpConfig& config, std::size_t input_dim);

// phi_hat(x): the clipped network output, length output_dim.
std::vector<double> forward_phi(const MlpParams& params, std::span<const double> x, double clip);

// Reference-class softmax: appends phi_k = 0 and exponentiates. Returns a
// length-(output_dim+1) probability vector.
SimplexVector eta_from_phi(std::span<const double> phi);

// Mean negative log-likelihood of the categorical model over the batch.
double nll_loss(const MlpParams& params, const Dataset& batch, double clip);

// Exact analytic gradient of nll_loss. ReLU subgradient at 0 is 0; the clip
// gate passes gradient only where |raw output| < clip.
MlpParams gradient(const MlpParams& params, const Dataset& batch, double clip);

// Trained source model: network, configuration, source class proportions and
// the feature scaling its inputs expect.
struct SourceModel {
    MlpParams params;
    MlpConfig config;
    SimplexVector pi_P;
    ScalingSpec scaling;

    std::vector<double> phi(std::span<const double> x) const {
        return forward_phi(params, x, config.output_clip);
    }
    SimplexVector eta(std::span<const double> x) const { return eta_from_phi(phi(x)); }

    std::string to_json_string() const;
    static SourceModel from_json_string(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static SourceModel load(const std::filesystem::path& path);
};

SimplexVector eta_p(const SourceModel& model, std::span<const double> x);

// Adam training over shuffled mini-batches; deterministic given config.seed.
// Returns the epoch-end snapshot with the lowest full-data NLL (the
// initialization counts as the epoch-0 snapshot).
SourceModel train_source(const Dataset& data, const MlpConfig& config);
SourceModel train_source(const Dataset& data, const MlpConfig& config, const ScalingSpec& scaling);

// Trains every candidate on a train split and returns the config with the
// lowest validation NLL; ties break to the earliest grid entry.
MlpConfig grid_search(const Dataset& data, const std::vector<MlpConfig>& grid,
                      double valid_fraction, std::uint64_t seed);

// The default hyperparameter grid used when a search is requested.
std::vector<MlpConfig> default_grid(int k);

} // namespace gcs
