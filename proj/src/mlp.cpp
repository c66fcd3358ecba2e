#include "gcs/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "gcs/errors.hpp"
#include "gcs/rng.hpp"

namespace gcs {

void MlpConfig::validate() const {
    if (depth < 1) throw ConfigError("MlpConfig: depth must be >= 1");
    if (width < 1) throw ConfigError("MlpConfig: width must be >= 1");
    if (output_dim < 1) throw ConfigError("MlpConfig: output_dim must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("MlpConfig: learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("MlpConfig: batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("MlpConfig: epochs must be >= 0");
    if (!(output_clip > 0.0)) throw ConfigError("MlpConfig: output_clip must be positive");
}

MlpParams init_params(const MlpConfig& config, std::size_t input_dim) {
    config.validate();
    RngStream rng(derive_seed(config.seed, "init"));
    MlpParams params;
    const auto K = static_cast<std::size_t>(config.depth);
    const auto w = static_cast<std::size_t>(config.width);
    const auto out = static_cast<std::size_t>(config.output_dim);

    auto he_uniform = [&rng](Matrix& m) {
        const double bound = std::sqrt(6.0 / static_cast<double>(m.cols));
        for (double& v : m.data) v = bound * (2.0 * rng.uniform() - 1.0);
    };

    params.weights.reserve(K + 1);
    params.biases.reserve(K);
    for (std::size_t layer = 0; layer <= K; ++layer) {
        const std::size_t rows = (layer == K) ? out : w;
        const std::size_t cols = (layer == 0) ? input_dim : w;
        Matrix m(rows, cols);
        he_uniform(m);
        params.weights.push_back(std::move(m));
        if (layer < K) params.biases.emplace_back(w, 0.0);
    }
    return params;
}

namespace {

void check_shapes(const MlpParams& params, std::size_t x_dim) {
    if (params.weights.empty()) throw DataError("MlpParams: no layers");
    if (params.weights.front().cols != x_dim)
        throw DataError("forward_phi: input dimension mismatch");
    if (params.biases.size() + 1 != params.weights.size())
        throw DataError("MlpParams: bias/weight count mismatch");
}

// Forward pass storing hidden activations; h[0] = x, h[j+1] = ReLU(z_j).
// Returns the raw (unclipped) output.
std::vector<double> forward_raw(const MlpParams& params, std::span<const double> x,
                                std::vector<std::vector<double>>* activations) {
    const std::size_t K = params.biases.size();
    std::vector<double> h(x.begin(), x.end());
    if (activations) {
        activations->clear();
        activations->push_back(h);
    }
    for (std::size_t j = 0; j < K; ++j) {
        const Matrix& W = params.weights[j];
        const auto& mu = params.biases[j];
        std::vector<double> next(W.rows, 0.0);
        for (std::size_t r = 0; r < W.rows; ++r) {
            double acc = mu[r];
            const double* wr = W.data.data() + r * W.cols;
            for (std::size_t c = 0; c < W.cols; ++c) acc += wr[c] * h[c];
            next[r] = acc > 0.0 ? acc : 0.0;
        }
        h = std::move(next);
        if (activations) activations->push_back(h);
    }
    const Matrix& W = params.weights.back();
    std::vector<double> out(W.rows, 0.0);
    for (std::size_t r = 0; r < W.rows; ++r) {
        double acc = 0.0;
        const double* wr = W.data.data() + r * W.cols;
        for (std::size_t c = 0; c < W.cols; ++c) acc += wr[c] * h[c];
        out[r] = acc;
    }
    return out;
}

// log(1 + sum_l exp(phi_l)) computed stably.
double log_partition(std::span<const double> phi) {
    double m = 0.0;
    for (double v : phi) m = std::max(m, v);
    double s = std::exp(-m);
    for (double v : phi) s += std::exp(v - m);
    return m + std::log(s);
}

} // namespace

std::vector<double> forward_phi(const MlpParams& params, std::span<const double> x, double clip) {
    check_shapes(params, x.size());
    auto out = forward_raw(params, x, nullptr);
    for (double& v : out) {
        if (!std::isfinite(v)) throw NumericError("forward_phi: non-finite output");
        v = std::clamp(v, -clip, clip);
    }
    return out;
}

SimplexVector eta_from_phi(std::span<const double> phi) {
    const double logz = log_partition(phi);
    std::vector<double> eta(phi.size() + 1, 0.0);
    for (std::size_t l = 0; l < phi.size(); ++l) eta[l] = std::exp(phi[l] - logz);
    eta[phi.size()] = std::exp(-logz);
    return SimplexVector::from_unnormalized(std::move(eta));
}

SimplexVector eta_p(const SourceModel& model, std::span<const double> x) {
    return model.eta(x);
}

double nll_loss(const MlpParams& params, const Dataset& batch, double clip) {
    if (!batch.has_labels()) throw DataError("nll_loss: labels absent");
    if (params.output_dim() + 1 != static_cast<std::size_t>(batch.k))
        throw DataError("nll_loss: output_dim must equal k-1");
    double total = 0.0;
    for (std::size_t i = 0; i < batch.n(); ++i) {
        const auto phi = forward_phi(params, batch.x(i), clip);
        const int y = batch.label(i);
        double ll = -log_partition(phi);
        if (y < batch.k) ll += phi[static_cast<std::size_t>(y - 1)];
        total -= ll;
    }
    const double loss = total / static_cast<double>(batch.n());
    if (!std::isfinite(loss)) throw NumericError("nll_loss: non-finite loss");
    return loss;
}

MlpParams gradient(const MlpParams& params, const Dataset& batch, double clip) {
    if (!batch.has_labels()) throw DataError("gradient: labels absent");
    if (params.output_dim() + 1 != static_cast<std::size_t>(batch.k))
        throw DataError("gradient: output_dim must equal k-1");

    MlpParams grad;
    grad.weights.reserve(params.weights.size());
    for (const auto& W : params.weights) grad.weights.emplace_back(W.rows, W.cols);
    for (const auto& mu : params.biases) grad.biases.emplace_back(mu.size(), 0.0);

    const std::size_t K = params.biases.size();
    const double inv_n = 1.0 / static_cast<double>(batch.n());
    std::vector<std::vector<double>> h;

    for (std::size_t i = 0; i < batch.n(); ++i) {
        const auto raw = forward_raw(params, batch.x(i), &h);
        std::vector<double> phi(raw.size());
        for (std::size_t l = 0; l < raw.size(); ++l) {
            if (!std::isfinite(raw[l])) throw NumericError("gradient: non-finite output");
            phi[l] = std::clamp(raw[l], -clip, clip);
        }

        // dL/dphi_l = softmax_l - I(y == l+1), gated by the active clip
        const auto eta = eta_from_phi(phi);
        const int y = batch.label(i);
        std::vector<double> delta(raw.size());
        for (std::size_t l = 0; l < raw.size(); ++l) {
            double g = eta[l] - (static_cast<std::size_t>(y - 1) == l ? 1.0 : 0.0);
            if (std::abs(raw[l]) >= clip) g = 0.0;
            delta[l] = g * inv_n;
        }

        // output layer (no bias)
        const Matrix& Wk = params.weights[K];
        Matrix& Gk = grad.weights[K];
        const auto& hk = h[K];
        std::vector<double> back(Wk.cols, 0.0);
        for (std::size_t r = 0; r < Wk.rows; ++r) {
            const double dr = delta[r];
            double* gr = Gk.data.data() + r * Gk.cols;
            const double* wr = Wk.data.data() + r * Wk.cols;
            for (std::size_t c = 0; c < Wk.cols; ++c) {
                gr[c] += dr * hk[c];
                back[c] += wr[c] * dr;
            }
        }

        // hidden layers, ReLU gate: h[j+1] > 0
        for (std::size_t j = K; j-- > 0;) {
            const Matrix& W = params.weights[j];
            Matrix& G = grad.weights[j];
            auto& gb = grad.biases[j];
            const auto& hin = h[j];
            const auto& hout = h[j + 1];
            std::vector<double> next_back(W.cols, 0.0);
            for (std::size_t r = 0; r < W.rows; ++r) {
                if (hout[r] <= 0.0) continue;
                const double dr = back[r];
                gb[r] += dr;
                double* gr = G.data.data() + r * G.cols;
                const double* wr = W.data.data() + r * W.cols;
                for (std::size_t c = 0; c < W.cols; ++c) {
                    gr[c] += dr * hin[c];
                    next_back[c] += wr[c] * dr;
                }
            }
            back = std::move(next_back);
        }
    }
    return grad;
}

namespace {

struct AdamState {
    MlpParams m;
    MlpParams v;
    long step = 0;

    explicit AdamState(const MlpParams& shape) {
        for (const auto& W : shape.weights) {
            m.weights.emplace_back(W.rows, W.cols);
            v.weights.emplace_back(W.rows, W.cols);
        }
        for (const auto& mu : shape.biases) {
            m.biases.emplace_back(mu.size(), 0.0);
            v.biases.emplace_back(mu.size(), 0.0);
        }
    }

    void update(MlpParams& params, const MlpParams& grad, double lr) {
        constexpr double beta1 = 0.9;
        constexpr double beta2 = 0.999;
        constexpr double eps = 1e-8;
        ++step;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        auto apply = [&](double& p, double g, double& mi, double& vi) {
            mi = beta1 * mi + (1.0 - beta1) * g;
            vi = beta2 * vi + (1.0 - beta2) * g * g;
            p -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + eps);
        };
        for (std::size_t l = 0; l < params.weights.size(); ++l)
            for (std::size_t i = 0; i < params.weights[l].data.size(); ++i)
                apply(params.weights[l].data[i], grad.weights[l].data[i],
                      m.weights[l].data[i], v.weights[l].data[i]);
        for (std::size_t l = 0; l < params.biases.size(); ++l)
            for (std::size_t i = 0; i < params.biases[l].size(); ++i)
                apply(params.biases[l][i], grad.biases[l][i],
                      m.biases[l][i], v.biases[l][i]);
    }
};

} // namespace

SourceModel train_source(const Dataset& data, const MlpConfig& config) {
    return train_source(data, config, ScalingSpec::unit(data.d()));
}

SourceModel train_source(const Dataset& data, const MlpConfig& config, const ScalingSpec& scaling) {
    config.validate();
    if (!data.has_labels()) throw DataError("train_source: labels absent");
    if (config.output_dim != data.k - 1)
        throw ConfigError("train_source: output_dim must equal k-1");
    if (data.n() < static_cast<std::size_t>(config.batch_size))
        throw DataError("train_source: fewer samples than batch_size");

    MlpParams params = init_params(config, data.d());
    MlpParams best = params;
    double best_nll = nll_loss(params, data, config.output_clip);

    AdamState adam(params);
    RngStream shuffle_rng(derive_seed(config.seed, "shuffle"));
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto perm = shuffled_indices(data.n(), shuffle_rng);
        for (std::size_t start = 0; start < data.n(); start += bs) {
            const std::size_t stop = std::min(start + bs, data.n());
            std::vector<std::size_t> rows(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                          perm.begin() + static_cast<std::ptrdiff_t>(stop));
            const Dataset batch = subset(data, rows);
            const MlpParams grad = gradient(params, batch, config.output_clip);
            adam.update(params, grad, config.learning_rate);
        }
        const double nll = nll_loss(params, data, config.output_clip);
        if (!std::isfinite(nll))
            throw NumericError("train_source: non-finite loss at epoch " + std::to_string(epoch));
        if (nll < best_nll) {
            best_nll = nll;
            best = params;
        }
    }

    return SourceModel{std::move(best), config, class_proportions(data), scaling};
}

MlpConfig grid_search(const Dataset& data, const std::vector<MlpConfig>& grid,
                      double valid_fraction, std::uint64_t seed) {
    if (grid.empty()) throw ConfigError("grid_search: empty grid");
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
        throw ConfigError("grid_search: valid_fraction must lie in (0,1)");

    const auto [train, valid] = split(data, 1.0 - valid_fraction, derive_seed(seed, "gridsplit"));
    std::size_t best_idx = 0;
    double best_nll = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        MlpConfig candidate = grid[i];
        candidate.seed = derive_seed(seed, "gridtrain", i);
        const SourceModel model = train_source(train, candidate);
        const double nll = nll_loss(model.params, valid, candidate.output_clip);
        if (nll < best_nll) {
            best_nll = nll;
            best_idx = i;
        }
    }
    return grid[best_idx];
}

std::vector<MlpConfig> default_grid(int k) {
    std::vector<MlpConfig> grid;
    for (int depth : {1, 2, 3})
        for (int width : {8, 16, 32, 64})
            for (double lr : {1e-3, 1e-2}) {
                MlpConfig c;
                c.depth = depth;
                c.width = width;
                c.learning_rate = lr;
                c.output_dim = k - 1;
                grid.push_back(c);
            }
    return grid;
}

// --- serialization ---

namespace {

nlohmann::json config_to_json(const MlpConfig& c) {
    return {{"depth", c.depth},
            {"width", c.width},
            {"output_dim", c.output_dim},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"output_clip", c.output_clip}};
}

MlpConfig config_from_json(const nlohmann::json& j) {
    MlpConfig c;
    c.depth = j.at("depth").get<int>();
    c.width = j.at("width").get<int>();
    c.output_dim = j.at("output_dim").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_clip = j.at("output_clip").get<double>();
    return c;
}

} // namespace

std::string SourceModel::to_json_string() const {
    nlohmann::json j;
    j["config"] = config_to_json(config);
    auto& weights = j["weights"] = nlohmann::json::array();
    for (const auto& W : params.weights)
        weights.push_back({{"rows", W.rows}, {"cols", W.cols}, {"data", W.data}});
    j["biases"] = params.biases;
    j["pi_P"] = pi_P.probs;
    j["scaling"] = {{"mins", scaling.mins}, {"maxs", scaling.maxs}};
    return j.dump(2);
}

SourceModel SourceModel::from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model JSON parse error: ") + e.what());
    }
    try {
        SourceModel m{MlpParams{}, config_from_json(j.at("config")), SimplexVector{},
                      ScalingSpec{}};
        for (const auto& w : j.at("weights")) {
            Matrix W(w.at("rows").get<std::size_t>(), w.at("cols").get<std::size_t>());
            W.data = w.at("data").get<std::vector<double>>();
            if (W.data.size() != W.rows * W.cols) throw DataError("model JSON: weight size mismatch");
            m.params.weights.push_back(std::move(W));
        }
        m.params.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        m.pi_P = SimplexVector::checked(j.at("pi_P").get<std::vector<double>>());
        m.scaling.mins = j.at("scaling").at("mins").get<std::vector<double>>();
        m.scaling.maxs = j.at("scaling").at("maxs").get<std::vector<double>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model JSON schema error: ") + e.what());
    }
}

void SourceModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << to_json_string() << '\n';
}

SourceModel SourceModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

} // namespace gcs
