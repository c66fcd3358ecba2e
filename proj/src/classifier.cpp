#include "gcs/classifier.hpp"

#include <cmath>
#include <fstream>

#include "gcs/errors.hpp"

namespace gcs {

int argmax_label(std::span<const double> scores) {
    if (scores.empty()) throw DataError("argmax_label: empty scores");
    std::size_t best = 0;
    for (std::size_t l = 1; l < scores.size(); ++l)
        if (scores[l] > scores[best]) best = l;
    return static_cast<int>(best) + 1;
}

SimplexVector plugin_eta(const SimplexVector& eta_p, const SimplexVector& pi_p,
                         const SimplexVector& pi_q) {
    const std::size_t k = eta_p.size();
    if (pi_p.size() != k || pi_q.size() != k) throw DataError("plugin_eta: dimension mismatch");
    std::vector<double> scores(k, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
        if (!(pi_p[l] > 0.0)) throw DataError("plugin_eta: empty source class");
        scores[l] = eta_p[l] * pi_q[l] / pi_p[l];
    }
    return SimplexVector::from_unnormalized(std::move(scores));
}

int classify_weighted(const SimplexVector& eta_p, std::span<const double> weights) {
    if (weights.size() != eta_p.size()) throw DataError("classify_weighted: dimension mismatch");
    std::vector<double> scores(eta_p.size(), 0.0);
    for (std::size_t l = 0; l < eta_p.size(); ++l) scores[l] = weights[l] * eta_p[l];
    return argmax_label(scores);
}

SimplexVector PluginClassifier::eta_q(std::span<const double> x) const {
    return plugin_eta(model.eta(x), model.pi_P, pi_Q);
}

int PluginClassifier::classify(std::span<const double> x) const {
    return argmax_label(eta_q(x).probs);
}

SimplexVector eta_q_hat(const PluginClassifier& c, std::span<const double> x) {
    return c.eta_q(x);
}

int classify(const PluginClassifier& c, std::span<const double> x) {
    return c.classify(x);
}

double error_rate(std::span<const int> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw DataError("error_rate: length mismatch");
    if (predictions.empty()) throw DataError("error_rate: empty inputs");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] != labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double excess_risk(std::span<const int> predictions, const OracleClassifier& oracle,
                   const Matrix& test_features, std::span<const int> test_labels) {
    if (predictions.size() != test_features.rows || test_labels.size() != test_features.rows)
        throw DataError("excess_risk: length mismatch");
    std::vector<int> oracle_pred(test_features.rows, 0);
    for (std::size_t i = 0; i < test_features.rows; ++i)
        oracle_pred[i] = oracle.classify(test_features.row(i));
    return error_rate(predictions, test_labels) - error_rate(oracle_pred, test_labels);
}

std::vector<int> classify_rows(const Matrix& features,
                               const std::function<int(std::span<const double>)>& clf) {
    std::vector<int> out(features.rows, 0);
    for (std::size_t i = 0; i < features.rows; ++i) out[i] = clf(features.row(i));
    return out;
}

void save_predictions_csv(const std::filesystem::path& path, std::span<const int> predictions) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write predictions file: " + path.string());
    out << "prediction\n";
    for (int p : predictions) out << p << '\n';
}

std::vector<int> load_predictions_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open predictions file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty predictions file: " + path.string());
    std::vector<int> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(std::stoi(line));
    }
    return out;
}

} // namespace gcs
