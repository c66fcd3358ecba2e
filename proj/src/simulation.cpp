#include "gcs/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

#include <json.hpp>

#include "gcs/baselines.hpp"
#include "gcs/classifier.hpp"
#include "gcs/errors.hpp"
#include "gcs/proportions.hpp"

namespace gcs {

Scenario scenario_from_string(const std::string& name) {
    if (name == "I" || name == "1") return Scenario::I;
    if (name == "II" || name == "2") return Scenario::II;
    if (name == "III" || name == "3") return Scenario::III;
    throw ConfigError("unknown scenario '" + name + "' (valid: I, II, III)");
}

std::string to_string(Scenario sc) {
    switch (sc) {
        case Scenario::I: return "I";
        case Scenario::II: return "II";
        case Scenario::III: return "III";
    }
    return "?";
}

void ScenarioSpec::validate() const {
    if (!(pi_Q1 > 0.0 && pi_Q1 < 1.0)) throw ConfigError("ScenarioSpec: pi_Q1 must lie in (0,1)");
    if (n_P < 1 || n_Q < 1 || n_test < 1)
        throw ConfigError("ScenarioSpec: sample sizes must be positive");
}

namespace {

const double kExpMeanSource = std::exp(0.5) - 1.0; // source class-1 mean
const double kExpMeanTarget = 1.0 - std::exp(-0.5); // target class-1 mean

double norm_pdf(double t, double mu) {
    const double z = t - mu;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double exp_pdf(double t, double mean) {
    if (t < 0.0) return 0.0;
    return std::exp(-t / mean) / mean;
}

// Beta(a,b) with integer shapes used by Scenario II: 1/B(6,2) = 1/B(2,6) = 42.
double beta62_pdf(double t) {
    if (t < 0.0 || t > 1.0) return 0.0;
    return 42.0 * t * t * t * t * t * (1.0 - t);
}

double beta26_pdf(double t) {
    if (t < 0.0 || t > 1.0) return 0.0;
    const double u = 1.0 - t;
    return 42.0 * t * u * u * u * u * u;
}

bool is_support_integer(double t) {
    const double r = std::round(t);
    return std::abs(t - r) <= 1e-9 && r >= 1.0 && r <= 4.0;
}

} // namespace

double component_pdf(Scenario sc, Domain dom, int cls, double t) {
    switch (sc) {
        case Scenario::I: {
            if (!is_support_integer(t))
                throw DataError("Scenario I: point outside {1,2,3,4} support");
            const double r = std::round(t);
            if (cls == 1) return 0.25;
            return r <= 2.0 ? 0.5 : 0.0;
        }
        case Scenario::II:
            if (t < 0.0 || t > 1.0) throw DataError("Scenario II: point outside [0,1] support");
            return cls == 1 ? beta62_pdf(t) : beta26_pdf(t);
        case Scenario::III:
            if (cls == 1)
                return exp_pdf(t, dom == Domain::source ? kExpMeanSource : kExpMeanTarget);
            return norm_pdf(t, dom == Domain::source ? 1.0 : 0.0);
    }
    throw ConfigError("component_pdf: bad scenario");
}

std::vector<int> draw_labels(double pi1, std::size_t n, RngStream& rng) {
    std::vector<int> labels(n, 2);
    for (std::size_t i = 0; i < n; ++i)
        if (rng.uniform() < pi1) labels[i] = 1;
    return labels;
}

Matrix draw_features_raw(Scenario sc, Domain dom, std::span<const int> labels, RngStream& rng) {
    Matrix f(labels.size(), kScenarioDim);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        for (std::size_t j = 0; j < kScenarioDim; ++j) {
            double v = 0.0;
            switch (sc) {
                case Scenario::I:
                    v = 1.0 + static_cast<double>(rng.uniform_below(y == 1 ? 4 : 2));
                    break;
                case Scenario::II:
                    v = y == 1 ? rng.beta(6.0, 2.0) : rng.beta(2.0, 6.0);
                    break;
                case Scenario::III:
                    if (y == 1)
                        v = rng.exponential(dom == Domain::source ? kExpMeanSource
                                                                  : kExpMeanTarget);
                    else
                        v = (dom == Domain::source ? 1.0 : 0.0) + rng.normal();
                    break;
            }
            f(i, j) = v;
        }
    }
    return f;
}

ScalingSpec scenario_scaling(Scenario sc, const Matrix& source_raw) {
    switch (sc) {
        case Scenario::I:
            return ScalingSpec{std::vector<double>(kScenarioDim, 1.0),
                               std::vector<double>(kScenarioDim, 4.0)};
        case Scenario::II:
            return ScalingSpec::unit(kScenarioDim);
        case Scenario::III: {
            Dataset raw(source_raw, std::nullopt, 2);
            return fit_scaling(raw);
        }
    }
    throw ConfigError("scenario_scaling: bad scenario");
}

SimulatedData generate(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    RngStream rng(derive_seed(seed, "generate"));

    const auto source_labels = draw_labels(kSourcePi1, spec.n_P, rng);
    const Matrix source_raw = draw_features_raw(spec.scenario, Domain::source, source_labels, rng);
    auto target_labels = draw_labels(spec.pi_Q1, spec.n_Q, rng);
    const Matrix target_raw = draw_features_raw(spec.scenario, Domain::target, target_labels, rng);
    const auto test_labels = draw_labels(spec.pi_Q1, spec.n_test, rng);
    Matrix test_raw = draw_features_raw(spec.scenario, Domain::target, test_labels, rng);

    const ScalingSpec scaling = scenario_scaling(spec.scenario, source_raw);

    SimulatedData out;
    out.scaling = scaling;
    out.source = apply_scaling(Dataset(source_raw, source_labels, 2), scaling);
    out.target = apply_scaling(Dataset(target_raw, std::nullopt, 2), scaling);
    out.target_labels = std::move(target_labels);
    out.test = apply_scaling(Dataset(test_raw, test_labels, 2), scaling);
    out.test_raw = std::move(test_raw);
    return out;
}

SimplexVector true_eta(const ScenarioSpec& spec, Domain dom, std::span<const double> x_raw) {
    if (x_raw.size() != kScenarioDim) throw DataError("true_eta: expected 4 coordinates");
    const double pi1 = dom == Domain::source ? kSourcePi1 : spec.pi_Q1;
    double a = 1.0;
    double b = 1.0;
    for (double t : x_raw) {
        a *= component_pdf(spec.scenario, dom, 1, t);
        b *= component_pdf(spec.scenario, dom, 2, t);
    }
    const double num = pi1 * a;
    const double den = num + (1.0 - pi1) * b;
    if (!(den > 0.0)) throw DataError("true_eta: zero density, point outside support");
    return SimplexVector::checked({num / den, 1.0 - num / den});
}

// -- experiment protocol ---------------------------------------------------

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

ReplicationResult run_replication(const ScenarioSpec& spec, std::size_t rep,
                                  const std::vector<std::string>& classifiers,
                                  const std::vector<std::string>& estimators,
                                  const ExperimentOptions& options) {
    ReplicationResult res;
    try {
        const std::uint64_t rep_seed = derive_seed(spec.master_seed, rep);
        const SimulatedData data = generate(spec, rep_seed);

        const bool need_dnn = contains(classifiers, "dnn-pc") || contains(estimators, "dnn");
        const bool need_kde = contains(classifiers, "maity-pc") ||
                              contains(classifiers, "maity-ic") || contains(estimators, "kernel");
        const bool need_knn = contains(classifiers, "saerens") || contains(estimators, "knn");

        PluginClassifier dnn_pc;
        TargetProportionEstimate dnn_estimate;
        if (need_dnn) {
            MlpConfig config = options.dnn;
            config.output_dim = data.source.k - 1;
            if (options.tune_dnn) {
                auto grid = default_grid(data.source.k);
                for (auto& g : grid) {
                    g.epochs = options.dnn.epochs;
                    g.batch_size = options.dnn.batch_size;
                    g.output_clip = options.dnn.output_clip;
                }
                MlpConfig chosen = grid_search(data.source, grid, 0.2,
                                               derive_seed(rep_seed, "dnn-grid"));
                config.depth = chosen.depth;
                config.width = chosen.width;
                config.learning_rate = chosen.learning_rate;
            }
            config.seed = derive_seed(rep_seed, "dnn");
            SourceModel model = train_source(data.source, config, data.scaling);
            dnn_estimate = solve_pmle(ratio_weights(model, data.target));
            dnn_pc = PluginClassifier{std::move(model), dnn_estimate.pi_Q};
        }

        double bandwidth = options.bandwidth;
        KdeClassifier kde_pc;
        KdeClassifier kde_ic;
        if (need_kde) {
            if (!(bandwidth > 0.0))
                bandwidth = select_bandwidth(data.source, kBandwidthGrid,
                                             derive_seed(rep_seed, "bw"));
            kde_pc = maity_pc(data.source, data.target, bandwidth);
            if (contains(classifiers, "maity-ic")) {
                Dataset labeled_target(data.target.features, data.target_labels, data.target.k);
                kde_ic = maity_ic(data.source, labeled_target, bandwidth);
            }
        }

        int neighbors = options.neighbors;
        SaerensClassifier knn_clf;
        if (need_knn) {
            if (neighbors <= 0)
                neighbors = select_neighbors(data.source, kNeighborGrid,
                                             derive_seed(rep_seed, "knn"));
            neighbors = std::min<int>(neighbors, static_cast<int>(data.source.n()));
            knn_clf = saerens_classifier(data.source, data.target, neighbors);
        }

        const OracleClassifier oracle{
            [&spec](std::span<const double> x) { return true_eta(spec, Domain::target, x); }};

        std::vector<int> oracle_pred(data.test.n(), 0);
        for (std::size_t i = 0; i < data.test.n(); ++i)
            oracle_pred[i] = oracle.classify(data.test_raw.row(i));
        const double oracle_err = error_rate(oracle_pred, *data.test.labels);

        for (const auto& name : classifiers) {
            std::vector<int> pred;
            if (name == "dnn-pc") {
                pred = classify_rows(data.test.features, [&](std::span<const double> x) {
                    return dnn_pc.classify(x);
                });
            } else if (name == "saerens") {
                pred = classify_rows(data.test.features, [&](std::span<const double> x) {
                    return knn_clf.classify(x);
                });
            } else if (name == "maity-pc") {
                pred = classify_rows(data.test.features, [&](std::span<const double> x) {
                    return kde_pc.classify(x);
                });
            } else if (name == "maity-ic") {
                pred = classify_rows(data.test.features, [&](std::span<const double> x) {
                    return kde_ic.classify(x);
                });
            } else if (name == "bayes-oracle") {
                pred = oracle_pred;
            } else {
                throw ConfigError("unknown classifier '" + name + "'");
            }
            res.excess.push_back(error_rate(pred, *data.test.labels) - oracle_err);
        }

        for (const auto& name : estimators) {
            double pi1 = 0.0;
            if (name == "dnn") {
                pi1 = dnn_estimate.pi_Q[0];
            } else if (name == "kernel") {
                pi1 = kde_pc.estimate.pi_Q[0];
            } else if (name == "knn") {
                pi1 = knn_clf.estimate.pi_Q[0];
            } else {
                throw ConfigError("unknown estimator '" + name + "'");
            }
            res.pi_hat.push_back(pi1);
        }
    } catch (const std::exception& e) {
        res.failed = true;
        res.error = e.what();
        res.excess.assign(classifiers.size(), std::numeric_limits<double>::quiet_NaN());
        res.pi_hat.assign(estimators.size(), std::numeric_limits<double>::quiet_NaN());
    }
    return res;
}

MetricSummary summarize(const std::vector<double>& values) {
    MetricSummary s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                         static_cast<double>(values.size()));
    }
    return s;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

ExperimentReport run_experiment(const ScenarioSpec& spec, std::size_t replications,
                                const std::vector<std::string>& classifiers,
                                const std::vector<std::string>& estimators,
                                const ExperimentOptions& options) {
    spec.validate();
    if (replications < 1) throw ConfigError("run_experiment: replications must be >= 1");
    for (const auto& c : classifiers) {
        if (std::find(std::begin(kAllClassifiers), std::end(kAllClassifiers), c) ==
            std::end(kAllClassifiers))
            throw ConfigError("unknown classifier '" + c +
                              "' (valid: dnn-pc, saerens, maity-pc, maity-ic, bayes-oracle)");
    }
    for (const auto& e : estimators) {
        if (std::find(std::begin(kAllEstimators), std::end(kAllEstimators), e) ==
            std::end(kAllEstimators))
            throw ConfigError("unknown estimator '" + e + "' (valid: dnn, kernel, knn)");
    }

    ExperimentReport report;
    report.spec = spec;
    report.replications = replications;
    report.classifiers = classifiers;
    report.estimators = estimators;
    report.results.resize(replications);

    const int threads = std::max(1, options.threads);
    if (threads == 1) {
        for (std::size_t r = 0; r < replications; ++r)
            report.results[r] = run_replication(spec, r, classifiers, estimators, options);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t r = next.fetch_add(1);
                if (r >= replications) break;
                report.results[r] = run_replication(spec, r, classifiers, estimators, options);
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return report;
}

namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& s) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == s) return i;
    throw ConfigError("unknown method '" + s + "' in report");
}

} // namespace

MetricSummary ExperimentReport::excess_summary(const std::string& classifier) const {
    const std::size_t idx = index_of(classifiers, classifier);
    std::vector<double> values;
    for (const auto& r : results)
        if (!r.failed) values.push_back(r.excess[idx]);
    return summarize(values);
}

MetricSummary ExperimentReport::pi_abs_err_summary(const std::string& estimator) const {
    const std::size_t idx = index_of(estimators, estimator);
    std::vector<double> values;
    for (const auto& r : results)
        if (!r.failed) values.push_back(std::abs(r.pi_hat[idx] - spec.pi_Q1));
    return summarize(values);
}

MetricSummary ExperimentReport::pi_sq_err_summary(const std::string& estimator) const {
    const std::size_t idx = index_of(estimators, estimator);
    std::vector<double> values;
    for (const auto& r : results)
        if (!r.failed) {
            const double d = r.pi_hat[idx] - spec.pi_Q1;
            values.push_back(d * d);
        }
    return summarize(values);
}

std::size_t ExperimentReport::failure_count() const {
    std::size_t n = 0;
    for (const auto& r : results)
        if (r.failed) ++n;
    return n;
}

void ExperimentReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report file: " + path.string());
    out << "replication,method,metric,value\n";
    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        if (res.failed) {
            out << r << ",all,failed,1\n";
            continue;
        }
        for (std::size_t c = 0; c < classifiers.size(); ++c)
            out << r << ',' << classifiers[c] << ",excess_risk," << format_double(res.excess[c])
                << '\n';
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            const double d = res.pi_hat[e] - spec.pi_Q1;
            out << r << ',' << estimators[e] << ",pi_q1_hat," << format_double(res.pi_hat[e])
                << '\n';
            out << r << ',' << estimators[e] << ",pi_q1_sq_err," << format_double(d * d) << '\n';
        }
    }
}

std::string ExperimentReport::summary_json_string() const {
    nlohmann::json j;
    j["scenario"] = to_string(spec.scenario);
    j["pi_Q1"] = spec.pi_Q1;
    j["n_P"] = spec.n_P;
    j["n_Q"] = spec.n_Q;
    j["n_test"] = spec.n_test;
    j["master_seed"] = spec.master_seed;
    j["replications"] = replications;
    j["failures"] = nlohmann::json::array();
    for (std::size_t r = 0; r < results.size(); ++r)
        if (results[r].failed)
            j["failures"].push_back({{"replication", r}, {"error", results[r].error}});
    for (const auto& c : classifiers) {
        const auto s = excess_summary(c);
        j["classifiers"][c] = {{"mean_excess_risk", s.mean}, {"se_excess_risk", s.se}};
    }
    for (const auto& e : estimators) {
        const auto abs_s = pi_abs_err_summary(e);
        const auto sq_s = pi_sq_err_summary(e);
        j["estimators"][e] = {{"mean_abs_err", abs_s.mean},
                              {"se_abs_err", abs_s.se},
                              {"mse", sq_s.mean},
                              {"se_sq_err", sq_s.se}};
    }
    return j.dump(2);
}

} // namespace gcs
