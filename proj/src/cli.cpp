#include "gcs/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcs/baselines.hpp"
#include "gcs/classifier.hpp"
#include "gcs/dataset.hpp"
#include "gcs/diagnostics.hpp"
#include "gcs/errors.hpp"
#include "gcs/mlp.hpp"
#include "gcs/proportions.hpp"
#include "gcs/simulation.hpp"

namespace gcs::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void ensure_out_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec && !fs::is_directory(out)) throw DataError("cannot create output dir: " + out.string());
}

// Every invocation records its resolved configuration next to its outputs.
void write_run_config(const fs::path& out, const std::string& command, const nlohmann::json& cfg) {
    nlohmann::json j{{"command", command}, {"config", cfg}};
    std::ofstream f(out / "run_config.json");
    if (!f) throw DataError("cannot write run_config.json in " + out.string());
    f << j.dump(2) << '\n';
}

void write_feature_csv(const fs::path& path, const Matrix& features,
                       const std::vector<int>* labels, const Matrix* extra,
                       const std::string& extra_prefix) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    for (std::size_t j = 0; j < features.cols; ++j) f << (j ? "," : "") << 'x' << (j + 1);
    if (labels) f << ",y";
    if (extra)
        for (std::size_t j = 0; j < extra->cols; ++j) f << ',' << extra_prefix << (j + 1);
    f << '\n';
    for (std::size_t i = 0; i < features.rows; ++i) {
        for (std::size_t j = 0; j < features.cols; ++j) f << (j ? "," : "") << fmt(features(i, j));
        if (labels) f << ',' << (*labels)[i];
        if (extra)
            for (std::size_t j = 0; j < extra->cols; ++j) f << ',' << fmt((*extra)(i, j));
        f << '\n';
    }
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// --- command parameter blocks ---

struct SimulateParams {
    std::string scenario = "I";
    double pi_q1 = 0.25;
    std::size_t n_p = 600;
    std::size_t n_q = 400;
    std::size_t n_test = 2500;
    std::uint64_t seed = 0;
    std::string out = ".";
};

ScenarioSpec to_spec(const std::string& scenario, double pi_q1, std::size_t n_p, std::size_t n_q,
                     std::size_t n_test, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.scenario = scenario_from_string(scenario);
    spec.pi_Q1 = pi_q1;
    spec.n_P = n_p;
    spec.n_Q = n_q;
    spec.n_test = n_test;
    spec.master_seed = seed;
    spec.validate();
    return spec;
}

void cmd_simulate(const SimulateParams& p) {
    const ScenarioSpec spec = to_spec(p.scenario, p.pi_q1, p.n_p, p.n_q, p.n_test, p.seed);
    const SimulatedData data = generate(spec, spec.master_seed);

    const fs::path out(p.out);
    ensure_out_dir(out);
    write_feature_csv(out / "source.csv", data.source.features, &*data.source.labels, nullptr, "");
    write_feature_csv(out / "target.csv", data.target.features, nullptr, nullptr, "");
    {
        std::ofstream f(out / "target_labels.csv");
        if (!f) throw DataError("cannot write target_labels.csv");
        f << "y\n";
        for (int y : data.target_labels) f << y << '\n';
    }
    Matrix eta(data.test.n(), 2);
    for (std::size_t i = 0; i < data.test.n(); ++i) {
        const SimplexVector e = true_eta(spec, Domain::target, data.test_raw.row(i));
        eta(i, 0) = e[0];
        eta(i, 1) = e[1];
    }
    write_feature_csv(out / "test.csv", data.test.features, &*data.test.labels, &eta, "eta_q_");

    write_run_config(out, "simulate",
                     {{"scenario", p.scenario},
                      {"pi-q1", p.pi_q1},
                      {"n-p", p.n_p},
                      {"n-q", p.n_q},
                      {"n-test", p.n_test},
                      {"seed", p.seed},
                      {"out", p.out}});
}

struct FitSourceParams {
    std::string source;
    std::string label_column = "y";
    int depth = 2;
    int width = 16;
    double learning_rate = 1e-2;
    int batch_size = 32;
    int epochs = 200;
    double output_clip = 30.0;
    bool grid = false;
    double valid_fraction = 0.2;
    std::uint64_t seed = 0;
    std::string out = ".";
};

void cmd_fit_source(const FitSourceParams& p) {
    const Dataset raw = load_csv(p.source, p.label_column);
    const ScalingSpec scaling = fit_scaling(raw);
    const Dataset data = apply_scaling(raw, scaling);

    MlpConfig config;
    config.depth = p.depth;
    config.width = p.width;
    config.output_dim = data.k - 1;
    config.learning_rate = p.learning_rate;
    config.batch_size = std::min<int>(p.batch_size, static_cast<int>(data.n()));
    config.epochs = p.epochs;
    config.output_clip = p.output_clip;
    config.seed = derive_seed(p.seed, "fit-source");
    if (p.grid) {
        auto grid = default_grid(data.k);
        for (auto& g : grid) {
            g.epochs = p.epochs;
            g.batch_size = config.batch_size;
            g.output_clip = p.output_clip;
        }
        const MlpConfig chosen = grid_search(data, grid, p.valid_fraction, p.seed);
        config.depth = chosen.depth;
        config.width = chosen.width;
        config.learning_rate = chosen.learning_rate;
    }

    const SourceModel model = train_source(data, config, scaling);
    const fs::path out(p.out);
    ensure_out_dir(out);
    model.save(out / "model.json");
    write_run_config(out, "fit-source",
                     {{"source", p.source},
                      {"label-column", p.label_column},
                      {"depth", config.depth},
                      {"width", config.width},
                      {"learning-rate", config.learning_rate},
                      {"batch-size", config.batch_size},
                      {"epochs", config.epochs},
                      {"output-clip", config.output_clip},
                      {"grid", p.grid},
                      {"valid-fraction", p.valid_fraction},
                      {"seed", p.seed},
                      {"out", p.out}});
}

struct EstimatePiParams {
    std::string model;
    std::string target;
    std::string method = "pmle";
    std::string out = ".";
};

void cmd_estimate_pi(const EstimatePiParams& p) {
    const SourceModel model = SourceModel::load(p.model);
    const Dataset target = apply_scaling(load_csv(p.target), model.scaling);

    TargetProportionEstimate est;
    if (p.method == "pmle") {
        est = solve_pmle(ratio_weights(model, target));
    } else if (p.method == "em") {
        est = em_saerens(model, target);
    } else {
        throw ConfigError("unknown method '" + p.method + "' (valid: pmle, em)");
    }

    const fs::path out(p.out);
    ensure_out_dir(out);
    est.save(out / "pi_estimate.json");
    write_run_config(out, "estimate-pi",
                     {{"model", p.model}, {"target", p.target}, {"method", p.method},
                      {"out", p.out}});
}

struct ClassifyParams {
    std::string model;
    std::string target;
    std::string pi;
    std::string label_column; // dropped when present
    std::string out = ".";
};

// Feature view of a CSV: drops the label column when requested and always
// drops eta_* oracle annotation columns, so simulated test files classify
// directly.
Dataset load_feature_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty file: " + path);
    in.close();
    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) names.push_back(c);
    }
    const bool drop_label = !label_column.empty() &&
                            std::find(names.begin(), names.end(), label_column) != names.end();
    const Dataset all =
        drop_label ? load_csv(path, label_column) : load_csv(path);

    std::vector<std::size_t> keep;
    std::size_t feature_idx = 0;
    for (const auto& name : names) {
        if (drop_label && name == label_column) continue;
        if (name.rfind("eta_", 0) != 0) keep.push_back(feature_idx);
        ++feature_idx;
    }
    if (keep.size() == all.d()) return Dataset(all.features, std::nullopt, all.k);
    Matrix f(all.n(), keep.size());
    for (std::size_t i = 0; i < all.n(); ++i)
        for (std::size_t j = 0; j < keep.size(); ++j) f(i, j) = all.features(i, keep[j]);
    return Dataset(std::move(f), std::nullopt, all.k);
}

void cmd_classify(const ClassifyParams& p) {
    const SourceModel model = SourceModel::load(p.model);
    const Dataset target = apply_scaling(load_feature_csv(p.target, p.label_column), model.scaling);

    SimplexVector pi_q = model.pi_P; // default: no shift
    if (!p.pi.empty()) {
        std::ifstream f(p.pi);
        if (!f) throw DataError("cannot open pi file: " + p.pi);
        nlohmann::json j;
        try {
            f >> j;
            pi_q = SimplexVector::checked(j.at("pi_Q").get<std::vector<double>>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("pi JSON error: ") + e.what());
        }
    }

    const PluginClassifier clf{model, pi_q};
    const std::vector<int> pred = classify_rows(
        target.features, [&](std::span<const double> x) { return clf.classify(x); });

    const fs::path out(p.out);
    ensure_out_dir(out);
    save_predictions_csv(out / "predictions.csv", pred);
    write_run_config(out, "classify",
                     {{"model", p.model},
                      {"target", p.target},
                      {"pi", p.pi},
                      {"label-column", p.label_column},
                      {"out", p.out}});
}

struct EvaluateParams {
    std::string predictions; // name=path[,name=path...]
    std::string test;
    std::string label_column = "y";
    std::string out = ".";
};

void cmd_evaluate(const EvaluateParams& p) {
    // test file: label column + optional eta_* columns carrying the oracle
    std::ifstream in(p.test);
    if (!in) throw DataError("cannot open test file: " + p.test);
    std::string header;
    if (!std::getline(in, header)) throw DataError("empty test file: " + p.test);
    in.close();

    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) names.push_back(c);
    }
    const Dataset all = load_csv(p.test, p.label_column);
    std::vector<std::size_t> eta_cols;
    std::size_t feature_idx = 0;
    for (const auto& name : names) {
        if (name == p.label_column) continue;
        if (name.rfind("eta_", 0) == 0) eta_cols.push_back(feature_idx);
        ++feature_idx;
    }

    std::vector<int> oracle_pred;
    if (!eta_cols.empty()) {
        oracle_pred.resize(all.n());
        for (std::size_t i = 0; i < all.n(); ++i) {
            std::vector<double> scores;
            for (std::size_t c : eta_cols) scores.push_back(all.features(i, c));
            oracle_pred[i] = argmax_label(scores);
        }
    }

    const fs::path out(p.out);
    ensure_out_dir(out);
    std::ofstream f(out / "metrics.csv");
    if (!f) throw DataError("cannot write metrics.csv");
    f << "method,metric,value\n";
    for (const auto& entry : split_list(p.predictions)) {
        const auto eq = entry.find('=');
        const std::string name = eq == std::string::npos ? "predictions" : entry.substr(0, eq);
        const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
        const std::vector<int> pred = load_predictions_csv(path);
        if (pred.size() != all.n())
            throw DataError("prediction length mismatch for '" + name + "'");
        const double err = error_rate(pred, *all.labels);
        f << name << ",error_rate," << fmt(err) << '\n';
        f << name << ",accuracy," << fmt(1.0 - err) << '\n';
        if (!oracle_pred.empty()) {
            const double oracle_err = error_rate(oracle_pred, *all.labels);
            f << name << ",excess_risk," << fmt(err - oracle_err) << '\n';
        }
    }
    write_run_config(out, "evaluate",
                     {{"predictions", p.predictions},
                      {"test", p.test},
                      {"label-column", p.label_column},
                      {"out", p.out}});
}

struct DiagnoseParams {
    std::string source;
    std::string target;
    std::string label_column = "y";
    int bins = 30;
    std::uint64_t seed = 0;
    std::string out = ".";
};

void cmd_diagnose(const DiagnoseParams& p) {
    const Dataset source_raw = load_csv(p.source, p.label_column);
    const Dataset target_raw = load_csv(p.target, p.label_column);
    // source and target must agree on the label alphabet
    const int k = std::max(source_raw.k, target_raw.k);
    const Dataset s(source_raw.features, source_raw.labels, k);
    const Dataset t(target_raw.features, target_raw.labels, k);
    const ScalingSpec scaling = fit_scaling(s);
    const RatioDiagnostic diag =
        gcs_report(apply_scaling(s, scaling), apply_scaling(t, scaling), p.bins, p.seed);

    const fs::path out(p.out);
    ensure_out_dir(out);
    diag.save_json(out / "diagnostic.json");
    diag.save_hist_csv(out / "diagnostic_hist.csv");
    write_run_config(out, "diagnose",
                     {{"source", p.source},
                      {"target", p.target},
                      {"label-column", p.label_column},
                      {"bins", p.bins},
                      {"seed", p.seed},
                      {"out", p.out}});
}

struct ExperimentParams {
    std::string scenario = "I";
    double pi_q1 = 0.25;
    std::size_t n_p = 600;
    std::size_t n_q = 400;
    std::size_t n_test = 2500;
    std::uint64_t seed = 0;
    std::size_t replications = 200;
    std::string methods = "dnn-pc,saerens,maity-pc,maity-ic,bayes-oracle";
    std::string estimators = "dnn,kernel,knn";
    int threads = 1;
    int depth = 2;
    int width = 16;
    double learning_rate = 1e-2;
    int batch_size = 32;
    int epochs = 200;
    double output_clip = 30.0;
    bool tune_dnn = false;
    double bandwidth = 0.0;
    int neighbors = 0;
    std::string out = ".";
};

void cmd_experiment(const ExperimentParams& p) {
    const ScenarioSpec spec = to_spec(p.scenario, p.pi_q1, p.n_p, p.n_q, p.n_test, p.seed);
    ExperimentOptions options;
    options.dnn.depth = p.depth;
    options.dnn.width = p.width;
    options.dnn.learning_rate = p.learning_rate;
    options.dnn.batch_size = p.batch_size;
    options.dnn.epochs = p.epochs;
    options.dnn.output_clip = p.output_clip;
    options.tune_dnn = p.tune_dnn;
    options.bandwidth = p.bandwidth;
    options.neighbors = p.neighbors;
    options.threads = p.threads;

    const ExperimentReport report = run_experiment(spec, p.replications, split_list(p.methods),
                                                   split_list(p.estimators), options);

    const fs::path out(p.out);
    ensure_out_dir(out);
    report.write_csv(out / "report.csv");
    {
        std::ofstream f(out / "summary.json");
        if (!f) throw DataError("cannot write summary.json");
        f << report.summary_json_string() << '\n';
    }
    write_run_config(out, "experiment",
                     {{"scenario", p.scenario},
                      {"pi-q1", p.pi_q1},
                      {"n-p", p.n_p},
                      {"n-q", p.n_q},
                      {"n-test", p.n_test},
                      {"seed", p.seed},
                      {"replications", p.replications},
                      {"methods", p.methods},
                      {"estimators", p.estimators},
                      {"threads", p.threads},
                      {"depth", p.depth},
                      {"width", p.width},
                      {"learning-rate", p.learning_rate},
                      {"batch-size", p.batch_size},
                      {"epochs", p.epochs},
                      {"output-clip", p.output_clip},
                      {"tune-dnn", p.tune_dnn},
                      {"bandwidth", p.bandwidth},
                      {"neighbors", p.neighbors},
                      {"out", p.out}});
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Unsupervised transfer-learning classification under general conditional shift"};
    app.set_config("--config", "", "Key-value config file with one section per command");
    app.require_subcommand(1);

    SimulateParams sim;
    auto* c_sim = app.add_subcommand("simulate", "Generate a simulation scenario to CSV files");
    c_sim->add_option("--scenario", sim.scenario, "Scenario (I, II, III)");
    c_sim->add_option("--pi-q1", sim.pi_q1, "Target class-1 proportion");
    c_sim->add_option("--n-p", sim.n_p, "Source sample size");
    c_sim->add_option("--n-q", sim.n_q, "Target sample size");
    c_sim->add_option("--n-test", sim.n_test, "Test sample size");
    c_sim->add_option("--seed", sim.seed, "Master seed");
    c_sim->add_option("--out", sim.out, "Output directory");

    FitSourceParams fit;
    auto* c_fit = app.add_subcommand("fit-source", "Train the source conditional model");
    c_fit->add_option("--source", fit.source, "Labeled source CSV")->required();
    c_fit->add_option("--label-column", fit.label_column, "Label column name");
    c_fit->add_option("--depth", fit.depth, "Hidden layers");
    c_fit->add_option("--width", fit.width, "Neurons per hidden layer");
    c_fit->add_option("--learning-rate", fit.learning_rate, "Adam learning rate");
    c_fit->add_option("--batch-size", fit.batch_size, "Mini-batch size");
    c_fit->add_option("--epochs", fit.epochs, "Training epochs");
    c_fit->add_option("--output-clip", fit.output_clip, "Output clipping bound");
    c_fit->add_flag("--grid", fit.grid, "Grid-search depth/width/learning-rate");
    c_fit->add_option("--valid-fraction", fit.valid_fraction, "Validation fraction for the grid");
    c_fit->add_option("--seed", fit.seed, "Master seed");
    c_fit->add_option("--out", fit.out, "Output directory");

    EstimatePiParams est;
    auto* c_est = app.add_subcommand("estimate-pi", "Estimate target class proportions");
    c_est->add_option("--model", est.model, "Model JSON from fit-source")->required();
    c_est->add_option("--target", est.target, "Unlabeled target CSV")->required();
    c_est->add_option("--method", est.method, "pmle or em");
    c_est->add_option("--out", est.out, "Output directory");

    ClassifyParams cls;
    auto* c_cls = app.add_subcommand("classify", "Classify unlabeled target data");
    c_cls->add_option("--model", cls.model, "Model JSON from fit-source")->required();
    c_cls->add_option("--target", cls.target, "Unlabeled target CSV")->required();
    c_cls->add_option("--pi", cls.pi, "pi_estimate.json from estimate-pi");
    c_cls->add_option("--label-column", cls.label_column,
                      "Label column to drop from the target file");
    c_cls->add_option("--out", cls.out, "Output directory");

    EvaluateParams ev;
    auto* c_ev = app.add_subcommand("evaluate", "Score prediction files against labeled data");
    c_ev->add_option("--predictions", ev.predictions, "name=path[,name=path...]")->required();
    c_ev->add_option("--test", ev.test, "Labeled test CSV (eta_* columns enable excess risk)")
        ->required();
    c_ev->add_option("--label-column", ev.label_column, "Label column name");
    c_ev->add_option("--out", ev.out, "Output directory");

    DiagnoseParams diag;
    auto* c_diag = app.add_subcommand("diagnose", "Density-ratio diagnostic for conditional shift");
    c_diag->add_option("--source", diag.source, "Labeled source CSV")->required();
    c_diag->add_option("--target", diag.target, "Labeled target CSV")->required();
    c_diag->add_option("--label-column", diag.label_column, "Label column name");
    c_diag->add_option("--bins", diag.bins, "Histogram bins");
    c_diag->add_option("--seed", diag.seed, "Master seed");
    c_diag->add_option("--out", diag.out, "Output directory");

    ExperimentParams exp;
    auto* c_exp = app.add_subcommand("experiment", "Run the Monte-Carlo comparison protocol");
    c_exp->add_option("--scenario", exp.scenario, "Scenario (I, II, III)");
    c_exp->add_option("--pi-q1", exp.pi_q1, "Target class-1 proportion");
    c_exp->add_option("--n-p", exp.n_p, "Source sample size");
    c_exp->add_option("--n-q", exp.n_q, "Target sample size");
    c_exp->add_option("--n-test", exp.n_test, "Test sample size");
    c_exp->add_option("--seed", exp.seed, "Master seed");
    c_exp->add_option("--replications", exp.replications, "Monte-Carlo replications");
    c_exp->add_option("--methods", exp.methods, "Comma-separated classifier list");
    c_exp->add_option("--estimators", exp.estimators, "Comma-separated estimator list");
    c_exp->add_option("--threads", exp.threads, "Worker threads for replications");
    c_exp->add_option("--depth", exp.depth, "Hidden layers");
    c_exp->add_option("--width", exp.width, "Neurons per hidden layer");
    c_exp->add_option("--learning-rate", exp.learning_rate, "Adam learning rate");
    c_exp->add_option("--batch-size", exp.batch_size, "Mini-batch size");
    c_exp->add_option("--epochs", exp.epochs, "Training epochs");
    c_exp->add_option("--output-clip", exp.output_clip, "Output clipping bound");
    c_exp->add_flag("--tune-dnn", exp.tune_dnn, "Grid-search the network per replication");
    c_exp->add_option("--bandwidth", exp.bandwidth, "Kernel bandwidth (0 = tune)");
    c_exp->add_option("--neighbors", exp.neighbors, "KNN neighborhood size (0 = tune)");
    c_exp->add_option("--out", exp.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (c_sim->parsed()) cmd_simulate(sim);
        if (c_fit->parsed()) cmd_fit_source(fit);
        if (c_est->parsed()) cmd_estimate_pi(est);
        if (c_cls->parsed()) cmd_classify(cls);
        if (c_ev->parsed()) cmd_evaluate(ev);
        if (c_diag->parsed()) cmd_diagnose(diag);
        if (c_exp->parsed()) cmd_experiment(exp);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}

} // namespace gcs::cli
