#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/matrix.hpp"
#include "gcs/mlp.hpp"
#include "gcs/rng.hpp"

namespace gcs {

// The three binary-classification generators. Components of the 4-dim
// feature vector are i.i.d. given the label.
//   I   : Uniform{1..4} vs Uniform{1..2}, identical across domains
//   II  : Beta(6,2) vs Beta(2,6), identical across domains
//   III : source Exp(mean e^0.5-1) vs Normal(1,1);
//         target Exp(mean 1-e^{-0.5}) vs Normal(0,1).
// I and II satisfy label shift; III violates it while the class-conditional
// density ratio stays the common function exp(2 - sum_i x_i).
enum class Scenario { I, II, III };
enum class Domain { source, target };

Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario sc);

struct ScenarioSpec {
    Scenario scenario = Scenario::I;
    double pi_Q1 = 0.25;
    std::size_t n_P = 600;
    std::size_t n_Q = 400;
    std::size_t n_test = 2500;
    std::uint64_t master_seed = 0;

    void validate() const;
};

inline constexpr double kSourcePi1 = 0.75;
inline constexpr std::size_t kScenarioDim = 4;

// Per-component class-conditional density (or mass) in raw coordinates.
double component_pdf(Scenario sc, Domain dom, int cls, double t);

// Raw-coordinate samplers, exposed for diagnostics and tests.
std::vector<int> draw_labels(double pi1, std::size_t n, RngStream& rng);
Matrix draw_features_raw(Scenario sc, Domain dom, std::span<const int> labels, RngStream& rng);

// The raw-to-[0,1] map each scenario uses: I the fixed affine map of {1..4},
// II the identity, III a spec fitted on the raw source features.
ScalingSpec scenario_scaling(Scenario sc, const Matrix& source_raw);

// One simulated replication: scaled source/target/test plus the raw test
// coordinates the Bayes oracle evaluates at.
struct SimulatedData {
    Dataset source;                 // labeled, scaled
    Dataset target;                 // features only, scaled
    std::vector<int> target_labels; // withheld ground truth
    Dataset test;                   // labeled, scaled
    Matrix test_raw;                // n_test x 4 raw coordinates
    ScalingSpec scaling;
};

SimulatedData generate(const ScenarioSpec& spec, std::uint64_t seed);

// Exact Bayes posterior from the scenario's known densities and priors,
// evaluated at raw coordinates. Errors when x is outside the support.
SimplexVector true_eta(const ScenarioSpec& spec, Domain dom, std::span<const double> x_raw);

// -- Monte-Carlo experiment protocol -------------------------------------

inline constexpr const char* kAllClassifiers[] = {"dnn-pc", "saerens", "maity-pc", "maity-ic",
                                                  "bayes-oracle"};
inline constexpr const char* kAllEstimators[] = {"dnn", "kernel", "knn"};

struct ExperimentOptions {
    MlpConfig dnn;            // output_dim and seed are overridden per replication
    bool tune_dnn = false;    // grid-search depth/width/lr on a source split
    double bandwidth = 0.0;   // 0 = tune on a source split
    int neighbors = 0;        // 0 = tune on a source split
    int threads = 1;
};

struct ReplicationResult {
    std::vector<double> excess;  // aligned with requested classifiers
    std::vector<double> pi_hat;  // aligned with requested estimators
    bool failed = false;
    std::string error;
};

struct MetricSummary {
    double mean = 0.0;
    double se = 0.0;
};

struct ExperimentReport {
    ScenarioSpec spec;
    std::size_t replications = 0;
    std::vector<std::string> classifiers;
    std::vector<std::string> estimators;
    std::vector<ReplicationResult> results;

    MetricSummary excess_summary(const std::string& classifier) const;
    MetricSummary pi_abs_err_summary(const std::string& estimator) const;
    MetricSummary pi_sq_err_summary(const std::string& estimator) const;
    std::size_t failure_count() const;

    // long-format CSV: replication,method,metric,value
    void write_csv(const std::filesystem::path& path) const;
    std::string summary_json_string() const;
};

ExperimentReport run_experiment(const ScenarioSpec& spec, std::size_t replications,
                                const std::vector<std::string>& classifiers,
                                const std::vector<std::string>& estimators,
                                const ExperimentOptions& options = {});

} // namespace gcs
