#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gcs/errors.hpp"
#include "gcs/simulation.hpp"

using namespace gcs;

namespace {

ScenarioSpec make_spec(Scenario sc, double pi_q1, std::size_t n_p, std::size_t n_q,
                       std::size_t n_test, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.scenario = sc;
    spec.pi_Q1 = pi_q1;
    spec.n_P = n_p;
    spec.n_Q = n_q;
    spec.n_test = n_test;
    spec.master_seed = seed;
    return spec;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("generate produces the requested shapes") {
    const ScenarioSpec spec = make_spec(Scenario::I, 0.25, 100, 400, 50, 7);
    const SimulatedData data = generate(spec, 7);
    CHECK(data.source.n() == 100);
    CHECK(data.source.has_labels());
    CHECK(data.target.n() == 400);
    CHECK_FALSE(data.target.has_labels());
    CHECK(data.target_labels.size() == 400);
    CHECK(data.test.n() == 50);
    CHECK(data.test_raw.rows == 50);
    CHECK(data.source.d() == 4);
}

TEST_CASE("generation is deterministic given the seed") {
    const ScenarioSpec spec = make_spec(Scenario::III, 0.5, 80, 60, 40, 3);
    const SimulatedData a = generate(spec, 11);
    const SimulatedData b = generate(spec, 11);
    CHECK(a.source.features.data == b.source.features.data);
    CHECK(a.target.features.data == b.target.features.data);
    CHECK(a.test_raw.data == b.test_raw.data);
    CHECK(a.target_labels == b.target_labels);

    const SimulatedData c = generate(spec, 12);
    CHECK(a.source.features.data != c.source.features.data);
}

TEST_CASE("scenario I: class 2 features live on {1,2}") {
    const ScenarioSpec spec = make_spec(Scenario::I, 0.25, 500, 10, 10, 1);
    RngStream rng(derive_seed(5, "labels"));
    const auto labels = draw_labels(kSourcePi1, 500, rng);
    const Matrix raw = draw_features_raw(Scenario::I, Domain::source, labels, rng);
    for (std::size_t i = 0; i < raw.rows; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double v = raw(i, j);
            CHECK(v == std::round(v));
            if (labels[i] == 2) CHECK(v <= 2.0);
            CHECK(v >= 1.0);
            CHECK(v <= 4.0);
        }
    // scaled values land on the fixed affine image of {1..4}
    const SimulatedData data = generate(spec, 1);
    for (double v : data.source.features.data) {
        const double scaled3 = v * 3.0;
        CHECK(std::abs(scaled3 - std::round(scaled3)) < 1e-9);
    }
}

TEST_CASE("all scaled features live in the unit cube") {
    for (Scenario sc : {Scenario::I, Scenario::II, Scenario::III}) {
        const SimulatedData data = generate(make_spec(sc, 0.25, 200, 200, 100, 5), 5);
        for (double v : data.source.features.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (double v : data.target.features.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (double v : data.test.features.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("scenario III: shift factor at the origin is e^2") {
    // product over components of the target/source density ratio, per class
    for (int cls : {1, 2}) {
        double ratio = 1.0;
        for (int j = 0; j < 4; ++j)
            ratio *= component_pdf(Scenario::III, Domain::target, cls, 0.0) /
                     component_pdf(Scenario::III, Domain::source, cls, 0.0);
        CHECK(ratio == doctest::Approx(7.38905609893065).epsilon(1e-12));
    }
}

TEST_CASE("scenario III: the two classes share one component ratio") {
    for (int i = 0; i < 50; ++i) {
        const double x = 0.05 + 0.1 * i;
        const double r1 = component_pdf(Scenario::III, Domain::target, 1, x) /
                          component_pdf(Scenario::III, Domain::source, 1, x);
        const double r2 = component_pdf(Scenario::III, Domain::target, 2, x) /
                          component_pdf(Scenario::III, Domain::source, 2, x);
        CHECK(std::abs(r1 - r2) <= 1e-12);
        CHECK(r1 == doctest::Approx(std::exp(0.5 - x)).epsilon(1e-12));
    }
}

TEST_CASE("scenarios I and II satisfy label shift empirically") {
    // per-class component means agree across domains at n = 1e5
    for (Scenario sc : {Scenario::I, Scenario::II}) {
        for (int cls : {1, 2}) {
            RngStream rng_p(derive_seed(100, to_string(sc), cls));
            RngStream rng_q(derive_seed(200, to_string(sc), cls));
            const std::vector<int> labels(100000, cls);
            const Matrix xp = draw_features_raw(sc, Domain::source, labels, rng_p);
            const Matrix xq = draw_features_raw(sc, Domain::target, labels, rng_q);
            double mp = 0.0;
            double mq = 0.0;
            for (std::size_t i = 0; i < xp.rows; ++i) {
                mp += xp(i, 0);
                mq += xq(i, 0);
            }
            CHECK(std::abs(mp / xp.rows - mq / xq.rows) < 1e-2);
        }
    }
}

TEST_CASE("true eta closed forms") {
    const ScenarioSpec spec1 = make_spec(Scenario::I, 0.5, 10, 10, 10, 1);
    SUBCASE("scenario I interior point") {
        const SimplexVector eta =
            true_eta(spec1, Domain::source, std::vector<double>{1, 1, 1, 1});
        CHECK(eta[0] == doctest::Approx(3.0 / 19.0).epsilon(1e-12));
    }
    SUBCASE("scenario I point outside class-2 support") {
        const SimplexVector eta =
            true_eta(spec1, Domain::source, std::vector<double>{3, 3, 3, 3});
        CHECK(eta[0] == 1.0);
    }
    SUBCASE("scenario I rejects non-integer points") {
        CHECK_THROWS_AS(true_eta(spec1, Domain::source, std::vector<double>{1.5, 1, 1, 1}),
                        DataError);
    }
    SUBCASE("scenario II symmetry point") {
        const ScenarioSpec spec2 = make_spec(Scenario::II, 0.5, 10, 10, 10, 1);
        const SimplexVector eta =
            true_eta(spec2, Domain::target, std::vector<double>{0.5, 0.5, 0.5, 0.5});
        CHECK(eta[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("scenario III source prior tilts the posterior") {
        const ScenarioSpec spec3 = make_spec(Scenario::III, 0.5, 10, 10, 10, 1);
        // negative coordinates kill the exponential class
        const SimplexVector eta =
            true_eta(spec3, Domain::source, std::vector<double>{-1.0, 0.5, 0.5, 0.5});
        CHECK(eta[0] == 0.0);
        CHECK(eta[1] == 1.0);
    }
}

TEST_CASE("experiment runner: oracle is exactly zero and runs are reproducible") {
    const ScenarioSpec spec = make_spec(Scenario::II, 0.25, 64, 40, 30, 21);
    ExperimentOptions options;
    options.dnn.epochs = 10;
    options.dnn.batch_size = 16;
    options.bandwidth = 0.1;
    options.neighbors = 5;
    const std::vector<std::string> classifiers{"dnn-pc", "maity-pc", "saerens", "maity-ic",
                                               "bayes-oracle"};
    const std::vector<std::string> estimators{"dnn", "kernel", "knn"};

    const ExperimentReport a = run_experiment(spec, 2, classifiers, estimators, options);
    CHECK(a.failure_count() == 0);
    CHECK(a.results.size() == 2);
    CHECK(a.excess_summary("bayes-oracle").mean == 0.0);
    for (const auto& r : a.results) {
        REQUIRE(r.excess.size() == classifiers.size());
        REQUIRE(r.pi_hat.size() == estimators.size());
        for (double v : r.excess) CHECK(std::isfinite(v));
        for (double v : r.pi_hat) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    const ExperimentReport b = run_experiment(spec, 2, classifiers, estimators, options);
    const auto tmp = std::filesystem::temp_directory_path();
    a.write_csv(tmp / "gcs_rep_a.csv");
    b.write_csv(tmp / "gcs_rep_b.csv");
    CHECK(slurp(tmp / "gcs_rep_a.csv") == slurp(tmp / "gcs_rep_b.csv"));

    ExperimentOptions threaded = options;
    threaded.threads = 3;
    const ExperimentReport c = run_experiment(spec, 2, classifiers, estimators, threaded);
    c.write_csv(tmp / "gcs_rep_c.csv");
    CHECK(slurp(tmp / "gcs_rep_a.csv") == slurp(tmp / "gcs_rep_c.csv"));
    CHECK(a.summary_json_string() == c.summary_json_string());
}

TEST_CASE("experiment runner rejects unknown methods") {
    const ScenarioSpec spec = make_spec(Scenario::I, 0.25, 20, 20, 10, 1);
    CHECK_THROWS_AS(run_experiment(spec, 1, {"nonsense"}, {}, {}), ConfigError);
    CHECK_THROWS_AS(run_experiment(spec, 1, {}, {"nonsense"}, {}), ConfigError);
}

TEST_CASE("scenario parsing") {
    CHECK(scenario_from_string("I") == Scenario::I);
    CHECK(scenario_from_string("III") == Scenario::III);
    CHECK_THROWS_AS(scenario_from_string("IV"), ConfigError);
    CHECK_THROWS_AS(make_spec(Scenario::I, 1.5, 10, 10, 10, 1).validate(), ConfigError);
}
