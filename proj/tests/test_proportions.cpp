#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "exact_model.hpp"
#include "gcs/errors.hpp"
#include "gcs/proportions.hpp"
#include "gcs/rng.hpp"

using namespace gcs;
using gcs::testing::make_exact_world;

namespace {

SourceModel constant_phi_model(double phi_value, SimplexVector pi_P) {
    MlpConfig c;
    c.depth = 1;
    c.width = 1;
    c.output_dim = static_cast<int>(pi_P.size()) - 1;
    c.output_clip = 100.0;
    MlpParams p = init_params(c, 1);
    p.weights[0](0, 0) = 0.0;
    p.biases[0] = {1.0};
    for (int l = 0; l < c.output_dim; ++l) p.weights[1](l, 0) = phi_value;
    return SourceModel{std::move(p), c, std::move(pi_P), ScalingSpec::unit(1)};
}

Dataset unlabeled_points(std::vector<double> xs) {
    Matrix f(xs.size(), 1);
    f.data = std::move(xs);
    return Dataset(std::move(f), std::nullopt, 2);
}

RatioWeights binary_weights(const std::vector<double>& r1) {
    RatioWeights rw;
    rw.r = Matrix(r1.size(), 2);
    for (std::size_t j = 0; j < r1.size(); ++j) {
        rw.r(j, 0) = r1[j];
        rw.r(j, 1) = 1.0;
    }
    return rw;
}

RatioWeights random_weights(std::size_t n, std::size_t k, RngStream& rng) {
    RatioWeights rw;
    rw.r = Matrix(n, k);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t l = 0; l + 1 < k; ++l) rw.r(j, l) = std::exp(rng.normal());
        rw.r(j, k - 1) = 1.0;
    }
    return rw;
}

// brute-force simplex grid: every pi with entries in multiples of 1/steps
double grid_max_objective(const RatioWeights& rw, int steps) {
    const std::size_t k = rw.k();
    std::vector<int> counts(k, 0);
    double best = -1e300;
    auto recurse = [&](auto&& self, std::size_t pos, int remaining) -> void {
        if (pos + 1 == k) {
            counts[pos] = remaining;
            std::vector<double> pi(k);
            for (std::size_t l = 0; l < k; ++l)
                pi[l] = static_cast<double>(counts[l]) / static_cast<double>(steps);
            best = std::max(best, pseudo_log_likelihood(rw, SimplexVector::checked(pi)));
            return;
        }
        for (int c = 0; c <= remaining; ++c) {
            counts[pos] = c;
            self(self, pos + 1, remaining - c);
        }
    };
    recurse(recurse, 0, steps);
    return best;
}

} // namespace

TEST_CASE("ratio weights from a flat logit expose the prior ratio") {
    const SourceModel model = constant_phi_model(0.0, SimplexVector::checked({0.75, 0.25}));
    const Dataset target = unlabeled_points({0.1, 0.5, 0.9});
    const RatioWeights rw = ratio_weights(model, target);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(rw.r(j, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(rw.r(j, 1) == 1.0);
    }
}

TEST_CASE("ratio weights are 1 under uniform priors and flat logits") {
    const SourceModel model = constant_phi_model(0.0, SimplexVector::uniform(2));
    const RatioWeights rw = ratio_weights(model, unlabeled_points({0.3, 0.7}));
    for (std::size_t j = 0; j < 2; ++j) CHECK(rw.r(j, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ratio weights: eta 0.75 against prior 0.75 cancels to 1") {
    const SourceModel model =
        constant_phi_model(std::log(3.0), SimplexVector::checked({0.75, 0.25}));
    const RatioWeights rw = ratio_weights(model, unlabeled_points({0.4}));
    CHECK(rw.r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the two algebraic forms of the ratio agree") {
    MlpConfig c;
    c.depth = 2;
    c.width = 6;
    c.output_dim = 2;
    c.seed = 99;
    const MlpParams p = init_params(c, 3);
    const SourceModel model{p, c, SimplexVector::checked({0.5, 0.3, 0.2}), ScalingSpec::unit(3)};

    RngStream rng(5);
    Matrix f(40, 3);
    for (double& v : f.data) v = rng.uniform();
    const Dataset target(std::move(f), std::nullopt, 3);

    const RatioWeights rw = ratio_weights(model, target);
    for (std::size_t j = 0; j < target.n(); ++j) {
        const SimplexVector eta = model.eta(target.x(j));
        for (std::size_t l = 0; l < 3; ++l) {
            const double alt = (eta[l] / model.pi_P[l]) * (model.pi_P[2] / eta[2]);
            const double denom = std::max({1.0, std::abs(alt), std::abs(rw.r(j, l))});
            CHECK(std::abs(rw.r(j, l) - alt) / denom < 1e-10);
        }
    }
}

TEST_CASE("empty source class is rejected") {
    const SourceModel model = constant_phi_model(0.0, SimplexVector::checked({1.0, 0.0}));
    CHECK_THROWS_AS(ratio_weights(model, unlabeled_points({0.5})), DataError);
}

TEST_CASE("pseudo log-likelihood values") {
    SUBCASE("all weights 1 give 0") {
        RatioWeights rw = binary_weights({1.0, 1.0, 1.0});
        for (double p : {0.0, 0.25, 0.5, 1.0})
            CHECK(pseudo_log_likelihood(rw, SimplexVector::checked({p, 1.0 - p})) == 0.0);
    }
    SUBCASE("two-row instance") {
        RatioWeights rw = binary_weights({2.0, 0.5});
        const double got = pseudo_log_likelihood(rw, SimplexVector::checked({0.5, 0.5}));
        CHECK(got == doctest::Approx(std::log(1.5) + std::log(0.75)).epsilon(1e-12));
        CHECK(got == doctest::Approx(0.11778303565638346).epsilon(1e-10));
    }
    SUBCASE("vertex evaluation") {
        RatioWeights rw = binary_weights({2.0, 3.0});
        CHECK(pseudo_log_likelihood(rw, SimplexVector::checked({1.0, 0.0})) ==
              doctest::Approx(std::log(2.0) + std::log(3.0)).epsilon(1e-12));
        CHECK(pseudo_log_likelihood(rw, SimplexVector::checked({0.0, 1.0})) == 0.0);
    }
}

TEST_CASE("pmle closed-form instance lands on one half") {
    std::vector<double> r1(100, 2.0);
    for (std::size_t j = 50; j < 100; ++j) r1[j] = 0.5;
    const RatioWeights rw = binary_weights(r1);
    const TargetProportionEstimate est = solve_pmle(rw);
    CHECK(est.solver == "bisection-score");
    CHECK(est.converged);
    CHECK_FALSE(est.degenerate);
    CHECK(std::abs(est.pi_Q[0] - 0.5) < 1e-8);

    // cross-check against a fine grid search
    double best_p = 0.0;
    double best = -1e300;
    for (int i = 0; i <= 1000000; ++i) {
        const double p = static_cast<double>(i) * 1e-6;
        const double v = pseudo_log_likelihood(rw, SimplexVector::checked({p, 1.0 - p}));
        if (v > best) {
            best = v;
            best_p = p;
        }
    }
    CHECK(std::abs(best_p - 0.5) <= 1e-6);
    CHECK(est.final_pseudo_loglik >= best - 1e-8);
}

TEST_CASE("pmle flat likelihood is flagged degenerate") {
    const RatioWeights rw = binary_weights({1.0, 1.0, 1.0, 1.0});
    const TargetProportionEstimate est = solve_pmle(rw);
    CHECK(est.degenerate);
    CHECK_FALSE(est.converged);
    CHECK(est.pi_Q[0] == doctest::Approx(0.5));
}

TEST_CASE("pmle boundary maxima are exact") {
    const TargetProportionEstimate up = solve_pmle(binary_weights({2.0, 3.0, 1.5}));
    CHECK(up.pi_Q[0] == 1.0);
    const TargetProportionEstimate down = solve_pmle(binary_weights({0.5, 0.2, 0.8}));
    CHECK(down.pi_Q[0] == 0.0);
}

TEST_CASE("pmle beats the brute-force simplex grid") {
    RngStream rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 2 + rng.uniform_below(3);
        const std::size_t n = 20 + rng.uniform_below(120);
        const RatioWeights rw = random_weights(n, k, rng);
        const TargetProportionEstimate est = solve_pmle(rw);
        const double grid_best = grid_max_objective(rw, 100);
        CHECK(est.final_pseudo_loglik >= grid_best - 1e-8);
    }
}

TEST_CASE("em fixed point returns a fixed point in one iteration") {
    Matrix w(5, 2, 1.0);
    const TargetProportionEstimate est =
        em_fixed_point(w, SimplexVector::checked({0.3, 0.7}));
    CHECK(est.iterations == 1);
    CHECK(est.converged);
    CHECK(est.pi_Q[0] == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("em agrees with the bisection solver on the closed-form instance") {
    std::vector<double> r1(100, 2.0);
    for (std::size_t j = 50; j < 100; ++j) r1[j] = 0.5;
    const RatioWeights rw = binary_weights(r1);
    const TargetProportionEstimate em =
        em_fixed_point(rw.r, SimplexVector::checked({0.9, 0.1}));
    const TargetProportionEstimate pmle = solve_pmle(rw);
    CHECK(std::abs(em.pi_Q[0] - pmle.pi_Q[0]) < 1e-8);
    CHECK(std::abs(em.pi_Q[0] - 0.5) < 1e-8);
}

TEST_CASE("em objective never decreases") {
    RngStream rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + rng.uniform_below(3);
        const RatioWeights rw = random_weights(60, k, rng);
        std::vector<double> trace;
        em_fixed_point(rw.r, SimplexVector::uniform(k), &trace);
        for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
    }
}

TEST_CASE("pseudo log-likelihood is concave along simplex segments") {
    RngStream rng(51);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + rng.uniform_below(3);
        const RatioWeights rw = random_weights(30, k, rng);
        std::vector<double> a(k);
        std::vector<double> b(k);
        for (std::size_t l = 0; l < k; ++l) {
            a[l] = std::exp(rng.normal());
            b[l] = std::exp(rng.normal());
        }
        const SimplexVector pa = SimplexVector::from_unnormalized(a);
        const SimplexVector pb = SimplexVector::from_unnormalized(b);
        std::vector<double> mid(k);
        for (std::size_t l = 0; l < k; ++l) mid[l] = 0.5 * (pa[l] + pb[l]);
        const double lhs = pseudo_log_likelihood(rw, SimplexVector::checked(mid));
        const double rhs = 0.5 * (pseudo_log_likelihood(rw, pa) + pseudo_log_likelihood(rw, pb));
        CHECK(lhs >= rhs - 1e-12);
    }
}

TEST_CASE("em and pmle recover the target proportion with an exact model") {
    const auto world = make_exact_world(2.0, 0.5);
    RngStream rng(61);
    const Dataset target = world.sample_unlabeled(0.25, 5000, rng);

    const TargetProportionEstimate em = em_saerens(world.model, target);
    CHECK(std::abs(em.pi_Q[0] - 0.25) < 0.05);

    const TargetProportionEstimate pmle = solve_pmle(ratio_weights(world.model, target));
    CHECK(std::abs(pmle.pi_Q[0] - em.pi_Q[0]) < 1e-6);
}

TEST_CASE("no shift: the estimate drifts to the source proportions") {
    const auto world = make_exact_world(2.0, 0.5);
    RngStream rng(71);
    const Dataset target = world.sample_unlabeled(0.5, 5000, rng);
    const TargetProportionEstimate est = solve_pmle(ratio_weights(world.model, target));
    CHECK(std::abs(est.pi_Q[0] - 0.5) < 0.05);
}

TEST_CASE("estimate serializes with diagnostics") {
    const TargetProportionEstimate est = solve_pmle(binary_weights({2.0, 0.5}));
    const std::string json = est.to_json_string();
    CHECK(json.find("pi_Q") != std::string::npos);
    CHECK(json.find("iterations") != std::string::npos);
    CHECK(json.find("converged") != std::string::npos);
    CHECK(json.find("solver") != std::string::npos);
}
