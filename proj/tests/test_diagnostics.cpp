#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gcs/diagnostics.hpp"
#include "gcs/errors.hpp"
#include "gcs/rng.hpp"
#include "gcs/simulation.hpp"

using namespace gcs;

namespace {

Dataset gaussian_cloud(std::size_t n, std::size_t d, double mu, double sigma, RngStream& rng,
                       std::optional<int> label = std::nullopt) {
    Matrix f(n, d);
    for (double& v : f.data) v = std::clamp(mu + sigma * rng.normal(), 0.0, 1.0);
    std::optional<std::vector<int>> y;
    if (label) y = std::vector<int>(n, *label);
    return Dataset(std::move(f), std::move(y), 2);
}

Dataset stack(const Dataset& a, const Dataset& b) {
    Matrix f(a.n() + b.n(), a.d());
    std::vector<int> y;
    for (std::size_t i = 0; i < a.n(); ++i) {
        std::copy(a.x(i).begin(), a.x(i).end(), f.row(i).begin());
        y.push_back(a.label(i));
    }
    for (std::size_t i = 0; i < b.n(); ++i) {
        std::copy(b.x(i).begin(), b.x(i).end(), f.row(a.n() + i).begin());
        y.push_back(b.label(i));
    }
    return Dataset(std::move(f), std::move(y), 2);
}

} // namespace

TEST_CASE("identical inputs give a zero slope") {
    RngStream rng(3);
    const Dataset d = gaussian_cloud(200, 3, 0.5, 0.15, rng);
    const LogisticFit fit = fit_ratio(d, d);
    double norm = 0.0;
    for (double s : fit.slopes) norm += s * s;
    CHECK(std::sqrt(norm) < 1e-3);
    CHECK(fit.converged);
}

TEST_CASE("odds identity: equal counts and zero coefficients give ratio 1") {
    LogisticFit fit;
    fit.slopes.assign(4, 0.0);
    fit.log_count_correction = 0.0;
    CHECK(fit.ratio(std::vector<double>{0.1, 0.5, 0.9, 0.3}) == doctest::Approx(1.0));
}

TEST_CASE("identically distributed domains estimate a ratio near one") {
    RngStream rng(7);
    const Dataset src = gaussian_cloud(4000, 2, 0.5, 0.15, rng);
    const Dataset tgt = gaussian_cloud(4000, 2, 0.5, 0.15, rng);
    const LogisticFit fit = fit_ratio(src, tgt);
    for (double s : fit.slopes) CHECK(std::abs(s) < 0.5);
    CHECK(fit.ratio(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("scenario III per-class fits recover the shift slope") {
    for (int cls : {1, 2}) {
        RngStream rng_p(derive_seed(11, "fitratio-p", cls));
        RngStream rng_q(derive_seed(11, "fitratio-q", cls));
        const std::vector<int> labels(10000, cls);
        const Matrix xp = draw_features_raw(Scenario::III, Domain::source, labels, rng_p);
        const Matrix xq = draw_features_raw(Scenario::III, Domain::target, labels, rng_q);
        const Dataset src(xp, std::nullopt, 2);
        const Dataset tgt(xq, std::nullopt, 2);
        const LogisticFit fit = fit_ratio(src, tgt);
        for (double s : fit.slopes) CHECK(std::abs(s - (-1.0)) < 0.2);
    }
}

TEST_CASE("log-likelihood never decreases during the fit") {
    RngStream rng(13);
    const Dataset src = gaussian_cloud(400, 3, 0.4, 0.15, rng);
    const Dataset tgt = gaussian_cloud(300, 3, 0.6, 0.15, rng);
    std::vector<double> trace;
    fit_ratio(src, tgt, &trace);
    REQUIRE(trace.size() > 1);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1]);
}

TEST_CASE("fit is invariant to permuting sample order") {
    RngStream rng(17);
    const Dataset src = gaussian_cloud(300, 2, 0.45, 0.15, rng);
    const Dataset tgt = gaussian_cloud(250, 2, 0.55, 0.15, rng);
    const LogisticFit a = fit_ratio(src, tgt);

    std::vector<std::size_t> perm_s = shuffled_indices(src.n(), rng);
    std::vector<std::size_t> perm_t = shuffled_indices(tgt.n(), rng);
    const LogisticFit b = fit_ratio(subset(src, perm_s), subset(tgt, perm_t));
    CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-6));
    for (std::size_t j = 0; j < a.slopes.size(); ++j)
        CHECK(a.slopes[j] == doctest::Approx(b.slopes[j]).epsilon(1e-6));
}

TEST_CASE("perfect separation is capped and flagged") {
    RngStream rng(19);
    const Dataset src = gaussian_cloud(100, 1, 0.1, 0.02, rng);
    const Dataset tgt = gaussian_cloud(100, 1, 0.9, 0.02, rng);
    const LogisticFit fit = fit_ratio(src, tgt);
    CHECK(fit.separation_flagged);
    double norm = fit.intercept * fit.intercept;
    for (double s : fit.slopes) norm += s * s;
    CHECK(std::sqrt(norm) <= 50.0 + 1e-9);
}

TEST_CASE("gcs report separates label shift from a class-dependent shift") {
    // label-shift generator: scenario I with shifted priors only
    const ScenarioSpec spec{Scenario::I, 0.25, 5000, 5000, 10, 31};
    const SimulatedData data = generate(spec, 31);
    const Dataset target_labeled(data.target.features, data.target_labels, 2);
    const RatioDiagnostic shift_ok = gcs_report(data.source, target_labeled, 30, 31);
    REQUIRE(shift_ok.pairs.size() == 1);
    CHECK(shift_ok.pairs[0].median_abs_diff < 0.2);

    // scenario II also satisfies label shift; its beta densities leave more
    // sampling noise in the per-class fits, so only the ordering against the
    // violating generator is asserted for it
    const ScenarioSpec spec2{Scenario::II, 0.25, 5000, 5000, 10, 31};
    const SimulatedData data2 = generate(spec2, 31);
    const Dataset target2(data2.target.features, data2.target_labels, 2);
    const RatioDiagnostic shift_ok2 = gcs_report(data2.source, target2, 30, 31);

    // violation: class 1 moves between domains, class 2 stays put
    RngStream rng(37);
    const Dataset src = stack(gaussian_cloud(1000, 4, 0.35, 0.15, rng, 1),
                              gaussian_cloud(1000, 4, 0.2, 0.1, rng, 2));
    const Dataset tgt = stack(gaussian_cloud(1000, 4, 0.65, 0.15, rng, 1),
                              gaussian_cloud(1000, 4, 0.2, 0.1, rng, 2));
    const RatioDiagnostic broken = gcs_report(src, tgt, 30, 37);
    CHECK(broken.pairs[0].median_abs_diff > 0.5);

    CHECK(shift_ok.pairs[0].median_abs_diff < broken.pairs[0].median_abs_diff);
    CHECK(shift_ok2.pairs[0].median_abs_diff < broken.pairs[0].median_abs_diff);
}

TEST_CASE("identical source and target give ratios near one") {
    RngStream rng(41);
    const Dataset d = stack(gaussian_cloud(500, 2, 0.4, 0.1, rng, 1),
                            gaussian_cloud(500, 2, 0.6, 0.1, rng, 2));
    const RatioDiagnostic diag = gcs_report(d, d, 20, 41);
    CHECK(std::abs(diag.pairs[0].mean_diff) < 0.2);
    CHECK(diag.pairs[0].median_abs_diff < 0.2);
}

TEST_CASE("histogram counts account for every evaluation point") {
    RngStream rng(43);
    const Dataset d = stack(gaussian_cloud(300, 2, 0.4, 0.1, rng, 1),
                            gaussian_cloud(300, 2, 0.6, 0.1, rng, 2));
    const RatioDiagnostic diag = gcs_report(d, d, 15, 43);
    for (const auto& h : diag.ratio_hists) {
        std::size_t total = 0;
        for (std::size_t c : h.counts) total += c;
        CHECK(total == diag.ratios.rows);
    }
    CHECK(diag.ratio_hists.size() == 2);
    const std::string json = diag.to_json_string();
    CHECK(json.find("median_abs_diff") != std::string::npos);
}

TEST_CASE("a class missing from one domain is an error") {
    RngStream rng(47);
    const Dataset src = stack(gaussian_cloud(50, 2, 0.4, 0.1, rng, 1),
                              gaussian_cloud(50, 2, 0.6, 0.1, rng, 2));
    const Dataset tgt_only1 = gaussian_cloud(100, 2, 0.5, 0.1, rng, 1);
    CHECK_THROWS_AS(gcs_report(src, tgt_only1, 10, 1), DataError);
}
