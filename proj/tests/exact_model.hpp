#pragma once

// Test-only harness: a binary world on [0,1] whose source logit is affine,
// so a two-unit ReLU network represents it EXACTLY (unit one passes x
// through, unit two supplies the constant). Class 1 is an exponentially
// tilted uniform, class 2 is uniform, which makes the tilt the exact density
// ratio and keeps every downstream identity testable to machine precision.
//
//   f1(x) = s e^{s x} / (e^s - 1),   f2(x) = 1     on [0,1]
//   phi(x) = log(pi1/pi2) + log(s/(e^s-1)) + s x

#include <cmath>
#include <optional>
#include <vector>

#include "gcs/dataset.hpp"
#include "gcs/mlp.hpp"
#include "gcs/rng.hpp"

namespace gcs::testing {

struct ExactBinaryWorld {
    double tilt = 2.0;
    double pi_P1 = 0.5;
    SourceModel model;

    double f1_pdf(double x) const {
        if (x < 0.0 || x > 1.0) return 0.0;
        return tilt * std::exp(tilt * x) / (std::exp(tilt) - 1.0);
    }
    double f2_pdf(double x) const { return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0; }

    double sample_f1(RngStream& rng) const {
        const double u = rng.uniform();
        return std::log1p(u * (std::exp(tilt) - 1.0)) / tilt;
    }
    double sample_f2(RngStream& rng) const { return rng.uniform(); }

    // true posterior for a domain with class-1 weight pi1
    SimplexVector true_eta(double pi1, double x) const {
        const double a = pi1 * f1_pdf(x);
        const double b = (1.0 - pi1) * f2_pdf(x);
        return SimplexVector::checked({a / (a + b), b / (a + b)});
    }

    Dataset sample(double pi1, std::size_t n, RngStream& rng) const {
        Matrix f(n, 1);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.uniform() < pi1 ? 1 : 2;
            f(i, 0) = y[i] == 1 ? sample_f1(rng) : sample_f2(rng);
        }
        return Dataset(std::move(f), std::move(y), 2);
    }

    Dataset sample_unlabeled(double pi1, std::size_t n, RngStream& rng) const {
        Dataset d = sample(pi1, n, rng);
        return Dataset(d.features, std::nullopt, 2);
    }
};

inline ExactBinaryWorld make_exact_world(double tilt = 2.0, double pi_P1 = 0.5) {
    ExactBinaryWorld w;
    w.tilt = tilt;
    w.pi_P1 = pi_P1;

    MlpConfig config;
    config.depth = 1;
    config.width = 2;
    config.output_dim = 1;
    config.output_clip = 100.0;
    MlpParams p = init_params(config, 1);
    // unit 0: ReLU(x) = x on [0,1]; unit 1: ReLU(0*x + 1) = 1
    p.weights[0](0, 0) = 1.0;
    p.weights[0](1, 0) = 0.0;
    p.biases[0] = {0.0, 1.0};
    const double intercept =
        std::log(pi_P1 / (1.0 - pi_P1)) + std::log(tilt / (std::exp(tilt) - 1.0));
    p.weights[1](0, 0) = tilt;      // slope times the pass-through unit
    p.weights[1](0, 1) = intercept; // constant times the bias unit

    w.model = SourceModel{std::move(p), config,
                          SimplexVector::checked({pi_P1, 1.0 - pi_P1}), ScalingSpec::unit(1)};
    return w;
}

} // namespace gcs::testing
