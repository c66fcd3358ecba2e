#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace gcs {

// splitmix64 finalizer; the basis for all seed derivation and streams.
std::uint64_t mix64(std::uint64_t x);

// Derive an independent stream seed from (seed, salt). Used to give every
// purpose (generation, training, splits, replications) its own stream so
// parallel and serial execution see identical randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t salt);

// Counter-based pseudo-random stream (splitmix64). Deterministic across
// platforms, cheap to fork via derive_seed.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // in [0,1), 53-bit resolution
    double uniform();
    // in (0,1); never returns 0, safe under log()
    double uniform_pos();
    // unbiased draw from {0,...,n-1}, n >= 1
    std::uint64_t uniform_below(std::uint64_t n);

    // standard normal via Box-Muller (pairs cached)
    double normal();
    // Exp(mean) by inverse CDF
    double exponential(double mean);
    // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 boosted through shape+1
    double gamma(double shape);
    // Beta(a, b) as the ratio-of-Gammas construction
    double beta(double a, double b);

private:
    std::uint64_t state_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// Fisher-Yates permutation of {0..n-1} drawn from the stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng);

} // namespace gcs
