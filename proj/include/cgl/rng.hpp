#pragma once

#include <cstdint>
#include <limits>

namespace cgl {

/// xoshiro256** seeded through SplitMix64.
///
/// Every stochastic routine in the library takes an explicit seed and builds
/// one of these. Independent substreams are obtained with split(key), which
/// hashes (seed, key) into a fresh state, so parallel or nested consumers never
/// share a sequence. Distribution helpers are implemented here rather than
/// with <random> so that streams are bit-identical across standard libraries.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return next(); }

    std::uint64_t next();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal (Marsaglia polar method).
    double normal();
    /// +1 or -1 with equal probability.
    double sign() { return (next() >> 63) ? 1.0 : -1.0; }
    /// Binomial(trials, p) by inversion; intended for small trial counts.
    std::uint64_t binomial(std::uint64_t trials, double p);

    std::uint64_t seed() const { return seed_; }
    Rng split(std::uint64_t key) const;

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace cgl
