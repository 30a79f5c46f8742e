#include "cgl/rng.hpp"

#include <cmath>

namespace cgl {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t state = seed;
    for (auto& word : s_) word = splitmix64(state);
}

std::uint64_t Rng::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return u;
}

std::uint64_t Rng::below(std::uint64_t n) {
    // Lemire's rejection keeps the result unbiased.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next();
        if (r >= threshold) return r % n;
    }
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

std::uint64_t Rng::binomial(std::uint64_t trials, double p) {
    if (p <= 0.0 || trials == 0) return 0;
    if (p >= 1.0) return trials;
    const double q = 1.0 - p;
    double pmf = std::pow(q, static_cast<double>(trials));
    if (pmf < 1e-300) {
        std::uint64_t k = 0;
        for (std::uint64_t i = 0; i < trials; ++i) k += bernoulli(p) ? 1 : 0;
        return k;
    }
    // Inversion over the pmf recursion.
    const double u = uniform();
    double cdf = pmf;
    std::uint64_t k = 0;
    while (u >= cdf && k < trials) {
        pmf *= (static_cast<double>(trials - k) / static_cast<double>(k + 1)) * (p / q);
        ++k;
        cdf += pmf;
    }
    return k;
}

Rng Rng::split(std::uint64_t key) const {
    std::uint64_t state = seed_ ^ (0xd1b54a32d192ed03ULL * (key + 1));
    return Rng(splitmix64(state));
}

}  // namespace cgl
