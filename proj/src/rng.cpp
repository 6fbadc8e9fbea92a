#include "varmdp/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace varmdp {

uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    // Feed the tag through splitmix so that consecutive tags (0,1,2,...)
    // land in unrelated regions of the seed space.
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + tag);
    return splitmix64(s);
}

RngStream::RngStream(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& word : state_) {
        word = splitmix64(sm);
    }
}

RngStream RngStream::child(std::initializer_list<uint64_t> tags) const {
    uint64_t s = seed_;
    for (uint64_t tag : tags) {
        s = mix_seed(s, tag);
    }
    return RngStream(s);
}

static inline uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

uint64_t RngStream::next_u64() {
    // xoshiro256++ step.
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() {
    // 53 random bits into (0,1); the +0.5 offset keeps both endpoints open.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

double RngStream::gamma(double shape) {
    if (!(shape > 0.0)) { throw std::invalid_argument("gamma: shape must be > 0"); }
    if (shape < 1.0) {
        // Boost a Gamma(shape+1) draw down: X = Y * U^(1/shape).
        const double u = uniform();
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze method.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * (x * x) * (x * x)) { return d * v; }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) { return d * v; }
    }
}

void RngStream::dirichlet(const std::vector<double>& concentration, std::vector<double>& out) {
    out.resize(concentration.size());
    double total = 0.0;
    for (size_t i = 0; i < concentration.size(); ++i) {
        out[i] = gamma(concentration[i]);
        total += out[i];
    }
    if (total <= 0.0) {
        // All gammas underflowed (only possible for extreme concentrations);
        // fall back to the mean direction.
        double csum = 0.0;
        for (double c : concentration) { csum += c; }
        for (size_t i = 0; i < concentration.size(); ++i) { out[i] = concentration[i] / csum; }
        return;
    }
    for (double& x : out) { x /= total; }
}

uint64_t RngStream::uniform_index(uint64_t n) {
    if (n == 0) { throw std::invalid_argument("uniform_index: n must be > 0"); }
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = n * (UINT64_MAX / n);
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

} // namespace varmdp
