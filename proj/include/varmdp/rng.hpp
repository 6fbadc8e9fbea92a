// Deterministic, splittable random streams.
//
// Every consumer of randomness in the library derives its own stream from a
// root seed and a list of integer tags (state index, action index, model
// index, ...). Streams derived with distinct tags are statistically
// independent, so sampling may be parallelized across (s,a) rows or models
// without changing results.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace varmdp {

/// splitmix64 mixing step; also usable as a standalone seed scrambler.
uint64_t splitmix64(uint64_t& state);

/// Hash-combines a seed with a tag (order-sensitive).
uint64_t mix_seed(uint64_t seed, uint64_t tag);

/// xoshiro256++ generator with explicit distribution code, so sampled values
/// depend only on the seed, never on the standard library implementation.
class RngStream {
  public:
    explicit RngStream(uint64_t seed);

    /// New independent stream identified by a tag path.
    RngStream child(std::initializer_list<uint64_t> tags) const;

    uint64_t next_u64();
    /// Uniform on (0, 1) — never returns 0 or 1.
    double uniform();
    /// Standard normal via Box-Muller (no state cached across calls).
    double normal();
    /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
    double gamma(double shape);
    /// Dirichlet sample with the given concentrations written into out.
    void dirichlet(const std::vector<double>& concentration, std::vector<double>& out);
    /// Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n);

  private:
    std::array<uint64_t, 4> state_{};
    uint64_t seed_ = 0;
};

} // namespace varmdp
