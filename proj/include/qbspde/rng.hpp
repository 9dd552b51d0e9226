#pragma once

#include <cstdint>

namespace qbspde {

/// Deterministic counter-style generator built on splitmix64. Streams derived
/// with derive() are statistically independent and do not depend on how work
/// is split across threads, so seeded results are reproducible for any worker
/// count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform draw in the open interval (0, 1).
    double uniform01();

    /// Uniform draw in [lo, hi].
    double uniform(double lo, double hi);

    /// Standard normal via rational inverse-CDF (portable, branch-free
    /// stream accounting: one uniform per normal).
    double normal();

    /// Independent child stream addressed by (tag, index).
    Rng derive(std::uint64_t tag, std::uint64_t index) const;

private:
    std::uint64_t state_;
};

/// Inverse standard normal CDF (Acklam's rational approximation,
/// |rel err| < 1.2e-9 on (0,1)).
double inverse_normal_cdf(double p);

}  // namespace qbspde
