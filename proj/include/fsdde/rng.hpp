#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fsdde {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Derives an independent seed from (seed, salt); used to split one user seed
/// into unrelated sampling stages (driver batch, independent copy, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t s = seed;
    std::uint64_t a = detail::splitmix64(s);
    s = a ^ (salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    return detail::splitmix64(s);
}

/// Counter-based per-stream generator. Stream k of a given seed always yields
/// the same sequence, independent of how many streams exist or which worker
/// draws them. This is the whole reproducibility contract of the sampler.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t stream) {
        state_ = derive_seed(seed, stream);
        // decorrelate from the seed-derivation chain
        detail::splitmix64(state_);
    }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform in the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; pairs are cached.
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        have_cached_ = true;
        return radius * std::cos(angle);
    }

private:
    std::uint64_t state_ = 0;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace fsdde
