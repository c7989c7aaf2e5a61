#ifndef ADVSEL_RNG_HPP
#define ADVSEL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace advsel {

/// Deterministic random source. The engine (mt19937_64) is fully specified
/// by the standard; the distributions are hand-rolled because the standard
/// library's distribution objects are implementation-defined and would break
/// bit-reproducibility across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    /// Standard normal via Box-Muller. Draws two uniforms per call; no spare
    /// is cached so the stream position is a pure function of the call count.
    double normal() {
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log() finite
        double u2 = uniform01();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Unbiased integer in [0, n) by rejection on the top bits.
    std::uint64_t below(std::uint64_t n);

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from (base, salt), splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

} // namespace advsel

#endif
