#include "advsel/rng.hpp"

#include <cmath>

namespace advsel {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) return 0;
    // Mask down to the smallest power-of-two range covering n, reject the rest.
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
        std::uint64_t x = engine_() & mask;
        if (x < n) return x;
    }
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace advsel
