// SPDX-License-Identifier: Apache-2.0
#include "shopsim/rng.hpp"

#include <cmath>
#include <numbers>

#include "shopsim/text.hpp"

namespace shopsim {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index) noexcept {
    return mix64(mix64(master ^ fnv1a64(tag)) + index);
}

double Rng::uniform01() {
    // 53 random mantissa bits.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

int Rng::uniform_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(uniform_index(static_cast<std::size_t>(hi_inclusive - lo + 1)));
}

double Rng::normal() {
    // Box-Muller; 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace shopsim
