// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace shopsim {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent sub-seed for stream `tag`, element `index`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) noexcept;

/// mt19937_64 with distribution code written out by hand: the standard
/// distributions are implementation-defined, which would break bit-for-bit
/// reproducibility across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform01();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Uniform in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n);
    int uniform_int(int lo, int hi_inclusive);
    double normal();
    bool bernoulli(double p) { return uniform01() < p; }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace shopsim
