// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace shopsim {

/// Currency amount held as integer cents so that sums are exact.
class Money {
  public:
    constexpr Money() = default;

    static constexpr Money from_cents(std::int64_t cents) { return Money{cents}; }
    /// Rounds to the nearest cent.
    static Money from_dollars(double dollars);

    [[nodiscard]] constexpr std::int64_t cents() const noexcept { return cents_; }
    [[nodiscard]] double dollars() const noexcept { return static_cast<double>(cents_) / 100.0; }
    /// "$12.34"
    [[nodiscard]] std::string str() const;

    constexpr Money& operator+=(Money other) noexcept {
        cents_ += other.cents_;
        return *this;
    }
    friend constexpr Money operator+(Money a, Money b) noexcept { return a += b; }
    friend constexpr Money operator-(Money a, Money b) noexcept { return Money{a.cents_ - b.cents_}; }
    friend constexpr auto operator<=>(Money, Money) = default;

  private:
    constexpr explicit Money(std::int64_t cents) : cents_(cents) {}
    std::int64_t cents_ = 0;
};

}  // namespace shopsim
