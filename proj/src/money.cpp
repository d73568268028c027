// SPDX-License-Identifier: Apache-2.0
#include "shopsim/money.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace shopsim {

Money Money::from_dollars(double dollars) {
    return Money{static_cast<std::int64_t>(std::llround(dollars * 100.0))};
}

std::string Money::str() const {
    const auto abs = std::llabs(cents_);
    return fmt::format("{}${}.{:02}", cents_ < 0 ? "-" : "", abs / 100, abs % 100);
}

}  // namespace shopsim
