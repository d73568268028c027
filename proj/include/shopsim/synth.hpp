// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shopsim/catalog.hpp"
#include "shopsim/session_log.hpp"

namespace shopsim {

struct SynthOptions {
    std::size_t n_products = 400;
    std::size_t n_customers = 40;
    int min_sessions = 3;
    int max_sessions = 8;
    std::chrono::year_month_day last_day{std::chrono::year{2024}, std::chrono::month{9}, std::chrono::day{30}};
    int span_days = 360;  // sessions fall in the span_days before last_day
    std::uint64_t seed = 7;
};

/// Shopper behaviour behind a synthetic customer.
struct SynthShopper {
    std::string customer_id;
    std::vector<std::string> interests;
    double budget = 0.0;  // dollars
};

struct SynthData {
    Catalog catalog;
    std::vector<std::string> interests;
    std::vector<SynthShopper> shoppers;
    std::vector<Session> sessions;  // sorted by customer, then date
};

/// Products built from per-interest vocabularies, and sessions in which every
/// view and purchase comes from the search results of an earlier query.
SynthData generate_synthetic(const SynthOptions& options);

/// catalog.jsonl, sessions.jsonl, interests.txt
void write_synthetic(const SynthData& data, const std::filesystem::path& dir);

}  // namespace shopsim
