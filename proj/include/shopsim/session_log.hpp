// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shopsim {

struct Transcript;

enum class ActionKind { Search, View, Purchase };

std::string_view to_string(ActionKind kind);
/// Accepts "SEARCH"/"VIEW"/"PURCHASE" in any case.
ActionKind parse_action_kind(std::string_view text);

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

struct Action {
    ActionKind kind = ActionKind::Search;
    std::string payload;  // query text for SEARCH, product id for VIEW/PURCHASE
    Timestamp timestamp = 0;

    friend bool operator==(const Action&, const Action&) = default;
};

struct Session {
    std::string customer_id;
    std::chrono::year_month_day date{};
    std::vector<Action> actions;  // sorted by timestamp

    friend bool operator==(const Session&, const Session&) = default;
};

struct ShoppingHistory {
    std::string customer_id;
    std::vector<Session> recent_sessions;  // on or after the cutoff, sorted by date
    std::vector<Action> older_purchases;   // PURCHASE actions before the cutoff

    [[nodiscard]] bool empty() const { return recent_sessions.empty() && older_purchases.empty(); }
    friend bool operator==(const ShoppingHistory&, const ShoppingHistory&) = default;
};

struct QueryViewPair {
    std::string query;
    std::string product_id;
    std::int64_t delta_seconds = 0;  // 0..kPairWindowSeconds

    friend bool operator==(const QueryViewPair&, const QueryViewPair&) = default;
};

/// Inclusive upper bound on the search-to-view gap of a mined pair.
inline constexpr std::int64_t kPairWindowSeconds = 60;

struct SessionStats {
    int searches = 0;
    int views = 0;
    int purchases = 0;

    [[nodiscard]] int total() const { return searches + views + purchases; }
    friend bool operator==(const SessionStats&, const SessionStats&) = default;
};

// --- time helpers ---------------------------------------------------------

/// "YYYY-MM-DDTHH:MM:SS[.frac][Z|+HH:MM|-HH:MM]", also accepts a space instead of 'T'.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);  // "YYYY-MM-DDTHH:MM:SSZ"
std::chrono::year_month_day parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day date);
std::chrono::year_month_day date_of(Timestamp ts);
Timestamp midnight_of(std::chrono::year_month_day date);
std::string format_clock(Timestamp ts);  // "HH:MM"
/// Same day-of-month six months earlier, clamped to the month's last day.
std::chrono::year_month_day six_months_before(std::chrono::year_month_day date);

// --- operations -------------------------------------------------------------

/// Reads a session log (JSONL, one session per line) and splits each
/// customer's sessions at `cutoff`: sessions dated on/after it are recent,
/// earlier sessions contribute only their purchases. Output is sorted by
/// customer id.
std::vector<ShoppingHistory> load_histories(const std::filesystem::path& path,
                                            std::chrono::year_month_day cutoff);

/// Same as load_histories but returns every session unsplit, in file order.
std::vector<Session> load_sessions(const std::filesystem::path& path);

std::vector<ShoppingHistory> split_histories(std::vector<Session> sessions,
                                             std::chrono::year_month_day cutoff);

/// Latest session date in the set; throws ValidationError when empty.
std::chrono::year_month_day latest_date(const std::vector<Session>& sessions);

void save_sessions(const std::vector<Session>& sessions, const std::filesystem::path& path);

/// First SEARCH of each recent session paired with the first VIEW after it,
/// provided no other SEARCH comes between them and the gap is <= 60 s.
std::vector<QueryViewPair> mine_pairs(const ShoppingHistory& history);
std::optional<QueryViewPair> mine_pair(const Session& session);

SessionStats session_stats(const Session& session);
SessionStats session_stats(const Transcript& transcript);

/// Resolves a product id to display text (its title). Returning nullopt keeps
/// the raw payload.
using TitleResolver = std::function<std::optional<std::string>(std::string_view id)>;

std::string render_sessions(const ShoppingHistory& history, const TitleResolver& titles = {});
std::string render_older_purchases(const ShoppingHistory& history, const TitleResolver& titles = {});

/// Text layout:
///   2024-09-10
///   ==========
///   <SEARCH> waterproof hiking shoes - at 10:12
///   ==========
///   2024-09-12
///   ...
/// followed, when present, by an "Older purchases:" block of
/// "<PURCHASE> title - on YYYY-MM-DD" lines.
std::string render_history(const ShoppingHistory& history, const TitleResolver& titles = {});

/// Inverse of render_history. Payloads come back as rendered (titles, not ids)
/// and timestamps at minute resolution, so parse∘render is a fixpoint of render.
ShoppingHistory parse_rendered_history(std::string_view text);

}  // namespace shopsim
