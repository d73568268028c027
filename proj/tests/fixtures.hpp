// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "shopsim/catalog.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/session_log.hpp"

namespace fixtures {

using namespace shopsim;

inline Product product(std::string id, std::string title, double price, std::string category = "General",
                       std::vector<std::string> tags = {}, std::string description = "") {
    Product p;
    p.id = std::move(id);
    p.title = std::move(title);
    p.category = std::move(category);
    p.description = std::move(description);
    p.price = Money::from_dollars(price);
    p.interest_tags = std::move(tags);
    return p;
}

inline Action act(ActionKind kind, std::string payload, std::string_view ts) {
    return Action{kind, std::move(payload), parse_timestamp(ts)};
}

inline Session session(std::string customer, std::string_view date, std::vector<Action> actions) {
    return Session{std::move(customer), parse_date(date), std::move(actions)};
}

/// Products referenced by the two example sessions.
inline std::vector<Product> example_products() {
    return {
        product("b1", "Men's Low height boots", 59.99, "Shoes", {"Hiking"}),
        product("b2", "Brand1 Waterproof hiking boots", 89.99, "Shoes", {"Hiking"}),
        product("bk1", "The full guide to solo traveling - Paperback", 14.99, "Books", {"Travel", "Reading"}),
    };
}

inline Session example_0910(const std::string& customer = "c1") {
    using K = ActionKind;
    return session(customer, "2024-09-10",
                   {act(K::Search, "waterproof hiking shoes", "2024-09-10T10:12:00Z"),
                    act(K::View, "b1", "2024-09-10T10:14:00Z"),
                    act(K::Search, "hiking boots", "2024-09-10T10:35:00Z"),
                    act(K::View, "b2", "2024-09-10T10:35:00Z"),
                    act(K::Purchase, "b2", "2024-09-10T10:42:00Z")});
}

inline Session example_0912(const std::string& customer = "c1") {
    using K = ActionKind;
    return session(customer, "2024-09-12",
                   {act(K::Search, "best solo travel books", "2024-09-12T14:22:00Z"),
                    act(K::View, "bk1", "2024-09-12T14:33:00Z"),
                    act(K::Purchase, "bk1", "2024-09-12T14:50:00Z")});
}

/// Brute force over every (i, j) index pair: i must be the session's first
/// SEARCH, j a VIEW after it with no SEARCH or VIEW in between, and the gap
/// at most the pair window.
inline std::optional<QueryViewPair> oracle_pair(const Session& s) {
    const auto& a = s.actions;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            if (a[i].kind != ActionKind::Search || a[j].kind != ActionKind::View) continue;
            bool earlier_search = false;
            for (std::size_t k = 0; k < i; ++k) earlier_search |= a[k].kind == ActionKind::Search;
            bool blocked = false;
            for (std::size_t k = i + 1; k < j; ++k) blocked |= a[k].kind != ActionKind::Purchase;
            const auto gap = a[j].timestamp - a[i].timestamp;
            if (!earlier_search && !blocked && gap >= 0 && gap <= kPairWindowSeconds)
                return QueryViewPair{a[i].payload, a[j].payload, gap};
        }
    }
    return std::nullopt;
}

/// Random session on `date` with 0..max_actions actions and 0..max_gap second gaps.
inline Session random_session(Rng& rng, const std::string& customer, std::string_view date, int max_actions = 8,
                              int max_gap = 90) {
    Session s{customer, parse_date(date), {}};
    Timestamp t = midnight_of(s.date) + rng.uniform_int(8 * 3600, 12 * 3600);
    const int n = rng.uniform_int(0, max_actions);
    for (int i = 0; i < n; ++i) {
        const auto kind = static_cast<ActionKind>(rng.uniform_int(0, 2));
        const std::string payload =
            kind == ActionKind::Search ? "query " + std::to_string(rng.uniform_int(0, 20)) : "p" + std::to_string(rng.uniform_int(0, 9));
        s.actions.push_back({kind, payload, t});
        t += rng.uniform_int(0, max_gap);
    }
    return s;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
  public:
    explicit TempDir(std::string_view tag = "shopsim") {
        static std::uint64_t counter = 0;
        Rng rng(fnv1a_seed(tag) ^ static_cast<std::uint64_t>(reinterpret_cast<std::uintptr_t>(this)) ^ ++counter ^ (static_cast<std::uint64_t>(::getpid()) << 32));
        path_ = std::filesystem::temp_directory_path() /
                (std::string(tag) + "-" + std::to_string(rng.next_u64() % 1'000'000'000ULL));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    static std::uint64_t fnv1a_seed(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return h;
    }
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fixtures
