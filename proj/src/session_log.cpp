// SPDX-License-Identifier: Apache-2.0
#include "shopsim/session_log.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "shopsim/errors.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

constexpr std::string_view kSeparator = "==========";
constexpr std::string_view kOlderHeader = "Older purchases:";

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view what) {
    if (pos + len > text.size()) throw ValidationError(fmt::format("truncated {} in '{}'", what, text));
    int value = 0;
    const auto* first = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len)
        throw ValidationError(fmt::format("bad {} in '{}'", what, text));
    return value;
}

void expect_char(std::string_view text, std::size_t pos, char c) {
    if (pos >= text.size() || text[pos] != c)
        throw ValidationError(fmt::format("expected '{}' at offset {} in '{}'", c, pos, text));
}

Session session_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("session record is not a JSON object");
    Session s;
    s.customer_id = j.at("customer_id").get<std::string>();
    if (s.customer_id.empty()) throw ValidationError("customer_id is empty");
    s.date = parse_date(j.at("date").get<std::string>());
    for (const auto& a : j.at("actions")) {
        Action action;
        action.kind = parse_action_kind(a.at("kind").get<std::string>());
        action.payload = a.at("payload").get<std::string>();
        if (trim(action.payload).empty()) throw ValidationError("action payload is empty");
        action.timestamp = parse_timestamp(a.at("ts").get<std::string>());
        s.actions.push_back(std::move(action));
    }
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        if (i > 0 && s.actions[i].timestamp < s.actions[i - 1].timestamp)
            throw ValidationError(fmt::format("action {} is out of timestamp order", i));
        if (date_of(s.actions[i].timestamp) != s.date)
            throw ValidationError(fmt::format("action {} is not dated {}", i, format_date(s.date)));
    }
    return s;
}

json session_to_json(const Session& s) {
    json actions = json::array();
    for (const auto& a : s.actions)
        actions.push_back({{"kind", to_string(a.kind)}, {"payload", a.payload}, {"ts", format_timestamp(a.timestamp)}});
    return json{{"customer_id", s.customer_id}, {"date", format_date(s.date)}, {"actions", actions}};
}

std::string display(const Action& a, const TitleResolver& titles) {
    if (a.kind != ActionKind::Search && titles) {
        if (auto t = titles(a.payload)) return *t;
    }
    return a.payload;
}

}  // namespace

std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::Search: return "SEARCH";
        case ActionKind::View: return "VIEW";
        case ActionKind::Purchase: return "PURCHASE";
    }
    return "?";
}

ActionKind parse_action_kind(std::string_view text) {
    const auto lower = to_lower(text);
    if (lower == "search") return ActionKind::Search;
    if (lower == "view") return ActionKind::View;
    if (lower == "purchase") return ActionKind::Purchase;
    throw ValidationError(fmt::format("unknown action kind '{}'", text));
}

chr::year_month_day parse_date(std::string_view text) {
    if (text.size() != 10) throw ValidationError(fmt::format("bad date '{}'", text));
    const int y = parse_fixed_int(text, 0, 4, "year");
    expect_char(text, 4, '-');
    const int m = parse_fixed_int(text, 5, 2, "month");
    expect_char(text, 7, '-');
    const int d = parse_fixed_int(text, 8, 2, "day");
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw ValidationError(fmt::format("invalid calendar date '{}'", text));
    return ymd;
}

std::string format_date(chr::year_month_day date) {
    return fmt::format("{:04}-{:02}-{:02}", static_cast<int>(date.year()), static_cast<unsigned>(date.month()),
                       static_cast<unsigned>(date.day()));
}

Timestamp midnight_of(chr::year_month_day date) {
    return chr::sys_days{date}.time_since_epoch().count() * 86400LL;
}

chr::year_month_day date_of(Timestamp ts) {
    const auto days = chr::floor<chr::days>(chr::sys_seconds{chr::seconds{ts}});
    return chr::year_month_day{days};
}

Timestamp parse_timestamp(std::string_view text) {
    if (text.size() < 19) throw ValidationError(fmt::format("bad timestamp '{}'", text));
    const auto date = parse_date(text.substr(0, 10));
    if (text[10] != 'T' && text[10] != ' ' && text[10] != 't')
        throw ValidationError(fmt::format("bad timestamp '{}'", text));
    const int hh = parse_fixed_int(text, 11, 2, "hour");
    expect_char(text, 13, ':');
    const int mm = parse_fixed_int(text, 14, 2, "minute");
    expect_char(text, 16, ':');
    const int ss = parse_fixed_int(text, 17, 2, "second");
    if (hh > 23 || mm > 59 || ss > 60) throw ValidationError(fmt::format("bad time of day in '{}'", text));

    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }
    std::int64_t offset = 0;
    if (pos < text.size()) {
        const char c = text[pos];
        if ((c == 'Z' || c == 'z') && pos + 1 == text.size()) {
            ++pos;
        } else if ((c == '+' || c == '-') && pos + 6 == text.size()) {
            const int oh = parse_fixed_int(text, pos + 1, 2, "offset hour");
            expect_char(text, pos + 3, ':');
            const int om = parse_fixed_int(text, pos + 4, 2, "offset minute");
            offset = (c == '+' ? 1 : -1) * (oh * 3600LL + om * 60LL);
            pos += 6;
        } else {
            throw ValidationError(fmt::format("bad timestamp suffix in '{}'", text));
        }
    }
    return midnight_of(date) + hh * 3600LL + mm * 60LL + ss - offset;
}

std::string format_timestamp(Timestamp ts) {
    const auto date = date_of(ts);
    const auto secs = ts - midnight_of(date);
    return fmt::format("{}T{:02}:{:02}:{:02}Z", format_date(date), secs / 3600, (secs / 60) % 60, secs % 60);
}

std::string format_clock(Timestamp ts) {
    const auto secs = ts - midnight_of(date_of(ts));
    return fmt::format("{:02}:{:02}", secs / 3600, (secs / 60) % 60);
}

chr::year_month_day six_months_before(chr::year_month_day date) {
    auto ym = chr::year_month{date.year(), date.month()} - chr::months{6};
    const auto last = chr::year_month_day_last{ym.year(), chr::month_day_last{ym.month()}}.day();
    return {ym.year(), ym.month(), std::min(date.day(), last)};
}

std::vector<Session> load_sessions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open session log '{}'", path.string()));
    std::vector<Session> sessions;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (trim(line).empty()) continue;
        try {
            sessions.push_back(session_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("{}: line {}: malformed session record: {}", path.string(), line_no, e.what()));
        }
    }
    return sessions;
}

void save_sessions(const std::vector<Session>& sessions, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
    for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
}

std::vector<ShoppingHistory> split_histories(std::vector<Session> sessions, chr::year_month_day cutoff) {
    std::map<std::string, ShoppingHistory> by_customer;
    std::stable_sort(sessions.begin(), sessions.end(),
                     [](const Session& a, const Session& b) { return a.date < b.date; });
    for (auto& s : sessions) {
        auto& h = by_customer[s.customer_id];
        h.customer_id = s.customer_id;
        if (s.date >= cutoff) {
            h.recent_sessions.push_back(std::move(s));
        } else {
            for (auto& a : s.actions)
                if (a.kind == ActionKind::Purchase) h.older_purchases.push_back(std::move(a));
        }
    }
    std::vector<ShoppingHistory> out;
    out.reserve(by_customer.size());
    for (auto& [id, h] : by_customer) {
        if (!h.empty()) out.push_back(std::move(h));
    }
    return out;
}

std::vector<ShoppingHistory> load_histories(const std::filesystem::path& path, chr::year_month_day cutoff) {
    return split_histories(load_sessions(path), cutoff);
}

chr::year_month_day latest_date(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw ValidationError("no sessions");
    auto best = sessions.front().date;
    for (const auto& s : sessions) best = std::max(best, s.date);
    return best;
}

std::optional<QueryViewPair> mine_pair(const Session& session) {
    const auto& acts = session.actions;
    const auto first_search = std::find_if(acts.begin(), acts.end(),
                                           [](const Action& a) { return a.kind == ActionKind::Search; });
    if (first_search == acts.end()) return std::nullopt;
    for (auto it = std::next(first_search); it != acts.end(); ++it) {
        if (it->kind == ActionKind::Search) return std::nullopt;
        if (it->kind == ActionKind::View) {
            const auto delta = it->timestamp - first_search->timestamp;
            if (delta < 0 || delta > kPairWindowSeconds) return std::nullopt;
            return QueryViewPair{first_search->payload, it->payload, delta};
        }
    }
    return std::nullopt;
}

std::vector<QueryViewPair> mine_pairs(const ShoppingHistory& history) {
    std::vector<QueryViewPair> pairs;
    for (const auto& s : history.recent_sessions) {
        if (auto p = mine_pair(s)) pairs.push_back(std::move(*p));
    }
    return pairs;
}

SessionStats session_stats(const Session& session) {
    SessionStats st;
    for (const auto& a : session.actions) {
        switch (a.kind) {
            case ActionKind::Search: ++st.searches; break;
            case ActionKind::View: ++st.views; break;
            case ActionKind::Purchase: ++st.purchases; break;
        }
    }
    return st;
}

std::string render_sessions(const ShoppingHistory& history, const TitleResolver& titles) {
    std::string out;
    for (std::size_t i = 0; i < history.recent_sessions.size(); ++i) {
        const auto& s = history.recent_sessions[i];
        if (i > 0) fmt::format_to(std::back_inserter(out), "{}\n", kSeparator);
        fmt::format_to(std::back_inserter(out), "{}\n{}\n", format_date(s.date), kSeparator);
        for (const auto& a : s.actions) {
            fmt::format_to(std::back_inserter(out), "<{}> {} - at {}\n", to_string(a.kind), display(a, titles),
                           format_clock(a.timestamp));
        }
    }
    return out;
}

std::string render_older_purchases(const ShoppingHistory& history, const TitleResolver& titles) {
    std::string out;
    for (const auto& a : history.older_purchases) {
        fmt::format_to(std::back_inserter(out), "<{}> {} - on {}\n", to_string(a.kind), display(a, titles),
                       format_date(date_of(a.timestamp)));
    }
    return out;
}

std::string render_history(const ShoppingHistory& history, const TitleResolver& titles) {
    std::string out = render_sessions(history, titles);
    if (!history.older_purchases.empty()) {
        out.append(kOlderHeader);
        out.push_back('\n');
        out.append(render_older_purchases(history, titles));
    }
    return out;
}

ShoppingHistory parse_rendered_history(std::string_view text) {
    ShoppingHistory h;
    bool older = false;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        const std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (line.empty() || line == kSeparator) continue;
        if (line == kOlderHeader) {
            older = true;
            continue;
        }
        if (!older && line.size() == 10 && line[4] == '-' && line[7] == '-') {
            Session s;
            s.date = parse_date(line);
            h.recent_sessions.push_back(std::move(s));
            continue;
        }
        const auto close = line.find("> ");
        if (line.empty() || line.front() != '<' || close == std::string_view::npos)
            throw ValidationError(fmt::format("rendered history line {}: unrecognised '{}'", line_no, line));
        Action a;
        a.kind = parse_action_kind(line.substr(1, close - 1));
        const auto rest = line.substr(close + 2);
        if (older) {
            const auto at = rest.rfind(" - on ");
            if (at == std::string_view::npos) throw ValidationError(fmt::format("line {}: missing date", line_no));
            a.payload = std::string(rest.substr(0, at));
            a.timestamp = midnight_of(parse_date(rest.substr(at + 6)));
            h.older_purchases.push_back(std::move(a));
        } else {
            const auto at = rest.rfind(" - at ");
            if (at == std::string_view::npos || h.recent_sessions.empty())
                throw ValidationError(fmt::format("line {}: action outside a dated session", line_no));
            const auto clock = rest.substr(at + 6);
            if (clock.size() != 5 || clock[2] != ':') throw ValidationError(fmt::format("line {}: bad clock", line_no));
            const int hh = parse_fixed_int(clock, 0, 2, "hour");
            const int mm = parse_fixed_int(clock, 3, 2, "minute");
            a.payload = std::string(rest.substr(0, at));
            a.timestamp = midnight_of(h.recent_sessions.back().date) + hh * 3600LL + mm * 60LL;
            h.recent_sessions.back().actions.push_back(std::move(a));
        }
    }
    return h;
}

}  // namespace shopsim
