// SPDX-License-Identifier: Apache-2.0
// Deterministic stand-in model. Each prompt family is recognised by a marker
// string from its template; anything unrecognised gets a plain acknowledgement.
#include <algorithm>
#include <cstdlib>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "shopsim/llm_gateway.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

std::string between(std::string_view text, std::string_view open, std::string_view close) {
    // Instructions may mention a tag before the tagged block, so the block is
    // the last opening tag before the first closing one.
    const auto b = text.find(close);
    const auto a = b == std::string_view::npos ? text.find(open) : text.rfind(open, b);
    if (a == std::string_view::npos) return {};
    const auto start = a + open.size();
    return std::string(text.substr(start, b == std::string_view::npos ? std::string_view::npos : b - start));
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        out.push_back(trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos)));
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::uint64_t hash_of(std::uint64_t seed, std::string_view text) { return mix64(fnv1a64(text, seed ^ 0x9e3779b97f4a7c15ULL)); }

template <class T>
const T& pick(const std::vector<T>& options, std::uint64_t h) {
    return options[h % options.size()];
}

std::size_t overlap(const std::set<std::string>& bag, std::string_view text) {
    std::size_t n = 0;
    for (const auto& t : tokenize(text)) n += bag.count(t);
    return n;
}

std::set<std::string> token_set(std::string_view text) {
    const auto toks = tokenize(text);
    return {toks.begin(), toks.end()};
}

/// "Interests: Hiking, Reading" line of a rendered persona.
std::vector<std::string> persona_interests(std::string_view persona) {
    for (const auto& line : lines_of(persona)) {
        if (line.rfind("Interests:", 0) == 0) {
            std::vector<std::string> out;
            std::string rest = line.substr(10);
            std::size_t pos = 0;
            while (pos < rest.size()) {
                const auto comma = rest.find(',', pos);
                auto item = trim(std::string_view(rest).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
                if (!item.empty()) out.push_back(std::move(item));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            return out;
        }
    }
    return {};
}

/// Spending limit implied by the persona's wording.
double budget_for(std::string_view persona) {
    const auto lower = to_lower(persona);
    if (lower.empty()) return 50.0;
    if (lower.find("budget-conscious") != std::string::npos) return 30.0;
    if (lower.find("premium") != std::string::npos) return 250.0;
    return 80.0;
}

ChatReply text_reply(std::string text) { return ChatReply{std::move(text), {}}; }

// --- persona mining ----------------------------------------------------------------

ChatReply answer_profile(std::uint64_t seed, std::string_view prompt) {
    std::vector<std::string> valid;
    for (const auto& part : lines_of(between(prompt, "<valid_interests>", "</valid_interests>"))) {
        std::size_t pos = 0;
        while (pos < part.size()) {
            const auto comma = part.find(',', pos);
            auto item = trim(std::string_view(part).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (!item.empty()) valid.push_back(std::move(item));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    const std::string history = between(prompt, "<user_data>", "</user_data>");
    const auto h = hash_of(seed, history);
    const auto words = token_set(history);

    std::vector<std::pair<std::size_t, std::string>> scored;
    for (const auto& interest : valid) {
        const auto hits = overlap(words, interest);
        if (hits > 0) scored.emplace_back(hits, interest);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> interests;
    for (std::size_t i = 0; i < scored.size() && i < 3; ++i) interests.push_back(scored[i].second);
    if (interests.empty() && !valid.empty()) interests.push_back(pick(valid, h));

    const auto field = [&](const std::vector<std::string>& options, std::uint64_t salt) {
        return json{{"value", pick(options, mix64(h + salt))}, {"reasoning", "Inferred from the items in the history."}};
    };
    json profile{
        {"gender", field({"Female", "Male"}, 1)},
        {"age", field({"18-29", "30-45", "46-60", "60+"}, 2)},
        {"relationships", field({"Single", "Married", "In a relationship"}, 3)},
        {"education", field({"High school", "Bachelor's degree", "Master's degree"}, 4)},
        {"industry", field({"Healthcare", "Education", "Technology", "Retail", "Construction"}, 5)},
        {"salary_range", field({"$25,000-$50,000", "$50,000-$75,000", "$75,000-$120,000", "$120,000+"}, 6)},
        {"home_ownership", field({"Renter", "Homeowner"}, 7)},
        {"parental_status", field({"No children", "Parent"}, 8)},
        {"interests", interests},
    };
    json out{{"analysis", fmt::format("The history centres on {}.", join(interests, ", "))}, {"consumer_profile", profile}};
    return text_reply("Here is the consumer profile.\n```json\n" + out.dump(2) + "\n```");
}

ChatReply answer_preferences(std::uint64_t seed, std::string_view prompt) {
    const std::string profile_text = between(prompt, "<consumer_profile>", "</consumer_profile>");
    json profile = json::parse(trim(profile_text), nullptr, false);
    std::string salary;
    std::vector<std::string> interests;
    if (profile.is_object()) {
        const json& cp = profile.contains("consumer_profile") ? profile.at("consumer_profile") : profile;
        if (cp.contains("salary_range") && cp.at("salary_range").is_object())
            salary = cp.at("salary_range").value("value", std::string{});
        if (cp.contains("interests") && cp.at("interests").is_array())
            for (const auto& i : cp.at("interests"))
                if (i.is_string()) interests.push_back(i.get<std::string>());
    }
    std::string style = "value-seeking";
    if (salary.find("25,000") != std::string::npos) style = "budget-conscious";
    if (salary.find("120,000") != std::string::npos) style = "premium";
    const auto h = hash_of(seed, profile_text);
    const std::vector<std::string> first_factor = {"reviews", "quality", "price", "brand reputation"};
    json out{{"inner_monologue", fmt::format("Salary {} suggests a {} approach; the history is mostly {}.",
                                             salary.empty() ? "unknown" : salary, style, join(interests, " and "))},
             {"persona", fmt::format("A {} shopper focused on {}. They weigh {} first, compare a few options, "
                                     "and read reviews before committing.",
                                     style, interests.empty() ? std::string("everyday items") : join(interests, ", "),
                                     pick(first_factor, h))}};
    return text_reply(out.dump());
}

// --- task prompts -------------------------------------------------------------------

ChatReply answer_queries(std::string_view prompt) {
    const std::string persona = between(prompt, "<persona>", "</persona>");
    const bool has_persona = !trim(persona).empty();
    json out = json::object();
    std::string current;
    for (const auto& line : lines_of(between(prompt, "<sessions>", "</sessions>"))) {
        if (line.rfind("session_", 0) == 0 && !line.empty() && line.back() == ':') {
            current = line.substr(0, line.size() - 1);
        } else if (!current.empty() && line.rfind("- ", 0) == 0 && !out.contains(current)) {
            auto toks = tokenize(line.substr(2));
            toks.resize(std::min<std::size_t>(toks.size(), has_persona ? 3 : 1));
            out[current] = toks.empty() ? std::string("shopping") : join(toks, " ") + (has_persona ? "" : " deals");
        }
    }
    return text_reply(out.dump());
}

ChatReply answer_title_choice(std::uint64_t seed, std::string_view prompt) {
    const auto background = token_set(between(prompt, "<background>", "</background>"));
    std::vector<std::string> titles;
    for (const auto& line : lines_of(between(prompt, "<items>", "</items>")))
        if (line.rfind("- ", 0) == 0) titles.push_back(line.substr(2));
    if (titles.empty()) return text_reply("{}");
    const auto h = hash_of(seed, prompt);
    std::size_t best = h % titles.size();
    std::size_t best_score = 0;
    for (std::size_t i = 0; i < titles.size(); ++i) {
        const auto s = overlap(background, titles[i]);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return text_reply(json{{"title", titles[best]}, {"reason", "Closest to the background; moderately picky."}}.dump());
}

ChatReply answer_index_choice(std::string_view prompt) {
    const auto persona = token_set(between(prompt, "<persona>", "</persona>"));
    std::size_t n = 0;
    std::size_t best = 0;
    std::size_t best_score = 0;
    for (const auto& line : lines_of(between(prompt, "<items>", "</items>"))) {
        if (line.empty() || line.front() != '[') continue;
        const auto s = overlap(persona, line.substr(line.find(']') + 1));
        if (s > best_score) {
            best_score = s;
            best = n;
        }
        ++n;
    }
    return text_reply(json{{"output", best}}.dump());
}

// --- shopping sessions ---------------------------------------------------------------

struct Hit {
    std::string id;
    double price = 0.0;
};

std::vector<Hit> parse_hits(std::string_view text) {
    std::vector<Hit> out;
    for (const auto& line : lines_of(text)) {
        if (line.empty() || line.front() != '[') continue;
        const auto close = line.find(']');
        const auto bar1 = line.find(" | ", close);
        const auto bar_last = line.rfind(" | ");
        if (close == std::string::npos || bar1 == std::string::npos) continue;
        Hit h;
        h.id = trim(line.substr(close + 1, bar1 - close - 1));
        const auto dollar = line.find('$', bar_last);
        if (dollar != std::string::npos) h.price = std::atof(line.c_str() + dollar + 1);
        out.push_back(std::move(h));
    }
    return out;
}

ChatReply tool_reply(std::string name, json args, std::size_t n) {
    return ChatReply{{}, {ToolCall{fmt::format("call_{}", n), std::move(name), std::move(args)}}};
}

ChatReply answer_session(std::uint64_t seed, const ChatRequest& req) {
    std::string persona;
    for (const auto& m : req.messages) {
        if (m.role == Role::System) persona = between(m.content, "Customer description:", "\x01");
    }
    persona = trim(persona);
    const std::uint64_t session_seed = mix64(seed ^ req.config.seed.value_or(0));
    const auto h = hash_of(session_seed, persona);

    std::vector<std::string> viewed;
    std::vector<Hit> last_hits;
    std::string last_query;
    int searches = 0;
    int consecutive_empty = 0;
    std::size_t calls = 0;
    bool cart_nonempty = false;
    for (const auto& m : req.messages) {
        if (m.role == Role::Assistant && m.tool_call) {
            ++calls;
            const auto& c = *m.tool_call;
            if (c.name == "search_tool") {
                ++searches;
                last_query = c.arguments.value("query", std::string{});
            } else if (c.name == "get_product_info_tool") {
                viewed.push_back(c.arguments.value("product_id", std::string{}));
            } else if (c.name == "cart_tool") {
                const auto action = c.arguments.value("action", std::string{});
                if (action == "add") cart_nonempty = true;
                if (action == "purchase") cart_nonempty = false;
            }
        }
        if (m.role == Role::Tool) {
            if (m.content.rfind("Search results", 0) == 0) {
                last_hits = parse_hits(m.content);
                consecutive_empty = 0;
            } else if (m.content.rfind("no results", 0) == 0) {
                ++consecutive_empty;
            }
        }
    }
    const auto next = calls + 1;
    const auto& last = req.messages.back();
    const int view_budget = 1 + static_cast<int>(h % 3);

    const auto view_next = [&]() -> std::optional<ChatReply> {
        if (static_cast<int>(viewed.size()) >= view_budget) return std::nullopt;
        for (const auto& hit : last_hits) {
            if (std::find(viewed.begin(), viewed.end(), hit.id) == viewed.end())
                return tool_reply("get_product_info_tool", {{"product_id", hit.id}}, next);
        }
        return std::nullopt;
    };
    const auto wrap_up = [&]() {
        if (cart_nonempty) return tool_reply("cart_tool", {{"action", "purchase"}}, next);
        return tool_reply("terminate_session", json::object(), next);
    };

    if (last.role != Role::Tool) {
        const auto interests = persona_interests(persona);
        std::string query;
        if (!interests.empty()) {
            query = to_lower(pick(interests, h));
        } else if (!persona.empty()) {
            auto toks = tokenize(persona);
            query = toks.empty() ? "gift" : toks[h % toks.size()];
        } else {
            query = pick(std::vector<std::string>{"gift", "kitchen", "outdoor", "home", "book"}, h);
        }
        return tool_reply("search_tool", {{"query", query}}, next);
    }

    const std::string& result = last.content;
    if (result.rfind("no results", 0) == 0) {
        auto toks = tokenize(last_query);
        if (consecutive_empty >= 3 || toks.size() <= 1 || searches >= 3) return wrap_up();
        toks.pop_back();
        return tool_reply("search_tool", {{"query", join(toks, " ")}}, next);
    }
    if (result.rfind("Search results", 0) == 0) {
        if (auto v = view_next()) return *v;
        return wrap_up();
    }
    if (result.rfind("Product ", 0) == 0) {
        const auto price_line = between(result, "Price: $", "\n");
        const double price = std::atof(price_line.c_str());
        const auto id = viewed.empty() ? std::string{} : viewed.back();
        const bool likes = (hash_of(session_seed, id) % 100) < 60;
        if (!cart_nonempty && price <= budget_for(persona) && likes)
            return tool_reply("cart_tool", {{"action", "add"}, {"product_id", id}}, next);
        if (auto v = view_next()) return *v;
        return wrap_up();
    }
    if (result.rfind("Cart has", 0) == 0) return tool_reply("cart_tool", {{"action", "purchase"}}, next);
    return tool_reply("terminate_session", json::object(), next);
}

}  // namespace

MockBackend::Responder heuristic_responder(std::uint64_t seed) {
    return [seed](const ChatRequest& req) -> ChatReply {
        if (!req.tools.empty()) return answer_session(seed, req);
        std::string prompt;
        for (const auto& m : req.messages) {
            if (m.role == Role::User) {
                prompt = m.content;
                break;
            }
        }
        if (prompt.find("<valid_interests>") != std::string::npos) return answer_profile(seed, prompt);
        if (prompt.find("<consumer_profile>") != std::string::npos) return answer_preferences(seed, prompt);
        if (prompt.find("<sessions>") != std::string::npos) return answer_queries(prompt);
        if (prompt.find("\"title\" (the product title)") != std::string::npos) return answer_title_choice(seed, prompt);
        if (prompt.find("containing one key: \"output\"") != std::string::npos) return answer_index_choice(prompt);
        return text_reply("{}");
    };
}

}  // namespace shopsim
