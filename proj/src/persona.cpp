// SPDX-License-Identifier: Apache-2.0
#include "shopsim/persona.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/json_repair.hpp"
#include "shopsim/prompts.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kProfileLabels = {
    "Gender", "Age Group", "Relationship", "Education", "Industry", "Salary Range", "Home Ownership", "Parental Status"};

std::array<const ProfileField*, 8> fields_of(const ConsumerProfile& p) {
    return {&p.gender, &p.age, &p.relationships, &p.education, &p.industry, &p.salary_range, &p.home_ownership,
            &p.parental_status};
}

std::array<ProfileField*, 8> fields_of(ConsumerProfile& p) {
    return {&p.gender, &p.age, &p.relationships, &p.education, &p.industry, &p.salary_range, &p.home_ownership,
            &p.parental_status};
}

/// "Salary range" / "salary-range" / "SalaryRange"-ish keys -> "salary_range".
std::string normalize_key(std::string_view key) {
    std::string out;
    for (const auto& tok : tokenize(key)) {
        if (!out.empty()) out.push_back('_');
        out += tok;
    }
    return out;
}

const json* find_key(const json& obj, std::string_view wanted) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (normalize_key(it.key()) == wanted) return &it.value();
    }
    return nullptr;
}

std::string scalar_text(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_null()) return {};
    return j.dump();
}

ProfileField parse_field(const json& j) {
    if (j.is_object()) {
        ProfileField f;
        if (const auto* v = find_key(j, "value")) f.value = scalar_text(*v);
        if (const auto* r = find_key(j, "reasoning")) {
            f.reasoning = scalar_text(*r);
        } else if (const auto* r2 = find_key(j, "reason")) {
            f.reasoning = scalar_text(*r2);
        }
        return f;
    }
    return ProfileField{scalar_text(j), {}};
}

std::string replace_all(std::string text, std::string_view needle, std::string_view with) {
    if (needle.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), with);
        pos += with.size();
    }
    return text;
}

std::string sanitize_file_stem(const std::string& id) {
    if (id.empty() || id == "." || id == ".." ||
        id.find_first_of("/\\") != std::string::npos || id.find('\0') != std::string::npos)
        throw ValidationError(fmt::format("customer id '{}' cannot be used as a file name", id));
    return id;
}

}  // namespace

std::string_view to_string(PersonaView view) {
    switch (view) {
        case PersonaView::Full: return "persona";
        case PersonaView::ProfileOnly: return "profile";
        case PersonaView::PreferencesOnly: return "preferences";
        case PersonaView::HistoryOnly: return "history";
        case PersonaView::None: return "base";
    }
    return "?";
}

PersonaView parse_persona_view(std::string_view text) {
    for (auto v : {PersonaView::Full, PersonaView::ProfileOnly, PersonaView::PreferencesOnly, PersonaView::HistoryOnly,
                   PersonaView::None}) {
        if (to_string(v) == text) return v;
    }
    throw ValidationError(fmt::format("unknown persona view '{}'", text));
}

Persona Persona::empty_baseline() {
    Persona p;
    p.baseline = true;
    return p;
}

std::string render_profile(const ConsumerProfile& profile) {
    std::string out = "Profile:\n";
    const auto fields = fields_of(profile);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        fmt::format_to(std::back_inserter(out), "{}: {}\n", kProfileLabels[i], fields[i]->value);
        if (!fields[i]->reasoning.empty()) fmt::format_to(std::back_inserter(out), "- Reason: {}\n", fields[i]->reasoning);
    }
    fmt::format_to(std::back_inserter(out), "Interests: {}\n", join(profile.interests, ", "));
    return out;
}

std::string Persona::text(PersonaView view) const {
    if (baseline || view == PersonaView::None) return {};
    std::string out;
    if (view == PersonaView::Full || view == PersonaView::ProfileOnly) out += render_profile(profile);
    if (view == PersonaView::Full || view == PersonaView::PreferencesOnly)
        out += "Shopping Preferences:\n" + preferences.persona_text + "\n";
    if (view == PersonaView::Full || view == PersonaView::HistoryOnly) out += "Shopping History:\n" + rendered_history;
    if (view == PersonaView::Full && !reasoning.empty()) out += "Reasoning:\n" + reasoning + "\n";
    return out;
}

json profile_to_json(const ConsumerProfile& profile) {
    json cp = json::object();
    const auto fields = fields_of(profile);
    for (std::size_t i = 0; i < fields.size(); ++i)
        cp[std::string(kProfileFieldKeys[i])] = {{"value", fields[i]->value}, {"reasoning", fields[i]->reasoning}};
    cp["interests"] = profile.interests;
    return json{{"analysis", profile.analysis}, {"consumer_profile", cp}};
}

ConsumerProfile profile_from_json(const json& j, const std::vector<std::string>& valid_interests) {
    if (!j.is_object()) throw ValidationError("consumer profile answer is not a JSON object");
    const json* cp = find_key(j, "consumer_profile");
    if (!cp || !cp->is_object()) throw ValidationError("missing key 'consumer_profile'");

    ConsumerProfile profile;
    if (const auto* a = find_key(j, "analysis")) profile.analysis = scalar_text(*a);

    auto fields = fields_of(profile);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const json* f = find_key(*cp, kProfileFieldKeys[i]);
        if (!f) throw ValidationError(fmt::format("consumer profile is missing field '{}'", kProfileFieldKeys[i]));
        *fields[i] = parse_field(*f);
    }

    const json* interests = find_key(*cp, "interests");
    if (!interests) throw ValidationError("consumer profile is missing field 'interests'");
    const json* list = interests;
    if (interests->is_object()) {
        list = find_key(*interests, "value");
        if (!list) throw ValidationError("field 'interests' has no value");
    }
    std::vector<std::string> raw;
    if (list->is_array()) {
        for (const auto& item : *list) raw.push_back(trim(scalar_text(item)));
    } else if (list->is_string()) {
        std::string s = list->get<std::string>();
        std::size_t start = 0;
        while (start <= s.size()) {
            const auto comma = s.find(',', start);
            raw.push_back(trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    } else {
        throw ValidationError("field 'interests' is not a list");
    }

    for (const auto& interest : raw) {
        if (interest.empty()) continue;
        const auto match = std::find_if(valid_interests.begin(), valid_interests.end(),
                                        [&](const std::string& v) { return to_lower(v) == to_lower(interest); });
        if (match == valid_interests.end())
            throw ValidationError(fmt::format("interest '{}' is not in the valid-interest list", interest));
        if (std::find(profile.interests.begin(), profile.interests.end(), *match) == profile.interests.end())
            profile.interests.push_back(*match);
    }
    return profile;
}

json persona_to_json(const Persona& p) {
    return json{{"profile", profile_to_json(p.profile)},
                {"preferences", {{"persona", p.preferences.persona_text}, {"inner_monologue", p.preferences.inner_monologue}}},
                {"rendered_history", p.rendered_history},
                {"reasoning", p.reasoning},
                {"baseline", p.baseline}};
}

Persona persona_from_json(const json& j) {
    Persona p;
    p.baseline = j.value("baseline", false);
    if (!p.baseline) {
        const auto& prof = j.at("profile");
        const auto& cp = prof.at("consumer_profile");
        p.profile.analysis = prof.value("analysis", std::string{});
        auto fields = fields_of(p.profile);
        for (std::size_t i = 0; i < fields.size(); ++i) *fields[i] = parse_field(cp.at(std::string(kProfileFieldKeys[i])));
        p.profile.interests = cp.at("interests").get<std::vector<std::string>>();
        p.preferences.persona_text = j.at("preferences").at("persona").get<std::string>();
        p.preferences.inner_monologue = j.at("preferences").value("inner_monologue", std::string{});
    }
    p.rendered_history = j.value("rendered_history", std::string{});
    p.reasoning = j.value("reasoning", std::string{});
    return p;
}

std::vector<std::string> load_valid_interests(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open interest list '{}'", path.string()));
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.push_back(std::move(t));
    }
    if (out.empty()) throw ValidationError(fmt::format("interest list '{}' is empty", path.string()));
    return out;
}

ConsumerProfile mine_consumer_profile(const ShoppingHistory& history, const std::vector<std::string>& valid_interests,
                                      ChatGateway& gateway, const MiningOptions& options) {
    if (history.empty()) throw ValidationError("cannot mine a persona from an empty history");
    if (valid_interests.empty()) throw ValidationError("valid-interest list is empty");

    const std::string prompt = fill_template(prompts::kConsumerProfile,
                                             {{"sessions", render_sessions(history, options.titles)},
                                              {"other_purchases", render_older_purchases(history, options.titles)},
                                              {"valid_interests", join(valid_interests, ", ")},
                                              {"example_output", std::string(prompts::kConsumerProfileExample)}});
    auto result = ask_json_with_repair(gateway, {ChatMessage::user(prompt)}, options.generation,
                                       [&](const json& j) { return profile_from_json(j, valid_interests); });
    if (auto* failure = std::get_if<RepairFailure>(&result))
        throw MiningFailed("consumer profile mining failed: " + failure->problem, failure->raw);
    return std::get<ConsumerProfile>(std::move(result));
}

ShoppingPreferences mine_shopping_preferences(const ConsumerProfile& profile, const ShoppingHistory& history,
                                              ChatGateway& gateway, const MiningOptions& options) {
    if (history.empty()) throw ValidationError("cannot mine a persona from an empty history");

    const std::string prompt = fill_template(prompts::kShoppingPreferences,
                                             {{"consumer_profile", profile_to_json(profile).at("consumer_profile").dump(2)},
                                              {"sessions", render_sessions(history, options.titles)},
                                              {"other_purchases", render_older_purchases(history, options.titles)}});
    auto parse = [](const json& j) {
        const auto* monologue = find_key(j, "inner_monologue");
        const auto* persona = find_key(j, "persona");
        if (!monologue) throw ValidationError("missing key 'inner_monologue'");
        if (!persona) throw ValidationError("missing key 'persona'");
        ShoppingPreferences prefs{trim(scalar_text(*persona)), scalar_text(*monologue)};
        if (prefs.persona_text.empty()) throw ValidationError("key 'persona' is empty");
        return prefs;
    };
    auto result = ask_json_with_repair(gateway, {ChatMessage::user(prompt)}, options.generation, parse);
    if (auto* failure = std::get_if<RepairFailure>(&result))
        throw MiningFailed("shopping preference mining failed: " + failure->problem, failure->raw);
    return std::get<ShoppingPreferences>(std::move(result));
}

Persona assemble_persona(const ConsumerProfile& profile, const ShoppingPreferences& preferences,
                         const ShoppingHistory& history, const TitleResolver& titles) {
    const std::string& cid = history.customer_id;
    const auto scrub = [&](std::string s) { return replace_all(std::move(s), cid, "[customer]"); };

    Persona p;
    p.profile = profile;
    for (auto* f : fields_of(p.profile)) {
        f->value = scrub(std::move(f->value));
        f->reasoning = scrub(std::move(f->reasoning));
    }
    p.profile.analysis = scrub(std::move(p.profile.analysis));
    p.preferences.persona_text = scrub(preferences.persona_text);
    p.preferences.inner_monologue = scrub(preferences.inner_monologue);
    p.rendered_history = scrub(render_history(history, titles));
    p.reasoning = p.profile.analysis;
    if (!p.reasoning.empty() && !p.preferences.inner_monologue.empty()) p.reasoning += "\n";
    p.reasoning += p.preferences.inner_monologue;
    return p;
}

Persona mine_persona(const ShoppingHistory& history, const std::vector<std::string>& valid_interests,
                     ChatGateway& gateway, const MiningOptions& options) {
    const auto profile = mine_consumer_profile(history, valid_interests, gateway, options);
    const auto prefs = mine_shopping_preferences(profile, history, gateway, options);
    return assemble_persona(profile, prefs, history, options.titles);
}

void save_persona(const Persona& persona, const std::string& customer_id, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto file = dir / (sanitize_file_stem(customer_id) + ".json");
    std::ofstream out(file);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", file.string()));
    out << persona_to_json(persona).dump(2) << '\n';
}

Persona load_persona(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ValidationError(fmt::format("cannot open persona '{}'", file.string()));
    try {
        return persona_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("persona '{}' is malformed: {}", file.string(), e.what()));
    }
}

std::vector<std::pair<std::string, Persona>> load_persona_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ValidationError(fmt::format("persona directory '{}' does not exist", dir.string()));
    std::vector<std::pair<std::string, Persona>> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        out.emplace_back(entry.path().stem().string(), load_persona(entry.path()));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace shopsim
