// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/llm_gateway.hpp"
#include "shopsim/session_log.hpp"

namespace shopsim {

struct ProfileField {
    std::string value;
    std::string reasoning;

    friend bool operator==(const ProfileField&, const ProfileField&) = default;
};

struct ConsumerProfile {
    ProfileField gender;
    ProfileField age;
    ProfileField relationships;
    ProfileField education;
    ProfileField industry;
    ProfileField salary_range;
    ProfileField home_ownership;
    ProfileField parental_status;
    std::vector<std::string> interests;
    std::string analysis;

    friend bool operator==(const ConsumerProfile&, const ConsumerProfile&) = default;
};

/// JSON keys of the eight value+reasoning fields, in rendering order.
inline constexpr std::array<std::string_view, 8> kProfileFieldKeys = {
    "gender", "age", "relationships", "education", "industry", "salary_range", "home_ownership", "parental_status"};

struct ShoppingPreferences {
    std::string persona_text;
    std::string inner_monologue;

    friend bool operator==(const ShoppingPreferences&, const ShoppingPreferences&) = default;
};

/// Which persona blocks reach the prompt. Used for conditioning ablations.
enum class PersonaView { Full, ProfileOnly, PreferencesOnly, HistoryOnly, None };

std::string_view to_string(PersonaView view);
PersonaView parse_persona_view(std::string_view text);

struct Persona {
    ConsumerProfile profile;
    ShoppingPreferences preferences;
    std::string rendered_history;
    std::string reasoning;  // analysis, then inner monologue
    bool baseline = false;  // empty persona: the agent gets no description

    /// The empty persona used for no-persona runs.
    static Persona empty_baseline();

    /// Blocks in fixed order: "Profile:", "Shopping Preferences:", "Shopping History:", "Reasoning:".
    [[nodiscard]] std::string text(PersonaView view = PersonaView::Full) const;

    friend bool operator==(const Persona&, const Persona&) = default;
};

std::string render_profile(const ConsumerProfile& profile);

nlohmann::json profile_to_json(const ConsumerProfile& profile);
/// Accepts field keys in snake_case or title case ("Salary range"), field
/// values as {value, reasoning|reason} objects or bare strings, and interests
/// as a list or {value: [...]}. Throws ValidationError naming the first problem.
ConsumerProfile profile_from_json(const nlohmann::json& j, const std::vector<std::string>& valid_interests);

nlohmann::json persona_to_json(const Persona& persona);
Persona persona_from_json(const nlohmann::json& j);

/// One interest per line; blank lines and '#' comments ignored.
std::vector<std::string> load_valid_interests(const std::filesystem::path& path);

struct MiningOptions {
    GenerationConfig generation;  // temperature 0 by default
    TitleResolver titles;         // renders product ids as titles in prompts
};

ConsumerProfile mine_consumer_profile(const ShoppingHistory& history, const std::vector<std::string>& valid_interests,
                                      ChatGateway& gateway, const MiningOptions& options = {});

ShoppingPreferences mine_shopping_preferences(const ConsumerProfile& profile, const ShoppingHistory& history,
                                              ChatGateway& gateway, const MiningOptions& options = {});

/// Strips any occurrence of the customer id from model-written text.
Persona assemble_persona(const ConsumerProfile& profile, const ShoppingPreferences& preferences,
                         const ShoppingHistory& history, const TitleResolver& titles = {});

/// Both mining steps plus assembly.
Persona mine_persona(const ShoppingHistory& history, const std::vector<std::string>& valid_interests,
                     ChatGateway& gateway, const MiningOptions& options = {});

/// personas/<customer_id>.json
void save_persona(const Persona& persona, const std::string& customer_id, const std::filesystem::path& dir);
Persona load_persona(const std::filesystem::path& file);
/// customer id -> persona for every *.json in dir, sorted by id.
std::vector<std::pair<std::string, Persona>> load_persona_dir(const std::filesystem::path& dir);

}  // namespace shopsim
