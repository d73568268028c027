// SPDX-License-Identifier: Apache-2.0
#include "shopsim/shopper_agent.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/json_repair.hpp"
#include "shopsim/prompts.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

ToolCall make_tool_call(std::string_view name, json arguments) {
    return ToolCall{{}, std::string(name), std::move(arguments)};
}

// --- scripted -----------------------------------------------------------------

ScriptedPolicy::ScriptedPolicy(std::vector<ToolCall> script) : script_(std::move(script)) {}

void ScriptedPolicy::begin_session(std::uint64_t) { next_ = 0; }

ToolCall ScriptedPolicy::next_action(const Observation&) {
    if (next_ < script_.size()) return script_[next_++];
    return make_tool_call(tool_names::kTerminate);
}

std::vector<ToolCall> replay_script(const Session& session) {
    std::vector<ToolCall> script;
    for (const auto& a : session.actions) {
        switch (a.kind) {
            case ActionKind::Search:
                script.push_back(make_tool_call(tool_names::kSearch, {{"query", a.payload}}));
                break;
            case ActionKind::View:
                script.push_back(make_tool_call(tool_names::kProductInfo, {{"product_id", a.payload}}));
                break;
            case ActionKind::Purchase:
                script.push_back(make_tool_call(tool_names::kCart, {{"action", "add"}, {"product_id", a.payload}}));
                script.push_back(make_tool_call(tool_names::kCart, {{"action", "purchase"}}));
                break;
        }
    }
    return script;
}

// --- parametric ---------------------------------------------------------------

void ParametricParams::validate() const {
    if (tokenize(target_query).empty()) throw ValidationError("parametric policy needs a target query");
    if (price_ceiling.cents() < 0) throw ValidationError("price ceiling must be non-negative");
    if (!(purchase_probability_bias >= 0.0 && purchase_probability_bias <= 1.0))
        throw ValidationError("purchase_probability_bias must lie in [0, 1]");
}

ParametricPolicy::ParametricPolicy(ParametricParams params) : params_(std::move(params)) { params_.validate(); }

void ParametricPolicy::begin_session(std::uint64_t seed) {
    rng_ = Rng(seed);
    phase_ = Phase::Search;
}

ToolCall ParametricPolicy::next_action(const Observation& obs) {
    const auto terminate = [&] {
        phase_ = Phase::Done;
        return make_tool_call(tool_names::kTerminate);
    };
    switch (phase_) {
        case Phase::Search:
            phase_ = Phase::View;
            return make_tool_call(tool_names::kSearch, {{"query", params_.target_query}});
        case Phase::View:
            if (obs.error || obs.hits.empty()) return terminate();
            phase_ = Phase::Decide;
            return make_tool_call(tool_names::kProductInfo, {{"product_id", obs.hits.front().id}});
        case Phase::Decide: {
            if (obs.error || !obs.product) return terminate();
            // Always draw so the random stream does not depend on the price.
            const bool willing = rng_.bernoulli(params_.purchase_probability_bias);
            if (obs.product->price > params_.price_ceiling || !willing) return terminate();
            phase_ = Phase::Purchase;
            return make_tool_call(tool_names::kCart, {{"action", "add"}, {"product_id", obs.product->id}});
        }
        case Phase::Purchase:
            if (obs.error) return terminate();
            phase_ = Phase::Done;
            return make_tool_call(tool_names::kCart, {{"action", "purchase"}});
        case Phase::Done:
            break;
    }
    return terminate();
}

// --- LLM ------------------------------------------------------------------------

std::string session_system_prompt(const Persona& persona, PersonaView view) {
    const std::string text = persona.text(view);
    std::string prompt = fill_template(prompts::kShoppingSession, {{"persona", text}});
    if (trim(text).empty()) {
        const auto line = prompt.rfind("Customer description:");
        if (line != std::string::npos) prompt.erase(line);
        while (!prompt.empty() && (prompt.back() == '\n' || prompt.back() == ' ')) prompt.pop_back();
        prompt += '\n';
    }
    return prompt;
}

LlmPolicy::LlmPolicy(ChatGateway& gateway, Persona persona, LlmPolicyOptions options)
    : gateway_(gateway), persona_(std::move(persona)), options_(std::move(options)) {}

void LlmPolicy::begin_session(std::uint64_t seed) {
    config_ = options_.generation;
    config_.seed = seed;
    call_counter_ = 0;
    pending_.reset();
    messages_.clear();
    messages_.push_back(ChatMessage::system(session_system_prompt(persona_, options_.view)));
    std::string opening = "Start the shopping session.";
    if (!options_.shopping_intention.empty()) opening += " " + options_.shopping_intention;
    messages_.push_back(ChatMessage::user(std::move(opening)));
}

ToolCall LlmPolicy::next_action(const Observation& obs) {
    if (pending_) {
        ChatMessage result{Role::Tool, obs.text, {}, pending_->id};
        messages_.push_back(std::move(result));
        pending_.reset();
    }
    auto turn = gateway_.complete_with_tools(messages_, retail_tools(), config_);
    if (auto* text = std::get_if<std::string>(&turn)) {
        messages_.push_back(ChatMessage::assistant(*text));
        return make_tool_call(tool_names::kTerminate);
    }
    ToolCall call = std::get<ToolCall>(std::move(turn));
    ++call_counter_;
    if (call.id.empty()) call.id = fmt::format("call_{}", call_counter_);
    if (!call.arguments.is_object())
        throw ProtocolViolation(fmt::format("arguments of tool '{}' are not an object", call.name));
    ChatMessage assistant{Role::Assistant, {}, call, {}};
    messages_.push_back(std::move(assistant));
    if (call.name != tool_names::kTerminate) pending_ = call;
    return call;
}

// --- task prompts -------------------------------------------------------------

std::string build_query_generation_prompt(const std::string& persona_text,
                                          const std::vector<std::vector<std::string>>& session_titles) {
    std::string sessions;
    for (std::size_t i = 0; i < session_titles.size(); ++i) {
        fmt::format_to(std::back_inserter(sessions), "\nsession_{}:", i + 1);
        for (const auto& t : session_titles[i]) fmt::format_to(std::back_inserter(sessions), "\n- {}", t);
    }
    sessions += '\n';
    return fill_template(prompts::kQueryGeneration, {{"persona", persona_text},
                                                     {"sessions", sessions},
                                                     {"example_output", std::string(prompts::kQueryGenerationExample)}});
}

std::string build_item_selection_individual_prompt(const std::string& background,
                                                   const std::vector<std::string>& titles) {
    std::string items;
    for (const auto& t : titles) fmt::format_to(std::back_inserter(items), "- {}\n", t);
    if (!items.empty()) items.pop_back();
    return fill_template(prompts::kItemSelectionIndividual,
                         {{"background", background},
                          {"items", items},
                          {"example_output", std::string(prompts::kItemSelectionIndividualExample)}});
}

std::string build_item_selection_group_prompt(const std::string& persona_text, const std::vector<const Product*>& items) {
    std::string list;
    for (std::size_t i = 0; i < items.size(); ++i)
        fmt::format_to(std::back_inserter(list), "[{}] {} | {}\n", i, items[i]->title, items[i]->price.str());
    if (!list.empty()) list.pop_back();
    return fill_template(prompts::kItemSelectionGroup,
                         {{"persona", persona_text},
                          {"items", list},
                          {"example_output", std::string(prompts::kItemSelectionGroupExample)}});
}

std::vector<std::string> parse_query_map(const json& j, std::size_t n_sessions) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= n_sessions; ++i) {
        const auto key = fmt::format("session_{}", i);
        if (!j.contains(key)) throw ValidationError(fmt::format("missing key '{}'", key));
        const auto& v = j.at(key);
        if (!v.is_string() || trim(v.get<std::string>()).empty())
            throw ValidationError(fmt::format("'{}' must be a non-empty string", key));
        out.push_back(trim(v.get<std::string>()));
    }
    return out;
}

std::size_t parse_index_answer(const json& j, std::size_t n_items) {
    if (!j.contains("output")) throw ValidationError("missing key 'output'");
    const auto& v = j.at("output");
    if (!v.is_number_integer()) throw ValidationError("'output' must be an integer");
    const auto k = v.get<std::int64_t>();
    if (k < 0 || static_cast<std::size_t>(k) >= n_items)
        throw ValidationError(fmt::format("'output' = {} is outside 0..{}", k, n_items - 1));
    return static_cast<std::size_t>(k);
}

std::size_t parse_title_answer(const json& j, const std::vector<std::string>& titles) {
    if (!j.contains("title") || !j.at("title").is_string()) throw ValidationError("missing string key 'title'");
    const auto wanted = join(tokenize(j.at("title").get<std::string>()), " ");
    if (wanted.empty()) throw ValidationError("'title' is empty");
    for (std::size_t i = 0; i < titles.size(); ++i) {
        if (join(tokenize(titles[i]), " ") == wanted) return i;
    }
    throw ValidationError(fmt::format("title '{}' is not one of the listed items", j.at("title").get<std::string>()));
}

namespace {

// Only an unparseable reply earns the repair re-prompt. A well-formed answer
// that breaks the task rules is final, so bad choices are never resampled.
template <class Parse>
auto ask_task(ChatGateway& gateway, const std::string& prompt, const GenerationConfig& config, Parse&& parse) {
    auto result = ask_json_with_repair(gateway, {ChatMessage::user(prompt)}, config, [](const json& j) { return j; });
    if (auto* failure = std::get_if<RepairFailure>(&result))
        throw TaskAnswerFailed(fmt::format("unusable task answer: {}", failure->problem), failure->raw);
    const auto& answer = std::get<json>(result);
    try {
        return parse(answer);
    } catch (const ValidationError& e) {
        throw TaskAnswerFailed(fmt::format("invalid task answer: {}", e.what()), answer.dump());
    }
}

}  // namespace

std::vector<std::string> answer_query_generation(ChatGateway& gateway, const std::string& prompt, std::size_t n_sessions,
                                                 const GenerationConfig& config) {
    return ask_task(gateway, prompt, config, [&](const json& j) { return parse_query_map(j, n_sessions); });
}

std::size_t answer_index_choice(ChatGateway& gateway, const std::string& prompt, std::size_t n_items,
                                const GenerationConfig& config) {
    return ask_task(gateway, prompt, config, [&](const json& j) { return parse_index_answer(j, n_items); });
}

std::size_t answer_title_choice(ChatGateway& gateway, const std::string& prompt, const std::vector<std::string>& titles,
                                const GenerationConfig& config) {
    return ask_task(gateway, prompt, config, [&](const json& j) { return parse_title_answer(j, titles); });
}

}  // namespace shopsim
