// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/catalog.hpp"
#include "shopsim/llm_gateway.hpp"
#include "shopsim/money.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/retail_env.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/session_log.hpp"

namespace shopsim {

ToolCall make_tool_call(std::string_view name, nlohmann::json arguments = nlohmann::json::object());

/// Replays a fixed list of tool calls, then terminates.
class ScriptedPolicy : public AgentPolicy {
  public:
    explicit ScriptedPolicy(std::vector<ToolCall> script);

    void begin_session(std::uint64_t seed) override;
    ToolCall next_action(const Observation& observation) override;

  private:
    std::vector<ToolCall> script_;
    std::size_t next_ = 0;
};

/// Tool calls reproducing a logged human session: SEARCH -> search,
/// VIEW -> product info, PURCHASE -> cart add then purchase.
std::vector<ToolCall> replay_script(const Session& session);

struct ParametricParams {
    std::string target_query;
    Money price_ceiling;
    double purchase_probability_bias = 1.0;  // chance of buying an affordable item

    void validate() const;
};

/// Searches the target query, views the top hit, and buys it when its price
/// is at or under the ceiling (with probability `purchase_probability_bias`).
class ParametricPolicy : public AgentPolicy {
  public:
    explicit ParametricPolicy(ParametricParams params);

    void begin_session(std::uint64_t seed) override;
    ToolCall next_action(const Observation& observation) override;

  private:
    enum class Phase { Search, View, Decide, Purchase, Done };

    ParametricParams params_;
    Rng rng_{0};
    Phase phase_ = Phase::Search;
};

struct LlmPolicyOptions {
    GenerationConfig generation;
    PersonaView view = PersonaView::Full;
    /// Appended to the opening user turn; empty by default.
    std::string shopping_intention;
};

/// Session system prompt. The customer description line is left out when the
/// persona text is empty.
std::string session_system_prompt(const Persona& persona, PersonaView view = PersonaView::Full);

/// Drives a session through the chat gateway. A reply without a tool call
/// ends the session as if terminate_session had been called.
class LlmPolicy : public AgentPolicy {
  public:
    LlmPolicy(ChatGateway& gateway, Persona persona, LlmPolicyOptions options = {});

    void begin_session(std::uint64_t seed) override;
    ToolCall next_action(const Observation& observation) override;

    [[nodiscard]] const std::vector<ChatMessage>& messages() const noexcept { return messages_; }

  private:
    ChatGateway& gateway_;
    Persona persona_;
    LlmPolicyOptions options_;
    GenerationConfig config_;
    std::vector<ChatMessage> messages_;
    std::optional<ToolCall> pending_;
    int call_counter_ = 0;
};

// --- single-shot task prompts ------------------------------------------------

/// Session blocks for the query-generation prompt: one list of viewed titles per session.
std::string build_query_generation_prompt(const std::string& persona_text,
                                          const std::vector<std::vector<std::string>>& session_titles);
/// Items are listed by title only.
std::string build_item_selection_individual_prompt(const std::string& background,
                                                   const std::vector<std::string>& titles);
/// Items are listed as "[i] title | $price".
std::string build_item_selection_group_prompt(const std::string& persona_text, const std::vector<const Product*>& items);

/// Keys "session_1".."session_n", each a non-empty string. Throws ValidationError otherwise.
std::vector<std::string> parse_query_map(const nlohmann::json& j, std::size_t n_sessions);
/// {"output": k} with k an integer in [0, n_items). Throws ValidationError otherwise.
std::size_t parse_index_answer(const nlohmann::json& j, std::size_t n_items);
/// {"title", "reason"}; the title must name one of `titles` (case and
/// punctuation insensitive). Returns its index. Throws ValidationError otherwise.
std::size_t parse_title_answer(const nlohmann::json& j, const std::vector<std::string>& titles);

/// Sends one task prompt and parses the JSON answer, with one repair
/// re-prompt. Throws TaskAnswerFailed when the answer stays unusable.
std::vector<std::string> answer_query_generation(ChatGateway& gateway, const std::string& prompt, std::size_t n_sessions,
                                                 const GenerationConfig& config = {});
std::size_t answer_index_choice(ChatGateway& gateway, const std::string& prompt, std::size_t n_items,
                                const GenerationConfig& config = {});
std::size_t answer_title_choice(ChatGateway& gateway, const std::string& prompt, const std::vector<std::string>& titles,
                                const GenerationConfig& config = {});

}  // namespace shopsim
