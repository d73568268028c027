// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/llm_gateway.hpp"

namespace shopsim {

/// Removes a surrounding ``` / ```json fence if the text contains one.
std::string strip_code_fences(std::string_view text);

/// The first balanced {...} in the text, honouring string literals and escapes.
std::optional<std::string> extract_first_object(std::string_view text);

/// strip fences -> extract first balanced object -> parse. nullopt if any step fails.
std::optional<nlohmann::json> repair_json_object(std::string_view text);

struct RepairFailure {
    std::string problem;
    std::string raw;  // last completion received
};

/// Builds the follow-up turn that asks the model to fix its answer.
ChatMessage repair_request(std::string_view problem);

/// Asks for a JSON answer and runs `parse` on the repaired object. If either
/// the repair or `parse` (by throwing) rejects the answer, the model is
/// re-prompted once with the problem; a second rejection is returned as a
/// RepairFailure. Backend errors propagate.
template <class Parse>
auto ask_json_with_repair(ChatGateway& gateway, std::vector<ChatMessage> messages, const GenerationConfig& config,
                          Parse&& parse) -> std::variant<std::invoke_result_t<Parse&, const nlohmann::json&>, RepairFailure> {
    RepairFailure failure;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt > 0) {
            messages.push_back(ChatMessage::assistant(failure.raw));
            messages.push_back(repair_request(failure.problem));
        }
        failure.raw = gateway.complete(messages, config);
        const auto object = repair_json_object(failure.raw);
        if (!object) {
            failure.problem = "the answer does not contain a parseable JSON object";
            continue;
        }
        try {
            return parse(*object);
        } catch (const std::exception& e) {
            failure.problem = e.what();
        }
    }
    return failure;
}

}  // namespace shopsim
