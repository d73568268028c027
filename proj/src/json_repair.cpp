// SPDX-License-Identifier: Apache-2.0
#include "shopsim/json_repair.hpp"

#include "shopsim/prompts.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

std::string strip_code_fences(std::string_view text) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return std::string(text);
    auto body_start = text.find('\n', open);
    if (body_start == std::string_view::npos) return std::string(text);
    ++body_start;
    const auto close = text.find("```", body_start);
    return trim(text.substr(body_start, close == std::string_view::npos ? std::string_view::npos : close - body_start));
}

std::optional<std::string> extract_first_object(std::string_view text) {
    const auto start = text.find('{');
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return std::string(text.substr(start, i - start + 1));
        }
    }
    return std::nullopt;
}

std::optional<nlohmann::json> repair_json_object(std::string_view text) {
    const auto unfenced = strip_code_fences(text);
    const auto object = extract_first_object(unfenced);
    if (!object) return std::nullopt;
    auto parsed = nlohmann::json::parse(*object, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
    return parsed;
}

ChatMessage repair_request(std::string_view problem) {
    return ChatMessage::user(fill_template(prompts::kRepairRequest, {{"problem", std::string(problem)}}));
}

}  // namespace shopsim
