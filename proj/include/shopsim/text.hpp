// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace shopsim {

/// Lowercases ASCII letters and splits on every ASCII byte that is not a letter
/// or digit. Bytes >= 0x80 are kept inside tokens so UTF-8 words stay whole.
/// No stemming.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// 64-bit FNV-1a. Stable across platforms; used for seeding and hashing tokens.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

/// Replaces every "{name}" for each name in slots. Unknown braces are left alone,
/// which matters for templates that embed literal JSON.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& slots);

}  // namespace shopsim
