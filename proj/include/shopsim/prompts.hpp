// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>

namespace shopsim::prompts {

// Slots: {sessions} {other_purchases} {valid_interests} {example_output}
extern const std::string_view kConsumerProfile;
// Slots: {consumer_profile} {sessions} {other_purchases}
extern const std::string_view kShoppingPreferences;
// Slots: {persona} {sessions} {example_output}
extern const std::string_view kQueryGeneration;
// Slots: {background} {items} {example_output}
extern const std::string_view kItemSelectionIndividual;
// Slots: {persona} {items} {example_output}
extern const std::string_view kItemSelectionGroup;
// Slots: {persona}. The final "Customer description" line is dropped for the no-persona baseline.
extern const std::string_view kShoppingSession;

extern const std::string_view kConsumerProfileExample;
extern const std::string_view kQueryGenerationExample;
extern const std::string_view kItemSelectionIndividualExample;
extern const std::string_view kItemSelectionGroupExample;

/// Follow-up user turn sent once after an unusable answer.
extern const std::string_view kRepairRequest;

}  // namespace shopsim::prompts
