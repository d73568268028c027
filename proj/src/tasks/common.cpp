// SPDX-License-Identifier: Apache-2.0
#include "shopsim/tasks.hpp"

namespace shopsim {

using nlohmann::json;

void MetricParams::validate() const {
    if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be > 0");
    if (mc_samples <= 0) throw ValidationError("mc_samples must be > 0");
    if (mc_repeats <= 0) throw ValidationError("mc_repeats must be > 0");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
}

std::vector<PersonaView> default_arms() { return {PersonaView::None, PersonaView::Full}; }

std::vector<PersonaView> ablation_arms() {
    return {PersonaView::None, PersonaView::ProfileOnly, PersonaView::PreferencesOnly, PersonaView::HistoryOnly,
            PersonaView::Full};
}

TitleResolver title_resolver(const Catalog& catalog) {
    return [&catalog](std::string_view id) -> std::optional<std::string> {
        if (const auto* p = catalog.find(id)) return p->title;
        return std::nullopt;
    };
}

json published_reference(std::string_view task) {
    if (task == "query_gen")
        return {{"mean_similarity", {{"base", 0.59}, {"persona", 0.69}}},
                {"group_kl", {{"base", 18.81}, {"persona", 17.51}}},
                {"bandwidth_sweep",
                 {{"0.001", {{"base", 410026}, {"persona", 334170}}},
                  {"0.01", {{"base", 2236}, {"persona", 1871}}},
                  {"0.1", {{"base", 18.81}, {"persona", 17.51}}},
                  {"1", {{"base", 0.42}, {"persona", 0.18}}}}}};
    if (task == "item_select_individual")
        return {{"accuracy_pct",
                 {{"base", 25.46}, {"profile", 35.95}, {"preferences", 39.01}, {"history", 41.11}, {"persona", 47.26}}},
                {"cases", 4600}};
    if (task == "item_select_group") return {{"rank_kl", {{"base", 2.40}, {"persona", 1.08}}}};
    if (task == "session_gen")
        return {{"kl_searches", {{"base", 11.69}, {"persona", 3.71}}},
                {"kl_views", {{"base", 11.70}, {"persona", 3.72}}},
                {"kl_purchases", {{"base", 11.68}, {"persona", 3.68}}},
                {"query_ttr", {{"human", 0.38}, {"base", 0.013}, {"persona", 0.23}}},
                {"product_ttr", {{"human", 0.97}, {"base", 0.035}, {"persona", 0.66}}},
                {"sessions_per_configuration", 2400},
                {"temperature", 0.5}};
    if (task == "dice_demo")
        return {{"A", {{"mse", 1.97}, {"accuracy", 0.206}, {"kl", 10.04}}},
                {"B", {{"mse", 3.96}, {"accuracy", 0.203}, {"kl", 0.0095}}}};
    return json::object();
}

}  // namespace shopsim
