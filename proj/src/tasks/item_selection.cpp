// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <deque>
#include <set>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/parallel.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/shopper_agent.hpp"
#include "shopsim/tasks.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

std::vector<std::string> ItemSelectionCase::presented_ids() const {
    const std::array<const std::string*, 4> slots{&ground_truth, &distractors[0], &distractors[1], &distractors[2]};
    std::vector<std::string> out;
    for (auto slot : presentation_order) out.push_back(*slots.at(slot));
    return out;
}

std::size_t ItemSelectionCase::answer_position() const {
    const auto it = std::find(presentation_order.begin(), presentation_order.end(), std::size_t{0});
    return static_cast<std::size_t>(it - presentation_order.begin());
}

ShoppingHistory scrub_history(const ShoppingHistory& history, const std::vector<std::string>& ids) {
    const auto hidden = [&](const Action& a) {
        return a.kind != ActionKind::Search && std::find(ids.begin(), ids.end(), a.payload) != ids.end();
    };
    ShoppingHistory out;
    out.customer_id = history.customer_id;
    for (const auto& s : history.recent_sessions) {
        Session kept{s.customer_id, s.date, {}};
        std::copy_if(s.actions.begin(), s.actions.end(), std::back_inserter(kept.actions),
                     [&](const Action& a) { return !hidden(a); });
        if (!kept.actions.empty()) out.recent_sessions.push_back(std::move(kept));
    }
    std::copy_if(history.older_purchases.begin(), history.older_purchases.end(), std::back_inserter(out.older_purchases),
                 [&](const Action& a) { return !hidden(a); });
    return out;
}

namespace {

std::vector<std::string> purchases_of(const ShoppingHistory& h) {
    std::vector<std::string> out;
    for (const auto& a : h.older_purchases) out.push_back(a.payload);
    for (const auto& s : h.recent_sessions)
        for (const auto& a : s.actions)
            if (a.kind == ActionKind::Purchase) out.push_back(a.payload);
    return out;
}

bool shares_interest(const Product& p, const std::set<std::string>& interests) {
    return std::any_of(p.interest_tags.begin(), p.interest_tags.end(),
                       [&](const std::string& tag) { return interests.count(to_lower(trim(tag))) > 0; });
}

}  // namespace

std::vector<ItemSelectionCase> build_item_selection_cases(const std::vector<Shopper>& population,
                                                          const Catalog& catalog,
                                                          const ItemSelectionBuildOptions& options, const Warn& warn) {
    if (options.pool_size < 3) throw ValidationError("distractor pool must hold at least 3 items");
    std::vector<std::string> all_ids;
    for (const auto& [id, p] : catalog.products()) all_ids.push_back(id);

    std::vector<std::deque<std::string>> queues;
    for (const auto& s : population) {
        auto purchases = purchases_of(s.history);
        if (purchases.empty() && warn) warn(fmt::format("item-selection: {} has no purchases", s.customer_id));
        queues.emplace_back(purchases.begin(), purchases.end());
    }

    std::vector<ItemSelectionCase> cases;
    std::uint64_t candidate = 0;
    bool progress = true;
    while (progress && (options.n_cases == 0 || cases.size() < options.n_cases)) {
        progress = false;
        for (std::size_t s = 0; s < population.size(); ++s) {
            if (options.n_cases != 0 && cases.size() >= options.n_cases) break;
            if (queues[s].empty()) continue;
            progress = true;
            const std::string truth = queues[s].front();
            queues[s].pop_front();
            Rng rng(derive_seed(options.seed, "item-case", candidate++));
            const auto& shopper = population[s];
            if (!catalog.contains(truth)) {
                if (warn) warn(fmt::format("item-selection: {} bought unknown product {}", shopper.customer_id, truth));
                continue;
            }

            std::set<std::string> interests;
            for (const auto& i : shopper.persona.profile.interests) interests.insert(to_lower(trim(i)));

            // Partial Fisher-Yates: the first pool_size slots form the random pool.
            std::vector<std::string> ids = all_ids;
            const std::size_t pool = std::min(options.pool_size, ids.size());
            for (std::size_t i = 0; i < pool; ++i) std::swap(ids[i], ids[i + rng.uniform_index(ids.size() - i)]);

            std::vector<std::string> picked;
            for (std::size_t i = 0; i < pool && picked.size() < 3; ++i) {
                if (ids[i] == truth) continue;
                if (!shares_interest(catalog.get_product(ids[i]), interests)) picked.push_back(ids[i]);
            }
            if (picked.size() < 3) {
                if (warn)
                    warn(fmt::format("item-selection: skipped {} / {}: fewer than 3 distractors without shared interests",
                                     shopper.customer_id, truth));
                continue;
            }
            ItemSelectionCase c;
            c.customer_id = shopper.customer_id;
            c.ground_truth = truth;
            std::copy(picked.begin(), picked.end(), c.distractors.begin());
            rng.shuffle(std::span<std::size_t>(c.presentation_order));
            c.scrubbed_history = scrub_history(shopper.history, {truth, picked[0], picked[1], picked[2]});
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

std::string case_background(const Persona& persona, const ItemSelectionCase& c, const Catalog& catalog,
                            PersonaView view) {
    if (view == PersonaView::None || persona.baseline) return {};
    Persona p = persona;
    p.rendered_history = render_history(c.scrubbed_history, title_resolver(catalog));
    return p.text(view);
}

std::vector<ItemSelectionArm> run_item_selection_individual(const std::vector<Shopper>& population,
                                                            const std::vector<ItemSelectionCase>& cases,
                                                            const TaskContext& ctx,
                                                            const std::vector<PersonaView>& arms) {
    if (cases.empty()) throw ValidationError("item selection: no test cases");
    std::map<std::string, const Shopper*> by_id;
    for (const auto& s : population) by_id.emplace(s.customer_id, &s);

    std::vector<ItemSelectionArm> out;
    for (const auto view : arms) {
        ItemSelectionArm arm;
        arm.arm = std::string(to_string(view));
        arm.chosen.assign(cases.size(), -1);
        parallel_for(cases.size(), ctx.jobs, [&](std::size_t i) {
            const auto& c = cases[i];
            const auto it = by_id.find(c.customer_id);
            if (it == by_id.end()) throw ValidationError(fmt::format("case refers to unknown shopper {}", c.customer_id));
            std::vector<std::string> titles;
            for (const auto& id : c.presented_ids()) titles.push_back(ctx.catalog.get_product(id).title);
            const auto prompt =
                build_item_selection_individual_prompt(case_background(it->second->persona, c, ctx.catalog, view), titles);
            auto config = ctx.generation;
            config.seed = derive_seed(ctx.seed, "item-ind/" + arm.arm, i);
            try {
                arm.chosen[i] = static_cast<int>(answer_title_choice(ctx.gateway, prompt, titles, config));
            } catch (const TaskAnswerFailed& e) {
                if (ctx.warn) ctx.warn(fmt::format("item-select [{}] case {}: {}", arm.arm, i, e.what()));
            }
        });
        std::vector<int> truth;
        for (const auto& c : cases) truth.push_back(static_cast<int>(c.answer_position()));
        arm.failures = static_cast<std::size_t>(std::count(arm.chosen.begin(), arm.chosen.end(), -1));
        arm.accuracy = aggregate_individual(arm.chosen, truth, [](int a, int h) { return a == h ? 1.0 : 0.0; });
        out.push_back(std::move(arm));
    }
    return out;
}

std::vector<RankObservation> human_rank_observations(const std::vector<Shopper>& population, const Catalog& catalog,
                                                     std::size_t k) {
    std::vector<RankObservation> out;
    for (const auto& shopper : population) {
        for (const auto& session : shopper.history.recent_sessions) {
            const auto first = std::find_if(session.actions.begin(), session.actions.end(),
                                            [](const Action& a) { return a.kind == ActionKind::Search; });
            if (first == session.actions.end() || tokenize(first->payload).empty()) continue;
            const auto view = std::find_if(std::next(first), session.actions.end(),
                                           [](const Action& a) { return a.kind == ActionKind::View; });
            if (view == session.actions.end()) continue;
            const auto results = catalog.search(first->payload, k);
            const auto pos = std::find_if(results.begin(), results.end(),
                                          [&](const Product* p) { return p->id == view->payload; });
            if (pos == results.end()) continue;
            out.push_back({shopper.customer_id, first->payload, static_cast<int>(pos - results.begin())});
        }
    }
    return out;
}

ItemSelectionGroupResult run_item_selection_group(const std::vector<Shopper>& population, const TaskContext& ctx,
                                                  std::size_t k, const std::vector<PersonaView>& arms) {
    ItemSelectionGroupResult result;
    result.slots = k;
    result.observations = human_rank_observations(population, ctx.catalog, k);
    if (result.observations.empty()) throw ValidationError("item selection (group): no human rank observations");
    std::vector<int> human_ranks;
    for (const auto& o : result.observations) human_ranks.push_back(o.human_rank);
    result.human = rank_histogram(human_ranks, k);

    std::map<std::string, const Shopper*> by_id;
    for (const auto& s : population) by_id.emplace(s.customer_id, &s);

    for (const auto view : arms) {
        RankArm arm;
        arm.arm = std::string(to_string(view));
        std::vector<int> ranks(result.observations.size(), -1);
        parallel_for(result.observations.size(), ctx.jobs, [&](std::size_t i) {
            const auto& o = result.observations[i];
            const auto items = ctx.catalog.search(o.query, k);
            const auto prompt = build_item_selection_group_prompt(by_id.at(o.customer_id)->persona.text(view), items);
            auto config = ctx.generation;
            config.seed = derive_seed(ctx.seed, "item-group/" + arm.arm, i);
            try {
                ranks[i] = static_cast<int>(answer_index_choice(ctx.gateway, prompt, items.size(), config));
            } catch (const TaskAnswerFailed& e) {
                if (ctx.warn) ctx.warn(fmt::format("item-select-group [{}] case {}: {}", arm.arm, i, e.what()));
            }
        });
        for (int r : ranks) {
            if (r < 0)
                ++arm.failures;
            else
                arm.ranks.push_back(r);
        }
        if (!arm.ranks.empty()) {
            arm.histogram = rank_histogram(arm.ranks, k);
            arm.kl = discrete_kl(result.human, *arm.histogram, ctx.metrics.epsilon);
        }
        result.arms.push_back(std::move(arm));
    }
    return result;
}

}  // namespace shopsim
