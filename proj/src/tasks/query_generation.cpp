// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/parallel.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/shopper_agent.hpp"
#include "shopsim/tasks.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

std::vector<QueryGenCase> build_query_gen_cases(const std::vector<Shopper>& population, const Catalog& catalog) {
    std::vector<QueryGenCase> cases;
    for (const auto& shopper : population) {
        for (const auto& session : shopper.history.recent_sessions) {
            const auto pair = mine_pair(session);
            if (!pair) continue;
            QueryGenCase c{shopper.customer_id, pair->query, pair->product_id, {}};
            const auto first = std::find_if(session.actions.begin(), session.actions.end(),
                                            [](const Action& a) { return a.kind == ActionKind::Search; });
            for (auto it = std::next(first); it != session.actions.end() && it->kind != ActionKind::Search; ++it) {
                if (it->kind != ActionKind::View) continue;
                const auto* p = catalog.find(it->payload);
                c.viewed_titles.push_back(p ? p->title : it->payload);
            }
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

BigramLm train_bigram_on(const std::vector<QueryGenCase>& cases) {
    std::vector<std::string> corpus;
    for (const auto& c : cases) {
        corpus.push_back(join(c.viewed_titles, " ") + " " + c.human_query);
        for (const auto& t : c.viewed_titles) corpus.push_back(t);
    }
    return BigramLm(corpus);
}

QueryGenArm score_query_arm(std::string arm, const std::vector<std::string>& human_queries,
                            const std::vector<std::optional<std::string>>& agent_queries,
                            const std::vector<double>& human_perplexity, Embedder& embedder, const MetricParams& metrics,
                            std::uint64_t seed, const std::vector<double>& sweep_bandwidths, int perplexity_bins) {
    if (human_queries.empty()) throw ValidationError("query generation needs at least one pair");
    if (agent_queries.size() != human_queries.size() || human_perplexity.size() != human_queries.size())
        throw ValidationError("query generation needs one agent answer and perplexity per human query");
    metrics.validate();

    QueryGenArm out;
    out.arm = std::move(arm);
    out.agent_queries = agent_queries;

    const auto human_vecs = embedder.embed_all(human_queries);
    SampleSet human(embedder.dim());
    for (const auto& v : human_vecs) human.add(v);

    SampleSet agent(embedder.dim());
    std::vector<double> per_case(human_queries.size(), 0.0);
    for (std::size_t i = 0; i < agent_queries.size(); ++i) {
        if (!agent_queries[i] || tokenize(*agent_queries[i]).empty()) {
            ++out.failures;
            continue;
        }
        const auto v = embedder.embed(*agent_queries[i]);
        agent.add(v);
        per_case[i] = cosine_similarity(v, human_vecs[i]).value;
    }
    out.similarity = aggregate_individual(per_case, human_queries, [](double s, const std::string&) { return s; });
    out.by_perplexity = stratify(human_perplexity, per_case, perplexity_bins);

    if (agent.empty()) {
        out.group_kl.mean = std::numeric_limits<double>::quiet_NaN();
        out.group_kl.stdev = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const auto kl_seed = derive_seed(seed, "query-gen-kl/" + out.arm);
    out.group_kl = mc_kl(human, agent, metrics.bandwidth, metrics.mc_samples, metrics.mc_repeats, kl_seed);
    for (double b : sweep_bandwidths) {
        out.bandwidth_sweep[b] =
            b == metrics.bandwidth ? out.group_kl : mc_kl(human, agent, b, metrics.mc_samples, metrics.mc_repeats, kl_seed);
    }
    return out;
}

QueryGenResult run_query_generation(const std::vector<Shopper>& population, const TaskContext& ctx, Embedder& embedder,
                                    PerplexityScorer& scorer, const QueryGenOptions& options) {
    QueryGenResult result;
    result.cases = build_query_gen_cases(population, ctx.catalog);
    if (result.cases.empty()) throw ValidationError("query generation: the population has no query-view pairs");

    std::vector<std::string> human_queries;
    for (const auto& c : result.cases) {
        human_queries.push_back(c.human_query);
        result.human_perplexity.push_back(scorer.perplexity(join(c.viewed_titles, " "), c.human_query));
    }

    // Case indices per shopper, in population order.
    std::vector<std::vector<std::size_t>> by_shopper(population.size());
    for (std::size_t i = 0, s = 0; i < result.cases.size(); ++i) {
        while (population[s].customer_id != result.cases[i].customer_id) ++s;
        by_shopper[s].push_back(i);
    }

    for (const auto view : options.arms) {
        const std::string arm(to_string(view));
        std::vector<std::optional<std::string>> answers(result.cases.size());
        parallel_for(population.size(), ctx.jobs, [&](std::size_t s) {
            const auto& idx = by_shopper[s];
            if (idx.empty()) return;
            std::vector<std::vector<std::string>> sessions;
            for (auto i : idx) sessions.push_back(result.cases[i].viewed_titles);
            const auto prompt = build_query_generation_prompt(population[s].persona.text(view), sessions);
            auto config = ctx.generation;
            config.seed = derive_seed(ctx.seed, "query-gen/" + arm, s);
            try {
                const auto queries = answer_query_generation(ctx.gateway, prompt, idx.size(), config);
                for (std::size_t j = 0; j < idx.size(); ++j) answers[idx[j]] = queries[j];
            } catch (const TaskAnswerFailed& e) {
                if (ctx.warn) ctx.warn(fmt::format("query-gen [{}] {}: {}", arm, population[s].customer_id, e.what()));
            }
        });
        result.arms.push_back(score_query_arm(arm, human_queries, answers, result.human_perplexity, embedder,
                                              ctx.metrics, ctx.seed, options.sweep_bandwidths,
                                              options.perplexity_bins));
    }
    return result;
}

}  // namespace shopsim
