// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/parallel.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/shopper_agent.hpp"
#include "shopsim/tasks.hpp"

namespace shopsim {

std::vector<Transcript> simulate_sessions(const EnvVariant& variant, const std::vector<SessionJob>& jobs,
                                          const EnvLimits& limits, std::size_t threads) {
    limits.validate();
    std::vector<Transcript> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        auto policy = jobs[i].make_policy();
        out[i] = run_session(variant, *policy, limits, jobs[i].seed, jobs[i].persona_label);
    });
    return out;
}

namespace {

std::string title_or_id(const Catalog& catalog, const std::string& id) {
    const auto* p = catalog.find(id);
    return p ? p->title : id;
}

std::optional<double> ttr_or_none(const std::vector<std::string>& texts) {
    try {
        return ttr(texts);
    } catch (const ValidationError&) {
        return std::nullopt;
    }
}

}  // namespace

SessionCorpus human_corpus(const std::vector<Session>& sessions, const Catalog& catalog) {
    SessionCorpus c;
    for (const auto& s : sessions) {
        c.stats.push_back(session_stats(s));
        for (const auto& a : s.actions) {
            if (a.kind == ActionKind::Search) c.queries.push_back(a.payload);
            if (a.kind == ActionKind::View) c.viewed_titles.push_back(title_or_id(catalog, a.payload));
        }
    }
    return c;
}

SessionCorpus agent_corpus(const std::vector<Transcript>& transcripts, const Catalog& catalog) {
    SessionCorpus c;
    for (const auto& t : transcripts) {
        c.stats.push_back(session_stats(t));
        for (auto& q : t.queries()) c.queries.push_back(std::move(q));
        for (const auto& id : t.viewed_ids()) c.viewed_titles.push_back(title_or_id(catalog, id));
    }
    return c;
}

SessionHistograms session_histograms(const std::vector<SessionStats>& stats) {
    if (stats.empty()) throw ValidationError("session histograms need at least one session");
    std::vector<int> searches, views, purchases;
    for (const auto& s : stats) {
        searches.push_back(s.searches);
        views.push_back(s.views);
        purchases.push_back(s.purchases);
    }
    return {count_histogram(searches), count_histogram(views), count_histogram(purchases)};
}

SessionGenResult evaluate_session_generation(const SessionCorpus& human,
                                             const std::vector<std::pair<std::string, SessionCorpus>>& arms,
                                             double epsilon) {
    SessionGenResult r;
    r.human_sessions = human.stats.size();
    r.human = session_histograms(human.stats);
    r.human_query_ttr = ttr_or_none(human.queries);
    r.human_product_ttr = ttr_or_none(human.viewed_titles);
    for (const auto& [label, corpus] : arms) {
        SessionArmResult a{label, corpus.stats.size(), session_histograms(corpus.stats), 0.0, 0.0, 0.0, {}, {}};
        a.kl_searches = discrete_kl(r.human.searches, a.histograms.searches, epsilon);
        a.kl_views = discrete_kl(r.human.views, a.histograms.views, epsilon);
        a.kl_purchases = discrete_kl(r.human.purchases, a.histograms.purchases, epsilon);
        a.query_ttr = ttr_or_none(corpus.queries);
        a.product_ttr = ttr_or_none(corpus.viewed_titles);
        r.arms.push_back(std::move(a));
    }
    return r;
}

SessionGenRun run_session_generation(const std::vector<Shopper>& population, const TaskContext& ctx,
                                     const SessionGenOptions& options) {
    if (population.empty()) throw ValidationError("session generation: empty population");
    if (options.sessions_per_shopper <= 0) throw ValidationError("sessions per shopper must be positive");

    std::vector<Session> human_sessions;
    for (const auto& s : population)
        human_sessions.insert(human_sessions.end(), s.history.recent_sessions.begin(), s.history.recent_sessions.end());
    if (human_sessions.empty()) throw ValidationError("session generation: the population has no recent sessions");

    const auto variant = EnvVariant::make("C", ctx.catalog);
    SessionGenRun run;
    std::vector<std::pair<std::string, SessionCorpus>> corpora;
    for (const auto view : options.arms) {
        const std::string arm(to_string(view));
        std::vector<SessionJob> jobs;
        for (std::size_t s = 0; s < population.size(); ++s) {
            const Persona persona = view == PersonaView::None ? Persona::empty_baseline() : population[s].persona;
            for (int n = 0; n < options.sessions_per_shopper; ++n) {
                const auto index = s * static_cast<std::size_t>(options.sessions_per_shopper) + static_cast<std::size_t>(n);
                LlmPolicyOptions po;
                po.generation = ctx.generation;
                po.generation.temperature = options.temperature;
                po.view = view;
                po.shopping_intention = options.shopping_intention;
                jobs.push_back({population[s].customer_id, derive_seed(ctx.seed, "session-gen/" + arm, index),
                                [&gateway = ctx.gateway, persona, po] {
                                    return std::make_unique<LlmPolicy>(gateway, persona, po);
                                }});
            }
        }
        auto transcripts = simulate_sessions(variant, jobs, options.limits, ctx.jobs);
        for (const auto& t : transcripts) {
            if (t.terminated_by == Termination::Error && ctx.warn)
                ctx.warn(fmt::format("session-gen [{}] {}: {}", arm, t.persona_label, t.error_message));
        }
        corpora.emplace_back(arm, agent_corpus(transcripts, ctx.catalog));
        run.transcripts.emplace(arm, std::move(transcripts));
    }
    run.result = evaluate_session_generation(human_corpus(human_sessions, ctx.catalog), corpora, ctx.metrics.epsilon);
    return run;
}

}  // namespace shopsim
