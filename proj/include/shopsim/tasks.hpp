// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/catalog.hpp"
#include "shopsim/llm_gateway.hpp"
#include "shopsim/metrics.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/retail_env.hpp"
#include "shopsim/session_log.hpp"
#include "shopsim/text_models.hpp"

namespace shopsim {

/// A human shopper and the persona mined from them.
struct Shopper {
    std::string customer_id;
    ShoppingHistory history;
    Persona persona;
};

struct MetricParams {
    double bandwidth = 0.1;
    int mc_samples = 1000;
    int mc_repeats = 5;
    double epsilon = kDefaultKlEpsilon;

    void validate() const;
};

using Warn = std::function<void(const std::string&)>;

/// Shared handles for the model-facing tasks.
struct TaskContext {
    const Catalog& catalog;
    ChatGateway& gateway;
    std::uint64_t seed = 0;
    GenerationConfig generation;
    MetricParams metrics;
    std::size_t jobs = 1;
    Warn warn;
};

/// Default conditioning arms: with and without the persona.
std::vector<PersonaView> default_arms();
/// The five ablation arms: base, profile, preferences, history, persona.
std::vector<PersonaView> ablation_arms();

TitleResolver title_resolver(const Catalog& catalog);

// --- query generation ------------------------------------------------------------

struct QueryGenCase {
    std::string customer_id;
    std::string human_query;
    std::string product_id;
    std::vector<std::string> viewed_titles;  // views between the first search and the next one
};

/// One case per recent session that yields a query-view pair.
std::vector<QueryGenCase> build_query_gen_cases(const std::vector<Shopper>& population, const Catalog& catalog);

struct QueryGenArm {
    std::string arm;
    std::vector<std::optional<std::string>> agent_queries;  // nullopt when the answer was unusable
    IndividualScore similarity;                             // failed cases score 0
    std::vector<Stratum> by_perplexity;
    KlEstimate group_kl;
    std::map<double, KlEstimate> bandwidth_sweep;
    std::size_t failures = 0;
};

struct QueryGenResult {
    std::vector<QueryGenCase> cases;
    std::vector<double> human_perplexity;
    std::vector<QueryGenArm> arms;
};

struct QueryGenOptions {
    std::vector<PersonaView> arms = default_arms();
    std::vector<double> sweep_bandwidths;  // extra bandwidths for the sweep table
    int perplexity_bins = 5;
};

/// Each shopper gets one prompt covering all of their cases. Throws
/// ValidationError when the population yields no pairs.
QueryGenResult run_query_generation(const std::vector<Shopper>& population, const TaskContext& ctx, Embedder& embedder,
                                    PerplexityScorer& scorer, const QueryGenOptions& options = {});

/// Group and individual scores for fixed agent queries, without calling a model.
QueryGenArm score_query_arm(std::string arm, const std::vector<std::string>& human_queries,
                            const std::vector<std::optional<std::string>>& agent_queries,
                            const std::vector<double>& human_perplexity, Embedder& embedder, const MetricParams& metrics,
                            std::uint64_t seed, const std::vector<double>& sweep_bandwidths = {}, int perplexity_bins = 5);

/// Scorer trained on every human query and viewed title of the population.
BigramLm train_bigram_on(const std::vector<QueryGenCase>& cases);

// --- item selection ---------------------------------------------------------------

struct ItemSelectionCase {
    std::string customer_id;
    std::string ground_truth;
    std::array<std::string, 3> distractors;
    ShoppingHistory scrubbed_history;
    /// order[i] is the slot shown at position i: 0 is the ground truth, 1..3 the distractors.
    std::array<std::size_t, 4> presentation_order{0, 1, 2, 3};

    [[nodiscard]] std::vector<std::string> presented_ids() const;
    [[nodiscard]] std::size_t answer_position() const;
};

/// Removes every action referring to one of `ids`; sessions left empty are dropped.
ShoppingHistory scrub_history(const ShoppingHistory& history, const std::vector<std::string>& ids);

struct ItemSelectionBuildOptions {
    std::size_t pool_size = 1000;
    std::size_t n_cases = 0;  // 0 = one case per purchase
    std::uint64_t seed = 0;
};

/// One case per historical purchase (round-robin across shoppers, capped at
/// n_cases). Distractors come from a random pool and share no interest with
/// the shopper; cases without three such distractors are skipped with a warning.
std::vector<ItemSelectionCase> build_item_selection_cases(const std::vector<Shopper>& population,
                                                          const Catalog& catalog,
                                                          const ItemSelectionBuildOptions& options,
                                                          const Warn& warn = {});

/// Persona text for one case: the persona with its history block replaced by
/// the scrubbed history, cut down to `view`.
std::string case_background(const Persona& persona, const ItemSelectionCase& c, const Catalog& catalog, PersonaView view);

struct ItemSelectionArm {
    std::string arm;
    std::vector<int> chosen;  // presented position, -1 for an unusable answer
    IndividualScore accuracy;
    std::size_t failures = 0;
};

std::vector<ItemSelectionArm> run_item_selection_individual(const std::vector<Shopper>& population,
                                                            const std::vector<ItemSelectionCase>& cases,
                                                            const TaskContext& ctx,
                                                            const std::vector<PersonaView>& arms = ablation_arms());

struct RankObservation {
    std::string customer_id;
    std::string query;
    int human_rank = 0;
};

/// Rank of the first viewed product among the search results of the
/// session's first query; sessions whose view falls outside the top k are skipped.
std::vector<RankObservation> human_rank_observations(const std::vector<Shopper>& population, const Catalog& catalog,
                                                     std::size_t k);

struct RankArm {
    std::string arm;
    std::vector<int> ranks;
    std::optional<Histogram> histogram;
    std::optional<double> kl;
    std::size_t failures = 0;
};

struct ItemSelectionGroupResult {
    std::size_t slots = 0;
    std::vector<RankObservation> observations;
    Histogram human;
    std::vector<RankArm> arms;
};

ItemSelectionGroupResult run_item_selection_group(const std::vector<Shopper>& population, const TaskContext& ctx,
                                                  std::size_t k = 10,
                                                  const std::vector<PersonaView>& arms = default_arms());

// --- sessions ------------------------------------------------------------------------

using PolicyFactory = std::function<std::unique_ptr<AgentPolicy>()>;

struct SessionJob {
    std::string persona_label;
    std::uint64_t seed = 0;
    PolicyFactory make_policy;
};

/// Each job gets a fresh environment and policy; results keep job order.
std::vector<Transcript> simulate_sessions(const EnvVariant& variant, const std::vector<SessionJob>& jobs,
                                          const EnvLimits& limits, std::size_t threads = 1);

struct SessionCorpus {
    std::vector<SessionStats> stats;
    std::vector<std::string> queries;
    std::vector<std::string> viewed_titles;
};

SessionCorpus human_corpus(const std::vector<Session>& sessions, const Catalog& catalog);
SessionCorpus agent_corpus(const std::vector<Transcript>& transcripts, const Catalog& catalog);

struct SessionHistograms {
    Histogram searches;
    Histogram views;
    Histogram purchases;
};

SessionHistograms session_histograms(const std::vector<SessionStats>& stats);

struct SessionArmResult {
    std::string arm;
    std::size_t sessions = 0;
    SessionHistograms histograms;
    double kl_searches = 0.0;
    double kl_views = 0.0;
    double kl_purchases = 0.0;
    std::optional<double> query_ttr;
    std::optional<double> product_ttr;
};

struct SessionGenResult {
    std::size_t human_sessions = 0;
    SessionHistograms human;
    std::optional<double> human_query_ttr;
    std::optional<double> human_product_ttr;
    std::vector<SessionArmResult> arms;
};

SessionGenResult evaluate_session_generation(const SessionCorpus& human,
                                             const std::vector<std::pair<std::string, SessionCorpus>>& arms,
                                             double epsilon);

struct SessionGenOptions {
    std::vector<PersonaView> arms = default_arms();
    int sessions_per_shopper = 1;
    EnvLimits limits;
    double temperature = 0.5;
    std::string shopping_intention;
};

struct SessionGenRun {
    SessionGenResult result;
    std::map<std::string, std::vector<Transcript>> transcripts;  // by arm
};

/// LLM agents for every shopper and arm against the unmodified catalog,
/// compared with the shoppers' recent sessions.
SessionGenRun run_session_generation(const std::vector<Shopper>& population, const TaskContext& ctx,
                                     const SessionGenOptions& options = {});

// --- A/B -----------------------------------------------------------------------------

struct AbResult {
    std::size_t sessions = 0;
    Money sales_control;
    Money sales_treatment;
    std::size_t purchases_control = 0;
    std::size_t purchases_treatment = 0;
    std::optional<double> delta_pct;  // undefined when control sales are zero
    int direction = 0;                // sign(sales_T - sales_C)
    std::vector<Transcript> control_transcripts;
    std::vector<Transcript> treatment_transcripts;
};

struct AbOptions {
    EnvLimits limits;
    /// Reuse one seed per shopper in both arms instead of disjoint streams.
    bool shared_seeds = false;
    std::size_t threads = 1;
};

/// Runs every policy once in each variant. Throws ValidationError for an
/// empty population or variants over different product ids.
AbResult run_ab_simulation(const EnvVariant& control, const EnvVariant& treatment,
                           const std::vector<std::pair<std::string, PolicyFactory>>& population, std::uint64_t seed,
                           const AbOptions& options = {});

// --- dice -------------------------------------------------------------------------------

struct DiceRow {
    std::string system;
    double mse = 0.0;
    double accuracy = 0.0;
    double kl = 0.0;
};

/// Fair five-sided tosses against a constant-3 predictor (A) and a uniform one (B).
std::vector<DiceRow> run_dice_demo(int n_tosses, double epsilon, std::uint64_t seed);

// --- references ---------------------------------------------------------------------------

/// Values reported for the original proprietary setup, kept as labelled context.
nlohmann::json published_reference(std::string_view task);

}  // namespace shopsim
