// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/catalog.hpp"
#include "shopsim/llm_gateway.hpp"
#include "shopsim/money.hpp"

namespace shopsim {

namespace tool_names {
inline constexpr std::string_view kSearch = "search_tool";
inline constexpr std::string_view kProductInfo = "get_product_info_tool";
inline constexpr std::string_view kCart = "cart_tool";
inline constexpr std::string_view kTerminate = "terminate_session";
}  // namespace tool_names

/// The four tools offered to shopping agents.
const std::vector<ToolSpec>& retail_tools();

/// Replacement content for one product in a variant. Unset fields keep the base value.
struct ProductOverride {
    std::optional<std::string> title;
    std::optional<std::string> category;
    std::optional<std::string> description;
    std::optional<std::vector<std::string>> bullets;
    std::optional<Money> price;
    std::optional<std::vector<Review>> reviews;
};

/// One arm of an A/B test: a catalog with content overrides baked in and the
/// ranker weights searches run under.
struct EnvVariant {
    std::string label;
    std::shared_ptr<const Catalog> catalog;
    FieldWeights ranker;
    std::map<std::string, ProductOverride> content_overrides;

    /// Throws ValidationError if an override names an id absent from `base`.
    static EnvVariant make(std::string label, const Catalog& base, FieldWeights ranker = {},
                           std::map<std::string, ProductOverride> overrides = {});
};

/// {"label": "T", "ranker_params": {"title": 2, ...},
///  "content_overrides": {"p1": {"price": 4.5, "title": "..."}}}
EnvVariant variant_from_json(const nlohmann::json& j, const Catalog& base);
EnvVariant load_variant(const std::filesystem::path& path, const Catalog& base);

struct EnvLimits {
    int max_steps = 40;
    int max_search_retries = 3;  // consecutive empty searches allowed
    std::size_t max_results_k = 10;

    void validate() const;
};

/// Queries longer than this are cut to their first tokens.
inline constexpr std::size_t kMaxQueryTokens = 10;

struct SearchHit {
    std::string id;
    std::string title;
    Money price;
    int position = 0;
};

struct TranscriptEvent {
    int step = 0;
    std::string tool;
    nlohmann::json arguments = nlohmann::json::object();
    std::string result;
    bool error = false;
};

struct PurchasedItem {
    std::string product_id;
    Money price;

    friend bool operator==(const PurchasedItem&, const PurchasedItem&) = default;
};

enum class Termination { TerminateTool, StepCap, Error };
std::string_view to_string(Termination t);

struct Transcript {
    std::string persona_label;
    std::string variant_label;
    std::uint64_t seed = 0;
    std::vector<TranscriptEvent> events;
    std::vector<std::string> cart;  // left in the cart at the end
    std::vector<PurchasedItem> purchased;
    Termination terminated_by = Termination::TerminateTool;
    std::string error_message;

    [[nodiscard]] Money sales() const;
    /// Queries of successful searches, in order.
    [[nodiscard]] std::vector<std::string> queries() const;
    /// Ids of successfully viewed products, in order.
    [[nodiscard]] std::vector<std::string> viewed_ids() const;
};

/// One line per event, then a summary line with cart/purchases/termination.
std::string transcript_to_jsonl(const Transcript& transcript);
void write_transcript(const Transcript& transcript, const std::filesystem::path& path);

/// What the agent sees after each step. `hits` is filled for searches and
/// `product` for successful detail views.
struct Observation {
    int step = -1;  // -1 before the first action
    std::string tool;
    std::string text;
    bool error = false;
    std::vector<SearchHit> hits;
    const Product* product = nullptr;
};

class AgentPolicy {
  public:
    virtual ~AgentPolicy() = default;
    virtual void begin_session(std::uint64_t seed) { (void)seed; }
    /// One tool call per step; a terminate_session call ends the session.
    /// Throwing ProtocolViolation ends the session with Termination::Error.
    virtual ToolCall next_action(const Observation& observation) = 0;
};

enum class CartAction { Add, Remove, Purchase };
CartAction parse_cart_action(std::string_view text);

/// Mutable state of a single shopping session over one variant.
class RetailEnv {
  public:
    RetailEnv(const EnvVariant& variant, EnvLimits limits = {});

    /// Throws ToolError for empty queries or once the empty-result retry limit is spent.
    std::vector<SearchHit> tool_search(std::string_view query);
    /// Throws ToolError unless the id was surfaced by a search in this session.
    const Product& tool_get_product_info(std::string_view id);
    /// Returns a cart summary. Throws ToolError on violated preconditions.
    std::string tool_cart(CartAction action, std::string_view id = {});

    /// Runs one tool call, records it and returns the observation. Tool
    /// failures become error observations; unknown tools throw ProtocolViolation.
    Observation execute(const ToolCall& call);

    [[nodiscard]] const std::vector<std::string>& cart() const noexcept { return cart_; }
    [[nodiscard]] const std::vector<PurchasedItem>& purchased() const noexcept { return purchased_; }
    [[nodiscard]] const std::vector<TranscriptEvent>& events() const noexcept { return events_; }
    [[nodiscard]] bool surfaced(std::string_view id) const { return surfaced_.count(std::string(id)) > 0; }
    [[nodiscard]] const EnvVariant& variant() const noexcept { return variant_; }

    void record_terminate(const ToolCall& call);

  private:
    const EnvVariant& variant_;
    EnvLimits limits_;
    std::set<std::string> surfaced_;
    std::vector<std::string> cart_;
    std::vector<PurchasedItem> purchased_;
    std::vector<TranscriptEvent> events_;
    int consecutive_empty_searches_ = 0;
};

std::string render_search_results(std::string_view query, const std::vector<SearchHit>& hits);
std::string render_product_detail(const Product& product);

/// Drives `policy` against a fresh environment until it terminates, hits the
/// step cap, or violates the protocol.
Transcript run_session(const EnvVariant& variant, AgentPolicy& policy, const EnvLimits& limits, std::uint64_t seed,
                       std::string persona_label = {});

}  // namespace shopsim
