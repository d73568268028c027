// SPDX-License-Identifier: Apache-2.0
#include "shopsim/retail_env.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/session_log.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

const std::vector<ToolSpec>& retail_tools() {
    static const std::vector<ToolSpec> tools = {
        {std::string(tool_names::kSearch),
         "Submit a query to the store search bar and get the ranked search results.",
         {{"query", "string", "Search query, a few words", true, {}}}},
        {std::string(tool_names::kProductInfo),
         "Open the detail page of a product from the search results: description, bullet points, price and reviews.",
         {{"product_id", "string", "Id of a product shown in the search results", true, {}}}},
        {std::string(tool_names::kCart),
         "Add a product to the cart, remove it, or purchase everything in the cart.",
         {{"action", "string", "One of add, remove, purchase", true, {"add", "remove", "purchase"}},
          {"product_id", "string", "Product id, required for add and remove", false, {}}}},
        {std::string(tool_names::kTerminate), "End the shopping session.", {}},
    };
    return tools;
}

// --- variants -----------------------------------------------------------------

EnvVariant EnvVariant::make(std::string label, const Catalog& base, FieldWeights ranker,
                            std::map<std::string, ProductOverride> overrides) {
    if (ranker.title < 0 || ranker.category < 0 || ranker.description < 0 ||
        ranker.title + ranker.category + ranker.description <= 0)
        throw ValidationError("ranker weights must be non-negative and not all zero");

    std::vector<Product> products;
    products.reserve(base.size());
    for (const auto& [id, p] : base.products()) products.push_back(p);
    for (const auto& [id, o] : overrides) {
        auto it = std::find_if(products.begin(), products.end(), [&](const Product& p) { return p.id == id; });
        if (it == products.end())
            throw ValidationError(fmt::format("variant '{}' overrides unknown product '{}'", label, id));
        if (o.title) it->title = *o.title;
        if (o.category) it->category = *o.category;
        if (o.description) it->description = *o.description;
        if (o.bullets) it->bullets = *o.bullets;
        if (o.price) it->price = *o.price;
        if (o.reviews) it->reviews = *o.reviews;
    }
    EnvVariant v;
    v.label = std::move(label);
    v.catalog = std::make_shared<const Catalog>(std::move(products));
    v.ranker = ranker;
    v.content_overrides = std::move(overrides);
    return v;
}

EnvVariant variant_from_json(const json& j, const Catalog& base) {
    FieldWeights w;
    if (j.contains("ranker_params")) {
        const auto& r = j.at("ranker_params");
        w.title = r.value("title", w.title);
        w.category = r.value("category", w.category);
        w.description = r.value("description", w.description);
    }
    std::map<std::string, ProductOverride> overrides;
    if (j.contains("content_overrides")) {
        for (const auto& [id, o] : j.at("content_overrides").items()) {
            ProductOverride po;
            if (o.contains("title")) po.title = o.at("title").get<std::string>();
            if (o.contains("category")) po.category = o.at("category").get<std::string>();
            if (o.contains("description")) po.description = o.at("description").get<std::string>();
            if (o.contains("bullets")) po.bullets = o.at("bullets").get<std::vector<std::string>>();
            if (o.contains("price")) po.price = Money::from_dollars(o.at("price").get<double>());
            if (o.contains("reviews")) {
                std::vector<Review> reviews;
                for (const auto& r : o.at("reviews")) reviews.push_back({r.at("rating").get<int>(), r.value("text", "")});
                po.reviews = std::move(reviews);
            }
            overrides.emplace(id, std::move(po));
        }
    }
    return EnvVariant::make(j.value("label", std::string("T")), base, w, std::move(overrides));
}

EnvVariant load_variant(const std::filesystem::path& path, const Catalog& base) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open variant file '{}'", path.string()));
    try {
        return variant_from_json(json::parse(in), base);
    } catch (const json::exception& e) {
        throw ValidationError(fmt::format("variant file '{}' is malformed: {}", path.string(), e.what()));
    }
}

void EnvLimits::validate() const {
    if (max_steps <= 0 || max_search_retries <= 0 || max_results_k == 0)
        throw ValidationError("environment limits must all be positive");
}

// --- transcripts ----------------------------------------------------------------

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::TerminateTool: return "terminate_tool";
        case Termination::StepCap: return "step_cap";
        case Termination::Error: return "error";
    }
    return "?";
}

Money Transcript::sales() const {
    Money total;
    for (const auto& p : purchased) total += p.price;
    return total;
}

std::vector<std::string> Transcript::queries() const {
    std::vector<std::string> out;
    for (const auto& e : events) {
        if (e.tool == tool_names::kSearch && !e.error) out.push_back(e.arguments.value("query", std::string{}));
    }
    return out;
}

std::vector<std::string> Transcript::viewed_ids() const {
    std::vector<std::string> out;
    for (const auto& e : events) {
        if (e.tool == tool_names::kProductInfo && !e.error) out.push_back(e.arguments.value("product_id", std::string{}));
    }
    return out;
}

SessionStats session_stats(const Transcript& transcript) {
    SessionStats st;
    st.searches = static_cast<int>(transcript.queries().size());
    st.views = static_cast<int>(transcript.viewed_ids().size());
    st.purchases = static_cast<int>(transcript.purchased.size());
    return st;
}

std::string transcript_to_jsonl(const Transcript& t) {
    std::string out;
    for (const auto& e : t.events) {
        out += json{{"type", "event"}, {"step", e.step}, {"tool", e.tool}, {"arguments", e.arguments},
                    {"result", e.result}, {"error", e.error}}
                   .dump();
        out += '\n';
    }
    json purchased = json::array();
    for (const auto& p : t.purchased) purchased.push_back({{"product_id", p.product_id}, {"price", p.price.dollars()}});
    json summary{{"type", "summary"},
                 {"persona_label", t.persona_label},
                 {"variant", t.variant_label},
                 {"seed", t.seed},
                 {"cart", t.cart},
                 {"purchased", purchased},
                 {"terminated_by", to_string(t.terminated_by)}};
    if (!t.error_message.empty()) summary["error"] = t.error_message;
    out += summary.dump();
    out += '\n';
    return out;
}

void write_transcript(const Transcript& transcript, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
    out << transcript_to_jsonl(transcript);
}

// --- environment --------------------------------------------------------------

CartAction parse_cart_action(std::string_view text) {
    const auto lower = to_lower(trim(text));
    if (lower == "add") return CartAction::Add;
    if (lower == "remove") return CartAction::Remove;
    if (lower == "purchase") return CartAction::Purchase;
    throw ToolError(fmt::format("unknown cart action '{}'; use add, remove or purchase", text));
}

RetailEnv::RetailEnv(const EnvVariant& variant, EnvLimits limits) : variant_(variant), limits_(limits) {
    if (!variant_.catalog) throw ValidationError("variant has no catalog");
    limits_.validate();
}

std::vector<SearchHit> RetailEnv::tool_search(std::string_view query) {
    auto tokens = tokenize(query);
    if (tokens.empty()) throw ToolError("empty search query; please type a few words");
    if (consecutive_empty_searches_ >= limits_.max_search_retries)
        throw ToolError(fmt::format("no results after {} attempts; end the session with {}", limits_.max_search_retries,
                                    tool_names::kTerminate));
    if (tokens.size() > kMaxQueryTokens) tokens.resize(kMaxQueryTokens);

    const auto results = variant_.catalog->search(join(tokens, " "), limits_.max_results_k, variant_.ranker);
    std::vector<SearchHit> hits;
    for (std::size_t i = 0; i < results.size(); ++i) {
        hits.push_back(SearchHit{results[i]->id, results[i]->title, results[i]->price, static_cast<int>(i)});
        surfaced_.insert(results[i]->id);
    }
    consecutive_empty_searches_ = hits.empty() ? consecutive_empty_searches_ + 1 : 0;
    return hits;
}

const Product& RetailEnv::tool_get_product_info(std::string_view id) {
    const auto* p = variant_.catalog->find(id);
    if (!p || !surfaced(id)) throw ToolError(fmt::format("product not available: '{}'", id));
    return *p;
}

std::string RetailEnv::tool_cart(CartAction action, std::string_view id) {
    switch (action) {
        case CartAction::Add: {
            if (id.empty()) throw ToolError("cart add needs a product_id");
            if (!variant_.catalog->contains(id) || !surfaced(id))
                throw ToolError(fmt::format("product not available: '{}'", id));
            if (std::find(cart_.begin(), cart_.end(), id) != cart_.end())
                throw ToolError(fmt::format("product '{}' is already in the cart", id));
            cart_.emplace_back(id);
            break;
        }
        case CartAction::Remove: {
            const auto it = std::find(cart_.begin(), cart_.end(), id);
            if (it == cart_.end()) throw ToolError(fmt::format("product '{}' is not in the cart", id));
            cart_.erase(it);
            break;
        }
        case CartAction::Purchase: {
            if (cart_.empty()) throw ToolError("cannot purchase: the cart is empty");
            Money total;
            for (const auto& pid : cart_) {
                const auto price = variant_.catalog->get_product(pid).price;
                purchased_.push_back(PurchasedItem{pid, price});
                total += price;
            }
            const auto n = cart_.size();
            cart_.clear();
            return fmt::format("Purchased {} item(s) for {}. The cart is now empty.", n, total.str());
        }
    }
    std::string out = fmt::format("Cart has {} item(s):", cart_.size());
    Money total;
    for (const auto& pid : cart_) {
        const auto& p = variant_.catalog->get_product(pid);
        fmt::format_to(std::back_inserter(out), "\n- {} | {} | {}", p.id, p.title, p.price.str());
        total += p.price;
    }
    fmt::format_to(std::back_inserter(out), "\nTotal: {}", total.str());
    return out;
}

std::string render_search_results(std::string_view query, const std::vector<SearchHit>& hits) {
    if (hits.empty()) return fmt::format("no results for \"{}\"", query);
    std::string out = fmt::format("Search results for \"{}\":", query);
    for (const auto& h : hits)
        fmt::format_to(std::back_inserter(out), "\n[{}] {} | {} | {}", h.position, h.id, h.title, h.price.str());
    return out;
}

std::string render_product_detail(const Product& p) {
    std::string out = fmt::format("Product {}: {}\nCategory: {}\nPrice: {}\nDescription: {}", p.id, p.title, p.category,
                                  p.price.str(), p.description);
    if (!p.bullets.empty()) {
        out += "\nBullet points:";
        for (const auto& b : p.bullets) fmt::format_to(std::back_inserter(out), "\n- {}", b);
    }
    if (!p.reviews.empty()) {
        out += "\nReviews:";
        for (const auto& r : p.reviews) fmt::format_to(std::back_inserter(out), "\n- {}/5: {}", r.rating, r.text);
    }
    return out;
}

namespace {

std::string string_arg(const ToolCall& call, const char* key) {
    if (!call.arguments.contains(key)) return {};
    const auto& v = call.arguments.at(key);
    return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

Observation RetailEnv::execute(const ToolCall& call) {
    Observation obs;
    obs.step = static_cast<int>(events_.size());
    obs.tool = call.name;
    try {
        if (call.name == tool_names::kSearch) {
            const auto query = string_arg(call, "query");
            obs.hits = tool_search(query);
            obs.text = render_search_results(query, obs.hits);
            if (obs.hits.empty() && consecutive_empty_searches_ < limits_.max_search_retries)
                obs.text += "; try a less specific query";
        } else if (call.name == tool_names::kProductInfo) {
            obs.product = &tool_get_product_info(string_arg(call, "product_id"));
            obs.text = render_product_detail(*obs.product);
        } else if (call.name == tool_names::kCart) {
            obs.text = tool_cart(parse_cart_action(string_arg(call, "action")), string_arg(call, "product_id"));
        } else {
            throw ProtocolViolation(fmt::format("unknown tool '{}'", call.name));
        }
    } catch (const ToolError& e) {
        obs.error = true;
        obs.hits.clear();
        obs.product = nullptr;
        obs.text = fmt::format("ERROR: {}", e.what());
    }
    events_.push_back(TranscriptEvent{obs.step, call.name, call.arguments, obs.text, obs.error});
    return obs;
}

void RetailEnv::record_terminate(const ToolCall& call) {
    events_.push_back(TranscriptEvent{static_cast<int>(events_.size()), std::string(tool_names::kTerminate),
                                      call.arguments, "session terminated", false});
}

Transcript run_session(const EnvVariant& variant, AgentPolicy& policy, const EnvLimits& limits, std::uint64_t seed,
                       std::string persona_label) {
    RetailEnv env(variant, limits);
    Transcript t;
    t.persona_label = std::move(persona_label);
    t.variant_label = variant.label;
    t.seed = seed;
    t.terminated_by = Termination::StepCap;

    policy.begin_session(seed);
    Observation obs;
    obs.text = "The shopping session has started.";
    try {
        for (int step = 0; step < limits.max_steps; ++step) {
            const ToolCall call = policy.next_action(obs);
            if (call.name == tool_names::kTerminate) {
                env.record_terminate(call);
                t.terminated_by = Termination::TerminateTool;
                break;
            }
            obs = env.execute(call);
        }
    } catch (const ProtocolViolation& e) {
        t.terminated_by = Termination::Error;
        t.error_message = e.what();
    } catch (const BackendError& e) {
        t.terminated_by = Termination::Error;
        t.error_message = e.what();
    }
    t.events = env.events();
    t.cart = env.cart();
    t.purchased = env.purchased();
    return t;
}

}  // namespace shopsim
