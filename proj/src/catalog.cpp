// SPDX-License-Identifier: Apache-2.0
#include "shopsim/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "shopsim/errors.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

std::size_t count_token(const std::vector<std::string>& tokens, std::string_view token) {
    return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), token));
}

}  // namespace

void validate_product(const Product& p) {
    if (p.id.empty()) throw ValidationError("product id is empty");
    if (trim(p.title).empty()) throw ValidationError(fmt::format("product {}: title is empty", p.id));
    if (p.price < Money{}) throw ValidationError(fmt::format("product {}: negative price", p.id));
    for (const auto& r : p.reviews) {
        if (r.rating < 1 || r.rating > 5)
            throw ValidationError(fmt::format("product {}: review rating {} outside 1..5", p.id, r.rating));
    }
}

TokenIndex build_token_index(const std::map<std::string, Product, std::less<>>& products) {
    TokenIndex index;
    for (const auto& [id, p] : products) {
        std::set<std::string> seen;
        for (const auto* field : {&p.title, &p.category, &p.description}) {
            for (auto& t : tokenize(*field)) seen.insert(std::move(t));
        }
        // products are visited in id order, so every posting list stays sorted
        for (const auto& t : seen) index[t].push_back(id);
    }
    return index;
}

Catalog::Catalog(std::vector<Product> products) {
    for (auto& p : products) {
        validate_product(p);
        const std::string id = p.id;
        if (!products_.emplace(id, std::move(p)).second)
            throw ValidationError(fmt::format("duplicate product id '{}'", id));
    }
    index_ = build_token_index(products_);
}

bool Catalog::contains(std::string_view id) const { return products_.find(id) != products_.end(); }

const Product* Catalog::find(std::string_view id) const {
    const auto it = products_.find(id);
    return it == products_.end() ? nullptr : &it->second;
}

const Product& Catalog::get_product(std::string_view id) const {
    if (const auto* p = find(id)) return *p;
    throw NotFoundError(fmt::format("product '{}' not found", id));
}

double Catalog::score(const Product& product, const std::vector<std::string>& query_tokens,
                      const FieldWeights& weights) const {
    const auto title = tokenize(product.title);
    const auto category = tokenize(product.category);
    const auto description = tokenize(product.description);
    const double n = static_cast<double>(products_.size());
    double total = 0.0;
    for (const auto& t : query_tokens) {
        const auto it = index_.find(t);
        if (it == index_.end()) continue;
        const double idf = std::log(1.0 + n / static_cast<double>(it->second.size()));
        const double tf = weights.title * static_cast<double>(count_token(title, t)) +
                          weights.category * static_cast<double>(count_token(category, t)) +
                          weights.description * static_cast<double>(count_token(description, t));
        total += tf * idf;
    }
    return total;
}

std::vector<const Product*> Catalog::search(std::string_view query, std::size_t k,
                                            const FieldWeights& weights) const {
    const auto tokens = tokenize(query);
    if (tokens.empty()) throw ValidationError("search query is empty");
    if (k == 0) throw ValidationError("search k must be positive");

    std::set<std::string_view> candidates;
    for (const auto& t : tokens) {
        if (const auto it = index_.find(t); it != index_.end())
            candidates.insert(it->second.begin(), it->second.end());
    }

    std::vector<std::pair<double, const Product*>> scored;
    scored.reserve(candidates.size());
    for (const auto id : candidates) {
        const auto& p = products_.find(id)->second;
        const double s = score(p, tokens, weights);
        if (s > 0.0) scored.emplace_back(s, &p);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second->id < b.second->id;
    });

    std::vector<const Product*> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
    return out;
}

Product product_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("product record is not a JSON object");
    Product p;
    p.id = j.at("id").get<std::string>();
    p.title = j.at("title").get<std::string>();
    p.category = j.value("category", std::string{});
    p.description = j.value("description", std::string{});
    p.bullets = j.value("bullets", std::vector<std::string>{});
    const auto& price = j.at("price");
    if (!price.is_number()) throw ValidationError("price is not a number");
    p.price = Money::from_dollars(price.get<double>());
    if (j.contains("reviews")) {
        for (const auto& r : j.at("reviews")) {
            if (!r.at("rating").is_number_integer()) throw ValidationError("review rating is not an integer");
            p.reviews.push_back(Review{r.at("rating").get<int>(), r.value("text", std::string{})});
        }
    }
    p.interest_tags = j.value("interest_tags", std::vector<std::string>{});
    validate_product(p);
    return p;
}

json product_to_json(const Product& p) {
    json reviews = json::array();
    for (const auto& r : p.reviews) reviews.push_back({{"rating", r.rating}, {"text", r.text}});
    return json{{"id", p.id},
                {"title", p.title},
                {"category", p.category},
                {"description", p.description},
                {"bullets", p.bullets},
                {"price", p.price.dollars()},
                {"reviews", reviews},
                {"interest_tags", p.interest_tags}};
}

Catalog load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open catalog file '{}'", path.string()));

    std::vector<Product> products;
    std::set<std::string> seen;
    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (trim(line).empty()) continue;
        Product p;
        try {
            p = product_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw ValidationError(fmt::format("{}: line {}: malformed product record: {}", path.string(), line_no, e.what()));
        }
        if (!seen.insert(p.id).second)
            throw ValidationError(fmt::format("{}: line {}: duplicate product id '{}'", path.string(), line_no, p.id));
        products.push_back(std::move(p));
    }
    return Catalog(std::move(products));
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", path.string()));
    for (const auto& [id, p] : catalog.products()) out << product_to_json(p).dump() << '\n';
}

}  // namespace shopsim
