// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/money.hpp"

namespace shopsim {

struct Review {
    int rating = 0;  // 1..5
    std::string text;

    friend bool operator==(const Review&, const Review&) = default;
};

struct Product {
    std::string id;
    std::string title;
    std::string category;
    std::string description;
    std::vector<std::string> bullets;
    Money price;
    std::vector<Review> reviews;
    std::vector<std::string> interest_tags;

    friend bool operator==(const Product&, const Product&) = default;
};

/// Relative field weights of the lexical ranker.
struct FieldWeights {
    double title = 2.0;
    double category = 1.0;
    double description = 1.0;

    friend bool operator==(const FieldWeights&, const FieldWeights&) = default;
};

/// token -> ids of products containing it in title, category or description.
/// Id lists are sorted ascending.
using TokenIndex = std::map<std::string, std::vector<std::string>, std::less<>>;

TokenIndex build_token_index(const std::map<std::string, Product, std::less<>>& products);

/// Immutable product corpus with a lexical search index. Iteration order is by id.
class Catalog {
  public:
    Catalog() = default;
    /// Throws ValidationError on duplicate ids or invalid products.
    explicit Catalog(std::vector<Product> products);

    [[nodiscard]] std::size_t size() const noexcept { return products_.size(); }
    [[nodiscard]] bool empty() const noexcept { return products_.empty(); }
    [[nodiscard]] bool contains(std::string_view id) const;

    /// Throws NotFoundError for unknown ids.
    [[nodiscard]] const Product& get_product(std::string_view id) const;
    [[nodiscard]] const Product* find(std::string_view id) const;

    [[nodiscard]] const std::map<std::string, Product, std::less<>>& products() const noexcept {
        return products_;
    }
    [[nodiscard]] const TokenIndex& token_index() const noexcept { return index_; }

    /// Ranks by sum over query tokens of weighted term frequency times
    /// ln(1 + N / df). Ties go to the smaller id; zero scores are dropped.
    /// Throws ValidationError if the query has no tokens or k == 0.
    [[nodiscard]] std::vector<const Product*> search(std::string_view query, std::size_t k,
                                                     const FieldWeights& weights = {}) const;

    [[nodiscard]] double score(const Product& product, const std::vector<std::string>& query_tokens,
                               const FieldWeights& weights = {}) const;

  private:
    std::map<std::string, Product, std::less<>> products_;
    TokenIndex index_;
};

void validate_product(const Product& product);

Product product_from_json(const nlohmann::json& j);
nlohmann::json product_to_json(const Product& product);

/// Reads JSONL, one product per non-blank line. Errors name the 1-based line.
Catalog load_catalog(const std::filesystem::path& path);
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

}  // namespace shopsim
