// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "shopsim/http_backend.hpp"

namespace shopsim {

class Embedder {
  public:
    virtual ~Embedder() = default;
    /// Unit-norm vector of dim() entries. Throws ValidationError for empty text.
    virtual std::vector<double> embed(std::string_view text) = 0;
    virtual std::vector<std::vector<double>> embed_all(const std::vector<std::string>& texts);
    [[nodiscard]] virtual std::size_t dim() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Bag-of-tokens projector: each token lands in an FNV bucket with a hashed
/// sign, then the sum is normalized. Word order is ignored.
class HashingEmbedder : public Embedder {
  public:
    explicit HashingEmbedder(std::size_t dim = 384);

    std::vector<double> embed(std::string_view text) override;
    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] std::string name() const override { return "hashing"; }

  private:
    std::size_t dim_;
};

/// POST {"texts": [...]} -> {"vectors": [[...], ...]}. Returned vectors are re-normalized.
class RemoteEmbedder : public Embedder {
  public:
    RemoteEmbedder(std::string url, std::size_t dim, std::chrono::milliseconds timeout = std::chrono::seconds(60));

    std::vector<double> embed(std::string_view text) override;
    std::vector<std::vector<double>> embed_all(const std::vector<std::string>& texts) override;
    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] std::string name() const override { return "remote"; }

  private:
    Endpoint endpoint_;
    std::size_t dim_;
    std::chrono::milliseconds timeout_;
};

class PerplexityScorer {
  public:
    virtual ~PerplexityScorer() = default;
    /// exp of the mean negative log-probability of the target tokens given
    /// the context. Throws ValidationError for an empty target.
    virtual double perplexity(std::string_view context, std::string_view target) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// Word bigram model with add-one smoothing. Every text starts with "<s>";
/// P(w | v) = (c(v, w) + 1) / (c(v) + V) where c(v) counts bigrams starting
/// at v and V is the training vocabulary plus one slot for unseen words.
class BigramLm : public PerplexityScorer {
  public:
    explicit BigramLm(const std::vector<std::string>& corpus);

    double perplexity(std::string_view context, std::string_view target) override;
    [[nodiscard]] std::string name() const override { return "bigram"; }

    [[nodiscard]] double probability(std::string_view prev, std::string_view word) const;
    [[nodiscard]] std::size_t vocabulary_size() const noexcept { return vocab_size_; }

    static constexpr std::string_view kStart = "<s>";

  private:
    std::map<std::string, std::map<std::string, std::size_t, std::less<>>, std::less<>> bigrams_;
    std::map<std::string, std::size_t, std::less<>> history_counts_;
    std::size_t vocab_size_ = 0;
};

/// POST {"context", "target"} -> {"ppl"}.
class RemotePerplexity : public PerplexityScorer {
  public:
    explicit RemotePerplexity(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(60));

    double perplexity(std::string_view context, std::string_view target) override;
    [[nodiscard]] std::string name() const override { return "remote"; }

  private:
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
};

}  // namespace shopsim
