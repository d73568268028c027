// SPDX-License-Identifier: Apache-2.0
#include "shopsim/text_models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

using nlohmann::json;

std::vector<std::vector<double>> Embedder::embed_all(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

namespace {

void normalize(std::vector<double>& v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (double& x : v) x /= norm;
}

}  // namespace

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

std::vector<double> HashingEmbedder::embed(std::string_view text) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) throw ValidationError("cannot embed text without tokens");
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : tokens) {
        const auto h = fnv1a64(t);
        v[h % dim_] += (mix64(h) & 1U) ? 1.0 : -1.0;
    }
    // Tokens can cancel out exactly; fall back to a fixed bucket per text.
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }))
        v[fnv1a64(join(tokens, " ")) % dim_] = 1.0;
    normalize(v);
    return v;
}

RemoteEmbedder::RemoteEmbedder(std::string url, std::size_t dim, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(url)), dim_(dim), timeout_(timeout) {
    if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

std::vector<double> RemoteEmbedder::embed(std::string_view text) { return embed_all({std::string(text)}).front(); }

std::vector<std::vector<double>> RemoteEmbedder::embed_all(const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
        if (trim(t).empty()) throw ValidationError("cannot embed empty text");
    }
    if (texts.empty()) return {};
    const json response = post_json(endpoint_, json{{"texts", texts}}, timeout_);
    if (!response.contains("vectors") || !response.at("vectors").is_array())
        throw ProtocolViolation("embedding service response has no 'vectors' array");
    const auto& rows = response.at("vectors");
    if (rows.size() != texts.size())
        throw ProtocolViolation(fmt::format("embedding service returned {} vectors for {} texts", rows.size(), texts.size()));
    std::vector<std::vector<double>> out;
    for (const auto& row : rows) {
        std::vector<double> v;
        try {
            v = row.get<std::vector<double>>();
        } catch (const json::exception&) {
            throw ProtocolViolation("embedding vector is not a list of numbers");
        }
        if (v.size() != dim_)
            throw ProtocolViolation(fmt::format("embedding has dimension {}, expected {}", v.size(), dim_));
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

BigramLm::BigramLm(const std::vector<std::string>& corpus) {
    std::set<std::string> vocab;
    for (const auto& text : corpus) {
        std::string prev(kStart);
        for (auto& tok : tokenize(text)) {
            ++bigrams_[prev][tok];
            ++history_counts_[prev];
            vocab.insert(tok);
            prev = std::move(tok);
        }
    }
    vocab_size_ = vocab.size() + 1;
}

double BigramLm::probability(std::string_view prev, std::string_view word) const {
    std::size_t pair = 0;
    std::size_t history = 0;
    if (const auto h = history_counts_.find(prev); h != history_counts_.end()) {
        history = h->second;
        const auto& row = bigrams_.find(prev)->second;
        if (const auto w = row.find(word); w != row.end()) pair = w->second;
    }
    return static_cast<double>(pair + 1) / static_cast<double>(history + vocab_size_);
}

double BigramLm::perplexity(std::string_view context, std::string_view target) {
    const auto target_tokens = tokenize(target);
    if (target_tokens.empty()) throw ValidationError("perplexity needs a non-empty target");
    std::string prev(kStart);
    for (auto& tok : tokenize(context)) prev = std::move(tok);
    double nll = 0.0;
    for (const auto& tok : target_tokens) {
        nll -= std::log(probability(prev, tok));
        prev = tok;
    }
    return std::exp(nll / static_cast<double>(target_tokens.size()));
}

RemotePerplexity::RemotePerplexity(std::string url, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(url)), timeout_(timeout) {}

double RemotePerplexity::perplexity(std::string_view context, std::string_view target) {
    if (trim(target).empty()) throw ValidationError("perplexity needs a non-empty target");
    const json response = post_json(endpoint_, json{{"context", context}, {"target", target}}, timeout_);
    if (!response.contains("ppl") || !response.at("ppl").is_number())
        throw ProtocolViolation("perplexity service response has no numeric 'ppl'");
    const double ppl = response.at("ppl").get<double>();
    if (!(ppl > 0.0) || !std::isfinite(ppl)) throw ProtocolViolation(fmt::format("perplexity {} is not positive", ppl));
    return ppl;
}

}  // namespace shopsim
