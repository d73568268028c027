// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shopsim/errors.hpp"

namespace shopsim {

/// Relative frequencies over labelled bins.
struct Histogram {
    std::vector<std::string> bin_labels;
    std::vector<double> probs;
    std::vector<std::size_t> counts;

    /// Throws ValidationError when the counts are all zero or sizes differ.
    static Histogram from_counts(std::vector<std::string> labels, std::vector<std::size_t> counts);
    /// Probabilities must be non-negative and sum to 1 within 1e-9. Counts stay empty.
    static Histogram from_probs(std::vector<std::string> labels, std::vector<double> probs);

    [[nodiscard]] std::size_t total() const;
};

/// Bins "0".."overflow_at-1" plus a final ">=overflow_at" bin. Negative values are rejected.
Histogram count_histogram(const std::vector<int>& values, int overflow_at = 20);
/// Bins "0".."n_slots-1". Values outside the range are rejected.
Histogram rank_histogram(const std::vector<int>& ranks, std::size_t n_slots);

inline constexpr double kDefaultKlEpsilon = 1e-6;

/// KL(p || q) in nats after adding epsilon to every bin of both and renormalizing.
/// Throws ValidationError on mismatched bins or epsilon <= 0.
double discrete_kl(const Histogram& p, const Histogram& q, double epsilon = kDefaultKlEpsilon);

/// Points of a common dimension, stored row-major.
class SampleSet {
  public:
    explicit SampleSet(std::size_t dim);
    SampleSet(std::size_t dim, std::vector<double> flat);
    static SampleSet from_rows(const std::vector<std::vector<double>>& rows);

    void add(std::span<const double> point);
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size() / dim_; }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }
    [[nodiscard]] std::span<const double> point(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  private:
    std::size_t dim_;
    std::vector<double> data_;
};

/// Gaussian KDE with covariance h^2 I.
struct KdeModel {
    const SampleSet& samples;
    double bandwidth;
};

/// Lower bound returned instead of -inf.
inline constexpr double kLogDensityFloor = -1e300;

/// log of the mean Gaussian kernel, computed with max-shifted log-sum-exp.
double kde_logpdf(const KdeModel& model, std::span<const double> x);

struct KlEstimate {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation over repeats
    std::vector<double> repeats;
};

/// Monte Carlo KL(p || q) between the two fitted KDEs. Each repeat draws
/// n_mc points from the p-KDE (a random training point plus N(0, h^2 I)
/// noise) with its own sub-seed of `seed`.
KlEstimate mc_kl(const SampleSet& p, const SampleSet& q, double bandwidth, int n_mc, int repeats, std::uint64_t seed);

struct Cosine {
    double value = 0.0;
    bool degenerate = false;  // one side was the zero vector; value is 0
};

Cosine cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Distinct tokens over total tokens across the corpus.
double ttr(const std::vector<std::string>& texts);

struct IndividualScore {
    std::vector<double> per_case;
    double aggregate = 0.0;
};

using Aggregator = std::function<double(const std::vector<double>&)>;

double mean_of(const std::vector<double>& values);
double sample_stdev(const std::vector<double>& values);

/// Compares agent[i] with human[i] and folds the comparison values.
template <class A, class H, class Compare>
IndividualScore aggregate_individual(const std::vector<A>& agent, const std::vector<H>& human, Compare&& compare,
                                     const Aggregator& aggregate = mean_of) {
    if (agent.empty()) throw ValidationError("individual metric needs at least one pair");
    if (agent.size() != human.size()) throw ValidationError("individual metric needs one agent output per human output");
    IndividualScore score;
    score.per_case.reserve(agent.size());
    for (std::size_t i = 0; i < agent.size(); ++i) score.per_case.push_back(static_cast<double>(compare(agent[i], human[i])));
    score.aggregate = aggregate(score.per_case);
    return score;
}

struct Stratum {
    int index = 0;
    double key_min = 0.0;
    double key_max = 0.0;
    std::size_t count = 0;
    double mean = 0.0;
};

/// Splits cases into `n_bins` equal-count bins by ascending key (ties by
/// position) and reports the mean value per bin. Empty bins are omitted.
std::vector<Stratum> stratify(const std::vector<double>& keys, const std::vector<double>& values, int n_bins = 5);

}  // namespace shopsim
