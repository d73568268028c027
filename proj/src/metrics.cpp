// SPDX-License-Identifier: Apache-2.0
#include "shopsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "shopsim/rng.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

// --- histograms -----------------------------------------------------------------

Histogram Histogram::from_counts(std::vector<std::string> labels, std::vector<std::size_t> counts) {
    if (labels.size() != counts.size() || labels.empty())
        throw ValidationError("histogram needs one count per bin and at least one bin");
    const auto total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total == 0) throw ValidationError("histogram has no observations");
    Histogram h;
    h.bin_labels = std::move(labels);
    h.counts = std::move(counts);
    h.probs.reserve(h.counts.size());
    for (auto c : h.counts) h.probs.push_back(static_cast<double>(c) / static_cast<double>(total));
    return h;
}

Histogram Histogram::from_probs(std::vector<std::string> labels, std::vector<double> probs) {
    if (labels.size() != probs.size() || labels.empty())
        throw ValidationError("histogram needs one probability per bin and at least one bin");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw ValidationError("histogram probabilities must be non-negative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(fmt::format("histogram probabilities sum to {}, not 1", sum));
    Histogram h;
    h.bin_labels = std::move(labels);
    h.probs = std::move(probs);
    return h;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram count_histogram(const std::vector<int>& values, int overflow_at) {
    if (overflow_at <= 0) throw ValidationError("overflow bin must be positive");
    std::vector<std::string> labels;
    for (int i = 0; i < overflow_at; ++i) labels.push_back(std::to_string(i));
    labels.push_back(fmt::format(">={}", overflow_at));
    std::vector<std::size_t> counts(labels.size(), 0);
    for (int v : values) {
        if (v < 0) throw ValidationError("count histogram got a negative value");
        ++counts[static_cast<std::size_t>(std::min(v, overflow_at))];
    }
    return Histogram::from_counts(std::move(labels), std::move(counts));
}

Histogram rank_histogram(const std::vector<int>& ranks, std::size_t n_slots) {
    if (n_slots == 0) throw ValidationError("rank histogram needs at least one slot");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n_slots; ++i) labels.push_back(std::to_string(i));
    std::vector<std::size_t> counts(n_slots, 0);
    for (int r : ranks) {
        if (r < 0 || static_cast<std::size_t>(r) >= n_slots)
            throw ValidationError(fmt::format("rank {} outside 0..{}", r, n_slots - 1));
        ++counts[static_cast<std::size_t>(r)];
    }
    return Histogram::from_counts(std::move(labels), std::move(counts));
}

double discrete_kl(const Histogram& p, const Histogram& q, double epsilon) {
    if (!(epsilon > 0.0)) throw ValidationError("KL smoothing epsilon must be > 0");
    if (p.bin_labels != q.bin_labels) throw ValidationError("KL needs histograms over identical bins");
    const double n = static_cast<double>(p.probs.size());
    const double pz = std::accumulate(p.probs.begin(), p.probs.end(), 0.0) + n * epsilon;
    const double qz = std::accumulate(q.probs.begin(), q.probs.end(), 0.0) + n * epsilon;
    double kl = 0.0;
    for (std::size_t i = 0; i < p.probs.size(); ++i) {
        const double ps = (p.probs[i] + epsilon) / pz;
        const double qs = (q.probs[i] + epsilon) / qz;
        kl += ps * std::log(ps / qs);
    }
    return std::max(kl, 0.0);
}

// --- KDE ------------------------------------------------------------------------

SampleSet::SampleSet(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("sample dimension must be positive");
}

SampleSet::SampleSet(std::size_t dim, std::vector<double> flat) : SampleSet(dim) {
    if (flat.size() % dim != 0) throw ValidationError("flat sample data is not a multiple of the dimension");
    data_ = std::move(flat);
}

SampleSet SampleSet::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("sample set needs at least one point");
    SampleSet s(rows.front().size());
    for (const auto& r : rows) s.add(r);
    return s;
}

void SampleSet::add(std::span<const double> point) {
    if (point.size() != dim_)
        throw ValidationError(fmt::format("point has dimension {}, expected {}", point.size(), dim_));
    data_.insert(data_.end(), point.begin(), point.end());
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double kde_logpdf_unchecked(const SampleSet& samples, double h, std::span<const double> x, std::vector<double>& scratch) {
    const std::size_t n = samples.size();
    const double inv = -0.5 / (h * h);
    scratch.resize(n);
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        scratch[i] = inv * squared_distance(samples.point(i), x);
        m = std::max(m, scratch[i]);
    }
    double sum = 0.0;
    for (double e : scratch) sum += std::exp(e - m);
    const double d = static_cast<double>(samples.dim());
    const double log_norm = 0.5 * d * std::log(2.0 * std::numbers::pi * h * h);
    const double value = m + std::log(sum) - std::log(static_cast<double>(n)) - log_norm;
    if (!std::isfinite(value) || value < kLogDensityFloor) return kLogDensityFloor;
    return value;
}

}  // namespace

double kde_logpdf(const KdeModel& model, std::span<const double> x) {
    if (!(model.bandwidth > 0.0)) throw ValidationError("KDE bandwidth must be > 0");
    if (model.samples.empty()) throw ValidationError("KDE needs at least one sample");
    if (x.size() != model.samples.dim())
        throw ValidationError(fmt::format("point has dimension {}, KDE has {}", x.size(), model.samples.dim()));
    std::vector<double> scratch;
    return kde_logpdf_unchecked(model.samples, model.bandwidth, x, scratch);
}

KlEstimate mc_kl(const SampleSet& p, const SampleSet& q, double bandwidth, int n_mc, int repeats, std::uint64_t seed) {
    if (n_mc <= 0) throw ValidationError("n_mc must be positive");
    if (repeats <= 0) throw ValidationError("repeats must be positive");
    if (!(bandwidth > 0.0)) throw ValidationError("KDE bandwidth must be > 0");
    if (p.empty() || q.empty()) throw ValidationError("mc_kl needs non-empty sample sets");
    if (p.dim() != q.dim()) throw ValidationError("mc_kl needs sample sets of equal dimension");

    KlEstimate est;
    std::vector<double> x(p.dim());
    std::vector<double> scratch;
    for (int r = 0; r < repeats; ++r) {
        Rng rng(derive_seed(seed, "mc_kl", static_cast<std::uint64_t>(r)));
        double acc = 0.0;
        for (int i = 0; i < n_mc; ++i) {
            const auto base = p.point(rng.uniform_index(p.size()));
            for (std::size_t d = 0; d < x.size(); ++d) x[d] = base[d] + bandwidth * rng.normal();
            acc += kde_logpdf_unchecked(p, bandwidth, x, scratch) - kde_logpdf_unchecked(q, bandwidth, x, scratch);
        }
        est.repeats.push_back(acc / n_mc);
    }
    est.mean = mean_of(est.repeats);
    est.stdev = sample_stdev(est.repeats);
    return est;
}

// --- similarity, diversity, aggregation ------------------------------------------

Cosine cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw ValidationError(fmt::format("cosine needs equal dimensions, got {} and {}", a.size(), b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return {0.0, true};
    return {std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0), false};
}

double ttr(const std::vector<std::string>& texts) {
    std::set<std::string> types;
    std::size_t tokens = 0;
    for (const auto& t : texts) {
        for (auto& tok : tokenize(t)) {
            types.insert(std::move(tok));
            ++tokens;
        }
    }
    if (tokens == 0) throw ValidationError("TTR needs at least one token");
    return static_cast<double>(types.size()) / static_cast<double>(tokens);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("mean of an empty list");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stdev(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<Stratum> stratify(const std::vector<double>& keys, const std::vector<double>& values, int n_bins) {
    if (keys.size() != values.size()) throw ValidationError("stratify needs one key per value");
    if (n_bins <= 0) throw ValidationError("stratify needs at least one bin");
    std::vector<std::size_t> order(keys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

    std::vector<Stratum> out;
    const std::size_t n = keys.size();
    for (int b = 0; b < n_bins; ++b) {
        const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_bins);
        const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(n_bins);
        if (lo == hi) continue;
        Stratum s;
        s.index = b;
        s.key_min = keys[order[lo]];
        s.key_max = keys[order[hi - 1]];
        s.count = hi - lo;
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) sum += values[order[i]];
        s.mean = sum / static_cast<double>(s.count);
        out.push_back(s);
    }
    return out;
}

}  // namespace shopsim
