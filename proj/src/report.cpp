// SPDX-License-Identifier: Apache-2.0
#include "shopsim/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "shopsim/errors.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json histogram_to_json(const Histogram& h) {
    json j{{"bins", h.bin_labels}, {"probs", h.probs}};
    if (!h.counts.empty()) j["counts"] = h.counts;
    return j;
}

json kl_to_json(const KlEstimate& k) {
    json repeats = json::array();
    for (double r : k.repeats) repeats.push_back(finite_or_null(r));
    return {{"mean", finite_or_null(k.mean)}, {"stdev", finite_or_null(k.stdev)}, {"repeats", repeats}};
}

json to_json(const QueryGenResult& r) {
    json arms = json::object();
    for (const auto& a : r.arms) {
        json strata = json::array();
        for (const auto& s : a.by_perplexity)
            strata.push_back({{"bin", s.index}, {"ppl_min", s.key_min}, {"ppl_max", s.key_max}, {"count", s.count},
                              {"mean_similarity", s.mean}});
        json sweep = json::object();
        for (const auto& [b, k] : a.bandwidth_sweep) sweep[fmt::format("{}", b)] = kl_to_json(k);
        arms[a.arm] = {{"mean_similarity", a.similarity.aggregate},
                       {"per_case_similarity", a.similarity.per_case},
                       {"similarity_by_perplexity", strata},
                       {"group_kl", kl_to_json(a.group_kl)},
                       {"bandwidth_sweep", sweep},
                       {"failures", a.failures}};
    }
    json cases = json::array();
    for (std::size_t i = 0; i < r.cases.size(); ++i)
        cases.push_back({{"customer_id", r.cases[i].customer_id},
                         {"human_query", r.cases[i].human_query},
                         {"product_id", r.cases[i].product_id},
                         {"human_perplexity", r.human_perplexity[i]}});
    return {{"cases", cases}, {"arms", arms}, {"published_reference", published_reference("query_gen")}};
}

json to_json(const std::vector<ItemSelectionArm>& arms, std::size_t n_cases) {
    json out = json::object();
    for (const auto& a : arms)
        out[a.arm] = {{"accuracy", a.accuracy.aggregate}, {"failures", a.failures}, {"chosen_positions", a.chosen}};
    return {{"cases", n_cases}, {"arms", out}, {"published_reference", published_reference("item_select_individual")}};
}

json to_json(const ItemSelectionGroupResult& r) {
    json arms = json::object();
    for (const auto& a : r.arms) {
        arms[a.arm] = {{"kl", optional_number(a.kl)},
                       {"failures", a.failures},
                       {"histogram", a.histogram ? histogram_to_json(*a.histogram) : json(nullptr)}};
    }
    return {{"slots", r.slots},
            {"observations", r.observations.size()},
            {"human", histogram_to_json(r.human)},
            {"arms", arms},
            {"published_reference", published_reference("item_select_group")}};
}

json to_json(const SessionGenResult& r) {
    const auto hists = [](const SessionHistograms& h) {
        return json{{"searches", histogram_to_json(h.searches)},
                    {"views", histogram_to_json(h.views)},
                    {"purchases", histogram_to_json(h.purchases)}};
    };
    json arms = json::object();
    for (const auto& a : r.arms) {
        arms[a.arm] = {{"sessions", a.sessions},
                       {"kl", {{"searches", a.kl_searches}, {"views", a.kl_views}, {"purchases", a.kl_purchases}}},
                       {"query_ttr", optional_number(a.query_ttr)},
                       {"product_ttr", optional_number(a.product_ttr)},
                       {"histograms", hists(a.histograms)}};
    }
    return {{"human",
             {{"sessions", r.human_sessions},
              {"query_ttr", optional_number(r.human_query_ttr)},
              {"product_ttr", optional_number(r.human_product_ttr)},
              {"histograms", hists(r.human)}}},
            {"arms", arms},
            {"published_reference", published_reference("session_gen")}};
}

json to_json(const AbResult& r) {
    return {{"sessions_per_arm", r.sessions},
            {"sales_control", r.sales_control.dollars()},
            {"sales_treatment", r.sales_treatment.dollars()},
            {"purchases_control", r.purchases_control},
            {"purchases_treatment", r.purchases_treatment},
            {"delta_pct", optional_number(r.delta_pct)},
            {"direction", r.direction}};
}

json to_json(const std::vector<DiceRow>& rows) {
    json out = json::array();
    for (const auto& row : rows)
        out.push_back({{"system", row.system}, {"mse", row.mse}, {"accuracy", row.accuracy}, {"kl", row.kl}});
    return {{"systems", out}, {"published_reference", published_reference("dice_demo")}};
}

std::string similarity_by_perplexity_csv(const QueryGenResult& r) {
    std::string out = "arm,bin,ppl_min,ppl_max,count,mean_similarity\n";
    for (const auto& a : r.arms)
        for (const auto& s : a.by_perplexity)
            out += fmt::format("{},{},{},{},{},{}\n", a.arm, s.index, s.key_min, s.key_max, s.count, s.mean);
    return out;
}

std::string bandwidth_sweep_csv(const QueryGenResult& r) {
    std::string out = "arm,bandwidth,kl_mean,kl_stdev\n";
    for (const auto& a : r.arms)
        for (const auto& [b, k] : a.bandwidth_sweep) out += fmt::format("{},{},{},{}\n", a.arm, b, k.mean, k.stdev);
    return out;
}

std::string rank_distribution_csv(const ItemSelectionGroupResult& r) {
    std::string out = "population,rank,prob\n";
    for (std::size_t i = 0; i < r.human.probs.size(); ++i) out += fmt::format("human,{},{}\n", i, r.human.probs[i]);
    for (const auto& a : r.arms) {
        if (!a.histogram) continue;
        for (std::size_t i = 0; i < a.histogram->probs.size(); ++i)
            out += fmt::format("{},{},{}\n", a.arm, i, a.histogram->probs[i]);
    }
    return out;
}

std::string session_histograms_csv(const SessionGenResult& r) {
    std::string out = "population,stat,bin,prob\n";
    const auto emit = [&](const std::string& who, const SessionHistograms& h) {
        for (const auto& [name, hist] : {std::pair<const char*, const Histogram*>{"searches", &h.searches},
                                         {"views", &h.views},
                                         {"purchases", &h.purchases}}) {
            for (std::size_t i = 0; i < hist->probs.size(); ++i)
                out += fmt::format("{},{},{},{}\n", who, name, hist->bin_labels[i], hist->probs[i]);
        }
    };
    emit("human", r.human);
    for (const auto& a : r.arms) emit(a.arm, a.histograms);
    return out;
}

std::string dice_csv(const std::vector<DiceRow>& rows) {
    std::string out = "system,mse,accuracy,kl\n";
    for (const auto& row : rows) out += fmt::format("{},{},{},{}\n", row.system, row.mse, row.accuracy, row.kl);
    return out;
}

void write_run(const RunArtifacts& run, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw ValidationError(fmt::format("cannot write '{}'", (dir / name).string()));
        out << content;
    };
    write("report.json", run.report.dump(2) + "\n");
    write("manifest.json", run.manifest.dump(2) + "\n");
    for (const auto& [name, content] : run.csv) write(name, content);
}

namespace {

void summarize(const json& node, const std::string& path, std::string& out, int depth) {
    if (depth > 5) return;
    if (node.is_object()) {
        for (const auto& [k, v] : node.items()) {
            if (k == "published_reference" || k == "histograms" || k == "histogram" || k == "human_perplexity" ||
                k == "repeats" || k == "per_case_similarity" || k == "chosen_positions" || k == "cases" ||
                k == "bandwidth_sweep" || k == "similarity_by_perplexity" || k == "probs" || k == "counts")
                continue;
            summarize(v, path.empty() ? k : path + "." + k, out, depth + 1);
        }
    } else if (node.is_array()) {
        if (node.size() <= 8)
            for (std::size_t i = 0; i < node.size(); ++i)
                summarize(node[i], fmt::format("{}[{}]", path, i), out, depth + 1);
    } else if (node.is_number_float()) {
        out += fmt::format("{:<56} {:.6g}\n", path, node.get<double>());
    } else if (!node.is_null()) {
        out += fmt::format("{:<56} {}\n", path, node.dump());
    }
}

}  // namespace

std::string summarize_report(const json& report) {
    std::string out;
    summarize(report, "", out, 0);
    return out;
}

}  // namespace shopsim
