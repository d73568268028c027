// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "shopsim/tasks.hpp"

namespace shopsim {

nlohmann::json histogram_to_json(const Histogram& h);
nlohmann::json kl_to_json(const KlEstimate& k);

nlohmann::json to_json(const QueryGenResult& r);
nlohmann::json to_json(const std::vector<ItemSelectionArm>& arms, std::size_t n_cases);
nlohmann::json to_json(const ItemSelectionGroupResult& r);
nlohmann::json to_json(const SessionGenResult& r);
nlohmann::json to_json(const AbResult& r);
nlohmann::json to_json(const std::vector<DiceRow>& rows);

// CSV tables for plotting. Each starts with a header row.
std::string similarity_by_perplexity_csv(const QueryGenResult& r);
std::string bandwidth_sweep_csv(const QueryGenResult& r);
std::string rank_distribution_csv(const ItemSelectionGroupResult& r);
std::string session_histograms_csv(const SessionGenResult& r);
std::string dice_csv(const std::vector<DiceRow>& rows);

/// Output of one run: report.json plus named CSV files and the manifest.
struct RunArtifacts {
    nlohmann::json report = nlohmann::json::object();
    nlohmann::json manifest = nlohmann::json::object();
    std::map<std::string, std::string> csv;  // file name -> contents
};

/// Writes report.json, manifest.json and every CSV under `dir`.
void write_run(const RunArtifacts& run, const std::filesystem::path& dir);

/// Renders report.json as a short plain-text summary.
std::string summarize_report(const nlohmann::json& report);

}  // namespace shopsim
