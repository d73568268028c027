// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace shopsim {

/// Every setting the command line understands. Keys double as flag names
/// (underscores become dashes), SHOPSIM_<KEY> environment variables and
/// config-file keys.
struct RunConfig {
    std::string catalog;
    std::string sessions;
    std::string personas;   // persona directory; missing personas are mined
    std::string interests;  // one interest per line; empty = catalog interest tags
    std::string backend = "mock";
    std::uint64_t seed = 0;
    double temperature = 0.0;
    double session_temperature = 0.5;
    double bandwidth = 0.1;
    int mc_samples = 1000;
    int mc_repeats = 5;
    double epsilon = 1e-6;
    std::string out = "runs";
    std::string run_id;  // empty = derived from the task and config
    int jobs = 1;
    std::string cutoff;  // YYYY-MM-DD; empty = six months before the last session
    int max_shoppers = 0;
    int n_cases = 0;
    int pool_size = 1000;
    int rank_k = 10;
    int sessions_per_shopper = 1;
    int max_steps = 40;
    int n_tosses = 1000;
    std::string control;    // A/B variant files
    std::string treatment;
    std::string intention;
    std::string embedder_url;
    int embedder_dim = 384;
    std::string perplexity_url;
    int retry_budget = 3;
    int timeout_ms = 60'000;
    int max_in_flight = 4;
    bool audit = false;

    void validate() const;
};

/// Names of all RunConfig keys, in declaration order.
const std::vector<std::string>& config_keys();

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// key = value lines; blank lines and '#' comments are skipped. Throws
/// ValidationError for malformed lines and unknown keys.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Flags win over SHOPSIM_<KEY> variables, which win over the config file,
/// which wins over the defaults. Throws ValidationError for unparseable or
/// out-of-range values.
RunConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                         const std::map<std::string, std::string>& file);

nlohmann::json config_to_json(const RunConfig& config);

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 for invalid input or usage, 2 for backend failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env);

}  // namespace shopsim
