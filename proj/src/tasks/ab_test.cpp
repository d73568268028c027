// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "shopsim/errors.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/tasks.hpp"

namespace shopsim {

AbResult run_ab_simulation(const EnvVariant& control, const EnvVariant& treatment,
                           const std::vector<std::pair<std::string, PolicyFactory>>& population, std::uint64_t seed,
                           const AbOptions& options) {
    if (population.empty()) throw ValidationError("A/B simulation needs at least one shopper");
    if (!control.catalog || !treatment.catalog) throw ValidationError("A/B variants need catalogs");
    const auto& a = control.catalog->products();
    const auto& b = treatment.catalog->products();
    if (a.size() != b.size() ||
        !std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; }))
        throw ValidationError("A/B variants must share the same product ids");

    std::vector<SessionJob> jobs_c, jobs_t;
    for (std::size_t i = 0; i < population.size(); ++i) {
        const auto& [label, factory] = population[i];
        const auto seed_c = options.shared_seeds ? derive_seed(seed, "ab", i) : derive_seed(seed, "ab/C", i);
        const auto seed_t = options.shared_seeds ? seed_c : derive_seed(seed, "ab/T", i);
        jobs_c.push_back({label, seed_c, factory});
        jobs_t.push_back({label, seed_t, factory});
    }

    AbResult r;
    r.sessions = population.size();
    r.control_transcripts = simulate_sessions(control, jobs_c, options.limits, options.threads);
    r.treatment_transcripts = simulate_sessions(treatment, jobs_t, options.limits, options.threads);
    for (const auto& t : r.control_transcripts) {
        r.sales_control += t.sales();
        r.purchases_control += t.purchased.size();
    }
    for (const auto& t : r.treatment_transcripts) {
        r.sales_treatment += t.sales();
        r.purchases_treatment += t.purchased.size();
    }
    const auto diff = (r.sales_treatment - r.sales_control).cents();
    r.direction = diff > 0 ? 1 : (diff < 0 ? -1 : 0);
    if (r.sales_control.cents() != 0)
        r.delta_pct = 100.0 * static_cast<double>(diff) / static_cast<double>(r.sales_control.cents());
    return r;
}

}  // namespace shopsim
