// SPDX-License-Identifier: Apache-2.0
// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "fixtures.hpp"
#include "shopsim/cli.hpp"
#include "shopsim/errors.hpp"
#include "shopsim/metrics.hpp"
#include "shopsim/shopper_agent.hpp"
#include "shopsim/synth.hpp"
#include "shopsim/tasks.hpp"
#include "shopsim/text.hpp"

using namespace shopsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- 1 ------------------------------------------------------------------------------

Outcome dice() {
    Outcome o;
    const auto t0 = Clock::now();
    double mse_a = 0, mse_b = 0, acc_a = 0, acc_b = 0, kl_a = 0, kl_b = 0;
    constexpr int kSeeds = 10;
    for (int s = 0; s < kSeeds; ++s) {
        const auto rows = run_dice_demo(1000, kDefaultKlEpsilon, static_cast<std::uint64_t>(s));
        for (const auto& r : rows) {
            if (r.system == "A") {
                mse_a += r.mse;
                acc_a += r.accuracy;
                kl_a += r.kl;
            } else {
                mse_b += r.mse;
                acc_b += r.accuracy;
                kl_b += r.kl;
            }
        }
    }
    mse_a /= kSeeds, mse_b /= kSeeds, acc_a /= kSeeds, acc_b /= kSeeds, kl_a /= kSeeds, kl_b /= kSeeds;
    const double elapsed = seconds_since(t0);
    o.detail = fmt::format("A mse={:.3f} acc={:.3f} kl={:.3f}; B mse={:.3f} acc={:.3f} kl={:.4f}; {:.3f}s", mse_a, acc_a,
                           kl_a, mse_b, acc_b, kl_b, elapsed);
    Outcome checks;
    checks.require(mse_a >= 1.8 && mse_a <= 2.2, "A mse");
    checks.require(mse_b >= 3.6 && mse_b <= 4.4, "B mse");
    checks.require(acc_a >= 0.17 && acc_a <= 0.23, "A accuracy");
    checks.require(acc_b >= 0.17 && acc_b <= 0.23, "B accuracy");
    checks.require(kl_b < 0.05, "B kl");
    checks.require(kl_a > 5.0 && kl_a > 100.0 * kl_b, "A kl");
    checks.require(elapsed < 1.0, "runtime");
    o.pass = checks.pass;
    if (!checks.pass) o.detail += " | failed: " + checks.detail;
    return o;
}

// --- 2 ------------------------------------------------------------------------------

Histogram random_histogram(Rng& rng, std::size_t bins) {
    std::vector<std::string> labels;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    for (std::size_t i = 0; i < bins; ++i) {
        labels.push_back(std::to_string(i));
        counts.push_back(static_cast<std::size_t>(rng.uniform_int(0, 50)));
        total += counts.back();
    }
    if (total == 0) counts[0] = 1;
    return Histogram::from_counts(labels, counts);
}

Outcome discrete_kl_exactness() {
    Outcome o;
    const auto p = Histogram::from_probs({"a", "b"}, {0.9, 0.1});
    const auto q = Histogram::from_probs({"a", "b"}, {0.5, 0.5});
    const double oracle = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
    const double got = discrete_kl(p, q, 1e-12);
    o.require(std::abs(got - oracle) <= 1e-9, fmt::format("hand value {:.12f} vs {:.12f}", got, oracle));
    o.require(std::abs(oracle - 0.368064) < 5e-7, "oracle rounding");

    Rng rng(2024);
    double worst_self = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto h = random_histogram(rng, static_cast<std::size_t>(rng.uniform_int(2, 12)));
        worst_self = std::max(worst_self, std::abs(discrete_kl(h, h)));
    }
    o.require(worst_self == 0.0, fmt::format("self kl {}", worst_self));

    double min_pair = 1.0;
    for (int i = 0; i < 1000; ++i) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 12));
        const auto a = random_histogram(rng, n);
        const auto b = random_histogram(rng, n);
        min_pair = std::min(min_pair, discrete_kl(a, b));
    }
    o.require(min_pair >= 0.0, fmt::format("negative kl {}", min_pair));
    o.detail = fmt::format("kl={:.10f} self-max={} pair-min={:.3g}", got, worst_self, min_pair) +
               (o.pass ? "" : " | " + o.detail);
    return o;
}

// --- 3 ------------------------------------------------------------------------------

SampleSet gaussian_2d(std::size_t n, double shift_x, std::uint64_t seed) {
    Rng rng(seed);
    SampleSet s(2);
    for (std::size_t i = 0; i < n; ++i) {
        const double pt[2] = {rng.normal() + shift_x, rng.normal()};
        s.add(pt);
    }
    return s;
}

Outcome mc_kde_kl() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto p = gaussian_2d(2000, 0.0, 1);
    const auto q = gaussian_2d(2000, 1.0, 2);
    const auto est = mc_kl(p, q, 0.3, 1000, 5, 3);
    o.require(std::abs(est.mean - 0.5) <= 0.2, fmt::format("estimate {:.3f}", est.mean));

    const auto self = mc_kl(p, p, 0.3, 1000, 5, 4);
    o.require(std::abs(self.mean) <= 3.0 * self.stdev, fmt::format("self {:.4f} sd {:.4f}", self.mean, self.stdev));

    std::vector<double> by_shift;
    for (double shift : {0.5, 1.0, 2.0}) by_shift.push_back(mc_kl(p, gaussian_2d(2000, shift, 5), 0.3, 1000, 5, 6).mean);
    o.require(by_shift[0] < by_shift[1] && by_shift[1] < by_shift[2], "not monotone in shift");
    const double elapsed = seconds_since(t0);
    o.require(elapsed < 30.0, "runtime");
    const std::string failed = o.detail;
    o.detail = fmt::format("kl={:.3f}±{:.3f} self={:.4f}±{:.4f} shifts=[{:.3f}, {:.3f}, {:.3f}] {:.2f}s", est.mean,
                           est.stdev, self.mean, self.stdev, by_shift[0], by_shift[1], by_shift[2], elapsed) +
               (o.pass ? "" : " | " + failed);
    return o;
}

// --- 4 ------------------------------------------------------------------------------

Outcome bandwidth_ordering() {
    Outcome o;
    const auto human = gaussian_2d(500, 0.0, 11);
    const auto near = gaussian_2d(500, 0.5, 12);
    const auto far = gaussian_2d(500, 2.0, 13);
    std::string rows;
    for (double h : {0.01, 0.1, 1.0}) {
        const double kn = mc_kl(near, human, h, 500, 3, 21).mean;
        const double kf = mc_kl(far, human, h, 500, 3, 22).mean;
        rows += fmt::format(" h={}: near={:.3g} far={:.3g}", h, kn, kf);
        o.require(kn < kf, fmt::format("ordering flipped at h={}", h));
    }
    const std::string failed = o.detail;
    o.detail = rows.substr(1) + (o.pass ? "" : " | " + failed);
    return o;
}

// --- 5 ------------------------------------------------------------------------------

Outcome pair_mining() {
    Outcome o;
    std::vector<Session> fixture = {fixtures::example_0910(), fixtures::example_0912()};
    Rng rng(55);
    while (fixture.size() < 50) {
        const int day = rng.uniform_int(1, 28);
        fixture.push_back(fixtures::random_session(rng, "c" + std::to_string(fixture.size() % 7),
                                                   fmt::format("2024-08-{:02d}", day)));
    }
    std::size_t mismatches = 0, pairs = 0;
    for (const auto& s : fixture) {
        const auto got = mine_pair(s);
        const auto want = fixtures::oracle_pair(s);
        mismatches += got != want;
        pairs += want.has_value();
    }
    o.require(mismatches == 0, fmt::format("{} mismatches", mismatches));
    o.require(!mine_pair(fixtures::example_0910()).has_value(), "2024-09-10 session produced a pair");
    const auto later = mine_pair(fixtures::example_0912());
    o.require(!later.has_value(), "2024-09-12 session produced a pair");
    const std::string failed = o.detail;
    o.detail = fmt::format("{} sessions, {} oracle pairs, {} mismatches", fixture.size(), pairs, mismatches) +
               (o.pass ? "" : " | " + failed);
    return o;
}

// --- 6 ------------------------------------------------------------------------------

std::vector<Shopper> synth_population(const SynthData& data) {
    const auto histories = split_histories(data.sessions, six_months_before(latest_date(data.sessions)));
    std::map<std::string, const SynthShopper*> by_id;
    for (const auto& s : data.shoppers) by_id[s.customer_id] = &s;
    std::vector<Shopper> out;
    for (const auto& h : histories) {
        Shopper s{h.customer_id, h, {}};
        s.persona.profile.interests = by_id.at(h.customer_id)->interests;
        s.persona.rendered_history = render_history(h);
        out.push_back(std::move(s));
    }
    return out;
}

MockBackend::Responder uniform_title_responder(std::uint64_t seed) {
    auto rng = std::make_shared<Rng>(seed);
    return [rng](const ChatRequest& req) {
        const auto& text = req.messages.back().content;
        const auto begin = text.find("<items>\n");
        const auto end = text.find("\n</items>", begin);
        std::vector<std::string> titles;
        if (begin != std::string::npos && end != std::string::npos) {
            std::istringstream in(text.substr(begin + 8, end - begin - 8));
            std::string line;
            while (std::getline(in, line))
                if (line.rfind("- ", 0) == 0) titles.push_back(line.substr(2));
        }
        nlohmann::json answer = {{"title", titles.empty() ? "" : titles[rng->uniform_index(titles.size())]},
                                 {"reason", "random"}};
        return ChatReply{answer.dump(), {}};
    };
}

Outcome item_selection_construction() {
    Outcome o;
    SynthOptions so;
    so.n_products = 800;
    so.n_customers = 240;
    so.seed = 606;
    const auto data = generate_synthetic(so);
    const auto population = synth_population(data);

    std::size_t warnings = 0;
    ItemSelectionBuildOptions bo;
    bo.n_cases = 500;
    bo.seed = 17;
    const auto cases = build_item_selection_cases(population, data.catalog, bo, [&](const std::string&) { ++warnings; });
    o.require(cases.size() == 500, fmt::format("{} cases", cases.size()));

    std::map<std::string, std::set<std::string>> interests;
    for (const auto& s : data.shoppers)
        for (const auto& i : s.interests) interests[s.customer_id].insert(to_lower(i));

    std::size_t disjoint_violations = 0, scrub_hits = 0;
    for (const auto& c : cases) {
        std::set<std::string> forbidden{c.ground_truth};
        for (const auto& d : c.distractors) {
            forbidden.insert(d);
            for (const auto& tag : data.catalog.get_product(d).interest_tags)
                disjoint_violations += interests[c.customer_id].count(to_lower(tag));
        }
        for (const auto& s : c.scrubbed_history.recent_sessions)
            for (const auto& a : s.actions) scrub_hits += forbidden.count(a.payload);
        for (const auto& a : c.scrubbed_history.older_purchases) scrub_hits += forbidden.count(a.payload);
    }
    o.require(disjoint_violations == 0, fmt::format("{} interest overlaps", disjoint_violations));
    o.require(scrub_hits == 0, fmt::format("{} scrubbed-history hits", scrub_hits));

    ChatGateway gateway(std::make_shared<MockBackend>(uniform_title_responder(99)), GatewayOptions{});
    TaskContext ctx{data.catalog, gateway, 5, {}, {}, 1, {}};
    const auto arms = run_item_selection_individual(population, cases, ctx, ablation_arms());
    std::vector<double> correct;
    std::size_t failures = 0;
    for (const auto& arm : arms) {
        correct.insert(correct.end(), arm.accuracy.per_case.begin(), arm.accuracy.per_case.end());
        failures += arm.failures;
    }
    const double accuracy = mean_of(correct);
    o.require(failures == 0, fmt::format("{} unusable answers", failures));
    o.require(std::abs(accuracy - 0.25) <= 0.03, fmt::format("random accuracy {:.3f}", accuracy));
    const std::string failed = o.detail;
    o.detail = fmt::format("{} cases ({} skip warnings), overlaps={}, scrub hits={}, random accuracy={:.4f} over {} answers",
                           cases.size(), warnings, disjoint_violations, scrub_hits, accuracy, correct.size()) +
               (o.pass ? "" : " | " + failed);
    return o;
}

// --- 7 ------------------------------------------------------------------------------

int cli(const std::vector<std::string>& args, std::string* err_out = nullptr) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err, [](const std::string&) -> std::optional<std::string> { return std::nullopt; });
    if (err_out) *err_out = err.str();
    return code;
}

Outcome hermetic_end_to_end() {
    Outcome o;
    fixtures::TempDir dir("acceptance-e2e");
    SynthOptions so;
    so.n_products = 300;
    so.n_customers = 20;
    so.min_sessions = 5;
    so.max_sessions = 5;
    so.seed = 77;
    const auto data = generate_synthetic(so);
    write_synthetic(data, dir.path());
    fixtures::write_text(dir / "c.json", R"({"label": "C"})");
    fixtures::write_text(dir / "t.json", R"({"label": "T", "ranker_params": {"title": 1, "category": 3}})");

    const std::vector<std::string> inputs = {"--catalog",   (dir / "catalog.jsonl").string(),
                                             "--sessions",  (dir / "sessions.jsonl").string(),
                                             "--interests", (dir / "interests.txt").string(),
                                             "--personas",  (dir / "personas").string(),
                                             "--out",       (dir / "runs").string()};
    auto with = [&](std::vector<std::string> head) {
        head.insert(head.end(), inputs.begin(), inputs.end());
        return head;
    };
    std::string err;
    o.require(cli(with({"mine-personas"}), &err) == 0, "mine-personas failed: " + err);
    const auto run_args = with({"run", "all", "--run-id", "e2e", "--mc-samples", "200", "--mc-repeats", "3", "--control",
                                (dir / "c.json").string(), "--treatment", (dir / "t.json").string()});
    o.require(cli(run_args, &err) == 0, "first run failed: " + err);
    const auto run_dir = dir / "runs/e2e";
    const auto report1 = fixtures::read_text(run_dir / "report.json");
    const auto manifest1 = fixtures::read_text(run_dir / "manifest.json");
    std::map<std::string, std::string> transcripts1;
    if (fs::exists(run_dir / "transcripts"))
        for (const auto& e : fs::recursive_directory_iterator(run_dir / "transcripts"))
            if (e.is_regular_file()) transcripts1[e.path().string()] = fixtures::read_text(e.path());
    bool all_tasks = false;
    try {
        const auto report = nlohmann::json::parse(report1);
        all_tasks = report.contains("query_gen") && report.contains("item_select_individual") &&
                    report.contains("item_select_group") && report.contains("session_gen") && report.contains("ab_test");
    } catch (const std::exception&) {
    }
    o.require(all_tasks, "report is missing a task");
    o.require(!transcripts1.empty(), "no transcripts written");

    o.require(cli(run_args, &err) == 0, "rerun failed: " + err);
    bool identical = fixtures::read_text(run_dir / "report.json") == report1 &&
                     fixtures::read_text(run_dir / "manifest.json") == manifest1;
    for (const auto& [path, text] : transcripts1) identical = identical && fixtures::read_text(path) == text;
    o.require(identical, "rerun differs");

    std::vector<SessionJob> jobs;
    for (std::size_t i = 0; i < data.sessions.size(); ++i) {
        const auto script = replay_script(data.sessions[i]);
        jobs.push_back({data.sessions[i].customer_id, i, [script] { return std::make_unique<ScriptedPolicy>(script); }});
    }
    const auto variant = EnvVariant::make("C", data.catalog);
    const auto replayed = simulate_sessions(variant, jobs, {}, 1);
    const auto result = evaluate_session_generation(human_corpus(data.sessions, data.catalog),
                                                    {{"replay", agent_corpus(replayed, data.catalog)}}, kDefaultKlEpsilon);
    const auto& arm = result.arms.at(0);
    o.require(data.sessions.size() == 100, fmt::format("{} sessions", data.sessions.size()));
    o.require(arm.kl_searches == 0.0 && arm.kl_views == 0.0 && arm.kl_purchases == 0.0, "replay kl is not zero");
    o.require(arm.query_ttr == result.human_query_ttr && arm.product_ttr == result.human_product_ttr,
              "replay ttr differs");
    const std::string failed = o.detail;
    o.detail = fmt::format("{} sessions; report {} bytes; {} transcripts; replay kl=({}, {}, {})", data.sessions.size(),
                           report1.size(), transcripts1.size(), arm.kl_searches, arm.kl_views, arm.kl_purchases) +
               (o.pass ? "" : " | " + failed);
    return o;
}

// --- 8 ------------------------------------------------------------------------------

Catalog ab_catalog() {
    using fixtures::product;
    return Catalog({product("m1", "Ceramic coffee mug", 20, "Mugs"), product("m2", "Enamel camping mug", 22, "Mugs"),
                    product("v1", "Designer glass vase", 40, "Decor"), product("l1", "Desk lamp", 30, "Home"),
                    product("k1", "Chef knife", 35, "Kitchen")});
}

std::vector<std::pair<std::string, PolicyFactory>> price_sensitive_population(std::uint64_t seed, double reference) {
    std::vector<std::pair<std::string, PolicyFactory>> out;
    Rng rng(derive_seed(seed, "ceilings"));
    for (int i = 0; i < 60; ++i) {
        const double ceiling = rng.uniform(0.2 * reference, 1.2 * reference);
        const ParametricParams params{"mug", Money::from_dollars(ceiling), 0.9};
        out.emplace_back(fmt::format("p{:02d}", i), [params] { return std::make_unique<ParametricPolicy>(params); });
    }
    return out;
}

Outcome ab_direction() {
    Outcome o;
    const auto base = ab_catalog();
    const auto control = EnvVariant::make("C", base);
    std::map<std::string, ProductOverride> halved;
    for (const auto& [id, p] : base.products())
        if (p.category == "Mugs") halved[id].price = Money::from_dollars(p.price.dollars() / 2.0);
    const auto cheaper = EnvVariant::make("T", base, {}, halved);
    std::map<std::string, ProductOverride> demoted;
    demoted["v1"].title = "Ceramic mug shaped glass vase mug";
    const auto demotion = EnvVariant::make("T", base, {}, demoted);

    int positive = 0, negative = 0;
    constexpr int kSeeds = 20;
    for (int s = 0; s < kSeeds; ++s) {
        const auto population = price_sensitive_population(static_cast<std::uint64_t>(s), 20.0);
        positive += run_ab_simulation(control, cheaper, population, static_cast<std::uint64_t>(s)).direction > 0;
        negative += run_ab_simulation(control, demotion, population, static_cast<std::uint64_t>(s)).direction < 0;
    }
    o.require(positive >= 19, fmt::format("price cut positive in {}/20", positive));
    o.require(negative >= 19, fmt::format("demotion negative in {}/20", negative));
    const std::string failed = o.detail;
    o.detail = fmt::format("price cut positive {}/{}, demotion negative {}/{}", positive, kSeeds, negative, kSeeds) +
               (o.pass ? "" : " | " + failed);
    return o;
}

// --- 9 ------------------------------------------------------------------------------

Outcome type_token_ratio() {
    Outcome o;
    o.require(ttr({"red shoes", "blue shoes"}) == 0.75, "0.75 case");
    o.require(std::abs(ttr({"a a a"}) - 1.0 / 3.0) < 1e-15, "1/3 case");
    o.require(ttr({"one two", "three"}) == 1.0, "1.0 case");
    Rng rng(9);
    int broken = 0;
    for (int i = 0; i < 100; ++i) {
        std::vector<std::string> corpus;
        const int docs = rng.uniform_int(1, 12);
        for (int d = 0; d < docs; ++d) {
            std::string doc;
            const int words = rng.uniform_int(1, 8);
            for (int w = 0; w < words; ++w) doc += (w ? " w" : "w") + std::to_string(rng.uniform_int(0, 15));
            corpus.push_back(doc);
        }
        const double before = ttr(corpus);
        auto shuffled = corpus;
        rng.shuffle(std::span<std::string>(shuffled));
        broken += ttr(shuffled) != before;
    }
    o.require(broken == 0, fmt::format("{} corpora changed under permutation", broken));
    const std::string failed = o.detail;
    o.detail = fmt::format("oracles exact; {} of 100 permutations changed", broken) + (o.pass ? "" : " | " + failed);
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"AC1 dice demo", dice},
        {"AC2 discrete KL exactness", discrete_kl_exactness},
        {"AC3 Monte Carlo KDE KL", mc_kde_kl},
        {"AC4 bandwidth sweep ordering", bandwidth_ordering},
        {"AC5 pair mining", pair_mining},
        {"AC6 item-selection construction", item_selection_construction},
        {"AC7 hermetic end-to-end", hermetic_end_to_end},
        {"AC8 A/B direction", ab_direction},
        {"AC9 type-token ratio", type_token_ratio},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
