// SPDX-License-Identifier: Apache-2.0
#include "shopsim/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "shopsim/catalog.hpp"
#include "shopsim/errors.hpp"
#include "shopsim/http_backend.hpp"
#include "shopsim/llm_gateway.hpp"
#include "shopsim/parallel.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/report.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/session_log.hpp"
#include "shopsim/shopper_agent.hpp"
#include "shopsim/synth.hpp"
#include "shopsim/tasks.hpp"
#include "shopsim/text.hpp"
#include "shopsim/text_models.hpp"

#ifndef SHOPSIM_VERSION
#define SHOPSIM_VERSION "0.0.0"
#endif

namespace shopsim {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration -------------------------------------------------------------------

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ValidationError(fmt::format("{}: '{}' is not a valid number", key, text));
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) throw ValidationError(fmt::format("{}: '{}' is not finite", key, text));
    }
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    const auto t = to_lower(trim(text));
    if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
    if (t == "0" || t == "false" || t == "no" || t == "off") return false;
    throw ValidationError(fmt::format("{}: '{}' is not a boolean", key, text));
}

struct Field {
    std::string name;
    std::string help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<json(const RunConfig&)> get;
};

template <typename M>
Field field(std::string name, M RunConfig::*member, std::string help) {
    Field f;
    f.name = name;
    f.help = std::move(help);
    f.get = [member](const RunConfig& c) { return json(c.*member); };
    f.set = [member, name](RunConfig& c, const std::string& v) {
        if constexpr (std::is_same_v<M, std::string>)
            c.*member = v;
        else if constexpr (std::is_same_v<M, bool>)
            c.*member = parse_bool(name, v);
        else
            c.*member = parse_number<M>(name, trim(v));
    };
    return f;
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        field("catalog", &RunConfig::catalog, "product catalog (JSONL)"),
        field("sessions", &RunConfig::sessions, "session log (JSONL)"),
        field("personas", &RunConfig::personas, "persona directory"),
        field("interests", &RunConfig::interests, "valid interests, one per line"),
        field("backend", &RunConfig::backend, "mock or http"),
        field("seed", &RunConfig::seed, "master seed"),
        field("temperature", &RunConfig::temperature, "sampling temperature for mining and task prompts"),
        field("session_temperature", &RunConfig::session_temperature, "sampling temperature for shopping sessions"),
        field("bandwidth", &RunConfig::bandwidth, "KDE bandwidth"),
        field("mc_samples", &RunConfig::mc_samples, "Monte Carlo points per KL repeat"),
        field("mc_repeats", &RunConfig::mc_repeats, "Monte Carlo KL repeats"),
        field("epsilon", &RunConfig::epsilon, "histogram smoothing added to every bin"),
        field("out", &RunConfig::out, "output root for run directories"),
        field("run_id", &RunConfig::run_id, "run directory name"),
        field("jobs", &RunConfig::jobs, "worker threads"),
        field("cutoff", &RunConfig::cutoff, "recent/older split date (YYYY-MM-DD)"),
        field("max_shoppers", &RunConfig::max_shoppers, "cap on shoppers used (0 = all)"),
        field("n_cases", &RunConfig::n_cases, "item-selection cases (0 = one per purchase)"),
        field("pool_size", &RunConfig::pool_size, "distractor pool size"),
        field("rank_k", &RunConfig::rank_k, "results considered by the ranking task"),
        field("sessions_per_shopper", &RunConfig::sessions_per_shopper, "simulated sessions per shopper and arm"),
        field("max_steps", &RunConfig::max_steps, "tool calls per session"),
        field("n_tosses", &RunConfig::n_tosses, "dice tosses"),
        field("control", &RunConfig::control, "control variant (JSON)"),
        field("treatment", &RunConfig::treatment, "treatment variant (JSON)"),
        field("intention", &RunConfig::intention, "text appended to the opening session turn"),
        field("embedder_url", &RunConfig::embedder_url, "remote embedding service"),
        field("embedder_dim", &RunConfig::embedder_dim, "expected remote embedding dimension"),
        field("perplexity_url", &RunConfig::perplexity_url, "remote perplexity service"),
        field("retry_budget", &RunConfig::retry_budget, "retries after the first failed model call"),
        field("timeout_ms", &RunConfig::timeout_ms, "per-call timeout"),
        field("max_in_flight", &RunConfig::max_in_flight, "concurrent model calls"),
        field("audit", &RunConfig::audit, "append model calls to llm_audit.jsonl"),
    };
    return f;
}

std::string env_name(const std::string& key) {
    std::string out = "SHOPSIM_";
    for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string flag_name(const std::string& key) {
    std::string out = "--" + key;
    std::replace(out.begin(), out.end(), '_', '-');
    return out;
}

}  // namespace

void RunConfig::validate() const {
    if (backend != "mock" && backend != "http")
        throw ValidationError(fmt::format("backend must be 'mock' or 'http', got '{}'", backend));
    if (temperature < 0.0 || session_temperature < 0.0) throw ValidationError("temperatures must be non-negative");
    if (bandwidth <= 0.0) throw ValidationError("bandwidth must be positive");
    if (mc_samples <= 0) throw ValidationError("mc_samples must be positive");
    if (mc_repeats <= 0) throw ValidationError("mc_repeats must be positive");
    if (epsilon <= 0.0) throw ValidationError("epsilon must be positive");
    if (jobs <= 0) throw ValidationError("jobs must be positive");
    if (max_shoppers < 0 || n_cases < 0) throw ValidationError("max_shoppers and n_cases must be non-negative");
    if (pool_size <= 0 || rank_k <= 0 || sessions_per_shopper <= 0 || max_steps <= 0 || n_tosses <= 0)
        throw ValidationError("pool_size, rank_k, sessions_per_shopper, max_steps and n_tosses must be positive");
    if (embedder_dim <= 0) throw ValidationError("embedder_dim must be positive");
    if (retry_budget < 0 || timeout_ms <= 0 || max_in_flight <= 0)
        throw ValidationError("retry_budget must be >= 0; timeout_ms and max_in_flight positive");
    if (out.empty()) throw ValidationError("out must not be empty");
    if (!cutoff.empty()) parse_date(cutoff);
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.name);
        return k;
    }();
    return keys;
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
    std::map<std::string, std::string> out;
    const auto& keys = config_keys();
    std::istringstream in{std::string(text)};
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ValidationError(fmt::format("config line {}: expected key = value", n));
        auto key = trim(t.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ValidationError(fmt::format("config line {}: unknown key '{}'", n, key));
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

RunConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                         const std::map<std::string, std::string>& file) {
    RunConfig c;
    for (const auto& f : fields()) {
        std::optional<std::string> value;
        if (auto it = flags.find(f.name); it != flags.end()) value = it->second;
        if (!value && env) value = env(env_name(f.name));
        if (!value)
            if (auto it = file.find(f.name); it != file.end()) value = it->second;
        if (value) f.set(c, *value);
    }
    c.validate();
    return c;
}

json config_to_json(const RunConfig& config) {
    json j = json::object();
    for (const auto& f : fields()) j[f.name] = f.get(config);
    return j;
}

// --- commands ----------------------------------------------------------------------------

namespace {

class Console {
  public:
    Console(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
    void print(const std::string& s) {
        std::lock_guard lock(mutex_);
        out_ << s;
    }
    void warn(const std::string& s) {
        std::lock_guard lock(mutex_);
        err_ << "warning: " << s << '\n';
    }
    Warn warner() {
        return [this](const std::string& s) { warn(s); };
    }

  private:
    std::mutex mutex_;
    std::ostream& out_;
    std::ostream& err_;
};

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void require_path(const std::string& value, const char* key) {
    if (value.empty()) throw ValidationError(fmt::format("{} is required (flag {})", key, flag_name(key)));
    if (!fs::exists(value)) throw ValidationError(fmt::format("{} '{}' does not exist", key, value));
}

std::shared_ptr<ChatBackend> make_backend(const RunConfig& c) {
    if (c.backend == "http") return std::make_shared<HttpBackend>(HttpBackendConfig::from_env());
    return std::make_shared<MockBackend>(heuristic_responder(c.seed));
}

GatewayOptions gateway_options(const RunConfig& c, const std::optional<fs::path>& audit_dir) {
    GatewayOptions o;
    o.retry_budget = c.retry_budget;
    o.timeout = std::chrono::milliseconds(c.timeout_ms);
    o.max_in_flight = static_cast<std::size_t>(c.max_in_flight);
    if (c.audit) o.audit_dir = audit_dir;
    return o;
}

struct Data {
    Catalog catalog;
    std::vector<Session> sessions;
    std::chrono::year_month_day cutoff{};
    std::vector<ShoppingHistory> histories;
};

Data load_data(const RunConfig& c) {
    require_path(c.catalog, "catalog");
    require_path(c.sessions, "sessions");
    Data d;
    d.catalog = load_catalog(c.catalog);
    d.sessions = load_sessions(c.sessions);
    if (d.sessions.empty()) throw ValidationError(fmt::format("'{}' holds no sessions", c.sessions));
    d.cutoff = c.cutoff.empty() ? six_months_before(latest_date(d.sessions)) : parse_date(c.cutoff);
    d.histories = split_histories(d.sessions, d.cutoff);
    if (c.max_shoppers > 0 && d.histories.size() > static_cast<std::size_t>(c.max_shoppers))
        d.histories.resize(static_cast<std::size_t>(c.max_shoppers));
    return d;
}

std::vector<std::string> valid_interests(const RunConfig& c, const Catalog& catalog) {
    if (!c.interests.empty()) {
        require_path(c.interests, "interests");
        return load_valid_interests(c.interests);
    }
    std::set<std::string> tags;
    for (const auto& [id, p] : catalog.products()) tags.insert(p.interest_tags.begin(), p.interest_tags.end());
    if (tags.empty()) throw ValidationError("no interests: pass --interests or tag catalog products");
    return {tags.begin(), tags.end()};
}

/// Mines a persona for every history in `todo`; failures are warned and left empty.
std::vector<std::optional<Persona>> mine_all(const std::vector<const ShoppingHistory*>& todo, const Data& d,
                                             const RunConfig& c, ChatGateway& gateway, Console& console) {
    const auto interests = valid_interests(c, d.catalog);
    std::vector<std::optional<Persona>> out(todo.size());
    parallel_for(todo.size(), static_cast<std::size_t>(c.jobs), [&](std::size_t i) {
        MiningOptions mo;
        mo.generation.temperature = c.temperature;
        mo.generation.seed = derive_seed(c.seed, "mine/" + todo[i]->customer_id);
        mo.titles = title_resolver(d.catalog);
        try {
            out[i] = mine_persona(*todo[i], interests, gateway, mo);
        } catch (const MiningFailed& e) {
            console.warn(fmt::format("mining failed for {}: {}", todo[i]->customer_id, e.what()));
        }
    });
    return out;
}

/// Personas from the persona directory, mining (and saving) any that are missing.
std::vector<Shopper> build_population(const Data& d, const RunConfig& c, ChatGateway& gateway, Console& console,
                                      const fs::path& save_dir) {
    std::map<std::string, Persona> known;
    if (!c.personas.empty() && fs::is_directory(c.personas))
        for (auto& [id, p] : load_persona_dir(c.personas)) known.emplace(id, std::move(p));

    std::vector<const ShoppingHistory*> todo;
    for (const auto& h : d.histories)
        if (!h.empty() && !known.count(h.customer_id)) todo.push_back(&h);
    if (!todo.empty()) {
        const auto mined = mine_all(todo, d, c, gateway, console);
        for (std::size_t i = 0; i < todo.size(); ++i) {
            if (!mined[i]) continue;
            save_persona(*mined[i], todo[i]->customer_id, save_dir);
            known.emplace(todo[i]->customer_id, *mined[i]);
        }
    }
    std::vector<Shopper> pop;
    for (const auto& h : d.histories) {
        auto it = known.find(h.customer_id);
        if (h.empty() || it == known.end()) continue;
        pop.push_back({h.customer_id, h, it->second});
    }
    if (pop.empty()) throw ValidationError("no shopper has both a history and a persona");
    return pop;
}

std::string input_digest(const std::string& path) {
    if (path.empty() || !fs::is_regular_file(path)) return "";
    return fmt::format("{:016x}", fnv1a64(read_file(path)));
}

const std::vector<std::string> kTasks = {"query-gen",   "item-select-individual", "item-select-group",
                                         "session-gen", "ab-test",                "dice-demo"};

struct RunOutput {
    RunArtifacts artifacts;
    std::map<fs::path, const Transcript*> transcripts;  // relative path -> transcript
    std::vector<std::string> lines;                     // console summary
};

std::unique_ptr<Embedder> make_embedder(const RunConfig& c) {
    if (!c.embedder_url.empty())
        return std::make_unique<RemoteEmbedder>(c.embedder_url, static_cast<std::size_t>(c.embedder_dim),
                                                std::chrono::milliseconds(c.timeout_ms));
    return std::make_unique<HashingEmbedder>(static_cast<std::size_t>(c.embedder_dim));
}

EnvLimits limits_of(const RunConfig& c) {
    EnvLimits l;
    l.max_steps = c.max_steps;
    return l;
}

std::string dice_table(const std::vector<DiceRow>& rows) {
    std::string out = fmt::format("{:<8}{:>10}{:>11}{:>12}\n", "system", "mse", "accuracy", "kl");
    for (const auto& r : rows)
        out += fmt::format("{:<8}{:>10.4f}{:>10.1f}%{:>12.4f}\n", r.system, r.mse, 100.0 * r.accuracy, r.kl);
    return out;
}

std::string sweep_table(const QueryGenResult& r, const std::vector<double>& values) {
    std::string out = fmt::format("{:<12}", "bandwidth");
    for (const auto& a : r.arms) out += fmt::format("{:>24}", "kl[" + a.arm + "]");
    out += '\n';
    for (double b : values) {
        out += fmt::format("{:<12g}", b);
        for (const auto& a : r.arms) {
            const auto& k = a.bandwidth_sweep.at(b);
            out += fmt::format("{:>24}", fmt::format("{:.4f} +/- {:.4f}", k.mean, k.stdev));
        }
        out += '\n';
    }
    return out;
}

struct Pipeline {
    Pipeline(const RunConfig& config, Console& con) : c(config), console(con) {}

    const RunConfig& c;
    Console& console;
    ChatGateway* gateway = nullptr;
    std::optional<Data> data;
    std::vector<Shopper> population;
    fs::path run_dir;

    // Keeps transcripts alive until they are written.
    std::vector<std::unique_ptr<std::vector<Transcript>>> held;

    TaskContext context() const {
        TaskContext ctx{data->catalog, *gateway, c.seed, {}, {}, static_cast<std::size_t>(c.jobs), console.warner()};
        ctx.generation.temperature = c.temperature;
        ctx.metrics = {c.bandwidth, c.mc_samples, c.mc_repeats, c.epsilon};
        return ctx;
    }

    void hold(RunOutput& out, const std::string& dir, std::vector<Transcript> ts) {
        held.push_back(std::make_unique<std::vector<Transcript>>(std::move(ts)));
        const auto& v = *held.back();
        for (std::size_t i = 0; i < v.size(); ++i)
            out.transcripts[fs::path(dir) / fmt::format("{:05d}-{}.jsonl", i, v[i].persona_label)] = &v[i];
    }

    void query_gen(RunOutput& out, const std::vector<double>& sweep) {
        auto embedder = make_embedder(c);
        auto ctx = context();
        QueryGenOptions opts;
        opts.sweep_bandwidths = sweep;
        const auto cases = build_query_gen_cases(population, data->catalog);
        if (cases.empty()) throw ValidationError("query generation: the population has no query-view pairs");
        std::unique_ptr<PerplexityScorer> scorer;
        if (!c.perplexity_url.empty())
            scorer = std::make_unique<RemotePerplexity>(c.perplexity_url, std::chrono::milliseconds(c.timeout_ms));
        else
            scorer = std::make_unique<BigramLm>(train_bigram_on(cases));
        const auto r = run_query_generation(population, ctx, *embedder, *scorer, opts);
        out.artifacts.report["query_gen"] = to_json(r);
        out.artifacts.csv["similarity_by_perplexity.csv"] = similarity_by_perplexity_csv(r);
        if (!sweep.empty()) {
            out.artifacts.csv["bandwidth_sweep.csv"] = bandwidth_sweep_csv(r);
            out.lines.push_back(sweep_table(r, sweep));
        }
        for (const auto& a : r.arms)
            out.lines.push_back(fmt::format("query-gen [{}] similarity {:.4f}  group KL {:.4f} +/- {:.4f}\n", a.arm,
                                            a.similarity.aggregate, a.group_kl.mean, a.group_kl.stdev));
    }

    void item_individual(RunOutput& out) {
        auto ctx = context();
        ItemSelectionBuildOptions bo;
        bo.pool_size = static_cast<std::size_t>(c.pool_size);
        bo.n_cases = static_cast<std::size_t>(c.n_cases);
        bo.seed = derive_seed(c.seed, "item-cases");
        const auto cases = build_item_selection_cases(population, data->catalog, bo, console.warner());
        if (cases.empty()) throw ValidationError("item selection: no valid cases could be built");
        const auto arms = run_item_selection_individual(population, cases, ctx);
        out.artifacts.report["item_select_individual"] = to_json(arms, cases.size());
        for (const auto& a : arms)
            out.lines.push_back(fmt::format("item-select-individual [{}] accuracy {:.2f}% over {} cases\n", a.arm,
                                            100.0 * a.accuracy.aggregate, cases.size()));
    }

    void item_group(RunOutput& out) {
        auto ctx = context();
        const auto r = run_item_selection_group(population, ctx, static_cast<std::size_t>(c.rank_k));
        out.artifacts.report["item_select_group"] = to_json(r);
        out.artifacts.csv["rank_distribution.csv"] = rank_distribution_csv(r);
        for (const auto& a : r.arms)
            out.lines.push_back(a.kl ? fmt::format("item-select-group [{}] rank KL {:.4f}\n", a.arm, *a.kl)
                                     : fmt::format("item-select-group [{}] no usable answers\n", a.arm));
    }

    void session_gen(RunOutput& out) {
        auto ctx = context();
        SessionGenOptions opts;
        opts.sessions_per_shopper = c.sessions_per_shopper;
        opts.limits = limits_of(c);
        opts.temperature = c.session_temperature;
        opts.shopping_intention = c.intention;
        auto run = run_session_generation(population, ctx, opts);
        out.artifacts.report["session_gen"] = to_json(run.result);
        out.artifacts.csv["session_histograms.csv"] = session_histograms_csv(run.result);
        for (auto& [arm, ts] : run.transcripts) hold(out, "session-gen/" + arm, std::move(ts));
        for (const auto& a : run.result.arms)
            out.lines.push_back(fmt::format("session-gen [{}] KL searches {:.4f} views {:.4f} purchases {:.4f}\n",
                                            a.arm, a.kl_searches, a.kl_views, a.kl_purchases));
    }

    void ab_test(RunOutput& out) {
        if (c.control.empty() || c.treatment.empty())
            throw ValidationError("ab-test needs --control and --treatment variant files");
        require_path(c.control, "control");
        require_path(c.treatment, "treatment");
        const auto control = load_variant(c.control, data->catalog);
        const auto treatment = load_variant(c.treatment, data->catalog);
        std::vector<std::pair<std::string, PolicyFactory>> factories;
        for (const auto& s : population) {
            LlmPolicyOptions po;
            po.generation.temperature = c.session_temperature;
            po.shopping_intention = c.intention;
            factories.emplace_back(s.customer_id, [gw = gateway, persona = s.persona, po] {
                return std::make_unique<LlmPolicy>(*gw, persona, po);
            });
        }
        AbOptions opts;
        opts.limits = limits_of(c);
        opts.threads = static_cast<std::size_t>(c.jobs);
        auto r = run_ab_simulation(control, treatment, factories, c.seed, opts);
        out.artifacts.report["ab_test"] = to_json(r);
        out.lines.push_back(fmt::format("ab-test sales C {} T {} delta {} direction {:+d}\n", r.sales_control.str(),
                                        r.sales_treatment.str(),
                                        r.delta_pct ? fmt::format("{:+.2f}%", *r.delta_pct) : "n/a", r.direction));
        hold(out, "ab-test/" + control.label, std::move(r.control_transcripts));
        hold(out, "ab-test/" + treatment.label, std::move(r.treatment_transcripts));
    }

    void dice(RunOutput& out) {
        const auto rows = run_dice_demo(c.n_tosses, c.epsilon, c.seed);
        out.artifacts.report["dice_demo"] = to_json(rows);
        out.artifacts.csv["dice.csv"] = dice_csv(rows);
        out.lines.push_back(dice_table(rows));
    }
};

std::string derived_run_id(const std::string& task, const RunConfig& c) {
    auto j = config_to_json(c);
    j.erase("out");
    j.erase("run_id");
    j.erase("jobs");
    return fmt::format("{}-s{}-{:08x}", task, c.seed, fnv1a64(j.dump()) & 0xffffffffULL);
}

json manifest_of(const std::string& command, const std::vector<std::string>& tasks, const RunConfig& c,
                 const std::string& run_id, const std::string& backend_name) {
    json inputs = json::object();
    for (const auto& [key, path] : {std::pair<const char*, const std::string*>{"catalog", &c.catalog},
                                    {"sessions", &c.sessions},
                                    {"interests", &c.interests},
                                    {"control", &c.control},
                                    {"treatment", &c.treatment}}) {
        if (!path->empty()) inputs[key] = {{"path", *path}, {"fnv1a64", input_digest(*path)}};
    }
    return {{"code_version", SHOPSIM_VERSION},
            {"command", command},
            {"tasks", tasks},
            {"run_id", run_id},
            {"backend", backend_name},
            {"config", config_to_json(c)},
            {"inputs", inputs}};
}

int execute_run(const std::string& command, const std::vector<std::string>& tasks, const RunConfig& c, Console& console,
                const std::vector<double>& sweep = {}) {
    const bool needs_data = std::any_of(tasks.begin(), tasks.end(), [](const auto& t) { return t != "dice-demo"; });
    const std::string run_id = c.run_id.empty() ? derived_run_id(command, c) : c.run_id;
    Pipeline p(c, console);
    p.run_dir = fs::path(c.out) / run_id;

    std::shared_ptr<ChatBackend> backend;
    std::unique_ptr<ChatGateway> gateway;
    std::string backend_name = "none";
    if (needs_data) {
        backend = make_backend(c);
        backend_name = backend->name();
        fs::create_directories(p.run_dir);
        gateway = std::make_unique<ChatGateway>(backend, gateway_options(c, p.run_dir));
        p.gateway = gateway.get();
        p.data = load_data(c);
        const fs::path persona_dir = c.personas.empty() ? p.run_dir / "personas" : fs::path(c.personas);
        p.population = build_population(*p.data, c, *gateway, console, persona_dir);
    }

    RunOutput out;
    out.artifacts.manifest = manifest_of(command, tasks, c, run_id, backend_name);
    if (needs_data) out.artifacts.manifest["population"] = p.population.size();
    for (const auto& t : tasks) {
        if (t == "query-gen") p.query_gen(out, sweep);
        else if (t == "item-select-individual") p.item_individual(out);
        else if (t == "item-select-group") p.item_group(out);
        else if (t == "session-gen") p.session_gen(out);
        else if (t == "ab-test") p.ab_test(out);
        else if (t == "dice-demo") p.dice(out);
    }

    write_run(out.artifacts, p.run_dir);
    for (const auto& [rel, t] : out.transcripts) {
        const auto path = p.run_dir / "transcripts" / rel;
        fs::create_directories(path.parent_path());
        write_transcript(*t, path);
    }
    for (const auto& line : out.lines) console.print(line);
    console.print(fmt::format("wrote {}\n", (p.run_dir / "report.json").string()));
    return 0;
}

int cmd_ingest(const RunConfig& c, Console& console) {
    const auto d = load_data(c);
    std::set<std::string> unknown;
    std::size_t recent = 0, older = 0, pairs = 0;
    for (const auto& s : d.sessions)
        for (const auto& a : s.actions)
            if (a.kind != ActionKind::Search && !d.catalog.contains(a.payload)) unknown.insert(a.payload);
    for (const auto& h : d.histories) {
        recent += h.recent_sessions.size();
        older += h.older_purchases.size();
        pairs += mine_pairs(h).size();
    }
    std::string s;
    s += fmt::format("products          {}\n", d.catalog.size());
    s += fmt::format("sessions          {}\n", d.sessions.size());
    s += fmt::format("customers         {}\n", d.histories.size());
    s += fmt::format("cutoff            {}\n", format_date(d.cutoff));
    s += fmt::format("recent sessions   {}\n", recent);
    s += fmt::format("older purchases   {}\n", older);
    s += fmt::format("query-view pairs  {}\n", pairs);
    s += fmt::format("unknown products  {}\n", unknown.size());
    console.print(s);
    for (const auto& id : unknown) console.warn(fmt::format("session references unknown product '{}'", id));
    return 0;
}

int cmd_mine(const RunConfig& c, Console& console) {
    auto backend = make_backend(c);
    const fs::path dir = c.personas.empty() ? fs::path(c.out) / "personas" : fs::path(c.personas);
    ChatGateway gateway(backend, gateway_options(c, dir));
    const auto d = load_data(c);
    std::vector<const ShoppingHistory*> todo;
    for (const auto& h : d.histories)
        if (!h.empty()) todo.push_back(&h);
    const auto mined = mine_all(todo, d, c, gateway, console);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (!mined[i]) continue;
        save_persona(*mined[i], todo[i]->customer_id, dir);
        ++ok;
    }
    console.print(fmt::format("mined {} of {} personas into {}\n", ok, todo.size(), dir.string()));
    return ok == todo.size() ? 0 : 1;
}

int cmd_report(const std::string& target, const std::string& format, Console& console) {
    fs::path dir = target;
    fs::path file = target;
    if (fs::is_directory(dir))
        file = dir / "report.json";
    else
        dir = file.parent_path();
    if (!fs::exists(file)) throw NotFoundError(fmt::format("no report at '{}'", file.string()));
    json report;
    try {
        report = json::parse(read_file(file));
    } catch (const json::parse_error& e) {
        throw ValidationError(fmt::format("'{}' is not valid JSON: {}", file.string(), e.what()));
    }
    if (format == "json") {
        console.print(report.dump(2) + "\n");
        return 0;
    }
    std::string s = summarize_report(report);
    std::vector<std::string> csvs;
    for (const auto& e : fs::directory_iterator(dir.empty() ? fs::path(".") : dir))
        if (e.path().extension() == ".csv") csvs.push_back(e.path().filename().string());
    std::sort(csvs.begin(), csvs.end());
    if (!csvs.empty()) s += "csv: " + join(csvs, ", ") + "\n";
    console.print(s);
    return 0;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto v = parse_number<double>("values", trim(item));
        if (v <= 0.0) throw ValidationError("bandwidth values must be positive");
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    if (out.empty()) throw ValidationError("--values needs at least one bandwidth");
    return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
    Console console(out, err);
    CLI::App app{"Persona-conditioned shopper simulation and human-alignment metrics", "shopsim"};
    app.require_subcommand(1);
    app.fallthrough();

    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> flag_options;
    for (const auto& f : fields())
        flag_options[f.name] = app.add_option(flag_name(f.name), flag_values[f.name], f.help)->group("Settings");
    std::string config_file;
    app.add_option("--config", config_file, "key = value settings file")->group("Settings");

    auto* ingest = app.add_subcommand("ingest", "validate and index the catalog and session log");
    auto* mine = app.add_subcommand("mine-personas", "mine a persona for every shopper");
    auto* run = app.add_subcommand("run", "run an alignment task");
    std::string task;
    run->add_option("task", task, "task to run")
        ->required()
        ->check(CLI::IsMember([] {
            auto t = kTasks;
            t.push_back("all");
            return t;
        }()));
    auto* report = app.add_subcommand("report", "summarize a run");
    std::string report_target;
    std::string report_format = "text";
    report->add_option("path", report_target, "run directory or report.json")->required();
    report->add_option("--format", report_format)->check(CLI::IsMember({"text", "json"}));
    auto* sweep = app.add_subcommand("sweep-bandwidth", "query-generation KL over several bandwidths");
    std::string sweep_values = "0.001,0.01,0.1,1";
    sweep->add_option("--values", sweep_values, "comma-separated bandwidths");
    auto* sample = app.add_subcommand("make-sample-data", "write a synthetic catalog and session log");
    std::string sample_dir = "data/sample";
    std::size_t sample_customers = 40, sample_products = 400;
    sample->add_option("--dir", sample_dir);
    sample->add_option("--customers", sample_customers)->check(CLI::PositiveNumber);
    sample->add_option("--products", sample_products)->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        std::map<std::string, std::string> flags;
        for (const auto& [key, opt] : flag_options)
            if (opt->count() > 0) flags[key] = flag_values[key];
        std::map<std::string, std::string> file;
        if (!config_file.empty()) file = parse_config_text(read_file(config_file));
        const auto config = resolve_config(flags, env, file);

        if (*ingest) return cmd_ingest(config, console);
        if (*mine) return cmd_mine(config, console);
        if (*report) return cmd_report(report_target, report_format, console);
        if (*sweep) return execute_run("sweep-bandwidth", {"query-gen"}, config, console, parse_values(sweep_values));
        if (*sample) {
            SynthOptions so;
            so.seed = config.seed;
            so.n_customers = sample_customers;
            so.n_products = sample_products;
            const auto data = generate_synthetic(so);
            write_synthetic(data, sample_dir);
            console.print(fmt::format("wrote {} products, {} sessions for {} customers to {}\n", data.catalog.size(),
                                      data.sessions.size(), data.shoppers.size(), sample_dir));
            return 0;
        }
        if (*run) {
            std::vector<std::string> tasks;
            if (task == "all") {
                for (const auto& t : kTasks)
                    if (t != "ab-test" || (!config.control.empty() && !config.treatment.empty())) tasks.push_back(t);
            } else {
                tasks.push_back(task);
            }
            return execute_run(task, tasks, config, console);
        }
        return 1;
    } catch (const BackendError& e) {
        err << "backend error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const NotFoundError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const TaskAnswerFailed& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const MiningFailed& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace shopsim
