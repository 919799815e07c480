#pragma once

// Evolution runs, the random baseline, best-tree extraction, and the
// multi-trial evaluation harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/arena.hpp"
#include "evobt/chromosome.hpp"
#include "evobt/errors.hpp"
#include "evobt/fitness.hpp"
#include "evobt/genetic_ops.hpp"
#include "evobt/io.hpp"
#include "evobt/rng.hpp"
#include "evobt/selection.hpp"

namespace evobt {

enum class RunMode { Evolve, Baseline };

inline const char* to_string(RunMode m) { return m == RunMode::Evolve ? "evolve" : "baseline"; }

struct ExperimentConfig {
    std::string name = "experiment";
    RunMode mode = RunMode::Evolve;
    std::uint64_t seed = 1;
    int generations = 150;
    double failure_score = -2000.0;  // assigned to members whose tree fails to compile
    int eval_trials = 100;

    MutatorConfig mutators;
    SelectionConfig selection;
    SimConfig sim;
    FitnessSpec fitness = bundled_spec();

    // sources as written in the document (paths resolved to absolute)
    std::string map_ref;
    nlohmann::json library_ref;
    nlohmann::json initial_tree_ref;

    ArenaMap map;
    NodeLibrary library;
    Chromosome initial_tree;
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base / path;
    return std::filesystem::weakly_canonical(path);
}

inline void set_dotted(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value) {
    nlohmann::json* at = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!at->is_object() || !at->contains(key)) throw ConfigError("unknown config key '" + dotted + "'");
        at = &(*at)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (at->is_object() && !value.is_object()) throw ConfigError("config key '" + dotted + "' is a section");
    *at = value;
}

}  // namespace detail

/// Full document with every default spelled out.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["experiment"] = {{"name", c.name},
                       {"mode", to_string(c.mode)},
                       {"seed", c.seed},
                       {"generations", c.generations},
                       {"map", c.map_ref},
                       {"failure_score", c.failure_score},
                       {"eval_trials", c.eval_trials}};
    j["mutators"] = to_json(c.mutators);
    j["selection"] = to_json(c.selection);
    j["sim"] = to_json(c.sim);
    j["fitness"] = to_json(c.fitness);
    j["library"] = c.library_ref;
    j["initial_tree"] = c.initial_tree_ref;
    return j;
}

/// Parses a config document. Relative paths resolve against `base_dir`.
/// The zombie count and the population size are one setting: either key
/// sets both, and they may not disagree.
inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    ExperimentConfig c;
    try {
        const auto ex = j.value("experiment", nlohmann::json::object());
        c.name = ex.value("name", c.name);
        const std::string mode = ex.value("mode", std::string("evolve"));
        if (mode == "evolve") c.mode = RunMode::Evolve;
        else if (mode == "baseline") c.mode = RunMode::Baseline;
        else throw ConfigError("experiment.mode must be 'evolve' or 'baseline'");
        c.seed = ex.value("seed", c.seed);
        c.generations = ex.value("generations", c.generations);
        c.failure_score = ex.value("failure_score", c.failure_score);
        c.eval_trials = ex.value("eval_trials", c.eval_trials);
        if (!ex.contains("map")) throw ConfigError("experiment.map is required");
        c.map_ref = detail::resolve(base_dir, ex.at("map").get<std::string>()).string();

        if (j.contains("mutators")) c.mutators = mutator_config_from_json(j["mutators"]);
        if (j.contains("selection")) c.selection = selection_config_from_json(j["selection"]);
        if (j.contains("sim")) c.sim = sim_config_from_json(j["sim"]);
        if (j.contains("fitness")) c.fitness = fitness_spec_from_json(j["fitness"]);

        const bool has_pop = j.contains("selection") && j["selection"].contains("population_size");
        const bool has_zombies = j.contains("sim") && j["sim"].contains("zombie_count");
        if (has_pop && has_zombies && c.selection.population_size != c.sim.zombie_count)
            throw ConfigError("sim.zombie_count must equal selection.population_size");
        if (has_zombies && !has_pop) c.selection.population_size = c.sim.zombie_count;
        else c.sim.zombie_count = c.selection.population_size;

        if (!j.contains("library")) throw ConfigError("library is required");
        if (j["library"].is_string()) {
            const auto p = detail::resolve(base_dir, j["library"].get<std::string>());
            c.library_ref = p.string();
            c.library = load_library(p);
        } else {
            c.library_ref = j["library"];
            c.library = library_from_json(j["library"]);
        }
        if (!j.contains("initial_tree")) throw ConfigError("initial_tree is required");
        if (j["initial_tree"].is_string()) {
            const auto p = detail::resolve(base_dir, j["initial_tree"].get<std::string>());
            c.initial_tree_ref = p.string();
            c.initial_tree = load_tree(p);
        } else {
            c.initial_tree_ref = j["initial_tree"];
            c.initial_tree = chromosome_from_json(j["initial_tree"]);
        }
        c.map = load_map(c.map_ref);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const MapError& e) {
        throw ConfigError(std::string("map: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return c;
}

/// Parses a value given on the command line: JSON if it parses, else a string.
inline nlohmann::json parse_override_value(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        return text;
    }
}

/// Loads a config file and applies "dotted.key=value" overrides on top of
/// the effective document, so only existing keys can be overridden.
inline ExperimentConfig load_experiment(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    const auto base = std::filesystem::absolute(path).parent_path();
    ExperimentConfig c = experiment_from_json(read_json_file(path), base);
    if (overrides.empty()) return c;
    nlohmann::json doc = to_json(c);
    bool set_zombies = false, set_pop = false;
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
        const std::string key = o.substr(0, eq);
        detail::set_dotted(doc, key, parse_override_value(o.substr(eq + 1)));
        set_zombies = set_zombies || key == "sim.zombie_count";
        set_pop = set_pop || key == "selection.population_size";
    }
    // either count carries the other along unless both were given
    if (set_zombies && !set_pop) doc["selection"]["population_size"] = doc["sim"]["zombie_count"];
    if (set_pop && !set_zombies) doc["sim"]["zombie_count"] = doc["selection"]["population_size"];
    return experiment_from_json(doc, base);
}

inline std::vector<std::string> config_problems(const ExperimentConfig& c) {
    std::vector<std::string> out;
    auto add = [&](const std::vector<std::string>& v) { out.insert(out.end(), v.begin(), v.end()); };
    if (c.generations < 0) out.push_back("experiment.generations must be non-negative");
    if (c.eval_trials < 1) out.push_back("experiment.eval_trials must be at least 1");
    if (c.sim.zombie_count != c.selection.population_size) out.push_back("sim.zombie_count must equal selection.population_size");
    add(config_problems(c.mutators));
    add(config_problems(c.selection));
    add(config_problems(c.sim));
    add(spec_problems(c.fitness));
    add(map_problems(c.map));
    for (const auto& i : arena_library_problems(c.library)) out.push_back(std::string("library: ") + to_string(i.kind) + " " + i.id + " " + i.detail);
    for (const auto& p : structural_problems(c.initial_tree)) out.push_back("initial_tree: " + p);
    for (const auto& p : library_problems(c.initial_tree, c.library)) out.push_back("initial_tree: " + p);
    return out;
}

inline void require_valid(const ExperimentConfig& c) {
    const auto p = config_problems(c);
    if (!p.empty()) throw ConfigError(p.front());
}

// ------------------------------------------------------------------ run logs

struct GenerationRecord {
    int generation = 0;
    double min = 0.0, mean = 0.0, max = 0.0;
    std::vector<double> fitness;
    std::vector<Chromosome> members;
};

struct RunLog {
    std::vector<GenerationRecord> generations;
    nlohmann::json config;
    std::uint64_t seed = 0;
};

inline GenerationRecord make_record(int generation, std::vector<double> fitness, std::vector<Chromosome> members) {
    GenerationRecord r;
    r.generation = generation;
    r.min = *std::ranges::min_element(fitness);
    r.max = *std::ranges::max_element(fitness);
    r.mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(fitness.size());
    r.fitness = std::move(fitness);
    r.members = std::move(members);
    return r;
}

struct BestPick {
    std::size_t generation = 0;
    std::size_t member = 0;
    bool operator==(const BestPick&) const = default;
};

/// Generation with the highest mean (later generation on ties), then its
/// highest-fitness member (lower index on ties).
inline BestPick select_best_index(const RunLog& log) {
    if (log.generations.empty()) throw ConfigError("run log is empty");
    BestPick pick;
    for (std::size_t g = 1; g < log.generations.size(); ++g)
        if (log.generations[g].mean >= log.generations[pick.generation].mean) pick.generation = g;
    const auto& f = log.generations[pick.generation].fitness;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (f[i] > f[pick.member]) pick.member = i;
    return pick;
}

inline Chromosome select_best(const RunLog& log) {
    const auto p = select_best_index(log);
    return log.generations[p.generation].members[p.member];
}

inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Appends to the run directory after every generation so an interrupted
/// run leaves a readable log.
class RunWriter {
public:
    explicit RunWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_ / "best");
        gens_.open(dir_ / "generations.csv", std::ios::binary | std::ios::trunc);
        members_.open(dir_ / "members.csv", std::ios::binary | std::ios::trunc);
        if (!gens_ || !members_) throw ConfigError("cannot write run log in '" + dir_.string() + "'");
        gens_ << "generation,min,mean,max\n";
        members_ << "generation,member,fitness,size,lineage_id,generation_born\n";
        gens_.flush();
        members_.flush();
    }

    void write_config(const nlohmann::json& config) { write_text_file(dir_ / "config.json", config.dump(2) + "\n"); }

    void append(const GenerationRecord& r) {
        gens_ << r.generation << ',' << format_real(r.min) << ',' << format_real(r.mean) << ',' << format_real(r.max) << '\n';
        for (std::size_t i = 0; i < r.fitness.size(); ++i) {
            const auto& m = r.members[i];
            members_ << r.generation << ',' << i << ',' << format_real(r.fitness[i]) << ',' << size(m) << ',' << m.lineage_id << ','
                     << m.generation_born << '\n';
        }
        gens_.flush();
        members_.flush();
        char name[32];
        std::snprintf(name, sizeof name, "gen_%04d.btree.json", r.generation);
        std::size_t best = 0;
        for (std::size_t i = 1; i < r.fitness.size(); ++i)
            if (r.fitness[i] > r.fitness[best]) best = i;
        save_tree(dir_ / "best" / name, r.members[best]);
    }

    void finish(const Chromosome& best) { save_tree(dir_ / "best.btree.json", best); }

private:
    std::filesystem::path dir_;
    std::ofstream gens_;
    std::ofstream members_;
};

struct CsvGeneration {
    int generation;
    double min, mean, max;
};

/// Reads generations.csv; a torn final line is ignored.
inline std::vector<CsvGeneration> read_generations_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    std::vector<CsvGeneration> out;
    while (std::getline(in, line)) {
        CsvGeneration g{};
        char tail = 0;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf%c", &g.generation, &g.min, &g.mean, &g.max, &tail) == 4) out.push_back(g);
    }
    return out;
}

/// Member fitness per generation, from members.csv.
inline std::vector<std::vector<double>> read_member_fitness(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    std::vector<std::vector<double>> out;
    while (std::getline(in, line)) {
        int gen = 0;
        std::size_t member = 0;
        double f = 0;
        if (std::sscanf(line.c_str(), "%d,%zu,%lf", &gen, &member, &f) != 3) continue;
        if (static_cast<std::size_t>(gen) >= out.size()) out.resize(static_cast<std::size_t>(gen) + 1);
        out[static_cast<std::size_t>(gen)].push_back(f);
    }
    return out;
}

/// Scores every member of one shared episode.
inline std::vector<double> score_population(const EpisodeResult& r, std::span<const Chromosome> pop, const ExperimentConfig& cfg,
                                            const ScoringFn& scoring) {
    std::vector<double> f(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        f[i] = r.failed(i) ? cfg.failure_score
                           : scoring(r.ledger, static_cast<AgentId>(i), static_cast<std::int64_t>(size(pop[i])), cfg.fitness);
    }
    return f;
}

struct EvolveOptions {
    std::optional<std::filesystem::path> out_dir;
    ScoringFn scoring = default_scoring();
    std::function<void(const GenerationRecord&)> on_generation;
};

/// Seeds the population, then alternates shared-episode evaluation with
/// reproduction for `cfg.generations` rounds. The log holds generations+1
/// records: the seeded population and each generation bred from it.
inline RunLog evolve(const ExperimentConfig& cfg, const EvolveOptions& opt = {}) {
    require_valid(cfg);
    RunLog log;
    log.config = to_json(cfg);
    log.seed = cfg.seed;
    std::optional<RunWriter> writer;
    if (opt.out_dir) {
        writer.emplace(*opt.out_dir);
        writer->write_config(log.config);
    }

    const auto n = static_cast<std::size_t>(cfg.selection.population_size);
    Rng seeding = derive_rng(cfg.seed, "seeding");
    auto pop = seed_population(cfg.initial_tree, n, cfg.mutators, cfg.library, seeding);
    for (std::size_t i = 0; i < n; ++i) {
        pop[i].lineage_id = static_cast<std::int64_t>(i);
        pop[i].generation_born = 0;
    }

    for (int g = 0;; ++g) {
        const auto episode = run_episode(pop, cfg.map, cfg.sim, cfg.library, cfg.fitness,
                                         derive_seed(cfg.seed, "episode", static_cast<std::uint64_t>(g)));
        auto fitness = score_population(episode, pop, cfg, opt.scoring);
        log.generations.push_back(make_record(g, fitness, pop));
        if (writer) writer->append(log.generations.back());
        if (opt.on_generation) opt.on_generation(log.generations.back());
        if (g == cfg.generations) break;

        Rng rng = derive_rng(cfg.seed, "mutation", static_cast<std::uint64_t>(g));
        std::vector<Chromosome> next;
        std::size_t kept = 0;
        if (cfg.mode == RunMode::Evolve) {
            next = next_generation(pop, fitness, cfg.selection, cfg.mutators, cfg.library, rng);
            kept = elite_count(cfg.selection.elitism_rate, n);
        } else {
            next = next_generation_random(pop, cfg.mutators, cfg.library, rng);
        }
        for (std::size_t i = kept; i < next.size(); ++i) next[i].generation_born = g + 1;
        pop = std::move(next);
    }
    if (writer) writer->finish(select_best(log));
    return log;
}

// ------------------------------------------------------------------ evaluation

struct Summary {
    std::size_t n = 0;
    double mean = 0.0, median = 0.0, iqr = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};

/// Linear-interpolation quantile on sorted data (Hyndman-Fan type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(sorted.size() - 1, lo + 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Summary summarize(std::vector<double> xs) {
    Summary s;
    s.n = xs.size();
    if (xs.empty()) return s;
    std::ranges::sort(xs);
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    s.median = quantile_sorted(xs, 0.5);
    s.q1 = quantile_sorted(xs, 0.25);
    s.q3 = quantile_sorted(xs, 0.75);
    s.iqr = s.q3 - s.q1;
    s.min = xs.front();
    s.max = xs.back();
    return s;
}

struct Evaluation {
    std::vector<std::vector<double>> trial_scores;  // [trial][individual]
    Summary summary;                                // over all individuals x trials
};

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

/// The whole zombie population runs `tree`; trial seeds derive from the
/// master seed and the trial index only. Throws CompileError.
inline Evaluation evaluate(const Chromosome& tree, const ExperimentConfig& cfg, int trials, unsigned jobs = default_jobs(),
                           const ScoringFn& scoring = default_scoring()) {
    (void)compile(tree, cfg.library, arena_primitives());
    const auto n = static_cast<std::size_t>(cfg.sim.zombie_count);
    const std::vector<Chromosome> pop(n, tree);
    Evaluation ev;
    ev.trial_scores.resize(static_cast<std::size_t>(std::max(trials, 0)));
    parallel_for(ev.trial_scores.size(), jobs, [&](std::size_t t) {
        const auto r = run_episode(pop, cfg.map, cfg.sim, cfg.library, cfg.fitness, derive_seed(cfg.seed, "evaluate", t));
        ev.trial_scores[t] = score_population(r, pop, cfg, scoring);
    });
    std::vector<double> all;
    for (const auto& t : ev.trial_scores) all.insert(all.end(), t.begin(), t.end());
    ev.summary = summarize(std::move(all));
    return ev;
}

struct ComparisonRow {
    std::string name;
    Evaluation evaluation;
};

inline std::vector<ComparisonRow> compare(const std::vector<std::pair<std::string, Chromosome>>& trees, const ExperimentConfig& cfg,
                                          int trials, unsigned jobs = default_jobs()) {
    if (trees.size() < 2) throw ConfigError("compare needs at least two trees");
    std::vector<ComparisonRow> rows;
    for (const auto& [name, tree] : trees) rows.push_back({name, evaluate(tree, cfg, trials, jobs)});
    return rows;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "name,median,iqr,mean,min,max,n\n";
    for (const auto& r : rows) {
        const auto& s = r.evaluation.summary;
        out += r.name + "," + format_real(s.median) + "," + format_real(s.iqr) + "," + format_real(s.mean) + "," + format_real(s.min) +
               "," + format_real(s.max) + "," + std::to_string(s.n) + "\n";
    }
    return out;
}

/// Raw per-trial scores, one row per individual, for external statistics.
inline std::string comparison_trials_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "name,trial,individual,score\n";
    for (const auto& r : rows)
        for (std::size_t t = 0; t < r.evaluation.trial_scores.size(); ++t)
            for (std::size_t i = 0; i < r.evaluation.trial_scores[t].size(); ++i)
                out += r.name + "," + std::to_string(t) + "," + std::to_string(i) + "," + format_real(r.evaluation.trial_scores[t][i]) + "\n";
    return out;
}

}  // namespace evobt
