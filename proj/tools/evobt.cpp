// evobt command-line driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evobt/experiment.hpp"
#include "evobt/render.hpp"

namespace fs = std::filesystem;
using namespace evobt;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    unsigned jobs = default_jobs();
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override a config value, dotted.key=value")->take_all();
    cmd->add_option("--seed", c.seed, "master seed override");
    cmd->add_option("--jobs,-j", c.jobs, "worker threads for evaluation")->check(CLI::PositiveNumber);
}

ExperimentConfig load_unchecked(const Common& c, std::optional<RunMode> force = {}) {
    auto overrides = c.overrides;
    if (c.seed) overrides.push_back("experiment.seed=" + std::to_string(*c.seed));
    if (force) overrides.push_back(std::string("experiment.mode=") + to_string(*force));
    return load_experiment(c.config, overrides);
}

ExperimentConfig load(const Common& c, std::optional<RunMode> force = {}) {
    auto cfg = load_unchecked(c, force);
    require_valid(cfg);
    return cfg;
}

fs::path default_out_root() {
    const char* env = std::getenv("EVOBT_OUTPUT_DIR");
    return env && *env ? fs::path(env) : fs::path("runs");
}

std::string seed_dir_name(const ExperimentConfig& cfg) { return cfg.name + "_seed" + std::to_string(cfg.seed); }

void write_or_print(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
        std::cerr << "wrote " << path << "\n";
    }
}

void print_summary(const std::string& name, const Summary& s) {
    std::printf("%s: n=%zu median=%.3f iqr=%.3f mean=%.3f min=%.3f max=%.3f\n", name.c_str(), s.n, s.median, s.iqr, s.mean, s.min, s.max);
}

int run_evolve(const Common& c, const std::string& out, bool quiet, RunMode mode) {
    const auto cfg = load(c, mode);
    const fs::path dir = out.empty() ? default_out_root() / seed_dir_name(cfg) : fs::path(out);
    EvolveOptions opt;
    opt.out_dir = dir;
    if (!quiet) {
        opt.on_generation = [](const GenerationRecord& r) {
            std::fprintf(stderr, "gen %4d  min %10.3f  mean %10.3f  max %10.3f\n", r.generation, r.min, r.mean, r.max);
        };
    }
    const auto log = evolve(cfg, opt);
    const auto pick = select_best_index(log);
    std::printf("best: generation %zu member %zu fitness %.3f\n", pick.generation, pick.member,
                log.generations[pick.generation].fitness[pick.member]);
    std::printf("run directory: %s\n", dir.string().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evolve behavior trees for arena zombies"};
    app.require_subcommand(1);

    Common common;
    std::string out, tree_path, csv_path;
    std::vector<std::string> named_trees;
    int trials = -1;
    bool quiet = false, print_effective = false;

    auto* evolve_cmd = app.add_subcommand("evolve", "run genetic programming");
    add_common(evolve_cmd, common);
    evolve_cmd->add_option("--out,-o", out, "run directory (default $EVOBT_OUTPUT_DIR/<name>_seed<seed>)");
    evolve_cmd->add_flag("--quiet,-q", quiet, "suppress per-generation progress");

    auto* baseline_cmd = app.add_subcommand("baseline", "run the fitness-blind random control");
    add_common(baseline_cmd, common);
    baseline_cmd->add_option("--out,-o", out, "run directory");
    baseline_cmd->add_flag("--quiet,-q", quiet, "suppress per-generation progress");

    auto* eval_cmd = app.add_subcommand("evaluate", "score one tree over repeated episodes");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--tree", tree_path, "tree file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--trials", trials, "episodes (default experiment.eval_trials)")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--csv", csv_path, "write per-trial scores here");

    auto* compare_cmd = app.add_subcommand("compare", "evaluate several trees under the same seeds");
    add_common(compare_cmd, common);
    compare_cmd->add_option("--tree", named_trees, "name=file, repeatable")->required();
    compare_cmd->add_option("--trials", trials, "episodes per tree")->check(CLI::PositiveNumber);
    compare_cmd->add_option("--out,-o", out, "summary CSV path (default stdout)");
    compare_cmd->add_option("--csv", csv_path, "write per-trial scores here");

    auto* dot_cmd = app.add_subcommand("export-dot", "print a tree as a Graphviz digraph");
    dot_cmd->add_option("tree", tree_path, "tree file")->required()->check(CLI::ExistingFile);
    dot_cmd->add_option("--out,-o", out, "output path (default stdout)");

    auto* inspect_cmd = app.add_subcommand("inspect", "print a tree outline with size and depth");
    inspect_cmd->add_option("tree", tree_path, "tree file")->required()->check(CLI::ExistingFile);

    auto* trace_cmd = app.add_subcommand("trace", "run one episode and dump a per-tick CSV");
    add_common(trace_cmd, common);
    trace_cmd->add_option("--tree", tree_path, "tree for every zombie")->required()->check(CLI::ExistingFile);
    trace_cmd->add_option("--out,-o", out, "output path (default stdout)");

    auto* validate_cmd = app.add_subcommand("validate", "check a config and everything it references");
    add_common(validate_cmd, common);
    validate_cmd->add_flag("--print-effective", print_effective, "print the fully resolved config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (evolve_cmd->parsed()) return run_evolve(common, out, quiet, RunMode::Evolve);
        if (baseline_cmd->parsed()) return run_evolve(common, out, quiet, RunMode::Baseline);

        if (eval_cmd->parsed()) {
            const auto cfg = load(common);
            const auto ev = evaluate(load_tree(tree_path), cfg, trials > 0 ? trials : cfg.eval_trials, common.jobs);
            print_summary(fs::path(tree_path).filename().string(), ev.summary);
            if (!csv_path.empty()) write_text_file(csv_path, comparison_trials_csv({{"tree", ev}}));
            return kOk;
        }
        if (compare_cmd->parsed()) {
            const auto cfg = load(common);
            std::vector<std::pair<std::string, Chromosome>> trees;
            for (const auto& nt : named_trees) {
                const auto eq = nt.find('=');
                if (eq == std::string::npos || eq == 0) throw ConfigError("--tree expects name=file, got '" + nt + "'");
                trees.emplace_back(nt.substr(0, eq), load_tree(nt.substr(eq + 1)));
            }
            const auto rows = compare(trees, cfg, trials > 0 ? trials : cfg.eval_trials, common.jobs);
            write_or_print(comparison_csv(rows), out);
            if (!csv_path.empty()) write_text_file(csv_path, comparison_trials_csv(rows));
            return kOk;
        }
        if (dot_cmd->parsed()) {
            write_or_print(to_dot(load_tree(tree_path)), out);
            return kOk;
        }
        if (inspect_cmd->parsed()) {
            const auto tree = load_tree(tree_path);
            std::cout << outline(tree) << "size " << size(tree) << ", depth " << max_depth(tree) << ", lineage " << tree.lineage_id
                      << ", born " << tree.generation_born << "\n";
            for (const auto& p : structural_problems(tree)) std::cout << "problem: " << p << "\n";
            return kOk;
        }
        if (trace_cmd->parsed()) {
            const auto cfg = load(common);
            const auto tree = load_tree(tree_path);
            const std::vector<Chromosome> pop(static_cast<std::size_t>(cfg.sim.zombie_count), tree);
            const auto r = run_episode(pop, cfg.map, cfg.sim, cfg.library, cfg.fitness, derive_seed(cfg.seed, "trace"), true);
            write_or_print(r.trace, out);
            return kOk;
        }
        if (validate_cmd->parsed()) {
            const auto cfg = load_unchecked(common);
            const auto problems = config_problems(cfg);
            for (const auto& p : problems) std::cerr << "error: " << p << "\n";
            if (!problems.empty()) return kConfig;
            if (print_effective) std::cout << to_json(cfg).dump(2) << "\n";
            else std::cout << "OK\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kConfig;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kConfig;
    } catch (const MapError& e) {
        std::cerr << "map error: " << e.what() << "\n";
        return kConfig;
    } catch (const CompileError& e) {
        std::cerr << "tree does not compile: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
