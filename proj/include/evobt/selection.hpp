#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/chromosome.hpp"
#include "evobt/genetic_ops.hpp"
#include "evobt/rng.hpp"

namespace evobt {

struct SelectionConfig {
    int tournament_k = 4;
    double elitism_rate = 0.12;
    int population_size = 12;

    bool operator==(const SelectionConfig&) const = default;
};

inline std::vector<std::string> config_problems(const SelectionConfig& s) {
    std::vector<std::string> out;
    if (s.population_size < 2) out.push_back("selection.population_size must be at least 2");
    if (s.tournament_k < 1 || s.tournament_k > s.population_size)
        out.push_back("selection.tournament_k must lie in [1, population_size]");
    if (!(s.elitism_rate >= 0.0 && s.elitism_rate < 1.0)) out.push_back("selection.elitism_rate must lie in [0, 1)");
    return out;
}

/// Number of elite slots, ceil(rate * n). The epsilon absorbs products such
/// as 0.12 * 50 that land a hair above an integer.
inline std::size_t elite_count(double rate, std::size_t n) {
    const double raw = rate * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

/// Best of k members sampled without replacement; ties are broken uniformly
/// among the tied entrants.
inline std::size_t tournament_select(std::span<const double> fitnesses, std::size_t k, Rng& rng) {
    const std::size_t n = fitnesses.size();
    k = std::clamp<std::size_t>(k, 1, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_index(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    double best = fitnesses[idx[0]];
    for (std::size_t i = 1; i < k; ++i) best = std::max(best, fitnesses[idx[i]]);
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < k; ++i)
        if (fitnesses[idx[i]] == best) tied.push_back(idx[i]);
    return tied.size() == 1 ? tied.front() : tied[uniform_index(rng, tied.size())];
}

/// Member indices ordered by descending fitness, ties by lower index.
inline std::vector<std::size_t> rank_by_fitness(std::span<const double> fitnesses) {
    std::vector<std::size_t> order(fitnesses.size());
    std::iota(order.begin(), order.end(), 0);
    std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return fitnesses[a] > fitnesses[b]; });
    return order;
}

/// Elites first (unmodified), then children of independent tournament picks.
inline std::vector<Chromosome> next_generation(std::span<const Chromosome> pop, std::span<const double> fitnesses,
                                               const SelectionConfig& sel, const MutatorConfig& mut,
                                               const NodeLibrary& lib, Rng& rng) {
    const std::size_t n = pop.size();
    std::vector<Chromosome> out;
    out.reserve(n);
    const auto order = rank_by_fitness(fitnesses);
    const std::size_t elites = elite_count(sel.elitism_rate, n);
    for (std::size_t i = 0; i < elites; ++i) out.push_back(pop[order[i]]);

    const auto k = static_cast<std::size_t>(sel.tournament_k);
    const std::uint64_t base = rng();
    for (std::size_t slot = elites; slot < n; ++slot) {
        Rng slot_rng{mix64(base + mix64(slot))};
        const std::size_t primary = tournament_select(fitnesses, k, slot_rng);
        const std::size_t donor = tournament_select(fitnesses, k, slot_rng);
        out.push_back(make_child(pop[primary], pop[donor], mut, lib, slot_rng));
    }
    return out;
}

/// Fitness-blind control: every member reproduces once, paired with a
/// uniformly random donor. No elitism.
inline std::vector<Chromosome> next_generation_random(std::span<const Chromosome> pop, const MutatorConfig& mut,
                                                      const NodeLibrary& lib, Rng& rng) {
    std::vector<Chromosome> out;
    out.reserve(pop.size());
    const std::uint64_t base = rng();
    for (std::size_t i = 0; i < pop.size(); ++i) {
        Rng slot_rng{mix64(base + mix64(i))};
        const std::size_t donor = uniform_index(slot_rng, pop.size());
        out.push_back(make_child(pop[i], pop[donor], mut, lib, slot_rng));
    }
    return out;
}

inline nlohmann::json to_json(const SelectionConfig& s) {
    return {{"tournament_k", s.tournament_k}, {"elitism_rate", s.elitism_rate}, {"population_size", s.population_size}};
}

inline SelectionConfig selection_config_from_json(const nlohmann::json& j) {
    SelectionConfig s;
    s.tournament_k = j.value("tournament_k", s.tournament_k);
    s.elitism_rate = j.value("elitism_rate", s.elitism_rate);
    s.population_size = j.value("population_size", s.population_size);
    return s;
}

}  // namespace evobt
