#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "evobt/selection.hpp"
#include "test_support.hpp"

using namespace evobt;
using evobt::testing::default_library;
using evobt::testing::TreeGenerator;

namespace {

MutatorConfig zero_config() {
    MutatorConfig c;
    c.crossover_prob = 0.0;
    c.point_prob = 0.0;
    return c;
}

std::vector<Chromosome> random_population(std::size_t n, Rng& rng) {
    TreeGenerator gen(default_library());
    std::vector<Chromosome> pop;
    for (std::size_t i = 0; i < n; ++i) {
        pop.push_back(gen(rng));
        pop.back().lineage_id = static_cast<std::int64_t>(i);
    }
    return pop;
}

// P(best of k drawn without replacement from n distinct values has rank r),
// by enumerating all k-subsets.
std::vector<double> exact_tournament_probs(std::size_t n, std::size_t k) {
    std::vector<double> p(n, 0.0);
    double subsets = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        subsets += 1.0;
        std::size_t best = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) best = i;
        p[best] += 1.0;
    }
    for (auto& x : p) x /= subsets;
    return p;
}

}  // namespace

TEST(Tournament, FullFieldPicksArgmax) {
    Rng rng{1};
    const std::vector<double> f{3.0, 9.0, -1.0, 4.0, 8.5};
    for (int i = 0; i < 200; ++i) EXPECT_EQ(tournament_select(f, f.size(), rng), 1u);
}

TEST(Tournament, SingleEntrantIsUniform) {
    Rng rng{2};
    const std::vector<double> f{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<int> hits(10, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++hits[tournament_select(f, 1, rng)];
    for (int h : hits) EXPECT_NEAR(h / double(n), 0.10, 0.007);
}

TEST(Tournament, MatchesSubsetEnumeration) {
    Rng rng{3};
    const std::vector<double> f{1, 2, 3, 4, 5, 6, 7, 8};
    const auto exact = exact_tournament_probs(8, 4);
    EXPECT_NEAR(exact[7], 0.5, 1e-12);
    std::vector<int> hits(8, 0);
    const int n = 100000;
    for (int i = 0; i < n; ++i) ++hits[tournament_select(f, 4, rng)];
    EXPECT_NEAR(hits[7] / double(n), 0.5, 0.008);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(hits[i] / double(n), exact[i], 0.008) << i;
}

TEST(Tournament, TiesSplitEvenly) {
    Rng rng{4};
    const std::vector<double> f{5.0, 5.0, 1.0};
    std::vector<int> hits(3, 0);
    for (int i = 0; i < 20000; ++i) ++hits[tournament_select(f, 3, rng)];
    EXPECT_EQ(hits[2], 0);
    EXPECT_NEAR(hits[0] / 20000.0, 0.5, 0.02);
}

TEST(Tournament, PressureGrowsWithK) {
    Rng rng{5};
    std::vector<double> f(12);
    std::iota(f.begin(), f.end(), 0.0);
    double prev = -1.0;
    for (std::size_t k = 1; k <= 12; ++k) {
        double sum = 0.0;
        for (int i = 0; i < 20000; ++i) sum += f[tournament_select(f, k, rng)];
        const double mean = sum / 20000.0;
        EXPECT_GT(mean, prev - 0.05) << k;
        prev = mean;
    }
    EXPECT_DOUBLE_EQ(prev, 11.0);
}

TEST(Elitism, SlotCounts) {
    EXPECT_EQ(elite_count(0.12, 50), 6u);
    EXPECT_EQ(elite_count(0.12, 12), 2u);
    EXPECT_EQ(elite_count(0.12, 100), 12u);
    EXPECT_EQ(elite_count(0.0, 10), 0u);
    EXPECT_EQ(elite_count(0.5, 3), 2u);
}

TEST(Elitism, ElitesCarriedUnmodified) {
    Rng rng{6};
    const auto pop = random_population(50, rng);
    std::vector<double> fit(50);
    for (std::size_t i = 0; i < 50; ++i) fit[i] = std::sin(double(i) * 1.7) * 100.0;
    SelectionConfig sel;
    sel.population_size = 50;
    MutatorConfig mut;
    mut.crossover_prob = 1.0;
    mut.point_prob = 0.5;
    const auto next = next_generation(pop, fit, sel, mut, default_library(), rng);
    ASSERT_EQ(next.size(), 50u);

    // oracle: the six highest fitnesses, found by repeated argmax
    std::vector<double> f = fit;
    for (std::size_t e = 0; e < 6; ++e) {
        const auto best = static_cast<std::size_t>(std::ranges::max_element(f) - f.begin());
        EXPECT_EQ(serialize(next[e]), serialize(pop[best])) << "elite slot " << e;
        f[best] = -1e300;
    }
    for (const auto& c : next) EXPECT_TRUE(is_valid(c, &default_library()));
}

TEST(Elitism, ZeroRateHasNoElites) {
    Rng rng{7};
    const auto pop = random_population(10, rng);
    std::vector<double> fit(10, 0.0);
    fit[3] = 1.0;
    SelectionConfig sel;
    sel.elitism_rate = 0.0;
    sel.tournament_k = 1;
    MutatorConfig mut;
    mut.crossover_prob = 1.0;
    mut.point_prob = 0.3;
    int kept = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto next = next_generation(pop, fit, sel, mut, default_library(), rng);
        kept += serialize(next[0]) == serialize(pop[3]) ? 1 : 0;
    }
    EXPECT_LT(kept, 25);
}

TEST(NextGeneration, PopulationSizeInvariant) {
    Rng rng{8};
    for (std::size_t n : {2u, 3u, 12u, 33u}) {
        const auto pop = random_population(n, rng);
        std::vector<double> fit(n);
        for (std::size_t i = 0; i < n; ++i) fit[i] = double(i % 5);
        SelectionConfig sel;
        sel.population_size = static_cast<int>(n);
        sel.tournament_k = static_cast<int>(std::min<std::size_t>(4, n));
        EXPECT_EQ(next_generation(pop, fit, sel, MutatorConfig{}, default_library(), rng).size(), n);
        EXPECT_EQ(next_generation_random(pop, MutatorConfig{}, default_library(), rng).size(), n);
    }
}

TEST(NextGeneration, ChildrenDescendFromTournamentWinners) {
    // with no variation, every non-elite child is a copy of some member; with a
    // dominant member and k = N it must be that member
    Rng rng{9};
    const auto pop = random_population(12, rng);
    std::vector<double> fit(12, 1.0);
    fit[5] = 2.0;
    SelectionConfig sel;
    sel.tournament_k = 12;
    const auto next = next_generation(pop, fit, sel, zero_config(), default_library(), rng);
    EXPECT_EQ(serialize(next[0]), serialize(pop[5]));
    for (std::size_t i = elite_count(sel.elitism_rate, 12); i < next.size(); ++i) EXPECT_EQ(serialize(next[i]), serialize(pop[5]));
}

TEST(NextGeneration, DeterministicForSeed) {
    Rng a{10}, b{10};
    Rng g{11};
    const auto pop = random_population(12, g);
    std::vector<double> fit(12);
    for (std::size_t i = 0; i < 12; ++i) fit[i] = double((i * 7) % 12);
    const auto x = next_generation(pop, fit, SelectionConfig{}, MutatorConfig{}, default_library(), a);
    const auto y = next_generation(pop, fit, SelectionConfig{}, MutatorConfig{}, default_library(), b);
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(serialize(x[i]), serialize(y[i]));
}

TEST(RandomOperator, NoVariationPreservesPositions) {
    Rng rng{12};
    const auto pop = random_population(15, rng);
    const auto next = next_generation_random(pop, zero_config(), default_library(), rng);
    ASSERT_EQ(next.size(), pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) EXPECT_EQ(serialize(next[i]), serialize(pop[i]));
}

TEST(RandomOperator, DonorsAreUniform) {
    // crossover only, donor population of lone-marker trees: count how often each
    // marker ends up in slot 0
    std::vector<Chromosome> pop;
    const std::vector<std::string> marks{"idle", "stop_moving", "face_target", "step_forward"};
    for (const auto& m : marks) {
        Chromosome c;
        c.root = make_composite("selector", {make_task(m)});
        pop.push_back(c);
    }
    MutatorConfig mut = zero_config();
    mut.crossover_prob = 1.0;
    Rng rng{13};
    std::map<std::string, int> hits;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++hits[next_generation_random(pop, mut, default_library(), rng)[0].root.children[0].payload.id];
    for (const auto& m : marks) EXPECT_NEAR(hits[m] / double(n), 0.25, 0.015) << m;
}

TEST(SelectionConfig, Validation) {
    EXPECT_TRUE(config_problems(SelectionConfig{}).empty());
    SelectionConfig bad;
    bad.tournament_k = 13;
    EXPECT_EQ(config_problems(bad).size(), 1u);
    bad.elitism_rate = 1.0;
    EXPECT_EQ(config_problems(bad).size(), 2u);
    EXPECT_EQ(selection_config_from_json(to_json(SelectionConfig{})), SelectionConfig{});
}
