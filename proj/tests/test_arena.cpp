#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "evobt/arena.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace evobt;
using evobt::testing::data_path;
using evobt::testing::default_library;
using evobt::testing::TreeGenerator;
using evobt::testing::brute_force_cost;
using evobt::testing::map_from_rows;

namespace {

Chromosome tree_of(ChromosomeNode root) {
    Chromosome c;
    c.root = std::move(root);
    return c;
}

const ArenaMap& small_map() {
    static const ArenaMap m = load_map(data_path("maps/small.map"));
    return m;
}

SimConfig quiet_config() {
    SimConfig cfg;
    cfg.human.base_speed = 0.0;
    return cfg;
}

}  // namespace

TEST(Maps, BundledPresetsLoad) {
    for (const char* name : {"small", "medium", "large"}) {
        const auto m = load_map(data_path(std::string("maps/") + name + ".map"));
        EXPECT_EQ(m.name, name);
        EXPECT_TRUE(map_problems(m).empty()) << name;
        EXPECT_FALSE(m.waypoints.empty());
        EXPECT_FALSE(m.zombie_spawns.empty());
        EXPECT_FALSE(m.human_spawns.empty());
    }
    EXPECT_EQ(small_map().width, 16);
    EXPECT_EQ(load_map(data_path("maps/large.map")).width, 48);
}

TEST(Maps, MediumIsSmallTiledWithSeamsOpened) {
    const auto medium = load_map(data_path("maps/medium.map"));
    EXPECT_EQ(tile_map(small_map(), 2, 2, "medium"), medium);
    EXPECT_EQ(medium.waypoints.size(), 4 * small_map().waypoints.size());
    for (int x = 1; x < 31; ++x) EXPECT_TRUE(medium.is_free(Cell{x, 15}) && medium.is_free(Cell{x, 16})) << x;
}

TEST(Maps, FormatRoundTrips) {
    EXPECT_EQ(parse_map(format_map(small_map())), small_map());
}

TEST(Maps, RejectsBadDocuments) {
    EXPECT_THROW(parse_map("name x\nsize 3 1\n#.#\n#.#\n"), MapError);
    EXPECT_THROW(parse_map("name x\nsize 3 1\n#?#\n"), MapError);
    EXPECT_THROW(parse_map("name x\nsize 4 1\n#.#\n"), MapError);
    EXPECT_THROW(parse_map("name x\nsize 5 1\n.#.#.\n"), MapError);  // disconnected
    EXPECT_THROW(parse_map("name x\n...\n"), MapError);
    ArenaMap m = ArenaMap::open(3, 3);
    m.set_blocked({1, 1}, true);
    m.waypoints.push_back({1, 1});
    EXPECT_FALSE(map_problems(m).empty());
}

TEST(Maps, DiagonalsCannotCutCorners) {
    const auto m = map_from_rows({"..", "#."});
    EXPECT_FALSE(step_allowed(m, {0, 0}, {1, 1}));
    EXPECT_FALSE(segment_clear(m, {0.5, 0.5}, {1.5, 1.5}));
    EXPECT_TRUE(segment_clear(m, {0.5, 0.5}, {1.5, 0.5}));
    EXPECT_FALSE(segment_clear(m, {1.5, 0.5}, {0.5, 1.5}));
}

TEST(FindPath, SameCellIsEmpty) {
    const auto m = ArenaMap::open(4, 4);
    const auto p = find_path(m, {2, 2}, {2, 2});
    ASSERT_TRUE(p);
    EXPECT_TRUE(p->cells.empty());
    EXPECT_EQ(p->cost.value(), 0.0);
}

TEST(FindPath, OpenGridDiagonal) {
    const auto m = ArenaMap::open(5, 5);
    const auto p = find_path(m, {0, 0}, {4, 4});
    ASSERT_TRUE(p);
    EXPECT_EQ(p->cost, (PathCost{0, 4}));
    EXPECT_DOUBLE_EQ(p->cost.value(), 4 * std::numbers::sqrt2);
}

TEST(FindPath, BlockedStartAndUnreachable) {
    const auto m = map_from_rows({"..#..", "..#..", "..#.."});
    EXPECT_THROW(find_path(m, {2, 0}, {0, 0}), BlockedStart);
    EXPECT_FALSE(find_path(m, {0, 0}, {4, 2}));
}

TEST(FindPath, MatchesBruteForceOnRandomMaps) {
    Rng rng{8};
    int compared = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 3 + static_cast<int>(uniform_index(rng, 10));
        const int h = 3 + static_cast<int>(uniform_index(rng, 10));
        ArenaMap m = ArenaMap::open(w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) m.set_blocked({x, y}, bernoulli(rng, 0.3));
        const auto free = m.free_cells();
        if (free.size() < 2) continue;
        for (int q = 0; q < 5; ++q) {
            const Cell a = free[uniform_index(rng, free.size())];
            const Cell b = free[uniform_index(rng, free.size())];
            const auto got = find_path(m, a, b);
            const auto want = brute_force_cost(m, a, b);
            ASSERT_EQ(got.has_value(), want.has_value());
            if (!got) continue;
            ++compared;
            EXPECT_EQ(got->cost, *want);
            // the returned cells form a legal walk with that cost
            Cell at = a;
            PathCost walked;
            for (const auto& c : got->cells) {
                const Step s{c.x - at.x, c.y - at.y};
                ASSERT_TRUE(std::abs(s.dx) <= 1 && std::abs(s.dy) <= 1 && step_allowed(m, at, s));
                (s.dx != 0 && s.dy != 0 ? walked.diagonal : walked.orthogonal) += 1;
                at = c;
            }
            EXPECT_EQ(at, b);
            EXPECT_EQ(walked, got->cost);
        }
    }
    EXPECT_GT(compared, 200);
}

TEST(FindPath, DistanceFieldAgrees) {
    const auto& m = small_map();
    const auto field = distance_field(m, {13, 1});
    for (const auto& c : m.free_cells()) {
        const auto p = find_path(m, c, {13, 1});
        ASSERT_TRUE(p);
        EXPECT_NEAR(field[m.index(c)], p->cost.value(), 1e-9);
    }
}

TEST(Human, WandersWithoutZombies) {
    SimConfig cfg;
    World w(small_map(), cfg, 3);
    const int id = w.add_agent(Role::Human, {3.5, 3.5}, 0.0);
    const Vec2 start = w.agent(id).position;
    for (int i = 0; i < 100; ++i) {
        auto& h = w.agent(id);
        const auto cmd = human_controller_step(w, h);
        ASSERT_TRUE(segment_clear(w.map(), h.position, h.position + cmd.displacement));
        h.position = h.position + cmd.displacement;
        if (cmd.displacement.length() > 0) h.heading = heading_of(cmd.displacement);
    }
    EXPECT_GT(distance(w.agent(id).position, start), 0.0);
}

TEST(Human, FleesAdjacentZombie) {
    const auto open = ArenaMap::open(20, 20);
    SimConfig cfg;
    int better = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        World w(open, cfg, 1000 + static_cast<std::uint64_t>(trial));
        const double ang = uniform_real(w.rng(), -std::numbers::pi, std::numbers::pi);
        const Vec2 hp{10.0, 10.0};
        const Vec2 zp = hp + from_heading(ang) * 0.8;
        w.add_agent(Role::Zombie, zp, 0.0);
        const int h = w.add_agent(Role::Human, hp, uniform_real(w.rng(), -std::numbers::pi, std::numbers::pi));
        const Vec2 target = human_choose_target(w, w.agent(h));
        better += distance(target, zp) > distance(hp, zp) ? 1 : 0;
    }
    EXPECT_GE(better, 950);
}

TEST(Human, NoStaminaMeansBaseSpeed) {
    const auto open = ArenaMap::open(20, 20);
    SimConfig cfg;
    World w(open, cfg, 4);
    const int z = w.add_agent(Role::Zombie, {5.0, 10.0}, 0.0);
    const int h = w.add_agent(Role::Human, {8.0, 10.0}, 0.0);
    w.agent(z).moved = true;
    w.agent(z).velocity = {2.4, 0.0};
    ASSERT_TRUE(human_threatened(w, w.agent(h)));
    const auto sprint = human_controller_step(w, w.agent(h));
    EXPECT_TRUE(sprint.sprinting);
    EXPECT_DOUBLE_EQ(sprint.speed, cfg.human.base_speed * cfg.human.sprint_multiplier);
    w.agent(h).stamina = 0.0;
    const auto tired = human_controller_step(w, w.agent(h));
    EXPECT_FALSE(tired.sprinting);
    EXPECT_EQ(tired.speed, cfg.human.base_speed);
}

TEST(Chase, StationaryZombieNeverFires) {
    SimConfig cfg;
    AgentState z, h;
    z.position = {0, 0};
    h.role = Role::Human;
    h.position = {3, 0};
    std::vector<AgentState> agents{z, h};
    ChaseDetector d;
    for (int i = 0; i < 500; ++i) ASSERT_EQ(d.step(chase_condition(agents[0], agents, cfg), cfg.chase), ChaseEvent::None);
}

TEST(Chase, StraightApproachStartsOnce) {
    SimConfig cfg;
    std::vector<AgentState> agents(2);
    agents[0].position = {0, 0};
    agents[1].role = Role::Human;
    agents[1].position = {5, 0};
    ChaseDetector d;
    int started = 0, broken = 0;
    for (int i = 0; i < 300; ++i) {
        auto& z = agents[0];
        const Vec2 to_h = agents[1].position - z.position;
        const double step = std::min(0.24, std::max(0.0, to_h.length() - 0.5));
        z.moved = step > 0;
        z.velocity = z.moved ? to_h * (step / to_h.length() / cfg.dt) : Vec2{};
        z.position = z.position + z.velocity * cfg.dt;
        const auto e = d.step(chase_condition(z, agents, cfg), cfg.chase);
        started += e == ChaseEvent::Started;
        broken += e == ChaseEvent::Broken;
    }
    EXPECT_EQ(started, 1);
    EXPECT_EQ(broken, 0);
}

TEST(Chase, AlternatingCyclesPairUp) {
    SimConfig cfg;
    cfg.chase.min_ticks = 10;
    cfg.chase.break_ticks = 10;
    std::vector<AgentState> agents(2);
    agents[0].position = {0, 0};
    agents[1].role = Role::Human;
    agents[1].position = {5, 0};
    ChaseDetector d;
    int started = 0, broken = 0;
    const int cycles = 7;
    for (int c = 0; c < cycles; ++c) {
        for (int phase = 0; phase < 2; ++phase) {
            for (int t = 0; t < 20; ++t) {
                auto& z = agents[0];
                z.moved = true;
                z.velocity = {phase == 0 ? 0.5 : -0.5, 0.0};
                z.position = z.position + z.velocity * cfg.dt;
                const auto e = d.step(chase_condition(z, agents, cfg), cfg.chase);
                started += e == ChaseEvent::Started;
                broken += e == ChaseEvent::Broken;
            }
        }
    }
    EXPECT_EQ(started, cycles);
    EXPECT_EQ(broken, cycles);
}

TEST(Primitives, RosterIsFullyImplemented) {
    const auto issues = arena_library_problems(default_library());
    for (const auto& i : issues) ADD_FAILURE() << to_string(i.kind) << " " << i.id << " " << i.detail;
    Rng rng{2};
    TreeGenerator gen(default_library());
    for (int i = 0; i < 500; ++i) EXPECT_NO_THROW(compile(gen(rng), default_library(), arena_primitives()));
}

TEST(Episode, DoNothingTreesOnlyIdle) {
    const auto idle = load_tree(data_path("trees/do_nothing.btree.json"));
    SimConfig cfg = quiet_config();
    cfg.zombie_count = 6;
    const std::vector<Chromosome> trees(6, idle);
    const auto r = run_episode(trees, small_map(), cfg, default_library(), bundled_spec(), 17);
    ASSERT_EQ(r.ledger.agents().size(), 6u);
    for (int z = 0; z < 6; ++z) {
        EXPECT_EQ(r.ledger.value(z, keys::idle_ticks), cfg.ticks());
        EXPECT_EQ(r.ledger.value(z, keys::damage_dealt), 0.0);
        EXPECT_EQ(r.ledger.value(z, keys::distance_patrolled), 0.0);
        EXPECT_FALSE(r.failed(static_cast<std::size_t>(z)));
    }
}

TEST(Episode, ClosedFormDamageOnCorneredHuman) {
    const auto chase = tree_of(make_composite("selector", {make_task("move_toward_target_enemy")}));
    const auto room = map_from_rows({"######", "#....#", "#....#", "#....#", "######"});
    SimConfig cfg = quiet_config();
    cfg.episode_seconds = 4.0;
    Episode ep(room, cfg, default_library(), bundled_spec(), 5);
    const int z = ep.add_zombie(chase, {2.2, 2.2}, std::atan2(-1.0, -1.0));
    ep.add_human({1.3, 1.3}, 0.0);
    const auto r = ep.run();
    const double expect = cfg.damage_per_second * cfg.episode_seconds;
    EXPECT_NEAR(r.ledger.value(z, keys::damage_dealt), expect, cfg.damage_per_second * cfg.dt + 1e-9);
    EXPECT_NEAR(r.total_damage, r.health_lost.begin()->second, 1e-9);
}

TEST(Episode, DeterministicForSeed) {
    Rng rng{3};
    TreeGenerator gen(default_library());
    std::vector<Chromosome> trees;
    for (int i = 0; i < 12; ++i) trees.push_back(gen(rng));
    const auto medium = load_map(data_path("maps/medium.map"));
    const SimConfig cfg;
    const auto a = run_episode(trees, medium, cfg, default_library(), bundled_spec(), 99, true);
    const auto b = run_episode(trees, medium, cfg, default_library(), bundled_spec(), 99, true);
    const auto c = run_episode(trees, medium, cfg, default_library(), bundled_spec(), 100, true);
    EXPECT_EQ(a.ledger, b.ledger);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_NE(a.trace, c.trace);
    EXPECT_EQ(a.trace.rfind(kTraceHeader, 0), 0u);
}

TEST(Episode, DamageIsConservedAndAgentsStayOutOfWalls) {
    const auto chase = load_tree(data_path("trees/manual_r1.btree.json"));
    Rng rng{4};
    TreeGenerator gen(default_library());
    for (int round = 0; round < 4; ++round) {
        std::vector<Chromosome> trees;
        for (int i = 0; i < 12; ++i) trees.push_back(i % 2 ? chase : gen(rng));
        SimConfig cfg;
        Episode ep(small_map(), cfg, default_library(), bundled_spec(), 40 + static_cast<std::uint64_t>(round));
        ep.populate(trees);
        for (int t = 0; t < cfg.ticks(); ++t) {
            ep.step();
            for (const auto& a : ep.world().agents()) {
                ASSERT_TRUE(small_map().is_free(a.position)) << "tick " << t << " agent " << a.id;
                ASSERT_GE(a.health, 0.0);
                ASSERT_LE(a.health, cfg.max_health);
                ASSERT_GE(a.stamina, 0.0);
            }
        }
        const auto& r = ep.result();
        double ledger_damage = 0.0;
        for (int z = 0; z < 12; ++z) ledger_damage += r.ledger.value(z, keys::damage_dealt);
        double lost = 0.0;
        for (const auto& [h, v] : r.health_lost) lost += v;
        EXPECT_NEAR(ledger_damage, lost, 1e-9);
        EXPECT_GT(lost, 0.0) << "round " << round;
    }
}

TEST(Episode, PerceptionNamesNearestVisibleHuman) {
    Rng rng{6};
    const auto& m = small_map();
    SimConfig cfg;
    const auto idle = load_tree(data_path("trees/do_nothing.btree.json"));
    int sensed = 0;
    for (int trial = 0; trial < 500; ++trial) {
        Episode ep(m, cfg, default_library(), bundled_spec(), static_cast<std::uint64_t>(trial));
        auto& w = ep.world();
        const int z = ep.add_zombie(idle, w.random_spawn_point({}), uniform_real(rng, -3.14, 3.14));
        for (int i = 0; i < 4; ++i) ep.add_human(w.random_spawn_point({}), 0.0);
        ep.perceive_all();

        const auto& zs = w.agent(z);
        std::optional<int> want;
        double best = 1e300;
        for (const auto& h : w.agents()) {
            if (h.role != Role::Human) continue;
            const double dx = h.position.x - zs.position.x, dy = h.position.y - zs.position.y;
            const double d = std::sqrt(dx * dx + dy * dy);
            const double off = std::abs(wrap_angle(std::atan2(dy, dx) - zs.heading));
            if (d <= cfg.perception_radius && off <= deg_to_rad(cfg.fov_deg / 2) && segment_clear(m, zs.position, h.position) && d < best) {
                best = d;
                want = h.id;
            }
        }
        const auto* got = zs.blackboard.get_if<EntityRef>(bb::sensed_player);
        ASSERT_EQ(got != nullptr, want.has_value()) << trial;
        if (got) {
            ++sensed;
            EXPECT_EQ(got->id, *want);
            EXPECT_EQ(*zs.blackboard.get_if<EntityRef>(bb::target_enemy), *got);
        }
    }
    EXPECT_GT(sensed, 50);
}

TEST(Episode, CompileFailureFlagsZombie) {
    Chromosome bad;
    bad.root.children.push_back(make_task("no_such_task"));
    const auto idle = load_tree(data_path("trees/do_nothing.btree.json"));
    SimConfig cfg = quiet_config();
    cfg.episode_seconds = 1.0;
    const std::vector<Chromosome> trees{idle, bad};
    const auto r = run_episode(trees, small_map(), cfg, default_library(), bundled_spec(), 1);
    EXPECT_FALSE(r.failed(0));
    EXPECT_TRUE(r.failed(1));
}

TEST(Movement, StraightLineStallsWherePathfindingRoundsTheWall) {
    const auto m = map_from_rows({"#########", "#.......#", "#...#...#", "#...#...#", "#...#...#", "#.......#", "#########"});
    SimConfig cfg = quiet_config();
    cfg.perception = false;
    const auto toward = tree_of(make_composite("selector", {make_task("move_toward_target_enemy")}));
    const auto move_to = tree_of(make_composite("selector", {make_task("move_to_sensed_player")}));

    auto run = [&](const Chromosome& tree) {
        Episode ep(m, cfg, default_library(), bundled_spec(), 1);
        const int z = ep.add_zombie(tree, {1.5, 3.5}, 0.0);
        const int h = ep.add_human({7.5, 3.5}, 0.0);
        auto& board = ep.world().agent(z).blackboard;
        board.set(bb::sensed_player, EntityRef{h});
        board.set(bb::target_enemy, EntityRef{h});
        double closest = 1e300;
        double max_x = 0.0;
        for (int t = 0; t < 100; ++t) {
            ep.step();
            closest = std::min(closest, distance(ep.world().agent(z).position, ep.world().agent(h).position));
            max_x = std::max(max_x, ep.world().agent(z).position.x);
        }
        return std::pair{closest, max_x};
    };

    const auto [gap, reach] = run(toward);
    EXPECT_LT(reach, 4.0);
    EXPECT_GT(gap, cfg.attack_range);

    const auto [contact, past] = run(move_to);
    EXPECT_LE(contact, cfg.attack_range);
    EXPECT_GT(past, 4.0);
}

TEST(SimConfig, Validation) {
    EXPECT_TRUE(config_problems(SimConfig{}).empty());
    SimConfig c;
    c.episode_seconds = 60.05;
    EXPECT_FALSE(config_problems(c).empty());
    c = SimConfig{};
    c.dt = 0;
    EXPECT_FALSE(config_problems(c).empty());
    EXPECT_EQ(to_json(sim_config_from_json(to_json(SimConfig{}))), to_json(SimConfig{}));
}
