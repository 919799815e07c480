#pragma once

// Fixed-timestep survival arena. Zombies run compiled behavior trees;
// humans run a scripted wander/evade controller. Perception, target
// tracking and damage live here, outside the trees.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/arena_map.hpp"
#include "evobt/behavior_tree.hpp"
#include "evobt/blackboard.hpp"
#include "evobt/chromosome.hpp"
#include "evobt/errors.hpp"
#include "evobt/fitness.hpp"
#include "evobt/geometry.hpp"
#include "evobt/io.hpp"
#include "evobt/node_library.hpp"
#include "evobt/rng.hpp"

namespace evobt {

namespace bb {
inline constexpr const char* sensed_player = "sensed_player";
inline constexpr const char* target_enemy = "target_enemy";
inline constexpr const char* last_known = "last_known_enemy_location";
inline constexpr const char* current_waypoint = "current_waypoint";
}  // namespace bb

struct HumanConfig {
    double base_speed = 2.0;
    double replan_interval = 0.5;
    int candidate_count = 8;
    double candidate_radius = 3.0;
    double sprint_multiplier = 1.6;
    double sprint_duration = 2.0;  // seconds of stamina when full
    double recovery_rate = 0.5;    // stamina seconds regained per second
    double detection_range = 6.0;
    double distance_cap = 8.0;
    double w_distance = 1.0;
    double w_self_visible = 0.3;
    double w_hidden = 0.6;
    double w_heading = 0.4;
};

struct ChaseConfig {
    double angle_threshold_deg = 35.0;
    double distance_threshold = 6.0;
    int min_ticks = 10;
    int break_ticks = 10;
};

struct SimConfig {
    double dt = 0.1;
    double episode_seconds = 60.0;
    int zombie_count = 12;
    int human_count = 3;
    double perception_radius = 8.0;
    double fov_deg = 140.0;
    double target_memory = 1.5;
    double attack_range = 1.0;
    double damage_per_second = 20.0;
    double zombie_speed = 2.4;
    double max_health = 100.0;
    double respawn_seconds = 2.0;
    double near_last_known_radius = 3.0;
    bool perception = true;
    HumanConfig human;
    ChaseConfig chase;

    int ticks() const { return static_cast<int>(std::llround(episode_seconds / dt)); }
};

inline std::vector<std::string> config_problems(const SimConfig& c) {
    std::vector<std::string> out;
    if (!(c.dt > 0)) out.push_back("sim.dt must be positive");
    if (!(c.episode_seconds > 0)) out.push_back("sim.episode_seconds must be positive");
    if (c.dt > 0 && std::abs(c.ticks() * c.dt - c.episode_seconds) > 1e-9 * std::max(1.0, c.episode_seconds))
        out.push_back("sim.episode_seconds must be a multiple of sim.dt");
    if (c.zombie_count < 0 || c.human_count < 0) out.push_back("agent counts must be non-negative");
    if (c.perception_radius < 0 || c.attack_range < 0 || c.damage_per_second < 0) out.push_back("sim ranges must be non-negative");
    if (!(c.fov_deg > 0 && c.fov_deg <= 360)) out.push_back("sim.fov_deg must lie in (0, 360]");
    if (!(c.max_health > 0)) out.push_back("sim.max_health must be positive");
    if (c.human.candidate_count < 1) out.push_back("sim.human.candidate_count must be at least 1");
    if (!(c.human.replan_interval > 0)) out.push_back("sim.human.replan_interval must be positive");
    if (c.human.sprint_duration < 0 || c.human.recovery_rate < 0) out.push_back("sim.human stamina settings must be non-negative");
    if (c.chase.min_ticks < 1 || c.chase.break_ticks < 1) out.push_back("sim.chase tick thresholds must be at least 1");
    return out;
}

enum class Role { Zombie, Human };

inline const char* to_string(Role r) { return r == Role::Zombie ? "zombie" : "human"; }

struct AgentState {
    int id = 0;
    Role role = Role::Zombie;
    Vec2 position;
    double heading = 0.0;
    double speed_multiplier = 1.0;
    double health = 100.0;
    double stamina = 0.0;
    bool alive = true;
    double respawn_timer = 0.0;
    Blackboard blackboard;

    // movement requested this tick, applied after all agents have decided
    std::optional<Vec2> intent;
    Vec2 velocity;  // last applied displacement / dt
    bool moved = false;

    double target_memory = 0.0;

    std::optional<Vec2> goal;
    double replan_timer = 0.0;
    bool sprinting = false;
};

class World {
public:
    World(const ArenaMap& map, const SimConfig& cfg, std::uint64_t seed, BlackboardSchema schema = {})
        : map_(&map), cfg_(cfg), rng_(seed), paths_(map), schema_(std::move(schema)) {}

    const ArenaMap& map() const { return *map_; }
    const SimConfig& cfg() const { return cfg_; }
    Rng& rng() { return rng_; }
    PathCache& paths() { return paths_; }
    double time() const { return time_; }
    void advance_time() { time_ += cfg_.dt; }

    std::vector<AgentState>& agents() { return agents_; }
    const std::vector<AgentState>& agents() const { return agents_; }
    AgentState& agent(int id) { return agents_[static_cast<std::size_t>(id)]; }
    const AgentState& agent(int id) const { return agents_[static_cast<std::size_t>(id)]; }

    int add_agent(Role role, Vec2 pos, double heading) {
        AgentState a;
        a.id = static_cast<int>(agents_.size());
        a.role = role;
        a.position = pos;
        a.heading = heading;
        a.health = cfg_.max_health;
        a.stamina = cfg_.human.sprint_duration;
        if (role == Role::Zombie) a.blackboard = Blackboard(schema_);
        agents_.push_back(std::move(a));
        return agents_.back().id;
    }

    /// Random point in a random cell of `cells` (any free cell if empty).
    Vec2 random_spawn_point(const std::vector<Cell>& cells) {
        const auto pool = cells.empty() ? map_->free_cells() : cells;
        const Cell c = pool[uniform_index(rng_, pool.size())];
        const Vec2 base = center_of(c);
        return {base.x + uniform_real(rng_, -0.3, 0.3), base.y + uniform_real(rng_, -0.3, 0.3)};
    }

    bool line_of_sight(Vec2 a, Vec2 b) const { return segment_clear(*map_, a, b); }

    const AgentState* living(int id) const {
        if (id < 0 || id >= static_cast<int>(agents_.size())) return nullptr;
        const auto& a = agents_[static_cast<std::size_t>(id)];
        return a.alive ? &a : nullptr;
    }

    /// Position of the living agent named by an entity key, if any.
    std::optional<Vec2> entity_position(const Blackboard& board, const std::string& key) const {
        const auto* ref = board.get_if<EntityRef>(key);
        if (!ref) return std::nullopt;
        const auto* a = living(ref->id);
        if (!a) return std::nullopt;
        return a->position;
    }

    double zombie_speed(const AgentState& z) const { return cfg_.zombie_speed * z.speed_multiplier; }

    /// Random free point within `radius` of `around`; none after a few tries.
    std::optional<Vec2> random_point_near(Vec2 around, double radius) {
        for (int attempt = 0; attempt < 12; ++attempt) {
            const double ang = uniform_real(rng_, -std::numbers::pi, std::numbers::pi);
            const double r = radius * std::sqrt(uniform01(rng_));
            const Vec2 p = around + from_heading(ang) * r;
            if (map_->is_free(p)) return p;
        }
        return std::nullopt;
    }

private:
    const ArenaMap* map_;
    SimConfig cfg_;
    Rng rng_;
    PathCache paths_;
    BlackboardSchema schema_;
    std::vector<AgentState> agents_;
    double time_ = 0.0;
};

// ---------------------------------------------------------------- primitives

struct ZombieCtx {
    World* world = nullptr;
    int self = -1;

    AgentState& me() const { return world->agent(self); }
    Blackboard& board() const { return me().blackboard; }
    double dt() const { return world->cfg().dt; }
};

using ZombieTree = TreeInstance<ZombieCtx>;
using ZombieTask = TaskBehavior<ZombieCtx>;
using ZombieDecorator = DecoratorBehavior<ZombieCtx>;

namespace prim {

inline double real_param(const PropertyMap& p, const std::string& name) {
    const auto& v = p.at(name);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    return std::get<double>(v);
}

inline std::string key_param(const PropertyMap& p) { return std::get<BlackboardKey>(p.at("key")).name; }

/// Requests a straight move; false (and no request) if it would hit an obstacle.
inline bool request_move(ZombieCtx& ctx, Vec2 disp) {
    auto& me = ctx.me();
    if (!segment_clear(ctx.world->map(), me.position, me.position + disp)) return false;
    me.intent = disp;
    return true;
}

/// Path-following toward `goal`. Success once within `arrive` of it.
inline NodeStatus path_to(ZombieCtx& ctx, Vec2 goal, double arrive) {
    auto& me = ctx.me();
    const double remaining = distance(me.position, goal);
    if (remaining <= arrive) return NodeStatus::Success;
    const auto step = ctx.world->paths().step_toward(me.position, goal, ctx.world->zombie_speed(me) * ctx.dt());
    if (!step || !request_move(ctx, *step)) return NodeStatus::Failure;
    return distance(me.position + *step, goal) <= arrive ? NodeStatus::Success : NodeStatus::Running;
}

struct Instant : ZombieTask {
    std::function<NodeStatus(ZombieCtx&)> fn;
    explicit Instant(std::function<NodeStatus(ZombieCtx&)> f) : fn(std::move(f)) {}
    NodeStatus tick(ZombieCtx& ctx, double, bool) override { return fn(ctx); }
};

struct Wait : ZombieTask {
    double duration, remaining = 0.0;
    explicit Wait(double d) : duration(d) {}
    NodeStatus tick(ZombieCtx&, double dt, bool resuming) override {
        if (!resuming) remaining = duration;
        if (remaining <= 1e-9) return NodeStatus::Success;
        remaining -= dt;
        return NodeStatus::Running;
    }
};

/// Walks along the current heading for a duration (seconds) or a distance.
struct Advance : ZombieTask {
    double amount, remaining = 0.0;
    bool by_distance;
    Advance(double a, bool dist) : amount(a), by_distance(dist) {}
    NodeStatus tick(ZombieCtx& ctx, double dt, bool resuming) override {
        if (!resuming) remaining = amount;
        if (remaining <= 1e-9) return NodeStatus::Success;
        auto& me = ctx.me();
        double len = ctx.world->zombie_speed(me) * dt;
        if (by_distance) len = std::min(len, remaining);
        if (!request_move(ctx, from_heading(me.heading) * len)) return NodeStatus::Failure;
        remaining -= by_distance ? len : dt;
        return remaining <= 1e-9 && by_distance ? NodeStatus::Success : NodeStatus::Running;
    }
};

struct MoveTo : ZombieTask {
    std::function<std::optional<Vec2>(ZombieCtx&)> goal;
    std::function<double(ZombieCtx&)> arrive;
    MoveTo(std::function<std::optional<Vec2>(ZombieCtx&)> g, std::function<double(ZombieCtx&)> a)
        : goal(std::move(g)), arrive(std::move(a)) {}
    NodeStatus tick(ZombieCtx& ctx, double, bool) override {
        const auto g = goal(ctx);
        if (!g) return NodeStatus::Failure;
        return path_to(ctx, *g, arrive(ctx));
    }
};

/// Straight-line approach with no pathfinding; fails on obstacle contact.
struct MoveToward : ZombieTask {
    NodeStatus tick(ZombieCtx& ctx, double dt, bool) override {
        const auto target = ctx.world->entity_position(ctx.board(), bb::target_enemy);
        if (!target) return NodeStatus::Failure;
        auto& me = ctx.me();
        const double reach = 0.8 * ctx.world->cfg().attack_range;
        const Vec2 d = *target - me.position;
        const double len = d.length();
        if (len <= reach) return NodeStatus::Success;
        const double step = std::min(len - reach * 0.5, ctx.world->zombie_speed(me) * dt);
        if (!request_move(ctx, d * (step / len))) return NodeStatus::Failure;
        return NodeStatus::Running;
    }
};

struct Predicate : ZombieDecorator {
    std::function<bool(ZombieCtx&)> fn;
    explicit Predicate(std::function<bool(ZombieCtx&)> f) : fn(std::move(f)) {}
    bool check(ZombieCtx& ctx, double, bool) override { return fn(ctx); }
};

struct Cooldown : ZombieDecorator {
    double seconds;
    double last_finish = -std::numeric_limits<double>::infinity();
    explicit Cooldown(double s) : seconds(s) {}
    bool check(ZombieCtx& ctx, double, bool host_running) override {
        return host_running || ctx.world->time() - last_finish >= seconds - 1e-9;
    }
    void host_finished(ZombieCtx& ctx, NodeStatus) override { last_finish = ctx.world->time(); }
};

/// Draws once when the host starts and holds that outcome while it runs.
struct ChanceGate : ZombieDecorator {
    double p;
    bool invert;
    bool held = false;
    ChanceGate(double p_, bool inv) : p(p_), invert(inv) {}
    bool check(ZombieCtx& ctx, double, bool host_running) override {
        if (host_running) return held;
        held = bernoulli(ctx.world->rng(), p) != invert;
        return held;
    }
};

inline std::optional<Vec2> position_key(ZombieCtx& ctx, const char* key) {
    const auto* v = ctx.board().get_if<Vec2>(key);
    return v ? std::optional<Vec2>(*v) : std::nullopt;
}

inline std::optional<double> target_distance(ZombieCtx& ctx) {
    const auto t = ctx.world->entity_position(ctx.board(), bb::target_enemy);
    if (!t) return std::nullopt;
    return distance(ctx.me().position, *t);
}

}  // namespace prim

/// Primitive implementations for every behavior the bundled roster binds.
inline const PrimitiveTable<ZombieCtx>& arena_primitives() {
    static const PrimitiveTable<ZombieCtx> table = [] {
        using namespace prim;
        PrimitiveTable<ZombieCtx> t;
        auto instant = [&](const std::string& id, std::function<NodeStatus(ZombieCtx&, const PropertyMap&)> fn) {
            t.tasks[id] = [fn](const PropertyMap& p) -> std::unique_ptr<ZombieTask> {
                return std::make_unique<Instant>([fn, p](ZombieCtx& c) { return fn(c, p); });
            };
        };
        auto ok = [](bool b) { return b ? NodeStatus::Success : NodeStatus::Failure; };

        instant("idle", [](ZombieCtx&, const PropertyMap&) { return NodeStatus::Success; });
        instant("stop", [](ZombieCtx& c, const PropertyMap&) {
            c.me().intent.reset();
            return NodeStatus::Success;
        });
        instant("find_bot_waypoint", [ok](ZombieCtx& c, const PropertyMap&) {
            const auto& wps = c.world->map().waypoints;
            if (wps.empty()) return NodeStatus::Failure;
            const auto current = position_key(c, bb::current_waypoint);
            std::size_t pick = uniform_index(c.world->rng(), wps.size());
            if (current && wps.size() > 1 && cell_of(*current) == wps[pick]) pick = (pick + 1) % wps.size();
            c.board().set(bb::current_waypoint, center_of(wps[pick]));
            return ok(true);
        });
        instant("find_patrol_location", [ok](ZombieCtx& c, const PropertyMap& p) {
            const Vec2 around = position_key(c, bb::current_waypoint).value_or(c.me().position);
            const auto pt = c.world->random_point_near(around, real_param(p, "radius"));
            if (pt) c.board().set(bb::current_waypoint, *pt);
            return ok(pt.has_value());
        });
        instant("find_near_last_known", [ok](ZombieCtx& c, const PropertyMap& p) {
            const auto lk = position_key(c, bb::last_known);
            if (!lk) return NodeStatus::Failure;
            const auto pt = c.world->random_point_near(*lk, real_param(p, "radius"));
            if (pt) c.board().set(bb::current_waypoint, *pt);
            return ok(pt.has_value());
        });
        instant("forget_last_known", [](ZombieCtx& c, const PropertyMap&) {
            c.board().clear(bb::last_known);
            return NodeStatus::Success;
        });
        instant("face_target", [ok](ZombieCtx& c, const PropertyMap&) {
            const auto t = c.world->entity_position(c.board(), bb::target_enemy);
            if (t && distance(*t, c.me().position) > 0) c.me().heading = heading_of(*t - c.me().position);
            return ok(t.has_value());
        });
        instant("random_heading", [](ZombieCtx& c, const PropertyMap&) {
            c.me().heading = uniform_real(c.world->rng(), -std::numbers::pi, std::numbers::pi);
            return NodeStatus::Success;
        });
        instant("rotate_by", [](ZombieCtx& c, const PropertyMap& p) {
            c.me().heading = wrap_angle(c.me().heading + deg_to_rad(real_param(p, "angle")));
            return NodeStatus::Success;
        });
        instant("set_speed", [](ZombieCtx& c, const PropertyMap& p) {
            c.me().speed_multiplier = real_param(p, "multiplier");
            return NodeStatus::Success;
        });
        instant("remember_offset", [ok](ZombieCtx& c, const PropertyMap& p) {
            const Vec2 pt = c.me().position + Vec2{real_param(p, "dx"), real_param(p, "dy")};
            if (!c.world->map().is_free(pt)) return ok(false);
            c.board().set(bb::current_waypoint, pt);
            return ok(true);
        });

        t.tasks["wait"] = [](const PropertyMap& p) { return std::make_unique<Wait>(real_param(p, "duration")); };
        t.tasks["step_forward"] = [](const PropertyMap& p) { return std::make_unique<Advance>(real_param(p, "duration"), false); };
        t.tasks["move_distance"] = [](const PropertyMap& p) { return std::make_unique<Advance>(real_param(p, "distance"), true); };
        t.tasks["move_toward_target"] = [](const PropertyMap&) { return std::make_unique<MoveToward>(); };

        auto move_to = [&](const std::string& id, std::function<std::optional<Vec2>(ZombieCtx&)> goal,
                           std::function<double(ZombieCtx&)> arrive) {
            t.tasks[id] = [goal, arrive](const PropertyMap&) { return std::make_unique<MoveTo>(goal, arrive); };
        };
        auto fixed = [](double r) { return [r](ZombieCtx&) { return r; }; };
        move_to("move_to_waypoint", [](ZombieCtx& c) { return position_key(c, bb::current_waypoint); }, fixed(0.15));
        move_to("move_to_last_known", [](ZombieCtx& c) { return position_key(c, bb::last_known); }, fixed(0.3));
        move_to("move_to_sensed_player", [](ZombieCtx& c) { return c.world->entity_position(c.board(), bb::sensed_player); },
                [](ZombieCtx& c) { return 0.8 * c.world->cfg().attack_range; });

        auto pred = [&](const std::string& id, std::function<bool(ZombieCtx&, const PropertyMap&)> fn) {
            t.decorators[id] = [fn](const PropertyMap& p) -> std::unique_ptr<ZombieDecorator> {
                return std::make_unique<Predicate>([fn, p](ZombieCtx& c) { return fn(c, p); });
            };
        };
        pred("key_is_set", [](ZombieCtx& c, const PropertyMap& p) { return c.board().is_set(key_param(p)); });
        pred("key_is_set_param", [](ZombieCtx& c, const PropertyMap& p) { return c.board().is_set(key_param(p)); });
        pred("key_is_unset", [](ZombieCtx& c, const PropertyMap& p) { return !c.board().is_set(key_param(p)); });
        pred("target_within", [](ZombieCtx& c, const PropertyMap& p) {
            const auto d = target_distance(c);
            return d && *d <= real_param(p, "radius");
        });
        pred("target_beyond", [](ZombieCtx& c, const PropertyMap& p) {
            const auto d = target_distance(c);
            return d && *d > real_param(p, "radius");
        });
        pred("distance_lt", [](ZombieCtx& c, const PropertyMap& p) {
            const auto d = target_distance(c);
            return d && *d < real_param(p, "threshold");
        });
        pred("is_moving", [](ZombieCtx& c, const PropertyMap&) { return c.me().moved; });
        pred("waypoint_in_cone", [](ZombieCtx& c, const PropertyMap& p) {
            const auto wp = position_key(c, bb::current_waypoint);
            const auto t = c.world->entity_position(c.board(), bb::target_enemy);
            if (!wp || !t) return false;
            const Vec2 here = c.me().position;
            return angle_between(*wp - here, *t - here) <= deg_to_rad(real_param(p, "half_angle_deg"));
        });
        t.decorators["cooldown"] = [](const PropertyMap& p) { return std::make_unique<Cooldown>(real_param(p, "seconds")); };
        t.decorators["chance_gate"] = [](const PropertyMap& p) {
            return std::make_unique<ChanceGate>(real_param(p, "p"), std::get<bool>(p.at("invert")));
        };
        return t;
    }();
    return table;
}

/// Library problems specific to running in the arena: missing blackboard
/// keys the engine writes, and primitives with no implementation.
inline std::vector<LibraryIssue> arena_library_problems(const NodeLibrary& lib) {
    const auto ids = arena_primitives().ids();
    auto issues = validate(lib, &ids);
    const std::pair<const char*, ValueType> required[] = {{bb::sensed_player, ValueType::Entity},
                                                          {bb::target_enemy, ValueType::Entity},
                                                          {bb::last_known, ValueType::Position},
                                                          {bb::current_waypoint, ValueType::Position}};
    for (const auto& [key, type] : required) {
        auto it = lib.blackboard.find(key);
        if (it == lib.blackboard.end() || it->second != type)
            issues.push_back({LibraryIssueKind::UnknownBlackboardKey, key, std::string("arena needs ") + to_string(type) + " key"});
    }
    return issues;
}

// ------------------------------------------------------------------ humans

struct HumanCommand {
    Vec2 displacement;
    double speed = 0.0;
    bool sprinting = false;
};

/// Candidate-scoring target choice; exposed for testing.
inline Vec2 human_choose_target(World& w, const AgentState& h) {
    const auto& hc = w.cfg().human;
    std::optional<Vec2> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < hc.candidate_count; ++i) {
        const double ang = uniform_real(w.rng(), -std::numbers::pi, std::numbers::pi);
        const double r = hc.candidate_radius * std::sqrt(uniform01(w.rng()));
        const Vec2 p = h.position + from_heading(ang) * r;
        if (!w.map().is_free(p)) continue;
        double dmin = hc.distance_cap;
        bool hidden = true;
        for (const auto& z : w.agents()) {
            if (z.role != Role::Zombie) continue;
            const double d = distance(p, z.position);
            dmin = std::min(dmin, d);
            if (d <= w.cfg().perception_radius && w.line_of_sight(z.position, p)) hidden = false;
        }
        const double align = 0.5 * (1.0 + std::cos(angle_between(from_heading(h.heading), p - h.position)));
        const double s = hc.w_distance * dmin + hc.w_self_visible * (w.line_of_sight(h.position, p) ? 1.0 : 0.0) +
                         hc.w_hidden * (hidden ? 1.0 : 0.0) + hc.w_heading * (r > 0 ? align : 0.0);
        if (s > best_score) {
            best_score = s;
            best = p;
        }
    }
    return best.value_or(h.position);
}

/// A zombie within detection range moving roughly at this human.
inline bool human_threatened(const World& w, const AgentState& h) {
    for (const auto& z : w.agents()) {
        if (z.role != Role::Zombie || !z.moved) continue;
        const Vec2 to_h = h.position - z.position;
        if (to_h.length() <= w.cfg().human.detection_range && angle_between(z.velocity, to_h) <= deg_to_rad(45.0)) return true;
    }
    return false;
}

/// Replans on a timer, then follows the grid toward the chosen point.
/// Updates the stamina and replan state of `h`.
inline HumanCommand human_controller_step(World& w, AgentState& h) {
    const auto& hc = w.cfg().human;
    const double dt = w.cfg().dt;
    h.replan_timer -= dt;
    if (!h.goal || h.replan_timer <= 1e-9 || distance(*h.goal, h.position) < 0.2) {
        h.goal = human_choose_target(w, h);
        h.replan_timer = hc.replan_interval;
    }
    HumanCommand cmd;
    cmd.sprinting = h.stamina > 0.0 && human_threatened(w, h);
    if (cmd.sprinting) {
        h.stamina = std::max(0.0, h.stamina - dt);
    } else {
        h.stamina = std::min(hc.sprint_duration, h.stamina + hc.recovery_rate * dt);
    }
    h.sprinting = cmd.sprinting;
    cmd.speed = hc.base_speed * (cmd.sprinting ? hc.sprint_multiplier : 1.0);
    const auto step = w.paths().step_toward(h.position, *h.goal, cmd.speed * dt);
    if (!step) {
        h.goal.reset();
        return cmd;
    }
    // never walk into a zombie's reach; replan instead
    const Vec2 next = h.position + *step;
    for (const auto& z : w.agents()) {
        if (z.role != Role::Zombie) continue;
        const double reach = w.cfg().attack_range;
        if (distance(next, z.position) <= reach && distance(next, z.position) < distance(h.position, z.position)) {
            h.goal.reset();
            return cmd;
        }
    }
    cmd.displacement = *step;
    return cmd;
}

// ------------------------------------------------------------ chase detector

enum class ChaseEvent { None, Started, Broken };

struct ChaseDetector {
    int consecutive_ok = 0;
    int consecutive_bad = 0;
    bool active = false;
    int started = 0;
    int broken = 0;

    ChaseEvent step(bool chasing, const ChaseConfig& c) {
        if (chasing) {
            ++consecutive_ok;
            consecutive_bad = 0;
            if (!active && consecutive_ok >= c.min_ticks) {
                active = true;
                ++started;
                return ChaseEvent::Started;
            }
        } else {
            ++consecutive_bad;
            consecutive_ok = 0;
            if (active && consecutive_bad >= c.break_ticks) {
                active = false;
                ++broken;
                return ChaseEvent::Broken;
            }
        }
        return ChaseEvent::None;
    }
};

/// Moving toward a nearby living human, or already in contact with one.
inline bool chase_condition(const AgentState& z, std::span<const AgentState> agents, const SimConfig& cfg) {
    for (const auto& h : agents) {
        if (h.role != Role::Human || !h.alive) continue;
        const Vec2 to_h = h.position - z.position;
        const double d = to_h.length();
        if (d <= cfg.attack_range) return true;
        if (z.moved && d <= cfg.chase.distance_threshold &&
            angle_between(z.velocity, to_h) <= deg_to_rad(cfg.chase.angle_threshold_deg))
            return true;
    }
    return false;
}

// ------------------------------------------------------------------ episode

struct EpisodeResult {
    FitnessLedger ledger;
    std::vector<std::string> compile_errors;  // per zombie; empty string when it compiled
    std::map<int, double> health_lost;        // per human
    double total_damage = 0.0;
    int ticks = 0;
    std::string trace;

    bool failed(std::size_t zombie) const { return !compile_errors[zombie].empty(); }
};

inline constexpr const char* kTraceHeader = "tick,agent_id,role,x,y,health,event\n";

class Episode {
public:
    Episode(const ArenaMap& map, const SimConfig& cfg, const NodeLibrary& lib, const FitnessSpec& spec, std::uint64_t seed,
            bool record_trace = false)
        : world_(map, cfg, seed, lib.blackboard), lib_(&lib), spec_(spec), record_trace_(record_trace) {
        result_.ledger = spec.make_ledger();
        if (record_trace_) result_.trace = kTraceHeader;
    }

    World& world() { return world_; }
    const EpisodeResult& result() const { return result_; }

    /// Adds a zombie at `pos`; a tree that fails to compile leaves it inert
    /// and records the error.
    int add_zombie(const Chromosome& tree, Vec2 pos, double heading) {
        const int id = world_.add_agent(Role::Zombie, pos, heading);
        std::string err;
        std::optional<ZombieTree> inst;
        try {
            inst = compile(tree, *lib_, arena_primitives());
            inst->set_owner(id);
        } catch (const CompileError& e) {
            err = e.what();
        }
        zombies_.push_back({id, std::move(inst), {}});
        result_.compile_errors.push_back(err);
        result_.ledger.touch(id);
        return id;
    }

    int add_human(Vec2 pos, double heading) {
        const int id = world_.add_agent(Role::Human, pos, heading);
        result_.health_lost[id] = 0.0;
        return id;
    }

    /// Zombies first (ids 0..n-1), then humans, at random spawn points.
    void populate(std::span<const Chromosome> trees) {
        for (const auto& t : trees) {
            const Vec2 p = world_.random_spawn_point(world_.map().zombie_spawns);
            add_zombie(t, p, uniform_real(world_.rng(), -std::numbers::pi, std::numbers::pi));
        }
        for (int i = 0; i < world_.cfg().human_count; ++i) {
            const Vec2 p = world_.random_spawn_point(world_.map().human_spawns);
            add_human(p, uniform_real(world_.rng(), -std::numbers::pi, std::numbers::pi));
        }
    }

    void step() {
        const SimConfig& cfg = world_.cfg();
        auto& agents = world_.agents();
        std::vector<std::string> events(agents.size());
        auto note = [&](int id, const char* e) {
            auto& s = events[static_cast<std::size_t>(id)];
            if (!s.empty()) s += ';';
            s += e;
        };

        for (auto& a : agents) {
            a.intent.reset();
            if (a.role == Role::Human && !a.alive) {
                a.respawn_timer -= cfg.dt;
                if (a.respawn_timer <= 1e-9) {
                    a.alive = true;
                    a.health = cfg.max_health;
                    a.stamina = cfg.human.sprint_duration;
                    a.goal.reset();
                    a.position = world_.random_spawn_point(world_.map().human_spawns);
                    note(a.id, "respawn");
                }
            }
        }

        if (cfg.perception) perceive_all();

        for (auto& z : zombies_) {
            if (!z.tree) continue;
            ZombieCtx ctx{&world_, z.id};
            z.tree->tick(ctx, cfg.dt);
        }

        for (auto& h : agents) {
            if (h.role != Role::Human || !h.alive) continue;
            const auto cmd = human_controller_step(world_, h);
            h.intent = cmd.displacement;
        }

        for (auto& a : agents) {
            a.moved = false;
            a.velocity = {};
            if (!a.intent || (a.role == Role::Human && !a.alive)) continue;
            const Vec2 d = *a.intent;
            if (d.length() <= 1e-12) continue;
            if (!segment_clear(world_.map(), a.position, a.position + d)) continue;
            a.position = a.position + d;
            a.velocity = d * (1.0 / cfg.dt);
            a.moved = true;
            a.heading = heading_of(d);
        }

        for (auto& z : zombies_) {
            auto& me = world_.agent(z.id);
            AgentState* victim = nullptr;
            double best = std::numeric_limits<double>::infinity();
            for (auto& h : agents) {
                if (h.role != Role::Human || !h.alive) continue;
                const double d = distance(h.position, me.position);
                if (d <= cfg.attack_range && d < best) {
                    best = d;
                    victim = &h;
                }
            }
            if (!victim) continue;
            const double before = victim->health;
            const double amount = std::min(cfg.damage_per_second * cfg.dt, victim->health);
            victim->health = std::max(0.0, victim->health - amount);
            result_.health_lost[victim->id] += before - victim->health;
            result_.total_damage += amount;
            emit(z.id, keys::damage_dealt, amount);
            if (victim->health <= 0.0) {
                victim->alive = false;
                victim->respawn_timer = cfg.respawn_seconds;
                victim->intent.reset();
                note(victim->id, "death");
            }
        }

        for (auto& z : zombies_) {
            auto& me = world_.agent(z.id);
            const bool sensed = me.blackboard.is_set(bb::sensed_player);
            const auto ev = z.chase.step(chase_condition(me, agents, cfg), cfg.chase);
            if (ev == ChaseEvent::Started) {
                note(z.id, "chase_started");
                emit(z.id, keys::chases_started, 1.0);
                if (z.chase.started > 1) {
                    emit(z.id, keys::chase_restarts, 1.0);
                    if (z.chase.started - 1 > spec_.chase_restart_allowance) emit(z.id, keys::excess_chase_restarts, 1.0);
                }
            } else if (ev == ChaseEvent::Broken) {
                note(z.id, "chase_broken");
            }
            if (z.chase.active) emit(z.id, keys::chase_ticks, 1.0);
            if (!me.moved) emit(z.id, keys::idle_ticks, 1.0);
            if (me.moved && !sensed && !z.chase.active) emit(z.id, keys::distance_patrolled, me.velocity.length() * cfg.dt);
            if (me.moved && !sensed) {
                if (const auto* lk = me.blackboard.get_if<Vec2>(bb::last_known);
                    lk && distance(*lk, me.position) <= cfg.near_last_known_radius)
                    emit(z.id, keys::near_last_known_ticks, 1.0);
            }
        }

        if (record_trace_) {
            char buf[160];
            for (const auto& a : agents) {
                std::snprintf(buf, sizeof buf, "%d,%d,%s,%.4f,%.4f,%.4f,", result_.ticks, a.id, to_string(a.role), a.position.x,
                              a.position.y, a.health);
                result_.trace += buf;
                result_.trace += events[static_cast<std::size_t>(a.id)];
                result_.trace += '\n';
            }
        }
        ++result_.ticks;
        world_.advance_time();
    }

    EpisodeResult run() {
        const int n = world_.cfg().ticks();
        for (int i = 0; i < n; ++i) step();
        return std::move(result_);
    }

    std::size_t zombie_count() const { return zombies_.size(); }
    const ChaseDetector& chase(std::size_t zombie) const { return zombies_[zombie].chase; }

private:
    struct Zombie {
        int id;
        std::optional<ZombieTree> tree;
        ChaseDetector chase;
    };

    void emit(int agent, const char* key, double delta) {
        if (result_.ledger.declares(key)) result_.ledger.record_event(agent, key, delta);
    }

public:
    void perceive_all() {
        for (auto& z : zombies_) perceive(world_.agent(z.id));
    }

private:
    /// Nearest living human inside the view cone with line of sight.
    void perceive(AgentState& z) {
        const SimConfig& cfg = world_.cfg();
        const double half_fov = deg_to_rad(cfg.fov_deg) / 2.0;
        const AgentState* best = nullptr;
        double best_d = std::numeric_limits<double>::infinity();
        for (const auto& h : world_.agents()) {
            if (h.role != Role::Human || !h.alive) continue;
            const Vec2 to_h = h.position - z.position;
            const double d = to_h.length();
            if (d > cfg.perception_radius || d >= best_d) continue;
            if (d > 0 && angle_between(from_heading(z.heading), to_h) > half_fov + 1e-12) continue;
            if (!world_.line_of_sight(z.position, h.position)) continue;
            best = &h;
            best_d = d;
        }
        auto& board = z.blackboard;
        if (best) {
            board.set(bb::sensed_player, EntityRef{best->id});
            board.set(bb::target_enemy, EntityRef{best->id});
            board.set(bb::last_known, best->position);
            z.target_memory = cfg.target_memory;
            return;
        }
        board.clear(bb::sensed_player);
        z.target_memory -= cfg.dt;
        const auto* target = board.get_if<EntityRef>(bb::target_enemy);
        if (target && (z.target_memory <= 1e-9 || !world_.living(target->id))) board.clear(bb::target_enemy);
    }

    World world_;
    const NodeLibrary* lib_;
    FitnessSpec spec_;
    bool record_trace_;
    std::vector<Zombie> zombies_;
    EpisodeResult result_;
};

/// One tree per zombie, all spawned together; humans per `cfg.human_count`.
inline EpisodeResult run_episode(std::span<const Chromosome> trees, const ArenaMap& map, const SimConfig& cfg,
                                 const NodeLibrary& lib, const FitnessSpec& spec, std::uint64_t seed,
                                 bool record_trace = false) {
    Episode ep(map, cfg, lib, spec, seed, record_trace);
    ep.populate(trees);
    return ep.run();
}

// ------------------------------------------------------------------ config io

inline nlohmann::json to_json(const SimConfig& c) {
    const auto& h = c.human;
    return {{"dt", c.dt},
            {"episode_seconds", c.episode_seconds},
            {"zombie_count", c.zombie_count},
            {"human_count", c.human_count},
            {"perception_radius", c.perception_radius},
            {"fov_deg", c.fov_deg},
            {"target_memory", c.target_memory},
            {"attack_range", c.attack_range},
            {"damage_per_second", c.damage_per_second},
            {"zombie_speed", c.zombie_speed},
            {"max_health", c.max_health},
            {"respawn_seconds", c.respawn_seconds},
            {"near_last_known_radius", c.near_last_known_radius},
            {"perception", c.perception},
            {"human",
             {{"base_speed", h.base_speed},
              {"replan_interval", h.replan_interval},
              {"candidate_count", h.candidate_count},
              {"candidate_radius", h.candidate_radius},
              {"sprint_multiplier", h.sprint_multiplier},
              {"sprint_duration", h.sprint_duration},
              {"recovery_rate", h.recovery_rate},
              {"detection_range", h.detection_range},
              {"distance_cap", h.distance_cap},
              {"w_distance", h.w_distance},
              {"w_self_visible", h.w_self_visible},
              {"w_hidden", h.w_hidden},
              {"w_heading", h.w_heading}}},
            {"chase",
             {{"angle_threshold_deg", c.chase.angle_threshold_deg},
              {"distance_threshold", c.chase.distance_threshold},
              {"min_ticks", c.chase.min_ticks},
              {"break_ticks", c.chase.break_ticks}}}};
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
    SimConfig c;
    auto get = [](const nlohmann::json& o, const char* k, auto& field) {
        if (o.contains(k)) field = o.at(k).get<std::decay_t<decltype(field)>>();
    };
    get(j, "dt", c.dt);
    get(j, "episode_seconds", c.episode_seconds);
    get(j, "zombie_count", c.zombie_count);
    get(j, "human_count", c.human_count);
    get(j, "perception_radius", c.perception_radius);
    get(j, "fov_deg", c.fov_deg);
    get(j, "target_memory", c.target_memory);
    get(j, "attack_range", c.attack_range);
    get(j, "damage_per_second", c.damage_per_second);
    get(j, "zombie_speed", c.zombie_speed);
    get(j, "max_health", c.max_health);
    get(j, "respawn_seconds", c.respawn_seconds);
    get(j, "near_last_known_radius", c.near_last_known_radius);
    get(j, "perception", c.perception);
    if (j.contains("human")) {
        const auto& h = j["human"];
        get(h, "base_speed", c.human.base_speed);
        get(h, "replan_interval", c.human.replan_interval);
        get(h, "candidate_count", c.human.candidate_count);
        get(h, "candidate_radius", c.human.candidate_radius);
        get(h, "sprint_multiplier", c.human.sprint_multiplier);
        get(h, "sprint_duration", c.human.sprint_duration);
        get(h, "recovery_rate", c.human.recovery_rate);
        get(h, "detection_range", c.human.detection_range);
        get(h, "distance_cap", c.human.distance_cap);
        get(h, "w_distance", c.human.w_distance);
        get(h, "w_self_visible", c.human.w_self_visible);
        get(h, "w_hidden", c.human.w_hidden);
        get(h, "w_heading", c.human.w_heading);
    }
    if (j.contains("chase")) {
        const auto& ch = j["chase"];
        get(ch, "angle_threshold_deg", c.chase.angle_threshold_deg);
        get(ch, "distance_threshold", c.chase.distance_threshold);
        get(ch, "min_ticks", c.chase.min_ticks);
        get(ch, "break_ticks", c.chase.break_ticks);
    }
    return c;
}

inline ArenaMap load_map(const std::filesystem::path& path) { return parse_map(read_text_file(path)); }

}  // namespace evobt
