#pragma once

// Event-driven fitness: simulation code records keyed deltas per agent,
// and a spec maps the accumulated values to a score after the episode.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/errors.hpp"

namespace evobt {

using AgentId = int;

class FitnessLedger {
public:
    FitnessLedger() = default;
    explicit FitnessLedger(std::set<std::string> declared) : declared_(std::move(declared)) {}

    const std::set<std::string>& declared() const { return declared_; }
    bool declares(const std::string& key) const { return declared_.contains(key); }

    void record_event(AgentId agent, const std::string& key, double delta) {
        if (!declared_.contains(key)) throw UndeclaredKey("fitness key '" + key + "' is not declared");
        values_[agent][key] += delta;
    }

    /// Absent agents and keys read as 0.
    double value(AgentId agent, const std::string& key) const {
        auto a = values_.find(agent);
        if (a == values_.end()) return 0.0;
        auto k = a->second.find(key);
        return k == a->second.end() ? 0.0 : k->second;
    }

    /// Registers an agent with no events yet.
    void touch(AgentId agent) { values_[agent]; }

    std::vector<AgentId> agents() const {
        std::vector<AgentId> out;
        for (const auto& [id, v] : values_) out.push_back(id);
        return out;
    }

    const std::map<AgentId, std::map<std::string, double>>& values() const { return values_; }

    /// Adds another episode's ledger, agent by agent.
    void merge(const FitnessLedger& other) {
        declared_.insert(other.declared_.begin(), other.declared_.end());
        for (const auto& [agent, keys] : other.values_)
            for (const auto& [k, v] : keys) values_[agent][k] += v;
    }

    bool operator==(const FitnessLedger&) const = default;

private:
    std::set<std::string> declared_;
    std::map<AgentId, std::map<std::string, double>> values_;
};

struct Breakpoint {
    double value = 0.0;
    double score = 0.0;
    bool operator==(const Breakpoint&) const = default;
};

/// Continuous piecewise-linear map, extended linearly past both ends.
struct PiecewiseLinear {
    std::vector<Breakpoint> points;

    double operator()(double x) const {
        if (points.empty()) return 0.0;
        if (points.size() == 1) return points.front().score;
        std::size_t seg = 0;
        if (x >= points.back().value) {
            seg = points.size() - 2;
        } else {
            while (seg + 2 < points.size() && x >= points[seg + 1].value) ++seg;
        }
        const auto& a = points[seg];
        const auto& b = points[seg + 1];
        if (x == a.value) return a.score;
        if (x == b.value) return b.score;
        const double slope = (b.score - a.score) / (b.value - a.value);
        return a.score + slope * (x - a.value);
    }
};

struct FitnessTerm {
    std::string key;
    PiecewiseLinear map;
};

struct SizeBand {
    std::int64_t min_nodes = 1;
    std::int64_t max_nodes = 1000;
    double per_node_penalty = 0.0;

    /// Zero inside [min, max]; -penalty per node outside.
    double penalty(std::int64_t size) const {
        if (size < min_nodes) return -per_node_penalty * static_cast<double>(min_nodes - size);
        if (size > max_nodes) return -per_node_penalty * static_cast<double>(size - max_nodes);
        return 0.0;
    }
};

struct FitnessSpec {
    std::vector<FitnessTerm> terms;
    SizeBand size_band;
    std::vector<std::string> tracked_keys;  // recorded but not scored
    int chase_restart_allowance = 3;

    std::set<std::string> declared_keys() const {
        std::set<std::string> out(tracked_keys.begin(), tracked_keys.end());
        for (const auto& t : terms) out.insert(t.key);
        return out;
    }

    FitnessLedger make_ledger() const { return FitnessLedger{declared_keys()}; }
};

inline std::vector<std::string> spec_problems(const FitnessSpec& spec) {
    std::vector<std::string> out;
    if (spec.terms.empty()) out.push_back("fitness spec needs at least one term");
    for (const auto& t : spec.terms) {
        if (t.map.points.empty()) out.push_back("term '" + t.key + "' has no breakpoints");
        for (std::size_t i = 1; i < t.map.points.size(); ++i)
            if (!(t.map.points[i].value > t.map.points[i - 1].value))
                out.push_back("term '" + t.key + "' breakpoints are not strictly increasing");
    }
    if (spec.size_band.min_nodes > spec.size_band.max_nodes) out.push_back("size band min exceeds max");
    if (spec.size_band.per_node_penalty < 0) out.push_back("size band penalty must be non-negative");
    if (spec.chase_restart_allowance < 0) out.push_back("chase restart allowance must be non-negative");
    return out;
}

/// Default scoring: sum of per-key piecewise maps plus the size-band penalty.
inline double score(const FitnessLedger& ledger, AgentId agent, std::int64_t tree_size, const FitnessSpec& spec) {
    double total = 0.0;
    for (const auto& term : spec.terms) total += term.map(ledger.value(agent, term.key));
    return total + spec.size_band.penalty(tree_size);
}

/// Replaceable scoring strategy; `score` is the default.
using ScoringFn = std::function<double(const FitnessLedger&, AgentId, std::int64_t, const FitnessSpec&)>;

inline ScoringFn default_scoring() { return [](const auto& l, AgentId a, std::int64_t s, const auto& sp) { return score(l, a, s, sp); }; }

// Fitness keys emitted by the arena.
namespace keys {
inline constexpr const char* distance_patrolled = "distance_patrolled";
inline constexpr const char* damage_dealt = "damage_dealt";
inline constexpr const char* chase_ticks = "chase_ticks";
inline constexpr const char* near_last_known_ticks = "near_last_known_ticks";
inline constexpr const char* idle_ticks = "idle_ticks";
inline constexpr const char* excess_chase_restarts = "excess_chase_restarts";
inline constexpr const char* chase_restarts = "chase_restarts";
inline constexpr const char* chases_started = "chases_started";
}  // namespace keys

/// Shipped weights. These are artifact defaults tuned for the desk arena,
/// mirrored in data/configs; they are not published values.
inline FitnessSpec bundled_spec() {
    FitnessSpec s;
    s.terms = {
        {keys::distance_patrolled, {{{0, 0}, {60, 300}, {150, 400}}}},
        {keys::damage_dealt, {{{0, 0}, {100, 400}, {300, 700}}}},
        {keys::chase_ticks, {{{0, 0}, {100, 200}, {600, 450}}}},
        {keys::near_last_known_ticks, {{{0, 0}, {50, 100}, {200, 150}}}},
        {keys::idle_ticks, {{{0, 0}, {600, -900}}}},
        {keys::excess_chase_restarts, {{{0, 0}, {1, -40}}}},
    };
    s.size_band = {5, 40, 25.0};
    s.tracked_keys = {keys::chase_restarts, keys::chases_started};
    s.chase_restart_allowance = 3;
    return s;
}

inline nlohmann::json to_json(const FitnessSpec& s) {
    nlohmann::json j;
    j["terms"] = nlohmann::json::array();
    for (const auto& t : s.terms) {
        nlohmann::json bp = nlohmann::json::array();
        for (const auto& p : t.map.points) bp.push_back({p.value, p.score});
        j["terms"].push_back({{"key", t.key}, {"breakpoints", bp}});
    }
    j["size_band"] = {{"min_nodes", s.size_band.min_nodes},
                      {"max_nodes", s.size_band.max_nodes},
                      {"per_node_penalty", s.size_band.per_node_penalty}};
    j["tracked_keys"] = s.tracked_keys;
    j["chase_restart_allowance"] = s.chase_restart_allowance;
    return j;
}

inline FitnessSpec fitness_spec_from_json(const nlohmann::json& j) {
    FitnessSpec s;
    for (const auto& tj : j.at("terms")) {
        FitnessTerm t;
        t.key = tj.at("key").get<std::string>();
        for (const auto& bp : tj.at("breakpoints")) t.map.points.push_back({bp.at(0).get<double>(), bp.at(1).get<double>()});
        s.terms.push_back(std::move(t));
    }
    if (j.contains("size_band")) {
        const auto& b = j["size_band"];
        s.size_band.min_nodes = b.value("min_nodes", s.size_band.min_nodes);
        s.size_band.max_nodes = b.value("max_nodes", s.size_band.max_nodes);
        s.size_band.per_node_penalty = b.value("per_node_penalty", s.size_band.per_node_penalty);
    }
    s.tracked_keys = j.value("tracked_keys", std::vector<std::string>{});
    s.chase_restart_allowance = j.value("chase_restart_allowance", 3);
    return s;
}

}  // namespace evobt
