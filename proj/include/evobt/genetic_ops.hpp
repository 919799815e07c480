#pragma once

// Reproduction operators: depth-uniform subtree crossover, the twelve point
// mutators, child construction, and initial-population seeding.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/chromosome.hpp"
#include "evobt/errors.hpp"
#include "evobt/node_library.hpp"
#include "evobt/rng.hpp"

namespace evobt {

enum class PointMutator {
    AddTask,
    AddComposite,
    AddDecorator,
    DeleteNode,
    DeleteDecorator,
    ReplaceTask,
    ReplaceComposite,
    ReplaceDecorator,
    MutateReal,
    MutateInteger,
    MutateBoolean,
    MutateBlackboard,
};

inline constexpr std::size_t kPointMutatorCount = 12;

inline constexpr std::array<PointMutator, kPointMutatorCount> kPointMutatorRoster{
    PointMutator::AddTask,         PointMutator::AddComposite,     PointMutator::AddDecorator,
    PointMutator::DeleteNode,      PointMutator::DeleteDecorator,  PointMutator::ReplaceTask,
    PointMutator::ReplaceComposite, PointMutator::ReplaceDecorator, PointMutator::MutateReal,
    PointMutator::MutateInteger,   PointMutator::MutateBoolean,    PointMutator::MutateBlackboard,
};

inline const char* to_string(PointMutator m) {
    switch (m) {
        case PointMutator::AddTask: return "add_task";
        case PointMutator::AddComposite: return "add_composite";
        case PointMutator::AddDecorator: return "add_decorator";
        case PointMutator::DeleteNode: return "delete_node";
        case PointMutator::DeleteDecorator: return "delete_decorator";
        case PointMutator::ReplaceTask: return "replace_task";
        case PointMutator::ReplaceComposite: return "replace_composite";
        case PointMutator::ReplaceDecorator: return "replace_decorator";
        case PointMutator::MutateReal: return "mutate_real_property";
        case PointMutator::MutateInteger: return "mutate_integer_property";
        case PointMutator::MutateBoolean: return "mutate_boolean_property";
        case PointMutator::MutateBlackboard: return "mutate_blackboard_property";
    }
    return "?";
}

struct MutatorConfig {
    double crossover_prob = 0.20;
    double point_prob = 0.0184;  // per mutator, applied independently
    double gaussian_std_percent = 0.10;
    int init_iterations = 10;
    double init_crossover_prob = 0.40;
    double init_point_prob_target = 0.40;  // P(at least one point mutation) per seeding round

    bool operator==(const MutatorConfig&) const = default;
};

inline std::vector<std::string> config_problems(const MutatorConfig& c) {
    std::vector<std::string> out;
    auto prob = [&](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) out.push_back(std::string(name) + " must lie in [0, 1]");
    };
    prob(c.crossover_prob, "mutators.crossover_prob");
    prob(c.point_prob, "mutators.point_prob");
    prob(c.init_crossover_prob, "mutators.init_crossover_prob");
    prob(c.init_point_prob_target, "mutators.init_point_prob_target");
    if (!(c.gaussian_std_percent > 0.0)) out.push_back("mutators.gaussian_std_percent must be positive");
    if (c.init_iterations < 0) out.push_back("mutators.init_iterations must be non-negative");
    return out;
}

/// Per-mutator probability x with 1 - (1 - x)^n = aggregate.
inline double point_prob_for_aggregate(double aggregate, std::size_t n = kPointMutatorCount) {
    if (aggregate <= 0.0) return 0.0;
    if (aggregate >= 1.0) return 1.0;
    return 1.0 - std::pow(1.0 - aggregate, 1.0 / static_cast<double>(n));
}

/// The probabilities used during initial-population seeding.
inline MutatorConfig seeding_config(const MutatorConfig& c) {
    MutatorConfig s = c;
    s.crossover_prob = c.init_crossover_prob;
    s.point_prob = point_prob_for_aggregate(c.init_point_prob_target);
    return s;
}

struct MutationRecord {
    bool crossover = false;
    std::array<bool, kPointMutatorCount> point{};

    std::size_t point_count() const {
        std::size_t n = 0;
        for (bool b : point) n += b ? 1 : 0;
        return n;
    }
};

namespace detail {

inline std::vector<NodeAddress> tree_addresses(const Chromosome& c) {
    std::vector<NodeAddress> out;
    for_each_tree_node(c.root, [&](const ChromosomeNode&, const NodeAddress& a) { out.push_back(a); });
    return out;
}

template <class Pred>
std::vector<NodeAddress> tree_addresses_if(const Chromosome& c, Pred pred) {
    std::vector<NodeAddress> out;
    for_each_tree_node(c.root, [&](const ChromosomeNode& n, const NodeAddress& a) {
        if (pred(n, a)) out.push_back(a);
    });
    return out;
}

inline std::vector<NodeAddress> decorator_addresses(const Chromosome& c) {
    std::vector<NodeAddress> out;
    for_each_tree_node(c.root, [&](const ChromosomeNode& n, const NodeAddress& a) {
        for (std::uint32_t d = 0; d < n.decorators.size(); ++d) {
            NodeAddress da = a;
            da.decorator = d;
            out.push_back(std::move(da));
        }
    });
    return out;
}

/// Library entries of class `cls` (mapped ids and templates), as payload makers.
struct Eligible {
    const MappedNodeDef* mapped = nullptr;
    const GeneratedNodeTemplate* tmpl = nullptr;

    const std::string& id() const { return mapped ? mapped->id : tmpl->id; }
};

inline std::vector<Eligible> eligible_entries(const NodeLibrary& lib, NodeClass cls) {
    std::vector<Eligible> out;
    for (const auto* m : lib.mapped_of(cls)) out.push_back({m, nullptr});
    for (const auto* t : lib.templates_of(cls)) out.push_back({nullptr, t});
    return out;
}

inline ChromosomeNode make_node(const Eligible& e, NodeClass cls, Rng& rng) {
    if (e.mapped) return ChromosomeNode{{cls, e.mapped->id, false, {}}, {}, {}};
    return make_generated(cls, instantiate(*e.tmpl, rng));
}

/// Uniform entry of class `cls`, preferring ids other than `avoid` when any exist.
inline std::optional<ChromosomeNode> random_node(const NodeLibrary& lib, NodeClass cls, Rng& rng,
                                                 const std::string* avoid = nullptr) {
    auto entries = eligible_entries(lib, cls);
    if (avoid) {
        std::vector<Eligible> others;
        for (const auto& e : entries)
            if (e.id() != *avoid) others.push_back(e);
        entries = std::move(others);
    }
    if (entries.empty()) return std::nullopt;
    return make_node(entries[uniform_index(rng, entries.size())], cls, rng);
}

inline ChromosomeNode& parent_of(Chromosome& c, const NodeAddress& a) {
    NodeAddress p{{a.path.begin(), a.path.end() - 1}, std::nullopt};
    return node_at(c, p);
}

struct PropertySlot {
    NodeAddress address;
    const PropertySpec* spec;
};

inline std::vector<PropertySlot> property_slots(const Chromosome& c, const NodeLibrary& lib, PropertyType type) {
    std::vector<PropertySlot> out;
    auto visit = [&](const ChromosomeNode& n, const NodeAddress& a) {
        if (!n.payload.generated) return;
        const auto* t = lib.find_template(n.payload.id);
        if (!t) return;
        for (const auto& spec : t->properties)
            if (spec.type == type && n.payload.properties.contains(spec.name)) out.push_back({a, &spec});
    };
    for_each_tree_node(c.root, [&](const ChromosomeNode& n, const NodeAddress& a) {
        visit(n, a);
        for (std::uint32_t d = 0; d < n.decorators.size(); ++d) {
            NodeAddress da = a;
            da.decorator = d;
            visit(n.decorators[d], da);
        }
    });
    return out;
}

inline double gaussian_step(double current, const PropertySpec& spec, double std_percent, Rng& rng) {
    double sd = std_percent * std::abs(current);
    if (sd == 0.0) sd = std_percent * (spec.hi - spec.lo);
    if (sd <= 0.0) return current;
    return current + std::normal_distribution<double>(0.0, sd)(rng);
}

}  // namespace detail

/// Replaces a depth-uniform random subtree of `child` with a copy of a
/// depth-uniform random subtree of `donor`. Roots are never swap points.
inline Chromosome crossover(Chromosome child, const Chromosome& donor, Rng& rng) {
    const auto child_levels = depth_index(child, false);
    const auto donor_levels = depth_index(donor, false);
    if (child_levels.size() < 2 || donor_levels.size() < 2) return child;

    const auto& cl = child_levels[1 + uniform_index(rng, child_levels.size() - 1)];
    const NodeAddress target = cl[uniform_index(rng, cl.size())];
    const auto& dl = donor_levels[1 + uniform_index(rng, donor_levels.size() - 1)];
    const NodeAddress source = dl[uniform_index(rng, dl.size())];

    node_at(child, target) = node_at(donor, source);
    return child;
}

inline Chromosome apply_point_mutator(PointMutator kind, Chromosome c, const NodeLibrary& lib,
                                      const MutatorConfig& cfg, Rng& rng) {
    using namespace detail;
    switch (kind) {
        case PointMutator::AddTask:
        case PointMutator::AddComposite: {
            const auto hosts = tree_addresses_if(c, [](const ChromosomeNode& n, const NodeAddress&) { return n.is_composite(); });
            std::optional<ChromosomeNode> fresh;
            if (kind == PointMutator::AddTask) {
                fresh = random_node(lib, NodeClass::Task, rng);
            } else {
                const auto ids = lib.composite_ids();
                fresh = make_composite(ids[uniform_index(rng, ids.size())]);
            }
            if (!fresh) return c;
            auto& host = node_at(c, hosts[uniform_index(rng, hosts.size())]);
            const auto slot = uniform_index(rng, host.children.size() + 1);
            host.children.insert(host.children.begin() + static_cast<std::ptrdiff_t>(slot), std::move(*fresh));
            return c;
        }
        case PointMutator::AddDecorator: {
            auto fresh = random_node(lib, NodeClass::Decorator, rng);
            if (!fresh) return c;
            const auto hosts = tree_addresses(c);
            node_at(c, hosts[uniform_index(rng, hosts.size())]).decorators.push_back(std::move(*fresh));
            return c;
        }
        case PointMutator::DeleteNode: {
            const auto targets = tree_addresses_if(c, [](const ChromosomeNode&, const NodeAddress& a) { return a.depth() > 0; });
            if (targets.empty()) return c;
            const auto& a = targets[uniform_index(rng, targets.size())];
            auto& parent = parent_of(c, a);
            const auto pos = static_cast<std::ptrdiff_t>(a.path.back());
            ChromosomeNode removed = std::move(parent.children[static_cast<std::size_t>(pos)]);
            parent.children.erase(parent.children.begin() + pos);
            if (removed.is_composite())
                parent.children.insert(parent.children.begin() + pos,
                                       std::make_move_iterator(removed.children.begin()),
                                       std::make_move_iterator(removed.children.end()));
            return c;
        }
        case PointMutator::DeleteDecorator: {
            const auto targets = decorator_addresses(c);
            if (targets.empty()) return c;
            const auto& a = targets[uniform_index(rng, targets.size())];
            auto& host = node_at(c, NodeAddress{a.path, std::nullopt});
            host.decorators.erase(host.decorators.begin() + static_cast<std::ptrdiff_t>(*a.decorator));
            return c;
        }
        case PointMutator::ReplaceTask:
        case PointMutator::ReplaceDecorator: {
            const bool task = kind == PointMutator::ReplaceTask;
            const auto targets = task ? tree_addresses_if(c, [](const ChromosomeNode& n, const NodeAddress&) { return n.is_task(); })
                                      : decorator_addresses(c);
            if (targets.empty()) return c;
            auto& node = node_at(c, targets[uniform_index(rng, targets.size())]);
            auto fresh = random_node(lib, task ? NodeClass::Task : NodeClass::Decorator, rng, &node.payload.id);
            if (fresh) node.payload = std::move(fresh->payload);
            return c;
        }
        case PointMutator::ReplaceComposite: {
            const auto targets = tree_addresses_if(c, [](const ChromosomeNode& n, const NodeAddress&) { return n.is_composite(); });
            auto& node = node_at(c, targets[uniform_index(rng, targets.size())]);
            std::vector<std::string> others;
            for (const auto& id : lib.composite_ids())
                if (id != node.payload.id) others.push_back(id);
            if (!others.empty()) node.payload.id = others[uniform_index(rng, others.size())];
            return c;
        }
        case PointMutator::MutateReal:
        case PointMutator::MutateInteger: {
            const bool real = kind == PointMutator::MutateReal;
            const auto slots = property_slots(c, lib, real ? PropertyType::Real : PropertyType::Integer);
            if (slots.empty()) return c;
            const auto& slot = slots[uniform_index(rng, slots.size())];
            auto& value = node_at(c, slot.address).payload.properties.at(slot.spec->name);
            if (real) {
                const double next = gaussian_step(std::get<double>(value), *slot.spec, cfg.gaussian_std_percent, rng);
                value = slot.spec->clamp(next);
            } else {
                const auto current = static_cast<double>(std::get<std::int64_t>(value));
                const double next = gaussian_step(current, *slot.spec, cfg.gaussian_std_percent, rng);
                value = slot.spec->clamp(static_cast<std::int64_t>(std::llround(next)));
            }
            return c;
        }
        case PointMutator::MutateBoolean: {
            const auto slots = property_slots(c, lib, PropertyType::Boolean);
            if (slots.empty()) return c;
            const auto& slot = slots[uniform_index(rng, slots.size())];
            auto& value = node_at(c, slot.address).payload.properties.at(slot.spec->name);
            value = !std::get<bool>(value);
            return c;
        }
        case PointMutator::MutateBlackboard: {
            const auto slots = property_slots(c, lib, PropertyType::BlackboardKey);
            if (slots.empty()) return c;
            const auto& slot = slots[uniform_index(rng, slots.size())];
            auto& value = node_at(c, slot.address).payload.properties.at(slot.spec->name);
            std::vector<std::string> others;
            for (const auto& o : slot.spec->options)
                if (o != std::get<BlackboardKey>(value).name) others.push_back(o);
            if (!others.empty()) value = BlackboardKey{others[uniform_index(rng, others.size())]};
            return c;
        }
    }
    return c;
}

/// Copy of `primary`, then crossover with probability crossover_prob, then
/// each point mutator independently with probability point_prob, in roster order.
inline Chromosome make_child(const Chromosome& primary, const Chromosome& donor, const MutatorConfig& cfg,
                             const NodeLibrary& lib, Rng& rng, MutationRecord* record = nullptr) {
    Chromosome child = deep_copy(primary);
    MutationRecord rec;
    if (bernoulli(rng, cfg.crossover_prob)) {
        rec.crossover = true;
        child = crossover(std::move(child), donor, rng);
    }
    for (std::size_t i = 0; i < kPointMutatorCount; ++i) {
        if (bernoulli(rng, cfg.point_prob)) {
            rec.point[i] = true;
            child = apply_point_mutator(kPointMutatorRoster[i], std::move(child), lib, cfg, rng);
        }
    }
    if (record) *record = rec;
    return child;
}

/// Builds n members, each from init_iterations rounds of make_child under the
/// seeding probabilities. Donors are drawn uniformly from members seeded so
/// far; the first member uses `initial` as its donor.
inline std::vector<Chromosome> seed_population(const Chromosome& initial, std::size_t n, const MutatorConfig& cfg,
                                               const NodeLibrary& lib, Rng& rng) {
    if (n < 2) throw ConfigError("population size must be at least 2");
    const MutatorConfig seeding = seeding_config(cfg);
    std::vector<Chromosome> pop;
    pop.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Chromosome member = initial;
        for (int it = 0; it < cfg.init_iterations; ++it) {
            const Chromosome& donor = pop.empty() ? initial : pop[uniform_index(rng, pop.size())];
            member = make_child(member, donor, seeding, lib, rng);
        }
        pop.push_back(std::move(member));
    }
    return pop;
}

inline nlohmann::json to_json(const MutatorConfig& c) {
    return {{"crossover_prob", c.crossover_prob},
            {"point_prob", c.point_prob},
            {"gaussian_std_percent", c.gaussian_std_percent},
            {"init_iterations", c.init_iterations},
            {"init_crossover_prob", c.init_crossover_prob},
            {"init_point_prob_target", c.init_point_prob_target}};
}

inline MutatorConfig mutator_config_from_json(const nlohmann::json& j) {
    MutatorConfig c;
    c.crossover_prob = j.value("crossover_prob", c.crossover_prob);
    c.point_prob = j.value("point_prob", c.point_prob);
    c.gaussian_std_percent = j.value("gaussian_std_percent", c.gaussian_std_percent);
    c.init_iterations = j.value("init_iterations", c.init_iterations);
    c.init_crossover_prob = j.value("init_crossover_prob", c.init_crossover_prob);
    c.init_point_prob_target = j.value("init_point_prob_target", c.init_point_prob_target);
    return c;
}

}  // namespace evobt
