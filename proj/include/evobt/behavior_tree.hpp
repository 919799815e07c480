#pragma once

// Executable behavior trees compiled from chromosomes.
//
// Ticking is polled: every tick walks from the root, re-checks decorators
// on each visited node, and composites resume at the child that returned
// Running on the previous tick. A decorator that fails while its host is
// Running aborts the host's subtree.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "evobt/chromosome.hpp"
#include "evobt/errors.hpp"
#include "evobt/node_library.hpp"

namespace evobt {

enum class NodeStatus { Success, Failure, Running };

inline const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::Success: return "Success";
        case NodeStatus::Failure: return "Failure";
        case NodeStatus::Running: return "Running";
    }
    return "?";
}

template <class Ctx>
class TaskBehavior {
public:
    virtual ~TaskBehavior() = default;
    /// `resuming` is true when the task returned Running on its previous tick.
    virtual NodeStatus tick(Ctx& ctx, double dt, bool resuming) = 0;
    virtual void abort(Ctx&) {}
};

template <class Ctx>
class DecoratorBehavior {
public:
    virtual ~DecoratorBehavior() = default;
    virtual bool check(Ctx& ctx, double dt, bool host_running) = 0;
    virtual void host_finished(Ctx&, NodeStatus) {}
};

/// Primitive id -> factory. Factories receive the node's property values
/// (fixed params for mapped nodes, sampled values for generated ones).
template <class Ctx>
struct PrimitiveTable {
    using TaskFactory = std::function<std::unique_ptr<TaskBehavior<Ctx>>(const PropertyMap&)>;
    using DecoratorFactory = std::function<std::unique_ptr<DecoratorBehavior<Ctx>>(const PropertyMap&)>;

    std::map<std::string, TaskFactory> tasks;
    std::map<std::string, DecoratorFactory> decorators;

    std::set<std::string> ids() const {
        std::set<std::string> out;
        for (const auto& [k, v] : tasks) out.insert(k);
        for (const auto& [k, v] : decorators) out.insert(k);
        return out;
    }
};

template <class Ctx>
class TreeInstance {
public:
    struct Decorator {
        std::string id;
        std::unique_ptr<DecoratorBehavior<Ctx>> behavior;
    };

    struct Node {
        NodeClass node_class = NodeClass::Composite;
        CompositeKind composite_kind = CompositeKind::Selector;
        std::string id;
        std::vector<std::size_t> children;
        std::vector<Decorator> decorators;
        std::unique_ptr<TaskBehavior<Ctx>> task;
        // runtime
        bool running = false;
        std::optional<std::size_t> running_child;  // position in `children`
    };

    TreeInstance() = default;
    TreeInstance(TreeInstance&&) noexcept = default;
    TreeInstance& operator=(TreeInstance&&) noexcept = default;

    /// Tree nodes plus attached decorators.
    std::size_t node_count() const {
        std::size_t total = nodes_.size();
        for (const auto& n : nodes_) total += n.decorators.size();
        return total;
    }

    const std::vector<Node>& nodes() const { return nodes_; }

    int owner() const { return owner_; }
    void set_owner(int entity) { owner_ = entity; }

    NodeStatus tick(Ctx& ctx, double dt) {
        if (nodes_.empty()) return NodeStatus::Failure;
        return tick_node(0, ctx, dt);
    }

    /// Child-index path to the deepest Running node, if any.
    std::optional<std::vector<std::uint32_t>> running_path() const {
        if (nodes_.empty() || !nodes_[0].running) return std::nullopt;
        std::vector<std::uint32_t> path;
        const Node* n = &nodes_[0];
        while (n->running_child) {
            path.push_back(static_cast<std::uint32_t>(*n->running_child));
            n = &nodes_[n->children[*n->running_child]];
        }
        return path;
    }

    /// Aborts any running subtree.
    void reset(Ctx& ctx) {
        if (!nodes_.empty()) abort_subtree(0, ctx);
    }

    template <class C>
    friend TreeInstance<C> compile(const Chromosome&, const NodeLibrary&, const PrimitiveTable<C>&);

private:
    NodeStatus tick_node(std::size_t index, Ctx& ctx, double dt) {
        Node& n = nodes_[index];
        const bool was_running = n.running;
        for (auto& d : n.decorators) {
            if (!d.behavior->check(ctx, dt, was_running)) {
                if (was_running) abort_subtree(index, ctx);
                return NodeStatus::Failure;
            }
        }
        const NodeStatus status = execute(index, ctx, dt, was_running);
        Node& after = nodes_[index];
        after.running = status == NodeStatus::Running;
        if (!after.running)
            for (auto& d : after.decorators) d.behavior->host_finished(ctx, status);
        return status;
    }

    NodeStatus execute(std::size_t index, Ctx& ctx, double dt, bool was_running) {
        Node& n = nodes_[index];
        if (n.node_class == NodeClass::Task) return n.task->tick(ctx, dt, was_running);

        const bool selector = n.composite_kind == CompositeKind::Selector;
        const std::size_t start = (was_running && n.running_child) ? *n.running_child : 0;
        n.running_child.reset();
        for (std::size_t i = start; i < n.children.size(); ++i) {
            const NodeStatus s = tick_node(n.children[i], ctx, dt);
            if (s == NodeStatus::Running) {
                nodes_[index].running_child = i;
                return s;
            }
            if (selector && s == NodeStatus::Success) return s;
            if (!selector && s == NodeStatus::Failure) return s;
        }
        return selector ? NodeStatus::Failure : NodeStatus::Success;
    }

    void abort_subtree(std::size_t index, Ctx& ctx) {
        Node& n = nodes_[index];
        if (!n.running) return;
        if (n.running_child) abort_subtree(n.children[*n.running_child], ctx);
        if (n.task) n.task->abort(ctx);
        n.running = false;
        n.running_child.reset();
    }

    std::vector<Node> nodes_;  // pre-order; index 0 is the root
    int owner_ = -1;
};

/// Builds an executable instance. Throws UnknownNodeId, ArityViolation, or
/// PropertyOutOfRange.
template <class Ctx>
TreeInstance<Ctx> compile(const Chromosome& genome, const NodeLibrary& lib, const PrimitiveTable<Ctx>& prims) {
    using Instance = TreeInstance<Ctx>;
    Instance inst;

    auto resolve_params = [&](const NodePayload& p) -> PropertyMap {
        if (!p.generated) {
            const auto* m = lib.find_mapped(p.id);
            if (!m || m->node_class != p.node_class)
                throw UnknownNodeId("unknown mapped " + std::string(to_string(p.node_class)) + " '" + p.id + "'");
            return m->fixed_params;
        }
        const auto* t = lib.find_template(p.id);
        if (!t || t->node_class != p.node_class)
            throw UnknownNodeId("unknown " + std::string(to_string(p.node_class)) + " template '" + p.id + "'");
        for (const auto& spec : t->properties) {
            auto it = p.properties.find(spec.name);
            if (it == p.properties.end()) throw PropertyOutOfRange(p.id + "." + spec.name + " is missing");
            if (!spec.admits(it->second)) throw PropertyOutOfRange(p.id + "." + spec.name + " outside template range");
        }
        for (const auto& [name, v] : p.properties)
            if (!t->find_property(name)) throw PropertyOutOfRange(p.id + "." + name + " is not a template property");
        return p.properties;
    };
    auto primitive_of = [&](const NodePayload& p) -> const std::string& {
        if (p.generated) return lib.find_template(p.id)->primitive;
        return lib.find_mapped(p.id)->primitive;
    };

    auto build = [&](auto& self, const ChromosomeNode& src) -> std::size_t {
        const std::size_t index = inst.nodes_.size();
        inst.nodes_.emplace_back();
        typename Instance::Node node;
        node.node_class = src.payload.node_class;
        node.id = src.payload.id;

        switch (src.payload.node_class) {
            case NodeClass::Decorator:
                throw ArityViolation("decorator '" + src.payload.id + "' used as a tree node");
            case NodeClass::Task: {
                if (!src.children.empty()) throw ArityViolation("task '" + src.payload.id + "' has children");
                const auto params = resolve_params(src.payload);
                auto it = prims.tasks.find(primitive_of(src.payload));
                if (it == prims.tasks.end())
                    throw UnknownNodeId("no task primitive '" + primitive_of(src.payload) + "'");
                node.task = it->second(params);
                break;
            }
            case NodeClass::Composite: {
                if (src.payload.generated) throw ArityViolation("composite '" + src.payload.id + "' is generated");
                auto kind = lib.composite_kind(src.payload.id);
                if (!kind) throw UnknownNodeId("unknown composite '" + src.payload.id + "'");
                node.composite_kind = *kind;
                break;
            }
        }
        for (const auto& d : src.decorators) {
            if (!d.is_decorator()) throw ArityViolation("'" + d.payload.id + "' attached as a decorator");
            if (!d.children.empty() || !d.decorators.empty())
                throw ArityViolation("decorator '" + d.payload.id + "' has attachments");
            const auto params = resolve_params(d.payload);
            auto it = prims.decorators.find(primitive_of(d.payload));
            if (it == prims.decorators.end())
                throw UnknownNodeId("no decorator primitive '" + primitive_of(d.payload) + "'");
            node.decorators.push_back({d.payload.id, it->second(params)});
        }
        inst.nodes_[index] = std::move(node);
        for (const auto& c : src.children) {
            const std::size_t ci = self(self, c);
            inst.nodes_[index].children.push_back(ci);
        }
        return index;
    };

    if (!genome.root.is_composite()) throw ArityViolation("root must be a composite");
    build(build, genome.root);
    return inst;
}

}  // namespace evobt
