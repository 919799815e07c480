#pragma once

// The genome: a value-type tree of node payloads. Decorators hang off their
// host node in an ordered attachment list and never appear as tree children.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/errors.hpp"
#include "evobt/node_library.hpp"

namespace evobt {

struct NodePayload {
    NodeClass node_class = NodeClass::Composite;
    std::string id;
    bool generated = false;  // generated instance of template `id`
    PropertyMap properties;  // generated payloads only

    bool operator==(const NodePayload&) const = default;

    /// Canonical text used for multiset accounting.
    std::string signature() const {
        std::string s = std::string(to_string(node_class)) + ":" + id;
        if (generated) s += properties_to_json(properties).dump();
        return s;
    }
};

struct ChromosomeNode {
    NodePayload payload;
    std::vector<ChromosomeNode> children;
    std::vector<ChromosomeNode> decorators;

    bool operator==(const ChromosomeNode&) const = default;

    bool is_composite() const { return payload.node_class == NodeClass::Composite; }
    bool is_task() const { return payload.node_class == NodeClass::Task; }
    bool is_decorator() const { return payload.node_class == NodeClass::Decorator; }
};

inline ChromosomeNode make_composite(std::string id, std::vector<ChromosomeNode> children = {}) {
    return ChromosomeNode{{NodeClass::Composite, std::move(id), false, {}}, std::move(children), {}};
}

inline ChromosomeNode make_task(std::string id) {
    return ChromosomeNode{{NodeClass::Task, std::move(id), false, {}}, {}, {}};
}

inline ChromosomeNode make_decorator(std::string id) {
    return ChromosomeNode{{NodeClass::Decorator, std::move(id), false, {}}, {}, {}};
}

inline ChromosomeNode make_generated(NodeClass cls, GeneratedInstance inst) {
    return ChromosomeNode{{cls, std::move(inst.template_id), true, std::move(inst.properties)}, {}, {}};
}

inline ChromosomeNode with_decorators(ChromosomeNode n, std::vector<ChromosomeNode> decorators) {
    n.decorators = std::move(decorators);
    return n;
}

struct Chromosome {
    ChromosomeNode root = make_composite(kSelectorId);
    std::int64_t generation_born = 0;
    std::int64_t lineage_id = 0;

    bool operator==(const Chromosome&) const = default;
};

/// Root-to-node child-index path, plus a decorator index for attachments.
struct NodeAddress {
    std::vector<std::uint32_t> path;
    std::optional<std::uint32_t> decorator;

    auto operator<=>(const NodeAddress&) const = default;
    bool is_decorator() const { return decorator.has_value(); }
    std::size_t depth() const { return path.size(); }
};

// ---------------------------------------------------------------------------
// Walks and indexing

inline std::size_t subtree_size(const ChromosomeNode& n) {
    std::size_t total = 1 + n.decorators.size();
    for (const auto& c : n.children) total += subtree_size(c);
    return total;
}

/// Tree nodes plus attached decorators.
inline std::size_t size(const Chromosome& c) { return subtree_size(c.root); }

inline std::size_t subtree_height(const ChromosomeNode& n) {
    std::size_t h = 0;
    for (const auto& c : n.children) h = std::max(h, 1 + subtree_height(c));
    return h;
}

inline std::size_t max_depth(const Chromosome& c) { return subtree_height(c.root); }

/// Visits every tree node (not attachments) in pre-order with its address.
template <class Node, class Fn>
void for_each_tree_node(Node& root, Fn&& fn) {
    NodeAddress addr;
    auto rec = [&](auto& self, Node& n) -> void {
        fn(n, std::as_const(addr));
        for (std::uint32_t i = 0; i < n.children.size(); ++i) {
            addr.path.push_back(i);
            self(self, n.children[i]);
            addr.path.pop_back();
        }
    };
    rec(rec, root);
}

/// Addresses grouped by depth. `with_decorators` adds attachment addresses
/// at their host's depth, immediately after the host.
inline std::vector<std::vector<NodeAddress>> depth_index(const Chromosome& c, bool with_decorators) {
    std::vector<std::vector<NodeAddress>> levels(max_depth(c) + 1);
    for_each_tree_node(c.root, [&](const ChromosomeNode& n, const NodeAddress& a) {
        auto& level = levels[a.depth()];
        level.push_back(a);
        if (with_decorators) {
            for (std::uint32_t d = 0; d < n.decorators.size(); ++d) {
                NodeAddress da = a;
                da.decorator = d;
                level.push_back(std::move(da));
            }
        }
    });
    return levels;
}

inline std::vector<NodeAddress> nodes_at_depth(const Chromosome& c, std::int64_t d) {
    const auto deepest = static_cast<std::int64_t>(max_depth(c));
    if (d < 0 || d > deepest)
        throw DepthOutOfRange("depth " + std::to_string(d) + " outside [0, " + std::to_string(deepest) + "]");
    return depth_index(c, true)[static_cast<std::size_t>(d)];
}

template <class Node>
Node& node_at_impl(Node& root, const NodeAddress& a) {
    Node* n = &root;
    for (auto i : a.path) {
        if (i >= n->children.size()) throw std::out_of_range("node address out of range");
        n = &n->children[i];
    }
    if (a.decorator) {
        if (*a.decorator >= n->decorators.size()) throw std::out_of_range("decorator index out of range");
        n = &n->decorators[*a.decorator];
    }
    return *n;
}

inline ChromosomeNode& node_at(Chromosome& c, const NodeAddress& a) { return node_at_impl(c.root, a); }
inline const ChromosomeNode& node_at(const Chromosome& c, const NodeAddress& a) { return node_at_impl(c.root, a); }

/// Signatures of every payload (tree nodes and attachments) in a subtree.
inline void collect_signatures(const ChromosomeNode& n, std::vector<std::string>& out) {
    out.push_back(n.payload.signature());
    for (const auto& d : n.decorators) out.push_back(d.payload.signature());
    for (const auto& c : n.children) collect_signatures(c, out);
}

inline std::vector<std::string> payload_multiset(const ChromosomeNode& n) {
    std::vector<std::string> out;
    collect_signatures(n, out);
    std::ranges::sort(out);
    return out;
}

inline Chromosome deep_copy(const Chromosome& c) { return c; }

// ---------------------------------------------------------------------------
// Validation

/// Structural problems with a chromosome, independent of any library.
inline std::vector<std::string> structural_problems(const Chromosome& c) {
    std::vector<std::string> out;
    if (!c.root.is_composite()) out.push_back("root is not a composite");
    auto check = [&](auto& self, const ChromosomeNode& n, const std::string& where) -> void {
        if (n.is_decorator()) out.push_back(where + ": decorator used as a tree node");
        if (n.is_task() && !n.children.empty()) out.push_back(where + ": task has children");
        if (n.is_composite() && n.payload.generated) out.push_back(where + ": composite marked generated");
        if (!n.payload.generated && !n.payload.properties.empty())
            out.push_back(where + ": mapped node carries properties");
        for (std::size_t i = 0; i < n.decorators.size(); ++i) {
            const auto& d = n.decorators[i];
            const auto dw = where + "@" + std::to_string(i);
            if (!d.is_decorator()) out.push_back(dw + ": non-decorator in decorator list");
            if (!d.children.empty() || !d.decorators.empty()) out.push_back(dw + ": decorator has attachments");
            if (!d.payload.generated && !d.payload.properties.empty())
                out.push_back(dw + ": mapped node carries properties");
        }
        for (std::size_t i = 0; i < n.children.size(); ++i)
            self(self, n.children[i], where + "/" + std::to_string(i));
    };
    check(check, c.root, "");
    return out;
}

/// Library-level problems: dangling ids, class mismatches, property values
/// missing or outside their template ranges.
inline std::vector<std::string> library_problems(const Chromosome& c, const NodeLibrary& lib) {
    std::vector<std::string> out;
    auto check_payload = [&](const NodePayload& p, const std::string& where) {
        if (p.node_class == NodeClass::Composite) {
            if (!lib.composite_kind(p.id)) out.push_back(where + ": unknown composite '" + p.id + "'");
            return;
        }
        if (p.generated) {
            const auto* t = lib.find_template(p.id);
            if (!t || t->node_class != p.node_class) {
                out.push_back(where + ": unknown template '" + p.id + "'");
                return;
            }
            for (const auto& spec : t->properties) {
                auto it = p.properties.find(spec.name);
                if (it == p.properties.end() || !spec.admits(it->second))
                    out.push_back(where + ": property '" + spec.name + "' missing or out of range");
            }
            for (const auto& [name, v] : p.properties)
                if (!t->find_property(name)) out.push_back(where + ": unexpected property '" + name + "'");
        } else {
            const auto* m = lib.find_mapped(p.id);
            if (!m || m->node_class != p.node_class) out.push_back(where + ": unknown mapped node '" + p.id + "'");
        }
    };
    for_each_tree_node(c.root, [&](const ChromosomeNode& n, const NodeAddress& a) {
        std::string where = "/";
        for (auto i : a.path) where += std::to_string(i) + "/";
        check_payload(n.payload, where);
        for (const auto& d : n.decorators) check_payload(d.payload, where + "@");
    });
    return out;
}

inline bool is_valid(const Chromosome& c, const NodeLibrary* lib = nullptr) {
    return structural_problems(c).empty() && (!lib || library_problems(c, *lib).empty());
}

// ---------------------------------------------------------------------------
// Serialization (.btree.json)

inline constexpr std::string_view kBtreeFormat = "evobt.btree/1";

inline nlohmann::json node_to_json(const ChromosomeNode& n) {
    nlohmann::json j{{"kind", to_string(n.payload.node_class)}, {"id", n.payload.id}};
    if (n.payload.generated) j["properties"] = properties_to_json(n.payload.properties);
    if (!n.children.empty() || n.is_composite()) {
        j["children"] = nlohmann::json::array();
        for (const auto& c : n.children) j["children"].push_back(node_to_json(c));
    }
    if (!n.decorators.empty()) {
        j["decorators"] = nlohmann::json::array();
        for (const auto& d : n.decorators) j["decorators"].push_back(node_to_json(d));
    }
    return j;
}

inline ChromosomeNode node_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw SchemaError("node must be an object");
    if (!j.contains("kind") || !j["kind"].is_string()) throw SchemaError("node is missing a string 'kind'");
    if (!j.contains("id") || !j["id"].is_string()) throw SchemaError("node is missing a string 'id'");
    for (const auto& [k, v] : j.items())
        if (k != "kind" && k != "id" && k != "properties" && k != "children" && k != "decorators")
            throw SchemaError("unknown node field '" + k + "'");

    ChromosomeNode n;
    const auto kind = j["kind"].get<std::string>();
    if (kind == "composite")
        n.payload.node_class = NodeClass::Composite;
    else if (kind == "task")
        n.payload.node_class = NodeClass::Task;
    else if (kind == "decorator")
        n.payload.node_class = NodeClass::Decorator;
    else
        throw SchemaError("unknown payload kind '" + kind + "'");
    n.payload.id = j["id"].get<std::string>();

    if (j.contains("properties")) {
        if (n.is_composite()) throw InvariantError("composite '" + n.payload.id + "' carries properties");
        n.payload.generated = true;
        try {
            n.payload.properties = properties_from_json(j["properties"]);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(e.what());
        }
    }
    if (j.contains("children")) {
        if (!j["children"].is_array()) throw SchemaError("'children' must be an array");
        if (!n.is_composite() && !j["children"].empty())
            throw InvariantError(std::string(to_string(n.payload.node_class)) + " '" + n.payload.id +
                                 "' cannot have children");
        for (const auto& cj : j["children"]) {
            auto child = node_from_json(cj);
            if (child.is_decorator())
                throw InvariantError("decorator '" + child.payload.id + "' placed as a tree child");
            n.children.push_back(std::move(child));
        }
    }
    if (j.contains("decorators")) {
        if (!j["decorators"].is_array()) throw SchemaError("'decorators' must be an array");
        if (n.is_decorator()) throw InvariantError("decorator '" + n.payload.id + "' has attachments");
        for (const auto& dj : j["decorators"]) {
            auto d = node_from_json(dj);
            if (!d.is_decorator())
                throw InvariantError("non-decorator '" + d.payload.id + "' in a decorator list");
            n.decorators.push_back(std::move(d));
        }
    }
    return n;
}

inline nlohmann::json to_json(const Chromosome& c) {
    return nlohmann::json{{"format", kBtreeFormat},
                          {"generation_born", c.generation_born},
                          {"lineage_id", c.lineage_id},
                          {"root", node_to_json(c.root)}};
}

inline Chromosome chromosome_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("root")) throw SchemaError("tree document needs a 'root'");
    if (j.contains("format") && j["format"] != kBtreeFormat)
        throw SchemaError("unsupported tree format " + j["format"].dump());
    Chromosome c;
    c.root = node_from_json(j["root"]);
    if (!c.root.is_composite()) throw InvariantError("root must be a composite");
    try {
        c.generation_born = j.value("generation_born", std::int64_t{0});
        c.lineage_id = j.value("lineage_id", std::int64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(e.what());
    }
    return c;
}

inline std::string serialize(const Chromosome& c) { return to_json(c).dump(2) + "\n"; }

inline Chromosome deserialize(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    return chromosome_from_json(j);
}

}  // namespace evobt
