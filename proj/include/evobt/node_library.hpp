#pragma once

// Registry of designer-provided node material: mapped node definitions
// (fixed nodes tracked by id) and generated-node templates whose property
// values are sampled when evolution creates a new node.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "evobt/blackboard.hpp"
#include "evobt/rng.hpp"

namespace evobt {

struct BlackboardKey {
    std::string name;
    auto operator<=>(const BlackboardKey&) const = default;
};

using PropertyValue = std::variant<std::int64_t, double, bool, BlackboardKey>;
using PropertyMap = std::map<std::string, PropertyValue>;

enum class PropertyType { Integer, Real, Boolean, BlackboardKey };

inline const char* to_string(PropertyType t) {
    switch (t) {
        case PropertyType::Integer: return "integer";
        case PropertyType::Real: return "real";
        case PropertyType::Boolean: return "boolean";
        case PropertyType::BlackboardKey: return "blackboard_key";
    }
    return "?";
}

inline PropertyType property_type_of(const PropertyValue& v) {
    return static_cast<PropertyType>(v.index());
}

enum class NodeClass { Composite, Task, Decorator };

inline const char* to_string(NodeClass c) {
    switch (c) {
        case NodeClass::Composite: return "composite";
        case NodeClass::Task: return "task";
        case NodeClass::Decorator: return "decorator";
    }
    return "?";
}

enum class CompositeKind { Selector, Sequence };

inline constexpr const char* kSelectorId = "selector";
inline constexpr const char* kSequenceId = "sequence";

struct PropertySpec {
    std::string name;
    PropertyType type = PropertyType::Real;
    double lo = 0.0;                   // numerics only
    double hi = 0.0;                   // numerics only
    std::vector<std::string> options;  // blackboard keys only

    /// Whether `v` has this spec's type and lies inside its range/options.
    bool admits(const PropertyValue& v) const {
        if (property_type_of(v) != type) return false;
        switch (type) {
            case PropertyType::Integer: {
                const auto i = std::get<std::int64_t>(v);
                return static_cast<double>(i) >= lo && static_cast<double>(i) <= hi;
            }
            case PropertyType::Real: {
                const double d = std::get<double>(v);
                return d >= lo && d <= hi;
            }
            case PropertyType::Boolean: return true;
            case PropertyType::BlackboardKey:
                return std::ranges::find(options, std::get<BlackboardKey>(v).name) != options.end();
        }
        return false;
    }

    PropertyValue clamp(PropertyValue v) const {
        if (auto* d = std::get_if<double>(&v)) *d = std::clamp(*d, lo, hi);
        if (auto* i = std::get_if<std::int64_t>(&v)) {
            const auto ilo = static_cast<std::int64_t>(std::ceil(lo));
            const auto ihi = static_cast<std::int64_t>(std::floor(hi));
            *i = std::clamp(*i, ilo, ihi);
        }
        return v;
    }
};

struct MappedNodeDef {
    std::string id;
    NodeClass node_class = NodeClass::Task;
    CompositeKind composite_kind = CompositeKind::Selector;  // composites only
    std::string primitive;                                   // empty for composites
    PropertyMap fixed_params;
};

struct GeneratedNodeTemplate {
    std::string id;
    NodeClass node_class = NodeClass::Task;
    std::string primitive;
    std::vector<PropertySpec> properties;

    const PropertySpec* find_property(const std::string& name) const {
        for (const auto& p : properties)
            if (p.name == name) return &p;
        return nullptr;
    }
};

struct GeneratedInstance {
    std::string template_id;
    PropertyMap properties;
};

/// Samples every property of `tmpl`: numerics uniform on their range,
/// booleans and blackboard keys uniform over their options.
inline GeneratedInstance instantiate(const GeneratedNodeTemplate& tmpl, Rng& rng) {
    GeneratedInstance out{tmpl.id, {}};
    for (const auto& spec : tmpl.properties) {
        switch (spec.type) {
            case PropertyType::Real:
                out.properties[spec.name] = uniform_real(rng, spec.lo, spec.hi);
                break;
            case PropertyType::Integer: {
                const auto lo = static_cast<std::int64_t>(std::ceil(spec.lo));
                const auto hi = static_cast<std::int64_t>(std::floor(spec.hi));
                out.properties[spec.name] = std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
                break;
            }
            case PropertyType::Boolean:
                out.properties[spec.name] = uniform_index(rng, 2) == 1;
                break;
            case PropertyType::BlackboardKey:
                out.properties[spec.name] = BlackboardKey{spec.options[uniform_index(rng, spec.options.size())]};
                break;
        }
    }
    return out;
}

enum class LibraryIssueKind {
    DuplicateId,
    InvertedRange,
    EmptyOptions,
    UnknownBlackboardKey,
    CompositeWithPrimitive,
    MissingPrimitive,
    InvalidClass,
    EmptyIntegerRange,
};

inline const char* to_string(LibraryIssueKind k) {
    switch (k) {
        case LibraryIssueKind::DuplicateId: return "DuplicateId";
        case LibraryIssueKind::InvertedRange: return "InvertedRange";
        case LibraryIssueKind::EmptyOptions: return "EmptyOptions";
        case LibraryIssueKind::UnknownBlackboardKey: return "UnknownBlackboardKey";
        case LibraryIssueKind::CompositeWithPrimitive: return "CompositeWithPrimitive";
        case LibraryIssueKind::MissingPrimitive: return "MissingPrimitive";
        case LibraryIssueKind::InvalidClass: return "InvalidClass";
        case LibraryIssueKind::EmptyIntegerRange: return "EmptyIntegerRange";
    }
    return "?";
}

struct LibraryIssue {
    LibraryIssueKind kind;
    std::string id;
    std::string detail;
};

class NodeLibrary {
public:
    BlackboardSchema blackboard;
    std::vector<MappedNodeDef> mapped;
    std::vector<GeneratedNodeTemplate> templates;

    const MappedNodeDef* find_mapped(const std::string& id) const {
        for (const auto& m : mapped)
            if (m.id == id) return &m;
        return nullptr;
    }

    const GeneratedNodeTemplate* find_template(const std::string& id) const {
        for (const auto& t : templates)
            if (t.id == id) return &t;
        return nullptr;
    }

    /// Composite kind for a built-in or mapped composite id.
    std::optional<CompositeKind> composite_kind(const std::string& id) const {
        if (id == kSelectorId) return CompositeKind::Selector;
        if (id == kSequenceId) return CompositeKind::Sequence;
        if (const auto* m = find_mapped(id); m && m->node_class == NodeClass::Composite)
            return m->composite_kind;
        return std::nullopt;
    }

    std::vector<std::string> composite_ids() const {
        std::vector<std::string> ids{kSelectorId, kSequenceId};
        for (const auto& m : mapped)
            if (m.node_class == NodeClass::Composite) ids.push_back(m.id);
        return ids;
    }

    std::vector<const MappedNodeDef*> mapped_of(NodeClass c) const {
        std::vector<const MappedNodeDef*> out;
        for (const auto& m : mapped)
            if (m.node_class == c) out.push_back(&m);
        return out;
    }

    std::vector<const GeneratedNodeTemplate*> templates_of(NodeClass c) const {
        std::vector<const GeneratedNodeTemplate*> out;
        for (const auto& t : templates)
            if (t.node_class == c) out.push_back(&t);
        return out;
    }
};

/// Lists every violated library invariant. When `known_primitives` is given,
/// primitive bindings are also checked against it.
inline std::vector<LibraryIssue> validate(const NodeLibrary& lib,
                                          const std::set<std::string>* known_primitives = nullptr) {
    std::vector<LibraryIssue> issues;
    std::set<std::string> seen{kSelectorId, kSequenceId};
    auto check_id = [&](const std::string& id) {
        if (!seen.insert(id).second) issues.push_back({LibraryIssueKind::DuplicateId, id, "id used more than once"});
    };
    auto check_primitive = [&](const std::string& id, const std::string& prim) {
        if (prim.empty() || (known_primitives && !known_primitives->contains(prim)))
            issues.push_back({LibraryIssueKind::MissingPrimitive, id, "primitive '" + prim + "' not available"});
    };

    for (const auto& m : lib.mapped) {
        check_id(m.id);
        if (m.node_class == NodeClass::Composite) {
            if (!m.primitive.empty())
                issues.push_back({LibraryIssueKind::CompositeWithPrimitive, m.id, "composites take no primitive"});
        } else {
            check_primitive(m.id, m.primitive);
        }
    }
    for (const auto& t : lib.templates) {
        check_id(t.id);
        if (t.node_class == NodeClass::Composite) {
            issues.push_back({LibraryIssueKind::InvalidClass, t.id, "templates must be tasks or decorators"});
            continue;
        }
        check_primitive(t.id, t.primitive);
        for (const auto& p : t.properties) {
            const std::string where = t.id + "." + p.name;
            switch (p.type) {
                case PropertyType::Real:
                    if (p.lo > p.hi) issues.push_back({LibraryIssueKind::InvertedRange, t.id, where});
                    break;
                case PropertyType::Integer:
                    if (p.lo > p.hi)
                        issues.push_back({LibraryIssueKind::InvertedRange, t.id, where});
                    else if (std::ceil(p.lo) > std::floor(p.hi))
                        issues.push_back({LibraryIssueKind::EmptyIntegerRange, t.id, where});
                    break;
                case PropertyType::Boolean: break;
                case PropertyType::BlackboardKey:
                    if (p.options.empty()) issues.push_back({LibraryIssueKind::EmptyOptions, t.id, where});
                    for (const auto& opt : p.options)
                        if (!lib.blackboard.contains(opt))
                            issues.push_back({LibraryIssueKind::UnknownBlackboardKey, t.id, where + ": " + opt});
                    break;
            }
        }
    }
    return issues;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json property_to_json(const PropertyValue& v) {
    return std::visit(
        [](const auto& x) -> nlohmann::json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, BlackboardKey>)
                return x.name;
            else
                return x;
        },
        v);
}

inline PropertyValue property_from_json(const nlohmann::json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return BlackboardKey{j.get<std::string>()};
    throw std::invalid_argument("property value must be a number, boolean, or string");
}

inline nlohmann::json properties_to_json(const PropertyMap& props) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : props) j[k] = property_to_json(v);
    return j;
}

inline PropertyMap properties_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("properties must be an object");
    PropertyMap out;
    for (const auto& [k, v] : j.items()) out[k] = property_from_json(v);
    return out;
}

inline PropertyType property_type_from_string(const std::string& s) {
    if (s == "integer") return PropertyType::Integer;
    if (s == "real") return PropertyType::Real;
    if (s == "boolean") return PropertyType::Boolean;
    if (s == "blackboard_key") return PropertyType::BlackboardKey;
    throw std::invalid_argument("unknown property type '" + s + "'");
}

inline std::string mapped_kind_string(const MappedNodeDef& m) {
    if (m.node_class == NodeClass::Composite)
        return m.composite_kind == CompositeKind::Selector ? "selector" : "sequence";
    return to_string(m.node_class);
}

inline nlohmann::json library_to_json(const NodeLibrary& lib) {
    nlohmann::json j;
    j["blackboard"] = nlohmann::json::object();
    for (const auto& [k, t] : lib.blackboard) j["blackboard"][k] = to_string(t);
    j["mapped"] = nlohmann::json::array();
    for (const auto& m : lib.mapped) {
        nlohmann::json e{{"id", m.id}, {"kind", mapped_kind_string(m)}};
        if (!m.primitive.empty()) e["primitive"] = m.primitive;
        if (!m.fixed_params.empty()) e["params"] = properties_to_json(m.fixed_params);
        j["mapped"].push_back(std::move(e));
    }
    j["templates"] = nlohmann::json::array();
    for (const auto& t : lib.templates) {
        nlohmann::json e{{"id", t.id}, {"kind", to_string(t.node_class)}, {"primitive", t.primitive}};
        e["properties"] = nlohmann::json::array();
        for (const auto& p : t.properties) {
            nlohmann::json pj{{"name", p.name}, {"type", to_string(p.type)}};
            if (p.type == PropertyType::Real || p.type == PropertyType::Integer) pj["range"] = {p.lo, p.hi};
            if (p.type == PropertyType::BlackboardKey) pj["options"] = p.options;
            e["properties"].push_back(std::move(pj));
        }
        j["templates"].push_back(std::move(e));
    }
    return j;
}

inline NodeLibrary library_from_json(const nlohmann::json& j) {
    NodeLibrary lib;
    if (j.contains("blackboard"))
        for (const auto& [k, v] : j.at("blackboard").items()) lib.blackboard[k] = value_type_from_string(v.get<std::string>());
    for (const auto& e : j.value("mapped", nlohmann::json::array())) {
        MappedNodeDef m;
        m.id = e.at("id").get<std::string>();
        const auto kind = e.at("kind").get<std::string>();
        if (kind == "task") {
            m.node_class = NodeClass::Task;
        } else if (kind == "decorator") {
            m.node_class = NodeClass::Decorator;
        } else if (kind == "selector" || kind == "sequence") {
            m.node_class = NodeClass::Composite;
            m.composite_kind = kind == "selector" ? CompositeKind::Selector : CompositeKind::Sequence;
        } else {
            throw std::invalid_argument("mapped node '" + m.id + "' has unknown kind '" + kind + "'");
        }
        m.primitive = e.value("primitive", std::string{});
        if (e.contains("params")) m.fixed_params = properties_from_json(e.at("params"));
        lib.mapped.push_back(std::move(m));
    }
    for (const auto& e : j.value("templates", nlohmann::json::array())) {
        GeneratedNodeTemplate t;
        t.id = e.at("id").get<std::string>();
        const auto kind = e.at("kind").get<std::string>();
        if (kind == "task")
            t.node_class = NodeClass::Task;
        else if (kind == "decorator")
            t.node_class = NodeClass::Decorator;
        else
            t.node_class = NodeClass::Composite;  // reported by validate()
        t.primitive = e.value("primitive", std::string{});
        for (const auto& pj : e.value("properties", nlohmann::json::array())) {
            PropertySpec p;
            p.name = pj.at("name").get<std::string>();
            p.type = property_type_from_string(pj.at("type").get<std::string>());
            if (pj.contains("range")) {
                p.lo = pj.at("range").at(0).get<double>();
                p.hi = pj.at("range").at(1).get<double>();
            }
            if (pj.contains("options")) p.options = pj.at("options").get<std::vector<std::string>>();
            t.properties.push_back(std::move(p));
        }
        lib.templates.push_back(std::move(t));
    }
    return lib;
}

}  // namespace evobt
