#pragma once

// Human-readable views of a chromosome: Graphviz DOT and an indented outline.

#include <string>

#include "evobt/chromosome.hpp"

namespace evobt {

namespace detail {

inline std::string value_text(const PropertyValue& v) {
    if (const auto* k = std::get_if<BlackboardKey>(&v)) return k->name;
    return property_to_json(v).dump();
}

inline std::string payload_text(const NodePayload& p) {
    std::string s = p.id;
    if (!p.generated || p.properties.empty()) return s;
    s += "(";
    bool first = true;
    for (const auto& [name, v] : p.properties) {
        if (!first) s += ", ";
        first = false;
        s += name + "=" + value_text(v);
    }
    return s + ")";
}

inline std::string dot_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace detail

/// One-line label: decorators in brackets, then the node itself.
inline std::string node_label(const ChromosomeNode& n) {
    std::string s;
    for (const auto& d : n.decorators) s += "[" + detail::payload_text(d.payload) + "] ";
    return s + detail::payload_text(n.payload);
}

/// Graphviz digraph with one vertex per composite or task. Decorators are
/// folded into the label of the node they guard.
inline std::string to_dot(const Chromosome& c) {
    std::string out = "digraph btree {\n  node [fontname=\"Helvetica\"];\n";
    int next = 0;
    auto walk = [&](auto&& self, const ChromosomeNode& n) -> int {
        const int id = next++;
        std::string label = detail::dot_escape(node_label(n));
        const char* shape = n.is_composite() ? "box" : "ellipse";
        out += "  n" + std::to_string(id) + " [shape=" + shape + ", label=\"" + label + "\"];\n";
        for (const auto& ch : n.children) {
            const int cid = self(self, ch);
            out += "  n" + std::to_string(id) + " -> n" + std::to_string(cid) + ";\n";
        }
        return id;
    };
    walk(walk, c.root);
    return out + "}\n";
}

/// Indented text outline, two spaces per level.
inline std::string outline(const Chromosome& c) {
    std::string out;
    auto walk = [&](auto&& self, const ChromosomeNode& n, int depth) -> void {
        out += std::string(static_cast<std::size_t>(depth) * 2, ' ') + node_label(n) + "\n";
        for (const auto& ch : n.children) self(self, ch, depth + 1);
    };
    walk(walk, c.root, 0);
    return out;
}

}  // namespace evobt
