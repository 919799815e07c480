#pragma once

#include <string>

#include "evobt/chromosome.hpp"
#include "evobt/io.hpp"
#include "evobt/node_library.hpp"
#include "evobt/rng.hpp"

namespace evobt::testing {

inline std::string data_path(const std::string& rel) { return std::string(EVOBT_DATA_DIR) + "/" + rel; }

inline const NodeLibrary& default_library() {
    static const NodeLibrary lib = load_library(data_path("library/default_roster.json"));
    return lib;
}

/// Random valid chromosome built directly from library entries.
class TreeGenerator {
public:
    explicit TreeGenerator(const NodeLibrary& lib) : lib_(lib) {}

    Chromosome operator()(Rng& rng, int max_depth = 4, double composite_prob = 0.45, double decorator_prob = 0.3) {
        Chromosome c;
        c.root = node(rng, 0, max_depth, composite_prob, decorator_prob, true);
        return c;
    }

private:
    ChromosomeNode payload_node(Rng& rng, NodeClass cls) {
        std::vector<const MappedNodeDef*> mapped = lib_.mapped_of(cls);
        std::vector<const GeneratedNodeTemplate*> tmpls = lib_.templates_of(cls);
        const std::size_t i = uniform_index(rng, mapped.size() + tmpls.size());
        if (i < mapped.size()) return ChromosomeNode{{cls, mapped[i]->id, false, {}}, {}, {}};
        return make_generated(cls, instantiate(*tmpls[i - mapped.size()], rng));
    }

    ChromosomeNode node(Rng& rng, int depth, int max_depth, double cp, double dp, bool force_composite) {
        ChromosomeNode n;
        if (force_composite || (depth < max_depth && uniform01(rng) < cp)) {
            n = make_composite(uniform_index(rng, 2) ? kSelectorId : kSequenceId);
            const std::size_t kids = uniform_index(rng, 5);
            for (std::size_t k = 0; k < kids; ++k) n.children.push_back(node(rng, depth + 1, max_depth, cp, dp, false));
        } else {
            n = payload_node(rng, NodeClass::Task);
        }
        while (uniform01(rng) < dp) n.decorators.push_back(payload_node(rng, NodeClass::Decorator));
        return n;
    }

    const NodeLibrary& lib_;
};

}  // namespace evobt::testing
