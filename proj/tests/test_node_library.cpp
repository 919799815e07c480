#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "evobt/node_library.hpp"
#include "test_support.hpp"

using namespace evobt;
using evobt::testing::default_library;

namespace {

GeneratedNodeTemplate real_template(const std::string& id, const std::string& prop, double lo, double hi) {
    return GeneratedNodeTemplate{id, NodeClass::Task, "prim", {PropertySpec{prop, PropertyType::Real, lo, hi, {}}}};
}

double ks_uniform(std::vector<double> xs, double lo, double hi) {
    std::ranges::sort(xs);
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = (xs[i] - lo) / (hi - lo);
        d = std::max({d, std::abs((static_cast<double>(i) + 1) / n - f), std::abs(f - static_cast<double>(i) / n)});
    }
    return d;
}

}  // namespace

TEST(Instantiate, DegenerateRangeIsExact) {
    Rng rng{1};
    const auto inst = instantiate(real_template("wait", "duration", 0.5, 0.5), rng);
    EXPECT_EQ(inst.template_id, "wait");
    EXPECT_EQ(std::get<double>(inst.properties.at("duration")), 0.5);
}

TEST(Instantiate, UniformMean) {
    Rng rng{7};
    const auto tmpl = real_template("distance_lt", "threshold", 1.0, 9.0);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) sum += std::get<double>(instantiate(tmpl, rng).properties.at("threshold"));
    EXPECT_NEAR(sum / 10000.0, 5.0, 0.15);
}

TEST(Instantiate, ChanceGateHasBothFields) {
    Rng rng{3};
    const auto* tmpl = default_library().find_template("chance_gate");
    ASSERT_NE(tmpl, nullptr);
    bool saw_true = false, saw_false = false;
    for (int i = 0; i < 200; ++i) {
        const auto inst = instantiate(*tmpl, rng);
        ASSERT_TRUE(inst.properties.contains("p"));
        ASSERT_TRUE(inst.properties.contains("invert"));
        const double p = std::get<double>(inst.properties.at("p"));
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        (std::get<bool>(inst.properties.at("invert")) ? saw_true : saw_false) = true;
    }
    EXPECT_TRUE(saw_true);
    EXPECT_TRUE(saw_false);
}

TEST(Instantiate, IntegerAndKeyPropertiesStayInOptions) {
    Rng rng{11};
    const auto& lib = default_library();
    for (int i = 0; i < 500; ++i) {
        for (const auto& t : lib.templates) {
            const auto inst = instantiate(t, rng);
            EXPECT_TRUE(lib.find_template(inst.template_id));
            for (const auto& spec : t.properties) EXPECT_TRUE(spec.admits(inst.properties.at(spec.name))) << t.id;
        }
    }
}

TEST(Instantiate, KolmogorovSmirnovAgainstUniform) {
    Rng rng{2024};
    for (const auto& t : default_library().templates) {
        for (const auto& spec : t.properties) {
            if (spec.type != PropertyType::Real || spec.lo == spec.hi) continue;
            std::vector<double> xs;
            const GeneratedNodeTemplate single{t.id, t.node_class, t.primitive, {spec}};
            for (int i = 0; i < 10000; ++i) xs.push_back(std::get<double>(instantiate(single, rng).properties.at(spec.name)));
            EXPECT_LT(ks_uniform(xs, spec.lo, spec.hi), 0.02) << t.id << "." << spec.name;
        }
    }
}

TEST(Validate, BundledRosterIsClean) {
    const auto issues = validate(default_library());
    for (const auto& i : issues) ADD_FAILURE() << to_string(i.kind) << " " << i.id << " " << i.detail;
    EXPECT_TRUE(issues.empty());
}

TEST(Validate, BundledRosterCounts) {
    const auto& lib = default_library();
    EXPECT_EQ(lib.mapped_of(NodeClass::Decorator).size(), 8u);
    EXPECT_EQ(lib.templates_of(NodeClass::Decorator).size(), 4u);
    EXPECT_EQ(lib.mapped_of(NodeClass::Task).size(), 13u);
    EXPECT_EQ(lib.templates_of(NodeClass::Task).size(), 5u);
    EXPECT_EQ(lib.composite_ids(), (std::vector<std::string>{"selector", "sequence"}));
}

TEST(Validate, DuplicateIdAcrossLists) {
    NodeLibrary lib;
    lib.mapped.push_back(MappedNodeDef{"wait", NodeClass::Task, CompositeKind::Selector, "idle", {}});
    lib.templates.push_back(real_template("wait", "duration", 0.5, 2.0));
    const auto issues = validate(lib);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].kind, LibraryIssueKind::DuplicateId);
    EXPECT_EQ(issues[0].id, "wait");
}

TEST(Validate, InvertedRange) {
    NodeLibrary lib;
    lib.templates.push_back(real_template("bad", "x", 5.0, 2.0));
    const auto issues = validate(lib);
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].kind, LibraryIssueKind::InvertedRange);
    EXPECT_EQ(issues[0].id, "bad");
}

TEST(Validate, BlackboardOptionsMustBeDeclared) {
    NodeLibrary lib;
    lib.blackboard = {{"a", ValueType::Entity}};
    GeneratedNodeTemplate t{"key_check", NodeClass::Decorator, "prim", {}};
    t.properties.push_back(PropertySpec{"key", PropertyType::BlackboardKey, 0, 0, {"a", "b"}});
    t.properties.push_back(PropertySpec{"none", PropertyType::BlackboardKey, 0, 0, {}});
    lib.templates.push_back(t);
    const auto issues = validate(lib);
    ASSERT_EQ(issues.size(), 2u);
    EXPECT_EQ(issues[0].kind, LibraryIssueKind::UnknownBlackboardKey);
    EXPECT_EQ(issues[1].kind, LibraryIssueKind::EmptyOptions);
}

TEST(Validate, PrimitiveBindings) {
    NodeLibrary lib;
    lib.mapped.push_back(MappedNodeDef{"combo", NodeClass::Composite, CompositeKind::Sequence, "oops", {}});
    lib.mapped.push_back(MappedNodeDef{"go", NodeClass::Task, CompositeKind::Selector, "missing", {}});
    const std::set<std::string> known{"present"};
    const auto issues = validate(lib, &known);
    ASSERT_EQ(issues.size(), 2u);
    EXPECT_EQ(issues[0].kind, LibraryIssueKind::CompositeWithPrimitive);
    EXPECT_EQ(issues[1].kind, LibraryIssueKind::MissingPrimitive);
}

TEST(LibraryJson, RoundTripsThroughDocument) {
    const auto& lib = default_library();
    const auto again = library_from_json(library_to_json(lib));
    EXPECT_EQ(library_to_json(again), library_to_json(lib));
    EXPECT_EQ(again.mapped.size(), lib.mapped.size());
    const auto* close = again.find_mapped("is_target_close");
    ASSERT_NE(close, nullptr);
    EXPECT_EQ(std::get<double>(close->fixed_params.at("radius")), 2.0);
    const auto* sensed = again.find_mapped("has_sensed_enemy");
    EXPECT_EQ(std::get<BlackboardKey>(sensed->fixed_params.at("key")).name, "sensed_player");
}
