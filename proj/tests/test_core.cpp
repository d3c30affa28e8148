#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>
#include <string>

#include "powerlin/matpower.hpp"
#include "powerlin/network.hpp"
#include "support.hpp"

using namespace powerlin;
using testing_support::load_case;

namespace {

bool has_rule(std::vector<Violation> const& v, std::string const& rule) {
    return std::any_of(v.begin(), v.end(), [&](auto const& x) { return x.rule.find(rule) != std::string::npos; });
}

std::string replace_once(std::string text, std::string const& from, std::string const& to) {
    auto pos = text.find(from);
    if (pos != std::string::npos) text.replace(pos, from.size(), to);
    return text;
}

void expect_networks_close(Network const& a, Network const& b) {
    EXPECT_EQ(testing_support::first_difference(a, b), "");
}

}  // namespace

// ---- network ----

TEST(SeriesAdmittance, FirstCase14Branch) {
    Branch br;
    br.r = 0.01938;
    br.x = 0.05917;
    auto const y = derive_series_admittance(br);
    EXPECT_NEAR(y.g, 4.999131600798035, 1e-12);
    EXPECT_NEAR(y.b, -15.263086523179553, 1e-12);
}

TEST(SeriesAdmittance, LosslessAndSymmetricLines) {
    Branch br;
    br.r = 0.0;
    br.x = 0.25;
    EXPECT_DOUBLE_EQ(derive_series_admittance(br).g, 0.0);
    EXPECT_DOUBLE_EQ(derive_series_admittance(br).b, -4.0);
    br.r = 1.0;
    br.x = 1.0;
    EXPECT_DOUBLE_EQ(derive_series_admittance(br).g, 0.5);
    EXPECT_DOUBLE_EQ(derive_series_admittance(br).b, -0.5);
}

TEST(SeriesAdmittance, ZeroImpedanceThrows) {
    Branch br;
    br.r = 0.0;
    br.x = 0.0;
    EXPECT_THROW(derive_series_admittance(br), ZeroImpedance);
}

TEST(SeriesAdmittance, MagnitudeIdentity) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 500; ++t) {
        Branch br;
        br.r = testing_support::uniform(rng, 0.0, 2.0);
        br.x = testing_support::uniform(rng, -2.0, 2.0);
        if (br.r == 0.0 && br.x == 0.0) continue;
        auto const y = derive_series_admittance(br);
        EXPECT_GE(y.g, 0.0);
        double const z2 = br.r * br.r + br.x * br.x;
        EXPECT_NEAR((y.g * y.g + y.b * y.b) * z2, 1.0, 1e-12);
    }
}

TEST(PerUnit, Case14Values) {
    auto const net = load_case("case14");
    EXPECT_TRUE(net.per_unit);
    EXPECT_NEAR(net.buses[1].p_load, 0.217, 1e-15);
    EXPECT_EQ(net.buses[0].p_load, 0.0);
    EXPECT_NEAR(net.generators[0].p_max, 3.324, 1e-15);
}

TEST(PerUnit, IdempotentAndInvertible) {
    auto const net = load_case("case14");
    EXPECT_EQ(to_per_unit(net), net);
    auto const physical = to_physical(net);
    EXPECT_FALSE(physical.per_unit);
    EXPECT_NEAR(physical.buses[1].p_load, 21.7, 1e-12);
    EXPECT_EQ(to_physical(physical), physical);
}

TEST(PerUnit, NonPositiveBaseThrows) {
    Network net;
    net.base_mva = 0.0;
    EXPECT_THROW(to_per_unit(net), NonPositiveBase);
    net.base_mva = -5.0;
    EXPECT_THROW(to_per_unit(net), NonPositiveBase);
}

TEST(Validate, FixturesAreClean) {
    EXPECT_TRUE(validate_network(load_case("case14")).empty());
    EXPECT_TRUE(validate_network(load_case("case57")).empty());
}

TEST(Validate, MultipleSlack) {
    auto net = load_case("case14");
    net.buses[3].kind = BusKind::Slack;
    auto const v = validate_network(net);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].rule, "multiple slack");
}

TEST(Validate, DanglingBranch) {
    auto net = load_case("case14");
    net.branches[4].to_bus = 99;
    auto const v = validate_network(net);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].rule, "dangling reference");
}

TEST(Validate, SingleFaultMutationsAreRejected) {
    auto const base = load_case("case14");
    std::vector<std::pair<std::string, std::function<void(Network&)>>> faults = {
        {"no slack", [](Network& n) { n.buses[0].kind = BusKind::PQ; }},
        {"duplicate bus id", [](Network& n) { n.buses[5].id = n.buses[4].id; }},
        {"v_min exceeds v_max", [](Network& n) { n.buses[2].v_min = 1.2; }},
        {"v_min must be positive", [](Network& n) { n.buses[2].v_min = 0.0; }},
        {"zero reactance", [](Network& n) { n.branches[3].x = 0.0; }},
        {"negative resistance", [](Network& n) { n.branches[3].r = -0.1; }},
        {"non-positive tap", [](Network& n) { n.branches[3].tap = 0.0; }},
        {"p_min exceeds p_max", [](Network& n) { n.generators[1].p_min = 10.0; }},
        {"non-convex", [](Network& n) { n.generators[1].cost.coefficients = {0.0, 20.0, -1.0}; }},
        {"conflicting voltage setpoints",
         [](Network& n) {
             auto g = n.generators[1];
             g.v_set += 0.01;
             n.generators.push_back(g);
         }},
        {"non-positive base", [](Network& n) { n.base_mva = 0.0; }},
        {"connectivity violation",
         [](Network& n) {
             std::erase_if(n.branches, [](Branch const& b) { return b.from_bus == 7 || b.to_bus == 8; });
         }},
    };
    for (auto const& [rule, mutate] : faults) {
        auto net = base;
        mutate(net);
        EXPECT_TRUE(has_rule(validate_network(net), rule)) << rule;
        EXPECT_THROW(require_valid(net), InvalidNetwork) << rule;
    }
}

TEST(Validate, TwoIslands) {
    auto net = load_case("case14");
    net.branches.clear();
    Branch a;
    a.from_bus = 1;
    a.to_bus = 2;
    a.x = 0.1;
    net.branches.push_back(a);
    EXPECT_TRUE(has_rule(validate_network(net), "connectivity violation"));
}

// ---- parser ----

TEST(Parser, Case14RowCounts) {
    auto const ast = matpower::parse_case(testing_support::case_text("case14"));
    EXPECT_EQ(ast.name, "case14");
    EXPECT_EQ(ast.version, "2");
    EXPECT_EQ(ast.base_mva, 100.0);
    EXPECT_EQ(ast.matrix("bus").row_count(), 14u);
    EXPECT_EQ(ast.matrix("branch").row_count(), 20u);
    EXPECT_EQ(ast.matrix("gen").row_count(), 5u);
    EXPECT_EQ(ast.matrix("gencost").row_count(), 5u);
}

TEST(Parser, MissingGencost) {
    auto text = testing_support::case_text("case14");
    auto const start = text.find("mpc.gencost");
    auto const end = text.find("];", start);
    text.erase(start, end + 2 - start);
    try {
        matpower::parse_case(text);
        FAIL() << "expected MissingMatrix";
    } catch (MissingMatrix const& e) {
        EXPECT_NE(std::string(e.what()).find("gencost"), std::string::npos);
    }
}

TEST(Parser, EmptyInputReportsLineOne) {
    try {
        matpower::parse_case("");
        FAIL() << "expected SyntaxError";
    } catch (SyntaxError const& e) {
        EXPECT_EQ(e.line(), 1u);
    }
}

TEST(Parser, CorruptedNumberReportsPosition) {
    auto const text = replace_once(testing_support::case_text("case14"), "94.2", "94.2x");
    try {
        matpower::parse_case(text);
        FAIL() << "expected SyntaxError";
    } catch (SyntaxError const& e) {
        EXPECT_EQ(e.line(), 18u);
        EXPECT_GT(e.column(), 1u);
    }
}

TEST(Parser, RaggedMatrixIsRejected) {
    auto const text = replace_once(testing_support::case_text("case14"), "1.06\t0.94;", "1.06;");
    EXPECT_THROW(matpower::parse_case(text), SyntaxError);
}

TEST(Lower, Case14BusKinds) {
    auto const net = load_case("case14");
    auto count = [&](BusKind k) {
        return std::count_if(net.buses.begin(), net.buses.end(), [k](Bus const& b) { return b.kind == k; });
    };
    EXPECT_EQ(count(BusKind::Slack), 1);
    EXPECT_EQ(count(BusKind::PV), 4);
    EXPECT_EQ(count(BusKind::PQ), 9);
    EXPECT_NEAR(net.buses[1].v_ang, -4.98 * M_PI / 180.0, 1e-15);
}

TEST(Lower, PiecewiseLinearCostRejected) {
    auto text = testing_support::case_text("case14");
    auto const begin = text.find("mpc.gencost = [");
    auto const end = text.find("];", begin);
    std::string pwl = "mpc.gencost = [\n";
    for (int k = 0; k < 5; ++k) pwl += "\t1\t0\t0\t2\t0\t0\t100\t2000;\n";
    text.replace(begin, end - begin, pwl);
    EXPECT_THROW(matpower::read_network(text), UnsupportedCostModel);
}

TEST(Lower, InvalidBusTypeRejected) {
    auto const text = replace_once(testing_support::case_text("case14"), "4\t1\t47.8", "4\t7\t47.8");
    EXPECT_THROW(matpower::read_network(text), InvalidBusType);
}

TEST(Lower, ZeroTapMeansNominal) {
    auto const net = load_case("case14");
    for (auto const& br : net.branches) EXPECT_GT(br.tap, 0.0);
    EXPECT_EQ(net.branches[0].tap, 1.0);
    // 4-7 is a transformer in the fixture
    auto it = std::find_if(net.branches.begin(), net.branches.end(),
                           [](Branch const& b) { return b.from_bus == 4 && b.to_bus == 7; });
    ASSERT_NE(it, net.branches.end());
    EXPECT_DOUBLE_EQ(it->tap, 0.978);
}

TEST(Lower, OutOfServiceElementsDropped) {
    auto text = testing_support::case_text("case14");
    auto const ast = matpower::parse_case(text);
    auto edited = ast;
    edited.matrices["branch"].rows[2][10] = 0.0;
    edited.matrices["gen"].rows[4][7] = 0.0;
    auto const net = matpower::lower_case(edited);
    EXPECT_EQ(net.branch_count(), 19u);
    EXPECT_EQ(net.generator_count(), 4u);
}

TEST(Lower, ExtraFieldsPreserved) {
    auto text = testing_support::case_text("case14");
    text += "\nmpc.bus_name = {\n\t'Bus 1';\n\t'Bus 2';\n};\n";
    auto const net = matpower::read_network(text);
    ASSERT_EQ(net.opaque_blocks.size(), 1u);
    EXPECT_NE(net.opaque_blocks[0].find("'Bus 2'"), std::string::npos);
    auto const again = matpower::read_network(matpower::serialize_case(net));
    EXPECT_EQ(again.opaque_blocks, net.opaque_blocks);
}

TEST(RoundTrip, Fixtures) {
    for (auto const* name : {"case14", "case57"}) {
        auto const net = load_case(name);
        auto const again = matpower::read_network(matpower::serialize_case(net));
        expect_networks_close(net, again);
    }
}

TEST(RoundTrip, SingleBusNoBranches) {
    Network net;
    net.name = "single";
    Bus b;
    b.id = 1;
    b.kind = BusKind::Slack;
    net.buses.push_back(b);
    Generator g;
    g.bus = 1;
    g.p_max = 1.0;
    g.cost.coefficients = {0.0, 10.0};
    net.generators.push_back(g);
    net = to_per_unit(net);
    EXPECT_EQ(matpower::read_network(matpower::serialize_case(net)), net);
}

TEST(RoundTrip, PhaseShiftInDegrees) {
    auto net = load_case("case14");
    net.branches[0].shift = 0.1;
    auto const text = matpower::serialize_case(net);
    EXPECT_NE(text.find("5.729577951308"), std::string::npos);
    auto const again = matpower::read_network(text);
    EXPECT_NEAR(again.branches[0].shift, 0.1, 1e-12);
}

TEST(RoundTrip, RandomNetworks) {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 200; ++t) {
        auto const net = testing_support::random_network(rng);
        auto const again = matpower::read_network(matpower::serialize_case(net));
        expect_networks_close(net, again);
        if (HasFailure()) {
            ADD_FAILURE() << "trial " << t;
            break;
        }
    }
}

TEST(Parser, WhitespaceAndCommentsDoNotMatter) {
    auto const text = testing_support::case_text("case14");
    auto const reference = matpower::parse_case(text);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 20; ++t) {
        std::string mutated;
        for (char c : text) {
            mutated += c;
            if (c == '\t' && std::uniform_int_distribution<int>(0, 3)(rng) == 0) mutated += "  ";
            if (c == '\n' && std::uniform_int_distribution<int>(0, 5)(rng) == 0) mutated += "% noise\n";
        }
        auto const ast = matpower::parse_case(mutated);
        for (auto const& [key, m] : reference.matrices) EXPECT_EQ(ast.matrix(key).rows, m.rows) << key;
    }
}

TEST(Parser, CommaSeparatedAndContinuedRows) {
    std::string const text =
        "function mpc = tiny\nmpc.version = '2';\nmpc.baseMVA = 100;\n"
        "mpc.bus = [1, 3, 0, 0, 0, 0, 1, 1, 0, 135, 1, 1.1, 0.9; 2 1 50 10 0 0 1 1 0 135 1 1.1 ...\n 0.9];\n"
        "mpc.gen = [1 0 0 100 -100 1.02 100 1 200 0];\n"
        "mpc.branch = [1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360];\n"
        "mpc.gencost = [2 0 0 3 0.01 20 0];\n";
    auto const net = matpower::read_network(text);
    EXPECT_EQ(net.bus_count(), 2u);
    EXPECT_DOUBLE_EQ(net.buses[1].v_min, 0.9);
    EXPECT_DOUBLE_EQ(net.buses[1].p_load, 0.5);
    EXPECT_DOUBLE_EQ(net.generators[0].cost.coefficient(2), 0.01);
}
