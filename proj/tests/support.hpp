#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "powerlin/baseline.hpp"
#include "powerlin/matpower.hpp"
#include "powerlin/network.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return POWERLIN_DATA_DIR; }

inline std::string slurp(std::filesystem::path const& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline std::string case_text(std::string const& name) { return slurp(data_dir() / (name + ".m")); }

inline powerlin::Network load_case(std::string const& name) {
    return powerlin::matpower::read_network(case_text(name));
}

inline powerlin::BaselineSolution load_reference(std::string const& name, powerlin::Network const& net) {
    return powerlin::load_baseline(data_dir() / (name + "_baseline.json"), net);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Two buses joined by a line whose series admittance is exactly g + jb.
inline powerlin::Network two_bus(double g, double b, double load_mw = 0.0) {
    using namespace powerlin;
    Network net;
    net.name = "two_bus";
    Bus slack;
    slack.id = 1;
    slack.kind = BusKind::Slack;
    Bus load;
    load.id = 2;
    load.p_load = load_mw;
    net.buses = {slack, load};
    Branch br;
    br.from_bus = 1;
    br.to_bus = 2;
    double const y2 = g * g + b * b;
    br.r = g / y2;
    br.x = -b / y2;
    net.branches.push_back(br);
    Generator gen;
    gen.bus = 1;
    gen.v_set = 1.0;
    gen.p_max = 1000.0;
    gen.cost.coefficients = {0.0, 10.0, 0.01};
    net.generators.push_back(gen);
    return to_per_unit(net);
}

/// First field that differs between two networks beyond `rel` relative tolerance, or empty.
inline std::string first_difference(powerlin::Network const& a, powerlin::Network const& b, double rel = 1e-12) {
    std::string out;
    auto num = [&](char const* what, std::size_t k, double x, double y) {
        if (!out.empty()) return;
        if (std::abs(x - y) > rel * std::max({1.0, std::abs(x), std::abs(y)}))
            out = std::string(what) + "[" + std::to_string(k) + "]: " + std::to_string(x) + " vs " + std::to_string(y);
    };
    auto same = [&](char const* what, std::size_t k, bool equal) {
        if (out.empty() && !equal) out = std::string(what) + "[" + std::to_string(k) + "] differs";
    };
    if (a.bus_count() != b.bus_count() || a.branch_count() != b.branch_count() ||
        a.generator_count() != b.generator_count())
        return "element counts differ";
    same("name", 0, a.name == b.name);
    num("base_mva", 0, a.base_mva, b.base_mva);
    for (std::size_t i = 0; i < a.bus_count(); ++i) {
        auto const &x = a.buses[i], &y = b.buses[i];
        same("bus.id", i, x.id == y.id);
        same("bus.kind", i, x.kind == y.kind);
        same("bus.area", i, x.area == y.area);
        same("bus.zone", i, x.zone == y.zone);
        num("bus.p_load", i, x.p_load, y.p_load);
        num("bus.q_load", i, x.q_load, y.q_load);
        num("bus.shunt_g", i, x.shunt_g, y.shunt_g);
        num("bus.shunt_b", i, x.shunt_b, y.shunt_b);
        num("bus.v_mag", i, x.v_mag, y.v_mag);
        num("bus.v_ang", i, x.v_ang, y.v_ang);
        num("bus.v_max", i, x.v_max, y.v_max);
        num("bus.v_min", i, x.v_min, y.v_min);
        num("bus.base_kv", i, x.base_kv, y.base_kv);
    }
    for (std::size_t k = 0; k < a.branch_count(); ++k) {
        auto const &x = a.branches[k], &y = b.branches[k];
        same("branch.ends", k, x.from_bus == y.from_bus && x.to_bus == y.to_bus);
        same("branch.status", k, x.status == y.status);
        num("branch.r", k, x.r, y.r);
        num("branch.x", k, x.x, y.x);
        num("branch.b_charge", k, x.b_charge, y.b_charge);
        num("branch.rate_a", k, x.rate_a, y.rate_a);
        num("branch.rate_b", k, x.rate_b, y.rate_b);
        num("branch.rate_c", k, x.rate_c, y.rate_c);
        num("branch.tap", k, x.tap, y.tap);
        num("branch.shift", k, x.shift, y.shift);
        num("branch.ang_min", k, x.ang_min, y.ang_min);
        num("branch.ang_max", k, x.ang_max, y.ang_max);
    }
    for (std::size_t k = 0; k < a.generator_count(); ++k) {
        auto const &x = a.generators[k], &y = b.generators[k];
        same("gen.bus", k, x.bus == y.bus);
        num("gen.startup", k, x.startup, y.startup);
        num("gen.shutdown", k, x.shutdown, y.shutdown);
        same("gen.cost.size", k, x.cost.coefficients.size() == y.cost.coefficients.size());
        if (!out.empty()) return out;
        for (std::size_t c = 0; c < x.cost.coefficients.size(); ++c)
            num("gen.cost", k, x.cost.coefficients[c], y.cost.coefficients[c]);
        num("gen.p_gen", k, x.p_gen, y.p_gen);
        num("gen.q_gen", k, x.q_gen, y.q_gen);
        num("gen.p_min", k, x.p_min, y.p_min);
        num("gen.p_max", k, x.p_max, y.p_max);
        num("gen.q_min", k, x.q_min, y.q_min);
        num("gen.q_max", k, x.q_max, y.q_max);
        num("gen.v_set", k, x.v_set, y.v_set);
        num("gen.m_base", k, x.m_base, y.m_base);
    }
    same("opaque_blocks", 0, a.opaque_blocks == b.opaque_blocks);
    return out;
}

/// Random connected network in per-unit with a single slack bus at position 0. Branches form a
/// spanning chain plus optional extra links.
struct RandomNetworkOptions {
    int min_buses = 2;
    int max_buses = 6;
    bool lossless = false;
    bool shunts = true;
    bool transformers = true;
    int max_extra_generators = 2;
};

inline powerlin::Network random_network(std::mt19937_64& rng, RandomNetworkOptions const& opt = {}) {
    using namespace powerlin;
    Network net;
    net.name = "rand";
    net.base_mva = std::uniform_int_distribution<int>(0, 1)(rng) ? 100.0 : uniform(rng, 10.0, 500.0);
    int const n = std::uniform_int_distribution<int>(opt.min_buses, opt.max_buses)(rng);
    for (int i = 0; i < n; ++i) {
        Bus b;
        b.id = i == 0 ? 1 : 1 + i + std::uniform_int_distribution<int>(0, 1)(rng) * 10 * i;
        b.kind = i == 0 ? BusKind::Slack : BusKind::PQ;
        b.p_load = i == 0 ? 0.0 : uniform(rng, 0.0, 60.0);
        b.q_load = i == 0 ? 0.0 : uniform(rng, -5.0, 20.0);
        if (opt.shunts) {
            b.shunt_g = uniform(rng, 0.0, 1.0);
            b.shunt_b = uniform(rng, -5.0, 20.0);
        }
        b.v_mag = uniform(rng, 0.95, 1.05);
        b.v_ang = uniform(rng, -0.2, 0.2);
        b.base_kv = std::uniform_int_distribution<int>(0, 1)(rng) ? 138.0 : uniform(rng, 1.0, 400.0);
        b.area = std::uniform_int_distribution<int>(1, 3)(rng);
        b.zone = std::uniform_int_distribution<int>(1, 3)(rng);
        b.v_max = uniform(rng, 1.05, 1.1);
        b.v_min = uniform(rng, 0.9, 0.95);
        net.buses.push_back(b);
    }
    auto add_branch = [&](int from, int to) {
        Branch br;
        br.from_bus = net.buses[from].id;
        br.to_bus = net.buses[to].id;
        br.r = opt.lossless ? 0.0 : uniform(rng, 0.0, 0.05);
        br.x = uniform(rng, 0.02, 0.3);
        br.b_charge = opt.lossless ? 0.0 : uniform(rng, 0.0, 0.1);
        br.rate_a = uniform(rng, 0.0, 300.0);
        br.rate_b = br.rate_a;
        br.rate_c = br.rate_a;
        if (opt.transformers && std::uniform_int_distribution<int>(0, 3)(rng) == 0) {
            br.tap = uniform(rng, 0.9, 1.1);
            br.shift = uniform(rng, -0.1, 0.1);
        }
        br.ang_min = -2.0 * M_PI;
        br.ang_max = 2.0 * M_PI;
        net.branches.push_back(br);
    };
    for (int i = 1; i < n; ++i) add_branch(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
    int const extra = std::uniform_int_distribution<int>(0, n / 2)(rng);
    for (int e = 0; e < extra; ++e) {
        int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
        int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
        if (a != b) add_branch(a, b);
    }
    auto add_gen = [&](int bus, double v_set) {
        Generator g;
        g.bus = net.buses[bus].id;
        g.p_gen = uniform(rng, 0.0, 100.0);
        g.q_gen = uniform(rng, -10.0, 10.0);
        g.q_max = 100.0;
        g.q_min = -100.0;
        g.v_set = v_set;
        g.m_base = net.base_mva;
        g.p_min = uniform(rng, 0.0, 10.0);
        g.p_max = g.p_min + uniform(rng, 50.0, 250.0);
        g.cost.coefficients = {uniform(rng, 0.0, 50.0), uniform(rng, 5.0, 40.0), uniform(rng, 0.001, 0.1)};
        g.startup = std::uniform_int_distribution<int>(0, 100)(rng);
        net.generators.push_back(g);
    };
    add_gen(0, uniform(rng, 1.0, 1.06));
    int const gens = std::uniform_int_distribution<int>(0, std::min(opt.max_extra_generators, n - 1))(rng);
    for (int k = 0; k < gens; ++k) {
        int const bus = 1 + k;
        net.buses[bus].kind = BusKind::PV;
        add_gen(bus, uniform(rng, 0.98, 1.06));
    }
    return to_per_unit(net);
}

}  // namespace testing_support
