#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "powerlin/errors.hpp"

namespace powerlin {

enum class BusKind { PQ = 1, PV = 2, Slack = 3 };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double p_load = 0.0;
    double q_load = 0.0;
    double shunt_g = 0.0;
    double shunt_b = 0.0;
    double v_mag = 1.0;
    double v_ang = 0.0;  // radians
    double v_max = 1.1;
    double v_min = 0.9;
    double base_kv = 0.0;
    int area = 1;
    int zone = 1;

    bool operator==(Bus const&) const = default;
};

struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_charge = 0.0;
    double rate_a = 0.0;
    double rate_b = 0.0;
    double rate_c = 0.0;
    double tap = 1.0;
    double shift = 0.0;  // radians
    bool status = true;
    double ang_min = -2.0 * M_PI;
    double ang_max = 2.0 * M_PI;

    bool operator==(Branch const&) const = default;
};

/// Polynomial generation cost over physical megawatts, coefficients[k] multiplies P^k.
struct CostCurve {
    std::vector<double> coefficients;

    int degree() const { return coefficients.empty() ? 0 : static_cast<int>(coefficients.size()) - 1; }
    double coefficient(int k) const {
        return k < static_cast<int>(coefficients.size()) ? coefficients[k] : 0.0;
    }
    double evaluate_mw(double p_mw) const {
        double value = 0.0;
        for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) value = value * p_mw + *it;
        return value;
    }
    /// Usable by the OPF: degree <= 2 (higher terms zero) and non-negative curvature.
    bool is_convex_quadratic() const {
        for (int k = 3; k <= degree(); ++k)
            if (coefficients[k] != 0.0) return false;
        return coefficient(2) >= 0.0;
    }

    bool operator==(CostCurve const&) const = default;
};

struct Generator {
    int bus = 0;
    double p_gen = 0.0;
    double q_gen = 0.0;
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
    double v_set = 1.0;
    double m_base = 100.0;
    bool status = true;
    CostCurve cost;
    int startup = 0;
    int shutdown = 0;

    bool operator==(Generator const&) const = default;
};

struct Network {
    std::string name;
    double base_mva = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    bool per_unit = false;
    /// Case-file assignments the benchmark does not consume, kept verbatim for round-trips.
    std::vector<std::string> opaque_blocks;

    bool operator==(Network const&) const = default;

    std::size_t bus_count() const { return buses.size(); }
    std::size_t branch_count() const { return branches.size(); }
    std::size_t generator_count() const { return generators.size(); }
};

/// Maps external bus labels to positions in Network::buses.
class BusIndex {
  public:
    BusIndex() = default;
    explicit BusIndex(Network const& net) {
        for (std::size_t i = 0; i < net.buses.size(); ++i) index_.emplace(net.buses[i].id, i);
    }

    std::optional<std::size_t> find(int id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t at(int id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw InvalidNetwork("unknown bus " + std::to_string(id));
        return it->second;
    }

  private:
    std::unordered_map<int, std::size_t> index_;
};

struct SeriesAdmittance {
    double g = 0.0;
    double b = 0.0;
};

inline SeriesAdmittance derive_series_admittance(Branch const& branch) {
    double const z2 = branch.r * branch.r + branch.x * branch.x;
    if (z2 == 0.0)
        throw ZeroImpedance("branch " + std::to_string(branch.from_bus) + "-" +
                            std::to_string(branch.to_bus));
    return {branch.r / z2, -branch.x / z2};
}

/// Divides every power quantity by base_mva. Applying it to a per-unit network is a no-op.
inline Network to_per_unit(Network net) {
    if (!(net.base_mva > 0.0)) throw NonPositiveBase();
    if (net.per_unit) return net;
    double const base = net.base_mva;
    for (auto& bus : net.buses) {
        bus.p_load /= base;
        bus.q_load /= base;
        bus.shunt_g /= base;
        bus.shunt_b /= base;
    }
    for (auto& gen : net.generators) {
        gen.p_gen /= base;
        gen.q_gen /= base;
        gen.p_min /= base;
        gen.p_max /= base;
        gen.q_min /= base;
        gen.q_max /= base;
    }
    for (auto& branch : net.branches) {
        branch.rate_a /= base;
        branch.rate_b /= base;
        branch.rate_c /= base;
    }
    net.per_unit = true;
    return net;
}

/// Inverse of to_per_unit, used when writing case files.
inline Network to_physical(Network net) {
    if (!(net.base_mva > 0.0)) throw NonPositiveBase();
    if (!net.per_unit) return net;
    double const base = net.base_mva;
    for (auto& bus : net.buses) {
        bus.p_load *= base;
        bus.q_load *= base;
        bus.shunt_g *= base;
        bus.shunt_b *= base;
    }
    for (auto& gen : net.generators) {
        gen.p_gen *= base;
        gen.q_gen *= base;
        gen.p_min *= base;
        gen.p_max *= base;
        gen.q_min *= base;
        gen.q_max *= base;
    }
    for (auto& branch : net.branches) {
        branch.rate_a *= base;
        branch.rate_b *= base;
        branch.rate_c *= base;
    }
    net.per_unit = false;
    return net;
}

struct Violation {
    std::string entity;
    std::string rule;

    std::string to_string() const { return entity + ": " + rule; }
};

namespace detail {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

inline std::vector<Violation> validate_network(Network const& net) {
    std::vector<Violation> out;
    auto add = [&out](std::string entity, std::string rule) {
        out.push_back({std::move(entity), std::move(rule)});
    };
    auto bus_name = [](int id) { return "bus " + std::to_string(id); };

    if (!(net.base_mva > 0.0)) add("network", "non-positive base");
    if (net.buses.empty()) add("network", "no buses");

    BusIndex index;
    {
        std::unordered_map<int, int> seen;
        for (auto const& bus : net.buses)
            if (++seen[bus.id] == 2) add(bus_name(bus.id), "duplicate bus id");
        index = BusIndex(net);
    }

    int slack_count = 0;
    for (auto const& bus : net.buses) {
        if (bus.kind == BusKind::Slack) ++slack_count;
        if (!(bus.v_min > 0.0)) add(bus_name(bus.id), "v_min must be positive");
        if (bus.v_min > bus.v_max) add(bus_name(bus.id), "v_min exceeds v_max");
        if (!std::isfinite(bus.p_load) || !std::isfinite(bus.v_mag))
            add(bus_name(bus.id), "non-finite value");
    }
    if (slack_count == 0 && !net.buses.empty()) add("network", "no slack");
    if (slack_count > 1) add("network", "multiple slack");

    for (std::size_t k = 0; k < net.branches.size(); ++k) {
        auto const& br = net.branches[k];
        std::string const entity = "branch " + std::to_string(k + 1) + " (" +
                                   std::to_string(br.from_bus) + "-" +
                                   std::to_string(br.to_bus) + ")";
        if (!index.find(br.from_bus) || !index.find(br.to_bus)) add(entity, "dangling reference");
        if (br.x == 0.0) add(entity, "zero reactance");
        if (br.r < 0.0) add(entity, "negative resistance");
        if (!(br.tap > 0.0)) add(entity, "non-positive tap");
        if (!std::isfinite(br.r) || !std::isfinite(br.x)) add(entity, "non-finite impedance");
    }

    std::unordered_map<int, double> setpoints;
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        auto const& gen = net.generators[k];
        std::string const entity = "generator " + std::to_string(k + 1) + " (bus " +
                                   std::to_string(gen.bus) + ")";
        if (!index.find(gen.bus)) add(entity, "dangling reference");
        if (gen.p_min > gen.p_max) add(entity, "p_min exceeds p_max");
        if (!gen.cost.is_convex_quadratic()) add(entity, "non-convex or higher-degree cost");
        auto [it, inserted] = setpoints.emplace(gen.bus, gen.v_set);
        if (!inserted && it->second != gen.v_set) add(entity, "conflicting voltage setpoints");
    }

    if (!net.buses.empty()) {
        detail::DisjointSets sets(net.buses.size());
        for (auto const& br : net.branches) {
            if (!br.status) continue;
            auto f = index.find(br.from_bus);
            auto t = index.find(br.to_bus);
            if (f && t) sets.unite(*f, *t);
        }
        std::size_t const root = sets.find(0);
        for (std::size_t i = 1; i < net.buses.size(); ++i) {
            if (sets.find(i) != root) {
                add("network", "connectivity violation (bus " + std::to_string(net.buses[i].id) +
                                   " is not connected to bus " + std::to_string(net.buses[0].id) +
                                   ")");
                break;
            }
        }
    }
    return out;
}

inline void require_valid(Network const& net) {
    auto const violations = validate_network(net);
    if (violations.empty()) return;
    std::string message = "invalid network";
    for (auto const& v : violations) message += "; " + v.to_string();
    throw InvalidNetwork(message);
}

/// Position of the slack bus in Network::buses.
inline std::size_t slack_position(Network const& net) {
    for (std::size_t i = 0; i < net.buses.size(); ++i)
        if (net.buses[i].kind == BusKind::Slack) return i;
    throw InvalidNetwork("no slack bus");
}

inline double total_load(Network const& net) {
    double sum = 0.0;
    for (auto const& bus : net.buses) sum += bus.p_load;
    return sum;
}

}  // namespace powerlin
