#pragma once

// Reference operating points stored as JSON:
//
//   { "version": 1, "case": "case14", "objective": 8081.19,
//     "bus":    [[id, vm_pu, va_deg], ...],
//     "gen":    [[bus, pg_mw], ...],
//     "branch": [[from, to, pij_mw], ...] }
//
// Powers are in MW and angles in degrees, as in a MATPOWER result struct.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powerlin/ac_engine.hpp"
#include "powerlin/errors.hpp"
#include "powerlin/network.hpp"

namespace powerlin {

class InvalidBaseline : public Error {
  public:
    explicit InvalidBaseline(std::string const& what) : Error("invalid baseline: " + what) {}
};

struct BaselineSolution {
    std::string case_name;
    double objective = 0.0;
    std::vector<double> v_mag;
    std::vector<double> v_ang;        // radians
    std::vector<double> pg;           // per-unit, per generator
    std::vector<double> branch_flow;  // per-unit, from side
};

/// Largest nodal active-power mismatch of the baseline state against the network equations.
inline double baseline_balance_mismatch(Network const& net, BaselineSolution const& base) {
    auto const adm = ac::build_admittance(net);
    std::vector<ac::Complex> v(net.bus_count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::polar(base.v_mag[i], base.v_ang[i]);
    auto const s = ac::detail::injections(adm, v);
    std::vector<double> scheduled(net.bus_count());
    for (std::size_t i = 0; i < scheduled.size(); ++i) scheduled[i] = -net.buses[i].p_load;
    BusIndex const index(net);
    for (std::size_t k = 0; k < net.generator_count(); ++k)
        scheduled[index.at(net.generators[k].bus)] += base.pg[k];
    double worst = 0.0;
    for (std::size_t i = 0; i < scheduled.size(); ++i) worst = std::max(worst, std::abs(s[i].real() - scheduled[i]));
    return worst;
}

inline BaselineSolution parse_baseline(std::string const& text, Network const& net,
                                       double balance_tolerance = 1e-4) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (nlohmann::json::exception const& e) {
        throw InvalidBaseline(e.what());
    }
    BaselineSolution base;
    try {
        base.case_name = doc.value("case", std::string{});
        base.objective = doc.at("objective").get<double>();
        double const mva = net.base_mva;
        BusIndex const index(net);

        auto const& buses = doc.at("bus");
        if (buses.size() != net.bus_count()) throw InvalidBaseline("bus count does not match the case");
        base.v_mag.assign(net.bus_count(), 0.0);
        base.v_ang.assign(net.bus_count(), 0.0);
        std::vector<bool> seen(net.bus_count(), false);
        for (auto const& row : buses) {
            auto const i = index.find(row.at(0).get<int>());
            if (!i) throw InvalidBaseline("unknown bus " + row.at(0).dump());
            seen[*i] = true;
            base.v_mag[*i] = row.at(1).get<double>();
            base.v_ang[*i] = row.at(2).get<double>() * std::numbers::pi / 180.0;
        }
        for (bool s : seen)
            if (!s) throw InvalidBaseline("bus list is missing entries");

        auto const& gens = doc.at("gen");
        if (gens.size() != net.generator_count())
            throw InvalidBaseline("generator count does not match the case");
        for (std::size_t k = 0; k < gens.size(); ++k) {
            if (gens[k].at(0).get<int>() != net.generators[k].bus)
                throw InvalidBaseline("generator " + std::to_string(k + 1) + " bus mismatch");
            base.pg.push_back(gens[k].at(1).get<double>() / mva);
        }

        auto const& branches = doc.at("branch");
        if (branches.size() != net.branch_count())
            throw InvalidBaseline("branch count does not match the case");
        for (std::size_t k = 0; k < branches.size(); ++k) {
            auto const& br = net.branches[k];
            if (branches[k].at(0).get<int>() != br.from_bus || branches[k].at(1).get<int>() != br.to_bus)
                throw InvalidBaseline("branch " + std::to_string(k + 1) + " endpoints mismatch");
            base.branch_flow.push_back(branches[k].at(2).get<double>() / mva);
        }
    } catch (nlohmann::json::exception const& e) {
        throw InvalidBaseline(e.what());
    }
    double const mismatch = baseline_balance_mismatch(net, base);
    if (mismatch > balance_tolerance) {
        std::ostringstream msg;
        msg << "AC balance mismatch " << mismatch << " p.u. exceeds " << balance_tolerance;
        throw InvalidBaseline(msg.str());
    }
    return base;
}

inline BaselineSolution load_baseline(std::filesystem::path const& path, Network const& net) {
    std::ifstream in(path);
    if (!in) throw Error("baseline not found: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_baseline(buffer.str(), net);
}

inline std::string dump_baseline(BaselineSolution const& base, Network const& net) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["case"] = base.case_name.empty() ? net.name : base.case_name;
    doc["objective"] = base.objective;
    auto& buses = doc["bus"] = nlohmann::json::array();
    for (std::size_t i = 0; i < net.bus_count(); ++i)
        buses.push_back({net.buses[i].id, base.v_mag[i], base.v_ang[i] * 180.0 / std::numbers::pi});
    auto& gens = doc["gen"] = nlohmann::json::array();
    for (std::size_t k = 0; k < net.generator_count(); ++k)
        gens.push_back({net.generators[k].bus, base.pg[k] * net.base_mva});
    auto& branches = doc["branch"] = nlohmann::json::array();
    for (std::size_t k = 0; k < net.branch_count(); ++k)
        branches.push_back({net.branches[k].from_bus, net.branches[k].to_bus,
                            base.branch_flow[k] * net.base_mva});
    return doc.dump(1) + "\n";
}

}  // namespace powerlin
