#pragma once

// Linear active-power flow models.
//
//   Method 1  DC:                  P = (th_i - th_j) / x
//   Method 2  first-order Taylor:  P = g (V_i - V_j) - b (th_i - th_j)
//   Method 3  modified angle:      P = 0.95 (g (W_i - W_j) - b (phi_i - phi_j)),  W = V^2, phi = th V^2
//   Method 4  squared voltage:     P = g (W_i - W_j) / 2 - b (th_i - th_j)
//   Method 5  log voltage:         P (1 - U_i) = g (U_i - U_j) - b (th_i - th_j),  U = ln V
//
// Each model is a set of affine expressions over its own variable space. Branches with an
// off-nominal tap use the series admittance divided by the tap ratio and subtract the phase
// shift from the angle difference (TapModel::ScaleAdmittance); TapModel::Ignore keeps the plain
// line formulas.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "powerlin/errors.hpp"
#include "powerlin/network.hpp"

namespace powerlin {

enum class VariableKind { Angle, Voltage, SquaredVoltage, ModifiedAngle, LogVoltage, GeneratorOutput };

enum class TapModel { ScaleAdmittance, Ignore };

struct VariableDescriptor {
    VariableKind kind;
    std::size_t element;  // bus position, or generator position for GeneratorOutput

    bool operator==(VariableDescriptor const&) const = default;
};

struct VariableSpace {
    std::vector<VariableDescriptor> variables;
    std::vector<std::optional<double>> pinned;
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return variables.size(); }

    std::size_t add(VariableKind kind, std::size_t element,
                    double lo = -std::numeric_limits<double>::infinity(),
                    double hi = std::numeric_limits<double>::infinity()) {
        variables.push_back({kind, element});
        pinned.emplace_back();
        lower.push_back(lo);
        upper.push_back(hi);
        return variables.size() - 1;
    }
    void pin(std::size_t var, double value) { pinned[var] = value; }
    std::size_t pinned_count() const {
        std::size_t n = 0;
        for (auto const& p : pinned) n += p.has_value();
        return n;
    }
};

struct AffineExpr {
    std::vector<std::pair<std::size_t, double>> terms;
    double constant = 0.0;

    void add(std::size_t var, double coefficient) {
        if (coefficient != 0.0) terms.emplace_back(var, coefficient);
    }
    double evaluate(std::span<double const> x) const {
        double value = constant;
        for (auto const& [var, c] : terms) value += c * x[var];
        return value;
    }
    AffineExpr negated() const {
        AffineExpr out = *this;
        for (auto& term : out.terms) term.second = -term.second;
        out.constant = -out.constant;
        return out;
    }
};

struct LinearFlowModel {
    int method = 1;
    TapModel tap_model = TapModel::ScaleAdmittance;
    VariableSpace space;
    /// Per branch, active flow leaving the from (resp. to) bus. For Method 5 these are the
    /// numerators; the flow is the numerator divided by (1 - U) of the sending bus.
    std::vector<AffineExpr> flow_from;
    std::vector<AffineExpr> flow_to;
    /// Per bus, nodal active balance written as expr == 0.
    std::vector<AffineExpr> balance;
    std::vector<std::size_t> angle_var;    // per bus: Angle, or ModifiedAngle for Method 3
    std::vector<std::size_t> voltage_var;  // per bus; unused for Method 1
    std::vector<std::size_t> generator_var;
    std::vector<std::size_t> branch_from, branch_to;  // bus positions

    std::size_t bus_count() const { return angle_var.size(); }
    bool has_voltage() const { return method != 1; }
};

namespace detail {

struct BranchCoefficients {
    double g = 0.0;
    double b = 0.0;
    double inv_x = 0.0;  // 1 / (x * tap)
    double shift = 0.0;
};

inline BranchCoefficients branch_coefficients(Branch const& br, TapModel tap_model) {
    auto const [g, b] = derive_series_admittance(br);
    if (br.x == 0.0) throw ZeroImpedance("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus));
    double const tap = tap_model == TapModel::ScaleAdmittance ? br.tap : 1.0;
    double const shift = tap_model == TapModel::ScaleAdmittance ? br.shift : 0.0;
    return {g / tap, b / tap, 1.0 / (br.x * tap), shift};
}

inline double slack_voltage(Network const& net, std::size_t slack) {
    for (auto const& gen : net.generators)
        if (gen.bus == net.buses[slack].id) return gen.v_set;
    return net.buses[slack].v_mag;
}

/// Shared skeleton: declares variables in the order angle-like, voltage-like, generator outputs.
inline LinearFlowModel skeleton(Network const& net, int method, TapModel tap_model) {
    LinearFlowModel model;
    model.method = method;
    model.tap_model = tap_model;
    std::size_t const n = net.bus_count();
    std::size_t const slack = slack_position(net);
    VariableKind const angle_kind = method == 3 ? VariableKind::ModifiedAngle : VariableKind::Angle;
    for (std::size_t i = 0; i < n; ++i) {
        model.angle_var.push_back(model.space.add(angle_kind, i));
        if (i == slack) model.space.pin(model.angle_var.back(), 0.0);
    }
    if (method != 1) {
        for (std::size_t i = 0; i < n; ++i) {
            auto const& bus = net.buses[i];
            switch (method) {
                case 2:
                    model.voltage_var.push_back(model.space.add(VariableKind::Voltage, i, bus.v_min, bus.v_max));
                    break;
                case 3:
                case 4:
                    model.voltage_var.push_back(model.space.add(VariableKind::SquaredVoltage, i,
                                                                bus.v_min * bus.v_min,
                                                                bus.v_max * bus.v_max));
                    break;
                default:
                    model.voltage_var.push_back(model.space.add(VariableKind::LogVoltage, i,
                                                                std::log(bus.v_min), std::log(bus.v_max)));
            }
        }
    }
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        auto const& gen = net.generators[k];
        model.generator_var.push_back(model.space.add(VariableKind::GeneratorOutput, k, gen.p_min, gen.p_max));
    }
    BusIndex const index(net);
    for (auto const& br : net.branches) {
        model.branch_from.push_back(index.at(br.from_bus));
        model.branch_to.push_back(index.at(br.to_bus));
    }
    return model;
}

/// Balance rows for the lossless models: sum Pg - load - sum outgoing flow = 0.
inline void lossless_balance(Network const& net, LinearFlowModel& model) {
    BusIndex const index(net);
    model.balance.assign(net.bus_count(), AffineExpr{});
    for (std::size_t i = 0; i < net.bus_count(); ++i) model.balance[i].constant = -net.buses[i].p_load;
    for (std::size_t k = 0; k < net.generator_count(); ++k)
        model.balance[index.at(net.generators[k].bus)].add(model.generator_var[k], 1.0);
    for (std::size_t k = 0; k < model.flow_from.size(); ++k) {
        auto append = [](AffineExpr& row, AffineExpr const& flow) {
            for (auto const& [var, c] : flow.terms) row.add(var, -c);
            row.constant -= flow.constant;
        };
        append(model.balance[model.branch_from[k]], model.flow_from[k]);
        append(model.balance[model.branch_to[k]], model.flow_to[k]);
    }
}

}  // namespace detail

inline LinearFlowModel build_method1(Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    auto model = detail::skeleton(net, 1, tap_model);
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        auto const c = detail::branch_coefficients(net.branches[k], tap_model);
        AffineExpr flow;
        flow.add(model.angle_var[model.branch_from[k]], c.inv_x);
        flow.add(model.angle_var[model.branch_to[k]], -c.inv_x);
        flow.constant = -c.inv_x * c.shift;
        model.flow_to.push_back(flow.negated());
        model.flow_from.push_back(std::move(flow));
    }
    detail::lossless_balance(net, model);
    return model;
}

inline LinearFlowModel build_method2(Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    auto model = detail::skeleton(net, 2, tap_model);
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        auto const c = detail::branch_coefficients(net.branches[k], tap_model);
        std::size_t const i = model.branch_from[k], j = model.branch_to[k];
        AffineExpr flow;
        flow.add(model.voltage_var[i], c.g);
        flow.add(model.voltage_var[j], -c.g);
        flow.add(model.angle_var[i], -c.b);
        flow.add(model.angle_var[j], c.b);
        flow.constant = c.b * c.shift;
        model.flow_to.push_back(flow.negated());
        model.flow_from.push_back(std::move(flow));
    }
    detail::lossless_balance(net, model);
    return model;
}

inline LinearFlowModel build_method3(Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    constexpr double kAdjust = 0.95;
    auto model = detail::skeleton(net, 3, tap_model);
    std::size_t const slack = slack_position(net);
    double const v_slack = detail::slack_voltage(net, slack);
    model.space.pin(model.voltage_var[slack], v_slack * v_slack);
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        auto const c = detail::branch_coefficients(net.branches[k], tap_model);
        std::size_t const i = model.branch_from[k], j = model.branch_to[k];
        AffineExpr flow;
        flow.add(model.voltage_var[i], kAdjust * c.g);
        flow.add(model.voltage_var[j], -kAdjust * c.g);
        flow.add(model.angle_var[i], -kAdjust * c.b);
        flow.add(model.angle_var[j], kAdjust * c.b);
        flow.constant = kAdjust * c.b * c.shift;
        model.flow_to.push_back(flow.negated());
        model.flow_from.push_back(std::move(flow));
    }
    detail::lossless_balance(net, model);
    return model;
}

inline LinearFlowModel build_method4(Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    auto model = detail::skeleton(net, 4, tap_model);
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        auto const c = detail::branch_coefficients(net.branches[k], tap_model);
        std::size_t const i = model.branch_from[k], j = model.branch_to[k];
        AffineExpr flow;
        flow.add(model.voltage_var[i], c.g / 2.0);
        flow.add(model.voltage_var[j], -c.g / 2.0);
        flow.add(model.angle_var[i], -c.b);
        flow.add(model.angle_var[j], c.b);
        flow.constant = c.b * c.shift;
        model.flow_to.push_back(flow.negated());
        model.flow_from.push_back(std::move(flow));
    }
    detail::lossless_balance(net, model);
    return model;
}

/// Method 5. U is pinned to ln(v_set) at every bus with a generator, which keeps each nodal
/// balance (sum Pg - load)(1 - U_i) = sum_j [g (U_i - U_j) - b (th_i - th_j)] linear.
inline LinearFlowModel build_method5(Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    auto model = detail::skeleton(net, 5, tap_model);
    BusIndex const index(net);
    std::vector<std::optional<double>> bus_setpoint(net.bus_count());
    for (auto const& gen : net.generators) {
        auto& sp = bus_setpoint[index.at(gen.bus)];
        if (!sp) sp = gen.v_set;
    }
    std::size_t const slack = slack_position(net);
    if (!bus_setpoint[slack]) bus_setpoint[slack] = net.buses[slack].v_mag;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        if (!bus_setpoint[i]) continue;
        if (!(*bus_setpoint[i] > 0.0) || std::log(*bus_setpoint[i]) >= 1.0)
            throw RecoveryDomain("voltage setpoint outside (0, e) at bus " + std::to_string(net.buses[i].id));
        model.space.pin(model.voltage_var[i], std::log(*bus_setpoint[i]));
    }

    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        auto const c = detail::branch_coefficients(net.branches[k], tap_model);
        std::size_t const i = model.branch_from[k], j = model.branch_to[k];
        AffineExpr numerator;
        numerator.add(model.voltage_var[i], c.g);
        numerator.add(model.voltage_var[j], -c.g);
        numerator.add(model.angle_var[i], -c.b);
        numerator.add(model.angle_var[j], c.b);
        numerator.constant = c.b * c.shift;
        model.flow_to.push_back(numerator.negated());
        model.flow_from.push_back(std::move(numerator));
    }

    model.balance.assign(net.bus_count(), AffineExpr{});
    for (std::size_t k = 0; k < model.flow_from.size(); ++k) {
        auto append = [](AffineExpr& row, AffineExpr const& flow) {
            for (auto const& [var, coeff] : flow.terms) row.add(var, coeff);
            row.constant += flow.constant;
        };
        append(model.balance[model.branch_from[k]], model.flow_from[k]);
        append(model.balance[model.branch_to[k]], model.flow_to[k]);
    }
    std::vector<bool> has_gen(net.bus_count(), false);
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        std::size_t const i = index.at(net.generators[k].bus);
        has_gen[i] = true;
        double const scale = 1.0 - *model.space.pinned[model.voltage_var[i]];
        model.balance[i].add(model.generator_var[k], -scale);
    }
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        double const load = net.buses[i].p_load;
        auto const& pin = model.space.pinned[model.voltage_var[i]];
        if (pin) {
            model.balance[i].constant += load * (1.0 - *pin);
        } else {
            // Load-only bus: + load (1 - U_i)
            model.balance[i].constant += load;
            model.balance[i].add(model.voltage_var[i], -load);
        }
    }
    return model;
}

inline LinearFlowModel build_method(int method, Network const& net, TapModel tap_model = TapModel::ScaleAdmittance) {
    switch (method) {
        case 1: return build_method1(net, tap_model);
        case 2: return build_method2(net, tap_model);
        case 3: return build_method3(net, tap_model);
        case 4: return build_method4(net, tap_model);
        case 5: return build_method5(net, tap_model);
        default: throw InconsistentModel("no linear model for method " + std::to_string(method));
    }
}

/// Maps a bus state (V, theta) into the model's variable space. Generator entries are zero.
inline std::vector<double> forward_transform(LinearFlowModel const& model, std::span<double const> v_mag,
                                             std::span<double const> v_ang) {
    std::vector<double> x(model.space.size(), 0.0);
    for (std::size_t i = 0; i < model.bus_count(); ++i) {
        double const v = v_mag[i], th = v_ang[i];
        switch (model.method) {
            case 1:
                x[model.angle_var[i]] = th;
                break;
            case 2:
                x[model.angle_var[i]] = th;
                x[model.voltage_var[i]] = v;
                break;
            case 3:
                x[model.angle_var[i]] = th * v * v;
                x[model.voltage_var[i]] = v * v;
                break;
            case 4:
                x[model.angle_var[i]] = th;
                x[model.voltage_var[i]] = v * v;
                break;
            default: {
                if (!(v > 0.0)) throw RecoveryDomain("non-positive voltage magnitude");
                double const u = std::log(v);
                if (u >= 1.0) throw RecoveryDomain("log voltage at or above 1");
                x[model.angle_var[i]] = th;
                x[model.voltage_var[i]] = u;
            }
        }
    }
    return x;
}

struct BusState {
    std::vector<double> v_mag;
    std::vector<double> v_ang;
};

/// Recovers (V, theta) from a full variable vector.
inline BusState recover_state(LinearFlowModel const& model, std::span<double const> x) {
    BusState state;
    std::size_t const n = model.bus_count();
    state.v_mag.resize(n);
    state.v_ang.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double const a = x[model.angle_var[i]];
        switch (model.method) {
            case 1:
                state.v_mag[i] = 1.0;
                state.v_ang[i] = a;
                break;
            case 2:
                state.v_mag[i] = x[model.voltage_var[i]];
                state.v_ang[i] = a;
                break;
            case 3: {
                double const w = x[model.voltage_var[i]];
                if (!(w > 0.0)) throw RecoveryDomain("squared voltage must be positive");
                state.v_mag[i] = std::sqrt(w);
                state.v_ang[i] = a / w;
                break;
            }
            case 4: {
                double const w = x[model.voltage_var[i]];
                if (!(w > 0.0)) throw RecoveryDomain("squared voltage must be positive");
                state.v_mag[i] = std::sqrt(w);
                state.v_ang[i] = a;
                break;
            }
            default: {
                double const u = x[model.voltage_var[i]];
                if (u >= 1.0) throw RecoveryDomain("log voltage at or above 1");
                state.v_mag[i] = std::exp(u);
                state.v_ang[i] = a;
            }
        }
    }
    return state;
}

/// From-side (or to-side) branch flows at a variable vector, including the Method-5 division.
inline std::vector<double> branch_flows(LinearFlowModel const& model, std::span<double const> x,
                                        bool to_side = false) {
    auto const& exprs = to_side ? model.flow_to : model.flow_from;
    auto const& sender = to_side ? model.branch_to : model.branch_from;
    std::vector<double> flows(exprs.size());
    for (std::size_t k = 0; k < exprs.size(); ++k) {
        double value = exprs[k].evaluate(x);
        if (model.method == 5) {
            double const u = x[model.voltage_var[sender[k]]];
            if (u >= 1.0) throw RecoveryDomain("log voltage at or above 1");
            value /= 1.0 - u;
        }
        flows[k] = value;
    }
    return flows;
}

inline std::vector<double> evaluate_flow(LinearFlowModel const& model, std::span<double const> v_mag,
                                         std::span<double const> v_ang, bool to_side = false) {
    auto const x = forward_transform(model, v_mag, v_ang);
    return branch_flows(model, x, to_side);
}

}  // namespace powerlin
