#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "powerlin/errors.hpp"
#include "powerlin/network.hpp"

namespace powerlin::ac {

using Complex = std::complex<double>;

/// Active flow leaving bus i on a plain line, polar form.
inline double exact_branch_flow(double g, double b, double v_i, double v_j, double th_i,
                                double th_j) {
    double const d = th_i - th_j;
    return g * (v_i * v_i - v_i * v_j * std::cos(d)) - b * v_i * v_j * std::sin(d);
}

inline double exact_branch_loss(double g, double v_i, double v_j, double th_i, double th_j) {
    return g * (v_i * v_i + v_j * v_j - 2.0 * v_i * v_j * std::cos(th_i - th_j));
}

struct AdmittanceMatrix {
    Eigen::SparseMatrix<Complex> y_bus;
    // Two-port entries of every branch, in Network::branches order.
    std::vector<Complex> y_ff, y_ft, y_tf, y_tt;
    std::vector<std::size_t> from, to;

    std::size_t dimension() const { return static_cast<std::size_t>(y_bus.rows()); }
};

/// Pi-model nodal admittance: tap ratio and phase shift sit on the from side, bus shunts on the diagonal.
inline AdmittanceMatrix build_admittance(Network const& net) {
    BusIndex const index(net);
    std::size_t const n = net.bus_count();
    AdmittanceMatrix adm;
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(4 * net.branch_count() + n);
    for (auto const& br : net.branches) {
        if (!br.status) continue;
        auto const [g, b] = derive_series_admittance(br);
        Complex const ys(g, b);
        Complex const charging(0.0, br.b_charge / 2.0);
        Complex const tap = std::polar(br.tap, br.shift);
        Complex const ytt = ys + charging;
        Complex const yff = ytt / (br.tap * br.tap);
        Complex const yft = -ys / std::conj(tap);
        Complex const ytf = -ys / tap;
        std::size_t const f = index.at(br.from_bus);
        std::size_t const t = index.at(br.to_bus);
        adm.y_ff.push_back(yff);
        adm.y_ft.push_back(yft);
        adm.y_tf.push_back(ytf);
        adm.y_tt.push_back(ytt);
        adm.from.push_back(f);
        adm.to.push_back(t);
        triplets.emplace_back(f, f, yff);
        triplets.emplace_back(f, t, yft);
        triplets.emplace_back(t, f, ytf);
        triplets.emplace_back(t, t, ytt);
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto const& bus = net.buses[i];
        // Explicit zero keeps every diagonal in the pattern.
        triplets.emplace_back(i, i, Complex(bus.shunt_g, bus.shunt_b));
    }
    adm.y_bus.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    adm.y_bus.setFromTriplets(triplets.begin(), triplets.end());
    adm.y_bus.makeCompressed();
    return adm;
}

struct PowerFlowOptions {
    double tolerance = 1e-8;
    int max_iterations = 30;
    /// Initial bus state; flat start (V=1, theta=0, generator buses at setpoint) when empty.
    std::optional<std::vector<double>> initial_v_mag;
    std::optional<std::vector<double>> initial_v_ang;
};

struct SteadyState {
    std::vector<double> v_mag;
    std::vector<double> v_ang;
    std::vector<double> branch_flow_from;
    std::vector<double> branch_flow_to;
    std::vector<double> branch_loss;
    /// Active generation picked up at the slack bus.
    double slack_injection = 0.0;
    /// Per-generator active output after the slack has balanced the system.
    std::vector<double> dispatch;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::vector<double> mismatch_history;
};

namespace detail {

enum class Role { Slack, PV, PQ };

struct BusRoles {
    std::vector<Role> role;
    std::vector<std::size_t> pv, pq, pvpq;
    std::size_t slack = 0;
};

inline BusRoles classify(Network const& net, std::vector<bool> const& has_gen) {
    BusRoles roles;
    roles.role.resize(net.bus_count(), Role::PQ);
    bool found_slack = false;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        auto const kind = net.buses[i].kind;
        if (kind == BusKind::Slack) {
            if (found_slack) throw InvalidNetwork("multiple slack buses");
            roles.role[i] = Role::Slack;
            roles.slack = i;
            found_slack = true;
        } else if (kind == BusKind::PV && has_gen[i]) {
            roles.role[i] = Role::PV;
        }
    }
    if (!found_slack) throw InvalidNetwork("no slack bus");
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        if (roles.role[i] == Role::PV) roles.pv.push_back(i);
        if (roles.role[i] == Role::PQ) roles.pq.push_back(i);
        if (roles.role[i] != Role::Slack) roles.pvpq.push_back(i);
    }
    return roles;
}

inline std::vector<Complex> injections(AdmittanceMatrix const& adm, std::vector<Complex> const& v) {
    std::vector<Complex> s(v.size());
    auto const& y = adm.y_bus;
    std::vector<Complex> current(v.size(), Complex(0.0, 0.0));
    for (Eigen::Index col = 0; col < y.outerSize(); ++col)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(y, col); it; ++it)
            current[static_cast<std::size_t>(it.row())] += it.value() * v[static_cast<std::size_t>(col)];
    for (std::size_t i = 0; i < v.size(); ++i) s[i] = v[i] * std::conj(current[i]);
    return s;
}

}  // namespace detail

/// Newton-Raphson AC power flow in polar coordinates.
///
/// `dispatch` and `v_setpoints` are per generator. Non-slack generators inject their dispatch;
/// the slack bus absorbs the mismatch. Reactive and voltage limits are not enforced.
inline SteadyState solve_power_flow(Network const& net, std::span<double const> dispatch,
                                    std::span<double const> v_setpoints,
                                    PowerFlowOptions const& options = {}) {
    if (dispatch.size() != net.generator_count() || v_setpoints.size() != net.generator_count())
        throw InvalidNetwork("dispatch/setpoint vectors must have one entry per generator");
    BusIndex const index(net);
    std::size_t const n = net.bus_count();
    std::vector<bool> has_gen(n, false);
    std::vector<double> p_spec(n), q_spec(n), v_target(n, 1.0);
    std::vector<bool> target_set(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        p_spec[i] = -net.buses[i].p_load;
        q_spec[i] = -net.buses[i].q_load;
    }
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        std::size_t const i = index.at(net.generators[k].bus);
        has_gen[i] = true;
        if (!target_set[i]) {
            v_target[i] = v_setpoints[k];
            target_set[i] = true;
        }
    }
    auto const roles = detail::classify(net, has_gen);
    if (!target_set[roles.slack]) v_target[roles.slack] = net.buses[roles.slack].v_mag;
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        std::size_t const i = index.at(net.generators[k].bus);
        p_spec[i] += dispatch[k];
        if (roles.role[i] == detail::Role::PQ) q_spec[i] += net.generators[k].q_gen;
    }

    auto const adm = build_admittance(net);

    std::vector<double> vm(n, 1.0), va(n, 0.0);
    if (options.initial_v_mag) vm = *options.initial_v_mag;
    if (options.initial_v_ang) va = *options.initial_v_ang;
    for (std::size_t i = 0; i < n; ++i)
        if (roles.role[i] != detail::Role::PQ) vm[i] = v_target[i];
    va[roles.slack] = options.initial_v_ang ? (*options.initial_v_ang)[roles.slack] : 0.0;

    std::size_t const npvpq = roles.pvpq.size();
    std::size_t const npq = roles.pq.size();
    std::size_t const dim = npvpq + npq;
    std::vector<long> p_row(n, -1), q_row(n, -1);
    for (std::size_t k = 0; k < npvpq; ++k) p_row[roles.pvpq[k]] = static_cast<long>(k);
    for (std::size_t k = 0; k < npq; ++k) q_row[roles.pq[k]] = static_cast<long>(npvpq + k);

    auto voltages = [&] {
        std::vector<Complex> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
        return v;
    };
    auto mismatch = [&](std::vector<Complex> const& s, Eigen::VectorXd& f) {
        f.resize(static_cast<Eigen::Index>(dim));
        double worst = 0.0;
        for (std::size_t k = 0; k < npvpq; ++k) {
            std::size_t i = roles.pvpq[k];
            f[static_cast<Eigen::Index>(k)] = s[i].real() - p_spec[i];
            worst = std::max(worst, std::abs(f[static_cast<Eigen::Index>(k)]));
        }
        for (std::size_t k = 0; k < npq; ++k) {
            std::size_t i = roles.pq[k];
            f[static_cast<Eigen::Index>(npvpq + k)] = s[i].imag() - q_spec[i];
            worst = std::max(worst, std::abs(f[static_cast<Eigen::Index>(npvpq + k)]));
        }
        return worst;
    };

    SteadyState state;
    Eigen::VectorXd f;
    auto v = voltages();
    auto s = detail::injections(adm, v);
    double worst = mismatch(s, f);
    state.mismatch_history.push_back(worst);
    int iteration = 0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    bool analyzed = false;
    std::vector<Eigen::Triplet<double>> triplets;

    while (worst > options.tolerance) {
        if (iteration >= options.max_iterations) throw NonConvergence(iteration, worst);
        ++iteration;

        // Bus currents and the complex derivatives of S with respect to angle and magnitude.
        std::vector<Complex> current(n, Complex(0.0, 0.0));
        auto const& y = adm.y_bus;
        for (Eigen::Index col = 0; col < y.outerSize(); ++col)
            for (Eigen::SparseMatrix<Complex>::InnerIterator it(y, col); it; ++it)
                current[static_cast<std::size_t>(it.row())] +=
                    it.value() * v[static_cast<std::size_t>(col)];

        triplets.clear();
        auto put = [&](long row, long col, double value) {
            if (row >= 0 && col >= 0) triplets.emplace_back(row, col, value);
        };
        for (Eigen::Index col = 0; col < y.outerSize(); ++col) {
            std::size_t const k = static_cast<std::size_t>(col);
            Complex const unit_k = v[k] / vm[k];
            for (Eigen::SparseMatrix<Complex>::InnerIterator it(y, col); it; ++it) {
                std::size_t const i = static_cast<std::size_t>(it.row());
                Complex ds_dva, ds_dvm;
                if (i == k) {
                    ds_dva = Complex(0.0, 1.0) * v[i] * std::conj(current[i] - it.value() * v[i]);
                    ds_dvm = v[i] * std::conj(it.value() * unit_k) + std::conj(current[i]) * unit_k;
                } else {
                    ds_dva = Complex(0.0, -1.0) * v[i] * std::conj(it.value() * v[k]);
                    ds_dvm = v[i] * std::conj(it.value() * unit_k);
                }
                long const angle_col = p_row[k];
                long const mag_col = q_row[k];
                put(p_row[i], angle_col, ds_dva.real());
                put(p_row[i], mag_col, ds_dvm.real());
                put(q_row[i], angle_col, ds_dva.imag());
                put(q_row[i], mag_col, ds_dvm.imag());
            }
        }
        Eigen::SparseMatrix<double> jac(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        jac.setFromTriplets(triplets.begin(), triplets.end());
        jac.makeCompressed();
        if (!analyzed) {
            lu.analyzePattern(jac);
            analyzed = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) throw SingularJacobian(iteration);
        Eigen::VectorXd dx = lu.solve(-f);
        if (lu.info() != Eigen::Success || !dx.allFinite()) throw SingularJacobian(iteration);

        for (std::size_t k = 0; k < npvpq; ++k) va[roles.pvpq[k]] += dx[static_cast<Eigen::Index>(k)];
        for (std::size_t k = 0; k < npq; ++k)
            vm[roles.pq[k]] += dx[static_cast<Eigen::Index>(npvpq + k)];

        v = voltages();
        s = detail::injections(adm, v);
        worst = mismatch(s, f);
        state.mismatch_history.push_back(worst);
    }

    state.iterations = iteration;
    state.max_mismatch = worst;
    state.v_mag = vm;
    state.v_ang = va;

    std::size_t const nb = adm.from.size();
    state.branch_flow_from.resize(nb);
    state.branch_flow_to.resize(nb);
    state.branch_loss.resize(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        Complex const vf = v[adm.from[k]];
        Complex const vt = v[adm.to[k]];
        Complex const sf = vf * std::conj(adm.y_ff[k] * vf + adm.y_ft[k] * vt);
        Complex const st = vt * std::conj(adm.y_tf[k] * vf + adm.y_tt[k] * vt);
        state.branch_flow_from[k] = sf.real();
        state.branch_flow_to[k] = st.real();
        state.branch_loss[k] = sf.real() + st.real();
    }

    std::size_t const slack = roles.slack;
    state.slack_injection = s[slack].real() + net.buses[slack].p_load;
    state.dispatch.assign(dispatch.begin(), dispatch.end());
    std::vector<std::size_t> slack_gens;
    for (std::size_t k = 0; k < net.generator_count(); ++k)
        if (index.at(net.generators[k].bus) == slack) slack_gens.push_back(k);
    for (std::size_t k : slack_gens)
        state.dispatch[k] = state.slack_injection / static_cast<double>(slack_gens.size());
    return state;
}

/// Setpoints taken straight from the case file's generator table.
inline std::vector<double> case_setpoints(Network const& net) {
    std::vector<double> out;
    out.reserve(net.generator_count());
    for (auto const& gen : net.generators) out.push_back(gen.v_set);
    return out;
}

/// Generation minus load, branch losses and shunt consumption. Zero at an exact solution.
inline double power_balance_residual(Network const& net, SteadyState const& state) {
    double residual = 0.0;
    for (double p : state.dispatch) residual += p;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        residual -= net.buses[i].p_load;
        residual -= net.buses[i].shunt_g * state.v_mag[i] * state.v_mag[i];
    }
    for (double loss : state.branch_loss) residual -= loss;
    return residual;
}

}  // namespace powerlin::ac
