#pragma once

// Active-power OPF over a linear flow model, and the loss-feedback loop built on the DC model.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "powerlin/errors.hpp"
#include "powerlin/linear_methods.hpp"
#include "powerlin/network.hpp"
#include "powerlin/qp.hpp"

namespace powerlin {

struct OpfProblem {
    LinearFlowModel model;
    /// One QP variable per model variable; pinned variables have equal bounds.
    qp::QuadraticProgram qp;

    std::size_t equality_count() const { return qp.equality_count(); }
    std::size_t pinned_count() const { return model.space.pinned_count(); }
    std::size_t free_count() const { return model.space.size() - pinned_count(); }
    /// Variables with at least one finite bound that are not pinned.
    std::size_t box_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < qp.variable_count(); ++i)
            if (!model.space.pinned[i] && (std::isfinite(qp.lower[i]) || std::isfinite(qp.upper[i]))) ++n;
        return n;
    }
};

/// Builds the QP. `extra_loads` (per bus, per-unit) are added to the nodal demand.
inline OpfProblem assemble_opf(LinearFlowModel model, Network const& net,
                               std::span<double const> extra_loads = {}) {
    if (model.bus_count() != net.bus_count() || model.generator_var.size() != net.generator_count() ||
        model.balance.size() != net.bus_count())
        throw InconsistentModel("model and network sizes differ");
    if (!extra_loads.empty() && extra_loads.size() != net.bus_count())
        throw InconsistentModel("extra load vector must have one entry per bus");

    OpfProblem problem;
    auto& qp = problem.qp;
    std::size_t const n = model.space.size();
    qp.hessian.assign(n, 0.0);
    qp.linear.assign(n, 0.0);
    qp.lower = model.space.lower;
    qp.upper = model.space.upper;
    for (std::size_t v = 0; v < n; ++v)
        if (auto const& pin = model.space.pinned[v]) qp.lower[v] = qp.upper[v] = *pin;

    double const base = net.base_mva;
    for (std::size_t k = 0; k < net.generator_count(); ++k) {
        auto const& cost = net.generators[k].cost;
        if (!cost.is_convex_quadratic())
            throw NonConvex("generator " + std::to_string(k + 1) + " cost is not a convex quadratic");
        std::size_t const v = model.generator_var[k];
        qp.hessian[v] = 2.0 * cost.coefficient(2) * base * base;
        qp.linear[v] = cost.coefficient(1) * base;
        qp.constant += cost.coefficient(0);
    }

    std::vector<Eigen::Triplet<double>> triplets;
    qp.b_eq.resize(net.bus_count());
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        auto row = model.balance[i];
        double const extra = extra_loads.empty() ? 0.0 : extra_loads[i];
        if (extra != 0.0) {
            if (model.method == 5) {
                auto const& pin = model.space.pinned[model.voltage_var[i]];
                if (pin) {
                    row.constant += extra * (1.0 - *pin);
                } else {
                    row.constant += extra;
                    row.add(model.voltage_var[i], -extra);
                }
            } else {
                row.constant -= extra;
            }
        }
        for (auto const& [var, c] : row.terms) {
            if (var >= n) throw InconsistentModel("balance row references an undeclared variable");
            triplets.emplace_back(static_cast<int>(i), static_cast<int>(var), c);
        }
        qp.b_eq[i] = -row.constant;
    }
    qp.a_eq.resize(static_cast<Eigen::Index>(net.bus_count()), static_cast<Eigen::Index>(n));
    qp.a_eq.setFromTriplets(triplets.begin(), triplets.end());
    qp.a_eq.makeCompressed();
    problem.model = std::move(model);
    return problem;
}

struct OpfSolution {
    int method = 1;
    qp::Status status = qp::Status::IterLimit;
    std::vector<double> pg;  // per-unit, per generator
    std::vector<double> x;
    BusState state;
    std::vector<double> branch_flow;  // per-unit, from side, as given by the linear model
    double objective = 0.0;           // currency per hour
    qp::KktResiduals residuals;
    int iterations = 0;
    double infeasibility = 0.0;

    bool optimal() const { return status == qp::Status::Optimal; }
};

struct OpfOptions {
    TapModel tap_model = TapModel::ScaleAdmittance;
    qp::QpOptions solver;
};

inline OpfSolution solve_opf(OpfProblem const& problem, qp::QpOptions const& options = {}) {
    auto const result = qp::solve(problem.qp, options);
    OpfSolution sol;
    sol.method = problem.model.method;
    sol.status = result.status;
    sol.iterations = result.iterations;
    sol.infeasibility = result.infeasibility;
    if (result.status != qp::Status::Optimal) return sol;
    sol.x = result.x;
    sol.objective = result.objective;
    sol.residuals = result.residuals;
    for (auto v : problem.model.generator_var) sol.pg.push_back(result.x[v]);
    sol.state = recover_state(problem.model, sol.x);
    sol.branch_flow = branch_flows(problem.model, sol.x);
    return sol;
}

inline OpfSolution run_method(int method, Network const& net, OpfOptions const& options = {},
                              std::span<double const> extra_loads = {}) {
    return solve_opf(assemble_opf(build_method(method, net, options.tap_model), net, extra_loads),
                     options.solver);
}

// ---- loss feedback ----

/// g (th_i - th_j - shift)^2 per branch, from the previous solution's angles.
inline std::vector<double> estimate_loss_m6(OpfSolution const& prev, Network const& net) {
    BusIndex const index(net);
    std::vector<double> loss;
    loss.reserve(net.branch_count());
    for (auto const& br : net.branches) {
        double const g = derive_series_admittance(br).g;
        double const d = prev.state.v_ang[index.at(br.from_bus)] - prev.state.v_ang[index.at(br.to_bus)] - br.shift;
        loss.push_back(g * d * d);
    }
    return loss;
}

/// (alpha P)^2 r per branch, from the previous solution's linear flows. Empty alpha means 1.
inline std::vector<double> estimate_loss_m7(OpfSolution const& prev, Network const& net,
                                            std::span<double const> alpha = {}) {
    if (!alpha.empty() && alpha.size() != net.branch_count())
        throw InconsistentModel("alpha must have one entry per branch");
    std::vector<double> loss;
    loss.reserve(net.branch_count());
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        double const s = (alpha.empty() ? 1.0 : alpha[k]) * prev.branch_flow[k];
        loss.push_back(s * s * net.branches[k].r);
    }
    return loss;
}

enum class LossSplit { Half, From, To };

inline std::optional<LossSplit> parse_loss_split(std::string const& s) {
    if (s == "half") return LossSplit::Half;
    if (s == "from") return LossSplit::From;
    if (s == "to") return LossSplit::To;
    return std::nullopt;
}

inline std::vector<double> allocate_losses(Network const& net, std::span<double const> loss, LossSplit split) {
    BusIndex const index(net);
    std::vector<double> extra(net.bus_count(), 0.0);
    double const share_from = split == LossSplit::Half ? 0.5 : split == LossSplit::From ? 1.0 : 0.0;
    for (std::size_t k = 0; k < net.branch_count(); ++k) {
        extra[index.at(net.branches[k].from_bus)] += share_from * loss[k];
        extra[index.at(net.branches[k].to_bus)] += (1.0 - share_from) * loss[k];
    }
    return extra;
}

struct LossIterationStep {
    std::vector<double> extra_loads;  // applied in this solve, per bus
    std::vector<double> dispatch;
    std::vector<double> branch_loss;  // estimated from this solve, feeds the next one
    double objective = 0.0;

    double total_loss() const {
        double s = 0.0;
        for (double l : branch_loss) s += l;
        return s;
    }
    double total_extra_load() const {
        double s = 0.0;
        for (double l : extra_loads) s += l;
        return s;
    }
};

struct LossIterationTrace {
    std::vector<LossIterationStep> steps;
    std::size_t iteration_count() const { return steps.size(); }
};

struct LossIterationOptions {
    int iterations = 4;
    LossSplit split = LossSplit::Half;
    std::vector<double> alpha;  // Method 7; empty means 1 on every branch
    /// Optional early stop on the change in total loss; zero runs every iteration.
    double tolerance = 0.0;
    OpfOptions opf;
};

struct LossIterationResult {
    OpfSolution solution;
    LossIterationTrace trace;
};

/// Iteration 1 is the plain DC OPF; each later iteration re-solves with the previous
/// iteration's estimated branch losses added as bus loads.
inline LossIterationResult run_loss_iteration(int method, Network const& net,
                                              LossIterationOptions const& options = {}) {
    if (method != 6 && method != 7) throw InconsistentModel("loss iteration applies to methods 6 and 7");
    if (options.iterations < 1) throw InconsistentModel("iteration count must be at least 1");
    auto const model = build_method1(net, options.opf.tap_model);
    LossIterationResult out;
    std::vector<double> extra(net.bus_count(), 0.0);
    for (int it = 0; it < options.iterations; ++it) {
        auto sol = solve_opf(assemble_opf(model, net, extra), options.opf.solver);
        sol.method = method;
        LossIterationStep step;
        step.extra_loads = extra;
        if (!sol.optimal()) {
            out.trace.steps.push_back(std::move(step));
            out.solution = std::move(sol);
            return out;
        }
        step.dispatch = sol.pg;
        step.objective = sol.objective;
        step.branch_loss = method == 6 ? estimate_loss_m6(sol, net) : estimate_loss_m7(sol, net, options.alpha);
        bool const settled = options.tolerance > 0.0 && !out.trace.steps.empty() &&
                             std::abs(step.total_loss() - out.trace.steps.back().total_loss()) <= options.tolerance;
        extra = allocate_losses(net, step.branch_loss, options.split);
        out.trace.steps.push_back(std::move(step));
        out.solution = std::move(sol);
        if (settled) break;
    }
    return out;
}

/// Methods 1-5 through the linear OPF, 6-7 through the loss loop.
inline OpfSolution run_any_method(int method, Network const& net, LossIterationOptions const& options = {}) {
    if (method == 6 || method == 7) return run_loss_iteration(method, net, options).solution;
    return run_method(method, net, options.opf);
}

}  // namespace powerlin
