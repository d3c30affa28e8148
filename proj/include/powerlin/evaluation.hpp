#pragma once

// Accuracy, optimality, feasibility and speed metrics against a reference operating point,
// plus the 1-100 log-scale scoring used to compare methods.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "powerlin/ac_engine.hpp"
#include "powerlin/baseline.hpp"
#include "powerlin/errors.hpp"
#include "powerlin/linear_methods.hpp"
#include "powerlin/network.hpp"
#include "powerlin/opf.hpp"

namespace powerlin {

/// Guard added to reference values that may be zero.
inline constexpr double kRelativeGuard = 1e-7;

/// How per-branch squared relative errors are combined into the accuracy metric.
/// Rms takes the square root of the mean; MeanSquare reports the mean itself.
enum class ErrorReduction { Rms, MeanSquare };

inline double relative_deviation(double value, double reference) {
    return (value - reference - kRelativeGuard) / (reference + kRelativeGuard);
}

inline double approx_error(std::span<double const> predicted, std::span<double const> reference,
                           ErrorReduction reduction = ErrorReduction::Rms) {
    if (predicted.size() != reference.size()) throw InconsistentModel("flow vectors differ in length");
    if (predicted.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < predicted.size(); ++k) {
        double const e = relative_deviation(predicted[k], reference[k]);
        sum += e * e;
    }
    double const mean = sum / static_cast<double>(predicted.size());
    return reduction == ErrorReduction::Rms ? std::sqrt(mean) : mean;
}

/// Linearized from-side flows at the reference state against the reference flows.
inline double approx_error(LinearFlowModel const& model, BaselineSolution const& base,
                           ErrorReduction reduction = ErrorReduction::Rms) {
    auto const flows = evaluate_flow(model, base.v_mag, base.v_ang);
    return approx_error(flows, base.branch_flow, reduction);
}

/// AC power flow with every non-slack generator held at `dispatch`.
inline ac::SteadyState validate_dispatch(Network const& net, std::span<double const> dispatch,
                                         std::span<double const> v_setpoints,
                                         ac::PowerFlowOptions const& options = {}) {
    return ac::solve_power_flow(net, dispatch, v_setpoints, options);
}

/// Operating cost (currency per hour) of a per-unit dispatch.
inline double dispatch_cost(Network const& net, std::span<double const> dispatch) {
    double f = 0.0;
    for (std::size_t k = 0; k < net.generator_count(); ++k)
        f += net.generators[k].cost.evaluate_mw(dispatch[k] * net.base_mva);
    return f;
}

struct OptimalityErrors {
    double objective = 0.0;  // f of the validated dispatch
    double eps_f = 0.0;
    double eps_pg = 0.0;
    double eps_v = 0.0;
};

inline double rms_relative(std::span<double const> value, std::span<double const> reference, double guard) {
    if (value.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
        double const e = (value[i] - reference[i] - guard) / (reference[i] + guard);
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(value.size()));
}

inline OptimalityErrors optimality_errors(ac::SteadyState const& state, Network const& net,
                                          BaselineSolution const& base) {
    OptimalityErrors out;
    out.objective = dispatch_cost(net, state.dispatch);
    double const ref = base.objective + kRelativeGuard;
    out.eps_f = std::abs(out.objective - ref) / ref;
    out.eps_pg = rms_relative(state.dispatch, base.pg, kRelativeGuard);
    out.eps_v = rms_relative(state.v_mag, base.v_mag, 0.0);
    return out;
}

struct FeasibilityReport {
    int n_out = 0;
    int n_above = 0;
    int n_below = 0;
    double out_ratio = 0.0;
    double eps_v_out = 0.0;
};

/// Buses strictly outside [v_min, v_max], and the RMS relative voltage error at those buses.
inline FeasibilityReport feasibility_check(std::span<double const> v_mag, Network const& net,
                                           BaselineSolution const& base) {
    FeasibilityReport out;
    double sum = 0.0;
    for (std::size_t i = 0; i < net.bus_count(); ++i) {
        bool const above = v_mag[i] > net.buses[i].v_max;
        bool const below = v_mag[i] < net.buses[i].v_min;
        if (!above && !below) continue;
        out.n_above += above;
        out.n_below += below;
        double const e = (v_mag[i] - base.v_mag[i]) / base.v_mag[i];
        sum += e * e;
    }
    out.n_out = out.n_above + out.n_below;
    if (net.bus_count() > 0) out.out_ratio = static_cast<double>(out.n_out) / static_cast<double>(net.bus_count());
    if (out.n_out > 0) out.eps_v_out = std::sqrt(sum / out.n_out);
    return out;
}

inline FeasibilityReport feasibility_check(ac::SteadyState const& state, Network const& net,
                                           BaselineSolution const& base) {
    return feasibility_check(state.v_mag, net, base);
}

/// Wall-clock seconds for `repetitions` full runs (model build and solve). One untimed warm-up
/// run must reach Optimal first.
inline double time_method(int method, Network const& net, int repetitions = 100,
                          LossIterationOptions const& options = {}) {
    if (repetitions <= 0) return 0.0;
    auto const warm = run_any_method(method, net, options);
    if (!warm.optimal())
        throw SolveFailed("method " + std::to_string(method) + " did not reach an optimal solution");
    auto const start = std::chrono::steady_clock::now();
    for (int r = 0; r < repetitions; ++r) {
        auto const sol = run_any_method(method, net, options);
        if (!sol.optimal()) throw SolveFailed("method " + std::to_string(method) + " failed while timing");
    }
    std::chrono::duration<double> const elapsed = std::chrono::steady_clock::now() - start;
    return elapsed.count();
}

struct MetricsReport {
    int method = 0;
    std::string case_name;
    double approx_error = 0.0;
    double eps_f = 0.0;
    double eps_pg = 0.0;
    double eps_v = 0.0;
    int n_out = 0;
    int n_above = 0;
    int n_below = 0;
    double out_ratio = 0.0;
    double eps_v_out = 0.0;
    double wall_time_s = 0.0;
    double objective = 0.0;
    std::string status = "Optimal";
    bool failed = false;
    std::string error;
};

// ---- scoring ----

enum class ScoreAxis { Accuracy, Optimality, Feasibility, Speed };
inline constexpr std::array<ScoreAxis, 4> kScoreAxes = {ScoreAxis::Accuracy, ScoreAxis::Optimality,
                                                       ScoreAxis::Feasibility, ScoreAxis::Speed};

inline char const* to_string(ScoreAxis a) {
    switch (a) {
        case ScoreAxis::Accuracy: return "accuracy";
        case ScoreAxis::Optimality: return "optimality";
        case ScoreAxis::Feasibility: return "feasibility";
        case ScoreAxis::Speed: return "speed";
    }
    return "?";
}

/// Maps positive "smaller is better" values to 1..100 via log(1/v) and a linear rescale.
/// When every value is equal all scores are 100.
inline std::vector<double> score_axis(std::span<double const> values) {
    std::vector<double> s;
    s.reserve(values.size());
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) throw NonPositiveAggregate("score inputs must be positive and finite");
        s.push_back(-std::log(v));
    }
    if (s.empty()) return s;
    auto const [lo, hi] = std::minmax_element(s.begin(), s.end());
    double const min = *lo, span = *hi - *lo;
    for (double& x : s) x = span > 0.0 ? 1.0 + 99.0 * (x - min) / span : 100.0;
    return s;
}

using AxisValues = std::array<double, 4>;

/// Scores every method on each axis. Input rows are per method, columns follow kScoreAxes.
inline std::vector<AxisValues> score_methods(std::span<AxisValues const> aggregates) {
    std::vector<AxisValues> out(aggregates.size());
    for (std::size_t a = 0; a < 4; ++a) {
        std::vector<double> column;
        for (auto const& row : aggregates) column.push_back(row[a]);
        auto const scored = score_axis(column);
        for (std::size_t m = 0; m < out.size(); ++m) out[m][a] = scored[m];
    }
    return out;
}

/// Area of the quadrilateral whose vertices sit at the given distances on four orthogonal spokes.
inline double radar_area(AxisValues const& scores) {
    double area = 0.0;
    for (std::size_t a = 0; a < 4; ++a) area += scores[a] * scores[(a + 1) % 4];
    return 0.5 * area;
}

/// Vertex coordinates of the radar polygon, spokes at 90 degree steps starting straight up.
inline std::array<std::array<double, 2>, 4> radar_vertices(AxisValues const& scores) {
    std::array<std::array<double, 2>, 4> v{};
    for (std::size_t a = 0; a < 4; ++a) {
        double const angle = std::numbers::pi / 2.0 - static_cast<double>(a) * std::numbers::pi / 2.0;
        v[a] = {scores[a] * std::cos(angle), scores[a] * std::sin(angle)};
    }
    return v;
}

}  // namespace powerlin
