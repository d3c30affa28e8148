#pragma once

// Convex QP with a diagonal Hessian, linear equalities and variable bounds:
//
//     minimize    1/2 x' diag(h) x + c' x + c0
//     subject to  A x = b,   lower <= x <= upper
//
// solved by a Mehrotra predictor-corrector primal-dual interior point method on the sparse
// KKT system, followed by an active-set polish. Multiplier signs follow
//     h x + c - A' y - z_lower + z_upper = 0,   z_lower, z_upper >= 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "powerlin/errors.hpp"

namespace powerlin::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QuadraticProgram {
    std::vector<double> hessian;  // diagonal
    std::vector<double> linear;
    double constant = 0.0;
    Eigen::SparseMatrix<double> a_eq;  // m x n
    std::vector<double> b_eq;
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t variable_count() const { return linear.size(); }
    std::size_t equality_count() const { return b_eq.size(); }

    double objective(std::vector<double> const& x) const {
        double f = constant;
        for (std::size_t i = 0; i < x.size(); ++i) f += 0.5 * hessian[i] * x[i] * x[i] + linear[i] * x[i];
        return f;
    }
};

enum class Status { Optimal, Infeasible, IterLimit };

inline char const* to_string(Status s) {
    switch (s) {
        case Status::Optimal: return "Optimal";
        case Status::Infeasible: return "Infeasible";
        case Status::IterLimit: return "IterLimit";
    }
    return "?";
}

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double complementarity = 0.0;
    double dual_sign = 0.0;  // largest negative bound multiplier, as a positive number
};

struct QpSolution {
    Status status = Status::IterLimit;
    std::vector<double> x, y, z_lower, z_upper;
    double objective = 0.0;
    int iterations = 0;
    bool polished = false;
    KktResiduals residuals;
    /// For Infeasible: the smallest achievable L1 norm of A x - b within the bounds (> 0).
    double infeasibility = 0.0;
};

struct QpOptions {
    int max_iterations = 200;
    double tolerance = 1e-10;
    bool polish = true;
    bool detect_infeasibility = true;
};

/// Independent KKT check of a candidate primal-dual point, unscaled.
inline KktResiduals kkt_residuals(QuadraticProgram const& qp, std::vector<double> const& x,
                                  std::vector<double> const& y, std::vector<double> const& z_lower,
                                  std::vector<double> const& z_upper) {
    KktResiduals r;
    std::size_t const n = qp.variable_count();
    Eigen::Map<Eigen::VectorXd const> xv(x.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::VectorXd const> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    Eigen::VectorXd const aty = qp.a_eq.transpose() * yv;
    Eigen::VectorXd const ax = qp.a_eq * xv;
    for (std::size_t i = 0; i < n; ++i) {
        double const grad = qp.hessian[i] * x[i] + qp.linear[i] - aty[static_cast<Eigen::Index>(i)] -
                            z_lower[i] + z_upper[i];
        r.stationarity = std::max(r.stationarity, std::abs(grad));
        if (std::isfinite(qp.lower[i])) {
            r.primal = std::max(r.primal, qp.lower[i] - x[i]);
            r.complementarity = std::max(r.complementarity, std::abs(z_lower[i] * (x[i] - qp.lower[i])));
        } else {
            r.stationarity = std::max(r.stationarity, std::abs(z_lower[i]));
        }
        if (std::isfinite(qp.upper[i])) {
            r.primal = std::max(r.primal, x[i] - qp.upper[i]);
            r.complementarity = std::max(r.complementarity, std::abs(z_upper[i] * (qp.upper[i] - x[i])));
        } else {
            r.stationarity = std::max(r.stationarity, std::abs(z_upper[i]));
        }
        r.dual_sign = std::max({r.dual_sign, -z_lower[i], -z_upper[i]});
    }
    for (std::size_t j = 0; j < qp.equality_count(); ++j)
        r.primal = std::max(r.primal, std::abs(ax[static_cast<Eigen::Index>(j)] - qp.b_eq[j]));
    return r;
}

inline bool kkt_within(KktResiduals const& r, double stationarity = 1e-6, double primal = 1e-8,
                       double complementarity = 1e-6) {
    return r.stationarity <= stationarity && r.primal <= primal && r.complementarity <= complementarity &&
           r.dual_sign <= stationarity;
}

namespace detail {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Factorization of the regularized quasi-definite KKT matrix [[H + D, A'], [A, -reg]] with
/// iterative refinement against the unregularized matrix.
class KktSolver {
  public:
    KktSolver(SpMat const& a, double regularization) : a_(a), reg_(regularization) {
        n_ = a.cols();
        m_ = a.rows();
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(a.nonZeros() * 2 + n_ + m_));
        for (Eigen::Index i = 0; i < n_; ++i) t.emplace_back(i, i, 1.0);
        for (Eigen::Index j = 0; j < m_; ++j) t.emplace_back(n_ + j, n_ + j, -reg_);
        for (Eigen::Index col = 0; col < a.outerSize(); ++col)
            for (SpMat::InnerIterator it(a, col); it; ++it) {
                t.emplace_back(n_ + it.row(), col, it.value());
                t.emplace_back(col, n_ + it.row(), it.value());
            }
        k_.resize(n_ + m_, n_ + m_);
        k_.setFromTriplets(t.begin(), t.end());
        k_.makeCompressed();
        for (Eigen::Index i = 0; i < n_; ++i) diag_ptr_.push_back(&k_.coeffRef(i, i));
    }

    /// Sets the (1,1) block diagonal and factorizes. Returns false on numerical failure.
    bool factorize(Vec const& diag) {
        diag_ = diag;
        for (Eigen::Index i = 0; i < n_; ++i) *diag_ptr_[static_cast<std::size_t>(i)] = diag[i] + reg_;
        if (!analyzed_) {
            ldlt_.analyzePattern(k_);
            analyzed_ = true;
        }
        ldlt_.factorize(k_);
        use_lu_ = ldlt_.info() != Eigen::Success;
        if (use_lu_) {
            lu_.analyzePattern(k_);
            lu_.factorize(k_);
            if (lu_.info() != Eigen::Success) return false;
        }
        return true;
    }

    /// Solves [[diag, A'], [A, 0]] [dx; w] = rhs with refinement.
    Vec solve(Vec const& rhs, int refinements = 3) const {
        Vec sol = raw_solve(rhs);
        for (int it = 0; it < refinements; ++it) {
            Vec const res = rhs - apply(sol);
            if (res.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
            sol += raw_solve(res);
        }
        return sol;
    }

    Vec apply(Vec const& v) const {
        Vec out(n_ + m_);
        auto const x = v.head(n_);
        auto const w = v.tail(m_);
        out.head(n_) = diag_.cwiseProduct(x) + a_.transpose() * w;
        out.tail(m_) = a_ * x;
        return out;
    }

  private:
    Vec raw_solve(Vec const& rhs) const { return use_lu_ ? Vec(lu_.solve(rhs)) : Vec(ldlt_.solve(rhs)); }

    SpMat const& a_;
    double reg_;
    Eigen::Index n_ = 0, m_ = 0;
    SpMat k_;
    std::vector<double*> diag_ptr_;
    Vec diag_;
    bool analyzed_ = false;
    bool use_lu_ = false;
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

inline double max_step(Vec const& v, Vec const& dv, std::vector<Eigen::Index> const& idx) {
    double alpha = 1.0;
    for (Eigen::Index i : idx)
        if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    return alpha;
}

struct Reduced {
    QuadraticProgram qp;
    std::vector<std::size_t> free_index;  // reduced -> original
    std::vector<double> fixed_value;      // original, NaN when free
    std::vector<double> row_scale;
    double objective_scale = 1.0;
};

/// Removes fixed variables, scales rows to unit max-norm and the objective to unit magnitude.
inline Reduced reduce(QuadraticProgram const& qp) {
    std::size_t const n = qp.variable_count();
    Reduced red;
    red.fixed_value.assign(n, std::numeric_limits<double>::quiet_NaN());
    std::vector<long> map(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (qp.lower[i] > qp.upper[i])
            throw InconsistentModel("variable " + std::to_string(i) + " has lower bound above upper bound");
        if (qp.lower[i] == qp.upper[i]) {
            red.fixed_value[i] = qp.lower[i];
        } else {
            map[i] = static_cast<long>(red.free_index.size());
            red.free_index.push_back(i);
        }
    }
    std::size_t const nf = red.free_index.size();
    std::size_t const m = qp.equality_count();

    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max({scale, std::abs(qp.hessian[i]), std::abs(qp.linear[i])});
    red.objective_scale = scale;

    std::vector<double> b = qp.b_eq;
    std::vector<double> row_max(m, 0.0);
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index col = 0; col < qp.a_eq.outerSize(); ++col) {
        std::size_t const i = static_cast<std::size_t>(col);
        for (detail::SpMat::InnerIterator it(qp.a_eq, col); it; ++it) {
            std::size_t const j = static_cast<std::size_t>(it.row());
            if (map[i] < 0) {
                b[j] -= it.value() * red.fixed_value[i];
            } else {
                row_max[j] = std::max(row_max[j], std::abs(it.value()));
                t.emplace_back(it.row(), map[i], it.value());
            }
        }
    }
    red.row_scale.resize(m);
    for (std::size_t j = 0; j < m; ++j) red.row_scale[j] = row_max[j] > 0.0 ? 1.0 / row_max[j] : 1.0;
    for (auto& trip : t)
        trip = Eigen::Triplet<double>(trip.row(), trip.col(), trip.value() * red.row_scale[static_cast<std::size_t>(trip.row())]);

    auto& r = red.qp;
    r.a_eq.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(nf));
    r.a_eq.setFromTriplets(t.begin(), t.end());
    r.a_eq.makeCompressed();
    r.b_eq.resize(m);
    for (std::size_t j = 0; j < m; ++j) r.b_eq[j] = b[j] * red.row_scale[j];
    r.constant = 0.0;
    for (std::size_t k = 0; k < nf; ++k) {
        std::size_t const i = red.free_index[k];
        r.hessian.push_back(qp.hessian[i] / scale);
        r.linear.push_back(qp.linear[i] / scale);
        r.lower.push_back(qp.lower[i]);
        r.upper.push_back(qp.upper[i]);
    }
    return red;
}

struct IpmResult {
    bool converged = false;
    int iterations = 0;
    Vec x, y, zl, zu;
};

inline IpmResult interior_point(QuadraticProgram const& qp, QpOptions const& options) {
    Eigen::Index const n = static_cast<Eigen::Index>(qp.variable_count());
    Eigen::Index const m = static_cast<Eigen::Index>(qp.equality_count());
    Vec const h = Eigen::Map<Vec const>(qp.hessian.data(), n);
    Vec const c = Eigen::Map<Vec const>(qp.linear.data(), n);
    Vec const b = Eigen::Map<Vec const>(qp.b_eq.data(), m);
    Vec const lo = Eigen::Map<Vec const>(qp.lower.data(), n);
    Vec const up = Eigen::Map<Vec const>(qp.upper.data(), n);

    std::vector<Eigen::Index> has_lo, has_up;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isfinite(lo[i])) has_lo.push_back(i);
        if (std::isfinite(up[i])) has_up.push_back(i);
    }
    double const n_comp = static_cast<double>(has_lo.size() + has_up.size());

    IpmResult res;
    res.x = Vec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        bool const l = std::isfinite(lo[i]), u = std::isfinite(up[i]);
        if (l && u) res.x[i] = 0.5 * (lo[i] + up[i]);
        else if (l) res.x[i] = lo[i] + 1.0;
        else if (u) res.x[i] = up[i] - 1.0;
    }
    res.y = Vec::Zero(m);
    res.zl = Vec::Zero(n);
    res.zu = Vec::Zero(n);
    for (auto i : has_lo) res.zl[i] = 1.0;
    for (auto i : has_up) res.zu[i] = 1.0;

    KktSolver kkt(qp.a_eq, 1e-7);
    double const b_norm = 1.0 + b.lpNorm<Eigen::Infinity>();
    double const c_norm = 1.0 + c.lpNorm<Eigen::Infinity>();

    Vec sl = Vec::Zero(n), su = Vec::Zero(n);
    auto slacks = [&] {
        for (auto i : has_lo) sl[i] = res.x[i] - lo[i];
        for (auto i : has_up) su[i] = up[i] - res.x[i];
    };

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        slacks();
        Vec const rd = h.cwiseProduct(res.x) + c - qp.a_eq.transpose() * res.y - res.zl + res.zu;
        Vec const rp = qp.a_eq * res.x - b;
        double mu = 0.0;
        for (auto i : has_lo) mu += sl[i] * res.zl[i];
        for (auto i : has_up) mu += su[i] * res.zu[i];
        mu = n_comp > 0 ? mu / n_comp : 0.0;

        res.iterations = iter;
        if (rp.lpNorm<Eigen::Infinity>() <= options.tolerance * b_norm &&
            rd.lpNorm<Eigen::Infinity>() <= options.tolerance * c_norm && mu <= options.tolerance * 0.1) {
            res.converged = true;
            return res;
        }
        if (!res.x.allFinite() || res.x.lpNorm<Eigen::Infinity>() > 1e14 ||
            res.zl.lpNorm<Eigen::Infinity>() > 1e14 || res.zu.lpNorm<Eigen::Infinity>() > 1e14)
            return res;

        Vec diag = h;
        for (auto i : has_lo) diag[i] += res.zl[i] / sl[i];
        for (auto i : has_up) diag[i] += res.zu[i] / su[i];
        if (!kkt.factorize(diag)) return res;

        auto direction = [&](Vec const& rcl, Vec const& rcu, Vec& dx, Vec& dy, Vec& dzl, Vec& dzu) {
            Vec rhs(n + m);
            Vec top = -rd;
            for (auto i : has_lo) top[i] += rcl[i] / sl[i];
            for (auto i : has_up) top[i] -= rcu[i] / su[i];
            rhs.head(n) = top;
            rhs.tail(m) = -rp;
            Vec const sol = kkt.solve(rhs);
            dx = sol.head(n);
            dy = -sol.tail(m);
            dzl = Vec::Zero(n);
            dzu = Vec::Zero(n);
            for (auto i : has_lo) dzl[i] = (rcl[i] - res.zl[i] * dx[i]) / sl[i];
            for (auto i : has_up) dzu[i] = (rcu[i] + res.zu[i] * dx[i]) / su[i];
        };
        auto step_length = [&](Vec const& dx, Vec const& dzl, Vec const& dzu) {
            Vec const neg = -dx;
            double a = std::min(max_step(sl, dx, has_lo), max_step(su, neg, has_up));
            a = std::min({a, max_step(res.zl, dzl, has_lo), max_step(res.zu, dzu, has_up)});
            return a;
        };

        Vec rcl = Vec::Zero(n), rcu = Vec::Zero(n);
        for (auto i : has_lo) rcl[i] = -sl[i] * res.zl[i];
        for (auto i : has_up) rcu[i] = -su[i] * res.zu[i];
        Vec dx, dy, dzl, dzu;
        direction(rcl, rcu, dx, dy, dzl, dzu);
        double const a_aff = step_length(dx, dzl, dzu);

        double sigma = 0.0;
        if (n_comp > 0) {
            double mu_aff = 0.0;
            for (auto i : has_lo) mu_aff += (sl[i] + a_aff * dx[i]) * (res.zl[i] + a_aff * dzl[i]);
            for (auto i : has_up) mu_aff += (su[i] - a_aff * dx[i]) * (res.zu[i] + a_aff * dzu[i]);
            mu_aff /= n_comp;
            sigma = std::pow(mu_aff / mu, 3);
            sigma = std::clamp(sigma, 0.0, 1.0);
            for (auto i : has_lo) rcl[i] = sigma * mu - sl[i] * res.zl[i] - dx[i] * dzl[i];
            for (auto i : has_up) rcu[i] = sigma * mu - su[i] * res.zu[i] + dx[i] * dzu[i];
            direction(rcl, rcu, dx, dy, dzl, dzu);
        }
        double const tau = std::max(0.99, 1.0 - mu);
        double const alpha = std::min(1.0, tau * step_length(dx, dzl, dzu));
        res.x += alpha * dx;
        res.y += alpha * dy;
        res.zl += alpha * dzl;
        res.zu += alpha * dzu;
    }
    res.iterations = options.max_iterations;
    return res;
}

/// Fixes bound-active variables and re-solves the equality-constrained problem exactly.
/// Returns false when the guessed active set is inconsistent.
inline bool polish(QuadraticProgram const& qp, IpmResult& r) {
    Eigen::Index const n = static_cast<Eigen::Index>(qp.variable_count());
    Eigen::Index const m = static_cast<Eigen::Index>(qp.equality_count());
    std::vector<int> active(static_cast<std::size_t>(n), 0);  // -1 lower, +1 upper
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t const k = static_cast<std::size_t>(i);
        if (std::isfinite(qp.lower[k]) && r.x[i] - qp.lower[k] < r.zl[i]) active[k] = -1;
        else if (std::isfinite(qp.upper[k]) && qp.upper[k] - r.x[i] < r.zu[i]) active[k] = 1;
    }
    Vec x = r.x;
    Vec diag(n);
    SpMat a = qp.a_eq;
    Vec rhs(n + m);
    Vec const b = Eigen::Map<Vec const>(qp.b_eq.data(), m);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t const k = static_cast<std::size_t>(i);
        if (active[k] != 0) x[i] = active[k] < 0 ? qp.lower[k] : qp.upper[k];
    }
    // Active columns are removed by zeroing them in A and pinning x through a unit diagonal.
    Vec b_adj = b;
    for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
        if (active[static_cast<std::size_t>(col)] == 0) continue;
        for (SpMat::InnerIterator it(a, col); it; ++it) {
            b_adj[it.row()] -= it.value() * x[col];
            it.valueRef() = 0.0;
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t const k = static_cast<std::size_t>(i);
        diag[i] = active[k] != 0 ? 1.0 : qp.hessian[k];
        rhs[i] = active[k] != 0 ? x[i] : -qp.linear[k];
    }
    rhs.tail(m) = b_adj;

    KktSolver kkt(a, 1e-7);
    if (!kkt.factorize(diag)) return false;
    Vec sol(n + m);
    sol.head(n) = x;
    sol.tail(m) = -r.y;
    for (int it = 0; it < 60; ++it) {
        Vec const res = rhs - kkt.apply(sol);
        if (res.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
        sol += kkt.solve(res, 0);
    }
    if (!sol.allFinite()) return false;
    Vec const xp = sol.head(n);
    Vec const yp = -sol.tail(m);
    Vec const grad = Vec(Eigen::Map<Vec const>(qp.hessian.data(), n)).cwiseProduct(xp) +
                     Eigen::Map<Vec const>(qp.linear.data(), n) - qp.a_eq.transpose() * yp;
    Vec zl = Vec::Zero(n), zu = Vec::Zero(n);
    double const tol = 1e-9;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t const k = static_cast<std::size_t>(i);
        if (active[k] < 0) {
            if (grad[i] < -tol) return false;
            zl[i] = std::max(grad[i], 0.0);
        } else if (active[k] > 0) {
            if (grad[i] > tol) return false;
            zu[i] = std::max(-grad[i], 0.0);
        } else if (xp[i] < qp.lower[k] - tol || xp[i] > qp.upper[k] + tol) {
            return false;
        }
    }
    r.x = xp;
    r.y = yp;
    r.zl = zl;
    r.zu = zu;
    return true;
}

}  // namespace detail

QpSolution solve(QuadraticProgram const& problem, QpOptions const& options = {});

namespace detail {

/// Minimum L1 violation of the equality constraints within the bounds (phase-one problem).
inline double minimum_violation(QuadraticProgram const& qp, QpOptions options) {
    std::size_t const n = qp.variable_count();
    std::size_t const m = qp.equality_count();
    QuadraticProgram p1;
    p1.hessian.assign(n + 2 * m, 0.0);
    p1.linear.assign(n, 0.0);
    p1.linear.resize(n + 2 * m, 1.0);
    p1.lower = qp.lower;
    p1.upper = qp.upper;
    p1.lower.resize(n + 2 * m, 0.0);
    p1.upper.resize(n + 2 * m, kInf);
    p1.b_eq = qp.b_eq;
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index col = 0; col < qp.a_eq.outerSize(); ++col)
        for (SpMat::InnerIterator it(qp.a_eq, col); it; ++it) t.emplace_back(it.row(), col, it.value());
    for (std::size_t j = 0; j < m; ++j) {
        t.emplace_back(j, n + j, 1.0);
        t.emplace_back(j, n + m + j, -1.0);
    }
    p1.a_eq.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n + 2 * m));
    p1.a_eq.setFromTriplets(t.begin(), t.end());
    options.detect_infeasibility = false;
    auto const sol = solve(p1, options);
    if (sol.status != Status::Optimal) return std::numeric_limits<double>::quiet_NaN();
    return sol.objective;
}

}  // namespace detail

inline QpSolution solve(QuadraticProgram const& problem, QpOptions const& options) {
    std::size_t const n = problem.variable_count();
    if (problem.hessian.size() != n || problem.lower.size() != n || problem.upper.size() != n ||
        static_cast<std::size_t>(problem.a_eq.cols()) != n ||
        static_cast<std::size_t>(problem.a_eq.rows()) != problem.equality_count())
        throw InconsistentModel("QP dimensions disagree");
    for (std::size_t i = 0; i < n; ++i)
        if (problem.hessian[i] < 0.0) throw NonConvex("negative curvature on variable " + std::to_string(i));

    auto const red = detail::reduce(problem);
    auto ipm = detail::interior_point(red.qp, options);

    QpSolution out;
    out.iterations = ipm.iterations;
    if (!ipm.converged) {
        out.status = Status::IterLimit;
        if (options.detect_infeasibility) {
            double const violation = detail::minimum_violation(problem, options);
            if (violation > 1e-6) {
                out.status = Status::Infeasible;
                out.infeasibility = violation;
            }
        }
        return out;
    }
    if (options.polish) {
        auto candidate = ipm;
        if (detail::polish(red.qp, candidate)) {
            auto residual = [&red](detail::IpmResult const& r) {
                std::vector<double> x(r.x.data(), r.x.data() + r.x.size());
                std::vector<double> y(r.y.data(), r.y.data() + r.y.size());
                std::vector<double> zl(r.zl.data(), r.zl.data() + r.zl.size());
                std::vector<double> zu(r.zu.data(), r.zu.data() + r.zu.size());
                auto k = kkt_residuals(red.qp, x, y, zl, zu);
                return std::max({k.stationarity, k.primal, k.complementarity, k.dual_sign});
            };
            if (residual(candidate) <= residual(ipm)) {
                ipm = std::move(candidate);
                out.polished = true;
            }
        }
    }

    // Undo the reduction: scatter free variables, unscale multipliers, recover fixed-variable duals.
    double const scale = red.objective_scale;
    out.x.assign(n, 0.0);
    out.z_lower.assign(n, 0.0);
    out.z_upper.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isnan(red.fixed_value[i])) out.x[i] = red.fixed_value[i];
    for (std::size_t k = 0; k < red.free_index.size(); ++k) {
        std::size_t const i = red.free_index[k];
        out.x[i] = ipm.x[static_cast<Eigen::Index>(k)];
        out.z_lower[i] = ipm.zl[static_cast<Eigen::Index>(k)] * scale;
        out.z_upper[i] = ipm.zu[static_cast<Eigen::Index>(k)] * scale;
    }
    out.y.resize(problem.equality_count());
    for (std::size_t j = 0; j < out.y.size(); ++j)
        out.y[j] = ipm.y[static_cast<Eigen::Index>(j)] * scale * red.row_scale[j];

    Eigen::Map<Eigen::VectorXd const> yv(out.y.data(), static_cast<Eigen::Index>(out.y.size()));
    Eigen::VectorXd const aty = problem.a_eq.transpose() * yv;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(red.fixed_value[i])) continue;
        double const g = problem.hessian[i] * out.x[i] + problem.linear[i] - aty[static_cast<Eigen::Index>(i)];
        out.z_lower[i] = std::max(g, 0.0);
        out.z_upper[i] = std::max(-g, 0.0);
    }
    out.objective = problem.objective(out.x);
    out.residuals = kkt_residuals(problem, out.x, out.y, out.z_lower, out.z_upper);
    out.status = Status::Optimal;
    return out;
}

}  // namespace powerlin::qp
