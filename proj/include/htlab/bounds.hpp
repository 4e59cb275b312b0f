#pragma once

// The attracting bound quadruple (u_lo, u_hi, v_lo, v_hi): the unique positive
// solution of
//
//   f(a_max, u_hi, v_lo) = 0,  f(a_min, u_lo, v_hi) = 0,
//   g(u_hi, v_hi) = 0,         g(u_lo, v_lo) = 0,
//
// computed by root bracketing of a scalar reduction, by the closed form for
// r = 0, and by monotone upper/lower iteration. Also evaluates the hypotheses
// that gate the stability results.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "htlab/banded.hpp"
#include "htlab/errors.hpp"
#include "htlab/model.hpp"

namespace htlab {

struct BoundQuadruple {
    double u_lo = 0.0;
    double u_hi = 0.0;
    double v_lo = 0.0;
    double v_hi = 0.0;

    bool valid() const { return u_lo > 0.0 && u_lo <= u_hi && v_lo > 0.0 && v_lo <= v_hi; }

    /// u_hi / u_lo
    double ratio() const { return u_hi / u_lo; }
};

struct ConditionVerdict {
    bool holds = false;
    double margin = 0.0;
};

/// b < a_min / a_max, strict. margin = a_min/a_max - b.
inline ConditionVerdict check_b_condition(double a_min, double a_max, double b) {
    if (!(a_min > 0.0) || !(a_min <= a_max) || !(b > 0.0))
        throw precondition_error("check_b_condition: need 0 < a_min <= a_max and b > 0");
    const double bound = a_min / a_max;
    return {b < bound, bound - b};
}

inline void require_b_condition(double a_min, double a_max, double b) {
    if (!check_b_condition(a_min, a_max, b).holds) {
        std::ostringstream os;
        os << "hypothesis b < a_min/a_max violated: b = " << b << ", a_min/a_max = " << a_min / a_max;
        throw hypothesis_error(os.str());
    }
}

/// Positive constant steady state of the homogeneous system (a, d constant).
inline double homogeneous_steady(double a, double b, double r) {
    if (!(a > 0.0) || !(b > 0.0) || !(r >= 0.0)) throw precondition_error("homogeneous_steady: need a>0, b>0, r>=0");
    if (r == 0.0) return a / (1.0 + b);
    // positive root of r u^2 + (b + 1 - a r) u - a = 0, cancellation-free form
    const double beta = b + 1.0 - a * r;
    const double disc = std::sqrt(beta * beta + 4.0 * a * r);
    return beta >= 0.0 ? 2.0 * a / (beta + disc) : (disc - beta) / (2.0 * r);
}

/// Closed-form quadruple of the unsaturated (r = 0) case.
inline BoundQuadruple quadruple_closed_r0(double a_min, double a_max, double b) {
    require_b_condition(a_min, a_max, b);
    const double denom = 1.0 - b * b;
    const double lo = (a_min - b * a_max) / denom;
    const double hi = (a_max - b * a_min) / denom;
    return {lo, hi, lo, hi};
}

/// Scalar reduction whose root in [0, a_min] is u_lo:
/// h(τ) = b² ā + (b ā r - b)(a̲ - τ)(1 + rτ) - r (a̲ - τ)² (1 + rτ)² - b³ τ.
inline double h_eval(double tau, double a_min, double a_max, double b, double r) {
    const double s = (a_min - tau) * (1.0 + r * tau);
    return b * b * a_max + (b * a_max * r - b) * s - r * s * s - b * b * b * tau;
}

/// Residuals of the four algebraic equations at q.
inline std::array<double, 4> quadruple_residuals(const BoundQuadruple& q, double a_min, double a_max,
                                                 const KineticParams& p) {
    return {eval_f(a_max, q.u_hi, q.v_lo, p), eval_f(a_min, q.u_lo, q.v_hi, p), eval_g(q.u_hi, q.v_hi, p),
            eval_g(q.u_lo, q.v_lo, p)};
}

inline double max_abs(const std::array<double, 4>& r) {
    double m = 0.0;
    for (double x : r) m = std::max(m, std::abs(x));
    return m;
}

/// Sup-norm of the Newton step for the four equations at q; an estimate of
/// the distance to the root. Infinity when the Jacobian is singular.
inline double newton_distance(const BoundQuadruple& q, double a_min, double a_max, const KineticParams& p) {
    // unknowns (u_hi, u_lo, v_hi, v_lo), rows in quadruple_residuals order
    BandMatrix J(4, 3, 3);
    J(0, 0) = df_du(a_max, q.u_hi, q.v_lo, p);
    J(0, 3) = df_dv(q.u_hi, p);
    J(1, 1) = df_du(a_min, q.u_lo, q.v_hi, p);
    J(1, 2) = df_dv(q.u_lo, p);
    J(2, 0) = dg_du(q.u_hi, q.v_hi, p);
    J(2, 2) = dg_dv(q.u_hi, q.v_hi, p);
    J(3, 1) = dg_du(q.u_lo, q.v_lo, p);
    J(3, 3) = dg_dv(q.u_lo, q.v_lo, p);
    std::array<double, 4> step = quadruple_residuals(q, a_min, a_max, p);
    try {
        J.solve_in_place(step);
    } catch (const internal_error&) {
        return std::numeric_limits<double>::infinity();
    }
    return max_abs(step);
}

struct BisectionOptions {
    int max_iter = 200;
    bool closed_form_r0 = true;  // false bisects at r = 0 too
};

/// Quadruple by bisection on h over [0, a_min] (r > 0) or the closed form (r = 0).
/// `tol` is the bracket width at which bisection stops.
inline BoundQuadruple solve_quadruple(double a_min, double a_max, double b, double r, double tol = 1e-12,
                                      BisectionOptions opts = {}) {
    if (!(tol > 0.0)) throw precondition_error("solve_quadruple: tol must be > 0");
    if (!(r >= 0.0)) throw precondition_error("solve_quadruple: r must be >= 0");
    if (r == 0.0 && opts.closed_form_r0) return quadruple_closed_r0(a_min, a_max, b);
    require_b_condition(a_min, a_max, b);

    double lo = 0.0;
    double hi = a_min;
    double h_lo = h_eval(lo, a_min, a_max, b, r);
    const double h_hi = h_eval(hi, a_min, a_max, b, r);
    if (!(h_lo < 0.0 && h_hi > 0.0)) {
        std::ostringstream os;
        os << "solve_quadruple: no sign change of h on [0, a_min] (h(0)=" << h_lo << ", h(a_min)=" << h_hi << ")";
        throw internal_error(os.str());
    }
    for (int it = 0; it < opts.max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double h_mid = h_eval(mid, a_min, a_max, b, r);
        if (h_mid == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((h_mid < 0.0) == (h_lo < 0.0)) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    auto h_prime = [&](double t) {
        const double s = (a_min - t) * (1.0 + r * t);
        return (b * a_max * r - b - 2.0 * r * s) * (r * a_min - 1.0 - 2.0 * r * t) - b * b * b;
    };
    // Newton polish, kept inside the final bracket
    double u_lo = 0.5 * (lo + hi);
    for (int it = 0; it < 4 && lo < hi; ++it) {
        const double d = h_prime(u_lo);
        if (!(d > 0.0)) break;
        const double next = u_lo - h_eval(u_lo, a_min, a_max, b, r) / d;
        if (!(next >= lo && next <= hi) || next == u_lo) break;
        u_lo = next;
    }
    double u_hi = (a_min - u_lo) * (1.0 + r * u_lo) / b;

    // u_hi inherits the error of u_lo amplified by roughly |h'| / b
    const double scale = std::max(1.0, a_max * a_max) * std::max(1.0, std::abs(h_prime(u_lo)) / b);
    // plus the rounding floor of forming (a_min - u_lo)(1 + r u_lo) / b
    const double floor = std::numeric_limits<double>::epsilon() * a_min * (1.0 + r * a_min) / b;
    const double allowed = 10.0 * tol * scale + 64.0 * std::numeric_limits<double>::epsilon() * scale +
                           64.0 * floor * std::max(1.0, a_max);
    // homogeneous data: u_lo = u_hi exactly, rounding may order them the wrong way
    if (u_hi < u_lo && u_lo - u_hi <= allowed) u_hi = u_lo;
    const BoundQuadruple q{u_lo, u_hi, u_lo, u_hi};
    const double res = max_abs(quadruple_residuals(q, a_min, a_max, KineticParams{b, r, 1.0}));
    if (!q.valid() || res > allowed) {
        std::ostringstream os;
        os << "solve_quadruple: residual " << res << " exceeds " << allowed;
        throw internal_error(os.str());
    }
    return q;
}

/// Lipschitz constant of (f, g) on the box Q = u_box x v_box for y in [a_min, a_max].
inline double lipschitz_K(std::pair<double, double> u_box, std::pair<double, double> v_box, double a_min,
                          double a_max, const KineticParams& p) {
    const auto [u1, U1] = u_box;
    const auto [v1, V1] = v_box;
    if (!(u1 > 0.0)) throw precondition_error("lipschitz_K: lower prey bound must be > 0");
    if (!(u1 <= U1) || !(v1 <= V1) || !(v1 >= 0.0)) throw precondition_error("lipschitz_K: malformed box");

    const double fv = p.b * U1;
    const double gu = p.mu * V1 * V1 / (u1 * u1);
    const double gv = p.mu * std::max(1.0, std::abs(1.0 - 2.0 * V1 / u1));

    // f_u is affine in y and v; in u it is sampled along the edge in addition
    // to the corners since -2u - b v / (1 + r u)^2 need not be monotone.
    double fu = 0.0;
    constexpr int samples = 32;
    for (double y : {a_min, a_max})
        for (double v : {v1, V1})
            for (int k = 0; k <= samples; ++k) {
                const double u = u1 + (U1 - u1) * k / samples;
                fu = std::max(fu, std::abs(df_du(y, u, v, p)));
            }
    return std::max({fu, fv, gu, gv});
}

/// Iterate record (u_hi, u_lo, v_hi, v_lo) at step i.
struct IterateTrace {
    std::vector<BoundQuadruple> iterates;
    double K = 0.0;

    /// Ordering chain of the monotone scheme; first offending index or -1.
    long first_ordering_violation() const {
        for (std::size_t i = 0; i < iterates.size(); ++i) {
            const auto& q = iterates[i];
            if (!(q.u_lo <= q.u_hi) || !(q.v_lo <= q.v_hi) || !(q.u_lo > 0.0) || !(q.v_lo > 0.0))
                return static_cast<long>(i);
            if (i == 0) continue;
            const auto& p = iterates[i - 1];
            if (q.u_lo < p.u_lo || q.u_hi > p.u_hi || q.v_lo < p.v_lo || q.v_hi > p.v_hi)
                return static_cast<long>(i);
        }
        return -1;
    }
};

class iteration_not_converged : public convergence_error {
public:
    iteration_not_converged(const std::string& what, IterateTrace trace)
        : convergence_error(what), trace_(std::move(trace)) {}
    const IterateTrace& trace() const noexcept { return trace_; }

private:
    IterateTrace trace_;
};

struct MonotoneResult {
    BoundQuadruple quadruple;
    IterateTrace trace;
};

/// a_min - eps - b (a_max + eps) > 0, the admissibility of the iteration seeds.
inline bool seed_admissible(double a_min, double a_max, double b, double eps1) {
    return eps1 > 0.0 && a_min - eps1 - b * (a_max + eps1) > 0.0;
}

/// Largest of 1e-2, 1e-3, ... that makes the seeds admissible.
inline double default_seed_eps(double a_min, double a_max, double b) {
    require_b_condition(a_min, a_max, b);
    for (double eps = 1e-2; eps > 1e-300; eps *= 0.1)
        if (seed_admissible(a_min, a_max, b, eps)) return eps;
    throw internal_error("default_seed_eps: no admissible seed");
}

struct MonotoneOptions {
    double tol = 1e-10;
    long max_iter = 10'000'000;
    bool record = true;  // keep every iterate in the trace
};

/// Upper/lower monotone iteration from seeds (a_max + eps1, eps2):
///   u_hi' = u_hi + f(a_max, u_hi, v_lo)/K,  u_lo' = u_lo + f(a_min, u_lo, v_hi)/K,
///   v_hi' = v_hi + g(u_hi, v_hi)/K,         v_lo' = v_lo + g(u_lo, v_lo)/K.
/// Stops once the largest change is below tol, all residuals are below 10 tol
/// and the Newton estimate of the remaining distance is below tol.
inline MonotoneResult monotone_iteration(double a_min, double a_max, const KineticParams& p, double eps1,
                                         double eps2, MonotoneOptions opts = {}) {
    p.validate();
    require_b_condition(a_min, a_max, p.b);
    if (!seed_admissible(a_min, a_max, p.b, eps1))
        throw precondition_error("monotone_iteration: eps1 too large, need a_min - eps1 - b (a_max + eps1) > 0");
    if (!(eps2 > 0.0) || eps2 > eps1) throw precondition_error("monotone_iteration: need 0 < eps2 <= eps1");
    if (!(opts.tol > 0.0)) throw precondition_error("monotone_iteration: tol must be > 0");

    BoundQuadruple q{eps2, a_max + eps1, eps2, a_max + eps1};
    IterateTrace trace;
    trace.K = lipschitz_K({q.u_lo, q.u_hi}, {q.v_lo, q.v_hi}, a_min, a_max, p);
    const double K = trace.K;
    if (opts.record) trace.iterates.push_back(q);

    for (long i = 1; i <= opts.max_iter; ++i) {
        const std::array<double, 4> res = quadruple_residuals(q, a_min, a_max, p);
        BoundQuadruple next{q.u_lo + res[1] / K, q.u_hi + res[0] / K, q.v_lo + res[3] / K, q.v_hi + res[2] / K};

        if (next.u_lo < q.u_lo || next.u_hi > q.u_hi || next.v_lo < q.v_lo || next.v_hi > q.v_hi ||
            next.u_lo > next.u_hi || next.v_lo > next.v_hi) {
            std::ostringstream os;
            os << "monotone_iteration: ordering violated at step " << i << " (K = " << K << ")";
            throw internal_error(os.str());
        }
        const double change = std::max({next.u_lo - q.u_lo, q.u_hi - next.u_hi, next.v_lo - q.v_lo,
                                        q.v_hi - next.v_hi});
        q = next;
        if (opts.record) trace.iterates.push_back(q);
        // with K large the per-step change is tiny long before the limit is
        // reached, so the distance is also estimated by one Newton step
        if (change < opts.tol && max_abs(quadruple_residuals(q, a_min, a_max, p)) < 10.0 * opts.tol &&
            newton_distance(q, a_min, a_max, p) < opts.tol)
            return {q, std::move(trace)};
    }
    if (!opts.record) trace.iterates.push_back(q);
    std::ostringstream os;
    os << "monotone_iteration: no convergence after " << opts.max_iter << " steps";
    throw iteration_not_converged(os.str(), std::move(trace));
}

/// Overload with the default seeds eps1 = eps2 = default_seed_eps.
inline MonotoneResult monotone_iteration(double a_min, double a_max, const KineticParams& p,
                                         MonotoneOptions opts = {}) {
    const double eps = default_seed_eps(a_min, a_max, p.b);
    return monotone_iteration(a_min, a_max, p, eps, eps, opts);
}

struct StabilityVerdict {
    bool holds = false;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - b
};

/// Global stability condition
///   b < (1 + 2 r u_lo - r a_min) sqrt(d-ratio) (u_lo/u_hi)^{5/2}.
inline StabilityVerdict check_global_stability(const BoundQuadruple& q, const DiffusionExtremes& d, double a_min,
                                               const KineticParams& p) {
    if (!q.valid()) throw precondition_error("check_global_stability: invalid quadruple");
    const double rhs = (1.0 + 2.0 * p.r * q.u_lo - p.r * a_min) * std::sqrt(d.ratio()) * std::pow(q.u_lo / q.u_hi, 2.5);
    return {p.b < rhs, rhs, rhs - p.b};
}

/// Small-amplitude sufficient condition b < (1 + r a_min) sqrt(d-ratio) M^{-5/2},
/// valid when u_hi/u_lo < M has been verified separately.
inline StabilityVerdict check_remark_condition(double M, double a_min, const DiffusionExtremes& d, double b,
                                               double r) {
    if (!(M >= 1.0)) throw precondition_error("check_remark_condition: need M >= 1");
    const double rhs = (1.0 + r * a_min) * std::sqrt(d.ratio()) * std::pow(M, -2.5);
    return {b < rhs, rhs, rhs - b};
}

}  // namespace htlab
