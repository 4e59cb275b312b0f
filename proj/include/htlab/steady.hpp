#pragma once

// Steady states of the no-flux elliptic system
//   d1 Δu + f(a, u, v) = 0,  d2 Δv + g(u, v) = 0
// by long-time relaxation of the explicit integrator, or (1D only) damped
// Newton iteration with the analytic banded Jacobian.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "htlab/banded.hpp"
#include "htlab/bounds.hpp"
#include "htlab/errors.hpp"
#include "htlab/model.hpp"
#include "htlab/pde.hpp"

namespace htlab {

enum class SteadyMethod { relaxation, newton };

inline const char* method_name(SteadyMethod m) { return m == SteadyMethod::relaxation ? "relaxation" : "newton"; }

struct SteadyResult {
    ScalarField u_star;
    ScalarField v_star;
    double residual_sup = std::numeric_limits<double>::infinity();
    SteadyMethod method = SteadyMethod::relaxation;
    std::size_t iterations = 0;  // time steps for relaxation, Newton steps for newton
    bool converged = false;
    double t_final = 0.0;             // relaxation only
    std::vector<double> update_norms;  // newton only: sup-norm of each accepted update
    std::string message;
};

/// Sup-norm of the discrete steady residual over nodes and both equations.
inline double residual_esp3(const ScalarField& u, const ScalarField& v, const ModelSpec& model) {
    require_positive(u, "prey density u");
    const auto [du, dv] = rhs(State{u, v, 0.0}, model);
    return std::max(sup_norm(du.values), sup_norm(dv.values));
}

struct RelaxationOptions {
    double dt = 0.0;  // 0 selects max_stable_dt
    Scheme scheme = Scheme::rk4;
    std::size_t check_every = 50;  // steps between residual evaluations
};

/// Integrates in time until the steady residual drops below tol or t_max elapses.
inline SteadyResult steady_by_relaxation(const ModelSpec& model, const State& initial, double tol, double t_max,
                                         RelaxationOptions opts = {}) {
    if (!(tol > 0.0)) throw precondition_error("steady_by_relaxation: tol must be > 0");
    const double dt = opts.dt > 0.0 ? opts.dt : max_stable_dt(model);
    validate_config(StepperConfig{dt, t_max, 1, opts.scheme, false}, model);
    require_positive(initial.u, "initial prey density u0");

    SteadyResult res;
    res.method = SteadyMethod::relaxation;
    State s = initial;
    Stepper stepper(model, opts.scheme);
    std::vector<double> du(s.u.size()), dv(s.u.size()), lap(s.u.size());
    auto residual = [&] {
        rhs_into(model, s.u.values, s.v.values, du, dv, lap);
        return std::max(sup_norm(du), sup_norm(dv));
    };

    res.residual_sup = residual();
    double elapsed = 0.0;
    std::size_t steps = 0;
    while (res.residual_sup >= tol && elapsed < t_max) {
        const std::size_t chunk = std::max<std::size_t>(1, opts.check_every);
        for (std::size_t n = 0; n < chunk && elapsed < t_max; ++n) {
            const double h = std::min(dt, t_max - elapsed);
            stepper.advance(s.u.values, s.v.values, h);
            elapsed += h;
            ++steps;
        }
        res.residual_sup = residual();
    }
    res.u_star = std::move(s.u);
    res.v_star = std::move(s.v);
    res.iterations = steps;
    res.t_final = initial.t + elapsed;
    res.converged = res.residual_sup < tol;
    if (!res.converged)
        res.message = "not-converged: residual " + std::to_string(res.residual_sup) + " at t_max";
    return res;
}

struct NewtonOptions {
    int max_halvings = 30;
};

/// Damped Newton on the stacked 1D system, unknowns interleaved (u_0, v_0, u_1, v_1, ...).
/// On failure returns converged = false with a message recommending relaxation.
inline SteadyResult steady_newton_1d(const ModelSpec& model, const State& initial, double tol, int max_iter,
                                     NewtonOptions opts = {}) {
    const Grid& grid = model.grid();
    if (grid.dim() != 1) throw precondition_error("steady_newton_1d: 1D grids only; use relaxation in 2D");
    if (!(tol > 0.0)) throw precondition_error("steady_newton_1d: tol must be > 0");
    require_positive(initial.u, "initial prey density u0");
    require_positive(initial.v, "initial predator density v0");

    const std::size_t n = grid.size();
    const double ih2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    const auto& p = model.params;

    SteadyResult res;
    res.method = SteadyMethod::newton;
    ScalarField u = initial.u;
    ScalarField v = initial.v;
    std::vector<double> du(n), dv(n), lap(n);

    auto residual_into = [&](const ScalarField& uu, const ScalarField& vv) {
        rhs_into(model, uu.values, vv.values, du, dv, lap);
        return std::max(sup_norm(du), sup_norm(dv));
    };

    double current = residual_into(u, v);
    for (int it = 0; it < max_iter; ++it) {
        BandMatrix jac(2 * n, 2, 2);
        std::vector<double> step(2 * n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t ru = 2 * k;
            const std::size_t rv = 2 * k + 1;
            // Laplacian row with mirror boundaries
            const double left = k == 0 ? 0.0 : (k + 1 == n ? 2.0 : 1.0);
            const double right = k + 1 == n ? 0.0 : (k == 0 ? 2.0 : 1.0);
            if (k > 0) {
                jac(ru, 2 * (k - 1)) = model.d1[k] * left * ih2;
                jac(rv, 2 * (k - 1) + 1) = model.d2[k] * left * ih2;
            }
            if (k + 1 < n) {
                jac(ru, 2 * (k + 1)) = model.d1[k] * right * ih2;
                jac(rv, 2 * (k + 1) + 1) = model.d2[k] * right * ih2;
            }
            jac(ru, ru) = -2.0 * model.d1[k] * ih2 + df_du(model.a[k], u[k], v[k], p);
            jac(ru, rv) = df_dv(u[k], p);
            jac(rv, ru) = dg_du(u[k], v[k], p);
            jac(rv, rv) = -2.0 * model.d2[k] * ih2 + dg_dv(u[k], v[k], p);
            step[ru] = -du[k];
            step[rv] = -dv[k];
        }
        try {
            jac.solve_in_place(step);
        } catch (const internal_error& e) {
            res.message = std::string("newton failed (") + e.what() + "); fall back to relaxation";
            break;
        }

        double lambda = 1.0;
        bool accepted = false;
        ScalarField u_try = u;
        ScalarField v_try = v;
        for (int halving = 0; halving <= opts.max_halvings; ++halving, lambda *= 0.5) {
            bool positive = true;
            for (std::size_t k = 0; k < n && positive; ++k) {
                u_try[k] = u[k] + lambda * step[2 * k];
                v_try[k] = v[k] + lambda * step[2 * k + 1];
                positive = u_try[k] > 0.0 && v_try[k] > 0.0;
            }
            if (!positive) continue;
            const double trial = residual_into(u_try, v_try);
            if (trial < current || trial < tol) {
                current = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            res.message = "newton damping exhausted; fall back to relaxation";
            // restore du/dv for the reported residual
            current = residual_into(u, v);
            break;
        }
        res.update_norms.push_back(lambda * sup_norm(step));
        u = std::move(u_try);
        v = std::move(v_try);
        res.iterations = static_cast<std::size_t>(it + 1);
        if (current < tol) {
            res.converged = true;
            break;
        }
    }
    res.u_star = std::move(u);
    res.v_star = std::move(v);
    res.residual_sup = current;
    if (!res.converged && res.message.empty())
        res.message = "newton reached max_iter with residual " + std::to_string(current) + "; fall back to relaxation";
    return res;
}

/// Constant initial guess at the box midpoint (u_lo + u_hi)/2 for both species.
inline State midpoint_guess(const ModelSpec& model, const BoundQuadruple& q) {
    const double mid = 0.5 * (q.u_lo + q.u_hi);
    return constant_state(model.grid(), mid, 0.5 * (q.v_lo + q.v_hi));
}

struct ContainmentVerdict {
    bool holds = false;
    double worst_violation = 0.0;  // distance outside the slack-inflated box, 0 when inside
    std::size_t worst_node = 0;
};

inline ContainmentVerdict check_containment(const SteadyResult& result, const BoundQuadruple& q, double slack) {
    if (!(result.u_star.grid == result.v_star.grid)) throw precondition_error("check_containment: grid mismatch");
    ContainmentVerdict out;
    for (std::size_t k = 0; k < result.u_star.size(); ++k) {
        const double u = result.u_star[k];
        const double v = result.v_star[k];
        const double viol = std::max({q.u_lo - slack - u, u - q.u_hi - slack, q.v_lo - slack - v, v - q.v_hi - slack, 0.0});
        if (viol > out.worst_violation) {
            out.worst_violation = viol;
            out.worst_node = k;
        }
    }
    out.holds = out.worst_violation == 0.0;
    return out;
}

}  // namespace htlab
