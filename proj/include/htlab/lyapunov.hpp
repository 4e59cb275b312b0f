#pragma once

// Weighted Lyapunov functional
//
//   G = ∫ (u*/d1) [(u - u*) - u* ln(u/u*)] dx + η ∫ (v*/d2) [(v - v*) - v* ln(v/v*)] dx
//
// around a positive steady state (u*, v*), the node-wise quadratic-form
// discriminant that controls dG/dt, and a discrete check of the integral
// inequality used to drop the diffusion terms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "htlab/bounds.hpp"
#include "htlab/errors.hpp"
#include "htlab/model.hpp"
#include "htlab/pde.hpp"

namespace htlab {

struct LyapunovConfig {
    double eta = 1.0;
    ScalarField u_ref;
    ScalarField v_ref;

    void validate() const {
        if (!(eta > 0.0)) throw validation_error("lyapunov weight eta must be > 0");
        require_positive(u_ref, "reference u*");
        require_positive(v_ref, "reference v*");
    }
};

/// Default weight, evaluated at ε = 0:
/// η = sqrt(d2_min d2_max u_lo u_hi u_lo³ u_hi / (d1_min d1_max v_lo v_hi³)) b / (μ (1 + r u_lo)).
inline double eta_default(const BoundQuadruple& q, const DiffusionExtremes& d, const KineticParams& p) {
    if (!q.valid()) throw precondition_error("eta_default: invalid quadruple");
    const double num = d.d2_min * d.d2_max * q.u_lo * q.u_hi * q.u_lo * q.u_lo * q.u_lo * q.u_hi;
    const double den = d.d1_min * d.d1_max * q.v_lo * q.v_hi * q.v_hi * q.v_hi;
    return std::sqrt(num / den) * p.b / (p.mu * (1.0 + p.r * q.u_lo));
}

/// s - s* - s* ln(s/s*) = ∫_{s*}^{s} (σ - s*)/σ dσ, written to avoid cancellation near s = s*.
inline double entropy_density(double s, double s_ref) {
    const double x = (s - s_ref) / s_ref;
    return s_ref * (x - std::log1p(x));
}

inline double lyapunov_value(const State& state, const LyapunovConfig& cfg, const ModelSpec& model) {
    require_positive(state.u, "prey density u");
    require_positive(state.v, "predator density v");
    const Grid& grid = model.grid();
    double gu = 0.0;
    double gv = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double w = grid.weight(k);
        gu += w * cfg.u_ref[k] / model.d1[k] * entropy_density(state.u[k], cfg.u_ref[k]);
        gv += w * cfg.v_ref[k] / model.d2[k] * entropy_density(state.v[k], cfg.v_ref[k]);
    }
    return gu + cfg.eta * gv;
}

struct NodeDiscriminant {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double margin = -std::numeric_limits<double>::infinity();
    bool definite_setup = false;  // A < 0 and C < 0
};

/// Coefficients of E = A (u-u*)² + B (u-u*)(v-v*) + C (v-v*)² at one node and
/// the margin 2 sqrt(AC) - |B| (−∞ unless A < 0 and C < 0).
inline NodeDiscriminant discriminant_margin(double u, double v, double us, double vs, double d1, double d2,
                                            const KineticParams& p, double eta) {
    (void)v;
    const double su = 1.0 + p.r * u;
    const double sus = 1.0 + p.r * us;
    NodeDiscriminant out;
    out.A = -d2 * u * us * us * (su * sus - p.b * p.r * vs);
    out.C = -d1 * eta * p.mu * us * vs * su * sus;
    out.B = -p.b * d2 * u * us * us * sus + d1 * eta * p.mu * vs * vs * su * sus;
    out.definite_setup = out.A < 0.0 && out.C < 0.0;
    if (out.definite_setup) out.margin = 2.0 * std::sqrt(out.A * out.C) - std::abs(out.B);
    return out;
}

struct DiscriminantReport {
    std::vector<NodeDiscriminant> nodes;
    double min_margin = std::numeric_limits<double>::infinity();
    std::size_t min_node = 0;
};

inline DiscriminantReport discriminant_report(const State& state, const LyapunovConfig& cfg, const ModelSpec& model) {
    DiscriminantReport rep;
    rep.nodes.reserve(state.u.size());
    for (std::size_t k = 0; k < state.u.size(); ++k) {
        rep.nodes.push_back(discriminant_margin(state.u[k], state.v[k], cfg.u_ref[k], cfg.v_ref[k], model.d1[k],
                                                model.d2[k], model.params, cfg.eta));
        if (rep.nodes.back().margin < rep.min_margin) {
            rep.min_margin = rep.nodes.back().margin;
            rep.min_node = k;
        }
    }
    return rep;
}

/// Observers that attach G and the minimum discriminant margin to every trace record.
inline TraceObservers make_observers(const LyapunovConfig& cfg, const ModelSpec& model) {
    cfg.validate();
    TraceObservers obs;
    obs.lyapunov = [cfg, &model](const State& s) { return lyapunov_value(s, cfg, model); };
    obs.disc_margin = [cfg, &model](const State& s) { return discriminant_report(s, cfg, model).min_margin; };
    return obs;
}

struct MonitorRow {
    double t = 0.0;
    double G = 0.0;
    double dG = 0.0;  // G(t) - G(previous row); 0 on the first row
    double min_margin = 0.0;
    std::size_t min_margin_node = 0;
};

struct DecreaseReport {
    std::vector<MonitorRow> rows;
    double max_jump = 0.0;  // largest positive dG
    double min_margin = std::numeric_limits<double>::infinity();
    bool nonincreasing = true;
};

/// Evaluates G and the discriminant at every kept state with t >= t_start.
inline DecreaseReport monitor_decrease(const SimulationTrace& trace, const LyapunovConfig& cfg,
                                       const ModelSpec& model, double t_start, double tol = 1e-10) {
    cfg.validate();
    if (trace.states.size() != trace.records.size())
        throw precondition_error("monitor_decrease: trace does not carry state snapshots");
    DecreaseReport rep;
    for (const auto& s : trace.states) {
        if (s.t < t_start) continue;
        MonitorRow row;
        row.t = s.t;
        row.G = lyapunov_value(s, cfg, model);
        const auto disc = discriminant_report(s, cfg, model);
        row.min_margin = disc.min_margin;
        row.min_margin_node = disc.min_node;
        if (!rep.rows.empty()) row.dG = row.G - rep.rows.back().G;
        rep.max_jump = std::max(rep.max_jump, row.dG);
        rep.min_margin = std::min(rep.min_margin, row.min_margin);
        rep.rows.push_back(row);
    }
    rep.nonincreasing = rep.max_jump <= tol;
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete form of
//   ∫ w*(w - w*)/w (Δw - (w/w*) Δw*) dx  <=  -∫ w² |∇(w*/w)|² dx.

/// Central-difference gradient component; zero on mirror boundary nodes.
inline std::vector<double> gradient_component(const Grid& grid, std::span<const double> w, int axis) {
    std::vector<double> g(w.size(), 0.0);
    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.dim() == 2 ? grid.ny() : 1;
    const double inv2h = 0.5 / grid.spacing(axis);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t k = j * nx + i;
            if (axis == 0 && i > 0 && i + 1 < nx) g[k] = (w[k + 1] - w[k - 1]) * inv2h;
            if (axis == 1 && j > 0 && j + 1 < ny) g[k] = (w[k + nx] - w[k - nx]) * inv2h;
        }
    return g;
}

inline std::pair<double, double> green_inequality_check(const ScalarField& w, const ScalarField& w_star) {
    const Grid& grid = w.grid;
    if (!(grid == w_star.grid)) throw precondition_error("green_inequality_check: grid mismatch");
    require_positive(w, "w");
    require_positive(w_star, "w*");
    const ScalarField lap_w = laplacian_neumann(w);
    const ScalarField lap_ws = laplacian_neumann(w_star);

    std::vector<double> ratio(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) ratio[k] = w_star[k] / w[k];
    std::vector<double> grad2(w.size(), 0.0);
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const auto g = gradient_component(grid, ratio, axis);
        for (std::size_t k = 0; k < w.size(); ++k) grad2[k] += g[k] * g[k];
    }

    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double wt = grid.weight(k);
        lhs += wt * (w_star[k] * (w[k] - w_star[k]) / w[k]) * (lap_w[k] - (w[k] / w_star[k]) * lap_ws[k]);
        rhs -= wt * w[k] * w[k] * grad2[k];
    }
    return {lhs, rhs};
}

/// Edge-based companion of the right-hand side: -Σ_edges |e| w_i w_j ((ρ_j - ρ_i)/h)²
/// with ρ = w*/w. With the mirror stencil and trapezoid weights the left-hand
/// side equals this sum up to rounding.
inline double green_edge_rhs(const ScalarField& w, const ScalarField& w_star) {
    const Grid& grid = w.grid;
    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.dim() == 2 ? grid.ny() : 1;
    auto rho = [&](std::size_t k) { return w_star[k] / w[k]; };
    double sum = 0.0;
    for (int axis = 0; axis < grid.dim(); ++axis) {
        const double h = grid.spacing(axis);
        const double other = grid.dim() == 2 ? grid.spacing(1 - axis) : 1.0;
        const std::size_t n_other = axis == 0 ? ny : nx;
        const std::size_t n_axis = axis == 0 ? nx : ny;
        for (std::size_t m = 0; m < n_other; ++m) {
            const double cross = grid.dim() == 2 && (m == 0 || m + 1 == n_other) ? 0.5 * other : other;
            for (std::size_t i = 0; i + 1 < n_axis; ++i) {
                const std::size_t k0 = axis == 0 ? m * nx + i : i * nx + m;
                const std::size_t k1 = axis == 0 ? k0 + 1 : k0 + nx;
                const double d = (rho(k1) - rho(k0)) / h;
                sum -= h * cross * w[k0] * w[k1] * d * d;
            }
        }
    }
    return sum;
}

}  // namespace htlab
