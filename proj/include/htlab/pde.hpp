#pragma once

// Method-of-lines discretization of the reaction-diffusion system: second
// order central differences with mirror (no-flux) boundary nodes, explicit
// Euler or classical RK4 in time.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "htlab/bounds.hpp"
#include "htlab/errors.hpp"
#include "htlab/model.hpp"

namespace htlab {

/// Δw with zero normal derivative: ghost node mirrors the first interior node,
/// so boundary node 0 gets 2 (w1 - w0) / h².
inline void laplacian_neumann(const Grid& grid, std::span<const double> w, std::span<double> out) {
    const std::size_t nx = grid.nx();
    const std::size_t ny = grid.dim() == 2 ? grid.ny() : 1;
    const double ihx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    for (std::size_t j = 0; j < ny; ++j) {
        const std::size_t row = j * nx;
        out[row] = 2.0 * (w[row + 1] - w[row]) * ihx2;
        for (std::size_t i = 1; i + 1 < nx; ++i)
            out[row + i] = (w[row + i - 1] - 2.0 * w[row + i] + w[row + i + 1]) * ihx2;
        out[row + nx - 1] = 2.0 * (w[row + nx - 2] - w[row + nx - 1]) * ihx2;
    }
    if (grid.dim() == 2) {
        const double ihy2 = 1.0 / (grid.spacing(1) * grid.spacing(1));
        for (std::size_t j = 0; j < ny; ++j) {
            const std::size_t jm = j == 0 ? 1 : j - 1;
            const std::size_t jp = j + 1 == ny ? ny - 2 : j + 1;
            for (std::size_t i = 0; i < nx; ++i)
                out[j * nx + i] += (w[jm * nx + i] - 2.0 * w[j * nx + i] + w[jp * nx + i]) * ihy2;
        }
    }
}

inline ScalarField laplacian_neumann(const ScalarField& field) {
    ScalarField out(field.grid, 0.0);
    laplacian_neumann(field.grid, field.values, out.values);
    return out;
}

/// du/dt and dv/dt into the output spans; `lap` is scratch of the same length.
inline void rhs_into(const ModelSpec& model, std::span<const double> u, std::span<const double> v,
                     std::span<double> du, std::span<double> dv, std::span<double> lap) {
    const Grid& grid = model.grid();
    const auto& p = model.params;
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!(u[k] > 0.0)) {
            std::ostringstream os;
            os << "prey density not positive at node " << k << " (u = " << u[k] << ")";
            throw singularity_error(os.str());
        }
    }
    laplacian_neumann(grid, u, lap);
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double uk = u[k];
        du[k] = model.d1[k] * lap[k] + uk * (model.a[k] - uk - p.b * v[k] / (1.0 + p.r * uk));
    }
    laplacian_neumann(grid, v, lap);
    for (std::size_t k = 0; k < u.size(); ++k) dv[k] = model.d2[k] * lap[k] + p.mu * v[k] * (1.0 - v[k] / u[k]);
}

/// Node-wise (d1 Δu + f(a,u,v), d2 Δv + g(u,v)).
inline std::pair<ScalarField, ScalarField> rhs(const State& state, const ModelSpec& model) {
    ScalarField du(model.grid(), 0.0);
    ScalarField dv(model.grid(), 0.0);
    std::vector<double> lap(model.grid().size());
    rhs_into(model, state.u.values, state.v.values, du.values, dv.values, lap);
    return {std::move(du), std::move(dv)};
}

enum class Scheme { rk4, euler };

inline const char* scheme_name(Scheme s) { return s == Scheme::rk4 ? "explicit-rk4" : "explicit-euler"; }

struct StepperConfig {
    double dt = 0.0;
    double t_end = 1.0;
    std::size_t record_every = 1;
    Scheme scheme = Scheme::rk4;
    bool keep_states = true;
};

/// Largest dt meeting the explicit diffusion bound safety h_min² / (2 dim max d).
inline double max_stable_dt(const ModelSpec& model, double safety = 0.9) {
    const auto d = model.diffusion_extremes();
    const double h = model.grid().min_spacing();
    return safety * h * h / (2.0 * model.grid().dim() * std::max(d.d1_max, d.d2_max));
}

inline void validate_config(const StepperConfig& cfg, const ModelSpec& model) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw validation_error("stepper dt must be > 0");
    if (!(cfg.t_end >= 0.0)) throw validation_error("stepper t_end must be >= 0");
    if (cfg.record_every == 0) throw validation_error("stepper record_every must be >= 1");
    const double limit = max_stable_dt(model);
    // 1e-12 relative slack so that dt = max_stable_dt() itself is accepted
    if (cfg.dt > limit * (1.0 + 1e-12)) {
        std::ostringstream os;
        os.precision(17);
        os << "CFL violation: dt = " << cfg.dt << " exceeds the explicit diffusion limit " << limit
           << " (0.9 h^2 / (2 dim max d))";
        throw validation_error(os.str());
    }
}

/// Explicit integrator with preallocated stage storage.
class Stepper {
public:
    Stepper(const ModelSpec& model, Scheme scheme) : model_(&model), scheme_(scheme) {
        const std::size_t n = model.grid().size();
        lap_.resize(n);
        for (auto* buf : {&ku_, &kv_}) buf->assign(4, std::vector<double>(n));
        tu_.resize(n);
        tv_.resize(n);
    }

    /// Advances (u, v) by dt in place. Throws positivity_error if the result leaves u > 0, v >= 0.
    void advance(std::span<double> u, std::span<double> v, double dt) {
        const std::size_t n = u.size();
        if (scheme_ == Scheme::euler) {
            rhs_into(*model_, u, v, ku_[0], kv_[0], lap_);
            for (std::size_t k = 0; k < n; ++k) {
                tu_[k] = u[k] + dt * ku_[0][k];
                tv_[k] = v[k] + dt * kv_[0][k];
            }
        } else {
            rhs_into(*model_, u, v, ku_[0], kv_[0], lap_);
            stage(u, v, 0.5 * dt, 0);
            rhs_into(*model_, tu_, tv_, ku_[1], kv_[1], lap_);
            stage(u, v, 0.5 * dt, 1);
            rhs_into(*model_, tu_, tv_, ku_[2], kv_[2], lap_);
            stage(u, v, dt, 2);
            rhs_into(*model_, tu_, tv_, ku_[3], kv_[3], lap_);
            const double w = dt / 6.0;
            for (std::size_t k = 0; k < n; ++k) {
                tu_[k] = u[k] + w * (ku_[0][k] + 2.0 * ku_[1][k] + 2.0 * ku_[2][k] + ku_[3][k]);
                tv_[k] = v[k] + w * (kv_[0][k] + 2.0 * kv_[1][k] + 2.0 * kv_[2][k] + kv_[3][k]);
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (!(tu_[k] > 0.0) || !(tv_[k] >= 0.0) || !std::isfinite(tu_[k]) || !std::isfinite(tv_[k])) {
                std::ostringstream os;
                os << "positivity lost at node " << k << " (u = " << tu_[k] << ", v = " << tv_[k]
                   << "); try dt <= " << 0.5 * dt;
                throw positivity_error(os.str(), k, 0.5 * dt);
            }
        }
        std::copy(tu_.begin(), tu_.end(), u.begin());
        std::copy(tv_.begin(), tv_.end(), v.begin());
    }

private:
    void stage(std::span<const double> u, std::span<const double> v, double h, int s) {
        for (std::size_t k = 0; k < u.size(); ++k) {
            tu_[k] = u[k] + h * ku_[s][k];
            tv_[k] = v[k] + h * kv_[s][k];
        }
    }

    const ModelSpec* model_;
    Scheme scheme_;
    std::vector<double> lap_, tu_, tv_;
    std::vector<std::vector<double>> ku_, kv_;
};

/// One explicit step of size cfg.dt.
inline State step(const State& state, const ModelSpec& model, const StepperConfig& cfg) {
    validate_config(cfg, model);
    State next = state;
    Stepper(model, cfg.scheme).advance(next.u.values, next.v.values, cfg.dt);
    next.t += cfg.dt;
    return next;
}

/// Scalar observers evaluated at every record.
struct TraceObservers {
    std::function<double(const State&)> lyapunov;
    std::function<double(const State&)> disc_margin;
};

struct TraceRecord {
    double t = 0.0;
    double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0;
    double rhs_sup = 0.0;
    std::optional<double> G;
    std::optional<double> disc_margin;
};

struct SimulationTrace {
    std::vector<TraceRecord> records;
    std::vector<State> states;  // parallel to records when kept

    std::size_t size() const noexcept { return records.size(); }
    const TraceRecord& back() const { return records.back(); }
};

inline double sup_norm(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline double sup_distance(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

namespace detail {

inline TraceRecord make_record(const State& s, const ModelSpec& model, const TraceObservers& obs) {
    TraceRecord rec;
    rec.t = s.t;
    std::tie(rec.u_min, rec.u_max) = coeff_extremes(s.u);
    std::tie(rec.v_min, rec.v_max) = coeff_extremes(s.v);
    const auto [du, dv] = rhs(s, model);
    rec.rhs_sup = std::max(sup_norm(du.values), sup_norm(dv.values));
    if (obs.lyapunov) rec.G = obs.lyapunov(s);
    if (obs.disc_margin) rec.disc_margin = obs.disc_margin(s);
    return rec;
}

}  // namespace detail

/// Integrates from `initial` to initial.t + cfg.t_end. The step is shortened
/// uniformly so that an integer number of steps lands exactly on t_end.
inline SimulationTrace simulate(const ModelSpec& model, const State& initial, const StepperConfig& cfg,
                                const TraceObservers& observers = {}) {
    validate_config(cfg, model);
    if (!(initial.u.grid == model.grid()) || !(initial.v.grid == model.grid()))
        throw precondition_error("simulate: initial state must live on the model grid");
    require_positive(initial.u, "initial prey density u0");
    for (double x : initial.v.values)
        if (!(x >= 0.0)) throw precondition_error("simulate: initial predator density must be >= 0");

    const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    const double dt = steps > 0 ? cfg.t_end / static_cast<double>(steps) : 0.0;

    SimulationTrace trace;
    State s = initial;
    trace.records.push_back(detail::make_record(s, model, observers));
    if (cfg.keep_states) trace.states.push_back(s);

    Stepper stepper(model, cfg.scheme);
    for (std::size_t n = 1; n <= steps; ++n) {
        stepper.advance(s.u.values, s.v.values, dt);
        s.t = n == steps ? initial.t + cfg.t_end : initial.t + dt * static_cast<double>(n);
        if (n % cfg.record_every == 0 || n == steps) {
            trace.records.push_back(detail::make_record(s, model, observers));
            if (cfg.keep_states) trace.states.push_back(s);
        }
    }
    return trace;
}

/// First recorded time after which every remaining record lies in the box
/// inflated by `slack`; nullopt if the final record is outside.
inline std::optional<double> box_entry_time(const SimulationTrace& trace, const BoundQuadruple& q, double slack) {
    if (!(slack > 0.0)) throw precondition_error("box_entry_time: slack must be > 0");
    std::optional<double> entry;
    for (const auto& rec : trace.records) {
        const bool inside = rec.u_min >= q.u_lo - slack && rec.u_max <= q.u_hi + slack &&
                            rec.v_min >= q.v_lo - slack && rec.v_max <= q.v_hi + slack;
        if (!inside)
            entry.reset();
        else if (!entry)
            entry = rec.t;
    }
    return entry;
}

}  // namespace htlab
