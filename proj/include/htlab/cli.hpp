#pragma once

// Subcommands of the htlab command-line tool. Each command reads a RunConfig,
// prints a human-readable report, writes its artifacts under the output
// directory and returns a process exit code.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "htlab/bounds.hpp"
#include "htlab/config.hpp"
#include "htlab/io.hpp"
#include "htlab/lyapunov.hpp"
#include "htlab/model.hpp"
#include "htlab/pde.hpp"
#include "htlab/steady.hpp"
#include "json.hpp"

namespace htlab::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_hypothesis = 2,
    exit_nonconvergence = 3,
    exit_invalid_config = 4,
};

struct Output {
    std::ostream& out;
    std::ostream& err;
    std::filesystem::path dir;
    std::string prefix;

    std::filesystem::path file(const std::string& suffix) const { return dir / (prefix + suffix); }
};

inline Output make_output(const RunConfig& cfg, std::ostream& out, std::ostream& err,
                          const std::optional<std::filesystem::path>& dir_override = std::nullopt) {
    return {out, err, dir_override.value_or(cfg.out_dir), cfg.prefix};
}

namespace detail {

using io::fmt;

struct Bounds {
    double a_min = 0.0, a_max = 0.0;
    ConditionVerdict b_condition;
    std::optional<BoundQuadruple> q;
};

inline Bounds analyse(const RunConfig& cfg, const ModelSpec& model) {
    Bounds out;
    std::tie(out.a_min, out.a_max) = model.a_extremes();
    out.b_condition = check_b_condition(out.a_min, out.a_max, cfg.params.b);
    if (out.b_condition.holds)
        out.q = solve_quadruple(out.a_min, out.a_max, cfg.params.b, cfg.params.r, cfg.solver.bisection_tol);
    return out;
}

inline int report_hypothesis_failure(const Output& o, const Bounds& bd, double b) {
    o.err << "error: hypothesis b < a_min/a_max violated (b = " << fmt(b) << ", a_min/a_max = "
          << fmt(bd.a_min / bd.a_max) << "); the bound quadruple and stability results do not apply\n";
    return exit_hypothesis;
}

/// Steady state by Newton (1D, from the box midpoint) with relaxation as fallback.
inline SteadyResult solve_steady(const RunConfig& cfg, const ModelSpec& model, const std::optional<BoundQuadruple>& q,
                                 std::ostream& log) {
    const State start = q ? midpoint_guess(model, *q) : initial_state(cfg);
    const bool newton_ok = model.grid().dim() == 1 && cfg.solver.method != "relaxation";
    if (newton_ok) {
        auto res = steady_newton_1d(model, start, cfg.solver.tol, cfg.solver.newton_max_iter);
        if (res.converged || cfg.solver.method == "newton") return res;
        log << "note: " << res.message << '\n';
    }
    RelaxationOptions opts;
    if (cfg.stepper.dt) opts.dt = *cfg.stepper.dt;
    opts.scheme = cfg.stepper.scheme;
    return steady_by_relaxation(model, start, cfg.solver.tol, cfg.solver.t_max, opts);
}

inline nlohmann::json steady_json(const RunConfig& cfg, const SteadyResult& res) {
    nlohmann::json j;
    j["grid"] = io::grid_json(cfg.grid);
    j["params"] = io::params_json(cfg.params);
    j["residual"] = res.residual_sup;
    j["method"] = method_name(res.method);
    j["iterations"] = res.iterations;
    j["status"] = res.converged ? "converged" : "not-converged";
    if (!res.message.empty()) j["message"] = res.message;
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_bounds(const RunConfig& cfg, const Output& o) {
    using detail::fmt;
    const ModelSpec model = cfg.model();
    const auto bd = detail::analyse(cfg, model);
    o.out << "a_min = " << fmt(bd.a_min) << "\na_max = " << fmt(bd.a_max) << '\n';
    o.out << "b < a_min/a_max: " << (bd.b_condition.holds ? "true" : "false")
          << " (margin " << fmt(bd.b_condition.margin) << ")\n";
    if (!bd.q) return detail::report_hypothesis_failure(o, bd, cfg.params.b);

    const auto& q = *bd.q;
    nlohmann::json j;
    j["a_min"] = bd.a_min;
    j["a_max"] = bd.a_max;
    j["b_condition"] = {{"holds", true}, {"margin", bd.b_condition.margin}};
    j["quadruple"] = io::quadruple_json(q);
    const auto res = quadruple_residuals(q, bd.a_min, bd.a_max, cfg.params);
    j["residuals"] = res;
    o.out << "quadruple: u_lo = " << fmt(q.u_lo) << ", u_hi = " << fmt(q.u_hi) << ", v_lo = " << fmt(q.v_lo)
          << ", v_hi = " << fmt(q.v_hi) << '\n';
    o.out << "residuals: " << fmt(res[0]) << ' ' << fmt(res[1]) << ' ' << fmt(res[2]) << ' ' << fmt(res[3]) << '\n';

    if (cfg.params.r == 0.0) {
        const auto closed = quadruple_closed_r0(bd.a_min, bd.a_max, cfg.params.b);
        const double diff = std::max(std::abs(closed.u_lo - q.u_lo), std::abs(closed.u_hi - q.u_hi));
        o.out << "closed form (r = 0) agrees to " << fmt(diff) << '\n';
        j["closed_form_difference"] = diff;
    }

    MonotoneOptions mopts;
    mopts.tol = cfg.solver.iteration_tol;
    mopts.max_iter = cfg.solver.max_iter;
    mopts.record = false;
    try {
        const auto mono = monotone_iteration(bd.a_min, bd.a_max, cfg.params, mopts);
        const auto& m = mono.quadruple;
        const double diff = std::max({std::abs(m.u_lo - q.u_lo), std::abs(m.u_hi - q.u_hi),
                                      std::abs(m.v_lo - q.v_lo), std::abs(m.v_hi - q.v_hi)});
        o.out << "monotone iteration: K = " << fmt(mono.trace.K) << ", difference " << fmt(diff) << '\n';
        j["monotone_iteration"] = {{"quadruple", io::quadruple_json(m)}, {"K", mono.trace.K}, {"difference", diff}};
    } catch (const iteration_not_converged& e) {
        o.err << "warning: " << e.what() << '\n';
        j["monotone_iteration"] = {{"status", "not-converged"}};
    }
    io::write_json(o.file("_bounds.json"), j);
    return exit_ok;
}

inline int cmd_check(const RunConfig& cfg, const Output& o) {
    using detail::fmt;
    const ModelSpec model = cfg.model();
    const auto bd = detail::analyse(cfg, model);
    if (!bd.q) {
        nlohmann::json j{{"condition_2_2", false}, {"margins", {{"condition_2_2", bd.b_condition.margin}}}};
        o.out << j.dump(2) << '\n';
        io::write_json(o.file("_check.json"), j);
        return detail::report_hypothesis_failure(o, bd, cfg.params.b);
    }
    const auto& q = *bd.q;
    const auto d = model.diffusion_extremes();
    const auto stability = check_global_stability(q, d, bd.a_min, cfg.params);
    const double M = cfg.check_M.value_or(std::max(1.0, q.ratio() * (1.0 + 1e-9)));
    const auto remark = check_remark_condition(M, bd.a_min, d, cfg.params.b, cfg.params.r);
    const bool ratio_verified = q.ratio() <= M;

    nlohmann::json j;
    j["condition_2_2"] = true;
    j["condition_4_6"] = stability.holds;
    j["condition_4_66"] = remark.holds && ratio_verified;
    j["margins"] = {{"condition_2_2", bd.b_condition.margin},
                    {"condition_4_6", stability.margin},
                    {"condition_4_66", remark.margin}};
    j["rhs"] = {{"condition_4_6", stability.rhs}, {"condition_4_66", remark.rhs}};
    j["M"] = M;
    j["ratio"] = q.ratio();
    j["quadruple"] = io::quadruple_json(q);
    o.out << j.dump(2) << '\n';
    io::write_json(o.file("_check.json"), j);
    return exit_ok;
}

inline int cmd_simulate(const RunConfig& cfg, const Output& o) {
    using detail::fmt;
    const ModelSpec model = cfg.model();
    const auto bd = detail::analyse(cfg, model);
    auto scfg = cfg.stepper_config(model);
    scfg.keep_states = cfg.stepper.snapshots;
    const State init = initial_state(cfg);
    const SimulationTrace trace = simulate(model, init, scfg);

    io::write_trace_csv(o.file("_trace.csv"), trace);
    if (cfg.stepper.snapshots) io::write_snapshots(o.dir, o.prefix, trace);

    const auto& last = trace.back();
    nlohmann::json j;
    j["t_end"] = last.t;
    j["dt"] = scfg.dt;
    j["records"] = trace.size();
    j["final"] = {{"u_min", last.u_min}, {"u_max", last.u_max}, {"v_min", last.v_min}, {"v_max", last.v_max},
                  {"rhs_sup", last.rhs_sup}};
    o.out << "t = " << fmt(last.t) << ": u in [" << fmt(last.u_min) << ", " << fmt(last.u_max) << "], v in ["
          << fmt(last.v_min) << ", " << fmt(last.v_max) << "], rhs_sup = " << fmt(last.rhs_sup) << '\n';
    if (bd.q) {
        const auto entry = box_entry_time(trace, *bd.q, cfg.solver.slack);
        j["quadruple"] = io::quadruple_json(*bd.q);
        j["box_entry_time"] = entry ? nlohmann::json(*entry) : nlohmann::json(nullptr);
        o.out << "box entry time (slack " << fmt(cfg.solver.slack) << "): " << (entry ? fmt(*entry) : "none") << '\n';
    } else {
        o.out << "b >= a_min/a_max: no bound quadruple to compare against\n";
    }
    io::write_json(o.file("_simulate.json"), j);
    return exit_ok;
}

inline int cmd_steady(const RunConfig& cfg, const Output& o) {
    using detail::fmt;
    const ModelSpec model = cfg.model();
    const auto bd = detail::analyse(cfg, model);
    const SteadyResult res = detail::solve_steady(cfg, model, bd.q, o.err);

    io::write_field_csv(o.file("_ustar.csv"), res.u_star);
    io::write_field_csv(o.file("_vstar.csv"), res.v_star);
    auto j = detail::steady_json(cfg, res);
    const auto [umin, umax] = coeff_extremes(res.u_star);
    j["u_min"] = umin;
    j["u_max"] = umax;
    o.out << "status: " << (res.converged ? "converged" : "not-converged") << " (" << method_name(res.method)
          << ", residual " << fmt(res.residual_sup) << ")\n";
    o.out << "u* in [" << fmt(umin) << ", " << fmt(umax) << "]\n";
    if (bd.q) {
        const auto c = check_containment(res, *bd.q, cfg.solver.slack);
        j["containment"] = {{"holds", c.holds}, {"worst_violation", c.worst_violation}, {"slack", cfg.solver.slack}};
        o.out << "containment: " << (c.holds ? "true" : "false") << " (worst violation " << fmt(c.worst_violation)
              << ")\n";
    }
    io::write_json(o.file("_steady.json"), j);
    return res.converged ? exit_ok : exit_nonconvergence;
}

inline int cmd_lyapunov(const RunConfig& cfg, const Output& o) {
    using detail::fmt;
    const ModelSpec model = cfg.model();
    const auto bd = detail::analyse(cfg, model);
    if (!bd.q) return detail::report_hypothesis_failure(o, bd, cfg.params.b);
    const auto& q = *bd.q;

    const double eta = cfg.lyapunov.eta.value_or(eta_default(q, model.diffusion_extremes(), cfg.params)) *
                       cfg.lyapunov.eta_scale;
    const State init = initial_state(cfg);
    const auto scfg = cfg.stepper_config(model);

    LyapunovConfig lcfg;
    lcfg.eta = eta;
    SimulationTrace trace;
    if (cfg.lyapunov.reference == "final") {
        trace = simulate(model, init, scfg);
        lcfg.u_ref = trace.states.back().u;
        lcfg.v_ref = trace.states.back().v;
    } else {
        const SteadyResult ref = detail::solve_steady(cfg, model, q, o.err);
        if (!ref.converged) {
            o.err << "error: reference steady state did not converge (residual " << fmt(ref.residual_sup) << ")\n";
            return exit_nonconvergence;
        }
        lcfg.u_ref = ref.u_star;
        lcfg.v_ref = ref.v_star;
        trace = simulate(model, init, scfg, make_observers(lcfg, model));
    }

    const auto entry = box_entry_time(trace, q, cfg.solver.slack);
    const double t_start = cfg.lyapunov.t_start.value_or(entry.value_or(trace.back().t));
    const auto rep = monitor_decrease(trace, lcfg, model, t_start);
    io::write_monitor_csv(o.file("_lyapunov.csv"), rep);
    io::write_trace_csv(o.file("_trace.csv"), trace);

    nlohmann::json j;
    j["eta"] = eta;
    j["reference"] = cfg.lyapunov.reference;
    j["box_entry_time"] = entry ? nlohmann::json(*entry) : nlohmann::json(nullptr);
    j["t_start"] = t_start;
    j["max_jump"] = rep.max_jump;
    j["min_margin"] = rep.min_margin;
    j["nonincreasing"] = rep.nonincreasing;
    j["final_G"] = rep.rows.empty() ? 0.0 : rep.rows.back().G;
    io::write_json(o.file("_lyapunov.json"), j);

    o.out << "eta = " << fmt(eta) << '\n';
    o.out << "box entry time: " << (entry ? fmt(*entry) : "none") << '\n';
    o.out << "G nonincreasing after t = " << fmt(t_start) << ": " << (rep.nonincreasing ? "true" : "false")
          << " (max jump " << fmt(rep.max_jump) << ")\n";
    o.out << "min discriminant margin: " << fmt(rep.min_margin) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& scan_axes() {
    static const std::vector<std::string> axes{"b", "r", "amplitude", "contrast"};
    return axes;
}

/// Copy of `cfg` with the scanned parameter set to `value`.
inline RunConfig apply_axis(const RunConfig& cfg, const std::string& axis, double value) {
    if (!(value > 0.0) && !(axis == "r" && value == 0.0))
        throw validation_error("scan values must be positive");
    RunConfig c = cfg;
    if (axis == "b") {
        c.params.b = value;
    } else if (axis == "r") {
        c.params.r = value;
    } else if (axis == "amplitude") {
        const auto base = coeff_extremes(build_coefficient(cfg.a, cfg.grid));
        double c0 = base.first;
        std::array<int, 2> modes{1, 0};
        if (const auto* cos = std::get_if<coeff::Cosine>(&cfg.a)) {
            c0 = cos->c0;
            modes = cos->modes;
        }
        c.a = coeff::Cosine{c0, value, modes};
    } else if (axis == "contrast") {
        // d_max / d_min = value for both diffusivities, keeping each minimum
        if (value < 1.0) throw validation_error("diffusion contrast must be >= 1");
        for (auto* d : {&c.d1, &c.d2}) {
            const double lo = coeff_extremes(build_coefficient(*d, cfg.grid)).first;
            *d = coeff::Cosine{0.5 * lo * (1.0 + value), 0.5 * lo * (value - 1.0), {1, 0}};
        }
    } else {
        throw validation_error("unknown scan axis '" + axis + "' (b, r, amplitude, contrast)");
    }
    return c;
}

inline int cmd_scan(const RunConfig& cfg, const Output& o, const std::string& axis, const std::vector<double>& values,
                    bool spot) {
    using detail::fmt;
    if (values.empty()) throw validation_error("scan needs at least one value");
    std::vector<std::string> rows(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const RunConfig c = apply_axis(cfg, axis, values[i]);
        const ModelSpec model = c.model();
        const auto bd = detail::analyse(c, model);
        const auto d = model.diffusion_extremes();
        std::ostringstream row;
        row << fmt(values[i]) << ',' << fmt(c.params.b) << ',' << fmt(c.params.r) << ',' << fmt(bd.a_min) << ','
            << fmt(bd.a_max) << ',' << fmt(d.ratio()) << ',' << (bd.b_condition.holds ? "true" : "false") << ','
            << fmt(bd.b_condition.margin);
        if (bd.q) {
            const auto& q = *bd.q;
            const auto st = check_global_stability(q, d, bd.a_min, c.params);
            row << ',' << fmt(q.u_lo) << ',' << fmt(q.u_hi) << ',' << fmt(q.v_lo) << ',' << fmt(q.v_hi) << ','
                << fmt(q.ratio()) << ',' << (st.holds ? "true" : "false") << ',' << fmt(st.rhs) << ','
                << fmt(st.margin);
        } else {
            row << ",nan,nan,nan,nan,nan,false,nan,nan";
        }
        if (spot) {
            auto scfg = c.stepper_config(model);
            scfg.keep_states = false;
            const auto trace = simulate(model, initial_state(c), scfg);
            const auto entry = bd.q ? box_entry_time(trace, *bd.q, c.solver.slack) : std::nullopt;
            row << ',' << (entry ? fmt(*entry) : "nan") << ',' << fmt(trace.back().rhs_sup);
        }
        rows[i] = row.str();
    }
    const std::string header = std::string("value,b,r,a_min,a_max,d_ratio,condition_2_2,margin_2_2,u_lo,u_hi,v_lo,v_hi,") +
                               "ratio,condition_4_6,rhs_4_6,margin_4_6" + (spot ? ",box_entry_time,final_rhs_sup" : "");
    auto os = io::open_out(o.file("_scan_" + axis + ".csv"));
    os << header << '\n';
    o.out << header << '\n';
    for (const auto& r : rows) {
        os << r << '\n';
        o.out << r << '\n';
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"htlab: heterogeneous Holling-Tanner predator-prey laboratory"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::string> out_dir;
    std::string axis;
    std::vector<double> values;
    bool spot = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration (INI)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
    };
    auto* bounds = app.add_subcommand("bounds", "bound quadruple and its cross-checks");
    auto* check = app.add_subcommand("check", "evaluate the stability conditions");
    auto* sim = app.add_subcommand("simulate", "integrate the reaction-diffusion system");
    auto* steady = app.add_subcommand("steady", "solve for the positive steady state");
    auto* lyap = app.add_subcommand("lyapunov", "monitor the Lyapunov functional along a run");
    auto* scan = app.add_subcommand("scan", "sweep one parameter and tabulate the verdicts");
    for (auto* s : {bounds, check, sim, steady, lyap, scan}) add_common(s);
    scan->add_option("--axis", axis, "b | r | amplitude | contrast")->required();
    scan->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
    scan->add_flag("--spot", spot, "run a spot simulation per row");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_invalid_config;
    }

    try {
        const RunConfig cfg = load_config(config_path);
        const Output o = make_output(cfg, out, err, out_dir ? std::optional<std::filesystem::path>(*out_dir) : std::nullopt);
        out << std::setprecision(17);
        if (*bounds) return cmd_bounds(cfg, o);
        if (*check) return cmd_check(cfg, o);
        if (*sim) return cmd_simulate(cfg, o);
        if (*steady) return cmd_steady(cfg, o);
        if (*lyap) return cmd_lyapunov(cfg, o);
        return cmd_scan(cfg, o, axis, values, spot);
    } catch (const hypothesis_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_hypothesis;
    } catch (const validation_error& e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return exit_invalid_config;
    } catch (const positivity_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_nonconvergence;
    } catch (const convergence_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_nonconvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

}  // namespace htlab::cli
