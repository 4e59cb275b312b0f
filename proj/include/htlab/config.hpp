#pragma once

// INI-style run configuration.
//
//   [model]    b, r, mu, and per coefficient (a, d1, d2):
//              <c>.kind = constant | cosine | tabulated
//              <c>.value | <c>.c0, <c>.c1, <c>.modes | <c>.values or <c>.file
//   [grid]     dim, extents, counts
//   [init]     seed, and per species (u, v) the coefficient keys above or
//              <s>.kind = random with <s>.low, <s>.high
//   [stepper]  dt (number or auto), t_end, record_every, scheme (rk4 | euler), snapshots
//   [solver]   tol, bisection_tol, iteration_tol, max_iter, t_max, method, slack
//   [lyapunov] eta, eta_scale, reference (steady | final), t_start
//   [check]    M
//   [output]   dir, prefix

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "htlab/errors.hpp"
#include "htlab/io.hpp"
#include "htlab/model.hpp"
#include "htlab/pde.hpp"
#include "htlab/steady.hpp"

namespace htlab {

namespace init {
struct Random {
    double low = 0.1;
    double high = 2.0;
};
}  // namespace init

using InitSpec = std::variant<coeff::Constant, coeff::Cosine, coeff::Tabulated, init::Random>;

inline constexpr unsigned long long default_seed = 20240601ULL;

struct RunConfig {
    KineticParams params;
    Grid grid = Grid::line(1.0, 101);
    CoefficientSpec a = coeff::Constant{1.0};
    CoefficientSpec d1 = coeff::Constant{1.0};
    CoefficientSpec d2 = coeff::Constant{1.0};

    InitSpec init_u = coeff::Constant{0.5};
    InitSpec init_v = coeff::Constant{0.5};
    unsigned long long seed = default_seed;

    struct Stepper {
        std::optional<double> dt;  // nullopt: auto
        double t_end = 100.0;
        std::size_t record_every = 1000;
        Scheme scheme = Scheme::rk4;
        bool snapshots = false;
    } stepper;

    struct Solver {
        double tol = 1e-10;            // steady residual
        double bisection_tol = 1e-12;  // quadruple bracket width
        double iteration_tol = 1e-10;  // monotone iteration
        long max_iter = 10'000'000;
        int newton_max_iter = 50;
        double t_max = 500.0;
        std::string method = "auto";  // auto | relaxation | newton
        double slack = 1e-3;
    } solver;

    struct Lyapunov {
        std::optional<double> eta;
        double eta_scale = 1.0;
        std::string reference = "steady";  // steady | final
        std::optional<double> t_start;
    } lyapunov;

    std::optional<double> check_M;

    std::filesystem::path out_dir = ".";
    std::string prefix = "run";

    ModelSpec model() const { return ModelSpec::build(params, grid, a, d1, d2); }

    StepperConfig stepper_config(const ModelSpec& m) const {
        return {stepper.dt.value_or(max_stable_dt(m)), stepper.t_end, stepper.record_every, stepper.scheme, true};
    }
};

/// Realizes an initial profile; random profiles draw from `rng` in node order.
inline ScalarField build_initial(const InitSpec& spec, const Grid& grid, std::mt19937_64& rng) {
    if (const auto* r = std::get_if<init::Random>(&spec)) {
        if (!(r->low >= 0.0) || !(r->high > r->low)) throw validation_error("random init needs 0 <= low < high");
        std::uniform_real_distribution<double> dist(r->low, r->high);
        ScalarField f(grid, 0.0);
        for (auto& x : f.values) x = dist(rng);
        return f;
    }
    if (const auto* c = std::get_if<coeff::Constant>(&spec)) {
        if (!(c->value >= 0.0)) throw validation_error("initial density must be >= 0");
        return ScalarField(grid, c->value);
    }
    if (const auto* c = std::get_if<coeff::Cosine>(&spec)) return build_coefficient(*c, grid);
    return build_coefficient(std::get<coeff::Tabulated>(spec), grid);
}

inline State initial_state(const RunConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    ScalarField u = build_initial(cfg.init_u, cfg.grid, rng);
    ScalarField v = build_initial(cfg.init_v, cfg.grid, rng);
    return {std::move(u), std::move(v), 0.0};
}

namespace detail {

namespace pt = boost::property_tree;

class Section {
public:
    Section(const pt::ptree& root, std::string name) : root_(root), name_(std::move(name)) {}

    std::optional<std::string> raw(const std::string& key) const {
        const auto v = root_.get_optional<std::string>(pt::ptree::path_type(name_ + "/" + key, '/'));
        if (!v) return std::nullopt;
        std::string s = *v;
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }

    std::optional<double> number(const std::string& key) const {
        const auto s = raw(key);
        if (!s) return std::nullopt;
        const auto xs = io::parse_numbers(*s);
        if (xs.size() != 1) throw validation_error("[" + name_ + "] " + key + ": expected one number, got '" + *s + "'");
        return xs.front();
    }

    double number_or(const std::string& key, double fallback) const { return number(key).value_or(fallback); }

    std::optional<std::vector<double>> numbers(const std::string& key) const {
        const auto s = raw(key);
        if (!s) return std::nullopt;
        return io::parse_numbers(*s);
    }

    template <class Int>
    Int integer_or(const std::string& key, Int fallback) const {
        const auto x = number(key);
        if (!x) return fallback;
        if (*x != static_cast<double>(static_cast<long long>(*x)) || (*x < 0 && std::is_unsigned_v<Int>))
            throw validation_error("[" + name_ + "] " + key + ": expected a non-negative integer");
        return static_cast<Int>(*x);
    }

    const std::string& name() const { return name_; }

private:
    const pt::ptree& root_;
    std::string name_;
};

inline std::array<int, 2> parse_modes(const Section& s, const std::string& key) {
    std::array<int, 2> modes{1, 0};
    if (auto m = s.numbers(key)) {
        if (m->empty() || m->size() > 2) throw validation_error("[" + s.name() + "] " + key + ": one or two modes");
        modes[0] = static_cast<int>((*m)[0]);
        modes[1] = m->size() > 1 ? static_cast<int>((*m)[1]) : 0;
    }
    return modes;
}

/// Parses <prefix>.kind and friends into a coefficient-like spec.
inline InitSpec parse_profile(const Section& s, const std::string& prefix, const std::filesystem::path& base,
                              const InitSpec& fallback, bool allow_random) {
    const auto kind = s.raw(prefix + ".kind");
    if (!kind) {
        if (auto v = s.number(prefix)) return coeff::Constant{*v};  // shorthand: a = 1.0
        if (auto v = s.number(prefix + ".value")) return coeff::Constant{*v};
        return fallback;
    }
    const std::string where = "[" + s.name() + "] " + prefix;
    if (*kind == "constant") {
        const auto v = s.number(prefix + ".value");
        if (!v) throw validation_error(where + ".value is required");
        return coeff::Constant{*v};
    }
    if (*kind == "cosine") {
        coeff::Cosine c;
        c.c0 = s.number_or(prefix + ".c0", 1.0);
        c.c1 = s.number_or(prefix + ".c1", 0.0);
        c.modes = parse_modes(s, prefix + ".modes");
        return c;
    }
    if (*kind == "tabulated") {
        if (auto vals = s.numbers(prefix + ".values")) return coeff::Tabulated{*vals};
        if (auto file = s.raw(prefix + ".file")) {
            std::filesystem::path p(*file);
            if (p.is_relative()) p = base / p;
            return coeff::Tabulated{io::read_values_csv(p)};
        }
        throw validation_error(where + ": tabulated needs .values or .file");
    }
    if (*kind == "random" && allow_random) {
        init::Random r;
        r.low = s.number_or(prefix + ".low", r.low);
        r.high = s.number_or(prefix + ".high", r.high);
        return r;
    }
    throw validation_error(where + ".kind: unknown kind '" + *kind + "'");
}

inline CoefficientSpec to_coefficient(const InitSpec& spec) {
    if (const auto* c = std::get_if<coeff::Constant>(&spec)) return *c;
    if (const auto* c = std::get_if<coeff::Cosine>(&spec)) return *c;
    return std::get<coeff::Tabulated>(spec);
}

}  // namespace detail

/// Parses a configuration stream. Relative file references resolve against `base`.
inline RunConfig parse_config(std::istream& in, const std::filesystem::path& base = ".") {
    namespace pt = boost::property_tree;
    // read_ini only knows whole-line comments; drop trailing " # ..." / " ; ..."
    std::ostringstream cleaned;
    for (std::string line; std::getline(in, line);) {
        for (std::size_t k = 1; k < line.size(); ++k)
            if ((line[k] == '#' || line[k] == ';') && (line[k - 1] == ' ' || line[k - 1] == '\t')) {
                line.erase(k);
                break;
            }
        cleaned << line << '\n';
    }
    std::istringstream text(cleaned.str());
    pt::ptree root;
    try {
        pt::read_ini(text, root);
    } catch (const pt::ini_parser_error& e) {
        throw validation_error(std::string("config parse error: ") + e.what());
    }

    RunConfig cfg;
    const detail::Section model(root, "model"), grid(root, "grid"), init(root, "init"), stepper(root, "stepper"),
        solver(root, "solver"), lyap(root, "lyapunov"), check(root, "check"), output(root, "output");

    cfg.params.b = model.number_or("b", cfg.params.b);
    cfg.params.r = model.number_or("r", cfg.params.r);
    cfg.params.mu = model.number_or("mu", cfg.params.mu);
    cfg.params.validate();

    const int dim = grid.integer_or<int>("dim", 1);
    if (dim != 1 && dim != 2) throw validation_error("[grid] dim must be 1 or 2");
    const auto extents = grid.numbers("extents").value_or(std::vector<double>(static_cast<std::size_t>(dim), 1.0));
    const auto counts = grid.numbers("counts").value_or(std::vector<double>(static_cast<std::size_t>(dim), 101.0));
    if (extents.size() != static_cast<std::size_t>(dim) || counts.size() != static_cast<std::size_t>(dim))
        throw validation_error("[grid] extents and counts need one entry per axis");
    for (double c : counts)
        if (c < 3 || c != static_cast<double>(static_cast<long long>(c)))
            throw validation_error("[grid] counts must be integers >= 3");
    cfg.grid = dim == 1 ? Grid::line(extents[0], static_cast<std::size_t>(counts[0]))
                        : Grid::rect(extents[0], extents[1], static_cast<std::size_t>(counts[0]),
                                     static_cast<std::size_t>(counts[1]));

    cfg.a = detail::to_coefficient(detail::parse_profile(model, "a", base, coeff::Constant{1.0}, false));
    cfg.d1 = detail::to_coefficient(detail::parse_profile(model, "d1", base, coeff::Constant{1.0}, false));
    cfg.d2 = detail::to_coefficient(detail::parse_profile(model, "d2", base, coeff::Constant{1.0}, false));

    cfg.seed = init.integer_or<unsigned long long>("seed", default_seed);
    cfg.init_u = detail::parse_profile(init, "u", base, cfg.init_u, true);
    cfg.init_v = detail::parse_profile(init, "v", base, cfg.init_v, true);

    if (auto dt = stepper.raw("dt"); dt && *dt != "auto") cfg.stepper.dt = stepper.number("dt");
    cfg.stepper.t_end = stepper.number_or("t_end", cfg.stepper.t_end);
    cfg.stepper.record_every = stepper.integer_or<std::size_t>("record_every", cfg.stepper.record_every);
    if (auto s = stepper.raw("scheme")) {
        if (*s == "rk4" || *s == "explicit-rk4")
            cfg.stepper.scheme = Scheme::rk4;
        else if (*s == "euler" || *s == "explicit-euler")
            cfg.stepper.scheme = Scheme::euler;
        else
            throw validation_error("[stepper] scheme must be rk4 or euler");
    }
    if (auto s = stepper.raw("snapshots")) cfg.stepper.snapshots = (*s == "true" || *s == "1" || *s == "yes");

    cfg.solver.tol = solver.number_or("tol", cfg.solver.tol);
    cfg.solver.bisection_tol = solver.number_or("bisection_tol", cfg.solver.bisection_tol);
    cfg.solver.iteration_tol = solver.number_or("iteration_tol", cfg.solver.iteration_tol);
    cfg.solver.max_iter = solver.integer_or<long>("max_iter", cfg.solver.max_iter);
    cfg.solver.newton_max_iter = solver.integer_or<int>("newton_max_iter", cfg.solver.newton_max_iter);
    cfg.solver.t_max = solver.number_or("t_max", cfg.solver.t_max);
    cfg.solver.slack = solver.number_or("slack", cfg.solver.slack);
    if (auto m = solver.raw("method")) {
        if (*m != "auto" && *m != "relaxation" && *m != "newton")
            throw validation_error("[solver] method must be auto, relaxation or newton");
        cfg.solver.method = *m;
    }
    if (!(cfg.solver.tol > 0.0) || !(cfg.solver.bisection_tol > 0.0) || !(cfg.solver.iteration_tol > 0.0) ||
        !(cfg.solver.slack > 0.0) || !(cfg.solver.t_max > 0.0))
        throw validation_error("[solver] tolerances, slack and t_max must be > 0");

    cfg.lyapunov.eta = lyap.number("eta");
    cfg.lyapunov.eta_scale = lyap.number_or("eta_scale", 1.0);
    cfg.lyapunov.t_start = lyap.number("t_start");
    if (auto r = lyap.raw("reference")) {
        if (*r != "steady" && *r != "final") throw validation_error("[lyapunov] reference must be steady or final");
        cfg.lyapunov.reference = *r;
    }
    cfg.check_M = check.number("M");

    if (auto d = output.raw("dir")) cfg.out_dir = *d;
    if (auto p = output.raw("prefix")) cfg.prefix = *p;

    // surface coefficient errors at parse time
    (void)cfg.model();
    (void)initial_state(cfg);
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config " + path.string());
    return parse_config(in, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

}  // namespace htlab
