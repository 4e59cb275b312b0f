#pragma once

// CSV and JSON artifacts. Every floating-point value is written with 17
// significant digits so that re-reading reproduces it exactly.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "htlab/errors.hpp"
#include "htlab/lyapunov.hpp"
#include "htlab/model.hpp"
#include "htlab/pde.hpp"
#include "json.hpp"

namespace htlab::io {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw error("cannot open " + path.string() + " for writing");
    return os;
}

/// Splits on commas and whitespace; empty tokens are skipped.
inline std::vector<double> parse_numbers(std::string_view text) {
    std::vector<double> out;
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size()) throw validation_error("not a number: '" + token + "'");
        out.push_back(x);
        token.clear();
    };
    for (char c : text) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\n' || c == '\r')
            flush();
        else
            token.push_back(c);
    }
    flush();
    return out;
}

/// Field as a CSV matrix: one line per y row (a single line in 1D).
inline void write_field_csv(const std::filesystem::path& path, const ScalarField& field) {
    auto os = open_out(path);
    const std::size_t nx = field.grid.nx();
    const std::size_t ny = field.grid.dim() == 2 ? field.grid.ny() : 1;
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) os << (i ? "," : "") << fmt(field[j * nx + i]);
        os << '\n';
    }
}

inline std::vector<double> read_values_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw validation_error("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_numbers(ss.str());
}

inline ScalarField read_field_csv(const std::filesystem::path& path, const Grid& grid) {
    return ScalarField(grid, read_values_csv(path));
}

/// Header t,u_min,u_max,v_min,v_max,rhs_sup with G,disc_margin appended when observed.
inline void write_trace_csv(const std::filesystem::path& path, const SimulationTrace& trace) {
    auto os = open_out(path);
    const bool observed = !trace.records.empty() && trace.records.front().G.has_value();
    os << "t,u_min,u_max,v_min,v_max,rhs_sup" << (observed ? ",G,disc_margin" : "") << '\n';
    for (const auto& r : trace.records) {
        os << fmt(r.t) << ',' << fmt(r.u_min) << ',' << fmt(r.u_max) << ',' << fmt(r.v_min) << ',' << fmt(r.v_max)
           << ',' << fmt(r.rhs_sup);
        if (observed) os << ',' << fmt(r.G.value_or(0.0)) << ',' << fmt(r.disc_margin.value_or(0.0));
        os << '\n';
    }
}

/// <prefix>_u_<index>.csv and <prefix>_v_<index>.csv for every kept state.
inline void write_snapshots(const std::filesystem::path& dir, const std::string& prefix,
                            const SimulationTrace& trace) {
    for (std::size_t i = 0; i < trace.states.size(); ++i) {
        write_field_csv(dir / (prefix + "_u_" + std::to_string(i) + ".csv"), trace.states[i].u);
        write_field_csv(dir / (prefix + "_v_" + std::to_string(i) + ".csv"), trace.states[i].v);
    }
}

inline void write_monitor_csv(const std::filesystem::path& path, const DecreaseReport& rep) {
    auto os = open_out(path);
    os << "t,G,dG,min_margin,min_margin_node\n";
    for (const auto& r : rep.rows)
        os << fmt(r.t) << ',' << fmt(r.G) << ',' << fmt(r.dG) << ',' << fmt(r.min_margin) << ',' << r.min_margin_node
           << '\n';
}

inline nlohmann::json grid_json(const Grid& g) {
    nlohmann::json j;
    j["dim"] = g.dim();
    j["extents"] = g.dim() == 1 ? nlohmann::json::array({g.extent(0)}) : nlohmann::json::array({g.extent(0), g.extent(1)});
    j["counts"] = g.dim() == 1 ? nlohmann::json::array({g.nx()}) : nlohmann::json::array({g.nx(), g.ny()});
    return j;
}

inline nlohmann::json params_json(const KineticParams& p) { return {{"b", p.b}, {"r", p.r}, {"mu", p.mu}}; }

inline nlohmann::json quadruple_json(const BoundQuadruple& q) {
    return {{"u_lo", q.u_lo}, {"u_hi", q.u_hi}, {"v_lo", q.v_lo}, {"v_hi", q.v_hi}};
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    auto os = open_out(path);
    os << j.dump(2) << '\n';
}

}  // namespace htlab::io
