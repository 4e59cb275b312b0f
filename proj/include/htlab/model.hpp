#pragma once

// Problem definition for the heterogeneous Holling-Tanner system
//
//   u_t = d1(x) Δu + u (a(x) - u - b v / (1 + r u))
//   v_t = d2(x) Δv + μ v (1 - v / u)
//
// with no-flux boundaries on an interval or an axis-aligned rectangle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "htlab/errors.hpp"

namespace htlab {

struct KineticParams {
    double b = 0.5;   // predation coefficient
    double r = 0.0;   // saturation coefficient
    double mu = 1.0;  // predator intrinsic rate

    void validate() const {
        if (!(b > 0.0) || !std::isfinite(b)) throw validation_error("kinetic parameter b must be > 0");
        if (!(r >= 0.0) || !std::isfinite(r)) throw validation_error("kinetic parameter r must be >= 0");
        if (!(mu > 0.0) || !std::isfinite(mu)) throw validation_error("kinetic parameter mu must be > 0");
    }
};

/// Uniform node-centred grid on [0,Lx] or [0,Lx]x[0,Ly]; boundary nodes included.
/// Node (i, j) has flat index j * nx + i.
class Grid {
public:
    Grid() = default;

    static Grid line(double length, std::size_t nodes) { return Grid(1, {length, 1.0}, {nodes, 1}); }

    static Grid rect(double lx, double ly, std::size_t nx, std::size_t ny) {
        return Grid(2, {lx, ly}, {nx, ny});
    }

    int dim() const noexcept { return dim_; }
    double extent(int axis) const { return extents_[static_cast<std::size_t>(axis)]; }
    std::size_t count(int axis) const { return counts_[static_cast<std::size_t>(axis)]; }
    double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
    std::size_t nx() const noexcept { return counts_[0]; }
    std::size_t ny() const noexcept { return counts_[1]; }
    std::size_t size() const noexcept { return counts_[0] * counts_[1]; }

    double min_spacing() const noexcept {
        return dim_ == 1 ? spacing_[0] : std::min(spacing_[0], spacing_[1]);
    }

    std::size_t index(std::size_t i, std::size_t j = 0) const noexcept { return j * counts_[0] + i; }

    /// Coordinate of node number `i` along `axis`.
    double coord(int axis, std::size_t i) const { return spacing(axis) * static_cast<double>(i); }

    /// Cartesian position of the node with flat index k.
    std::array<double, 2> position(std::size_t k) const {
        return {coord(0, k % counts_[0]), dim_ == 2 ? coord(1, k / counts_[0]) : 0.0};
    }

    /// Trapezoid quadrature weight of node k (tensor product in 2D).
    double weight(std::size_t k) const {
        auto axis_weight = [this](int axis, std::size_t i) {
            const std::size_t n = count(axis);
            const double h = spacing(axis);
            return (i == 0 || i + 1 == n) ? 0.5 * h : h;
        };
        double w = axis_weight(0, k % counts_[0]);
        if (dim_ == 2) w *= axis_weight(1, k / counts_[0]);
        return w;
    }

    bool operator==(const Grid&) const = default;

private:
    Grid(int dim, std::array<double, 2> extents, std::array<std::size_t, 2> counts)
        : dim_(dim), extents_(extents), counts_(counts) {
        for (int axis = 0; axis < dim_; ++axis) {
            const auto a = static_cast<std::size_t>(axis);
            if (!(extents_[a] > 0.0) || !std::isfinite(extents_[a]))
                throw validation_error("grid extent must be positive and finite");
            if (counts_[a] < 3) throw validation_error("grid needs at least 3 nodes per axis");
            spacing_[a] = extents_[a] / static_cast<double>(counts_[a] - 1);
        }
    }

    int dim_ = 1;
    std::array<double, 2> extents_{1.0, 1.0};
    std::array<std::size_t, 2> counts_{3, 1};
    std::array<double, 2> spacing_{0.5, 1.0};
};

/// Node values over a grid.
struct ScalarField {
    Grid grid;
    std::vector<double> values;

    ScalarField() = default;
    ScalarField(Grid g, double fill) : grid(std::move(g)), values(grid.size(), fill) {}
    ScalarField(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid.size())
            throw validation_error("field length " + std::to_string(values.size()) +
                                   " does not match grid node count " + std::to_string(grid.size()));
    }

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t k) const { return values[k]; }
    double& operator[](std::size_t k) { return values[k]; }
};

/// Throws singularity_error naming the first node where the field is not > 0.
inline void require_positive(const ScalarField& field, const char* name) {
    for (std::size_t k = 0; k < field.size(); ++k) {
        if (!(field[k] > 0.0)) {
            std::ostringstream os;
            os << name << " must be strictly positive; node " << k << " has value " << field[k];
            throw singularity_error(os.str());
        }
    }
}

// ---------------------------------------------------------------------------
// Kinetics

/// Prey kinetics u (y - u - b v / (1 + r u)); y is the local resource a(x).
inline double eval_f(double y, double u, double v, const KineticParams& p) {
    if (!std::isfinite(y) || !std::isfinite(u) || !std::isfinite(v))
        throw precondition_error("eval_f: non-finite input");
    if (u < 0.0) throw precondition_error("eval_f: prey density must be >= 0");
    const double sat = 1.0 + p.r * u;
    if (!(sat > 0.0)) throw precondition_error("eval_f: 1 + r u must be > 0");
    return u * (y - u - p.b * v / sat);
}

/// Predator kinetics μ v (1 - v/u). Singular for u <= 0.
inline double eval_g(double u, double v, const KineticParams& p) {
    if (!(u > 0.0)) throw singularity_error("eval_g: prey density must be > 0 (positivity lost)");
    return p.mu * v * (1.0 - v / u);
}

// Partial derivatives, used by the Lipschitz bound and the Newton Jacobian.
inline double df_du(double y, double u, double v, const KineticParams& p) {
    const double sat = 1.0 + p.r * u;
    return y - 2.0 * u - p.b * v / (sat * sat);
}
inline double df_dv(double u, const KineticParams& p) { return -p.b * u / (1.0 + p.r * u); }
inline double dg_du(double u, double v, const KineticParams& p) { return p.mu * v * v / (u * u); }
inline double dg_dv(double u, double v, const KineticParams& p) { return p.mu * (1.0 - 2.0 * v / u); }

// ---------------------------------------------------------------------------
// Coefficient fields

namespace coeff {

struct Constant {
    double value = 1.0;
};

/// c0 + c1 * prod_axes cos(k_ax π x_ax / L_ax); zero normal derivative on every face.
struct Cosine {
    double c0 = 1.0;
    double c1 = 0.0;
    std::array<int, 2> modes{1, 0};
};

struct Tabulated {
    std::vector<double> values;
};

}  // namespace coeff

using CoefficientSpec = std::variant<coeff::Constant, coeff::Cosine, coeff::Tabulated>;

inline ScalarField build_coefficient(const CoefficientSpec& spec, const Grid& grid) {
    ScalarField field(grid, 0.0);
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, coeff::Constant>) {
                std::fill(field.values.begin(), field.values.end(), s.value);
            } else if constexpr (std::is_same_v<T, coeff::Cosine>) {
                if (!(s.c0 - std::abs(s.c1) > 0.0)) {
                    std::ostringstream os;
                    os << "cosine coefficient requires c0 - |c1| > 0 (got c0=" << s.c0 << ", c1=" << s.c1 << ")";
                    throw validation_error(os.str());
                }
                for (std::size_t k = 0; k < grid.size(); ++k) {
                    const auto x = grid.position(k);
                    double prod = 1.0;
                    for (int axis = 0; axis < grid.dim(); ++axis) {
                        const auto ax = static_cast<std::size_t>(axis);
                        prod *= std::cos(s.modes[ax] * std::numbers::pi * x[ax] / grid.extent(axis));
                    }
                    field[k] = s.c0 + s.c1 * prod;
                }
            } else {
                if (s.values.size() != grid.size())
                    throw validation_error("tabulated coefficient has " + std::to_string(s.values.size()) +
                                           " values, grid has " + std::to_string(grid.size()) + " nodes");
                field.values = s.values;
            }
        },
        spec);
    for (std::size_t k = 0; k < field.size(); ++k) {
        if (!(field[k] > 0.0) || !std::isfinite(field[k])) {
            std::ostringstream os;
            os << "coefficient is not strictly positive at node " << k << " (value " << field[k] << ")";
            throw validation_error(os.str());
        }
    }
    return field;
}

/// (min, max) over the nodes; for the resource field this is (a_min, a_max).
inline std::pair<double, double> coeff_extremes(const ScalarField& field) {
    if (field.values.empty()) throw precondition_error("coeff_extremes: empty field");
    const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
    return {*lo, *hi};
}

// ---------------------------------------------------------------------------

struct DiffusionExtremes {
    double d1_min = 1.0;
    double d1_max = 1.0;
    double d2_min = 1.0;
    double d2_max = 1.0;

    /// (min d1 min d2) / (max d1 max d2)
    double ratio() const { return (d1_min * d2_min) / (d1_max * d2_max); }
};

struct ModelSpec {
    KineticParams params;
    ScalarField a;
    ScalarField d1;
    ScalarField d2;

    ModelSpec() = default;
    ModelSpec(KineticParams p, ScalarField a_, ScalarField d1_, ScalarField d2_)
        : params(p), a(std::move(a_)), d1(std::move(d1_)), d2(std::move(d2_)) {
        validate();
    }

    /// Builds all three coefficient fields on one grid.
    static ModelSpec build(const KineticParams& p, const Grid& grid, const CoefficientSpec& a,
                           const CoefficientSpec& d1, const CoefficientSpec& d2) {
        return ModelSpec(p, build_coefficient(a, grid), build_coefficient(d1, grid), build_coefficient(d2, grid));
    }

    const Grid& grid() const noexcept { return a.grid; }

    void validate() const {
        params.validate();
        if (!(a.grid == d1.grid) || !(a.grid == d2.grid))
            throw validation_error("coefficient fields a, d1, d2 must share one grid");
        if (a.size() != a.grid.size() || d1.size() != a.grid.size() || d2.size() != a.grid.size())
            throw validation_error("coefficient field length mismatch");
        for (const auto* f : {&a, &d1, &d2})
            for (double x : f->values)
                if (!(x > 0.0)) throw validation_error("coefficient fields must be strictly positive");
    }

    std::pair<double, double> a_extremes() const { return coeff_extremes(a); }

    DiffusionExtremes diffusion_extremes() const {
        const auto [d1lo, d1hi] = coeff_extremes(d1);
        const auto [d2lo, d2hi] = coeff_extremes(d2);
        return {d1lo, d1hi, d2lo, d2hi};
    }
};

struct State {
    ScalarField u;
    ScalarField v;
    double t = 0.0;
};

/// Spatially constant state on a grid.
inline State constant_state(const Grid& grid, double u, double v, double t = 0.0) {
    return {ScalarField(grid, u), ScalarField(grid, v), t};
}

}  // namespace htlab
