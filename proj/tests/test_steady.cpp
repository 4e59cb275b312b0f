#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "htlab/bounds.hpp"
#include "htlab/steady.hpp"

using namespace htlab;

namespace {

ModelSpec homogeneous(const Grid& g, double a, const KineticParams& p) {
    return ModelSpec::build(p, g, coeff::Constant{a}, coeff::Constant{1.0}, coeff::Constant{1.0});
}

ModelSpec heterogeneous(const Grid& g) {
    return ModelSpec::build({0.05, 0.0, 1.0}, g, coeff::Cosine{1.05, 0.05, {1, 0}}, coeff::Constant{1.0},
                            coeff::Constant{1.0});
}

const BoundQuadruple& het_box() {
    static const BoundQuadruple q = quadruple_closed_r0(1.0, 1.1, 0.05);
    return q;
}

}  // namespace

TEST(Residual, Examples) {
    const KineticParams p{0.5, 1.0, 1.0};
    const Grid g = Grid::line(1.0, 21);
    const auto m = homogeneous(g, 1.0, p);
    const double us = homogeneous_steady(1.0, p.b, p.r);
    ScalarField u(g, us), v(g, us);
    EXPECT_LT(residual_esp3(u, v, m), 1e-12);

    u[7] += 1e-3;
    const double h2 = g.spacing(0) * g.spacing(0);
    // diffusion response of the perturbed node dominates: 2e-3 / h^2
    EXPECT_NEAR(residual_esp3(u, v, m), 2e-3 / h2, 1e-3 * (1 + std::abs(df_du(1.0, us, us, p))) + 1e-9);
    u[7] = 0.0;
    EXPECT_THROW(residual_esp3(u, v, m), singularity_error);
}

TEST(Relaxation, HomogeneousOracle) {
    const KineticParams p{0.5, 1.0, 1.0};
    const Grid g = Grid::line(1.0, 101);
    const auto m = homogeneous(g, 1.0, p);
    const auto res = steady_by_relaxation(m, constant_state(g, 0.3, 1.4), 1e-9, 500.0);
    ASSERT_TRUE(res.converged) << res.message;
    EXPECT_LT(res.residual_sup, 1e-8);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_NEAR(res.u_star[k], 0.7807764, 1e-6);
        EXPECT_NEAR(res.v_star[k], 0.7807764, 1e-6);
    }
}

TEST(Relaxation, HeterogeneousNonconstantAndContained) {
    const Grid g = Grid::line(1.0, 51);
    const auto m = heterogeneous(g);
    const auto res = steady_by_relaxation(m, midpoint_guess(m, het_box()), 1e-10, 1000.0);
    ASSERT_TRUE(res.converged) << res.message;
    const auto [lo, hi] = coeff_extremes(res.u_star);
    EXPECT_GT(hi - lo, 1e-3);
    EXPECT_TRUE(check_containment(res, het_box(), 1e-6).holds);
}

TEST(Relaxation, UniqueAttractorFromDifferentStarts) {
    const Grid g = Grid::line(1.0, 41);
    const auto m = heterogeneous(g);
    const auto r1 = steady_by_relaxation(m, constant_state(g, 0.2, 0.2), 1e-10, 1000.0);
    State s2 = constant_state(g, 1.5, 1.5);
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> U(0.1, 2.0);
    for (std::size_t k = 0; k < g.size(); ++k) s2.v[k] = U(rng);
    const auto r2 = steady_by_relaxation(m, s2, 1e-10, 1000.0);
    ASSERT_TRUE(r1.converged && r2.converged);
    EXPECT_LT(sup_distance(r1.u_star.values, r2.u_star.values), 1e-5);
    EXPECT_LT(sup_distance(r1.v_star.values, r2.v_star.values), 1e-5);
}

TEST(Relaxation, NonConvergenceIsReported) {
    const Grid g = Grid::line(1.0, 21);
    const auto m = heterogeneous(g);
    const auto res = steady_by_relaxation(m, constant_state(g, 0.2, 1.5), 1e-12, 0.5);
    EXPECT_FALSE(res.converged);
    EXPECT_NE(res.message.find("not-converged"), std::string::npos);
    EXPECT_NEAR(res.t_final, 0.5, 1e-12);
    EXPECT_GT(res.residual_sup, 1e-12);
}

TEST(Newton, ExactStateConvergesInOneIteration) {
    const KineticParams p{0.5, 1.0, 1.0};
    const Grid g = Grid::line(1.0, 31);
    const auto m = homogeneous(g, 1.0, p);
    const double us = homogeneous_steady(1.0, p.b, p.r);
    const auto res = steady_newton_1d(m, constant_state(g, us, us), 1e-10, 20);
    ASSERT_TRUE(res.converged);
    EXPECT_EQ(res.iterations, 1u);
    ASSERT_EQ(res.update_norms.size(), 1u);
    EXPECT_LT(res.update_norms[0], 1e-14);
}

TEST(Newton, AgreesWithRelaxation) {
    const Grid g = Grid::line(1.0, 51);
    const auto m = heterogeneous(g);
    const auto nr = steady_newton_1d(m, midpoint_guess(m, het_box()), 1e-12, 50);
    ASSERT_TRUE(nr.converged) << nr.message;
    const auto rr = steady_by_relaxation(m, midpoint_guess(m, het_box()), 1e-11, 2000.0);
    ASSERT_TRUE(rr.converged) << rr.message;
    EXPECT_LT(sup_distance(nr.u_star.values, rr.u_star.values), 1e-8);
    EXPECT_LT(sup_distance(nr.v_star.values, rr.v_star.values), 1e-8);
    EXPECT_TRUE(check_containment(nr, het_box(), 1e-6).holds);
}

TEST(Newton, QuadraticConvergence) {
    const Grid g = Grid::line(1.0, 41);
    const auto m = ModelSpec::build({0.3, 0.5, 1.2}, g, coeff::Cosine{1.1, 0.1, {2, 0}}, coeff::Constant{0.5},
                                    coeff::Cosine{1.0, 0.3, {1, 0}});
    const auto q = solve_quadruple(1.0, 1.2, 0.3, 0.5);
    // 1e-12 sits just above the roundoff floor of the discrete residual here
    const auto res = steady_newton_1d(m, midpoint_guess(m, q), 1e-12, 50);
    ASSERT_TRUE(res.converged) << res.message;
    const auto& e = res.update_norms;
    ASSERT_GE(e.size(), 3u);
    // once in the basin, e_{k+1} / e_k^2 stays bounded
    for (std::size_t k = 0; k + 1 < e.size(); ++k) {
        if (e[k] > 1e-2 || e[k + 1] < 1e-14) continue;
        EXPECT_LT(e[k + 1] / (e[k] * e[k]), 1e3);
    }
    EXPECT_TRUE(check_containment(res, q, 1e-6 + 10 * g.spacing(0) * g.spacing(0)).holds);
}

TEST(Newton, RejectsTwoDimensions) {
    const Grid g = Grid::rect(1, 1, 5, 5);
    const auto m = homogeneous(g, 1.0, {0.5, 0.0, 1.0});
    EXPECT_THROW(steady_newton_1d(m, constant_state(g, 0.5, 0.5), 1e-10, 10), precondition_error);
}

TEST(Newton, IterationBudgetExhaustedSignalsFallback) {
    const Grid g = Grid::line(1.0, 51);
    const auto m = heterogeneous(g);
    const auto res = steady_newton_1d(m, constant_state(g, 0.2, 1.9), 1e-13, 1);
    EXPECT_FALSE(res.converged);
    EXPECT_NE(res.message.find("relaxation"), std::string::npos);
}

TEST(Relaxation, TwoDimensionalHeterogeneous) {
    const Grid g = Grid::rect(1.0, 1.0, 13, 13);
    const auto m = ModelSpec::build({0.05, 0.0, 1.0}, g, coeff::Cosine{1.05, 0.05, {1, 1}}, coeff::Constant{1.0},
                                    coeff::Constant{1.0});
    const auto res = steady_by_relaxation(m, midpoint_guess(m, het_box()), 1e-10, 1000.0);
    ASSERT_TRUE(res.converged) << res.message;
    EXPECT_TRUE(check_containment(res, het_box(), 1e-6).holds);
}

TEST(Containment, Examples) {
    const Grid g = Grid::line(1.0, 11);
    SteadyResult hom;
    hom.u_star = ScalarField(g, 2.0 / 3.0);
    hom.v_star = ScalarField(g, 2.0 / 3.0);
    const auto q0 = quadruple_closed_r0(1.0, 1.0, 0.5);
    auto v = check_containment(hom, q0, 1e-12);
    EXPECT_TRUE(v.holds);
    EXPECT_EQ(v.worst_violation, 0.0);

    const Grid g51 = Grid::line(1.0, 51);
    const auto m = heterogeneous(g51);
    auto res = steady_newton_1d(m, midpoint_guess(m, het_box()), 1e-12, 50);
    ASSERT_TRUE(res.converged);
    EXPECT_TRUE(check_containment(res, het_box(), 1e-6).holds);

    res.u_star[17] += het_box().u_hi;
    v = check_containment(res, het_box(), 1e-6);
    EXPECT_FALSE(v.holds);
    EXPECT_EQ(v.worst_node, 17u);
    EXPECT_NEAR(v.worst_violation, het_box().u_hi, 0.1);
}
