#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "htlab/bounds.hpp"
#include "htlab/lyapunov.hpp"

using namespace htlab;

namespace {

constexpr double pi = std::numbers::pi;

ModelSpec homogeneous(const Grid& g, double a, const KineticParams& p) {
    return ModelSpec::build(p, g, coeff::Constant{a}, coeff::Constant{1.0}, coeff::Constant{1.0});
}

ScalarField cosine_series(const Grid& g, double c0, const std::vector<std::pair<int, double>>& terms) {
    ScalarField w(g, c0);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (auto [k, c] : terms) w[i] += c * std::cos(k * pi * g.coord(0, i) / g.extent(0));
    return w;
}

double green_defect(std::size_t n, const std::vector<std::pair<int, double>>& tw,
                    const std::vector<std::pair<int, double>>& ts) {
    const Grid g = Grid::line(1.0, n);
    const auto [lhs, rhs] = green_inequality_check(cosine_series(g, 1.0, tw), cosine_series(g, 1.0, ts));
    return std::abs(lhs - rhs);
}

}  // namespace

TEST(Eta, DefaultAndScalings) {
    const auto q = quadruple_closed_r0(1.0, 1.0, 0.5);
    const DiffusionExtremes d{};
    EXPECT_NEAR(eta_default(q, d, {0.5, 0.0, 1.0}), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(eta_default(q, d, {0.5, 0.0, 2.0}), 1.0 / 6.0, 1e-15);
    // eta scales like (d1_min d1_max)^(-1/2)
    EXPECT_NEAR(eta_default(q, {2.0, 2.0, 1.0, 1.0}, {0.5, 0.0, 1.0}), 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(eta_default(q, {4.0, 4.0, 1.0, 1.0}, {0.5, 0.0, 1.0}), 1.0 / 12.0, 1e-15);

    // simplified form with v_lo = u_lo, v_hi = u_hi
    const auto q2 = solve_quadruple(1.0, 1.3, 0.4, 0.7);
    const DiffusionExtremes d2{0.5, 2.0, 0.3, 1.1};
    const KineticParams p{0.4, 0.7, 1.7};
    const double simplified = std::sqrt(d2.d2_min * d2.d2_max / (d2.d1_min * d2.d1_max)) *
                              std::sqrt(std::pow(q2.u_lo, 3) / q2.u_hi) * p.b / (p.mu * (1 + p.r * q2.u_lo));
    EXPECT_NEAR(eta_default(q2, d2, p), simplified, 1e-14);
}

TEST(LyapunovValue, Examples) {
    const Grid g = Grid::line(1.0, 3);
    const auto m = homogeneous(g, 1.0, {0.5, 0.0, 1.0});
    LyapunovConfig cfg{1.0 / 3.0, ScalarField(g, 1.0), ScalarField(g, 1.0)};
    EXPECT_EQ(lyapunov_value(constant_state(g, 1.0, 1.0), cfg, m), 0.0);
    EXPECT_NEAR(lyapunov_value(constant_state(g, 2.0, 1.0), cfg, m), 1.0 - std::log(2.0), 1e-15);
    EXPECT_NEAR(1.0 - std::log(2.0), 0.3069, 1e-4);
    EXPECT_NEAR(lyapunov_value(constant_state(g, 1.0, 2.0), cfg, m), (1.0 - std::log(2.0)) / 3.0, 1e-15);
    EXPECT_THROW(lyapunov_value(constant_state(g, 1.0, 0.0), cfg, m), singularity_error);
}

TEST(LyapunovValue, PositiveAwayFromReference) {
    const Grid g = Grid::line(2.0, 17);
    const auto m = ModelSpec::build({0.5, 0.0, 1.0}, g, coeff::Constant{1.0}, coeff::Cosine{1.0, 0.5, {1, 0}},
                                    coeff::Constant{0.7});
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> U(0.2, 2.0);
    LyapunovConfig cfg{0.4, ScalarField(g, 0.0), ScalarField(g, 0.0)};
    for (auto* f : {&cfg.u_ref, &cfg.v_ref})
        for (double& x : f->values) x = U(rng);
    const State ref{cfg.u_ref, cfg.v_ref, 0.0};
    EXPECT_EQ(lyapunov_value(ref, cfg, m), 0.0);
    for (int trial = 0; trial < 100; ++trial) {
        State s = ref;
        const std::size_t k = static_cast<std::size_t>(trial) % g.size();
        (trial % 2 ? s.u : s.v)[k] *= 1.0 + 1e-4 * (1 + trial);
        EXPECT_GT(lyapunov_value(s, cfg, m), 0.0);
    }
}

TEST(EntropyDensity, MatchesDirectForm) {
    for (double s : {0.1, 0.5, 0.99, 1.7, 5.0}) {
        const double sr = 0.8;
        EXPECT_NEAR(entropy_density(s, sr), s - sr - sr * std::log(s / sr), 1e-14);
    }
    EXPECT_EQ(entropy_density(1.3, 1.3), 0.0);
    EXPECT_GT(entropy_density(1.3 + 1e-9, 1.3), 0.0);
}

TEST(Discriminant, HomogeneousExample) {
    const double s = 2.0 / 3.0;
    const auto d = discriminant_margin(s, s, s, s, 1.0, 1.0, {0.5, 0.0, 1.0}, 1.0 / 3.0);
    EXPECT_NEAR(d.A, -8.0 / 27.0, 1e-15);
    EXPECT_NEAR(d.C, -4.0 / 27.0, 1e-15);
    EXPECT_NEAR(d.B, 0.0, 1e-15);
    EXPECT_TRUE(d.definite_setup);
    EXPECT_NEAR(d.margin, 2.0 * std::sqrt(32.0 / 729.0), 1e-14);
    EXPECT_NEAR(d.margin, 0.4190, 1e-4);
}

TEST(Discriminant, LeslieGowerAIndependentOfB) {
    for (double b : {0.1, 0.5, 0.9}) {
        const auto d = discriminant_margin(0.7, 0.9, 0.8, 0.6, 1.3, 0.4, {b, 0.0, 1.0}, 0.5);
        EXPECT_NEAR(d.A, -0.4 * 0.7 * 0.64, 1e-15);
    }
}

TEST(Discriminant, LargeEtaTurnsMarginNegative) {
    const double s = 2.0 / 3.0;
    const KineticParams p{0.5, 0.0, 1.0};
    EXPECT_GT(discriminant_margin(s, s, s, s, 1.0, 1.0, p, 1.0 / 3.0).margin, 0.0);
    const auto big = discriminant_margin(s, s, s, s, 1.0, 1.0, p, 1e3);
    EXPECT_GT(big.B, 0.0);
    EXPECT_LT(big.margin, 0.0);
    // B is affine in eta, sqrt(AC) grows like sqrt(eta)
    double prev = std::numeric_limits<double>::infinity();
    for (double eta : {10.0, 20.0, 40.0, 80.0}) {
        const double m = discriminant_margin(s, s, s, s, 1.0, 1.0, p, eta).margin;
        EXPECT_LT(m, prev);
        prev = m;
    }
}

TEST(Discriminant, BVanishesAtHomogeneousSteadyStateWithDefaultEta) {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> U(0.05, 0.95);
    for (int i = 0; i < 50; ++i) {
        const KineticParams p{U(rng), 3.0 * U(rng), 0.2 + 2.0 * U(rng)};
        const double a = 0.5 + U(rng), d1 = 0.1 + U(rng), d2 = 0.1 + U(rng);
        const auto q = solve_quadruple(a, a, p.b, p.r);
        const double eta = eta_default(q, {d1, d1, d2, d2}, p);
        const double s = q.u_lo;
        const auto d = discriminant_margin(s, s, s, s, d1, d2, p, eta);
        EXPECT_NEAR(d.B, 0.0, 1e-13);
    }
}

TEST(Discriminant, BracketSignFlag) {
    // 1 + r u < b r v* drives A positive
    const auto d = discriminant_margin(0.1, 1.0, 0.1, 50.0, 1.0, 1.0, {0.9, 1.0, 1.0}, 1.0);
    EXPECT_GT(d.A, 0.0);
    EXPECT_FALSE(d.definite_setup);
    EXPECT_EQ(d.margin, -std::numeric_limits<double>::infinity());
}

TEST(Monitor, SteadyTraceIsFlat) {
    const Grid g = Grid::line(1.0, 11);
    const KineticParams p{0.5, 0.0, 1.0};
    const auto m = homogeneous(g, 1.0, p);
    const double s = 2.0 / 3.0;
    LyapunovConfig cfg{1.0 / 3.0, ScalarField(g, s), ScalarField(g, s)};
    const auto tr = simulate(m, constant_state(g, s, s), {max_stable_dt(m), 1.0, 20, Scheme::rk4, true});
    const auto rep = monitor_decrease(tr, cfg, m, 0.0);
    EXPECT_EQ(rep.rows.size(), tr.size());
    for (const auto& r : rep.rows) EXPECT_EQ(r.G, 0.0);
    EXPECT_EQ(rep.max_jump, 0.0);
    EXPECT_TRUE(rep.nonincreasing);
    EXPECT_GT(rep.min_margin, 0.0);
}

TEST(Monitor, HomogeneousRelaxationDecreases) {
    const Grid g = Grid::line(1.0, 21);
    const KineticParams p{0.5, 1.0, 1.0};
    const auto m = homogeneous(g, 1.0, p);
    const auto q = solve_quadruple(1.0, 1.0, p.b, p.r);
    const double s = q.u_lo;
    LyapunovConfig cfg{eta_default(q, m.diffusion_extremes(), p), ScalarField(g, s), ScalarField(g, s)};
    State init = constant_state(g, 0.0, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k) {
        init.u[k] = 0.4 + 0.3 * std::cos(pi * g.coord(0, k));
        init.v[k] = 1.2 - 0.2 * std::cos(2 * pi * g.coord(0, k));
    }
    const auto tr = simulate(m, init, {max_stable_dt(m), 60.0, 200, Scheme::rk4, true}, make_observers(cfg, m));
    const auto entry = box_entry_time(tr, q, 1e-3);
    ASSERT_TRUE(entry.has_value());
    const auto rep = monitor_decrease(tr, cfg, m, *entry);
    EXPECT_GE(rep.rows.size(), 2u);
    EXPECT_TRUE(rep.nonincreasing) << rep.max_jump;
    EXPECT_LT(rep.rows.back().G, rep.rows.front().G);
    EXPECT_GT(rep.min_margin, 0.0);
    // observers agree with the monitor
    EXPECT_DOUBLE_EQ(*tr.back().G, rep.rows.back().G);
    EXPECT_DOUBLE_EQ(*tr.back().disc_margin, rep.rows.back().min_margin);
}

TEST(Monitor, RequiresSnapshots) {
    const Grid g = Grid::line(1.0, 5);
    const auto m = homogeneous(g, 1.0, {0.5, 0.0, 1.0});
    LyapunovConfig cfg{1.0, ScalarField(g, 0.5), ScalarField(g, 0.5)};
    const auto tr = simulate(m, constant_state(g, 0.5, 0.5), {max_stable_dt(m), 0.1, 1, Scheme::rk4, false});
    EXPECT_THROW(monitor_decrease(tr, cfg, m, 0.0), precondition_error);
    cfg.eta = 0.0;
    EXPECT_THROW(cfg.validate(), validation_error);
}

TEST(Green, TrivialCases) {
    const Grid g = Grid::line(1.0, 33);
    const auto w = cosine_series(g, 1.0, {{1, 0.3}});
    auto [l, r] = green_inequality_check(w, w);
    EXPECT_NEAR(l, 0.0, 1e-13);
    EXPECT_NEAR(r, 0.0, 1e-13);
    std::tie(l, r) = green_inequality_check(ScalarField(g, 2.0), ScalarField(g, 0.7));
    EXPECT_EQ(l, 0.0);
    EXPECT_EQ(r, 0.0);
}

TEST(Green, SpecPairSecondOrderDefect) {
    const std::vector<std::pair<int, double>> tw{{1, 0.3}}, ts{{2, 0.2}};
    const double e1 = green_defect(65, tw, ts), e2 = green_defect(129, tw, ts), e3 = green_defect(257, tw, ts);
    EXPECT_GT(e1 / e2, 3.5);
    EXPECT_LT(e1 / e2, 4.5);
    EXPECT_GT(e2 / e3, 3.5);
    EXPECT_LT(e2 / e3, 4.5);
    const Grid g = Grid::line(1.0, 129);
    const auto [lhs, rhs] = green_inequality_check(cosine_series(g, 1.0, tw), cosine_series(g, 1.0, ts));
    EXPECT_LT(lhs, 0.0);
    EXPECT_LE(lhs, rhs + 10.0 * g.spacing(0) * g.spacing(0));
}

TEST(Green, EdgeIdentityIsExact) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> U(0.3, 2.0);
    for (const Grid& g : {Grid::line(1.3, 19), Grid::rect(1.0, 0.7, 9, 6)}) {
        for (int trial = 0; trial < 10; ++trial) {
            ScalarField w(g, 0.0), ws(g, 0.0);
            for (std::size_t k = 0; k < g.size(); ++k) {
                w[k] = U(rng);
                ws[k] = U(rng);
            }
            const double lhs = green_inequality_check(w, ws).first;
            const double edge = green_edge_rhs(w, ws);
            EXPECT_LE(edge, 0.0);
            EXPECT_NEAR(lhs, edge, 1e-10 * (1 + std::abs(edge)));
        }
    }
}
