#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "syncstab/config.hpp"
#include "syncstab/metrics.hpp"
#include "syncstab/perturbation.hpp"

using namespace syncstab;
using syncstab::test::alpha_to_ls;
using syncstab::test::star_plant;

namespace {

constexpr double kPi = std::numbers::pi;

NetworkTopology star_topo(int n, double l_c, double l_s, double l_g) {
    NetworkTopology t;
    for (int i = 0; i < n; ++i) t.gflc_branches.push_back({0.0, l_c});
    if (l_s > 0.0) t.syncon_branches = {{0.0, l_s}};
    t.grid_branch = {0.0, l_g};
    return t;
}

FastContext ctx_of(double u_e, double theta_delta, double p_m) {
    FastContext c;
    c.u_e = u_e;
    c.theta_delta = theta_delta;
    c.p_m = c.q_x = p_m;
    return c;
}

// Composite Simpson over [a, b].
template <class F>
double simpson(const F& f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

StabilityReport classify_fixture(const std::string& name, int decimation = 0) {
    const ScenarioConfig cfg = parse_scenario_file(test::fixture(name));
    Scenario sc = cfg.build();
    if (decimation > 0) sc.sim.decimation = decimation;
    return classify_instability(simulate(sc), sc, cfg.classify);
}

}  // namespace

TEST(PmciStar, ZeroCurrents) {
    const Currents c{{0, 0}, {0, 0}};
    EXPECT_EQ(pmci_star(star_topo(2, 0.05, 0.4, 0.85), c, 0), 0.0);
    EXPECT_EQ(pmci_star(star_topo(2, 0.05, 0.0, 0.85), c, 0), 0.0);
}

TEST(PmciStar, VanishesAsSynconDominates) {
    const double lg = 0.85, alpha = 1 - 1e-9;
    const Currents c{{0.5, 0.5}, {0, 0}};
    const double p = pmci_star(star_topo(2, 0.05, alpha_to_ls(alpha, lg), lg), c, 0);
    // Only the converter's own branch survives: (1 - a) gamma -> L_c.
    EXPECT_NEAR(p, 0.05 * 0.5, 1e-8);
    const double p0 = pmci_star(star_topo(2, 0.05, 0.0, lg), c, 0);
    EXPECT_LT(p, 0.1 * p0);
}

TEST(PmciStar, ClosedFormsWithAndWithoutSyncon) {
    const double lc = 0.05, lg = 0.85, id = 0.5, ij = 0.5;
    const Currents c{{id, ij}, {0, 0}};
    EXPECT_NEAR(pmci_star(star_topo(2, lc, 0.0, lg), c, 0), (lc + lg) * id + lg * ij, 1e-14);
    const double alpha = 0.64, ls = alpha_to_ls(alpha, lg);
    const double gamma = (lc * lg + lc * ls + ls * lg) / ls;
    EXPECT_NEAR(pmci_star(star_topo(2, lc, ls, lg), c, 0), (1 - alpha) * (gamma * id + lg * ij), 1e-12);
}

TEST(PmciStar, AgreesWithNetworkContext) {
    const Plant pl = star_plant(3, alpha_to_ls(0.5, 0.85));
    const Currents c = pl.steady_currents();
    EXPECT_NEAR(pmci_star(pl.topo, c, 1), fast_context(pl, c, 1, {0.0}).p_m, 1e-12);
}

TEST(SolveSep, TrivialCases) {
    EXPECT_NEAR(solve_sep(ctx_of(1.0, 0.0, 0.0)).theta_star, 0.0, 1e-15);
    EXPECT_NEAR(solve_sep(ctx_of(1.2, 0.0, 0.6)).theta_star, kPi / 6, 1e-14);
    EXPECT_FALSE(solve_sep(ctx_of(1.0, 0.0, 1.01)).exists);
}

TEST(SolveSep, AgreesWithGridScan) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ue(0.2, 1.5), td(-kPi, kPi), frac(-0.95, 0.95);
    for (int k = 0; k < 100; ++k) {
        const FastContext c = ctx_of(ue(rng), td(rng), 0.0);
        FastContext cc = c;
        cc.p_m = frac(rng) * c.u_e;
        const SepSolution s = solve_sep(cc);
        ASSERT_TRUE(s.exists);
        // Stable root: g decreasing, within a quarter turn of theta_delta.
        auto g = [&](double th) { return cc.p_m - cc.p_e(th); };
        double lo = cc.theta_delta - kPi / 2, prev = g(lo), root = 0.0;
        bool found = false;
        for (double th = lo + 1e-4; th <= cc.theta_delta + kPi / 2 && !found; th += 1e-4) {
            const double cur = g(th);
            if (prev >= 0.0 && cur < 0.0) {
                double a = th - 1e-4, b = th;
                for (int it = 0; it < 80; ++it) {
                    const double m = 0.5 * (a + b);
                    (g(m) >= 0.0 ? a : b) = m;
                }
                root = 0.5 * (a + b);
                found = true;
            }
            prev = cur;
        }
        ASSERT_TRUE(found);
        EXPECT_NEAR(s.theta_star, root, 1e-6);
    }
}

TEST(ThetaB, Cases) {
    EXPECT_NEAR(theta_b(12, 100, 314, 0.0, 1.0), kPi / 2, 1e-15);
    EXPECT_NEAR(theta_b(12, 100, 314, 12 * 314 / 100.0 * 0.9, 0.9), 0.0, 1e-7);
    EXPECT_THROW(theta_b(12, 100, 314, 40.0, 1.0), NoPositiveDampingRegion);
    EXPECT_NEAR(theta_b(12, 100, 314, -40.0, 1.0), kPi, 0.0);
}

TEST(ThetaB, NonIncreasingInForcing) {
    double prev = kPi;
    for (double p = -37.0; p <= 37.6; p += 0.05) {
        const double t = theta_b(12, 100, 314, p, 1.0);
        EXPECT_LE(t, prev + 1e-15);
        prev = t;
    }
}

TEST(Energy, ZeroAtSep) {
    const FastContext c = ctx_of(0.9, 0.3, 0.4);
    EXPECT_NEAR(energy(c, solve_sep(c).theta_star, 0.0), 0.0, 1e-15);
}

TEST(Energy, FullTurnLeavesOnlyWork) {
    const FastContext c = ctx_of(0.9, 0.3, 0.4);
    EXPECT_NEAR(energy(c, solve_sep(c).theta_star + 2 * kPi, 0.0), -2 * kPi * 0.4, 1e-12);
}

TEST(Energy, MatchesQuadrature) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> th(-4, 4), w(-50, 50), pm(-0.5, 0.5);
    for (int k = 0; k < 20; ++k) {
        FastContext c = ctx_of(1.0, 0.2, pm(rng));
        c.q_x = 0.3;
        const double t = th(rng), v = w(rng), ts = solve_sep(c).theta_star;
        const double integral = simpson([&](double x) { return c.p_e(x) - c.p_m; }, ts, t);
        EXPECT_NEAR(energy(c, t, v), 0.5 * c.t_star() * v * v + integral, 1e-8);
    }
}

TEST(Energy, UndefinedWithoutSep) { EXPECT_THROW(energy(ctx_of(0.5, 0.0, 0.7), 0.0, 0.0), UndefinedEnergy); }

TEST(Energy, PositiveInPrincipalWellExceptSep) {
    const FastContext c = ctx_of(1.0, 0.1, 0.3);
    const double ts = solve_sep(c).theta_star, uep = uep_angle(c, 0.0);
    for (double t = uep - 2 * kPi + 1e-3; t < uep; t += 1e-3)
        for (double v : {0.0, 0.5, -3.0}) {
            if (std::abs(t - ts) < 2e-3 && v == 0.0) continue;
            EXPECT_GT(energy(c, t, v), 0.0) << t << " " << v;
        }
}

TEST(EnergyRate, Cases) {
    FastContext c = ctx_of(1.0, 0.0, 0.3);
    EXPECT_EQ(energy_rate(c, 0.4, 0.0, 0.2, 5.0), 0.0);
    ASSERT_GT(c.d_star(0.4), 0.0);
    EXPECT_LT(energy_rate(c, 0.4, 2.0, 0.0, 0.0), 0.0);
    EXPECT_LT(energy_rate(c, 0.4, 2.0, 0.0, 3.0), energy_rate(c, 0.4, 2.0, 0.0, 0.0));
}

TEST(EnergyRate, MatchesFiniteDifferenceAlongTrajectory) {
    FastContext c = ctx_of(1.0, 0.2, 0.35);
    c.q_x = 0.35;
    c.k_d = 4.0;
    const double u = 0.05, dt = 1e-5;
    auto rhs = [&](double a, double b) { return (c.f(a, b) + u) / c.t_star() - c.k_d * b; };
    double th = solve_sep(c).theta_star + 1.2, w = 3.0;
    for (int probe = 0; probe < 10; ++probe) {
        auto advance = [&](double a, double b, double h) {
            const double k1a = b, k1b = rhs(a, b);
            const double k2a = b + 0.5 * h * k1b, k2b = rhs(a + 0.5 * h * k1a, b + 0.5 * h * k1b);
            const double k3a = b + 0.5 * h * k2b, k3b = rhs(a + 0.5 * h * k2a, b + 0.5 * h * k2b);
            const double k4a = b + h * k3b, k4b = rhs(a + h * k3a, b + h * k3b);
            return std::pair{a + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a), b + h / 6 * (k1b + 2 * k2b + 2 * k3b + k4b)};
        };
        const auto [ta, wa] = advance(th, w, dt);
        const auto [tb, wb] = advance(th, w, -dt);
        const double fd = (energy(c, ta, wa) - energy(c, tb, wb)) / (2 * dt);
        const double an = energy_rate(c, th, w, u, c.k_d);
        EXPECT_NEAR(fd, an, 1e-4 * std::abs(an) + 1e-9);
        for (int s = 0; s < 3000; ++s) std::tie(th, w) = advance(th, w, dt);
    }
}

TEST(Metrics, ShiftInvariance) {
    // Dynamics in theta' = theta - theta_delta do not depend on theta_delta.
    FastContext a = ctx_of(0.95, 0.0, 0.3), b = ctx_of(0.95, 1.234, 0.3);
    for (double t = -3.0; t < 3.0; t += 0.1)
        for (double w : {-5.0, 0.0, 7.0}) EXPECT_NEAR(a.f(t, w), b.f(t + 1.234, w), 1e-14);
    const FastRun ra = simulate_fast(a, {0.9, 4.0}, [](double, double, double) { return 0.0; }, 1.0);
    const FastRun rb = simulate_fast(b, {0.9 + 1.234, 4.0}, [](double, double, double) { return 0.0; }, 1.0);
    EXPECT_NEAR(ra.theta, rb.theta - 1.234, 1e-9);
    EXPECT_NEAR(ra.varpi, rb.varpi, 1e-9);
    EXPECT_NEAR(solve_sep(a).theta_star, solve_sep(b).theta_star - 1.234, 1e-14);
    EXPECT_NEAR(theta_b(a), theta_b(b), 0.0);
}

TEST(Classify, ConstantTrajectoryIsStable) {
    Scenario sc;
    sc.plant = star_plant(1, alpha_to_ls(0.64, 0.85));
    sc.sim.t_end = 3.5;
    const StabilityReport r = classify_instability(simulate(sc), sc);
    EXPECT_EQ(r.dominant_source, InstabilitySource::None);
    EXPECT_EQ(r.pll[0], PllVerdict::Stable);
    EXPECT_EQ(r.syncon[0], SynconVerdict::Stable);
    EXPECT_FALSE(r.any_unstable());
}

TEST(Classify, TooShort) {
    Scenario sc;
    sc.plant = star_plant(1, 0.4);
    sc.sim.t_end = 1.0;
    EXPECT_THROW(classify_instability(simulate(sc), sc), TrajectoryTooShort);
}

TEST(Classify, HighCouplingIsSynconUnstable) {
    const StabilityReport r = classify_fixture("table3_alpha_0.77.yaml");
    EXPECT_EQ(r.dominant_source, InstabilitySource::Syncon);
    EXPECT_EQ(r.syncon[0], SynconVerdict::Unstable);
    EXPECT_EQ(r.pll[0], PllVerdict::TrackingSyncon);
}

TEST(Classify, IntermediateCouplingLosesPllEquilibrium) {
    const StabilityReport r = classify_fixture("table3_alpha_0.24.yaml");
    EXPECT_EQ(r.dominant_source, InstabilitySource::Pll);
    EXPECT_EQ(r.pll[0], PllVerdict::SepLost);
    EXPECT_EQ(r.syncon[0], SynconVerdict::Stable);
    EXPECT_EQ(r.source_label(), "PLL-sep-lost");
}

TEST(Classify, DecimationInvariant) {
    for (const char* f : {"table3_alpha_0.065.yaml", "table3_alpha_0.64.yaml"}) {
        const StabilityReport a = classify_fixture(f, 1), b = classify_fixture(f, 10);
        EXPECT_EQ(a.dominant_source, b.dominant_source) << f;
        EXPECT_EQ(a.pll, b.pll) << f;
        EXPECT_EQ(a.syncon, b.syncon) << f;
    }
}

TEST(Classify, ClearanceMetricsIncreaseWithCoupling) {
    double prev_tb = -1.0, prev_pc = -1.0;
    for (const char* f : {"table3_alpha_0.065.yaml", "table3_alpha_0.24.yaml", "table3_alpha_0.64.yaml",
                          "table3_alpha_0.77.yaml"}) {
        const StabilityReport r = classify_fixture(f);
        ASSERT_TRUE(r.theta_b[0].has_value());
        EXPECT_GT(*r.theta_b[0], prev_tb) << f;
        EXPECT_GT(r.p_c_clearance[0], prev_pc) << f;
        prev_tb = *r.theta_b[0];
        prev_pc = r.p_c_clearance[0];
    }
}
