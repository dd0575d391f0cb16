#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "syncstab/config.hpp"
#include "syncstab/dynamics.hpp"
#include "syncstab/rk4.hpp"
#include "syncstab/timescale.hpp"
#include "syncstab/metrics.hpp"

using namespace syncstab;
using syncstab::test::alpha_to_ls;
using syncstab::test::star_plant;

namespace {

constexpr double kPi = std::numbers::pi;

Currents currents(std::vector<double> id, std::vector<double> iq) { return {std::move(id), std::move(iq)}; }

}  // namespace

TEST(PccVoltage, AllZeroGivesZeroQAxis) {
    const Plant pl = star_plant(2, 0.4);
    const SystemState x = SystemState::zeros(1, 2);
    const PccVoltage v = pcc_voltage(x, pl, currents({0, 0}, {0, 0}));
    for (double uq : v.u_q) EXPECT_NEAR(uq, 0.0, 1e-15);
}

TEST(PccVoltage, NoSynconQuarterTurn) {
    Plant pl = star_plant(1, 0.0);
    pl.u_g = 0.93;
    SystemState x = SystemState::zeros(0, 1);
    x.theta[0] = kPi / 2;
    EXPECT_NEAR(pcc_voltage(x, pl, currents({0}, {0})).u_q[0], -0.93, 1e-14);
}

TEST(PccVoltage, MatchesNodalSolve) {
    // Two converters at one PCC with a SynCon; settled PLLs.
    const double lc = 0.05, ls = 0.4, lg = 0.85;
    Plant pl = star_plant(2, ls, lc, lg);
    pl.u_g = 0.97;
    pl.machines[0].e_s = 1.05;
    SystemState x = SystemState::zeros(1, 2);
    x.delta[0] = 0.7;
    x.theta = {0.3, -0.4};
    const Currents c = currents({0.5, 0.3}, {0.1, -0.2});
    const cplx j(0.0, 1.0);
    const cplx e = std::polar(1.05, 0.7);
    cplx inj[2];
    for (int k = 0; k < 2; ++k) inj[k] = cplx(c.id[k], -c.iq[k]) * std::polar(1.0, x.theta[k]);
    // KCL at the PCC: (V - E)/jLs + (V - Ug)/jLg = I0 + I1
    const cplx v_pcc = (inj[0] + inj[1] + e / (j * ls) + 0.97 / (j * lg)) / (1.0 / (j * ls) + 1.0 / (j * lg));
    const PccVoltage v = pcc_voltage(x, pl, c);
    for (int k = 0; k < 2; ++k) {
        const cplx vk = v_pcc + j * lc * inj[k];
        EXPECT_NEAR(std::abs(v.phasor[k] - vk), 0.0, 1e-12);
        EXPECT_NEAR(v.u_q[k], std::imag(vk * std::polar(1.0, -x.theta[k])), 1e-12);
    }
}

TEST(FullRhs, ZeroAtEquilibrium) {
    const Plant pl = star_plant(2, alpha_to_ls(0.64, 0.85));
    const Currents c = pl.steady_currents();
    const SystemState x = find_equilibrium(pl, c);
    const SystemState d = full_rhs(x, pl, c, false);
    for (double v : d.pack()) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(FullRhs, ClassicPllLimit) {
    Plant pl = star_plant(1, 0.0);
    SystemState x = SystemState::zeros(0, 1);
    x.theta[0] = 1e-5;
    x.varpi[0] = 2e-4;
    const auto& g = pl.controls[0];
    const double got = full_rhs(x, pl, currents({0}, {0}), false).varpi[0];
    EXPECT_NEAR(got, -g.k_i * x.theta[0] - g.k_p * x.varpi[0], 1e-9);
}

TEST(FullRhs, MatchesPiLoopLawAtSettledSpeeds) {
    // varpi = k_p u_q + k_i int u_q. With every PLL and the rotor at rest this
    // gives dvarpi/dt = k_i u_q / (1 - k_p du_q/dvarpi); the model must agree.
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ang(-kPi, kPi), cur(-0.6, 0.6);
    const int n = 3;
    Plant pl = star_plant(n, 0.5, 0.05, 0.7);
    pl.u_g = 0.95;
    pl.controls[1].k_p = 4.0;
    pl.controls[2].k_i = 300.0;
    for (int trial = 0; trial < 100; ++trial) {
        SystemState x = SystemState::zeros(1, n);
        x.delta[0] = ang(rng);
        Currents c = currents({}, {});
        for (int i = 0; i < n; ++i) {
            x.theta[i] = ang(rng);
            c.id.push_back(std::abs(cur(rng)));
            c.iq.push_back(cur(rng));
        }
        const SystemState d = full_rhs(x, pl, c, false);
        const auto uq = [&](const SystemState& s) { return pcc_voltage(s, pl, c).u_q; };
        const std::vector<double> u0 = uq(x);
        const double h = 1e-6;
        Eigen::MatrixXd jw(n, n);
        for (int k = 0; k < n; ++k) {
            SystemState a = x, b = x;
            a.varpi[k] += h;
            b.varpi[k] -= h;
            const auto va = uq(a), vb = uq(b);
            for (int i = 0; i < n; ++i) jw(i, k) = (va[i] - vb[i]) / (2 * h);
        }
        Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            lhs.row(i) -= pl.controls[i].k_p * jw.row(i);
            rhs(i) = pl.controls[i].k_i * u0[i];
        }
        const Eigen::VectorXd expect = lhs.lu().solve(rhs);
        for (int i = 0; i < n; ++i) EXPECT_NEAR(d.varpi[i], expect(i), 1e-6 * (1.0 + std::abs(expect(i))));
    }
}

TEST(FullRhs, MatchesClosedFormTranscription) {
    // Star cluster written out term by term: own reactance L_c + (1-a)L_g,
    // mutual (1-a)L_g, source a E e^{j delta} + (1-a) U_g.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(-kPi, kPi), spd(-30.0, 30.0), cur(-0.6, 0.6), dw(-0.02, 0.02);
    const int n = 3;
    const double lc = 0.05, ls = 0.5, lg = 0.7, ug = 0.95, es = 1.03;
    Plant pl = star_plant(n, ls, lc, lg);
    pl.u_g = ug;
    pl.machines[0].e_s = es;
    pl.controls[1].k_p = 4.0;
    pl.controls[2].k_i = 300.0;
    const double alpha = (1 / ls) / (1 / ls + 1 / lg), wg = pl.base.omega_g;
    const double ts = pl.machines[0].t_s_system(pl.base.s_mva), ds = pl.machines[0].d_s;
    for (int trial = 0; trial < 100; ++trial) {
        SystemState x = SystemState::zeros(1, n);
        x.delta[0] = ang(rng);
        x.d_omega[0] = dw(rng);
        Currents c = currents({}, {});
        for (int i = 0; i < n; ++i) {
            x.theta[i] = ang(rng);
            x.varpi[i] = spd(rng);
            c.id.push_back(std::abs(cur(rng)));
            c.iq.push_back(cur(rng));
        }
        const SystemState d = full_rhs(x, pl, c, false);
        const double dl = x.delta[0];
        for (int i = 0; i < n; ++i) {
            const auto& g = pl.controls[i];
            const double th = x.theta[i];
            double pm = 0.0, dcij = 0.0;
            for (int j = 0; j < n; ++j) {
                const double xij = (j == i ? lc : 0.0) + (1 - alpha) * lg;
                const double phi = x.theta[j] - th;
                pm += xij * (c.id[j] * std::cos(phi) + c.iq[j] * std::sin(phi));
                if (j != i)
                    dcij += -xij * (c.id[j] * std::sin(phi) - c.iq[j] * std::cos(phi)) * (x.varpi[i] - x.varpi[j]);
            }
            const double pe = alpha * es * std::sin(th - dl) + (1 - alpha) * ug * std::sin(th);
            const double ci = alpha * es * std::cos(th - dl) + (1 - alpha) * ug * std::cos(th);
            const double kr = g.k_p / g.k_i;
            const double dci = kr * ci - pm / wg;
            const double tci = (1 - g.k_p * pm / wg) / g.k_i;
            const double want = (pm - pe - dci * x.varpi[i] - kr * dcij) / tci;
            EXPECT_NEAR(d.varpi[i], want, 1e-10 * (1.0 + std::abs(want)));
            EXPECT_EQ(d.theta[i], x.varpi[i]);
        }
        // Rotor: P_E = P_es - P_c, P_c from the converter current share.
        double pc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double eta = x.theta[j] - dl;
            pc += alpha * es * (c.id[j] * std::cos(eta) + c.iq[j] * std::sin(eta));
        }
        const double pes = es * ug * alpha / lg * std::sin(dl);
        EXPECT_NEAR(d.delta[0], wg * x.d_omega[0], 1e-12);
        EXPECT_NEAR(d.d_omega[0], (-(pes - pc) - ds * x.d_omega[0]) / ts, 1e-10);
    }
}

TEST(FullRhs, DampingLoopSubtractsRate) {
    Plant pl = star_plant(1, 0.4);
    pl.controls[0].k_d = 8.0;
    SystemState x = SystemState::zeros(1, 1);
    x.varpi[0] = 3.0;
    const Currents c = pl.steady_currents();
    EXPECT_NEAR(full_rhs(x, pl, c, false).varpi[0] - full_rhs(x, pl, c, true).varpi[0], 24.0, 1e-9);
}

TEST(FullRhs, DegenerateTimeConstantSurfaced) {
    Plant pl = star_plant(1, 0.0);
    const auto& g = pl.controls[0];
    const double x_own = pl.net.z(0, 0).imag();
    const double id = pl.base.omega_g / (g.k_p * x_own);
    EXPECT_THROW(full_rhs(SystemState::zeros(0, 1), pl, currents({id}, {0}), false), DegenerateTimeConstant);
}

TEST(Lvrt, NoSag) {
    GflcControl g;
    g.i_d_ref = 0.7;
    g.i_q_ref = 0.05;
    const auto [id, iq] = lvrt_current_refs(1.0, g, 0.7);
    EXPECT_EQ(id, 0.7);
    EXPECT_EQ(iq, 0.05);
}

TEST(Lvrt, ReactivePriorityAtZeroVoltage) {
    GflcControl g;
    g.k_q = 2.0;
    g.i_max = 1.1;
    const auto [id, iq] = lvrt_current_refs(0.0, g, 0.5);
    EXPECT_DOUBLE_EQ(iq, 1.1);
    EXPECT_DOUBLE_EQ(id, 0.0);
}

TEST(Lvrt, PartialSag) {
    GflcControl g;
    g.k_q = 2.0;
    g.i_max = 1.2;
    const auto [id, iq] = lvrt_current_refs(0.7, g, 1.0);
    EXPECT_NEAR(iq, 0.4, 1e-14);
    EXPECT_NEAR(id, 1.0, 1e-14);
}

TEST(Step, ZeroFieldLeavesStateUnchanged) {
    const Plant pl = star_plant(1, 0.0, 0.05, 0.85, 0.0);
    SystemState x = SystemState::zeros(0, 1);
    const SystemState y = step(x, 1e-3, pl, currents({0}, {0}), false);
    EXPECT_EQ(y.theta[0], 0.0);
    EXPECT_EQ(y.varpi[0], 0.0);
}

TEST(Step, FourthOrderOnLinearSystem) {
    // x' = A x with A = [[0, 1], [-4, -0.4]]; closed form through Eigen's exponential-free
    // eigen decomposition of the 2x2 system.
    Eigen::Matrix2d a;
    a << 0, 1, -4, -0.4;
    const auto f = [&](const std::vector<double>& v) {
        return std::vector<double>{a(0, 0) * v[0] + a(0, 1) * v[1], a(1, 0) * v[0] + a(1, 1) * v[1]};
    };
    Eigen::EigenSolver<Eigen::Matrix2d> es(a);
    const Eigen::Matrix2cd vec = es.eigenvectors();
    const Eigen::Vector2cd lam = es.eigenvalues();
    const double t_end = 2.0;
    const Eigen::Vector2d x0(1.0, 0.0);
    const Eigen::Vector2cd coef = vec.lu().solve(x0.cast<cplx>());
    Eigen::Vector2cd exact = Eigen::Vector2cd::Zero();
    for (int k = 0; k < 2; ++k) exact += coef(k) * std::exp(lam(k) * t_end) * vec.col(k);
    auto err = [&](double dt) {
        std::vector<double> x{1.0, 0.0};
        const int steps = static_cast<int>(std::lround(t_end / dt));
        for (int s = 0; s < steps; ++s) x = rk4_step(f, x, dt);
        return std::hypot(x[0] - exact(0).real(), x[1] - exact(1).real());
    };
    const double e1 = err(0.02), e2 = err(0.01);
    EXPECT_GE(std::log2(e1 / e2), 3.7);
}

TEST(Step, ConservativePendulumKeepsEnergy) {
    // Undamped single PLL with constant forcing: k_p = 0 and no current-dependent
    // damping make the fast system a pendulum.
    FastContext ctx;
    ctx.u_e = 1.0;
    ctx.p_m = 0.3;
    ctx.q_x = 0.0;
    ctx.k_p = 0.0;
    ctx.k_i = 100.0;
    const double ts = ctx.t_star();
    const auto f = [&](const std::vector<double>& v) { return std::vector<double>{v[1], ctx.f(v[0], v[1]) / ts}; };
    std::vector<double> x{solve_sep(ctx).theta_star + 1.0, 0.0};
    const double v0 = energy(ctx, x[0], x[1]);
    double worst = 0.0;
    for (int s = 0; s < 100000; ++s) {
        x = rk4_step(f, x, 1e-4);
        worst = std::max(worst, std::abs(energy(ctx, x[0], x[1]) - v0));
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(Simulate, ConstantAtEquilibriumWithoutEvents) {
    Scenario sc;
    sc.plant = star_plant(2, alpha_to_ls(0.64, 0.85));
    sc.sim.t_end = 2.0;
    const TrajectoryRecord rec = simulate(sc);
    const auto first = rec.states.front().pack();
    for (const auto& s : rec.states) {
        const auto v = s.pack();
        for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(v[k], first[k], 1e-8);
    }
}

TEST(Simulate, Deterministic) {
    const ScenarioConfig cfg = parse_scenario_file(test::fixture("table3_alpha_0.64.yaml"));
    Scenario sc = cfg.build();
    sc.sim.t_end = 1.0;
    const TrajectoryRecord a = simulate(sc), b = simulate(sc);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a.states[k].pack(), b.states[k].pack());
        EXPECT_EQ(a.p_c[k], b.p_c[k]);
    }
}

TEST(Simulate, EventsLandOnStepBoundaries) {
    const ScenarioConfig cfg = parse_scenario_file(test::fixture("table3_alpha_0.64.yaml"));
    Scenario sc = cfg.build();
    sc.sim.t_end = 0.5;
    sc.sim.decimation = 1;
    const TrajectoryRecord rec = simulate(sc);
    int flagged = 0;
    for (std::size_t k = 0; k < rec.size(); ++k)
        if (rec.flags[k] & kFlagEvent) {
            ++flagged;
            const double t = rec.t[k];
            EXPECT_TRUE(std::abs(t - 0.1) < 1e-12 || std::abs(t - 0.3) < 1e-12) << t;
        }
    EXPECT_EQ(flagged, 2);
    EXPECT_NEAR(rec.t_clear, 0.3, 1e-12);
}

TEST(Simulate, HighAlphaSynconSlipsWithPllTracking) {
    const ScenarioConfig cfg = parse_scenario_file(test::fixture("table3_alpha_0.77.yaml"));
    const TrajectoryRecord rec = simulate(cfg.build());
    const auto& last = rec.states.back();
    EXPECT_GT(std::abs(last.delta[0]), 2 * kPi);
    EXPECT_LT(std::abs(last.theta[0] - last.delta[0]), kPi);
}

TEST(Simulate, LowAlphaPllSlipsWithRotorBounded) {
    const ScenarioConfig cfg = parse_scenario_file(test::fixture("table3_alpha_0.065.yaml"));
    const TrajectoryRecord rec = simulate(cfg.build());
    double max_delta = 0.0;
    for (const auto& s : rec.states) max_delta = std::max(max_delta, std::abs(s.delta[0]));
    EXPECT_LT(max_delta, kPi);
    EXPECT_GT(std::abs(rec.states.back().theta[0]), 2 * kPi);
}

TEST(PcPower, MaximalWhenAligned) {
    const double alpha = 0.64;
    const Plant pl = star_plant(2, alpha_to_ls(alpha, 0.85));
    SystemState x = SystemState::zeros(1, 2);
    x.delta[0] = 0.4;
    x.theta = {0.4, 0.4};
    EXPECT_NEAR(pc_power(x, pl, currents({0.5, 0.3}, {0, 0}))[0], alpha * 0.8, 1e-12);
}

TEST(PcPower, ZeroInQuadrature) {
    const Plant pl = star_plant(2, alpha_to_ls(0.64, 0.85));
    SystemState x = SystemState::zeros(1, 2);
    x.delta[0] = 0.4;
    x.theta = {0.4 - kPi / 2, 0.4 - kPi / 2};
    EXPECT_NEAR(pc_power(x, pl, currents({0.5, 0.3}, {0, 0}))[0], 0.0, 1e-12);
}

TEST(PcPower, EmptyWithoutSyncon) {
    const Plant pl = star_plant(1, 0.0);
    EXPECT_TRUE(pc_power(SystemState::zeros(0, 1), pl, pl.steady_currents()).empty());
}

TEST(PowerTerms, ElectromagneticDecomposition) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(-kPi, kPi), cur(0.0, 0.6);
    const double alpha = 0.4, lg = 0.85;
    Plant pl = star_plant(2, alpha_to_ls(alpha, lg), 0.05, lg);
    pl.u_g = 0.98;
    pl.machines[0].e_s = 1.02;
    for (int k = 0; k < 50; ++k) {
        SystemState x = SystemState::zeros(1, 2);
        x.delta[0] = ang(rng);
        x.theta = {ang(rng), ang(rng)};
        const PowerTerms t = power_terms(x, pl, currents({cur(rng), cur(rng)}, {cur(rng), 0.0}));
        EXPECT_NEAR(t.p_es[0], 1.02 * 0.98 * alpha / lg * std::sin(x.delta[0]), 1e-10);
        EXPECT_NEAR(t.p_e[0], t.p_es[0] - t.p_c[0], 1e-10);
    }
}

TEST(Simulate, UnforcedSynconReturnsToZero) {
    Scenario sc;
    sc.plant = star_plant(1, 0.4, 0.05, 0.85, 0.0);
    sc.plant.controls[0].i_max = 0.5;
    sc.sim.t_end = 40.0;
    sc.sim.dt = 1e-3;
    sc.sim.decimation = 100;
    sc.sim.lvrt = false;
    for (double d0 : {-3.0, -1.0, 2.0, 3.1}) {
        SystemState x0 = SystemState::zeros(1, 1);
        x0.delta[0] = d0;
        x0.theta[0] = d0 * 0.5;
        sc.initial = x0;
        const TrajectoryRecord rec = simulate(sc);
        const double d = rec.states.back().delta[0];
        EXPECT_NEAR(std::remainder(d, 2 * kPi), 0.0, 1e-3) << d0;
        EXPECT_NEAR(rec.states.back().d_omega[0], 0.0, 1e-5);
    }
}
