#include "syncstab/damping.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "syncstab/rk4.hpp"

namespace syncstab {

double kd1(const GflcControl& g, double u_e, const DisturbanceBounds& b) {
    return (g.k_p / g.k_i) * u_e + std::max(std::abs(b.u_max), std::abs(b.u_min));
}

double kd2(const GflcControl& g, double u_ci) {
    if (!(u_ci > 0.0)) throw InvalidEstimate("u_ci must be > 0");
    return 2.0 * std::sqrt(g.k_i * u_ci) - g.k_p * u_ci;
}

double kd3(const GflcControl& g, double u_ci, double d_omega_max, double omega_g) {
    if (!(d_omega_max > 0.0)) throw InvalidEstimate("d_omega_max must be > 0");
    return g.k_i * u_ci * (std::numbers::pi / 2.0) / (omega_g * d_omega_max);
}

double d_omega_max_estimate(double alpha, double e_s, double sum_current, double t_f, double t_s, bool raw) {
    const double impulse = alpha * e_s * sum_current * t_f;
    if (raw) return impulse;
    if (!(t_s > 0.0)) throw InvalidEstimate("T_s must be > 0");
    return impulse / t_s;
}

DampingDesign select_kd(double k_d1, double k_d2, double k_d3) {
    DampingDesign d;
    d.k_d1 = k_d1;
    d.k_d2 = k_d2;
    d.k_d3 = k_d3;
    if (!std::isfinite(k_d1) || !std::isfinite(k_d2) || !std::isfinite(k_d3))
        throw InvalidEstimate("non-finite damping candidate");
    d.k_d = std::max({k_d1, k_d2, k_d3});
    d.binding = d.k_d == k_d1 ? "kd1" : d.k_d == k_d2 ? "kd2" : "kd3";
    return d;
}

DampingDesign design_kd(const Plant& plant, int i, const DampingAssumptions& a) {
    if (plant.p() == 0) throw InvalidEstimate("damping design needs a SynCon");
    if (!(a.hold_after_fault > 0.0)) throw InvalidEstimate("hold_after_fault must be > 0");
    const Currents c = plant.steady_currents();
    const SystemState eq = find_equilibrium(plant, c);
    const FastContext ctx = fast_context(plant, c, i, eq.delta);
    const GflcControl& g = plant.controls[i];
    const double u_ci = pcc_voltage(eq, plant, c).magnitude[i];

    double e_mean = 0.0, ts = 0.0;
    for (const auto& m : plant.machines) {
        e_mean += m.e_s;
        ts += m.t_s_system(plant.base.s_mva);
    }
    e_mean /= plant.p();
    double sum_i = 0.0;
    for (int j = 0; j < plant.n(); ++j) sum_i += std::hypot(c.id[j], c.iq[j]);
    const double alpha = std::real(plant.net.a_e.row(i).sum());
    const double dw = d_omega_max_estimate(alpha, e_mean, sum_i, a.t_f, ts, a.raw_d_omega);

    const double k1e = kd1(g, ctx.u_e, bounds(plant, c, i, 0.0));
    const double k1r = k1e / ctx.t_star();
    DampingDesign d = select_kd(a.kd1_rate_units ? k1r : k1e, kd2(g, u_ci), kd3(g, u_ci, dw, plant.base.omega_g));
    d.converter = i;
    d.k_d1_energy = k1e;
    d.k_d1_rate = k1r;
    d.d_omega_max = dw;
    d.t_f = a.t_f;
    d.u_ci = u_ci;
    d.u_e = ctx.u_e;
    d.t_star = ctx.t_star();
    d.hold_after_fault = a.hold_after_fault;
    return d;
}

LinearizedPll LinearizedPll::make(double k_p, double k_i, double k_d, double u_ci, double omega_g) {
    LinearizedPll l;
    l.k_p = k_p;
    l.k_i = k_i;
    l.k_d = k_d;
    l.u_ci = u_ci;
    l.omega_g = omega_g;
    const double b = l.damping_coefficient(), c = l.stiffness();
    const std::complex<double> root = std::sqrt(std::complex<double>(b * b - 4.0 * c, 0.0));
    l.poles[0] = 0.5 * (-b + root);
    l.poles[1] = 0.5 * (-b - root);
    return l;
}

bool LinearizedPll::overdamped() const {
    const double b = damping_coefficient();
    return b * b - 4.0 * stiffness() >= 0.0;
}

double tracking_lag(const LinearizedPll& lin, double d_omega) {
    return lin.k_d * lin.omega_g * d_omega / (lin.k_i * lin.u_ci);
}

double simulate_ramp_lag(const LinearizedPll& lin, double d_omega, double t_end, double dt) {
    const double slope = lin.omega_g * d_omega;
    const double kpu = lin.k_p * lin.u_ci, kiu = lin.stiffness(), b = lin.damping_coefficient();
    // x = (theta, dtheta/dt, delta); the ramp rides along as a state.
    auto f = [&](const std::vector<double>& x) {
        return std::vector<double>{x[1], kpu * slope + kiu * x[2] - b * x[1] - kiu * x[0], slope};
    };
    std::vector<double> x{0.0, 0.0, 0.0};
    const long steps = std::lround(t_end / dt);
    for (long k = 0; k < steps; ++k) x = rk4_step(f, x, dt);
    return x[2] - x[0];
}

}  // namespace syncstab
