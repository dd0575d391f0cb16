#include "syncstab/timescale.hpp"

#include <algorithm>
#include <cmath>

namespace syncstab {

double FastContext::p_e(double theta) const { return u_e * std::sin(theta - theta_delta); }

double FastContext::d_star(double theta) const {
    return (k_p / k_i) * u_e * std::cos(theta - theta_delta) - q_x / omega_g;
}

double FastContext::f(double theta, double varpi) const { return p_m - p_e(theta) - d_star(theta) * varpi; }

FastContext fast_context(const Plant& plant, const Currents& c, int i, const std::vector<double>& frozen_delta) {
    SystemState x = SystemState::zeros(plant.p(), plant.n());
    x.delta = frozen_delta;
    cplx s = plant.net.a_g(i) * plant.u_g;
    for (int p = 0; p < plant.p(); ++p) s += plant.net.a_e(i, p) * std::polar(plant.machines[p].e_s, x.delta[p]);
    const auto& g = plant.controls[i];
    FastContext ctx;
    ctx.u_e = std::abs(s);
    ctx.theta_delta = std::arg(s);
    ctx.k_p = g.k_p;
    ctx.k_i = g.k_i;
    ctx.k_d = g.k_d;
    ctx.omega_g = plant.base.omega_g;
    double xm = 0.0;
    int others = 0;
    for (int j = 0; j < plant.n(); ++j) {
        const cplx zj = plant.net.z(i, j);
        ctx.p_m += std::imag(zj * cplx(c.id[j], -c.iq[j]));
        ctx.q_x += zj.imag() * c.id[j];
        if (j != i) {
            xm += zj.imag();
            ++others;
            ctx.i_cij_star += c.id[j];
            ctx.i_max_others += plant.controls[j].i_max;
        }
    }
    ctx.x_mut = others ? xm / others : 0.0;
    return ctx;
}

FastContext analytic_fast_context(double alpha, double e_s, double u_g, double delta, double l_c, double l_g,
                                  double i_d, double i_cij, const GflcControl& g, double omega_g) {
    FastContext ctx;
    const double a = alpha * e_s, b = (1.0 - alpha) * u_g;
    ctx.u_e = compute_ue(alpha, e_s, u_g, delta);
    ctx.theta_delta = std::atan2(a * std::sin(delta), a * std::cos(delta) + b);
    ctx.x_mut = (1.0 - alpha) * l_g;
    ctx.p_m = (l_c + ctx.x_mut) * i_d + ctx.x_mut * i_cij;
    ctx.q_x = ctx.p_m;
    ctx.i_cij_star = i_cij;
    ctx.k_p = g.k_p;
    ctx.k_i = g.k_i;
    ctx.k_d = g.k_d;
    ctx.omega_g = omega_g;
    return ctx;
}

double epsilon(const GflcControl& g, const NetworkTopology& topo, int i, double i_d, double i_cij, double t_s,
               double omega_g) {
    const double alpha = compute_alpha(topo);
    const double lg = topo.grid_branch.l, lc = topo.gflc_branches.at(static_cast<std::size_t>(i)).l;
    const double q = (lc + (1.0 - alpha) * lg) * i_d + (1.0 - alpha) * lg * i_cij;
    const double eps = (1.0 - g.k_p * q / omega_g) / (g.k_i * t_s);
    if (!(eps > 0.0)) throw TimescaleSplitInvalid(eps);
    return eps;
}

double epsilon(const Plant& plant, const Currents& c, int i) {
    if (plant.p() == 0) throw TimescaleSplitInvalid(0.0);
    double ts = 0.0;
    for (const auto& m : plant.machines) ts = std::max(ts, m.t_s_system(plant.base.s_mva));
    const FastContext ctx = fast_context(plant, c, i, std::vector<double>(plant.p(), 0.0));
    const double eps = ctx.t_star() / ts;
    if (!(eps > 0.0)) throw TimescaleSplitInvalid(eps);
    return eps;
}

TimescaleSplit split(const Plant& plant, const Currents& c, const std::vector<double>& frozen_delta) {
    TimescaleSplit s;
    s.frozen_delta = frozen_delta;
    for (int i = 0; i < plant.n(); ++i) s.epsilon = std::max(s.epsilon, epsilon(plant, c, i));
    s.tau_scale = s.epsilon;
    s.valid = s.epsilon < kSplitValidLimit;
    return s;
}

std::pair<std::vector<double>, std::vector<double>> fast_subsystem_rhs(
    const std::vector<double>& theta, const std::vector<double>& varpi, const std::vector<double>& frozen_delta,
    const std::vector<double>& frozen_d_omega, const Plant& plant, const Currents& c, bool damping_active) {
    SystemState x;
    x.delta = frozen_delta;
    x.d_omega = frozen_d_omega;
    x.theta = theta;
    x.varpi = varpi;
    SystemState d = full_rhs(x, plant, c, damping_active);
    return {std::move(d.theta), std::move(d.varpi)};
}

std::vector<double> solve_quasi_steady_pll(const std::vector<double>& delta, const Plant& plant, const Currents& c) {
    const int n = plant.n();
    std::vector<cplx> src(n);
    for (int i = 0; i < n; ++i) {
        cplx s = plant.net.a_g(i) * plant.u_g;
        for (int p = 0; p < plant.p(); ++p) s += plant.net.a_e(i, p) * std::polar(plant.machines[p].e_s, delta[p]);
        src[i] = s;
    }
    const double d0 = delta.empty() ? 0.0 : delta[0];
    auto target = [&](const std::vector<double>& th, int i) {
        double pm = 0.0;
        for (int j = 0; j < n; ++j)
            pm += std::imag(plant.net.z(i, j) * cplx(c.id[j], -c.iq[j]) * std::polar(1.0, th[j] - th[i]));
        const double ue = std::abs(src[i]);
        if (std::abs(pm) > ue) throw SepLost(d0);
        return std::arg(src[i]) + std::asin(pm / ue);
    };
    std::vector<double> th(n);
    for (int i = 0; i < n; ++i) th[i] = std::arg(src[i]);
    for (int it = 0; it < 200; ++it) {
        double change = 0.0;
        std::vector<double> next(th);
        for (int i = 0; i < n; ++i) {
            const double step = target(th, i) - th[i];
            // The first pass jumps straight to the single-converter root.
            next[i] = th[i] + (it == 0 ? 1.0 : 0.5) * step;
            change = std::max(change, std::abs(step));
        }
        th = std::move(next);
        if (change < 1e-10) return th;
    }
    throw IterationFailed("quasi-steady PLL angles");
}

std::pair<std::vector<double>, std::vector<double>> slow_subsystem_rhs(const std::vector<double>& delta,
                                                                       const std::vector<double>& d_omega,
                                                                       const Plant& plant, const Currents& c) {
    SystemState x = SystemState::zeros(plant.p(), plant.n());
    x.delta = delta;
    x.d_omega = d_omega;
    x.theta = solve_quasi_steady_pll(delta, plant, c);
    const PowerTerms t = power_terms(x, plant, c);
    std::vector<double> dd(plant.p()), dw(plant.p());
    for (int p = 0; p < plant.p(); ++p) {
        const auto& m = plant.machines[p];
        dd[p] = plant.base.omega_g * d_omega[p];
        dw[p] = (-t.p_e[p] - m.d_s * d_omega[p]) / m.t_s_system(plant.base.s_mva);
    }
    return {dd, dw};
}

double sep_alpha_threshold(double e_s, double u_g, double p_norm) { return (u_g + p_norm) / (e_s + u_g + p_norm); }

SepExistence sep_exists(const std::vector<double>& delta, const Plant& plant, const Currents& c) {
    SepExistence out;
    out.margin = 1e300;
    out.alpha_threshold = 0.0;
    out.sufficient = plant.p() > 0;
    double e_mean = 0.0;
    for (const auto& m : plant.machines) e_mean += m.e_s;
    if (plant.p() > 0) e_mean /= plant.p();
    for (int i = 0; i < plant.n(); ++i) {
        const FastContext ctx = fast_context(plant, c, i, delta);
        const double m = ctx.u_e - std::abs(ctx.p_m);
        out.margin = std::min(out.margin, m);
        if (plant.p() > 0) {
            const double alpha = std::real(plant.net.a_e.row(i).sum());
            const double one_minus = std::real(plant.net.a_g(i));
            const double p_norm = one_minus > 0.0 ? std::abs(ctx.p_m) / one_minus : 0.0;
            const double thr = sep_alpha_threshold(e_mean, plant.u_g, p_norm);
            out.alpha_threshold = std::max(out.alpha_threshold, thr);
            out.sufficient = out.sufficient && alpha >= thr;
        }
    }
    out.exists = out.margin >= 0.0;
    return out;
}

}  // namespace syncstab
