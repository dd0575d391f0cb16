#include "syncstab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace syncstab {

double pmci_star(const NetworkTopology& topo, const Currents& c, int i, bool coherent) {
    const auto& own = topo.gflc_branches.at(static_cast<std::size_t>(i));
    const double xg = topo.grid_branch.l;
    const double rg = topo.resistance_neglected ? 0.0 : topo.grid_branch.r;
    const double rc = topo.resistance_neglected ? 0.0 : own.r;
    double id_o = 0.0, iq_o = 0.0;
    if (coherent)
        for (int j = 0; j < topo.n(); ++j)
            if (j != i) {
                id_o += c.id[j];
                iq_o += c.iq[j];
            }
    const double id = c.id[i], iq = c.iq[i];
    if (topo.p() == 0) return (own.l + xg) * id + xg * id_o - (rc + rg) * iq - rg * iq_o;
    const double alpha = compute_alpha(topo);
    const double g = compute_gamma(topo, i);
    const double shared = 1.0 - alpha;
    // The q-axis terms enter with a minus sign because positive i_q is
    // capacitive support in this model.
    return shared * (g * id + xg * id_o) - (shared * rg + rc) * iq - shared * rg * iq_o;
}

SepSolution solve_sep(const FastContext& ctx) {
    SepSolution s;
    s.u_e = ctx.u_e;
    s.theta_delta = ctx.theta_delta;
    s.exists = std::abs(ctx.p_m) <= ctx.u_e;
    if (s.exists) s.theta_star = std::asin(ctx.p_m / ctx.u_e) + ctx.theta_delta;
    return s;
}

SepSolution solve_sep(const Plant& plant, const Currents& c, int i, const std::vector<double>& frozen_delta) {
    return solve_sep(fast_context(plant, c, i, frozen_delta));
}

double theta_b(double k_p, double k_i, double omega_g, double p_m, double u_e) {
    const double arg = k_i * p_m / (k_p * omega_g * u_e);
    if (arg > 1.0) throw NoPositiveDampingRegion(arg);
    if (arg < -1.0) return std::numbers::pi;
    return std::acos(arg);
}

double theta_b(const FastContext& ctx) { return theta_b(ctx.k_p, ctx.k_i, ctx.omega_g, ctx.q_x, ctx.u_e); }

double energy(const FastContext& ctx, double theta, double varpi) {
    const SepSolution sep = solve_sep(ctx);
    if (!sep.exists) throw UndefinedEnergy();
    const double potential = -ctx.u_e * (std::cos(theta - ctx.theta_delta) - std::cos(sep.theta_star - ctx.theta_delta)) -
                             ctx.p_m * (theta - sep.theta_star);
    return 0.5 * ctx.t_star() * varpi * varpi + potential;
}

double energy_rate(const FastContext& ctx, double theta, double varpi, double u, double k_d) {
    return -ctx.d_star(theta) * varpi * varpi + u * varpi - ctx.t_star() * k_d * varpi * varpi;
}

const char* verdict_name(PllVerdict v) {
    switch (v) {
        case PllVerdict::Stable: return "stable";
        case PllVerdict::Unstable: return "unstable";
        case PllVerdict::TrackingSyncon: return "tracking-syncon";
        case PllVerdict::SepLost: return "sep-lost";
    }
    return "?";
}

const char* verdict_name(SynconVerdict v) { return v == SynconVerdict::Stable ? "stable" : "unstable"; }

const char* source_name(InstabilitySource s) {
    switch (s) {
        case InstabilitySource::None: return "none";
        case InstabilitySource::Pll: return "PLL";
        case InstabilitySource::Syncon: return "SynCon";
    }
    return "?";
}

bool StabilityReport::any_unstable() const { return dominant_source != InstabilitySource::None; }

std::string StabilityReport::source_label() const {
    if (dominant_source == InstabilitySource::Pll) {
        const bool diverged = std::any_of(pll.begin(), pll.end(), [](PllVerdict v) { return v == PllVerdict::Unstable; });
        return diverged ? "PLL" : "PLL-sep-lost";
    }
    return source_name(dominant_source);
}

std::vector<double> syncon_uep(const Plant& post) {
    std::vector<double> uep(post.p(), std::numbers::pi);
    if (post.p() == 0) return uep;
    try {
        const SystemState eq = find_equilibrium(post, post.steady_currents());
        for (int p = 0; p < post.p(); ++p) uep[p] = std::numbers::pi - eq.delta[p];
    } catch (const Error&) {
        // No post-fault equilibrium: fall back to the lossless limit.
    }
    return uep;
}

namespace {

int nearest_syncon(const Plant& plant, int i) {
    int best = -1;
    double mag = -1.0;
    for (int p = 0; p < plant.p(); ++p)
        if (std::abs(plant.net.k(p, i)) > mag) {
            mag = std::abs(plant.net.k(p, i));
            best = p;
        }
    return best;
}

}  // namespace

StabilityReport classify_instability(const TrajectoryRecord& rec, const Scenario& sc, const ClassifyOptions& opt) {
    if (rec.size() == 0) throw TrajectoryTooShort(0.0);
    const double t0 = rec.t_clear >= 0.0 ? rec.t_clear : rec.t.front();
    const double have = rec.t.back() - t0;
    if (have < opt.min_post_window - 1e-9) throw TrajectoryTooShort(have);

    const Plant post = sc.final_plant();
    const Currents steady = post.steady_currents();
    const int n = post.n(), np = post.p();

    StabilityReport r;
    for (int i = 0; i < n; ++i) r.alpha = std::max(r.alpha, std::real(post.net.a_e.row(i).sum()));
    r.uep = syncon_uep(post);

    std::size_t k0 = 0;
    while (k0 < rec.size() && rec.t[k0] < t0 - 1e-12) ++k0;
    const std::size_t k_end = rec.size() - 1;
    std::size_t kw = k0;
    while (kw < k_end && rec.t[kw] < rec.t.back() - opt.growth_window - 1e-12) ++kw;

    r.syncon.assign(np, SynconVerdict::Stable);
    for (int p = 0; p < np; ++p) {
        bool crossed = false;
        double peak = 0.0;
        for (std::size_t k = k0; k <= k_end; ++k) {
            const double d = rec.states[k].delta[p];
            peak = std::max(peak, std::abs(d));
            if (std::abs(d) > r.uep[p] && d * rec.states[k].d_omega[p] > 0.0) crossed = true;
        }
        const bool beyond_end = std::abs(rec.states[k_end].delta[p]) > r.uep[p];
        if (peak > opt.rotor_angle_limit || (crossed && beyond_end)) r.syncon[p] = SynconVerdict::Unstable;
    }

    // Equilibrium existence along the post-fault trajectory with the recorded currents.
    bool sep_lost = false;
    for (std::size_t k = k0; k <= k_end && np > 0; ++k) {
        Currents c{rec.i_d[k], rec.i_q[k]};
        if (sep_exists(rec.states[k].delta, post, c).margin < 0.0) {
            sep_lost = true;
            break;
        }
    }

    r.pll.assign(n, PllVerdict::Stable);
    for (int i = 0; i < n; ++i) {
        const int near = nearest_syncon(post, i);
        auto slip = [&](std::size_t k) {
            const auto& s = rec.states[k];
            return std::abs(s.theta[i] - (near >= 0 ? s.delta[near] : 0.0));
        };
        double lo = slip(kw), hi = lo;
        for (std::size_t k = kw; k <= k_end; ++k) {
            lo = std::min(lo, slip(k));
            hi = std::max(hi, slip(k));
        }
        const double end = slip(k_end);
        const bool growing = end >= hi && slip(kw) <= lo && end > slip(kw);
        if (end > opt.slip_limit && growing)
            r.pll[i] = PllVerdict::Unstable;
        else if (near >= 0 && r.syncon[near] == SynconVerdict::Unstable)
            r.pll[i] = PllVerdict::TrackingSyncon;
        else if (sep_lost)
            r.pll[i] = PllVerdict::SepLost;
    }
    r.pll_sep_lost = sep_lost;

    const bool syncon_bad = std::any_of(r.syncon.begin(), r.syncon.end(),
                                        [](SynconVerdict v) { return v == SynconVerdict::Unstable; });
    const bool pll_bad = std::any_of(r.pll.begin(), r.pll.end(), [](PllVerdict v) {
        return v == PllVerdict::Unstable || v == PllVerdict::SepLost;
    });
    r.dominant_source = syncon_bad ? InstabilitySource::Syncon : pll_bad ? InstabilitySource::Pll : InstabilitySource::None;

    // Metrics at clearance: post-fault plant and steady currents, rotor frozen.
    SystemState xc = rec.states.front();
    if (rec.at_clearance) {
        xc = rec.at_clearance->x;
        r.p_c_clearance = rec.at_clearance->p_c;
    } else {
        r.p_c_clearance = pc_power(xc, post, steady);
    }
    for (int i = 0; i < n; ++i) {
        const FastContext ctx = fast_context(post, steady, i, xc.delta);
        try {
            r.theta_b.emplace_back(theta_b(ctx));
        } catch (const NoPositiveDampingRegion&) {
            r.theta_b.emplace_back(std::nullopt);
        }
        try {
            r.energy_at_clearance.emplace_back(energy(ctx, xc.theta[i], xc.varpi[i]));
        } catch (const UndefinedEnergy&) {
            r.energy_at_clearance.emplace_back(std::nullopt);
        }
    }
    return r;
}

}  // namespace syncstab
