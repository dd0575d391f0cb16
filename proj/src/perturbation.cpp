#include "syncstab/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "syncstab/rk4.hpp"

namespace syncstab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kCloseTol = 1e-3;  // rad/s, a looped trace touching the switching line

DisturbanceBounds combine(double scale, double pos, double neg, double resistive, double damp) {
    DisturbanceBounds b;
    const double hi = scale * pos, lo = -scale * neg;
    b.u_max = std::max(hi, lo) + resistive + damp;
    b.u_min = std::min(hi, lo) - resistive - damp;
    return b;
}

double sep_angle(const FastContext& ctx) {
    if (std::abs(ctx.p_m) > ctx.u_e) throw UndefinedEnergy();
    return ctx.theta_delta + std::asin(ctx.p_m / ctx.u_e);
}

}  // namespace

double u_i(const SystemState& x, const Plant& plant, const Currents& c, int i) {
    const PowerTerms t = power_terms(x, plant, c);
    const FastContext ctx = fast_context(plant, c, i, x.delta);
    const double th = x.theta[i], w = x.varpi[i];
    return (t.p_mci[i] - ctx.p_m) - (t.d_ci[i] - ctx.d_star(th)) * w - t.d_cij[i];
}

DisturbanceBounds bounds(const Plant& plant, const Currents& c, int i, double varpi, double cap_factor) {
    const auto& g = plant.controls[i];
    const double kr = g.k_p / g.k_i;
    double pos = 0.0, neg = 0.0, res = 0.0, dc = 0.0;
    std::vector<double> caps;
    for (int j = 0; j < plant.n(); ++j) {
        const double imax = plant.controls[j].i_max;
        caps.push_back(imax);
        if (j == i) continue;
        const cplx z = plant.net.z(i, j);
        // id (cos - 1) + iq sin over a quarter-turn spread; reduces to the
        // d-axis forms when iq = 0.
        pos += z.imag() * std::max(imax - c.id[j], std::abs(c.iq[j]));
        neg += z.imag() * (c.id[j] + std::abs(c.iq[j]));
        res += std::abs(z.real()) * imax;
        dc += std::abs(z) * imax;
    }
    DisturbanceBounds b =
        combine(1.0 + varpi / plant.base.omega_g, pos, neg, res, kr * cap_factor * std::abs(varpi) * dc);
    b.i_cj_max = std::move(caps);
    return b;
}

double speed_disturbance_gain(const FastContext& ctx) {
    return (ctx.k_p / ctx.k_i) * ctx.varpi_cap_factor * ctx.x_mut * ctx.i_max_others;
}

DisturbanceBounds bounds(const FastContext& ctx, double varpi) {
    const double damp = speed_disturbance_gain(ctx) * std::abs(varpi);
    return combine(1.0 + varpi / ctx.omega_g, ctx.x_mut * (ctx.i_max_others - ctx.i_cij_star),
                   ctx.x_mut * ctx.i_cij_star, 0.0, damp);
}

double switched_u(const FastContext& ctx, SwitchMode mode, double varpi, double h) {
    if (mode == SwitchMode::Nominal || std::abs(varpi) <= h) return 0.0;
    const DisturbanceBounds b = bounds(ctx, varpi);
    const bool up = (varpi > 0.0) == (mode == SwitchMode::EnergyMax);
    return up ? b.u_max : b.u_min;
}

std::pair<double, double> switched_rhs(const FastContext& ctx, SwitchMode mode, double theta, double varpi,
                                       double h) {
    const double u = switched_u(ctx, mode, varpi, h);
    return {varpi, (ctx.f(theta, varpi) + u) / ctx.t_star() - ctx.k_d * varpi};
}

double uep_angle(const FastContext& ctx, double u) {
    const double p = ctx.p_m + u;
    if (std::abs(p) > ctx.u_e) throw UepNotConverged();
    auto g = [&](double th) { return p - ctx.u_e * std::sin(th - ctx.theta_delta); };
    // Newton from the mirror image of the stable equilibrium.
    double th = kPi - std::asin(p / ctx.u_e) + ctx.theta_delta;
    for (int it = 0; it < 50; ++it) {
        const double d = -ctx.u_e * std::cos(th - ctx.theta_delta);
        if (std::abs(d) < 1e-14) break;
        const double step = g(th) / d;
        th -= step;
        if (std::abs(step) < 1e-14) return th;
    }
    // g is increasing on [theta_delta + pi/2, theta_delta + 3 pi/2].
    double lo = ctx.theta_delta + 0.5 * kPi, hi = ctx.theta_delta + 1.5 * kPi;
    if (g(lo) > 0.0 || g(hi) < 0.0) throw UepNotConverged();
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Stable eigen-direction slope dvarpi/dtheta of the saddle at `th` on one side.
double stable_slope(const FastContext& ctx, SwitchMode mode, double th, double side, double h) {
    const double probe = side * std::max(1e-6, 10.0 * h);
    const double du = (switched_u(ctx, mode, 2.0 * probe, h) - switched_u(ctx, mode, probe, h)) / probe;
    const double a = -ctx.u_e * std::cos(th - ctx.theta_delta) / ctx.t_star();
    const double b = (-ctx.d_star(th) + du) / ctx.t_star() - ctx.k_d;
    return 0.5 * (b - std::sqrt(b * b + 4.0 * a));
}

// Reverse-time trace from `seed` until it leaves the strip [left, right] or
// the speed window. A trace that crosses varpi = 0 inside the strip loops
// around the equilibrium; a second crossing closes the loop on the switching
// line.
struct Trace {
    Polyline pts;
    bool looped = false;
    bool on_switching_line = false;
    bool escaped = false;  // left through the speed window or stalled
};

Trace reverse_trace(const FastContext& ctx, SwitchMode mode, Point2 seed, double left, double right,
                    const ZoneOptions& opt) {
    Trace tr;
    auto f = [&](const std::vector<double>& s) {
        const auto [a, b] = switched_rhs(ctx, mode, s[0], s[1], opt.hysteresis);
        return std::vector<double>{a, b};
    };
    std::vector<double> x{seed.theta, seed.varpi};
    tr.pts.push_back(seed);
    double swing = 0.0;
    for (long k = 0; k < opt.max_steps; ++k) {
        std::vector<double> nx = rk4_step(f, x, -opt.dt);
        if (!std::isfinite(nx[0]) || !std::isfinite(nx[1])) break;
        if (nx[1] * seed.varpi < 0.0 && !tr.looped) {
            tr.looped = true;
        } else if (tr.looped) {
            // Reverse time is attracted to a repelling switching line, so the
            // trace may only creep towards varpi = 0.
            swing = std::max(swing, std::abs(nx[1]));
            if (nx[1] * seed.varpi >= 0.0 || (swing > 10.0 * kCloseTol && std::abs(nx[1]) < kCloseTol)) {
                tr.pts.push_back({nx[0], 0.0});
                tr.on_switching_line = true;
                return tr;
            }
        }
        if (nx[0] < left || nx[0] > right) {
            const double edge = nx[0] < left ? left : right;
            const double s = (edge - x[0]) / (nx[0] - x[0]);
            tr.pts.push_back({edge, x[1] + s * (nx[1] - x[1])});
            return tr;
        }
        if (std::abs(nx[1]) > opt.window_varpi) {
            const double lim = std::copysign(opt.window_varpi, nx[1]);
            const double s = (lim - x[1]) / (nx[1] - x[1]);
            tr.pts.push_back({x[0] + s * (nx[0] - x[0]), lim});
            tr.escaped = true;
            return tr;
        }
        x = std::move(nx);
        tr.pts.push_back({x[0], x[1]});
    }
    tr.escaped = true;
    return tr;
}

// Append a trace and walk along the window edge to `edge` if it was clipped.
void append_trace(Polyline& poly, const Trace& tr, double edge, const ZoneOptions& opt) {
    poly.insert(poly.end(), tr.pts.begin(), tr.pts.end());
    const Point2 last = tr.pts.back();
    if (tr.escaped) {
        const double lim = std::abs(last.varpi) >= opt.window_varpi ? last.varpi : std::copysign(opt.window_varpi, last.varpi);
        if (lim != last.varpi) poly.push_back({last.theta, lim});
        poly.push_back({edge, lim});
    }
}

// Continue a trace that stopped at the strip edge over the wider strip.
Trace extend_trace(const FastContext& ctx, SwitchMode mode, const Trace& tr, double left, double right,
                   const ZoneOptions& opt) {
    if (tr.escaped || tr.looped || tr.on_switching_line) return tr;
    const Trace more = reverse_trace(ctx, mode, tr.pts.back(), left, right, opt);
    Trace out = tr;
    out.pts.insert(out.pts.end(), more.pts.begin() + 1, more.pts.end());
    out.escaped = more.escaped;
    return out;
}

// Trace, then its copy shifted by `shift` in theta walked back to the start.
void append_with_tail(Polyline& poly, const Trace& tr, double shift, const ZoneOptions& opt) {
    poly.insert(poly.end(), tr.pts.begin(), tr.pts.end());
    Point2 last = tr.pts.back();
    if (tr.escaped && std::abs(last.varpi) < opt.window_varpi) {
        last.varpi = std::copysign(opt.window_varpi, last.varpi);
        poly.push_back(last);
        poly.push_back({last.theta + shift, last.varpi});
    }
    // A branch that stopped inside the window cuts its copy at the same angle;
    // the band beyond is left out.
    const bool cut = !tr.escaped;
    bool started = !cut;
    for (auto it = tr.pts.rbegin(); it != tr.pts.rend(); ++it) {
        const Point2 q{it->theta + shift, it->varpi};
        if (!started) {
            if (shift < 0.0 ? q.theta < last.theta : q.theta > last.theta) continue;
            poly.push_back({last.theta, q.varpi});
            started = true;
        }
        poly.push_back(q);
    }
}

Polyline resample(const Polyline& in, double step) {
    Polyline out;
    if (in.empty()) return out;
    out.push_back(in.front());
    double carry = 0.0;
    for (std::size_t k = 1; k < in.size(); ++k) {
        const Point2 a = in[k - 1], b = in[k];
        const double len = std::hypot(b.theta - a.theta, b.varpi - a.varpi);
        if (len == 0.0) continue;
        double s = step - carry;
        while (s < len) {
            out.push_back({a.theta + s / len * (b.theta - a.theta), a.varpi + s / len * (b.varpi - a.varpi)});
            s += step;
        }
        carry = len - (s - step);
    }
    if (out.back().theta != in.back().theta || out.back().varpi != in.back().varpi) out.push_back(in.back());
    return out;
}

}  // namespace

StabilityBoundary trace_boundary(const FastContext& ctx, SwitchMode mode, const ZoneOptions& opt) {
    const double u_up = switched_u(ctx, mode, 2.0 * opt.hysteresis + 1e-12, opt.hysteresis);
    const double u_dn = switched_u(ctx, mode, -2.0 * opt.hysteresis - 1e-12, opt.hysteresis);
    StabilityBoundary sb;
    sb.uep_upper = {uep_angle(ctx, u_up), 0.0};
    sb.uep_lower = {uep_angle(ctx, u_dn) - 2.0 * kPi, 0.0};
    if (mode == SwitchMode::EnergyMax) {
        const double gain = speed_disturbance_gain(ctx);
        for (double u : {u_up, u_dn}) {
            const double th = ctx.theta_delta + std::asin((ctx.p_m + u) / ctx.u_e);
            if (ctx.d_star(th) + ctx.t_star() * ctx.k_d - gain <= 0.0) {
                sb.anti_damped = true;
                return sb;
            }
        }
    }

    // Upper branch: arrives at the right saddle from varpi > 0, traced leftwards.
    const double ka = stable_slope(ctx, mode, sb.uep_upper.theta, 1.0, opt.hysteresis);
    const double na = std::hypot(1.0, ka);
    const Point2 seed_a{sb.uep_upper.theta - opt.seed / na, -ka * opt.seed / na};
    const Trace a = reverse_trace(ctx, mode, seed_a, sb.uep_lower.theta, sb.uep_upper.theta, opt);

    // Lower branch: arrives at the left saddle from varpi < 0, traced rightwards.
    const double kb = stable_slope(ctx, mode, sb.uep_lower.theta, -1.0, opt.hysteresis);
    const double nb = std::hypot(1.0, kb);
    const Point2 seed_b{sb.uep_lower.theta + opt.seed / nb, kb * opt.seed / nb};
    const Trace b = reverse_trace(ctx, mode, seed_b, sb.uep_lower.theta, sb.uep_upper.theta, opt);

    sb.clipped = a.escaped || b.escaped;
    sb.closed_on_switching_line = a.on_switching_line || b.on_switching_line;
    Polyline poly;
    if (a.looped) {
        // The upper manifold wraps below the equilibrium: it alone bounds the region.
        poly.push_back(sb.uep_upper);
        append_trace(poly, a, sb.uep_upper.theta, opt);
        poly.push_back(sb.uep_upper);
    } else if (b.looped) {
        poly.push_back(sb.uep_lower);
        append_trace(poly, b, sb.uep_lower.theta, opt);
        poly.push_back(sb.uep_lower);
    } else if (mode != SwitchMode::Nominal || !opt.nominal_tails) {
        poly.push_back(sb.uep_upper);
        append_trace(poly, a, sb.uep_lower.theta, opt);
        poly.push_back(sb.uep_lower);
        append_trace(poly, b, sb.uep_upper.theta, opt);
        poly.push_back(sb.uep_upper);
    } else {
        // The basin continues past each saddle in a tail: above the left
        // saddle's upper branch and below the right saddle's lower branch.
        // Each half-plane is 2 pi periodic in theta, so a tail is the traced
        // branch shifted by one turn; the branches are continued over two
        // more turns so the tails are as long as the window allows.
        const Trace ax = extend_trace(ctx, mode, a, sb.uep_lower.theta - 4.0 * kPi, sb.uep_upper.theta, opt);
        const Trace bx = extend_trace(ctx, mode, b, sb.uep_lower.theta, sb.uep_upper.theta + 4.0 * kPi, opt);
        sb.clipped = ax.escaped || bx.escaped;
        poly.push_back(sb.uep_upper);
        append_with_tail(poly, ax, -2.0 * kPi, opt);
        poly.push_back({sb.uep_upper.theta - 2.0 * kPi, 0.0});
        poly.push_back(sb.uep_lower);
        append_with_tail(poly, bx, 2.0 * kPi, opt);
        poly.push_back({sb.uep_lower.theta + 2.0 * kPi, 0.0});
        poly.push_back(sb.uep_upper);
    }
    sb.polygon = resample(poly, opt.arc_step);
    sb.build_index();
    return sb;
}

BoundaryZone trace_zone(const FastContext& ctx, const ZoneOptions& opt) {
    BoundaryZone z;
    z.gamma_b1 = trace_boundary(ctx, SwitchMode::EnergyMax, opt);
    z.gamma_b2 = trace_boundary(ctx, SwitchMode::EnergyMin, opt);
    z.nominal = trace_boundary(ctx, SwitchMode::Nominal, opt);
    z.uep = z.nominal.uep_upper;
    z.sep = {sep_angle(ctx), 0.0};
    return z;
}

const char* membership_name(ZoneMembership m) {
    switch (m) {
        case ZoneMembership::InsideInner: return "inside_inner";
        case ZoneMembership::InAnnulus: return "in_annulus";
        case ZoneMembership::Outside: return "outside";
    }
    return "?";
}

void StabilityBoundary::build_index() {
    bins_.clear();
    if (polygon.size() < 3) return;
    lo_ = hi_ = polygon.front().varpi;
    for (const auto& q : polygon) {
        lo_ = std::min(lo_, q.varpi);
        hi_ = std::max(hi_, q.varpi);
    }
    const std::size_t nb = std::max<std::size_t>(1, std::min<std::size_t>(4096, polygon.size() / 8));
    bins_.assign(nb, {});
    const double w = (hi_ - lo_) / static_cast<double>(nb);
    auto bin = [&](double v) {
        if (w <= 0.0) return std::size_t{0};
        return std::min(nb - 1, static_cast<std::size_t>(std::max(0.0, (v - lo_) / w)));
    };
    for (std::size_t k = 0, j = polygon.size() - 1; k < polygon.size(); j = k++) {
        const auto [a, b] = std::minmax(polygon[k].varpi, polygon[j].varpi);
        for (std::size_t m = bin(a); m <= bin(b); ++m) bins_[m].push_back(static_cast<std::uint32_t>(k));
    }
}

bool StabilityBoundary::contains(Point2 p) const {
    if (polygon.empty()) return false;
    if (bins_.empty()) return polygon_contains(polygon, p);
    if (p.varpi < lo_ || p.varpi > hi_) return false;
    const std::size_t nb = bins_.size();
    const double w = (hi_ - lo_) / static_cast<double>(nb);
    const std::size_t m = w <= 0.0 ? 0 : std::min(nb - 1, static_cast<std::size_t>((p.varpi - lo_) / w));
    bool inside = false;
    for (std::uint32_t k : bins_[m]) {
        const Point2 a = polygon[k], b = polygon[k == 0 ? polygon.size() - 1 : k - 1];
        if ((a.varpi > p.varpi) != (b.varpi > p.varpi)) {
            const double x = a.theta + (p.varpi - a.varpi) / (b.varpi - a.varpi) * (b.theta - a.theta);
            if (p.theta < x) inside = !inside;
        }
    }
    return inside;
}

bool polygon_contains(const Polyline& poly, Point2 p) {
    if (poly.size() < 3) throw InvalidEstimate("degenerate polyline");
    bool inside = false;
    for (std::size_t k = 0, j = poly.size() - 1; k < poly.size(); j = k++) {
        const Point2 a = poly[k], b = poly[j];
        if ((a.varpi > p.varpi) != (b.varpi > p.varpi)) {
            const double x = a.theta + (p.varpi - a.varpi) / (b.varpi - a.varpi) * (b.theta - a.theta);
            if (p.theta < x) inside = !inside;
        }
    }
    return inside;
}

double polygon_area(const Polyline& poly) {
    double s = 0.0;
    for (std::size_t k = 0, j = poly.size() - 1; k < poly.size(); j = k++)
        s += poly[j].theta * poly[k].varpi - poly[k].theta * poly[j].varpi;
    return 0.5 * std::abs(s);
}

ZoneMembership zone_membership(Point2 p, const BoundaryZone& zone) {
    if (zone.gamma_b1.contains(p)) return ZoneMembership::InsideInner;
    if (zone.gamma_b2.contains(p)) return ZoneMembership::InAnnulus;
    return ZoneMembership::Outside;
}

FastRun simulate_fast(const FastContext& ctx, Point2 x0, const std::function<double(double, double, double)>& u,
                      double t_end, double dt) {
    double t = 0.0;
    auto f = [&](const std::vector<double>& s) {
        const double ui = u(t, s[0], s[1]);
        return std::vector<double>{s[1], (ctx.f(s[0], s[1]) + ui) / ctx.t_star() - ctx.k_d * s[1]};
    };
    std::vector<double> x{x0.theta, x0.varpi};
    const long steps = std::lround(t_end / dt);
    FastRun run;
    for (long k = 0; k < steps; ++k) {
        x = rk4_step(f, x, dt);
        t = static_cast<double>(k + 1) * dt;
        if (!std::isfinite(x[0]) || !std::isfinite(x[1]) || std::abs(x[0] - x0.theta) > 8.0 * kPi) {
            run.diverged = true;
            break;
        }
    }
    run.theta = x[0];
    run.varpi = x[1];
    return run;
}

bool converged_to_sep(const FastContext& ctx, const FastRun& run, double tol) {
    if (run.diverged) return false;
    return std::abs(run.theta - sep_angle(ctx)) < tol && std::abs(run.varpi) < tol;
}

}  // namespace syncstab
