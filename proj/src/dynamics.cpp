#include "syncstab/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "syncstab/rk4.hpp"

namespace syncstab {

namespace {

constexpr double kMinTimeConstant = 1e-9;

cplx source_phasor(const SystemState& x, const Plant& plant, int i) {
    cplx s = plant.net.a_g(i) * plant.u_g;
    for (int p = 0; p < plant.p(); ++p)
        s += plant.net.a_e(i, p) * std::polar(plant.machines[p].e_s, x.delta[p]);
    return s;
}

cplx current_phasor(const Currents& c, const SystemState& x, int j) {
    return cplx(c.id[j], -c.iq[j]) * std::polar(1.0, x.theta[j]);
}

// Terminal voltage of converter i with its own current replaced by (id, iq).
cplx terminal_voltage(const SystemState& x, const Plant& plant, const Currents& c, int i, double id,
                      double iq) {
    cplx v = source_phasor(x, plant, i);
    for (int j = 0; j < plant.n(); ++j) {
        const cplx ij = (j == i) ? cplx(id, -iq) * std::polar(1.0, x.theta[j]) : current_phasor(c, x, j);
        v += plant.net.z(i, j) * ij;
    }
    return v;
}

}  // namespace

SystemState SystemState::zeros(int p, int n) {
    SystemState s;
    s.delta.assign(p, 0.0);
    s.d_omega.assign(p, 0.0);
    s.theta.assign(n, 0.0);
    s.varpi.assign(n, 0.0);
    return s;
}

std::vector<double> SystemState::pack() const {
    std::vector<double> x;
    x.reserve(2 * (delta.size() + theta.size()));
    x.insert(x.end(), delta.begin(), delta.end());
    x.insert(x.end(), d_omega.begin(), d_omega.end());
    x.insert(x.end(), theta.begin(), theta.end());
    x.insert(x.end(), varpi.begin(), varpi.end());
    return x;
}

SystemState SystemState::unpack(const std::vector<double>& x, int p, int n) {
    SystemState s;
    auto it = x.begin();
    s.delta.assign(it, it + p);
    it += p;
    s.d_omega.assign(it, it + p);
    it += p;
    s.theta.assign(it, it + n);
    it += n;
    s.varpi.assign(it, it + n);
    return s;
}

bool SystemState::finite() const {
    for (const auto* v : {&delta, &d_omega, &theta, &varpi})
        for (double e : *v)
            if (!std::isfinite(e)) return false;
    return true;
}

void GflcControl::validate(int idx) const {
    const std::string k = "gflc[" + std::to_string(idx) + "]";
    if (!(k_i > 0.0)) throw ValidationError(k + ".k_i", "must be > 0");
    if (!(k_p >= 0.0)) throw ValidationError(k + ".k_p", "must be >= 0");
    if (!(k_d >= 0.0)) throw ValidationError(k + ".k_d", "must be >= 0");
    if (!(i_max > 0.0)) throw ValidationError(k + ".i_max", "must be > 0");
    if (!(k_q >= 0.0)) throw ValidationError(k + ".k_q", "must be >= 0");
    if (std::hypot(i_d_ref, i_q_ref) > i_max * (1.0 + 1e-12))
        throw ValidationError(k + ".i_d", "current reference exceeds i_max");
}

void SynConMachine::validate(int idx) const {
    const std::string k = "syncon[" + std::to_string(idx) + "]";
    if (!(t_s > 0.0)) throw ValidationError(k + ".T_s", "must be > 0");
    if (!(e_s > 0.0)) throw ValidationError(k + ".E", "must be > 0");
    if (!(d_s >= 0.0)) throw ValidationError(k + ".D_s", "must be >= 0");
    if (!(s_rated > 0.0)) throw ValidationError(k + ".S_MVA", "must be > 0");
}

Currents Plant::steady_currents() const {
    Currents c;
    for (const auto& g : controls) {
        c.id.push_back(g.i_d_ref);
        c.iq.push_back(g.i_q_ref);
    }
    return c;
}

PccVoltage pcc_voltage(const SystemState& x, const Plant& plant, const Currents& c) {
    PccVoltage out;
    const double wg = plant.base.omega_g;
    for (int i = 0; i < plant.n(); ++i) {
        const cplx v = terminal_voltage(x, plant, c, i, c.id[i], c.iq[i]);
        out.phasor.push_back(v);
        out.magnitude.push_back(std::abs(v));
        // q-axis with the reactive drop scaled by the PLL frequency.
        const cplx rot = std::polar(1.0, -x.theta[i]);
        double uq = std::imag(rot * v);
        for (int j = 0; j < plant.n(); ++j) {
            const cplx cj = rot * current_phasor(c, x, j);
            uq += (x.varpi[i] / wg) * plant.net.z(i, j).imag() * cj.real();
        }
        out.u_q.push_back(uq);
    }
    return out;
}

PowerTerms power_terms(const SystemState& x, const Plant& plant, const Currents& c) {
    const int n = plant.n(), np = plant.p();
    const double wg = plant.base.omega_g;
    PowerTerms t;
    t.p_eci.resize(n);
    t.p_mci.resize(n);
    t.d_ci.resize(n);
    t.d_cij.resize(n);
    t.t_ci.resize(n);
    t.c_i.resize(n);

    std::vector<cplx> ic(n);
    for (int j = 0; j < n; ++j) ic[j] = current_phasor(c, x, j);

    for (int i = 0; i < n; ++i) {
        const auto& g = plant.controls[i];
        const cplx rot = std::polar(1.0, -x.theta[i]);
        const cplx s = rot * source_phasor(x, plant, i);
        double qx = 0.0, pm = 0.0, dcij = 0.0;
        for (int j = 0; j < n; ++j) {
            const cplx zc = plant.net.z(i, j) * (rot * ic[j]);
            pm += zc.imag();
            qx += plant.net.z(i, j).imag() * (rot * ic[j]).real();
            if (j != i) dcij += zc.real() * (x.varpi[i] - x.varpi[j]);
        }
        const double kr = g.k_p / g.k_i;
        t.p_eci[i] = -s.imag();
        t.c_i[i] = s.real();
        t.p_mci[i] = pm;
        t.d_ci[i] = kr * s.real() - qx / wg;
        t.d_cij[i] = kr * dcij;
        t.t_ci[i] = (1.0 - g.k_p * qx / wg) / g.k_i;
    }

    if (np > 0) {
        CVector e(np), icv(n);
        for (int p = 0; p < np; ++p) e(p) = std::polar(plant.machines[p].e_s, x.delta[p]);
        for (int j = 0; j < n; ++j) icv(j) = ic[j];
        const CVector from_conv = plant.net.k * icv;
        const CVector is = plant.net.y_e * e + plant.net.y_g * plant.u_g + from_conv;
        t.p_e.resize(np);
        t.p_c.resize(np);
        t.p_es.resize(np);
        for (int p = 0; p < np; ++p) {
            const double es = plant.machines[p].e_s;
            t.p_e[p] = std::real(e(p) * std::conj(is(p)));
            t.p_c[p] = -std::real(e(p) * std::conj(from_conv(p))) - es * es * plant.net.y_e(p, p).real();
            t.p_es[p] = t.p_e[p] + t.p_c[p];
        }
    }
    return t;
}

std::vector<double> pc_power(const SystemState& x, const Plant& plant, const Currents& c) {
    return power_terms(x, plant, c).p_c;
}

SystemState full_rhs(const SystemState& x, const Plant& plant, const Currents& c, bool damping_active) {
    const PowerTerms t = power_terms(x, plant, c);
    const double wg = plant.base.omega_g;
    SystemState d = SystemState::zeros(plant.p(), plant.n());
    for (int p = 0; p < plant.p(); ++p) {
        const auto& m = plant.machines[p];
        d.delta[p] = wg * x.d_omega[p];
        d.d_omega[p] = (-t.p_e[p] - m.d_s * x.d_omega[p]) / m.t_s_system(plant.base.s_mva);
    }
    for (int i = 0; i < plant.n(); ++i) {
        if (std::abs(t.t_ci[i]) < kMinTimeConstant) throw DegenerateTimeConstant(i, t.t_ci[i]);
        d.theta[i] = x.varpi[i];
        d.varpi[i] = (t.p_mci[i] - t.p_eci[i] - t.d_ci[i] * x.varpi[i] - t.d_cij[i]) / t.t_ci[i];
        if (damping_active) d.varpi[i] -= plant.controls[i].k_d * x.varpi[i];
    }
    return d;
}

std::pair<double, double> lvrt_current_refs(double u_pcc, const GflcControl& g, double i_d_pre) {
    if (u_pcc >= g.lvrt_threshold) return {g.i_d_ref, g.i_q_ref};
    const double iq = std::min(g.k_q * (g.lvrt_threshold - u_pcc), g.i_max);
    const double id = std::min(i_d_pre, std::sqrt(std::max(0.0, g.i_max * g.i_max - iq * iq)));
    return {id, iq};
}

Currents resolve_currents(const SystemState& x, const Plant& plant, const Currents& steady,
                          std::vector<bool>* active, const Currents* hint) {
    const int n = plant.n();
    Currents cur = hint ? *hint : steady;
    std::vector<bool> act(n, false);
    std::vector<cplx> rot(n);
    for (int j = 0; j < n; ++j) rot[j] = std::polar(1.0, x.theta[j]);
    // Each converter's reactive injection raises its own voltage, so
    // iq = clamp(k_q (thr - U(iq))) has a single root; bisection avoids the
    // chattering of direct substitution near the threshold.
    for (int sweep = 0; sweep < 30; ++sweep) {
        double change = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto& g = plant.controls[i];
            const double id_pre = steady.id[i];
            cplx others = source_phasor(x, plant, i);
            for (int j = 0; j < n; ++j)
                if (j != i) others += plant.net.z(i, j) * cplx(cur.id[j], -cur.iq[j]) * rot[j];
            const cplx zr = plant.net.z(i, i) * rot[i];
            auto u_at = [&](double id, double iq) { return std::abs(others + zr * cplx(id, -iq)); };
            double id = id_pre, iq = steady.iq[i];
            act[i] = u_at(id_pre, steady.iq[i]) < g.lvrt_threshold;
            if (act[i]) {
                auto id_of = [&](double q) { return std::min(id_pre, std::sqrt(std::max(0.0, g.i_max * g.i_max - q * q))); };
                double lo = 0.0, hi = g.i_max;
                while (hi - lo > 1e-14 * g.i_max) {
                    const double m = 0.5 * (lo + hi);
                    const double target = std::clamp(g.k_q * (g.lvrt_threshold - u_at(id_of(m), m)), 0.0, g.i_max);
                    (m > target ? hi : lo) = m;
                }
                iq = 0.5 * (lo + hi);
                id = id_of(iq);
            }
            change = std::max({change, std::abs(id - cur.id[i]), std::abs(iq - cur.iq[i])});
            cur.id[i] = id;
            cur.iq[i] = iq;
        }
        if (n == 1 || change < 1e-12) break;
    }
    if (active) *active = act;
    return cur;
}

SystemState step(const SystemState& x, double dt, const Plant& plant, const Currents& c, bool damping_active) {
    const int p = plant.p(), n = plant.n();
    auto f = [&](const std::vector<double>& v) {
        return full_rhs(SystemState::unpack(v, p, n), plant, c, damping_active).pack();
    };
    return SystemState::unpack(rk4_step(f, x.pack(), dt), p, n);
}

SystemState find_equilibrium(const Plant& plant, const Currents& c, const SystemState& guess) {
    const int p = plant.p(), n = plant.n(), m = p + n;
    auto residual = [&](const Eigen::VectorXd& v) {
        SystemState s = SystemState::zeros(p, n);
        for (int k = 0; k < p; ++k) s.delta[k] = v(k);
        for (int k = 0; k < n; ++k) s.theta[k] = v(p + k);
        const PowerTerms t = power_terms(s, plant, c);
        Eigen::VectorXd r(m);
        for (int k = 0; k < p; ++k) r(k) = t.p_e[k];
        for (int k = 0; k < n; ++k) r(p + k) = t.p_mci[k] - t.p_eci[k];
        return r;
    };
    Eigen::VectorXd v(m);
    for (int k = 0; k < p; ++k) v(k) = guess.delta[k];
    for (int k = 0; k < n; ++k) v(p + k) = guess.theta[k];
    Eigen::VectorXd r = residual(v);
    for (int it = 0; it < 100 && r.norm() > 1e-13; ++it) {
        Eigen::MatrixXd J(m, m);
        for (int k = 0; k < m; ++k) {
            Eigen::VectorXd vp = v;
            const double h = 1e-7;
            vp(k) += h;
            J.col(k) = (residual(vp) - r) / h;
        }
        const Eigen::VectorXd dx = J.fullPivLu().solve(-r);
        double lam = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
            const Eigen::VectorXd vt = v + lam * dx;
            const Eigen::VectorXd rt = residual(vt);
            if (rt.allFinite() && rt.norm() < r.norm()) {
                v = vt;
                r = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    if (!(r.norm() < 1e-9)) throw IterationFailed("operating point (residual " + std::to_string(r.norm()) + ")");
    SystemState s = SystemState::zeros(p, n);
    for (int k = 0; k < p; ++k) s.delta[k] = v(k);
    for (int k = 0; k < n; ++k) s.theta[k] = v(p + k);
    return s;
}

SystemState find_equilibrium(const Plant& plant, const Currents& c) {
    // Start from the single-converter stable root of each PLL with the
    // rotors at zero.
    SystemState g = SystemState::zeros(plant.p(), plant.n());
    for (int i = 0; i < plant.n(); ++i) {
        const cplx s = source_phasor(g, plant, i);
        const double pm = c.id[i] * plant.net.z(i, i).imag();
        const double ratio = std::clamp(pm / std::max(std::abs(s), 1e-12), -1.0, 1.0);
        g.theta[i] = std::arg(s) + std::asin(ratio);
    }
    for (int p = 0; p < plant.p(); ++p) g.delta[p] = g.theta.empty() ? 0.0 : g.theta[0];
    try {
        return find_equilibrium(plant, c, g);
    } catch (const IterationFailed&) {
        for (int p = 0; p < plant.p(); ++p) g.delta[p] = 0.0;
        return find_equilibrium(plant, c, g);
    }
}

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::VoltageSag: return "voltage_sag";
        case EventKind::LineTrip: return "line_trip";
        case EventKind::FaultClear: return "fault_clear";
        case EventKind::SetCurrentRefs: return "set_current_refs";
        case EventKind::DampingOn: return "damping_on";
        case EventKind::DampingOff: return "damping_off";
    }
    return "?";
}

TrajectoryRecord TrajectoryRecord::decimated(int factor) const {
    TrajectoryRecord r;
    r.t_clear = t_clear;
    r.at_clearance = at_clearance;
    for (std::size_t k = 0; k < t.size(); k += static_cast<std::size_t>(factor)) {
        r.t.push_back(t[k]);
        r.states.push_back(states[k]);
        r.p_c.push_back(p_c[k]);
        r.p_e.push_back(p_e[k]);
        r.p_eci.push_back(p_eci[k]);
        r.p_mci.push_back(p_mci[k]);
        r.u_pcc.push_back(u_pcc[k]);
        r.i_d.push_back(i_d[k]);
        r.i_q.push_back(i_q[k]);
        r.flags.push_back(flags[k]);
    }
    return r;
}

namespace {

void apply_event(const Event& ev, Plant& plant, Currents& steady) {
    switch (ev.kind) {
        case EventKind::VoltageSag: plant.u_g = ev.u_g; break;
        case EventKind::LineTrip:
            if (ev.topology) {
                plant.topo = *ev.topology;
                plant.refresh();
            }
            break;
        case EventKind::FaultClear:
            plant.u_g = ev.u_g;
            if (ev.topology) {
                plant.topo = *ev.topology;
                plant.refresh();
            }
            break;
        case EventKind::SetCurrentRefs:
            for (int i = 0; i < plant.n(); ++i) {
                if (static_cast<std::size_t>(i) < ev.i_d_ref.size()) plant.controls[i].i_d_ref = ev.i_d_ref[i];
                if (static_cast<std::size_t>(i) < ev.i_q_ref.size()) plant.controls[i].i_q_ref = ev.i_q_ref[i];
            }
            steady = plant.steady_currents();
            break;
        case EventKind::DampingOn:
        case EventKind::DampingOff: break;
    }
}

}  // namespace

Plant Scenario::final_plant() const {
    Plant p = plant;
    Currents c = p.steady_currents();
    for (const auto& ev : events) apply_event(ev, p, c);
    return p;
}

double Scenario::fault_clear_time() const {
    double t = -1.0;
    for (const auto& ev : events)
        if (ev.kind == EventKind::FaultClear) t = ev.time;
    return t;
}

double Scenario::fault_start_time() const {
    for (const auto& ev : events)
        if (ev.kind == EventKind::VoltageSag) return ev.time;
    return -1.0;
}

SystemState initial_state(const Scenario& sc) {
    if (sc.initial) return *sc.initial;
    const Currents steady = sc.plant.steady_currents();
    SystemState x = find_equilibrium(sc.plant, steady);
    if (!sc.sim.lvrt) return x;
    // A weak connection can hold the terminal voltage below the ride-through
    // threshold at rest; the equilibrium must then carry the LVRT currents.
    Currents c = steady;
    for (int it = 0; it < 50; ++it) {
        const Currents next = resolve_currents(x, sc.plant, steady, nullptr, &c);
        double change = 0.0;
        for (int i = 0; i < sc.plant.n(); ++i)
            change = std::max({change, std::abs(next.id[i] - c.id[i]), std::abs(next.iq[i] - c.iq[i])});
        c = next;
        x = find_equilibrium(sc.plant, c, x);
        if (change < 1e-13) return x;
    }
    throw IterationFailed("initial equilibrium with ride-through currents");
}

TrajectoryRecord simulate(const Scenario& sc) {
    const double dt = sc.sim.dt;
    const long steps = std::lround(sc.sim.t_end / dt);
    Plant plant = sc.plant;
    Currents steady = plant.steady_currents();
    SystemState x = initial_state(sc);

    std::vector<std::pair<long, const Event*>> timeline;
    for (const auto& ev : sc.events) timeline.emplace_back(std::lround(ev.time / dt), &ev);
    std::stable_sort(timeline.begin(), timeline.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    bool any_kd = false;
    for (const auto& g : plant.controls) any_kd = any_kd || g.k_d > 0.0;

    TrajectoryRecord rec;
    std::size_t next = 0;
    bool manual = false, auto_on = false;
    double last_lvrt = -1e300, last_clear = -1e300, activated = 1e300;
    std::uint32_t pending_flags = 0;
    Currents prev;

    for (long s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        for (std::size_t k = next; k < timeline.size() && timeline[k].first <= s; ++k) {
            if (timeline[k].second->kind != EventKind::FaultClear) continue;
            ClearanceSnapshot snap;
            snap.t = t;
            snap.x = x;
            snap.c = sc.sim.lvrt ? resolve_currents(x, plant, steady) : steady;
            snap.p_c = pc_power(x, plant, snap.c);
            rec.at_clearance = std::move(snap);
            break;
        }
        while (next < timeline.size() && timeline[next].first <= s) {
            const Event& ev = *timeline[next].second;
            apply_event(ev, plant, steady);
            if (ev.kind == EventKind::FaultClear) {
                last_clear = t;
                rec.t_clear = t;
            }
            if (ev.kind == EventKind::DampingOn) manual = true;
            if (ev.kind == EventKind::DampingOff) manual = auto_on = false;
            pending_flags |= kFlagEvent;
            ++next;
        }

        std::vector<bool> active;
        const Currents cur = sc.sim.lvrt ? resolve_currents(x, plant, steady, &active, s > 0 ? &prev : nullptr) : steady;
        prev = cur;
        const bool lvrt = std::find(active.begin(), active.end(), true) != active.end();
        if (lvrt) {
            last_lvrt = t;
            if (sc.sim.auto_damping && any_kd && !auto_on) {
                auto_on = true;
                activated = std::min(activated, t);
            }
        } else if (auto_on) {
            const double ref = std::max(last_lvrt, last_clear >= activated ? last_clear : -1e300);
            if (t >= ref + sc.sim.damping_hold - 0.5 * dt) auto_on = false;
        }
        const bool damping = manual || auto_on;

        if (lvrt) pending_flags |= kFlagLvrt;
        if (damping) pending_flags |= kFlagDamping;
        if (s % sc.sim.decimation == 0 || s == steps) {
            const PowerTerms pt = power_terms(x, plant, cur);
            const PccVoltage pv = pcc_voltage(x, plant, cur);
            rec.t.push_back(t);
            rec.states.push_back(x);
            rec.p_c.push_back(pt.p_c);
            rec.p_e.push_back(pt.p_e);
            rec.p_eci.push_back(pt.p_eci);
            rec.p_mci.push_back(pt.p_mci);
            rec.u_pcc.push_back(pv.magnitude);
            rec.i_d.push_back(cur.id);
            rec.i_q.push_back(cur.iq);
            rec.flags.push_back(pending_flags);
            pending_flags = 0;
        }
        if (s == steps) break;
        x = step(x, dt, plant, cur, damping);
        if (!x.finite()) throw IntegrationDiverged(t + dt, rec);
    }
    return rec;
}

}  // namespace syncstab
