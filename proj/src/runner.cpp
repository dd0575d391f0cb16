#include "syncstab/runner.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace syncstab {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void indexed_header(std::ostream& os, const char* name, int count, bool index_single) {
    for (int k = 0; k < count; ++k) {
        os << ',' << name;
        if (count > 1 || index_single) os << '[' << k << ']';
    }
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cannot write " + p.string(), 2);
    f << s;
}

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += sep;
        out += v[k];
    }
    return out;
}

}  // namespace

json report_json(const StabilityReport& r) {
    json j;
    j["alpha"] = r.alpha;
    json tb = json::array(), en = json::array(), pll = json::array(), sc = json::array();
    for (const auto& v : r.theta_b) tb.push_back(opt_number(v));
    for (const auto& v : r.energy_at_clearance) en.push_back(opt_number(v));
    for (auto v : r.pll) pll.push_back(verdict_name(v));
    for (auto v : r.syncon) sc.push_back(verdict_name(v));
    j["theta_b"] = tb;
    j["p_c_clearance"] = r.p_c_clearance;
    j["verdicts"] = {{"pll", pll}, {"syncon", sc}};
    j["dominant_source"] = source_name(r.dominant_source);
    j["instability_source"] = r.source_label();
    j["pll_sep_lost"] = r.pll_sep_lost;
    j["energy_at_clearance"] = en;
    j["uep"] = r.uep;
    return j;
}

json design_json(const DampingDesign& d) {
    return json{{"converter", d.converter},
                {"kd1", d.k_d1},
                {"kd1_energy", d.k_d1_energy},
                {"kd1_rate", d.k_d1_rate},
                {"kd2", d.k_d2},
                {"kd3", d.k_d3},
                {"kd", d.k_d},
                {"binding", d.binding},
                {"d_omega_max", d.d_omega_max},
                {"assumptions",
                 {{"t_f", d.t_f},
                  {"u_ci", d.u_ci},
                  {"u_e", d.u_e},
                  {"t_star", d.t_star},
                  {"trigger", d.trigger},
                  {"hold_after_fault", d.hold_after_fault}}}};
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
    const int p = rec.states.empty() ? 0 : rec.states.front().p();
    const int n = rec.states.empty() ? 0 : rec.states.front().n();
    os << 't';
    indexed_header(os, "delta", p, true);
    indexed_header(os, "d_omega", p, true);
    indexed_header(os, "theta", n, true);
    indexed_header(os, "varpi", n, true);
    indexed_header(os, "P_c", p, false);
    indexed_header(os, "P_E", p, false);
    indexed_header(os, "P_eci", n, true);
    indexed_header(os, "P_mci", n, true);
    indexed_header(os, "U_pcc", n, true);
    os << ",event_flag\n";
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const SystemState& x = rec.states[k];
        os << g9(rec.t[k]);
        for (double v : x.delta) os << ',' << g9(v);
        for (double v : x.d_omega) os << ',' << g9(v);
        for (double v : x.theta) os << ',' << g9(v);
        for (double v : x.varpi) os << ',' << g9(v);
        for (double v : rec.p_c[k]) os << ',' << g9(v);
        for (double v : rec.p_e[k]) os << ',' << g9(v);
        for (double v : rec.p_eci[k]) os << ',' << g9(v);
        for (double v : rec.p_mci[k]) os << ',' << g9(v);
        for (double v : rec.u_pcc[k]) os << ',' << g9(v);
        os << ',' << rec.flags[k] << '\n';
    }
}

json trajectory_json(const TrajectoryRecord& rec) {
    json rows = json::array();
    for (std::size_t k = 0; k < rec.size(); ++k) {
        const SystemState& x = rec.states[k];
        rows.push_back({{"t", rec.t[k]},
                        {"delta", x.delta},
                        {"d_omega", x.d_omega},
                        {"theta", x.theta},
                        {"varpi", x.varpi},
                        {"P_c", rec.p_c[k]},
                        {"P_E", rec.p_e[k]},
                        {"P_eci", rec.p_eci[k]},
                        {"P_mci", rec.p_mci[k]},
                        {"U_pcc", rec.u_pcc[k]},
                        {"event_flag", rec.flags[k]}});
    }
    return json{{"t_clear", rec.t_clear}, {"samples", rows}};
}

void write_zone_csv(std::ostream& os, const BoundaryZone& zone) {
    os << "theta,varpi,which_boundary\n";
    auto dump = [&](const StabilityBoundary& b, const char* tag) {
        for (const auto& q : b.polygon) os << g9(q.theta) << ',' << g9(q.varpi) << ',' << tag << '\n';
    };
    dump(zone.gamma_b1, "gamma_b1");
    dump(zone.nominal, "nominal");
    dump(zone.gamma_b2, "gamma_b2");
}

FastContext zone_context(const ScenarioConfig& cfg) {
    const Scenario sc = cfg.build();
    const int i = cfg.perturbation.converter;
    if (i < 0 || i >= sc.plant.n()) throw ValidationError("perturbation.converter", "out of range");
    const Currents c = sc.plant.steady_currents();
    const SystemState eq = find_equilibrium(sc.plant, c);
    FastContext ctx = fast_context(sc.plant, c, i, eq.delta);
    ctx.varpi_cap_factor = cfg.perturbation.varpi_cap_factor;
    return ctx;
}

ZoneCheck check_zone(const FastContext& ctx, const BoundaryZone& zone, int runs, std::uint64_t seed,
                     double inner_margin, double settle) {
    ZoneCheck out;
    if (runs <= 0) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Random piecewise-constant admissible disturbance, 10 ms holds over 1 s.
    auto run_from = [&](Point2 p) {
        std::vector<double> level(101);
        for (auto& v : level) v = unit(rng);
        auto u = [&](double t, double, double w) {
            if (t >= 1.0) return 0.0;
            const DisturbanceBounds b = bounds(ctx, w);
            const auto slot = std::min<std::size_t>(100, static_cast<std::size_t>(t / 0.01));
            return b.u_min + level[slot] * (b.u_max - b.u_min);
        };
        return simulate_fast(ctx, p, u, settle);
    };

    auto box = [](const Polyline& poly) {
        double t0 = 1e300, t1 = -1e300, w0 = 1e300, w1 = -1e300;
        for (const auto& q : poly) {
            t0 = std::min(t0, q.theta);
            t1 = std::max(t1, q.theta);
            w0 = std::min(w0, q.varpi);
            w1 = std::max(w1, q.varpi);
        }
        return std::array<double, 4>{t0, t1, w0, w1};
    };

    const auto b1 = box(zone.gamma_b1.polygon);
    const long inside_tries = zone.gamma_b1.polygon.empty() ? 0 : 200L * runs;
    const double dt_m = inner_margin * (b1[1] - b1[0]), dw_m = inner_margin * (b1[3] - b1[2]);
    for (long tries = 0; out.inside_runs < runs && tries < inside_tries; ++tries) {
        const Point2 p{b1[0] + unit(rng) * (b1[1] - b1[0]), b1[2] + unit(rng) * (b1[3] - b1[2])};
        bool strict = zone.gamma_b1.contains(p);
        for (Point2 q : {Point2{p.theta + dt_m, p.varpi}, Point2{p.theta - dt_m, p.varpi},
                         Point2{p.theta, p.varpi + dw_m}, Point2{p.theta, p.varpi - dw_m}})
            strict = strict && zone.gamma_b1.contains(q);
        if (!strict) continue;
        ++out.inside_runs;
        if (converged_to_sep(ctx, run_from(p))) ++out.inside_converged;
    }

    const auto b2 = box(zone.gamma_b2.polygon);
    const double pad = 0.5 * (b2[1] - b2[0]);
    const double wspan = std::max(std::abs(b2[2]), std::abs(b2[3]));
    for (long tries = 0; out.outside_runs < runs && tries < 200L * runs; ++tries) {
        const Point2 p{b2[0] - pad + unit(rng) * (b2[1] - b2[0] + 2.0 * pad), (2.0 * unit(rng) - 1.0) * 1.5 * wspan};
        if (zone.gamma_b2.contains(p)) continue;
        if (p.varpi * (p.theta - zone.sep.theta) <= 0.0) continue;  // outward: moving away from the SEP
        ++out.outside_runs;
        if (!converged_to_sep(ctx, run_from(p))) ++out.outside_diverged;
    }
    return out;
}

json RunSummary::to_json() const {
    json j;
    j["name"] = name;
    j["hash"] = hash;
    j["tool_version"] = kToolVersion;
    j["defaults_applied"] = defaults_applied;
    if (report) {
        j["report"] = report_json(*report);
    } else {
        j["report"] = nullptr;
    }
    j["diverged"] = diverged;
    if (diverged) j["diverged_at"] = diverged_at;
    if (split)
        j["timescale"] = {{"epsilon", split->epsilon}, {"valid", split->valid}, {"tau_scale", split->tau_scale}};
    if (!designs.empty()) {
        json d = json::array();
        for (const auto& x : designs) d.push_back(design_json(x));
        j["designs"] = d;
    }
    if (zone) {
        j["zone"] = {{"area_gamma_b1", polygon_area(zone->gamma_b1.polygon)},
                     {"gamma_b1_anti_damped", zone->gamma_b1.anti_damped},
                     {"area_nominal", polygon_area(zone->nominal.polygon)},
                     {"area_gamma_b2", polygon_area(zone->gamma_b2.polygon)},
                     {"uep", {zone->uep.theta, zone->uep.varpi}},
                     {"sep", {zone->sep.theta, zone->sep.varpi}}};
    }
    if (zone_check) {
        j["zone_check"] = {{"inside_runs", zone_check->inside_runs},
                           {"inside_converged", zone_check->inside_converged},
                           {"outside_runs", zone_check->outside_runs},
                           {"outside_diverged", zone_check->outside_diverged}};
    }
    // File names only: artifacts sit next to the summary, and the bytes must
    // not depend on where the output directory lives.
    json names = json::object();
    for (const auto& [k, v] : artifacts) names[k] = fs::path(v).filename().string();
    j["artifacts"] = names;
    return j;
}

RunSummary run(const ScenarioConfig& cfg, const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    RunSummary s;
    s.name = cfg.name;
    s.hash = cfg.hash();
    s.defaults_applied = cfg.defaults_applied;

    Scenario sc = cfg.build();
    if (opt.dt) {
        if (!(*opt.dt > 0.0)) throw ValidationError("sim.dt", "must be > 0");
        sc.sim.dt = *opt.dt;
    }

    const bool write = !opt.out_dir.empty();
    fs::path dir;
    if (write) {
        dir = opt.out_dir;
        fs::create_directories(dir);
    }
    const std::string stem = cfg.name;

    if (opt.simulate) {
        std::optional<TrajectoryRecord> rec;
        try {
            rec = simulate(sc);
        } catch (const IntegrationDiverged& e) {
            // Divergence is a finding: classify what was recorded.
            s.diverged = true;
            s.diverged_at = e.time();
            rec = e.partial();
        }
        if (cfg.analysis.metrics || opt.force_metrics) {
            ClassifyOptions co = cfg.classify;
            if (s.diverged) co.min_post_window = 0.0;
            s.report = classify_instability(*rec, sc, co);
        }
        if (write) {
            if (opt.format == "json") {
                const fs::path p = dir / (stem + "_trajectory.json");
                write_text(p, trajectory_json(*rec).dump(1) + "\n");
                s.artifacts["trajectory"] = p.string();
            } else {
                const fs::path p = dir / (stem + "_trajectory.csv");
                std::ostringstream os;
                write_trajectory_csv(os, *rec);
                write_text(p, os.str());
                s.artifacts["trajectory"] = p.string();
            }
        }
    }

    if (cfg.analysis.timescale_check) {
        const Currents c = sc.plant.steady_currents();
        const SystemState eq = find_equilibrium(sc.plant, c);
        s.split = split(sc.plant, c, eq.delta);
    }

    if (cfg.analysis.damping_design || opt.force_design) {
        for (int i = 0; i < sc.plant.n(); ++i) s.designs.push_back(design_kd(sc.plant, i, cfg.damping));
        if (write) {
            json d = json::array();
            for (const auto& x : s.designs) d.push_back(design_json(x));
            const fs::path p = dir / (stem + "_design.json");
            write_text(p, (s.designs.size() == 1 ? d[0] : d).dump(2) + "\n");
            s.artifacts["design"] = p.string();
        }
    }

    if (cfg.analysis.zone || opt.force_zone) {
        const FastContext ctx = zone_context(cfg);
        ZoneOptions zo;
        zo.window_varpi = cfg.perturbation.window_varpi;
        zo.arc_step = cfg.perturbation.arc_step;
        zo.hysteresis = cfg.perturbation.hysteresis;
        s.zone = trace_zone(ctx, zo);
        if (opt.monte_carlo_runs > 0) s.zone_check = check_zone(ctx, *s.zone, opt.monte_carlo_runs, opt.seed);
        if (write) {
            const fs::path p = dir / (stem + "_zone.csv");
            std::ostringstream os;
            write_zone_csv(os, *s.zone);
            write_text(p, os.str());
            s.artifacts["zone"] = p.string();
        }
    }

    if (write) {
        const fs::path p = dir / (stem + "_summary.json");
        s.artifacts["summary"] = p.string();
        write_text(p, s.to_json().dump(2) + "\n");
    }
    s.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

std::vector<SweepRow> sweep(const ScenarioConfig& cfg, const std::string& path, const std::vector<double>& values,
                            int parallelism, const RunOptions& opt) {
    std::vector<SweepRow> rows(values.size());
    RunOptions ro = opt;
    ro.out_dir.clear();  // only the aggregated table is written
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next.fetch_add(1)) < values.size();) {
            rows[k].value = values[k];
            try {
                const ScenarioConfig c = parse_scenario(with_parameter(cfg.source_text, path, values[k]));
                rows[k].summary = run(c, ro);
            } catch (const std::exception& e) {
                rows[k].error = e.what();
            }
        }
    };
    const int jobs = std::max(1, std::min<int>(parallelism, static_cast<int>(values.size())));
    std::vector<std::thread> pool;
    for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "value,alpha,theta_b,p_c_clearance,dominant_source,error\n";
    for (const auto& r : rows) {
        os << g9(r.value) << ',';
        if (r.summary && r.summary->report) {
            const StabilityReport& rep = *r.summary->report;
            std::vector<std::string> tb, pc;
            for (const auto& v : rep.theta_b) tb.push_back(v ? g9(*v) : "nan");
            for (double v : rep.p_c_clearance) pc.push_back(g9(v));
            os << g9(rep.alpha) << ',' << join(tb, ';') << ',' << join(pc, ';') << ',' << rep.source_label() << ',';
        } else {
            os << ",,,,";
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << err << '\n';
    }
}

json sweep_json(const std::vector<SweepRow>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
        json j{{"value", r.value}};
        if (r.summary) j["summary"] = r.summary->to_json();
        if (!r.error.empty()) j["error"] = r.error;
        a.push_back(j);
    }
    return a;
}

std::string render_report(const json& s) {
    std::ostringstream os;
    os << "scenario: " << s.value("name", "?") << "\n";
    os << "hash:     " << s.value("hash", "?") << "\n";
    os << "tool:     " << s.value("tool_version", "?") << "\n";
    if (s.contains("report") && s["report"].is_object()) {
        const json& r = s["report"];
        os << "alpha:    " << r.value("alpha", 0.0) << "\n";
        os << "source:   " << r.value("instability_source", "?") << "\n";
        if (r.contains("verdicts")) {
            os << "PLL:      ";
            for (const auto& v : r["verdicts"]["pll"]) os << v.get<std::string>() << ' ';
            os << "\nSynCon:   ";
            for (const auto& v : r["verdicts"]["syncon"]) os << v.get<std::string>() << ' ';
            os << "\n";
        }
        os << "theta_b:  " << r["theta_b"].dump() << "\n";
        os << "P_c(clr): " << r["p_c_clearance"].dump() << "\n";
    }
    if (s.value("diverged", false)) os << "integration diverged at t=" << s.value("diverged_at", 0.0) << "\n";
    if (s.contains("designs"))
        for (const auto& d : s["designs"])
            os << "design[" << d.value("converter", 0) << "]: kd=" << d.value("kd", 0.0) << " ("
               << d.value("binding", "?") << ")\n";
    if (s.contains("zone")) os << "zone:     " << s["zone"].dump() << "\n";
    if (s.contains("artifacts"))
        for (const auto& [k, v] : s["artifacts"].items()) os << "artifact " << k << ": " << v.get<std::string>() << "\n";
    return os.str();
}

}  // namespace syncstab
