#include "syncstab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

namespace syncstab {

namespace {

using json = nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Typed access to one YAML mapping with its dotted path, recording defaults.
class MapReader {
public:
    MapReader(const YAML::Node& node, std::string path, std::vector<std::string>& defaults)
        : node_(node), path_(std::move(path)), defaults_(defaults) {
        if (node_ && !node_.IsMap()) throw ValidationError(path_, "expected a mapping" + where(node_));
    }

    bool has(const std::string& key) const { return node_ && node_[key]; }
    YAML::Node get(const std::string& key) const { return node_ ? node_[key] : YAML::Node(); }
    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, std::optional<double> def = std::nullopt) const {
        if (!has(key)) {
            if (!def) throw ValidationError(key_path(key), "required key missing");
            defaults_.push_back(key_path(key) + "=" + fmt(*def));
            return *def;
        }
        const YAML::Node n = node_[key];
        try {
            const double v = n.as<double>();
            if (!std::isfinite(v)) throw ValidationError(key_path(key), "must be finite");
            return v;
        } catch (const YAML::BadConversion&) {
            throw ParseError(n.Mark().line + 1, n.Mark().column + 1, "expected a number for '" + key_path(key) + "'");
        }
    }

    int integer(const std::string& key, int def) const {
        if (!has(key)) {
            defaults_.push_back(key_path(key) + "=" + std::to_string(def));
            return def;
        }
        const YAML::Node n = node_[key];
        try {
            return n.as<int>();
        } catch (const YAML::BadConversion&) {
            throw ParseError(n.Mark().line + 1, n.Mark().column + 1, "expected an integer for '" + key_path(key) + "'");
        }
    }

    bool boolean(const std::string& key, bool def) const {
        if (!has(key)) {
            defaults_.push_back(key_path(key) + "=" + (def ? "true" : "false"));
            return def;
        }
        const YAML::Node n = node_[key];
        try {
            return n.as<bool>();
        } catch (const YAML::BadConversion&) {
            throw ParseError(n.Mark().line + 1, n.Mark().column + 1, "expected a boolean for '" + key_path(key) + "'");
        }
    }

    std::string text(const std::string& key, std::optional<std::string> def = std::nullopt) const {
        if (!has(key)) {
            if (!def) throw ValidationError(key_path(key), "required key missing");
            defaults_.push_back(key_path(key) + "=" + *def);
            return *def;
        }
        const YAML::Node n = node_[key];
        if (!n.IsScalar()) throw ParseError(n.Mark().line + 1, n.Mark().column + 1, "expected a string for '" + key_path(key) + "'");
        return n.as<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        if (!has(key)) return out;
        const YAML::Node n = node_[key];
        if (!n.IsSequence()) throw ParseError(n.Mark().line + 1, n.Mark().column + 1, "expected a list for '" + key_path(key) + "'");
        for (const auto& e : n) {
            try {
                out.push_back(e.as<double>());
            } catch (const YAML::BadConversion&) {
                throw ParseError(e.Mark().line + 1, e.Mark().column + 1, "expected a number in '" + key_path(key) + "'");
            }
        }
        return out;
    }

    void allow(std::initializer_list<const char*> keys) const {
        if (!node_) return;
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!ok.count(k)) throw ValidationError(key_path(k), "unknown key" + where(kv.first));
        }
    }

private:
    static std::string where(const YAML::Node& n) {
        return " (line " + std::to_string(n.Mark().line + 1) + ", column " + std::to_string(n.Mark().column + 1) + ")";
    }

    YAML::Node node_;
    std::string path_;
    std::vector<std::string>& defaults_;
};

Branch read_branch(const MapReader& r, bool allow_z) {
    if (allow_z && r.has("Z")) {
        r.allow({"Z", "RX_ratio"});
        return branch_from_z(r.number("Z"), r.number("RX_ratio", 0.0));
    }
    Branch b;
    b.l = r.number("L");
    b.r = r.number("R", 0.0);
    return b;
}

std::vector<BranchSpec> read_branch_list(const YAML::Node& seq, const std::string& path, std::vector<std::string>& d) {
    if (!seq.IsSequence()) throw ValidationError(path, "expected a list");
    std::vector<BranchSpec> out;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        MapReader r(seq[k], path + "[" + std::to_string(k) + "]", d);
        r.allow({"from", "to", "L", "R"});
        BranchSpec b;
        b.from = r.text("from");
        b.to = r.text("to");
        b.br.l = r.number("L");
        b.br.r = r.number("R", 0.0);
        out.push_back(std::move(b));
    }
    return out;
}

EventKind kind_from_name(const std::string& s, const std::string& path) {
    for (EventKind k : {EventKind::VoltageSag, EventKind::LineTrip, EventKind::FaultClear, EventKind::SetCurrentRefs,
                        EventKind::DampingOn, EventKind::DampingOff})
        if (s == event_kind_name(k)) return k;
    throw ValidationError(path, "unknown event kind '" + s + "'");
}

json branch_json(const Branch& b) { return json{{"L", b.l}, {"R", b.r}}; }

json branch_list_json(const std::vector<BranchSpec>& v) {
    json a = json::array();
    for (const auto& b : v) a.push_back({{"from", b.from}, {"to", b.to}, {"L", b.br.l}, {"R", b.br.r}});
    return a;
}

ScenarioConfig parse_root(const YAML::Node& root) {
    ScenarioConfig c;
    auto& d = c.defaults_applied;
    MapReader r(root, "", d);
    r.allow({"name", "base", "resistance_neglected", "grid", "gflc", "syncon", "network", "initial", "events", "sim",
             "analysis", "damping", "perturbation", "classify"});
    c.name = r.text("name", std::string("scenario"));

    MapReader base(r.get("base"), "base", d);
    base.allow({"S_MVA", "U_kV", "omega"});
    c.base.s_mva = base.number("S_MVA", 200.0);
    c.base.u_kv = base.number("U_kV", 100.0);
    c.base.omega_g = base.number("omega", 314.0);
    c.base.validate();

    c.resistance_neglected = r.boolean("resistance_neglected", true);
    c.has_network = r.has("network");

    if (r.has("grid")) {
        MapReader g(r.get("grid"), "grid", d);
        if (!g.has("Z")) g.allow({"L", "R", "U"});
        c.u_g = g.number("U", 1.0);
        YAML::Node gn = YAML::Clone(r.get("grid"));
        gn.remove("U");
        c.grid = read_branch(MapReader(gn, "grid", d), true);
    } else if (!c.has_network) {
        throw ValidationError("grid.L", "required key missing");
    }

    const YAML::Node gflc = r.get("gflc");
    if (!gflc || !gflc.IsSequence() || gflc.size() == 0) throw ValidationError("gflc", "at least one converter required");
    for (std::size_t k = 0; k < gflc.size(); ++k) {
        const std::string p = "gflc[" + std::to_string(k) + "]";
        MapReader g(gflc[k], p, d);
        g.allow({"L", "R", "k_p", "k_i", "k_d", "i_d", "i_q", "i_max", "k_q", "lvrt_threshold", "bus"});
        Branch b;
        b.l = g.number("L");
        b.r = g.number("R", 0.0);
        GflcControl ctl;
        ctl.k_p = g.number("k_p", 12.0);
        ctl.k_i = g.number("k_i", 100.0);
        ctl.k_d = g.number("k_d", 0.0);
        ctl.i_d_ref = g.number("i_d", 0.5);
        ctl.i_q_ref = g.number("i_q", 0.0);
        ctl.i_max = g.number("i_max", 1.5);
        ctl.k_q = g.number("k_q", 2.0);
        ctl.lvrt_threshold = g.number("lvrt_threshold", 0.9);
        c.gflc_bus.push_back(c.has_network ? g.text("bus") : g.text("bus", std::string("pcc")));
        c.gflc_branches.push_back(b);
        c.controls.push_back(ctl);
    }

    const YAML::Node syn = r.get("syncon");
    if (syn && !syn.IsSequence()) throw ValidationError("syncon", "expected a list");
    for (std::size_t k = 0; syn && k < syn.size(); ++k) {
        const std::string p = "syncon[" + std::to_string(k) + "]";
        MapReader s(syn[k], p, d);
        s.allow({"L", "R", "E", "T_s", "S_MVA", "D_s", "bus"});
        Branch b;
        b.l = s.number("L");
        b.r = s.number("R", 0.0);
        SynConMachine m;
        m.e_s = s.number("E", 1.0);
        m.t_s = s.number("T_s", 6.0);
        m.s_rated = s.number("S_MVA", c.base.s_mva);
        m.d_s = s.number("D_s", 2.0);
        c.syncon_bus.push_back(c.has_network ? s.text("bus") : s.text("bus", std::string("pcc")));
        c.syncon_branches.push_back(b);
        c.machines.push_back(m);
    }

    if (c.has_network) {
        MapReader n(r.get("network"), "network", d);
        n.allow({"buses", "branches"});
        const YAML::Node buses = n.get("buses");
        if (!buses || !buses.IsSequence()) throw ValidationError("network.buses", "required list missing");
        for (const auto& b : buses) c.buses.push_back(b.as<std::string>());
        if (!n.has("branches")) throw ValidationError("network.branches", "required list missing");
        c.network_branches = read_branch_list(n.get("branches"), "network.branches", d);
        if (!r.has("grid")) {
            auto it = std::find_if(c.network_branches.begin(), c.network_branches.end(),
                                   [](const BranchSpec& b) { return b.from == "grid" || b.to == "grid"; });
            if (it == c.network_branches.end()) throw ValidationError("network.branches", "no branch reaches the grid");
            c.grid = it->br;
        }
    }

    if (r.has("initial")) {
        const YAML::Node in = r.get("initial");
        if (in.IsScalar()) {
            if (in.as<std::string>() != "auto-sep") throw ValidationError("initial", "expected 'auto-sep' or a state");
        } else {
            MapReader s(in, "initial", d);
            s.allow({"delta", "d_omega", "theta", "varpi"});
            SystemState x;
            x.delta = s.numbers("delta");
            x.d_omega = s.numbers("d_omega");
            x.theta = s.numbers("theta");
            x.varpi = s.numbers("varpi");
            if (x.p() != static_cast<int>(c.machines.size()) || x.d_omega.size() != x.delta.size() ||
                x.n() != static_cast<int>(c.controls.size()) || x.varpi.size() != x.theta.size())
                throw ValidationError("initial", "state dimensions do not match the plant");
            c.initial = x;
        }
    } else {
        d.push_back("initial=auto-sep");
    }

    const YAML::Node evs = r.get("events");
    if (evs && !evs.IsSequence()) throw ValidationError("events", "expected a list");
    for (std::size_t k = 0; evs && k < evs.size(); ++k) {
        const std::string p = "events[" + std::to_string(k) + "]";
        MapReader e(evs[k], p, d);
        e.allow({"t", "kind", "u_g", "grid", "branches", "i_d", "i_q"});
        EventSpec ev;
        ev.t = e.number("t");
        ev.kind = kind_from_name(e.text("kind"), e.key_path("kind"));
        if (ev.kind == EventKind::VoltageSag) ev.u_g = e.number("u_g");
        if (ev.kind == EventKind::FaultClear) ev.u_g = e.number("u_g", 1.0);
        if (e.has("grid")) ev.grid = read_branch(MapReader(e.get("grid"), e.key_path("grid"), d), true);
        if (e.has("branches")) ev.branches = read_branch_list(e.get("branches"), e.key_path("branches"), d);
        ev.i_d = e.numbers("i_d");
        ev.i_q = e.numbers("i_q");
        if (ev.t < 0.0) throw ValidationError(e.key_path("t"), "must be >= 0");
        if (ev.kind == EventKind::SetCurrentRefs && ev.i_d.size() != c.controls.size())
            throw ValidationError(e.key_path("i_d"), "needs one value per converter");
        if (ev.kind == EventKind::VoltageSag && !(ev.u_g >= 0.0)) throw ValidationError(e.key_path("u_g"), "must be >= 0");
        if (!c.events.empty() && ev.t < c.events.back().t) throw ValidationError(e.key_path("t"), "events must be sorted by time");
        c.events.push_back(std::move(ev));
    }

    MapReader sim(r.get("sim"), "sim", d);
    sim.allow({"dt", "t_end", "decimation", "lvrt", "auto_damping", "damping_hold"});
    c.sim.dt = sim.number("dt", 1e-4);
    c.sim.t_end = sim.number("t_end", 8.0);
    c.sim.decimation = sim.integer("decimation", 10);
    c.sim.lvrt = sim.boolean("lvrt", true);
    c.sim.auto_damping = sim.boolean("auto_damping", true);
    c.sim.damping_hold = sim.number("damping_hold", 5.0);
    if (!(c.sim.dt > 0.0)) throw ValidationError("sim.dt", "must be > 0");
    if (c.sim.decimation < 1) throw ValidationError("sim.decimation", "must be >= 1");
    if (!c.events.empty() && !(c.sim.t_end > c.events.back().t))
        throw ValidationError("sim.t_end", "must exceed the last event time");
    if (!(c.sim.t_end > 0.0)) throw ValidationError("sim.t_end", "must be > 0");

    MapReader an(r.get("analysis"), "analysis", d);
    an.allow({"metrics", "zone", "timescale_check", "damping_design"});
    c.analysis.metrics = an.boolean("metrics", true);
    c.analysis.zone = an.boolean("zone", false);
    c.analysis.timescale_check = an.boolean("timescale_check", false);
    c.analysis.damping_design = an.boolean("damping_design", false);

    MapReader dm(r.get("damping"), "damping", d);
    dm.allow({"t_f", "raw_d_omega", "hold_after_fault", "kd1_rate_units"});
    c.damping.t_f = dm.number("t_f", 0.2);
    c.damping.raw_d_omega = dm.boolean("raw_d_omega", false);
    c.damping.kd1_rate_units = dm.boolean("kd1_rate_units", false);
    c.damping.hold_after_fault = dm.number("hold_after_fault", c.sim.damping_hold);

    MapReader pt(r.get("perturbation"), "perturbation", d);
    pt.allow({"converter", "window_varpi", "varpi_cap_factor", "hysteresis", "arc_step"});
    c.perturbation.converter = pt.integer("converter", 0);
    c.perturbation.window_varpi = pt.number("window_varpi", 200.0);
    c.perturbation.varpi_cap_factor = pt.number("varpi_cap_factor", 2.0);
    c.perturbation.hysteresis = pt.number("hysteresis", kSwitchHysteresis);
    c.perturbation.arc_step = pt.number("arc_step", 1e-3);
    if (c.perturbation.converter < 0 || c.perturbation.converter >= static_cast<int>(c.controls.size()))
        throw ValidationError("perturbation.converter", "out of range");

    MapReader cl(r.get("classify"), "classify", d);
    cl.allow({"min_post_window", "slip_limit", "growth_window", "rotor_angle_limit"});
    c.classify.min_post_window = cl.number("min_post_window", 3.0);
    c.classify.slip_limit = cl.number("slip_limit", 2.0 * std::numbers::pi);
    c.classify.growth_window = cl.number("growth_window", 1.0);
    c.classify.rotor_angle_limit = cl.number("rotor_angle_limit", 2.0 * std::numbers::pi);

    for (std::size_t k = 0; k < c.controls.size(); ++k) {
        c.controls[k].validate(static_cast<int>(k));
        c.gflc_branches[k].validate("gflc[" + std::to_string(k) + "]");
    }
    for (std::size_t k = 0; k < c.machines.size(); ++k) {
        c.machines[k].validate(static_cast<int>(k));
        c.syncon_branches[k].validate("syncon[" + std::to_string(k) + "]");
    }
    // Building the scenario checks the topology and every event's network.
    (void)c.build();
    return c;
}

}  // namespace

NetworkTopology ScenarioConfig::topology(const Branch& grid_branch, const std::vector<BranchSpec>& net) const {
    NetworkTopology t;
    t.gflc_branches = gflc_branches;
    t.syncon_branches = syncon_branches;
    t.grid_branch = grid_branch;
    t.resistance_neglected = resistance_neglected;
    if (has_network) {
        std::vector<GraphBranch> g;
        for (std::size_t k = 0; k < syncon_branches.size(); ++k)
            g.push_back({"syncon" + std::to_string(k), syncon_bus[k], syncon_branches[k]});
        for (std::size_t k = 0; k < gflc_branches.size(); ++k)
            g.push_back({"gflc" + std::to_string(k), gflc_bus[k], gflc_branches[k]});
        for (const auto& b : net) g.push_back({b.from, b.to, b.br});
        t.cluster_layout = build_layout(t.p(), t.n(), buses, g, resistance_neglected);
    }
    t.validate();
    return t;
}

Scenario ScenarioConfig::build() const {
    Scenario sc;
    sc.plant.base = base;
    sc.plant.topo = topology(grid, network_branches);
    sc.plant.machines = machines;
    sc.plant.controls = controls;
    sc.plant.u_g = u_g;
    sc.plant.refresh();
    sc.initial = initial;
    sc.sim = sim;
    Branch cur_grid = grid;
    std::vector<BranchSpec> cur_net = network_branches;
    for (const auto& e : events) {
        Event ev;
        ev.time = e.t;
        ev.kind = e.kind;
        ev.u_g = e.u_g;
        if (e.grid || e.branches) {
            if (e.grid) cur_grid = *e.grid;
            if (e.branches) cur_net = *e.branches;
            ev.topology = topology(cur_grid, cur_net);
        }
        ev.i_d_ref = e.i_d;
        ev.i_q_ref = e.i_q;
        sc.events.push_back(std::move(ev));
    }
    return sc;
}

json ScenarioConfig::to_json() const {
    json j;
    j["name"] = name;
    j["base"] = {{"S_MVA", base.s_mva}, {"U_kV", base.u_kv}, {"omega", base.omega_g}};
    j["resistance_neglected"] = resistance_neglected;
    j["grid"] = branch_json(grid);
    j["grid"]["U"] = u_g;
    j["gflc"] = json::array();
    for (std::size_t k = 0; k < controls.size(); ++k) {
        const auto& g = controls[k];
        j["gflc"].push_back({{"L", gflc_branches[k].l}, {"R", gflc_branches[k].r}, {"k_p", g.k_p}, {"k_i", g.k_i},
                             {"k_d", g.k_d}, {"i_d", g.i_d_ref}, {"i_q", g.i_q_ref}, {"i_max", g.i_max},
                             {"k_q", g.k_q}, {"lvrt_threshold", g.lvrt_threshold}, {"bus", gflc_bus[k]}});
    }
    j["syncon"] = json::array();
    for (std::size_t k = 0; k < machines.size(); ++k) {
        const auto& m = machines[k];
        j["syncon"].push_back({{"L", syncon_branches[k].l}, {"R", syncon_branches[k].r}, {"E", m.e_s}, {"T_s", m.t_s},
                               {"S_MVA", m.s_rated}, {"D_s", m.d_s}, {"bus", syncon_bus[k]}});
    }
    if (has_network) j["network"] = {{"buses", buses}, {"branches", branch_list_json(network_branches)}};
    if (initial)
        j["initial"] = {{"delta", initial->delta}, {"d_omega", initial->d_omega}, {"theta", initial->theta},
                        {"varpi", initial->varpi}};
    else
        j["initial"] = "auto-sep";
    j["events"] = json::array();
    for (const auto& e : events) {
        json ev{{"t", e.t}, {"kind", event_kind_name(e.kind)}};
        if (e.kind == EventKind::VoltageSag || e.kind == EventKind::FaultClear) ev["u_g"] = e.u_g;
        if (e.grid) ev["grid"] = branch_json(*e.grid);
        if (e.branches) ev["branches"] = branch_list_json(*e.branches);
        if (!e.i_d.empty()) ev["i_d"] = e.i_d;
        if (!e.i_q.empty()) ev["i_q"] = e.i_q;
        j["events"].push_back(ev);
    }
    j["sim"] = {{"dt", sim.dt},       {"t_end", sim.t_end},           {"decimation", sim.decimation},
                {"lvrt", sim.lvrt},   {"auto_damping", sim.auto_damping}, {"damping_hold", sim.damping_hold}};
    j["analysis"] = {{"metrics", analysis.metrics},
                     {"zone", analysis.zone},
                     {"timescale_check", analysis.timescale_check},
                     {"damping_design", analysis.damping_design}};
    j["damping"] = {{"t_f", damping.t_f}, {"raw_d_omega", damping.raw_d_omega}, {"hold_after_fault", damping.hold_after_fault}, {"kd1_rate_units", damping.kd1_rate_units}};
    j["perturbation"] = {{"converter", perturbation.converter},
                         {"window_varpi", perturbation.window_varpi},
                         {"varpi_cap_factor", perturbation.varpi_cap_factor},
                         {"hysteresis", perturbation.hysteresis},
                         {"arc_step", perturbation.arc_step}};
    j["classify"] = {{"min_post_window", classify.min_post_window},
                     {"slip_limit", classify.slip_limit},
                     {"growth_window", classify.growth_window},
                     {"rotor_angle_limit", classify.rotor_angle_limit}};
    return j;
}

std::string ScenarioConfig::canonical() const { return to_json().dump(2) + "\n"; }

std::string ScenarioConfig::hash() const { return sha256_hex(canonical()); }

ScenarioConfig parse_scenario(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ParseError(e.mark.line + 1, e.mark.column + 1, e.msg);
    }
    if (!root || !root.IsMap()) throw ParseError(1, 1, "scenario must be a mapping");
    ScenarioConfig c = parse_root(root);
    c.source_text = text;
    return c;
}

ScenarioConfig parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path, "cannot read scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string with_parameter(const std::string& text, const std::string& path, double value) {
    YAML::Node root = YAML::Load(text);
    if (path == "alpha") {
        if (!(value >= 0.0 && value < 1.0)) throw ValidationError("alpha", "must lie in [0, 1)");
        if (value == 0.0) {
            root["syncon"] = YAML::Node(YAML::NodeType::Sequence);
        } else {
            if (!root["syncon"] || !root["syncon"].IsSequence() || root["syncon"].size() == 0)
                throw ValidationError("alpha", "needs syncon[0] to place");
            const Plant post = parse_scenario(text).build().final_plant();
            const double lg = post.topo.grid_branch.l;
            root["syncon"][0]["L"] = lg * (1.0 - value) / value;
        }
    } else {
        YAML::Node cur = root;
        std::vector<std::string> toks;
        {
            std::stringstream ss(path);
            for (std::string tok; std::getline(ss, tok, '.');) toks.push_back(tok);
        }
        for (std::size_t t = 0; t < toks.size(); ++t) {
            std::string key = toks[t];
            std::optional<std::size_t> idx;
            if (const auto lb = key.find('['); lb != std::string::npos) {
                idx = std::stoul(key.substr(lb + 1));
                key = key.substr(0, lb);
            }
            if (!cur.IsMap()) throw ValidationError(path, "does not resolve");
            // A missing leaf that has a default is created; unknown names are
            // rejected later by the schema check.
            if (!cur[key] && !idx && t + 1 == toks.size()) {
                cur[key] = value;
                cur.reset(cur[key]);
                break;
            }
            YAML::Node next = cur[key];
            if (!next) throw ValidationError(path, "does not resolve");
            if (idx) {
                if (!next.IsSequence() || *idx >= next.size()) throw ValidationError(path, "index out of range");
                next.reset(next[*idx]);
            }
            cur.reset(next);
        }
        if (!cur.IsScalar()) throw ValidationError(path, "is not a scalar field");
        cur = value;
    }
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << root;
    return out.c_str();
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int k = 0; k < len; ++k) {
        s.push_back(hex[md[k] >> 4]);
        s.push_back(hex[md[k] & 15]);
    }
    return s;
}

}  // namespace syncstab
