// Command-line front end: simulate, sweep, metrics, boundary, design-damping, report.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "syncstab/runner.hpp"

using namespace syncstab;
using json = nlohmann::json;

namespace {

constexpr int kExitUnstable = 4;

struct Common {
    std::string config;
    std::string out_dir = "out";
    double dt = 0.0;
    std::uint64_t seed = 1;
    bool fail_on_unstable = false;
    std::string format = "csv";
};

void add_common(CLI::App* sub, Common& c, bool with_config = true) {
    if (with_config) sub->add_option("config", c.config, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", c.out_dir, "artifact directory");
    sub->add_option("--dt", c.dt, "override the integration step (s)");
    sub->add_option("--seed", c.seed, "Monte-Carlo seed");
    sub->add_flag("--fail-on-unstable", c.fail_on_unstable, "exit with 4 when instability is detected");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

RunOptions options_of(const Common& c) {
    RunOptions o;
    o.out_dir = c.out_dir;
    if (c.dt > 0.0) o.dt = c.dt;
    o.seed = c.seed;
    o.format = c.format;
    return o;
}

int finish(const RunSummary& s, const Common& c) {
    std::cout << s.to_json().dump(2) << "\n";
    std::fprintf(stderr, "wall clock: %.3f s\n", s.wall_clock_s);
    if (c.fail_on_unstable && ((s.report && s.report->any_unstable()) || s.diverged)) return kExitUnstable;
    return 0;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError("--values", "not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ValidationError("--values", "empty list");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synchronization stability analysis of converter and synchronous-condenser plants"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    Common sim_c, sweep_c, met_c, bnd_c, des_c;
    auto* sim = app.add_subcommand("simulate", "simulate a scenario and classify the outcome");
    add_common(sim, sim_c);

    auto* swp = app.add_subcommand("sweep", "run a scenario over a list of parameter values");
    add_common(swp, sweep_c);
    std::string param, values_text;
    int jobs = 1;
    swp->add_option("--param", param, "parameter path, e.g. syncon[0].L or alpha")->required();
    swp->add_option("--values", values_text, "comma-separated values")->required();
    swp->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

    auto* met = app.add_subcommand("metrics", "simulate and report stability metrics");
    add_common(met, met_c);

    auto* bnd = app.add_subcommand("boundary", "trace the uncertainty boundary zone");
    add_common(bnd, bnd_c);
    int mc_runs = 0;
    bnd->add_option("--monte-carlo", mc_runs, "soundness runs on each side of the zone");

    auto* des = app.add_subcommand("design-damping", "design the PLL damping coefficient");
    add_common(des, des_c);

    auto* rep = app.add_subcommand("report", "render a summary JSON file");
    std::string summary_path;
    rep->add_option("summary", summary_path, "summary JSON")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sim) {
            const ScenarioConfig cfg = parse_scenario_file(sim_c.config);
            return finish(run(cfg, options_of(sim_c)), sim_c);
        }
        if (*met) {
            const ScenarioConfig cfg = parse_scenario_file(met_c.config);
            RunOptions o = options_of(met_c);
            o.force_metrics = true;
            return finish(run(cfg, o), met_c);
        }
        if (*bnd) {
            const ScenarioConfig cfg = parse_scenario_file(bnd_c.config);
            RunOptions o = options_of(bnd_c);
            o.simulate = false;
            o.force_zone = true;
            o.monte_carlo_runs = mc_runs;
            return finish(run(cfg, o), bnd_c);
        }
        if (*des) {
            const ScenarioConfig cfg = parse_scenario_file(des_c.config);
            RunOptions o = options_of(des_c);
            o.simulate = false;
            o.force_design = true;
            const RunSummary s = run(cfg, o);
            json d = json::array();
            for (const auto& x : s.designs) d.push_back(design_json(x));
            std::cout << (d.size() == 1 ? d[0] : d).dump(2) << "\n";
            return 0;
        }
        if (*swp) {
            const ScenarioConfig cfg = parse_scenario_file(sweep_c.config);
            const auto rows = sweep(cfg, param, parse_values(values_text), jobs, options_of(sweep_c));
            std::ostringstream table;
            if (sweep_c.format == "json") {
                table << sweep_json(rows).dump(2) << "\n";
            } else {
                write_sweep_csv(table, rows);
            }
            std::cout << table.str();
            if (!sweep_c.out_dir.empty()) {
                std::filesystem::create_directories(sweep_c.out_dir);
                const auto p = std::filesystem::path(sweep_c.out_dir) /
                               (cfg.name + (sweep_c.format == "json" ? "_sweep.json" : "_sweep.csv"));
                std::ofstream(p, std::ios::binary) << table.str();
                std::fprintf(stderr, "sweep table: %s\n", p.string().c_str());
            }
            if (sweep_c.fail_on_unstable)
                for (const auto& r : rows)
                    if (r.summary && r.summary->report && r.summary->report->any_unstable()) return kExitUnstable;
            return 0;
        }
        if (*rep) {
            std::ifstream f(summary_path);
            json s;
            try {
                s = json::parse(f);
            } catch (const json::parse_error& e) {
                throw ParseError(1, static_cast<int>(e.byte), e.what());
            }
            std::cout << render_report(s);
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
