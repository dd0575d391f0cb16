#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "syncstab/config.hpp"

namespace syncstab {

struct RunOptions {
    std::string out_dir;             // empty: no artifacts written
    std::optional<double> dt;        // overrides sim.dt
    std::uint64_t seed = 1;
    std::string format = "csv";      // trajectory format: csv or json
    bool force_metrics = false;
    bool force_zone = false;
    bool force_design = false;
    bool simulate = true;
    int monte_carlo_runs = 0;        // zone soundness runs when a zone is traced
};

struct ZoneCheck {
    int inside_runs = 0, inside_converged = 0;
    int outside_runs = 0, outside_diverged = 0;
};

struct RunSummary {
    std::string name;
    std::string hash;
    std::vector<std::string> defaults_applied;
    std::optional<StabilityReport> report;
    bool diverged = false;
    double diverged_at = 0.0;
    std::optional<TimescaleSplit> split;
    std::vector<DampingDesign> designs;
    std::optional<BoundaryZone> zone;
    std::optional<ZoneCheck> zone_check;
    std::map<std::string, std::string> artifacts;
    double wall_clock_s = 0.0;  // not serialized, so artifacts stay reproducible

    nlohmann::json to_json() const;
};

nlohmann::json report_json(const StabilityReport& r);
nlohmann::json design_json(const DampingDesign& d);

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec);
nlohmann::json trajectory_json(const TrajectoryRecord& rec);
void write_zone_csv(std::ostream& os, const BoundaryZone& zone);

// Context of the zone analysis: converter `i` at the pre-fault equilibrium.
FastContext zone_context(const ScenarioConfig& cfg);
// Monte-Carlo soundness check of a traced zone: random admissible
// disturbances held for 10 ms over the first second, then `settle` seconds
// in total for the weakly damped PLLs to reach the equilibrium.
ZoneCheck check_zone(const FastContext& ctx, const BoundaryZone& zone, int runs, std::uint64_t seed,
                     double inner_margin = 0.02, double settle = 20.0);

RunSummary run(const ScenarioConfig& cfg, const RunOptions& opt = {});

struct SweepRow {
    double value = 0.0;
    std::optional<RunSummary> summary;
    std::string error;
};

std::vector<SweepRow> sweep(const ScenarioConfig& cfg, const std::string& path, const std::vector<double>& values,
                            int parallelism = 1, const RunOptions& opt = {});
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);

// Human-readable digest of a summary JSON document.
std::string render_report(const nlohmann::json& summary);

}  // namespace syncstab
