#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "syncstab/damping.hpp"
#include "syncstab/dynamics.hpp"
#include "syncstab/metrics.hpp"
#include "syncstab/perturbation.hpp"

namespace syncstab {

inline constexpr const char* kToolVersion = "syncstab 0.1.0";

struct AnalysisToggles {
    bool metrics = true;
    bool zone = false;
    bool timescale_check = false;
    bool damping_design = false;
};

struct PerturbationOptions {
    int converter = 0;
    double window_varpi = 200.0;
    double varpi_cap_factor = 2.0;
    double hysteresis = kSwitchHysteresis;
    double arc_step = 1e-3;
};

struct BranchSpec {
    std::string from, to;
    Branch br;
};

struct EventSpec {
    double t = 0.0;
    EventKind kind = EventKind::VoltageSag;
    double u_g = 1.0;
    std::optional<Branch> grid;                     // replaces the grid branch
    std::optional<std::vector<BranchSpec>> branches; // replaces the network branches
    std::vector<double> i_d, i_q;
};

// Validated scenario with every default made explicit.
struct ScenarioConfig {
    std::string name;
    PerUnitBase base;
    bool resistance_neglected = true;
    Branch grid;
    double u_g = 1.0;
    std::vector<GflcControl> controls;
    std::vector<Branch> gflc_branches;
    std::vector<std::string> gflc_bus;
    std::vector<SynConMachine> machines;
    std::vector<Branch> syncon_branches;
    std::vector<std::string> syncon_bus;
    bool has_network = false;
    std::vector<std::string> buses;
    std::vector<BranchSpec> network_branches;
    std::optional<SystemState> initial;  // empty means auto-sep
    std::vector<EventSpec> events;
    SimOptions sim;
    AnalysisToggles analysis;
    DampingAssumptions damping;
    PerturbationOptions perturbation;
    ClassifyOptions classify;

    std::vector<std::string> defaults_applied;
    std::string source_text;

    NetworkTopology topology(const Branch& grid_branch, const std::vector<BranchSpec>& net) const;
    Scenario build() const;

    nlohmann::json to_json() const;
    // Sorted-key serialization; parsing it back yields the same canonical text.
    std::string canonical() const;
    // SHA-256 of the canonical text, hex encoded.
    std::string hash() const;
};

ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig parse_scenario_file(const std::string& path);

// Copy of `text` with the scalar at `path` (e.g. "syncon[0].L", "sim.dt")
// replaced. The virtual path "alpha" sets syncon[0].L so that the final
// plant has the requested coupling coefficient (alpha = 0 removes the SynCon).
std::string with_parameter(const std::string& text, const std::string& path, double value);

std::string sha256_hex(const std::string& data);

}  // namespace syncstab
