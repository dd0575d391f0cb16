#pragma once

#include <optional>
#include <string>
#include <vector>

#include "syncstab/dynamics.hpp"
#include "syncstab/timescale.hpp"

namespace syncstab {

// Equivalent mechanical power of converter i in closed form for a single
// cluster (star at one PCC). With `coherent` the other converters' currents
// are added in phase; otherwise only converter i's own current counts.
double pmci_star(const NetworkTopology& topo, const Currents& c, int i, bool coherent = true);

struct SepSolution {
    double theta_star = 0.0;
    double theta_delta = 0.0;
    double u_e = 0.0;
    bool exists = false;
};

SepSolution solve_sep(const FastContext& ctx);
SepSolution solve_sep(const Plant& plant, const Currents& c, int i, const std::vector<double>& frozen_delta);

// Half-width of the positive-damping region around theta_delta.
double theta_b(double k_p, double k_i, double omega_g, double p_m, double u_e);
double theta_b(const FastContext& ctx);

// Transient energy of one PLL relative to its stable equilibrium.
double energy(const FastContext& ctx, double theta, double varpi);
// dV/dt for disturbance u (energy units) and damping k_d (rate units).
double energy_rate(const FastContext& ctx, double theta, double varpi, double u, double k_d);

enum class PllVerdict { Stable, Unstable, TrackingSyncon, SepLost };
enum class SynconVerdict { Stable, Unstable };
enum class InstabilitySource { None, Pll, Syncon };

const char* verdict_name(PllVerdict v);
const char* verdict_name(SynconVerdict v);
const char* source_name(InstabilitySource s);

struct ClassifyOptions {
    double min_post_window = 3.0;  // s of trajectory required after clearance
    double slip_limit = 6.283185307179586;
    double growth_window = 1.0;    // s
    double rotor_angle_limit = 6.283185307179586;
};

struct StabilityReport {
    double alpha = 0.0;
    std::vector<PllVerdict> pll;
    std::vector<SynconVerdict> syncon;
    InstabilitySource dominant_source = InstabilitySource::None;
    bool pll_sep_lost = false;                      // any converter lost its equilibrium
    std::vector<std::optional<double>> theta_b;     // rad, per converter at clearance
    std::vector<double> p_c_clearance;              // pu, per SynCon
    std::vector<std::optional<double>> energy_at_clearance;
    std::vector<double> uep;                        // rad, per SynCon

    bool any_unstable() const;
    // "none", "PLL", "PLL-sep-lost" or "SynCon".
    std::string source_label() const;
};

// Rotor angle beyond which each SynCon is past its unstable equilibrium on the
// post-fault plant.
std::vector<double> syncon_uep(const Plant& post_fault);

StabilityReport classify_instability(const TrajectoryRecord& rec, const Scenario& sc,
                                     const ClassifyOptions& opt = {});

}  // namespace syncstab
