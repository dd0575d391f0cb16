#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "syncstab/dynamics.hpp"
#include "syncstab/timescale.hpp"

namespace syncstab {

// Non-coherent disturbance acting on converter i: the actual numerator of its
// PLL equation minus the coherent nominal one, with the rotor frozen at x.delta.
double u_i(const SystemState& x, const Plant& plant, const Currents& c, int i);

struct DisturbanceBounds {
    double u_max = 0.0;
    double u_min = 0.0;
    std::vector<double> i_cj_max;
};

// Bounds on u_i at speed varpi for states whose angle spread stays within
// pi/2, with |varpi_i - varpi_j| capped at cap_factor*|varpi|.
DisturbanceBounds bounds(const Plant& plant, const Currents& c, int i, double varpi, double cap_factor = 2.0);
// Single-cluster form driven by the mutual reactance stored in the context.
DisturbanceBounds bounds(const FastContext& ctx, double varpi);
// Growth of the single-cluster bounds per rad/s of PLL speed (energy units).
double speed_disturbance_gain(const FastContext& ctx);

enum class SwitchMode { Nominal, EnergyMax, EnergyMin };

constexpr double kSwitchHysteresis = 1e-9;

// Disturbance applied by a switched system at speed varpi.
double switched_u(const FastContext& ctx, SwitchMode mode, double varpi, double hysteresis = kSwitchHysteresis);
// (dtheta/dt, dvarpi/dt) of the single-PLL fast system under `mode`; the
// damping loop in ctx.k_d is always on.
std::pair<double, double> switched_rhs(const FastContext& ctx, SwitchMode mode, double theta, double varpi,
                                       double hysteresis = kSwitchHysteresis);

struct Point2 {
    double theta = 0.0, varpi = 0.0;
};
using Polyline = std::vector<Point2>;

struct ZoneOptions {
    double window_varpi = 200.0;  // rad/s
    double arc_step = 1e-3;
    double seed = 1e-5;
    double dt = 1e-4;
    double hysteresis = kSwitchHysteresis;
    long max_steps = 2000000;
    // Nominal region includes the tails past both saddles. The switched
    // boundaries are always limited to the strip between the saddles.
    bool nominal_tails = true;
};

struct StabilityBoundary {
    Polyline polygon;   // closed region, first point repeated at the end
    Point2 uep_upper;   // saddle reached from varpi > 0
    Point2 uep_lower;   // saddle reached from varpi < 0, shifted by -2 pi
    bool clipped = false;
    // A manifold came back onto the switching line instead of reaching a
    // saddle edge; the worst-case system has no isolated equilibrium then.
    bool closed_on_switching_line = false;
    // The worst-case disturbance pumps more energy than the PLL damps at the
    // switched equilibrium; nothing is guaranteed and the polygon is empty.
    bool anti_damped = false;

    // Even-odd test through an edge index binned along varpi.
    bool contains(Point2 p) const;
    void build_index();

private:
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<std::vector<std::uint32_t>> bins_;
};

struct BoundaryZone {
    StabilityBoundary gamma_b1;  // inner, worst-case disturbance
    StabilityBoundary gamma_b2;  // outer, best-case disturbance
    StabilityBoundary nominal;
    Point2 uep;                  // nominal saddle
    Point2 sep;
};

// Saddle of the switched system with constant disturbance u.
double uep_angle(const FastContext& ctx, double u);

StabilityBoundary trace_boundary(const FastContext& ctx, SwitchMode mode, const ZoneOptions& opt = {});
BoundaryZone trace_zone(const FastContext& ctx, const ZoneOptions& opt = {});

enum class ZoneMembership { InsideInner, InAnnulus, Outside };
const char* membership_name(ZoneMembership m);

bool polygon_contains(const Polyline& poly, Point2 p);
double polygon_area(const Polyline& poly);
ZoneMembership zone_membership(Point2 p, const BoundaryZone& zone);

// Fast single-PLL trajectory under an arbitrary disturbance u(t, theta, varpi).
struct FastRun {
    double theta = 0.0, varpi = 0.0;
    bool diverged = false;
};
FastRun simulate_fast(const FastContext& ctx, Point2 x0, const std::function<double(double, double, double)>& u,
                      double t_end, double dt = 1e-4);

// Whether a fast run ended at the equilibrium it started next to.
bool converged_to_sep(const FastContext& ctx, const FastRun& run, double tol = 1e-2);

}  // namespace syncstab
