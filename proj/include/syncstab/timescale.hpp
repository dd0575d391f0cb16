#pragma once

#include <utility>
#include <vector>

#include "syncstab/dynamics.hpp"

namespace syncstab {

// One converter's fast subsystem at frozen rotor angles, with the other
// converters moving coherently. All powers in pu, speeds in rad/s.
struct FastContext {
    double u_e = 1.0;          // equivalent source magnitude
    double theta_delta = 0.0;  // equivalent source angle
    double p_m = 0.0;          // coherent equivalent mechanical power
    double q_x = 0.0;          // reactive (frequency-scaled) part of p_m
    double k_p = 12.0, k_i = 100.0, omega_g = 314.0;
    double k_d = 0.0;          // damping loop, rate units
    // Non-coherence data used by the disturbance bounds.
    double x_mut = 0.0;        // mutual reactance to the other converters
    double i_cij_star = 0.0;   // coherent sum of the other converters' d currents
    double i_max_others = 0.0; // sum of the other converters' current limits
    double varpi_cap_factor = 2.0;

    double t_star() const { return (1.0 - k_p * q_x / omega_g) / k_i; }
    double p_e(double theta) const;
    double d_star(double theta) const;
    // Nominal right-hand side T* dvarpi/dt (without the damping loop).
    double f(double theta, double varpi) const;
};

FastContext fast_context(const Plant& plant, const Currents& c, int i, const std::vector<double>& frozen_delta);

// Single-cluster lossless context built from the closed-form coupling.
FastContext analytic_fast_context(double alpha, double e_s, double u_g, double delta, double l_c, double l_g,
                                  double i_d, double i_cij, const GflcControl& g, double omega_g);

struct TimescaleSplit {
    double epsilon = 0.0;
    double tau_scale = 0.0;  // fast time tau = t / tau_scale
    std::vector<double> frozen_delta;
    bool valid = false;      // epsilon < 0.1
};

constexpr double kSplitValidLimit = 0.1;

// Single-cluster closed form: {1 - k_P[(L_c+(1-a)L_g) i_d + (1-a)L_g i_cij]/w_g}/(k_I T_s).
double epsilon(const GflcControl& g, const NetworkTopology& topo, int i, double i_d, double i_cij, double t_s,
               double omega_g);
// Network form: T_ci at coherent operation over the SynCon inertia on the system base.
double epsilon(const Plant& plant, const Currents& c, int i);
TimescaleSplit split(const Plant& plant, const Currents& c, const std::vector<double>& frozen_delta);

// PLL rows of the full model with the rotor held at (frozen_delta, frozen_d_omega).
std::pair<std::vector<double>, std::vector<double>> fast_subsystem_rhs(
    const std::vector<double>& theta, const std::vector<double>& varpi, const std::vector<double>& frozen_delta,
    const std::vector<double>& frozen_d_omega, const Plant& plant, const Currents& c, bool damping_active);

// Stable-branch PLL angles with every PLL settled (varpi = 0).
std::vector<double> solve_quasi_steady_pll(const std::vector<double>& delta, const Plant& plant, const Currents& c);

std::pair<std::vector<double>, std::vector<double>> slow_subsystem_rhs(const std::vector<double>& delta,
                                                                       const std::vector<double>& d_omega,
                                                                       const Plant& plant, const Currents& c);

struct SepExistence {
    bool exists = true;
    double margin = 0.0;      // min over converters of U_E - |P_M*|
    bool sufficient = false;  // delta-independent alpha condition holds
    double alpha_threshold = 1.0;
};

// Lowest alpha guaranteeing a PLL equilibrium at every rotor angle.
double sep_alpha_threshold(double e_s, double u_g, double p_norm);

SepExistence sep_exists(const std::vector<double>& delta, const Plant& plant, const Currents& c);

}  // namespace syncstab
