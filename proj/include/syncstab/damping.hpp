#pragma once

#include <complex>
#include <string>

#include "syncstab/dynamics.hpp"
#include "syncstab/perturbation.hpp"

namespace syncstab {

// Energy-dissipation candidate, in the units of the PLL swing equation's
// numerator (pu power per rad/s). Divide by T* for the rate form.
double kd1(const GflcControl& g, double u_e, const DisturbanceBounds& b);
// Overdamping candidate; negative when the loop is already overdamped.
double kd2(const GflcControl& g, double u_ci);
// Candidate that lets the tracking lag reach pi/2 within one swing.
double kd3(const GflcControl& g, double u_ci, double d_omega_max, double omega_g);

// First-swing SynCon speed estimate alpha*E*sum(I)*t_f/T_s (pu). With
// `raw` the division by the inertia constant is skipped.
double d_omega_max_estimate(double alpha, double e_s, double sum_current, double t_f, double t_s, bool raw = false);

struct DampingAssumptions {
    double t_f = 0.2;               // s, assumed fault duration
    double hold_after_fault = 5.0;  // s
    bool raw_d_omega = false;
    // Compare kd1 after conversion to rate units (divided by T*). Off by
    // default: the energy-unit value enters the max as written.
    bool kd1_rate_units = false;
};

struct DampingDesign {
    int converter = 0;
    double k_d1 = 0.0;         // value entering the max
    double k_d1_energy = 0.0;  // numerator units
    double k_d1_rate = 0.0;    // k_d1_energy / T*
    double k_d2 = 0.0;
    double k_d3 = 0.0;
    double k_d = 0.0;
    std::string binding;       // "kd1", "kd2" or "kd3"
    double d_omega_max = 0.0;
    double t_f = 0.0;
    double u_ci = 0.0;
    double u_e = 0.0;
    double t_star = 0.0;
    std::string trigger = "lvrt_entry";
    double hold_after_fault = 0.0;
};

// Candidates for converter i evaluated at the pre-fault equilibrium of `plant`.
DampingDesign design_kd(const Plant& plant, int i, const DampingAssumptions& a = {});
DampingDesign select_kd(double k_d1, double k_d2, double k_d3);

struct LinearizedPll {
    double k_p = 0.0, k_i = 0.0, k_d = 0.0;
    double u_ci = 1.0;
    double omega_g = 314.0;
    std::complex<double> poles[2];

    static LinearizedPll make(double k_p, double k_i, double k_d, double u_ci, double omega_g = 314.0);
    double damping_coefficient() const { return k_p * u_ci + k_d; }
    double stiffness() const { return k_i * u_ci; }
    bool overdamped() const;
};

// Steady phase lag delta - theta under a rotor speed deviation d_omega (pu).
double tracking_lag(const LinearizedPll& lin, double d_omega);

// Lag at t_end of the linear PLL driven by delta(t) = omega_g*d_omega*t,
// starting locked at rest.
double simulate_ramp_lag(const LinearizedPll& lin, double d_omega, double t_end, double dt = 1e-5);

}  // namespace syncstab
