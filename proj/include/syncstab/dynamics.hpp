#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "syncstab/errors.hpp"
#include "syncstab/network.hpp"

namespace syncstab {

struct SystemState {
    std::vector<double> delta;    // rad, per SynCon
    std::vector<double> d_omega;  // pu, per SynCon
    std::vector<double> theta;    // rad, per converter
    std::vector<double> varpi;    // rad/s, per converter

    static SystemState zeros(int p, int n);
    int p() const { return static_cast<int>(delta.size()); }
    int n() const { return static_cast<int>(theta.size()); }
    std::vector<double> pack() const;
    static SystemState unpack(const std::vector<double>& x, int p, int n);
    bool finite() const;
};

struct GflcControl {
    double k_p = 12.0;
    double k_i = 100.0;
    double k_d = 0.0;
    double i_d_ref = 0.5;
    double i_q_ref = 0.0;
    double i_max = 1.5;
    double k_q = 2.0;
    double lvrt_threshold = 0.9;

    void validate(int idx) const;
};

struct SynConMachine {
    double e_s = 1.0;
    double t_s = 6.0;        // s, on the SynCon rating
    double s_rated = 200.0;  // MVA
    double d_s = 2.0;

    // Inertia constant on the system power base.
    double t_s_system(double s_base) const { return t_s * s_rated / s_base; }
    void validate(int idx) const;
};

struct Currents {
    std::vector<double> id, iq;
};

// Electrical context of the plant at one instant.
struct Plant {
    PerUnitBase base;
    NetworkTopology topo;
    ReducedNetwork net;
    std::vector<SynConMachine> machines;
    std::vector<GflcControl> controls;
    double u_g = 1.0;

    int n() const { return topo.n(); }
    int p() const { return topo.p(); }
    // Recompute the reduced network after a topology change.
    void refresh() { net = reduce_network(topo); }
    Currents steady_currents() const;
};

struct PccVoltage {
    std::vector<cplx> phasor;      // converter terminal voltage
    std::vector<double> magnitude;
    std::vector<double> u_q;       // q-axis component in each PLL frame
};

PccVoltage pcc_voltage(const SystemState& x, const Plant& plant, const Currents& c);

// Every term of the converter and SynCon equations at one state.
struct PowerTerms {
    std::vector<double> p_eci, p_mci, d_ci, d_cij, t_ci, c_i;
    std::vector<double> p_e, p_c, p_es;  // per SynCon
};

PowerTerms power_terms(const SystemState& x, const Plant& plant, const Currents& c);

// Equivalent mechanical power of each SynCon (converter current share minus
// its self-conductance loss).
std::vector<double> pc_power(const SystemState& x, const Plant& plant, const Currents& c);

SystemState full_rhs(const SystemState& x, const Plant& plant, const Currents& c, bool damping_active);

std::pair<double, double> lvrt_current_refs(double u_pcc, const GflcControl& ctl, double i_d_pre);

// Converter currents with the LVRT loop closed through the network. `active`
// reports which converters are in ride-through mode. `hint` seeds the
// fixed-point iteration (e.g. with the previous step's currents).
Currents resolve_currents(const SystemState& x, const Plant& plant, const Currents& steady,
                          std::vector<bool>* active = nullptr, const Currents* hint = nullptr);

SystemState step(const SystemState& x, double dt, const Plant& plant, const Currents& c, bool damping_active);

// Equilibrium of the full model reached by damped Newton from `guess`
// (zero speeds). Throws IterationFailed when no equilibrium is found.
SystemState find_equilibrium(const Plant& plant, const Currents& c, const SystemState& guess);
SystemState find_equilibrium(const Plant& plant, const Currents& c);

enum class EventKind { VoltageSag, LineTrip, FaultClear, SetCurrentRefs, DampingOn, DampingOff };

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::VoltageSag;
    double u_g = 1.0;                          // VoltageSag, FaultClear
    std::optional<NetworkTopology> topology;   // LineTrip, FaultClear
    std::vector<double> i_d_ref, i_q_ref;      // SetCurrentRefs
};

const char* event_kind_name(EventKind k);

struct SimOptions {
    double dt = 1e-4;
    double t_end = 8.0;
    int decimation = 10;
    bool lvrt = true;
    bool auto_damping = true;
    double damping_hold = 5.0;
};

enum : std::uint32_t { kFlagEvent = 1u, kFlagLvrt = 2u, kFlagDamping = 4u };

// State and currents just before the last fault clearance.
struct ClearanceSnapshot {
    double t = 0.0;
    SystemState x;
    Currents c;
    std::vector<double> p_c;
};

struct TrajectoryRecord {
    std::vector<double> t;
    std::vector<SystemState> states;
    std::vector<std::vector<double>> p_c, p_e;  // per sample, per SynCon
    std::vector<std::vector<double>> p_eci, p_mci, u_pcc, i_d, i_q;
    std::vector<std::uint32_t> flags;
    double t_clear = -1.0;  // last fault clearance, -1 when none
    std::optional<ClearanceSnapshot> at_clearance;

    std::size_t size() const { return t.size(); }
    TrajectoryRecord decimated(int factor) const;
};

struct Scenario {
    Plant plant;
    std::optional<SystemState> initial;
    std::vector<Event> events;
    SimOptions sim;

    // Plant as it stands after every event has been applied.
    Plant final_plant() const;
    double fault_clear_time() const;
    double fault_start_time() const;
};

class IntegrationDiverged : public Error {
public:
    IntegrationDiverged(double t, TrajectoryRecord partial)
        : Error("integration diverged at t=" + std::to_string(t)), t_(t), partial_(std::move(partial)) {}
    double time() const noexcept { return t_; }
    const TrajectoryRecord& partial() const noexcept { return partial_; }

private:
    double t_;
    TrajectoryRecord partial_;
};

// Initial state of a scenario: the supplied one or the pre-event equilibrium.
SystemState initial_state(const Scenario& sc);

TrajectoryRecord simulate(const Scenario& sc);

}  // namespace syncstab
