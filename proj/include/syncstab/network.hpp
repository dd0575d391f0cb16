#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace syncstab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

struct PerUnitBase {
    double s_mva = 200.0;
    double u_kv = 100.0;
    double omega_g = 314.0;

    double z_base_ohm() const { return u_kv * u_kv / s_mva; }
    void validate() const;
};

double ohm_to_pu(double ohm, const PerUnitBase& b);
double pu_to_ohm(double pu, const PerUnitBase& b);
// Inductance in henry <-> per-unit reactance at omega_g.
double henry_to_pu(double henry, const PerUnitBase& b);
double pu_to_henry(double pu, const PerUnitBase& b);

// Series R-L branch in per unit. Inductance is normalised at omega_g, so l is
// also the branch reactance.
struct Branch {
    double r = 0.0;
    double l = 0.0;

    double y(bool resistance_neglected) const;
    cplx z(bool resistance_neglected) const { return {resistance_neglected ? 0.0 : r, l}; }
    void validate(const std::string& what) const;
};

// Branch from impedance magnitude and R/X ratio.
Branch branch_from_z(double z, double rx_ratio);

// Nodal admittance blocks of a meshed layout. S are SynCon internal EMF nodes,
// C converter terminal nodes, L internal buses without injection. The grid
// source is the reference; the *_g vectors hold the nodal entries coupling each
// node to the grid source (negative branch admittances).
struct ClusterLayout {
    CMatrix yss, ysc, ysl, ycc, ycl, yll;
    CVector ys_g, yc_g, yl_g;

    int p() const { return static_cast<int>(yss.rows()); }
    int n() const { return static_cast<int>(ycc.rows()); }
    int l() const { return static_cast<int>(yll.rows()); }
    void validate() const;
};

// Branch between two named nodes. Node names: "syncon<k>", "gflc<k>", "grid",
// or any bus name listed in the layout.
struct GraphBranch {
    std::string from, to;
    Branch br;
};

ClusterLayout build_layout(int p, int n, const std::vector<std::string>& buses,
                           const std::vector<GraphBranch>& branches, bool resistance_neglected);

struct NetworkTopology {
    std::vector<Branch> gflc_branches;
    std::vector<Branch> syncon_branches;
    Branch grid_branch;
    bool resistance_neglected = true;
    std::optional<ClusterLayout> cluster_layout;

    int n() const { return static_cast<int>(gflc_branches.size()); }
    int p() const { return static_cast<int>(syncon_branches.size()); }
    void validate() const;
};

// Star layout: every converter and SynCon branch meets at one PCC bus that
// reaches the grid through grid_branch.
ClusterLayout single_cluster_layout(const NetworkTopology& topo);
const ClusterLayout& layout_of(const NetworkTopology& topo, ClusterLayout& scratch);

struct CouplingCoefficients {
    double alpha = 0.0;
    Eigen::MatrixXd alpha_matrix;
    std::vector<double> gamma;
};

double compute_alpha(const NetworkTopology& topo);
// SynCon share of each converter current: (p x n), positive for a SynCon
// that absorbs part of the injected current.
CMatrix kron_reduce_alpha_matrix(const NetworkTopology& topo);
CMatrix kron_reduce_alpha_matrix(const ClusterLayout& layout);
double compute_gamma(const NetworkTopology& topo, int i);
double compute_ue(double alpha, double e_s, double u_g, double delta);
CouplingCoefficients coupling(const NetworkTopology& topo);

// Linear relations of the network seen from the sources and the converter
// current injections:
//   V_C = a_e E + a_g U_g + z I_C
//   I_S = y_e E + y_g U_g + k I_C      (current leaving each SynCon)
struct ReducedNetwork {
    CMatrix a_e, z, y_e, k;
    CVector a_g, y_g;
};

ReducedNetwork reduce_network(const ClusterLayout& layout);
ReducedNetwork reduce_network(const NetworkTopology& topo);

// LU inverse that refuses matrices whose reciprocal condition is below 1e-12.
CMatrix checked_inverse(const CMatrix& m, const std::string& what);

}  // namespace syncstab
