#include "syncstab/network.hpp"

#include <cmath>
#include <map>

#include "syncstab/errors.hpp"

namespace syncstab {

namespace {
constexpr double kMinRcond = 1e-12;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace

void PerUnitBase::validate() const {
    if (!finite_positive(s_mva)) throw ValidationError("base.S_MVA", "must be > 0");
    if (!finite_positive(u_kv)) throw ValidationError("base.U_kV", "must be > 0");
    if (!finite_positive(omega_g)) throw ValidationError("base.omega", "must be > 0");
}

double ohm_to_pu(double ohm, const PerUnitBase& b) { return ohm / b.z_base_ohm(); }
double pu_to_ohm(double pu, const PerUnitBase& b) { return pu * b.z_base_ohm(); }
double henry_to_pu(double henry, const PerUnitBase& b) { return b.omega_g * henry / b.z_base_ohm(); }
double pu_to_henry(double pu, const PerUnitBase& b) { return pu * b.z_base_ohm() / b.omega_g; }

double Branch::y(bool resistance_neglected) const {
    if (resistance_neglected) return 1.0 / l;
    return 1.0 / std::sqrt(r * r + l * l);
}

void Branch::validate(const std::string& what) const {
    if (!(std::isfinite(l) && l > 0.0)) throw InvalidTopology(what + ": inductance must be > 0");
    if (!(std::isfinite(r) && r >= 0.0)) throw InvalidTopology(what + ": resistance must be >= 0");
}

Branch branch_from_z(double z, double rx_ratio) {
    Branch b;
    b.l = z / std::sqrt(1.0 + rx_ratio * rx_ratio);
    b.r = rx_ratio * b.l;
    return b;
}

CMatrix checked_inverse(const CMatrix& m, const std::string& what) {
    if (m.rows() == 0) return m;
    Eigen::PartialPivLU<CMatrix> lu(m);
    // rcond() can miss exact singularity (a zero pivot estimates to 1), so the
    // pivot spread is checked as well.
    const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
    const double rc = std::min(lu.rcond(), piv.minCoeff() / piv.maxCoeff());
    if (!(rc >= kMinRcond)) throw NumericalSingularity(what, rc);
    CMatrix inv = lu.inverse();
    if (!inv.allFinite()) throw NumericalSingularity(what, 0.0);
    return inv;
}

void ClusterLayout::validate() const {
    const auto P = yss.rows(), N = ycc.rows(), L = yll.rows();
    auto chk = [](bool ok, const char* m) {
        if (!ok) throw InvalidTopology(m);
    };
    chk(yss.cols() == P && ycc.cols() == N && yll.cols() == L, "self-admittance blocks must be square");
    chk(ysc.rows() == P && ysc.cols() == N, "Y_SC shape");
    chk(ysl.rows() == P && ysl.cols() == L, "Y_SL shape");
    chk(ycl.rows() == N && ycl.cols() == L, "Y_CL shape");
    chk(ys_g.size() == P && yc_g.size() == N && yl_g.size() == L, "grid coupling shape");
    chk(N >= 1, "at least one converter node required");
}

ClusterLayout build_layout(int p, int n, const std::vector<std::string>& buses,
                           const std::vector<GraphBranch>& branches, bool resistance_neglected) {
    std::map<std::string, int> idx;
    for (int k = 0; k < p; ++k) idx["syncon" + std::to_string(k)] = k;
    for (int k = 0; k < n; ++k) idx["gflc" + std::to_string(k)] = p + k;
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (idx.count(buses[k]) || buses[k] == "grid")
            throw InvalidTopology("duplicate node name '" + buses[k] + "'");
        idx[buses[k]] = p + n + static_cast<int>(k);
    }
    const int total = p + n + static_cast<int>(buses.size());
    CMatrix y = CMatrix::Zero(total, total);
    CVector yg = CVector::Zero(total);
    for (const auto& b : branches) {
        b.br.validate("branch " + b.from + "-" + b.to);
        const cplx adm = 1.0 / b.br.z(resistance_neglected);
        const bool fg = b.from == "grid", tg = b.to == "grid";
        if (fg && tg) throw InvalidTopology("branch connects grid to itself");
        auto node = [&](const std::string& s) {
            auto it = idx.find(s);
            if (it == idx.end()) throw InvalidTopology("unknown node '" + s + "'");
            return it->second;
        };
        if (fg || tg) {
            const int a = node(fg ? b.to : b.from);
            y(a, a) += adm;
            yg(a) -= adm;
        } else {
            const int a = node(b.from), c = node(b.to);
            if (a == c) throw InvalidTopology("self-loop at '" + b.from + "'");
            y(a, a) += adm;
            y(c, c) += adm;
            y(a, c) -= adm;
            y(c, a) -= adm;
        }
    }
    const int L = static_cast<int>(buses.size());
    ClusterLayout out;
    out.yss = y.block(0, 0, p, p);
    out.ysc = y.block(0, p, p, n);
    out.ysl = y.block(0, p + n, p, L);
    out.ycc = y.block(p, p, n, n);
    out.ycl = y.block(p, p + n, n, L);
    out.yll = y.block(p + n, p + n, L, L);
    out.ys_g = yg.segment(0, p);
    out.yc_g = yg.segment(p, n);
    out.yl_g = yg.segment(p + n, L);
    return out;
}

void NetworkTopology::validate() const {
    if (gflc_branches.empty()) throw InvalidTopology("at least one converter branch required");
    for (std::size_t k = 0; k < gflc_branches.size(); ++k)
        gflc_branches[k].validate("gflc[" + std::to_string(k) + "]");
    for (std::size_t k = 0; k < syncon_branches.size(); ++k)
        syncon_branches[k].validate("syncon[" + std::to_string(k) + "]");
    if (cluster_layout) {
        cluster_layout->validate();
        if (cluster_layout->n() != n() || cluster_layout->p() != p())
            throw InvalidTopology("cluster layout does not match converter/SynCon counts");
    } else {
        grid_branch.validate("grid");
    }
}

ClusterLayout single_cluster_layout(const NetworkTopology& topo) {
    std::vector<GraphBranch> br;
    for (int k = 0; k < topo.p(); ++k) br.push_back({"syncon" + std::to_string(k), "pcc", topo.syncon_branches[k]});
    for (int k = 0; k < topo.n(); ++k) br.push_back({"gflc" + std::to_string(k), "pcc", topo.gflc_branches[k]});
    br.push_back({"pcc", "grid", topo.grid_branch});
    return build_layout(topo.p(), topo.n(), {"pcc"}, br, topo.resistance_neglected);
}

const ClusterLayout& layout_of(const NetworkTopology& topo, ClusterLayout& scratch) {
    if (topo.cluster_layout) return *topo.cluster_layout;
    scratch = single_cluster_layout(topo);
    return scratch;
}

double compute_alpha(const NetworkTopology& topo) {
    for (const auto& b : topo.syncon_branches) b.validate("syncon");
    topo.grid_branch.validate("grid");
    if (topo.syncon_branches.empty()) return 0.0;
    double ys = 0.0;
    for (const auto& b : topo.syncon_branches) ys += b.y(topo.resistance_neglected);
    return ys / (topo.grid_branch.y(topo.resistance_neglected) + ys);
}

CMatrix kron_reduce_alpha_matrix(const ClusterLayout& lay) {
    lay.validate();
    const CMatrix yll_inv = checked_inverse(lay.yll, "Y_LL");
    const CMatrix ysc_red = lay.ysc - lay.ysl * yll_inv * lay.ycl.transpose();
    const CMatrix ycc_red = lay.ycc - lay.ycl * yll_inv * lay.ycl.transpose();
    return -ysc_red * checked_inverse(ycc_red, "reduced converter block");
}

CMatrix kron_reduce_alpha_matrix(const NetworkTopology& topo) {
    ClusterLayout scratch;
    return kron_reduce_alpha_matrix(layout_of(topo, scratch));
}

double compute_gamma(const NetworkTopology& topo, int i) {
    if (topo.syncon_branches.empty()) throw InvalidTopology("gamma undefined without a SynCon branch");
    double inv_ls = 0.0;
    for (const auto& b : topo.syncon_branches) inv_ls += 1.0 / b.l;
    const double ls = 1.0 / inv_ls;
    if (!(ls > 0.0) || !std::isfinite(ls)) throw InvalidTopology("gamma undefined: L_s = 0");
    const double lc = topo.gflc_branches.at(static_cast<std::size_t>(i)).l;
    const double lg = topo.grid_branch.l;
    return (lc * lg + lc * ls + ls * lg) / ls;
}

double compute_ue(double alpha, double e_s, double u_g, double delta) {
    const double a = alpha * e_s, b = (1.0 - alpha) * u_g;
    return std::sqrt(std::max(0.0, a * a + b * b + 2.0 * a * b * std::cos(delta)));
}

CouplingCoefficients coupling(const NetworkTopology& topo) {
    CouplingCoefficients c;
    c.alpha = compute_alpha(topo);
    if (topo.p() > 0) {
        c.alpha_matrix = kron_reduce_alpha_matrix(topo).real();
        for (int i = 0; i < topo.n(); ++i) c.gamma.push_back(compute_gamma(topo, i));
    }
    return c;
}

ReducedNetwork reduce_network(const ClusterLayout& lay) {
    lay.validate();
    const CMatrix yll_inv = checked_inverse(lay.yll, "Y_LL");
    const CMatrix ylc = lay.ycl.transpose();
    const CMatrix yls = lay.ysl.transpose();
    // Eliminate internal buses.
    const CMatrix ycc = lay.ycc - lay.ycl * yll_inv * ylc;
    const CMatrix ycs = lay.ysc.transpose() - lay.ycl * yll_inv * yls;
    const CVector ycg = lay.yc_g - lay.ycl * yll_inv * lay.yl_g;
    const CMatrix yss = lay.yss - lay.ysl * yll_inv * yls;
    const CMatrix ysc = lay.ysc - lay.ysl * yll_inv * ylc;
    const CVector ysg = lay.ys_g - lay.ysl * yll_inv * lay.yl_g;

    ReducedNetwork r;
    r.z = checked_inverse(ycc, "reduced converter block");
    r.a_e = -r.z * ycs;
    r.a_g = -r.z * ycg;
    r.k = ysc * r.z;
    r.y_e = yss - ysc * r.z * ycs;
    r.y_g = ysg - ysc * r.z * ycg;
    return r;
}

ReducedNetwork reduce_network(const NetworkTopology& topo) {
    ClusterLayout scratch;
    return reduce_network(layout_of(topo, scratch));
}

}  // namespace syncstab
