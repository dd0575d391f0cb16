#pragma once

#include <string>

#include "syncstab/dynamics.hpp"

namespace syncstab::test {

inline std::string fixture(const std::string& name) { return std::string(SYNCSTAB_FIXTURE_DIR) + "/" + name; }

// Single-cluster lossless plant: n converters and an optional SynCon at one PCC.
inline Plant star_plant(int n, double l_s, double l_c = 0.05, double l_g = 0.85, double i_d = 0.5) {
    Plant pl;
    pl.topo.grid_branch = {0.0, l_g};
    for (int i = 0; i < n; ++i) {
        pl.topo.gflc_branches.push_back({0.0, l_c});
        GflcControl g;
        g.i_d_ref = i_d;
        pl.controls.push_back(g);
    }
    if (l_s > 0.0) {
        pl.topo.syncon_branches.push_back({0.0, l_s});
        SynConMachine m;
        m.s_rated = 50.0;
        pl.machines.push_back(m);
    }
    pl.refresh();
    return pl;
}

inline double alpha_to_ls(double alpha, double l_g) { return l_g * (1.0 - alpha) / alpha; }

}  // namespace syncstab::test
