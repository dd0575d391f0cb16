#pragma once

#include <cstddef>
#include <vector>

namespace syncstab {

// One classical Runge-Kutta step for x' = f(x).
template <class F>
std::vector<double> rk4_step(const F& f, const std::vector<double>& x, double dt) {
    const std::size_t m = x.size();
    std::vector<double> tmp(m);
    const std::vector<double> k1 = f(x);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    const std::vector<double> k2 = f(tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    const std::vector<double> k3 = f(tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = x[i] + dt * k3[i];
    const std::vector<double> k4 = f(tmp);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace syncstab
