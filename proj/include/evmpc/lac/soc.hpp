#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace evmpc::lac {

/// Open-loop SoC trajectory under per-slot normalised power `u`:
/// x[k+1] = x[k] + delta_p * T * (1 - xi) * u[k], x[0] = x0.
inline std::vector<double> soc_predict(double x0_kwh, std::span<const double> u, double delta_p_kw,
                                       double xi, double slot_hours)
{
    std::vector<double> x;
    x.reserve(u.size() + 1);
    x.push_back(x0_kwh);
    const double gain = delta_p_kw * slot_hours * (1.0 - xi);
    for (double uk : u) {
        x.push_back(x.back() + gain * uk);
    }
    return x;
}

} // namespace evmpc::lac
