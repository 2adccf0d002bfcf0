#pragma once

// Re-checks decoded schedules against the grid and user constraints using
// only the schedules' power set points (no access to the MILP encoding).

#include "evmpc/lac/types.hpp"

#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace evmpc::lac {

struct ConstraintViolation {
    std::string rule;  // "overload", "soc_box", "final_soc", "cost_cap", "semicontinuity", "power"
    std::string session_id;
    Slot slot = 0;
    double amount = 0.0;
};

struct CheckInput {
    std::span<const ChargingSession> sessions;  // as given to the builder (x0 at `now`)
    std::span<const LoadSchedule> schedules;    // same order as sessions
    const Tariff* tariff = nullptr;
    const DsoSignal* signal = nullptr;
    const ControllerConfig* config = nullptr;
    Slot now = 0;
    std::span<const double> fixed_load_kw = {};
    double tolerance = 1e-9;
};

inline std::vector<ConstraintViolation> check_schedules(const CheckInput& in)
{
    std::vector<ConstraintViolation> out;
    const double tol = in.tolerance;
    const double hours = in.config->slot_hours();
    std::map<Slot, double> aggregate;
    for (std::size_t m = 0; m < in.sessions.size(); ++m) {
        const auto& s = in.sessions[m];
        const auto& sch = in.schedules[m];
        double soc = s.x0_kwh;
        double cost = s.cost_accrued;
        for (Slot k = in.now; k < s.departure; ++k) {
            const double p = sch.power_at(k);
            const double u = p / s.delta_p_kw;
            if (p > s.delta_p_kw + tol || p < -tol) {
                out.push_back({"power", s.id, k, p});
            }
            if (u > tol && u < s.alpha - tol) {
                out.push_back({"semicontinuity", s.id, k, u});
            }
            aggregate[k] += p;
            soc += p * hours * (1.0 - s.xi);
            cost += p * hours * in.tariff->prices[static_cast<std::size_t>(k)];
            if (soc > s.x_max_kwh + tol) {
                out.push_back({"soc_box", s.id, k + 1, soc - s.x_max_kwh});
            }
            if (soc < s.x_min_kwh - tol) {
                out.push_back({"soc_box", s.id, k + 1, s.x_min_kwh - soc});
            }
        }
        if (soc < s.x_ref_kwh - tol && !sch.best_effort) {
            out.push_back({"final_soc", s.id, s.departure, s.x_ref_kwh - soc});
        }
        if (s.cost_star && cost > (1.0 + in.config->epsilon) * *s.cost_star + tol) {
            out.push_back({"cost_cap", s.id, s.departure, cost - (1.0 + in.config->epsilon) * *s.cost_star});
        }
    }
    for (const auto& [k, load] : aggregate) {
        const auto i = static_cast<std::size_t>(k);
        const double base = i < in.fixed_load_kw.size() ? in.fixed_load_kw[i] : 0.0;
        const double cap = in.signal->p_max[i];
        if (base + load > cap + tol) {
            out.push_back({"overload", "", k, base + load - cap});
        }
    }
    return out;
}

} // namespace evmpc::lac
