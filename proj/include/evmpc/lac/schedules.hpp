#pragma once

#include "evmpc/lac/problem.hpp"
#include "evmpc/lac/soc.hpp"
#include "evmpc/milp/branch_and_bound.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace evmpc::lac {

struct ScheduleSet {
    std::vector<LoadSchedule> schedules;
    milp::SolveStatus status = milp::SolveStatus::Infeasible;
    double objective = 0.0;
    bool relaxed = false;
    // No admissible schedule even after relaxing the user targets; every
    // session got an all-zero best-effort plan.
    bool still_infeasible = false;
    bool node_limited = false;
    bool cost_cap_dropped = false;
    // Per-session final-SoC shortfall in kWh (0 when the target is met).
    std::vector<double> shortfall_kwh;
    std::vector<double> values;
    ChargingProblem problem;
};

struct SocEncodingMismatch : std::logic_error {
    using std::logic_error::logic_error;
};

namespace detail {

inline LoadSchedule decode_block(const ChargingProblem& problem, const SessionBlock& b,
                                 const ChargingSession& s, const std::vector<double>& values,
                                 double slot_hours)
{
    LoadSchedule out;
    out.session_id = s.id;
    out.start = b.start;
    out.u.resize(b.slots(), 0.0);
    out.power_setpoints.resize(b.slots(), 0.0);
    for (std::size_t i = 0; i < b.slots(); ++i) {
        double u = values.empty() ? 0.0 : values[b.first_var + i];
        u = std::clamp(u, 0.0, 1.0);
        if (u < s.alpha - milp::kSemicontinuityTol) {
            u = 0.0;
        } else if (u < s.alpha) {
            u = s.alpha;
        }
        out.u[i] = u;
        out.power_setpoints[i] = s.delta_p_kw * u;
    }
    out.predicted_soc = soc_predict(s.x0_kwh, out.u, s.delta_p_kw, s.xi, slot_hours);
    if (!values.empty()) {
        // The same SoC read back through the final-SoC row coefficients.
        const auto& row = problem.model.constraints[b.final_min_row].coefficients;
        double encoded = s.x0_kwh;
        for (std::size_t i = 0; i < b.slots(); ++i) {
            encoded += row[b.first_var + i] * out.u[i];
            if (std::abs(encoded - out.predicted_soc[i + 1]) > 1e-9) {
                throw SocEncodingMismatch("SoC recursion and row encoding disagree for " + s.id);
            }
        }
    }
    return out;
}

} // namespace detail

/// Solves the problem and decodes per-session schedules. An infeasible
/// problem is retried once with softened final-SoC targets.
inline ScheduleSet solve_schedules(ChargingProblem problem, std::span<const ChargingSession> sessions,
                                   const Tariff& tariff, const DsoSignal& signal,
                                   const ControllerConfig& config, const milp::SearchLimits& limits = {})
{
    if (problem.blocks.size() != sessions.size()) {
        throw std::invalid_argument("session list does not match the problem");
    }
    ScheduleSet out;
    auto sol = milp::solve_semicontinuous(problem.model, limits);
    const auto usable = [](const milp::MilpSolution& s) {
        return s.status == milp::SolveStatus::Optimal ||
               (s.status == milp::SolveStatus::NodeLimit && s.has_incumbent);
    };
    if (!usable(sol)) {
        problem = feasibility_relax(std::move(problem), sessions, tariff, signal, config);
        sol = milp::solve_semicontinuous(problem.model, limits);
        out.relaxed = true;
    }
    if (!usable(sol)) {
        // Last resort before giving up: the cost cap is a user preference too.
        bool dropped = false;
        for (std::size_t r = 0; r < problem.row_kinds.size(); ++r) {
            if (problem.row_kinds[r] == RowKind::CostCap) {
                auto& row = problem.model.constraints[r];
                std::fill(row.coefficients.begin(), row.coefficients.end(), 0.0);
                row.rhs = 0.0;
                dropped = true;
            }
        }
        if (dropped) {
            sol = milp::solve_semicontinuous(problem.model, limits);
            out.cost_cap_dropped = true;
        }
    }
    out.status = sol.status;
    out.node_limited = sol.status == milp::SolveStatus::NodeLimit;
    if (!usable(sol)) {
        out.still_infeasible = true;
        sol.values.clear();
    } else {
        out.objective = sol.objective_value;
        out.values = sol.values;
    }
    const double hours = config.slot_hours();
    for (std::size_t m = 0; m < sessions.size(); ++m) {
        const auto& b = problem.blocks[m];
        auto sched = detail::decode_block(problem, b, sessions[m], sol.values, hours);
        double shortfall = 0.0;
        if (out.still_infeasible) {
            shortfall = std::max(0.0, sessions[m].x_ref_kwh - sched.predicted_soc.back());
            sched.best_effort = true;
        } else if (b.shortfall_var) {
            shortfall = sol.values[*b.shortfall_var];
            sched.best_effort = shortfall > 1e-9;
        }
        out.shortfall_kwh.push_back(shortfall);
        out.schedules.push_back(std::move(sched));
    }
    out.problem = std::move(problem);
    return out;
}

} // namespace evmpc::lac
