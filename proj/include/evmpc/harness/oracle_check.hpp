#pragma once

// Verification mode: the first charging problem of a small scenario solved
// by branch and bound and by exhaustive on/off pattern enumeration.

#include "evmpc/harness/scenario.hpp"
#include "evmpc/lac/problem.hpp"
#include "evmpc/milp/branch_and_bound.hpp"
#include "evmpc/milp/pattern_oracle.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace evmpc::harness {

inline constexpr std::size_t kOracleMaxSessions = 2;
inline constexpr Slot kOracleMaxSlots = 6;

struct OracleReport {
    std::size_t sessions = 0;
    Slot slots = 0;
    milp::SolveStatus solver_status = milp::SolveStatus::Infeasible;
    milp::SolveStatus oracle_status = milp::SolveStatus::Infeasible;
    double solver_objective = 0.0;
    double oracle_objective = 0.0;
    double relative_gap = 0.0;
    std::size_t patterns_tried = 0;
    // Patterns whose optimum ties the best one within 1e-6 relative.
    std::size_t optimal_patterns = 0;
    // Per slot (session-major), |U_solver - U_oracle| against the closest
    // optimal pattern; max_schedule_diff is its largest entry.
    std::vector<double> slot_diff;
    double max_schedule_diff = 0.0;

    bool agree(double tol = 1e-6) const
    {
        return solver_status == oracle_status && (solver_status != milp::SolveStatus::Optimal || relative_gap <= tol);
    }
};

inline void to_json(json& j, const OracleReport& r)
{
    j = json{{"sessions", r.sessions},
             {"slots", r.slots},
             {"solver_status", milp::to_string(r.solver_status)},
             {"oracle_status", milp::to_string(r.oracle_status)},
             {"solver_objective", r.solver_objective},
             {"oracle_objective", r.oracle_objective},
             {"relative_gap", r.relative_gap},
             {"patterns_tried", r.patterns_tried},
             {"optimal_patterns", r.optimal_patterns},
             {"slot_diff", r.slot_diff},
             {"max_schedule_diff", r.max_schedule_diff},
             {"agree", r.agree()}};
}

/// All reserved sessions are taken as plugged in from the earliest
/// requested start, with their declared arrival state.
inline OracleReport oracle_check(const Scenario& sc)
{
    std::vector<lac::ChargingSession> sessions;
    Slot now = std::numeric_limits<Slot>::max();
    for (const auto& ev : sc.events) {
        if (ev.type != EventType::Reserve) {
            continue;
        }
        const auto& r = ev.reservation;
        const auto sock = std::find_if(sc.center.sockets.begin(), sc.center.sockets.end(),
                                       [&](const auto& s) { return s.ref == r.station_socket; });
        auto s = center::make_session(r, *sock, "ses-" + std::to_string(sessions.size() + 1));
        if (!s) {
            throw ScenarioInvalid("/events", "reservation " + r.rfid + " cannot reach the 6 A minimum");
        }
        s->status = lac::SessionStatus::Active;
        sessions.push_back(*s);
        now = std::min(now, r.requested_start);
    }
    if (sessions.empty()) {
        throw ScenarioInvalid("/events", "oracle mode needs at least one reservation");
    }
    Slot end = now;
    for (const auto& s : sessions) {
        end = std::max(end, s.departure);
    }
    if (sessions.size() > kOracleMaxSessions || end - now > kOracleMaxSlots) {
        throw milp::TooLarge("oracle mode is limited to " + std::to_string(kOracleMaxSessions) + " sessions x " +
                             std::to_string(kOracleMaxSlots) + " slots; scenario has " +
                             std::to_string(sessions.size()) + " x " + std::to_string(end - now));
    }
    const auto problem = lac::build_problem(sessions, sc.tariff, sc.signal, sc.center.lac, now);
    const auto bb = milp::solve_semicontinuous(problem.model, sc.center.limits);
    const auto oracle = milp::enumerate_patterns(problem.model);

    OracleReport rep;
    rep.sessions = sessions.size();
    rep.slots = end - now;
    rep.solver_status = bb.status;
    rep.oracle_status = oracle.status;
    rep.patterns_tried = oracle.patterns_tried;
    if (bb.status != milp::SolveStatus::Optimal || oracle.status != milp::SolveStatus::Optimal) {
        return rep;
    }
    rep.solver_objective = bb.objective_value;
    rep.oracle_objective = oracle.objective_value;
    const auto scale = [](double v) { return std::max(1.0, std::abs(v)); };
    rep.relative_gap = std::abs(bb.objective_value - oracle.objective_value) / scale(oracle.objective_value);

    std::vector<std::size_t> u_vars;
    for (const auto& b : problem.blocks) {
        for (std::size_t i = 0; i < b.slots(); ++i) {
            u_vars.push_back(b.first_var + i);
        }
    }
    bool first = true;
    for (const auto& p : oracle.feasible_patterns) {
        if (std::abs(p.lp.objective_value - oracle.objective_value) > 1e-6 * scale(oracle.objective_value)) {
            continue;
        }
        ++rep.optimal_patterns;
        std::vector<double> diff;
        double worst = 0.0;
        for (const auto v : u_vars) {
            diff.push_back(std::abs(bb.values[v] - p.lp.values[v]));
            worst = std::max(worst, diff.back());
        }
        if (first || worst < rep.max_schedule_diff) {
            rep.max_schedule_diff = worst;
            rep.slot_diff = diff;
            first = false;
        }
    }
    return rep;
}

} // namespace evmpc::harness
