#pragma once

// Construction of the charging optimisation as a semi-continuous MILP.
//
// Variables: one U per (session, slot) in [now, departure), each in
// {0} u [alpha, 1]; one epigraph variable t for the weighted l-infinity
// tracking error. SoC is never a variable: the loss-model recursion is
// expanded so x[k] = x0 + g * sum_{j<k} U[j] with g = dP * T * (1 - xi).

#include "evmpc/lac/types.hpp"
#include "evmpc/milp/model.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace evmpc::lac {

enum class RowKind { TrackUpper, TrackLower, Overload, SocMin, SocMax, FinalMin, FinalMax, CostCap };

struct SessionBlock {
    std::string session_id;
    std::size_t first_var = 0;
    Slot start = 0;
    Slot departure = 0;
    double gain_kwh = 0.0;  // SoC gain per unit U per slot
    double cost_kwh_scale = 0.0;  // dP * T
    std::size_t final_min_row = 0;
    std::optional<std::size_t> shortfall_var;

    std::size_t slots() const { return static_cast<std::size_t>(departure - start); }
    std::size_t var(Slot k) const { return first_var + static_cast<std::size_t>(k - start); }
};

struct ChargingProblem {
    milp::MilpModel model;
    std::vector<SessionBlock> blocks;
    std::vector<RowKind> row_kinds;
    std::size_t epigraph_var = 0;
    Slot now = 0;
    Slot horizon_end = 0;  // E: exclusive end of the tracking window
    bool relaxed = false;
};

namespace detail {

inline void require_coverage(std::size_t have, Slot need_end, const char* what)
{
    if (need_end > 0 && have < static_cast<std::size_t>(need_end)) {
        throw HorizonTooShort(std::string(what) + " covers " + std::to_string(have) +
                              " slots, problem needs " + std::to_string(need_end));
    }
}

inline void add_row(ChargingProblem& p, std::vector<double> coefs, milp::Relation rel, double rhs,
                    RowKind kind, std::string name)
{
    p.model.add_constraint(std::move(coefs), rel, rhs, std::move(name));
    p.row_kinds.push_back(kind);
}

} // namespace detail

/// Builds the problem at slot `now` for the given active sessions. Each
/// session's x0_kwh must already hold the SoC estimate at `now`, and
/// cost_accrued the cost incurred before `now`. `fixed_load_kw` (absolute
/// slot index, may be empty) is load that is already committed and not
/// re-decided; it enters the aggregate in the tracking and overload rows.
inline ChargingProblem build_problem(std::span<const ChargingSession> sessions, const Tariff& tariff,
                                     const DsoSignal& signal, const ControllerConfig& config,
                                     Slot now, std::span<const double> fixed_load_kw = {})
{
    using milp::Relation;
    ChargingProblem p;
    p.now = now;
    const double hours = config.slot_hours();

    Slot end = now;
    for (const auto& s : sessions) {
        if (s.status != SessionStatus::Active) {
            throw InvalidSession("session " + s.id + " is not active");
        }
        if (s.departure <= now) {
            throw InvalidSession("session " + s.id + " has already departed");
        }
        if (!(s.alpha > 0.0 && s.alpha < 1.0) || !(s.delta_p_kw > 0.0)) {
            throw InvalidSession("session " + s.id + " has invalid power parameters");
        }
        if (s.x_min_kwh - 1e-9 > s.x0_kwh || s.x0_kwh > s.x_max_kwh + 1e-9 ||
            s.x_ref_kwh < s.x_min_kwh || s.x_ref_kwh > s.x_max_kwh) {
            throw InvalidSession("session " + s.id + " violates SoC ordering");
        }
        end = std::max(end, s.departure);
    }
    if (sessions.empty()) {
        end = static_cast<Slot>(std::min<std::size_t>(
            signal.coverage(), static_cast<std::size_t>(now + std::max<Slot>(config.horizon_slots, 0))));
        end = std::max(end, now);
    }
    if (!sessions.empty() && end - now > config.horizon_slots) {
        throw HorizonTooShort("departure beyond the configured horizon");
    }
    detail::require_coverage(tariff.prices.size(), sessions.empty() ? 0 : end, "tariff");
    detail::require_coverage(signal.coverage(), end, "DSO signal");
    p.horizon_end = end;

    auto fixed = [&](Slot k) {
        const auto i = static_cast<std::size_t>(k);
        return i < fixed_load_kw.size() ? fixed_load_kw[i] : 0.0;
    };

    for (const auto& s : sessions) {
        SessionBlock b;
        b.session_id = s.id;
        b.start = now;
        b.departure = s.departure;
        b.gain_kwh = s.delta_p_kw * hours * (1.0 - s.xi);
        b.cost_kwh_scale = s.delta_p_kw * hours;
        b.first_var = p.model.num_vars;
        for (Slot k = now; k < s.departure; ++k) {
            const double price = tariff.prices[static_cast<std::size_t>(k)];
            p.model.add_semicontinuous(b.cost_kwh_scale * price, s.alpha,
                                       "u_" + s.id + "_" + std::to_string(k));
        }
        p.blocks.push_back(std::move(b));
    }
    p.epigraph_var = p.model.add_variable(config.mu, {0.0, milp::kInfinity}, "t");
    const std::size_t nv = p.model.num_vars;

    // Tracking epigraph and overload rows per slot.
    for (Slot k = now; k < end; ++k) {
        const auto ki = static_cast<std::size_t>(k);
        const double lam = signal.lambda[ki];
        const double ref = signal.p_ref[ki];
        std::vector<double> load(nv, 0.0);
        bool any = false;
        for (std::size_t m = 0; m < sessions.size(); ++m) {
            if (k < sessions[m].departure) {
                load[p.blocks[m].var(k)] = sessions[m].delta_p_kw;
                any = true;
            }
        }
        const double base = fixed(k);
        std::vector<double> up(nv, 0.0), down(nv, 0.0);
        for (std::size_t j = 0; j < nv; ++j) {
            up[j] = lam * load[j];
            down[j] = -lam * load[j];
        }
        up[p.epigraph_var] = -1.0;
        down[p.epigraph_var] = -1.0;
        const std::string tag = std::to_string(k);
        detail::add_row(p, std::move(up), Relation::LessEqual, lam * (ref - base), RowKind::TrackUpper,
                        "track_hi_" + tag);
        detail::add_row(p, std::move(down), Relation::LessEqual, -lam * (ref - base),
                        RowKind::TrackLower, "track_lo_" + tag);
        if (any) {
            detail::add_row(p, std::move(load), Relation::LessEqual, signal.p_max[ki] - base,
                            RowKind::Overload, "overload_" + tag);
        }
    }

    // SoC box, final SoC and cost cap per session.
    for (std::size_t m = 0; m < sessions.size(); ++m) {
        const auto& s = sessions[m];
        auto& b = p.blocks[m];
        const bool prune = config.prune_implied_soc_rows;
        if (!prune) {
            for (Slot k = now + 1; k < s.departure; ++k) {
                std::vector<double> cum(nv, 0.0);
                for (Slot j = now; j < k; ++j) {
                    cum[b.var(j)] = b.gain_kwh;
                }
                const std::string tag = s.id + "_" + std::to_string(k);
                auto lo = cum;
                detail::add_row(p, std::move(cum), Relation::LessEqual, s.x_max_kwh - s.x0_kwh,
                                RowKind::SocMax, "soc_max_" + tag);
                detail::add_row(p, std::move(lo), Relation::GreaterEqual, s.x_min_kwh - s.x0_kwh,
                                RowKind::SocMin, "soc_min_" + tag);
            }
        }
        std::vector<double> total(nv, 0.0);
        std::vector<double> cost(nv, 0.0);
        for (Slot k = now; k < s.departure; ++k) {
            total[b.var(k)] = b.gain_kwh;
            cost[b.var(k)] = b.cost_kwh_scale * tariff.prices[static_cast<std::size_t>(k)];
        }
        if (!prune || s.x0_kwh < s.x_min_kwh) {
            detail::add_row(p, total, Relation::GreaterEqual, s.x_min_kwh - s.x0_kwh, RowKind::SocMin,
                            "soc_min_" + s.id + "_" + std::to_string(s.departure));
        }
        b.final_min_row = p.model.constraints.size();
        detail::add_row(p, total, Relation::GreaterEqual, s.x_ref_kwh - s.x0_kwh, RowKind::FinalMin,
                        "final_min_" + s.id);
        detail::add_row(p, std::move(total), Relation::LessEqual, s.x_max_kwh - s.x0_kwh,
                        RowKind::FinalMax, "final_max_" + s.id);
        if (s.cost_star) {
            detail::add_row(p, std::move(cost), Relation::LessEqual,
                            (1.0 + config.epsilon) * *s.cost_star - s.cost_accrued, RowKind::CostCap,
                            "cost_cap_" + s.id);
        }
    }
    return p;
}

/// Default per-kWh shortfall penalty: three orders of magnitude above the
/// most expensive slot-energy of any session, plus a guard against the
/// tracking term rewarding an undercharge.
inline double default_shortfall_penalty(std::span<const ChargingSession> sessions, const Tariff& tariff,
                                        const DsoSignal& signal, const ControllerConfig& config, Slot now,
                                        Slot end)
{
    double max_price = 0.0;
    double max_lambda = 0.0;
    for (Slot k = now; k < end; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (i < tariff.prices.size()) {
            max_price = std::max(max_price, tariff.prices[i]);
        }
        if (i < signal.lambda.size()) {
            max_lambda = std::max(max_lambda, signal.lambda[i]);
        }
    }
    double max_dp = 0.0;
    for (const auto& s : sessions) {
        max_dp = std::max(max_dp, s.delta_p_kw);
    }
    const double hours = config.slot_hours();
    return 1e3 * max_price * max_dp * hours + 1e3 * config.mu * max_lambda + 1.0;
}

/// Softens each session's final-SoC lower bound with a penalised shortfall
/// variable. Grid rows (overload, SoC box) stay hard.
inline ChargingProblem feasibility_relax(ChargingProblem problem, std::span<const ChargingSession> sessions,
                                         const Tariff& tariff, const DsoSignal& signal,
                                         const ControllerConfig& config)
{
    if (problem.relaxed) {
        return problem;
    }
    const double weight = config.shortfall_penalty > 0.0
                              ? config.shortfall_penalty
                              : default_shortfall_penalty(sessions, tariff, signal, config, problem.now,
                                                          problem.horizon_end);
    for (auto& b : problem.blocks) {
        const auto var = problem.model.add_variable(weight, {0.0, milp::kInfinity}, "short_" + b.session_id);
        problem.model.constraints[b.final_min_row].coefficients[var] = 1.0;
        b.shortfall_var = var;
    }
    problem.relaxed = true;
    return problem;
}

} // namespace evmpc::lac
