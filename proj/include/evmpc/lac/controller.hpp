#pragma once

// Receding-horizon controller: keeps per-session SoC/cost state from meter
// feedback and re-solves the charging problem when events arrive.

#include "evmpc/lac/problem.hpp"
#include "evmpc/lac/schedules.hpp"
#include "evmpc/lac/soc.hpp"
#include "evmpc/lac/types.hpp"
#include "evmpc/milp/branch_and_bound.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::lac {

enum class EventKind { NewSession, MeterFeedback, TariffUpdate, DsoUpdate, PeriodicTick, SessionEnd };

inline const char* to_string(EventKind k)
{
    switch (k) {
    case EventKind::NewSession: return "NewSession";
    case EventKind::MeterFeedback: return "MeterFeedback";
    case EventKind::TariffUpdate: return "TariffUpdate";
    case EventKind::DsoUpdate: return "DsoUpdate";
    case EventKind::PeriodicTick: return "PeriodicTick";
    case EventKind::SessionEnd: return "SessionEnd";
    }
    return "?";
}

struct MeterFeedback {
    std::string session_id;
    Slot slot = 0;  // the slot the reading covers
    double cumulative_energy_kwh = 0.0;
    double power_kw = 0.0;
    bool deviation_exceeded = false;
};

struct ControllerEvent {
    EventKind kind = EventKind::PeriodicTick;
    Slot slot = 0;
    std::optional<ChargingSession> session;  // NewSession
    std::optional<MeterFeedback> feedback;   // MeterFeedback
    std::optional<Tariff> tariff;            // TariffUpdate, prices from `slot` on
    std::optional<DsoSignal> signal;         // DsoUpdate, values from effective_from on
    std::string session_id;                  // SessionEnd
    // SessionEnd: exact per-slot metered energies from the station's final
    // report, indexed from the session's start slot.
    std::vector<double> final_slot_energy_kwh;
};

struct OutOfOrderEvent : std::logic_error {
    using std::logic_error::logic_error;
};

struct UnknownSession : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TrackedSession {
    ChargingSession session;  // x0_kwh holds the SoC at `start`
    Slot start = 0;
    // Full plan from `start`; entries before the last solve slot are frozen.
    LoadSchedule plan;
    double reported_energy_kwh = 0.0;
    Slot reported_through = 0;  // exclusive: slots [start, reported_through) are metered
    std::vector<double> slot_energy_kwh;  // metered energy attributed per slot, from `start`
    double shortfall_kwh = 0.0;
};

struct ResolveReport {
    Slot slot = 0;
    EventKind trigger = EventKind::PeriodicTick;
    milp::SolveStatus status = milp::SolveStatus::Infeasible;
    double objective = 0.0;
    // Objective of the previous plan's remaining part evaluated on the new
    // problem, when every session in it already had a plan.
    std::optional<double> previous_tail_objective;
    double previous_tail_violation = 0.0;
    bool relaxed = false;
    bool still_infeasible = false;
    bool node_limited = false;
    std::vector<std::string> session_ids;
    std::vector<std::string> best_effort;
};

class LoadAreaController {
public:
    LoadAreaController(ControllerConfig config, Tariff tariff, DsoSignal signal, milp::SearchLimits limits = {})
        : config_(config), tariff_(std::move(tariff)), signal_(std::move(signal)), limits_(limits)
    {
    }

    /// Applies one event. Returns a report when a re-solve ran.
    std::optional<ResolveReport> handle(const ControllerEvent& ev)
    {
        if (ev.slot < last_slot_) {
            throw OutOfOrderEvent("event at slot " + std::to_string(ev.slot) + " after slot " +
                                  std::to_string(last_slot_));
        }
        last_slot_ = ev.slot;
        switch (ev.kind) {
        case EventKind::NewSession: return on_new_session(ev);
        case EventKind::MeterFeedback: return on_feedback(ev);
        case EventKind::TariffUpdate:
            merge_tail(tariff_.prices, ev.tariff.value().prices, ev.slot);
            return maybe_replan(ev);
        case EventKind::DsoUpdate: {
            const auto& s = ev.signal.value();
            merge_tail(signal_.p_ref, s.p_ref, s.effective_from);
            merge_tail(signal_.p_max, s.p_max, s.effective_from);
            merge_tail(signal_.lambda, s.lambda, s.effective_from);
            signal_.effective_from = s.effective_from;
            return maybe_replan(ev);
        }
        case EventKind::PeriodicTick:
            if (config_.replan_period_slots > 0 && ev.slot - last_periodic_ >= config_.replan_period_slots) {
                last_periodic_ = ev.slot;
                return maybe_replan(ev);
            }
            return std::nullopt;
        case EventKind::SessionEnd: return on_end(ev);
        }
        return std::nullopt;
    }

    /// SoC estimate at the start of slot `now`: metered energy where reported,
    /// the plan's loss-model prediction for the unreported slots.
    double soc_estimate(const std::string& id, Slot now) const
    {
        const auto& t = at(id);
        const auto& s = t.session;
        double x = s.x0_kwh + (1.0 - s.xi) * t.reported_energy_kwh;
        for (Slot k = t.reported_through; k < now; ++k) {
            x += t.plan.power_at(k) * config_.slot_hours() * (1.0 - s.xi);
        }
        return x;
    }

    /// Cost of slots [start, now): metered energy where known, planned after.
    double cost_accrued(const std::string& id, Slot now) const
    {
        const auto& t = at(id);
        double c = 0.0;
        for (Slot k = t.start; k < now; ++k) {
            const auto i = static_cast<std::size_t>(k - t.start);
            const double e = k < t.reported_through ? t.slot_energy_kwh[i]
                                                    : t.plan.power_at(k) * config_.slot_hours();
            c += e * price(k);
        }
        return c;
    }

    double metered_cost(const std::string& id) const
    {
        const auto& t = at(id);
        double c = 0.0;
        for (std::size_t i = 0; i < t.slot_energy_kwh.size(); ++i) {
            c += t.slot_energy_kwh[i] * price(t.start + static_cast<Slot>(i));
        }
        return c;
    }

    const TrackedSession* find(const std::string& id) const
    {
        const auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, TrackedSession>& sessions() const { return sessions_; }
    const Tariff& tariff() const { return tariff_; }
    const DsoSignal& signal() const { return signal_; }
    const ControllerConfig& config() const { return config_; }
    Slot last_slot() const { return last_slot_; }

    /// Planned aggregate power of all active sessions at slot k.
    double planned_load(Slot k) const
    {
        double p = 0.0;
        for (const auto& [id, t] : sessions_) {
            if (t.session.status == SessionStatus::Active) {
                p += t.plan.power_at(k);
            }
        }
        return p;
    }

private:
    TrackedSession& at(const std::string& id)
    {
        const auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            throw UnknownSession("unknown session " + id);
        }
        return it->second;
    }
    const TrackedSession& at(const std::string& id) const
    {
        return const_cast<LoadAreaController*>(this)->at(id);
    }

    double price(Slot k) const
    {
        const auto i = static_cast<std::size_t>(k);
        return i < tariff_.prices.size() ? tariff_.prices[i] : 0.0;
    }

    static void merge_tail(std::vector<double>& dst, const std::vector<double>& src, Slot from)
    {
        const auto f = static_cast<std::size_t>(std::max<Slot>(from, 0));
        if (dst.size() < src.size()) {
            dst.resize(src.size(), 0.0);
        }
        for (std::size_t i = f; i < src.size(); ++i) {
            dst[i] = src[i];
        }
    }

    std::optional<ResolveReport> maybe_replan(const ControllerEvent& ev)
    {
        if (!config_.replan_on_events) {
            return std::nullopt;
        }
        return resolve(ev.slot, ev.kind, nullptr);
    }

    std::optional<ResolveReport> on_new_session(const ControllerEvent& ev)
    {
        auto s = ev.session.value();
        if (sessions_.count(s.id) != 0) {
            throw InvalidSession("duplicate session " + s.id);
        }
        s.status = SessionStatus::Active;
        TrackedSession t;
        t.session = s;
        t.start = ev.slot;
        t.reported_through = ev.slot;
        t.plan.session_id = s.id;
        t.plan.start = ev.slot;
        sessions_.emplace(s.id, std::move(t));
        return resolve(ev.slot, ev.kind, config_.replan_on_events ? nullptr : &s.id);
    }

    std::optional<ResolveReport> on_feedback(const ControllerEvent& ev)
    {
        const auto& fb = ev.feedback.value();
        auto& t = at(fb.session_id);
        const Slot through = fb.slot + 1;
        if (through <= t.reported_through || t.session.status != SessionStatus::Active) {
            return std::nullopt;  // stale or duplicate
        }
        const double delta = std::max(0.0, fb.cumulative_energy_kwh - t.reported_energy_kwh);
        t.slot_energy_kwh.resize(static_cast<std::size_t>(through - t.start), 0.0);
        // Which of the unreported slots drew the energy is unknown. Booking it
        // on the cheapest one keeps the accrued cost a lower bound, so it can
        // only grow until the exact per-slot energies arrive at the end.
        Slot cheapest = through - 1;
        for (Slot k = t.reported_through; k < through; ++k) {
            if (price(k) < price(cheapest)) {
                cheapest = k;
            }
        }
        t.slot_energy_kwh[static_cast<std::size_t>(cheapest - t.start)] = delta;
        t.reported_energy_kwh += delta;
        t.reported_through = through;
        t.session.cost_accrued = std::max(t.session.cost_accrued, metered_cost(fb.session_id));
        if (fb.deviation_exceeded) {
            return maybe_replan(ev);
        }
        return std::nullopt;
    }

    std::optional<ResolveReport> on_end(const ControllerEvent& ev)
    {
        auto& t = at(ev.session_id);
        if (t.session.status == SessionStatus::Terminated) {
            return std::nullopt;
        }
        if (!ev.final_slot_energy_kwh.empty()) {
            t.slot_energy_kwh = ev.final_slot_energy_kwh;
            t.reported_energy_kwh = 0.0;
            for (double e : t.slot_energy_kwh) {
                t.reported_energy_kwh += e;
            }
            t.reported_through = t.start + static_cast<Slot>(t.slot_energy_kwh.size());
        }
        t.session.cost_accrued = std::max(t.session.cost_accrued, metered_cost(ev.session_id));
        t.session.status = SessionStatus::Terminated;
        // Nothing runs after the end slot.
        truncate_plan(t.plan, ev.slot);
        const bool others = std::any_of(sessions_.begin(), sessions_.end(), [&](const auto& kv) {
            return kv.second.session.status == SessionStatus::Active && kv.second.session.departure > ev.slot;
        });
        if (others) {
            return maybe_replan(ev);
        }
        return std::nullopt;
    }

    static void truncate_plan(LoadSchedule& plan, Slot end)
    {
        if (end < plan.end()) {
            const auto n = static_cast<std::size_t>(std::max<Slot>(0, end - plan.start));
            plan.u.resize(n);
            plan.power_setpoints.resize(n);
            if (plan.predicted_soc.size() > n + 1) {
                plan.predicted_soc.resize(n + 1);
            }
        }
    }

    // Re-solves at `now`. With `only` set, just that session is decided and
    // every other active plan enters as fixed load.
    std::optional<ResolveReport> resolve(Slot now, EventKind trigger, const std::string* only)
    {
        std::vector<ChargingSession> batch;
        std::vector<TrackedSession*> tracked;
        std::vector<double> fixed;
        bool all_planned = true;
        for (auto& [id, t] : sessions_) {
            auto& s = t.session;
            if (s.status != SessionStatus::Active) {
                continue;
            }
            if (s.departure <= now) {
                continue;
            }
            if (only != nullptr && id != *only) {
                for (Slot k = now; k < t.plan.end(); ++k) {
                    const auto i = static_cast<std::size_t>(k);
                    if (fixed.size() <= i) {
                        fixed.resize(i + 1, 0.0);
                    }
                    fixed[i] += t.plan.power_at(k);
                }
                continue;
            }
            ChargingSession c = s;
            c.x0_kwh = std::clamp(soc_estimate(id, now), s.x_min_kwh, s.x_max_kwh);
            c.cost_accrued = std::max(s.cost_accrued, cost_accrued(id, now));
            batch.push_back(c);
            tracked.push_back(&t);
            all_planned = all_planned && t.plan.end() >= s.departure && t.plan.start <= now;
        }
        if (batch.empty()) {
            return std::nullopt;
        }

        auto problem = build_problem(batch, tariff_, signal_, config_, now, fixed);
        ResolveReport rep;
        rep.slot = now;
        rep.trigger = trigger;
        if (all_planned) {
            std::vector<double> x(problem.model.num_vars, 0.0);
            for (std::size_t m = 0; m < batch.size(); ++m) {
                const auto& b = problem.blocks[m];
                for (Slot k = now; k < b.departure; ++k) {
                    x[b.var(k)] = tracked[m]->plan.u_at(k);
                }
            }
            double t = 0.0;
            for (Slot k = now; k < problem.horizon_end; ++k) {
                const auto i = static_cast<std::size_t>(k);
                double load = i < fixed.size() ? fixed[i] : 0.0;
                for (std::size_t m = 0; m < batch.size(); ++m) {
                    load += tracked[m]->plan.power_at(k);
                }
                t = std::max(t, signal_.lambda[i] * std::abs(load - signal_.p_ref[i]));
            }
            x[problem.epigraph_var] = t;
            rep.previous_tail_objective = milp::objective_of(problem.model, x);
            rep.previous_tail_violation = milp::max_violation(problem.model, x);
        }

        auto set = solve_schedules(std::move(problem), batch, tariff_, signal_, config_, limits_);
        rep.status = set.status;
        rep.objective = set.objective;
        rep.relaxed = set.relaxed;
        rep.still_infeasible = set.still_infeasible;
        rep.node_limited = set.node_limited;
        const double hours = config_.slot_hours();
        for (std::size_t m = 0; m < batch.size(); ++m) {
            auto& t = *tracked[m];
            auto& fresh = set.schedules[m];
            commit(t.plan, fresh, now);
            if (!t.session.cost_star) {
                double c = batch[m].cost_accrued;
                for (std::size_t i = 0; i < fresh.power_setpoints.size(); ++i) {
                    c += fresh.power_setpoints[i] * hours * price(fresh.start + static_cast<Slot>(i));
                }
                t.session.cost_star = c;
            }
            t.session.best_effort = fresh.best_effort;
            t.shortfall_kwh = set.shortfall_kwh[m];
            rep.session_ids.push_back(t.session.id);
            if (fresh.best_effort) {
                rep.best_effort.push_back(t.session.id);
            }
        }
        return rep;
    }

    // Keeps the plan before `now` and replaces it from `now` on.
    void commit(LoadSchedule& plan, const LoadSchedule& fresh, Slot now) const
    {
        const Slot start = plan.start;
        const auto keep = static_cast<std::size_t>(std::max<Slot>(0, now - start));
        plan.u.resize(keep, 0.0);
        plan.power_setpoints.resize(keep, 0.0);
        plan.u.insert(plan.u.end(), fresh.u.begin(), fresh.u.end());
        plan.power_setpoints.insert(plan.power_setpoints.end(), fresh.power_setpoints.begin(),
                                    fresh.power_setpoints.end());
        plan.best_effort = fresh.best_effort;
        const auto& s = sessions_.at(plan.session_id).session;
        plan.predicted_soc = soc_predict(s.x0_kwh, plan.u, s.delta_p_kw, s.xi, config_.slot_hours());
    }

    ControllerConfig config_;
    Tariff tariff_;
    DsoSignal signal_;
    milp::SearchLimits limits_;
    std::map<std::string, TrackedSession> sessions_;
    Slot last_slot_ = 0;
    Slot last_periodic_ = 0;
};

} // namespace evmpc::lac
