#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::lac {

/// Integer slot index on the controller's time grid.
using Slot = int;

/// Lowest pilot current a mode-3 station may signal.
inline constexpr double kMinPilotCurrentA = 6.0;
inline constexpr double kNominalVoltageKv = 0.23;

enum class SessionStatus { Reserved, Active, Terminated };

inline const char* to_string(SessionStatus s)
{
    switch (s) {
    case SessionStatus::Reserved: return "Reserved";
    case SessionStatus::Active: return "Active";
    case SessionStatus::Terminated: return "Terminated";
    }
    return "?";
}

struct ChargingSession {
    std::string id;
    std::string station_socket;
    double delta_p_kw = 0.0;
    int phases = 1;
    double alpha = 0.0;
    double xi = 0.0;
    double capacity_assumed_kwh = 0.0;
    // SoC at the first slot of the problem being built.
    double x0_kwh = 0.0;
    double x_min_kwh = 0.0;
    double x_max_kwh = 0.0;
    double x_ref_kwh = 0.0;
    Slot departure = 0;
    double cost_accrued = 0.0;
    // Cost of the first schedule ever computed for this session; unset until
    // that first solve.
    std::optional<double> cost_star;
    SessionStatus status = SessionStatus::Reserved;
    bool best_effort = false;
};

struct Tariff {
    // Price per kWh, indexed by absolute slot.
    std::vector<double> prices;
};

struct DsoSignal {
    // Indexed by absolute slot.
    std::vector<double> p_ref;
    std::vector<double> p_max;
    std::vector<double> lambda;
    Slot effective_from = 0;

    std::size_t coverage() const
    {
        return std::min({p_ref.size(), p_max.size(), lambda.size()});
    }
};

struct ControllerConfig {
    double slot_minutes = 5.0;
    double mu = 1.0;
    double epsilon = 0.1;
    Slot horizon_slots = 288;
    // 0 disables periodic re-planning.
    Slot replan_period_slots = 1;
    // When false only a new session triggers a solve, and only for that
    // session; committed schedules are never revised.
    bool replan_on_events = true;
    // Drop SoC box rows that are implied by monotone charging (lower rows
    // when x0 >= x_min, intermediate upper rows dominated by the final one).
    bool prune_implied_soc_rows = true;
    // Penalty per kWh of final-SoC shortfall in the relaxed problem; 0 picks
    // the default from the instance data.
    double shortfall_penalty = 0.0;

    double slot_hours() const { return slot_minutes / 60.0; }
};

struct LoadSchedule {
    std::string session_id;
    Slot start = 0;
    std::vector<double> u;
    std::vector<double> power_setpoints;
    // One entry per slot boundary: predicted_soc[0] is the SoC at `start`.
    std::vector<double> predicted_soc;
    bool best_effort = false;

    Slot end() const { return start + static_cast<Slot>(u.size()); }
    double power_at(Slot k) const
    {
        if (k < start || k >= end()) {
            return 0.0;
        }
        return power_setpoints[static_cast<std::size_t>(k - start)];
    }
    double u_at(Slot k) const
    {
        if (k < start || k >= end()) {
            return 0.0;
        }
        return u[static_cast<std::size_t>(k - start)];
    }
};

struct HorizonTooShort : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct InvalidSession : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Minimum normalised power so the pilot never drops below 6 A.
inline double min_normalized_power(int phases, double delta_p_kw)
{
    return kMinPilotCurrentA * phases * kNominalVoltageKv / delta_p_kw;
}

inline double pct_to_kwh(double pct, double capacity_kwh)
{
    if (pct < 0.0 || pct > 100.0) {
        throw std::domain_error("SoC percentage outside [0, 100]");
    }
    if (capacity_kwh <= 0.0) {
        throw std::domain_error("battery capacity must be positive");
    }
    return pct / 100.0 * capacity_kwh;
}

inline double kwh_to_pct(double kwh, double capacity_kwh)
{
    if (capacity_kwh <= 0.0) {
        throw std::domain_error("battery capacity must be positive");
    }
    return kwh / capacity_kwh * 100.0;
}

} // namespace evmpc::lac
