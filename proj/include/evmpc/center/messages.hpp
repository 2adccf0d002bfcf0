#pragma once

// Center <-> station wire messages (one JSON object per line) and JSON
// mappings for the value types that travel in them or in the event log.

#include "evmpc/lac/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace evmpc::center {

using json = nlohmann::json;
using lac::Slot;

enum class TerminationCause { RfidSwipe, Unplug, DepartureReached };

NLOHMANN_JSON_SERIALIZE_ENUM(TerminationCause, {{TerminationCause::RfidSwipe, "rfid_swipe"},
                                                {TerminationCause::Unplug, "unplug"},
                                                {TerminationCause::DepartureReached, "departure_reached"}})

/// Center -> station: current limits from `from_slot` on.
struct ScheduleMsg {
    std::string session;
    std::string station_socket;
    Slot from_slot = 0;
    std::vector<int> amps;
    // Unquantised set points; only ideal-actuation simulations read them.
    std::vector<double> power_kw;
};

/// Station -> center: status report for one elapsed slot.
struct ReportMsg {
    std::string session;
    Slot slot = 0;
    double power_kw = 0.0;
    double energy_kwh = 0.0;
    double voltage_v = 230.0;
    int current_a = 0;
};

/// Station -> center: RFID card presented at a socket.
struct AuthMsg {
    std::string rfid;
    std::string station_socket;
    Slot slot = 0;
};

/// Center -> station: stop charging (departure reached).
struct StopMsg {
    std::string session;
    std::string station_socket;
    Slot slot = 0;
};

/// Station -> center: last update of a session.
struct TerminateMsg {
    std::string session;
    Slot slot = 0;
    TerminationCause cause = TerminationCause::Unplug;
    double energy_kwh = 0.0;
    // Metered energy per slot from the session start.
    std::vector<double> slot_energy_kwh;
};

inline void to_json(json& j, const ScheduleMsg& m)
{
    j = json{{"type", "schedule"}, {"session", m.session}, {"station_socket", m.station_socket},
             {"from_slot", m.from_slot}, {"amps", m.amps}};
    if (!m.power_kw.empty()) {
        j["power_kw"] = m.power_kw;
    }
}
inline void from_json(const json& j, ScheduleMsg& m)
{
    j.at("session").get_to(m.session);
    j.at("station_socket").get_to(m.station_socket);
    j.at("from_slot").get_to(m.from_slot);
    j.at("amps").get_to(m.amps);
    m.power_kw = j.value("power_kw", std::vector<double>{});
}

inline void to_json(json& j, const ReportMsg& m)
{
    j = json{{"type", "report"},          {"session", m.session},     {"slot", m.slot},
             {"power_kw", m.power_kw},    {"energy_kwh", m.energy_kwh}, {"voltage_v", m.voltage_v},
             {"current_a", m.current_a}};
}
inline void from_json(const json& j, ReportMsg& m)
{
    j.at("session").get_to(m.session);
    j.at("slot").get_to(m.slot);
    j.at("power_kw").get_to(m.power_kw);
    j.at("energy_kwh").get_to(m.energy_kwh);
    j.at("voltage_v").get_to(m.voltage_v);
    j.at("current_a").get_to(m.current_a);
}

inline void to_json(json& j, const AuthMsg& m)
{
    j = json{{"type", "auth"}, {"rfid", m.rfid}, {"station_socket", m.station_socket}, {"slot", m.slot}};
}
inline void from_json(const json& j, AuthMsg& m)
{
    j.at("rfid").get_to(m.rfid);
    j.at("station_socket").get_to(m.station_socket);
    j.at("slot").get_to(m.slot);
}

inline void to_json(json& j, const StopMsg& m)
{
    j = json{{"type", "stop"}, {"session", m.session}, {"station_socket", m.station_socket}, {"slot", m.slot}};
}
inline void from_json(const json& j, StopMsg& m)
{
    j.at("session").get_to(m.session);
    j.at("station_socket").get_to(m.station_socket);
    j.at("slot").get_to(m.slot);
}

inline void to_json(json& j, const TerminateMsg& m)
{
    j = json{{"type", "terminate"},         {"session", m.session},
             {"slot", m.slot},              {"cause", m.cause},
             {"energy_kwh", m.energy_kwh}, {"slot_energy_kwh", m.slot_energy_kwh}};
}
inline void from_json(const json& j, TerminateMsg& m)
{
    j.at("session").get_to(m.session);
    j.at("slot").get_to(m.slot);
    j.at("cause").get_to(m.cause);
    j.at("energy_kwh").get_to(m.energy_kwh);
    j.at("slot_energy_kwh").get_to(m.slot_energy_kwh);
}

} // namespace evmpc::center

namespace evmpc::lac {

NLOHMANN_JSON_SERIALIZE_ENUM(SessionStatus, {{SessionStatus::Reserved, "reserved"},
                                             {SessionStatus::Active, "active"},
                                             {SessionStatus::Terminated, "terminated"}})

inline void to_json(nlohmann::json& j, const Tariff& t) { j = nlohmann::json{{"prices", t.prices}}; }
inline void from_json(const nlohmann::json& j, Tariff& t) { j.at("prices").get_to(t.prices); }

inline void to_json(nlohmann::json& j, const DsoSignal& d)
{
    j = nlohmann::json{
        {"p_ref", d.p_ref}, {"p_max", d.p_max}, {"lambda", d.lambda}, {"effective_from", d.effective_from}};
}
inline void from_json(const nlohmann::json& j, DsoSignal& d)
{
    j.at("p_ref").get_to(d.p_ref);
    j.at("p_max").get_to(d.p_max);
    j.at("lambda").get_to(d.lambda);
    d.effective_from = j.value("effective_from", 0);
}

inline void to_json(nlohmann::json& j, const ChargingSession& s)
{
    j = nlohmann::json{{"id", s.id},
                       {"station_socket", s.station_socket},
                       {"delta_p_kw", s.delta_p_kw},
                       {"phases", s.phases},
                       {"alpha", s.alpha},
                       {"xi", s.xi},
                       {"capacity_assumed_kwh", s.capacity_assumed_kwh},
                       {"x0_kwh", s.x0_kwh},
                       {"x_min_kwh", s.x_min_kwh},
                       {"x_max_kwh", s.x_max_kwh},
                       {"x_ref_kwh", s.x_ref_kwh},
                       {"departure", s.departure},
                       {"cost_accrued", s.cost_accrued},
                       {"cost_star", s.cost_star ? nlohmann::json(*s.cost_star) : nlohmann::json()},
                       {"status", s.status},
                       {"best_effort", s.best_effort}};
}
inline void from_json(const nlohmann::json& j, ChargingSession& s)
{
    j.at("id").get_to(s.id);
    j.at("station_socket").get_to(s.station_socket);
    j.at("delta_p_kw").get_to(s.delta_p_kw);
    j.at("phases").get_to(s.phases);
    j.at("alpha").get_to(s.alpha);
    j.at("xi").get_to(s.xi);
    j.at("capacity_assumed_kwh").get_to(s.capacity_assumed_kwh);
    j.at("x0_kwh").get_to(s.x0_kwh);
    j.at("x_min_kwh").get_to(s.x_min_kwh);
    j.at("x_max_kwh").get_to(s.x_max_kwh);
    j.at("x_ref_kwh").get_to(s.x_ref_kwh);
    j.at("departure").get_to(s.departure);
    j.at("cost_accrued").get_to(s.cost_accrued);
    if (!j.at("cost_star").is_null()) {
        s.cost_star = j.at("cost_star").get<double>();
    }
    j.at("status").get_to(s.status);
    j.at("best_effort").get_to(s.best_effort);
}

inline void to_json(nlohmann::json& j, const LoadSchedule& s)
{
    j = nlohmann::json{{"session_id", s.session_id},       {"start", s.start},
                       {"u", s.u},                         {"power_setpoints", s.power_setpoints},
                       {"predicted_soc", s.predicted_soc}, {"best_effort", s.best_effort}};
}

} // namespace evmpc::lac
