#pragma once

// Control center: session lifecycle, schedule dissemination and report
// ingestion around one load area controller. Every public call appends an
// event-log record and then applies it; replaying the log on a fresh center
// rebuilds the same state.

#include "evmpc/center/messages.hpp"
#include "evmpc/lac/controller.hpp"
#include "evmpc/plant/plant.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::center {

enum class Rejection {
    SocketBusy,
    InvalidWindow,
    InvalidProfile,
    UnknownSocket,
    UnknownRfid,
    NoValidReservation,
    UnknownSession,
    NotActive,
    HorizonTooShort
};

NLOHMANN_JSON_SERIALIZE_ENUM(Rejection, {{Rejection::SocketBusy, "socket_busy"},
                                         {Rejection::InvalidWindow, "invalid_window"},
                                         {Rejection::InvalidProfile, "invalid_profile"},
                                         {Rejection::UnknownSocket, "unknown_socket"},
                                         {Rejection::UnknownRfid, "unknown_rfid"},
                                         {Rejection::NoValidReservation, "no_valid_reservation"},
                                         {Rejection::UnknownSession, "unknown_session"},
                                         {Rejection::NotActive, "not_active"},
                                         {Rejection::HorizonTooShort, "horizon_too_short"}})

struct Outcome {
    std::optional<Rejection> error;
    std::string id;
    bool ok() const { return !error.has_value(); }
};

struct PevProfile {
    double capacity_kwh = 22.0;
    double max_power_kw = 3.68;
    int phases = 1;
    double arrival_soc_pct = 0.0;
    // Loss factor the controller assumes for this vehicle.
    double xi = 0.0;
    double min_soc_pct = 0.0;
    double max_soc_pct = 100.0;
};

struct Reservation {
    std::string user_id;
    std::string rfid;
    std::string station_socket;
    Slot requested_start = 0;
    Slot departure = 0;
    double desired_final_soc_pct = 0.0;
    PevProfile pev;
};

enum class ReservationStatus { Pending, InUse, Completed };

NLOHMANN_JSON_SERIALIZE_ENUM(ReservationStatus, {{ReservationStatus::Pending, "pending"},
                                                 {ReservationStatus::InUse, "in_use"},
                                                 {ReservationStatus::Completed, "completed"}})

inline void to_json(json& j, const PevProfile& p)
{
    j = json{{"capacity_kwh", p.capacity_kwh},       {"max_power_kw", p.max_power_kw},
             {"phases", p.phases},                   {"arrival_soc_pct", p.arrival_soc_pct},
             {"xi", p.xi},                           {"min_soc_pct", p.min_soc_pct},
             {"max_soc_pct", p.max_soc_pct}};
}
inline void from_json(const json& j, PevProfile& p)
{
    j.at("capacity_kwh").get_to(p.capacity_kwh);
    j.at("max_power_kw").get_to(p.max_power_kw);
    j.at("phases").get_to(p.phases);
    j.at("arrival_soc_pct").get_to(p.arrival_soc_pct);
    p.xi = j.value("xi", 0.0);
    p.min_soc_pct = j.value("min_soc_pct", 0.0);
    p.max_soc_pct = j.value("max_soc_pct", 100.0);
}
inline void to_json(json& j, const Reservation& r)
{
    j = json{{"user_id", r.user_id},
             {"rfid", r.rfid},
             {"station_socket", r.station_socket},
             {"requested_start", r.requested_start},
             {"departure", r.departure},
             {"desired_final_soc_pct", r.desired_final_soc_pct},
             {"pev", r.pev}};
}
inline void from_json(const json& j, Reservation& r)
{
    j.at("user_id").get_to(r.user_id);
    j.at("rfid").get_to(r.rfid);
    j.at("station_socket").get_to(r.station_socket);
    j.at("requested_start").get_to(r.requested_start);
    j.at("departure").get_to(r.departure);
    j.at("desired_final_soc_pct").get_to(r.desired_final_soc_pct);
    j.at("pev").get_to(r.pev);
}

struct SocketInfo {
    std::string ref;
    int phases = 1;
    int max_current_a = 32;
    double voltage_v = 230.0;
};

struct CenterConfig {
    lac::ControllerConfig lac;
    milp::SearchLimits limits;
    double deviation_threshold_kw = 0.3;
    int push_retries = 2;
    // Carry unquantised set points in schedule messages (ideal actuation).
    bool send_power_setpoints = false;
    std::vector<SocketInfo> sockets;
};

/// Controller view of a reserved vehicle on a socket: power limit from the
/// weaker of vehicle and socket, SoC bounds converted with the declared
/// capacity. Empty when the socket cannot go down to the 6 A minimum.
inline std::optional<lac::ChargingSession> make_session(const Reservation& r, const SocketInfo& sock, std::string id)
{
    lac::ChargingSession s;
    s.id = std::move(id);
    s.station_socket = r.station_socket;
    s.phases = std::min(r.pev.phases, sock.phases);
    s.delta_p_kw = std::min(r.pev.max_power_kw, sock.max_current_a * s.phases * sock.voltage_v / 1000.0);
    s.alpha = lac::min_normalized_power(s.phases, s.delta_p_kw);
    if (!(s.alpha < 1.0)) {
        return std::nullopt;
    }
    s.xi = r.pev.xi;
    s.capacity_assumed_kwh = r.pev.capacity_kwh;
    s.x0_kwh = lac::pct_to_kwh(r.pev.arrival_soc_pct, r.pev.capacity_kwh);
    s.x_min_kwh = std::min(lac::pct_to_kwh(r.pev.min_soc_pct, r.pev.capacity_kwh), s.x0_kwh);
    s.x_max_kwh = std::max(lac::pct_to_kwh(r.pev.max_soc_pct, r.pev.capacity_kwh), s.x0_kwh);
    s.x_ref_kwh =
        std::clamp(lac::pct_to_kwh(r.desired_final_soc_pct, r.pev.capacity_kwh), s.x_min_kwh, s.x_max_kwh);
    s.departure = r.departure;
    return s;
}

struct EventLogRecord {
    std::uint64_t seq = 0;
    Slot slot = 0;
    std::string kind;
    json payload;
};

inline void to_json(json& j, const EventLogRecord& r)
{
    j = json{{"seq", r.seq}, {"slot", r.slot}, {"kind", r.kind}, {"payload", r.payload}};
}
inline void from_json(const json& j, EventLogRecord& r)
{
    j.at("seq").get_to(r.seq);
    j.at("slot").get_to(r.slot);
    j.at("kind").get_to(r.kind);
    r.payload = j.at("payload");
}

struct FinalSessionReport {
    std::string session_id;
    Slot slot = 0;
    TerminationCause cause = TerminationCause::Unplug;
    double total_kwh = 0.0;
    double total_cost = 0.0;
    // From the controller's view: arrival SoC plus metered energy after losses.
    double final_soc_pct = 0.0;
    std::vector<double> slot_energy_kwh;
};

inline void to_json(json& j, const FinalSessionReport& r)
{
    j = json{{"session_id", r.session_id}, {"slot", r.slot},
             {"cause", r.cause},           {"total_kwh", r.total_kwh},
             {"total_cost", r.total_cost}, {"final_soc_pct", r.final_soc_pct},
             {"slot_energy_kwh", r.slot_energy_kwh}};
}

struct SessionRecord {
    std::string id;
    std::string reservation_id;
    std::string station_socket;
    Slot start = 0;
    lac::SessionStatus status = lac::SessionStatus::Active;
    bool stop_sent = false;
    double last_deviation_kw = 0.0;
    int deviation_resolves = 0;
    int missing_reports = 0;
    std::optional<FinalSessionReport> final_report;
};

/// Sends one message to a station; false means it did not arrive.
using Transport = std::function<bool(const json&)>;

struct OutOfOrderCall : std::logic_error {
    using std::logic_error::logic_error;
};

class ControlCenter {
public:
    ControlCenter(CenterConfig config, lac::Tariff tariff, lac::DsoSignal signal)
        : config_(std::move(config)), lac_(config_.lac, std::move(tariff), std::move(signal), config_.limits)
    {
        for (const auto& s : config_.sockets) {
            sockets_[s.ref] = s;
        }
    }

    void set_transport(Transport t) { transport_ = std::move(t); }

    Outcome reserve(const Reservation& r, Slot slot) { return record(slot, "reserve", r); }
    Outcome authenticate(const AuthMsg& m) { return record(m.slot, "authenticate", m); }
    Outcome ingest_report(const ReportMsg& m) { return record(std::max(m.slot + 1, last_slot_), "report", m); }
    Outcome report_missing(const std::string& session, Slot slot)
    {
        return record(std::max(slot + 1, last_slot_), "report_missing", json{{"session", session}, {"slot", slot}});
    }
    Outcome apply_dso_signal(const lac::DsoSignal& s, Slot slot) { return record(slot, "dso", s); }
    Outcome apply_tariff(const lac::Tariff& t, Slot slot) { return record(slot, "tariff", t); }
    Outcome tick(Slot slot) { return record(slot, "tick", json::object()); }
    Outcome terminate(const TerminateMsg& m) { return record(std::max(m.slot, last_slot_), "terminate", m); }

    static ControlCenter replay(CenterConfig config, lac::Tariff tariff, lac::DsoSignal signal,
                                const std::vector<EventLogRecord>& log)
    {
        ControlCenter c(std::move(config), std::move(tariff), std::move(signal));
        for (const auto& r : log) {
            c.log_.push_back(r);
            c.last_slot_ = r.slot;
            c.apply(r);
        }
        return c;
    }

    const std::vector<EventLogRecord>& log() const { return log_; }
    const lac::LoadAreaController& lac() const { return lac_; }
    const std::vector<lac::ResolveReport>& resolve_reports() const { return resolves_; }
    const std::map<std::string, SessionRecord>& sessions() const { return sessions_; }
    const SessionRecord* session(const std::string& id) const
    {
        const auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : &it->second;
    }
    std::optional<std::string> active_session_on(const std::string& socket) const
    {
        const auto it = socket_active_.find(socket);
        if (it == socket_active_.end()) {
            return std::nullopt;
        }
        return it->second;
    }
    std::size_t pending_messages() const { return pending_schedules_.size() + pending_stops_.size(); }

    /// Full derived state; equal snapshots mean equal centers.
    json snapshot() const
    {
        json j;
        j["last_slot"] = last_slot_;
        j["log_size"] = log_.size();
        json res = json::object();
        for (const auto& [id, r] : reservations_) {
            res[id] = json{{"reservation", r.first}, {"status", r.second}};
        }
        j["reservations"] = res;
        json ses = json::object();
        for (const auto& [id, s] : sessions_) {
            json e{{"reservation_id", s.reservation_id},
                   {"station_socket", s.station_socket},
                   {"start", s.start},
                   {"status", s.status},
                   {"stop_sent", s.stop_sent},
                   {"last_deviation_kw", s.last_deviation_kw},
                   {"deviation_resolves", s.deviation_resolves},
                   {"missing_reports", s.missing_reports}};
            if (s.final_report) {
                e["final_report"] = *s.final_report;
            }
            ses[id] = e;
        }
        j["sessions"] = ses;
        j["socket_active"] = socket_active_;
        json pend = json::object();
        for (const auto& [id, m] : pending_schedules_) {
            pend[id] = m;
        }
        j["pending_schedules"] = pend;
        json stops = json::object();
        for (const auto& [id, m] : pending_stops_) {
            stops[id] = m;
        }
        j["pending_stops"] = stops;
        json delivered = json::object();
        for (const auto& [id, m] : delivered_) {
            delivered[id] = m;
        }
        j["delivered_schedules"] = delivered;
        json lac_state;
        lac_state["tariff"] = lac_.tariff();
        lac_state["signal"] = lac_.signal();
        lac_state["last_slot"] = lac_.last_slot();
        json tracked = json::object();
        for (const auto& [id, t] : lac_.sessions()) {
            tracked[id] = json{{"session", t.session},
                               {"start", t.start},
                               {"plan", t.plan},
                               {"reported_energy_kwh", t.reported_energy_kwh},
                               {"reported_through", t.reported_through},
                               {"slot_energy_kwh", t.slot_energy_kwh},
                               {"shortfall_kwh", t.shortfall_kwh}};
        }
        lac_state["sessions"] = tracked;
        j["lac"] = lac_state;
        j["resolves"] = resolves_.size();
        return j;
    }

private:
    template <class Payload>
    Outcome record(Slot slot, const char* kind, const Payload& payload)
    {
        if (slot < last_slot_) {
            throw OutOfOrderCall(std::string(kind) + " at slot " + std::to_string(slot) + " after slot " +
                                 std::to_string(last_slot_));
        }
        EventLogRecord r{next_seq(), slot, kind, json(payload)};
        log_.push_back(r);
        last_slot_ = slot;
        const Outcome out = apply(r);
        flush();
        return out;
    }

    std::uint64_t next_seq() const { return log_.empty() ? 1 : log_.back().seq + 1; }

    Outcome apply(const EventLogRecord& r)
    {
        const auto& p = r.payload;
        const auto& k = r.kind;
        if (k == "reserve") {
            return apply_reserve(p.get<Reservation>(), r.slot);
        }
        if (k == "authenticate") {
            return apply_authenticate(p.get<AuthMsg>());
        }
        if (k == "report") {
            return apply_report(p.get<ReportMsg>(), r.slot);
        }
        if (k == "report_missing") {
            const auto id = p.at("session").get<std::string>();
            const auto it = sessions_.find(id);
            if (it == sessions_.end()) {
                return {Rejection::UnknownSession, id};
            }
            ++it->second.missing_reports;
            return {std::nullopt, id};
        }
        if (k == "dso") {
            lac::ControllerEvent ev;
            ev.kind = lac::EventKind::DsoUpdate;
            ev.slot = r.slot;
            ev.signal = p.get<lac::DsoSignal>();
            after_resolve(lac_.handle(ev));
            return {};
        }
        if (k == "tariff") {
            lac::ControllerEvent ev;
            ev.kind = lac::EventKind::TariffUpdate;
            ev.slot = r.slot;
            ev.tariff = p.get<lac::Tariff>();
            after_resolve(lac_.handle(ev));
            return {};
        }
        if (k == "tick") {
            return apply_tick(r.slot);
        }
        if (k == "terminate") {
            return apply_terminate(p.get<TerminateMsg>(), r.slot);
        }
        if (k == "push") {
            apply_push(p);
            return {};
        }
        throw std::invalid_argument("unknown event kind " + k);
    }

    Outcome apply_reserve(const Reservation& r, Slot)
    {
        if (r.departure <= r.requested_start) {
            return {Rejection::InvalidWindow, {}};
        }
        const auto sock = sockets_.find(r.station_socket);
        if (sock == sockets_.end()) {
            return {Rejection::UnknownSocket, {}};
        }
        const auto pct_ok = [](double v) { return v >= 0.0 && v <= 100.0; };
        const auto& pev = r.pev;
        if (!pct_ok(r.desired_final_soc_pct) || !pct_ok(pev.arrival_soc_pct) || !pct_ok(pev.min_soc_pct) ||
            !pct_ok(pev.max_soc_pct) || !(pev.capacity_kwh > 0.0) || !(pev.max_power_kw > 0.0) ||
            (pev.phases != 1 && pev.phases != 3) || !(pev.xi >= 0.0 && pev.xi < 0.5)) {
            return {Rejection::InvalidProfile, {}};
        }
        for (const auto& [id, entry] : reservations_) {
            const auto& [other, status] = entry;
            if (status == ReservationStatus::Completed || other.station_socket != r.station_socket) {
                continue;
            }
            if (r.requested_start < other.departure && other.requested_start < r.departure) {
                return {Rejection::SocketBusy, {}};
            }
        }
        const std::string id = "res-" + std::to_string(reservations_.size() + 1);
        reservations_[id] = {r, ReservationStatus::Pending};
        return {std::nullopt, id};
    }

    Outcome apply_authenticate(const AuthMsg& m)
    {
        bool known = false;
        std::string match;
        for (const auto& [id, entry] : reservations_) {
            const auto& [r, status] = entry;
            if (r.rfid != m.rfid) {
                continue;
            }
            known = true;
            if (status == ReservationStatus::Pending && r.station_socket == m.station_socket &&
                r.requested_start <= m.slot && m.slot < r.departure) {
                match = id;
                break;
            }
        }
        if (!known) {
            return {Rejection::UnknownRfid, {}};
        }
        if (match.empty()) {
            return {Rejection::NoValidReservation, {}};
        }
        if (socket_active_.count(m.station_socket) != 0) {
            return {Rejection::SocketBusy, {}};
        }
        auto& [r, status] = reservations_.at(match);
        const auto& sock = sockets_.at(r.station_socket);
        const auto& cfg = config_.lac;
        if (r.departure - m.slot > cfg.horizon_slots ||
            static_cast<std::size_t>(r.departure) > lac_.tariff().prices.size() ||
            static_cast<std::size_t>(r.departure) > lac_.signal().coverage()) {
            return {Rejection::HorizonTooShort, {}};
        }
        auto made = make_session(r, sock, "ses-" + std::to_string(sessions_.size() + 1));
        if (!made) {
            return {Rejection::InvalidProfile, {}};
        }
        const auto& s = *made;
        status = ReservationStatus::InUse;
        SessionRecord rec;
        rec.id = s.id;
        rec.reservation_id = match;
        rec.station_socket = r.station_socket;
        rec.start = m.slot;
        sessions_[s.id] = rec;
        socket_active_[r.station_socket] = s.id;
        lac::ControllerEvent ev;
        ev.kind = lac::EventKind::NewSession;
        ev.slot = m.slot;
        ev.session = s;
        after_resolve(lac_.handle(ev));
        return {std::nullopt, s.id};
    }

    Outcome apply_report(const ReportMsg& m, Slot slot)
    {
        const auto it = sessions_.find(m.session);
        if (it == sessions_.end()) {
            return {Rejection::UnknownSession, m.session};
        }
        auto& rec = it->second;
        if (rec.status != lac::SessionStatus::Active) {
            return {Rejection::NotActive, m.session};
        }
        const double commanded = lac_.find(m.session)->plan.power_at(m.slot);
        rec.last_deviation_kw = std::abs(m.power_kw - commanded);
        const bool deviates = rec.last_deviation_kw > config_.deviation_threshold_kw;
        lac::ControllerEvent ev;
        ev.kind = lac::EventKind::MeterFeedback;
        ev.slot = slot;
        ev.feedback = lac::MeterFeedback{m.session, m.slot, m.energy_kwh, m.power_kw, deviates};
        auto rep = lac_.handle(ev);
        if (rep) {
            ++rec.deviation_resolves;
        }
        after_resolve(std::move(rep));
        return {std::nullopt, m.session};
    }

    Outcome apply_tick(Slot slot)
    {
        for (auto& [id, rec] : sessions_) {
            if (rec.status == lac::SessionStatus::Active && !rec.stop_sent &&
                lac_.find(id)->session.departure <= slot && pending_stops_.count(id) == 0) {
                pending_stops_[id] = StopMsg{id, rec.station_socket, slot};
            }
        }
        lac::ControllerEvent ev;
        ev.kind = lac::EventKind::PeriodicTick;
        ev.slot = slot;
        after_resolve(lac_.handle(ev));
        return {};
    }

    Outcome apply_terminate(const TerminateMsg& m, Slot slot)
    {
        const auto it = sessions_.find(m.session);
        if (it == sessions_.end()) {
            return {Rejection::UnknownSession, m.session};
        }
        auto& rec = it->second;
        if (rec.status != lac::SessionStatus::Active) {
            return {Rejection::NotActive, m.session};
        }
        lac::ControllerEvent ev;
        ev.kind = lac::EventKind::SessionEnd;
        ev.slot = slot;
        ev.session_id = m.session;
        ev.final_slot_energy_kwh = m.slot_energy_kwh;
        after_resolve(lac_.handle(ev));

        const auto& t = *lac_.find(m.session);
        FinalSessionReport fin;
        fin.session_id = m.session;
        fin.slot = m.slot;
        fin.cause = m.cause;
        fin.slot_energy_kwh = t.slot_energy_kwh;
        fin.total_kwh = t.reported_energy_kwh;
        fin.total_cost = t.session.cost_accrued;
        fin.final_soc_pct = lac::kwh_to_pct(t.session.x0_kwh + (1.0 - t.session.xi) * fin.total_kwh,
                                            t.session.capacity_assumed_kwh);
        rec.final_report = fin;
        rec.status = lac::SessionStatus::Terminated;
        socket_active_.erase(rec.station_socket);
        reservations_.at(rec.reservation_id).second = ReservationStatus::Completed;
        pending_schedules_.erase(m.session);
        pending_stops_.erase(m.session);
        return {std::nullopt, m.session};
    }

    void after_resolve(std::optional<lac::ResolveReport> rep)
    {
        if (!rep) {
            return;
        }
        for (const auto& id : rep->session_ids) {
            pending_schedules_[id] = schedule_message(id, rep->slot);
        }
        resolves_.push_back(std::move(*rep));
    }

    ScheduleMsg schedule_message(const std::string& id, Slot from) const
    {
        const auto& t = *lac_.find(id);
        const auto& sock = sockets_.at(t.session.station_socket);
        ScheduleMsg m;
        m.session = id;
        m.station_socket = t.session.station_socket;
        m.from_slot = from;
        for (Slot k = from; k < t.plan.end(); ++k) {
            const double p = t.plan.power_at(k);
            m.amps.push_back(plant::quantize_setpoint(p, t.session.phases, sock.voltage_v));
            if (config_.send_power_setpoints) {
                m.power_kw.push_back(p);
            }
        }
        return m;
    }

    // Tries every pending message; outcomes go into the log as push records.
    void flush()
    {
        if (!transport_) {
            return;
        }
        std::vector<std::pair<std::string, json>> outgoing;
        for (const auto& [id, m] : pending_stops_) {
            outgoing.emplace_back("stop", json(m));
        }
        for (const auto& [id, m] : pending_schedules_) {
            outgoing.emplace_back("schedule", json(m));
        }
        for (const auto& [what, msg] : outgoing) {
            int attempts = 0;
            bool delivered = false;
            while (!delivered && attempts <= config_.push_retries) {
                ++attempts;
                delivered = transport_(msg);
            }
            EventLogRecord r{next_seq(), last_slot_, "push",
                             json{{"what", what}, {"message", msg}, {"delivered", delivered}, {"attempts", attempts}}};
            log_.push_back(r);
            apply(r);
        }
    }

    void apply_push(const json& p)
    {
        if (!p.at("delivered").get<bool>()) {
            return;  // stays pending for the next attempt
        }
        const auto what = p.at("what").get<std::string>();
        const auto id = p.at("message").at("session").get<std::string>();
        if (what == "stop") {
            pending_stops_.erase(id);
            sessions_.at(id).stop_sent = true;
        } else {
            delivered_[id] = p.at("message").get<ScheduleMsg>();
            pending_schedules_.erase(id);
        }
    }

    CenterConfig config_;
    lac::LoadAreaController lac_;
    Transport transport_;
    std::map<std::string, SocketInfo> sockets_;
    std::map<std::string, std::pair<Reservation, ReservationStatus>> reservations_;
    std::map<std::string, SessionRecord> sessions_;
    std::map<std::string, std::string> socket_active_;
    std::map<std::string, ScheduleMsg> pending_schedules_;
    std::map<std::string, StopMsg> pending_stops_;
    std::map<std::string, ScheduleMsg> delivered_;
    std::vector<lac::ResolveReport> resolves_;
    std::vector<EventLogRecord> log_;
    Slot last_slot_ = 0;
};

} // namespace evmpc::center
