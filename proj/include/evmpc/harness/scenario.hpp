#pragma once

// Scenario documents: one JSON object describing the grid signals, stations,
// vehicle truths and timed events of a simulation run. The schema is
// documented in README.md.

#include "evmpc/center/center.hpp"

#include <cstdint>
#include <optional>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::harness {

using center::json;
using lac::Slot;

/// Malformed scenario. `where` is a JSON pointer or "line N" for syntax errors.
struct ScenarioInvalid : std::runtime_error {
    ScenarioInvalid(std::string where_, const std::string& what)
        : std::runtime_error(where_ + ": " + what), where(std::move(where_))
    {
    }
    std::string where;
};

/// What the vehicle really is, as opposed to what the user declares.
struct VehicleTruth {
    std::string id;
    double true_capacity_kwh = 22.0;
    double xi_true = 0.0;
    double taper_knee_pct = 85.0;
    double max_accept_kw = 22.08;
    // Negative: take the declared arrival SoC.
    double arrival_soc_pct = -1.0;
};

enum class EventType { Reserve, Swipe, Unplug, Dso, Tariff };

struct ScenarioEvent {
    Slot slot = 0;
    EventType type = EventType::Reserve;
    std::string rfid;
    std::string socket;
    std::string vehicle;
    center::Reservation reservation;
    // Dso / tariff: absolute-slot vectors; entries before `slot` are ignored
    // and an unset DSO series stays as it is.
    std::optional<std::vector<double>> p_ref;
    std::optional<std::vector<double>> p_max;
    std::optional<std::vector<double>> lambda;
    lac::Tariff tariff;
};

struct Scenario {
    std::string name;
    Slot slots = 0;
    std::uint64_t seed = 1;
    center::CenterConfig center;
    // Stations execute the unquantised set points instead of amps.
    bool ideal_actuation = false;
    double loss_probability = 0.0;
    double voltage_jitter = 0.0;
    lac::Tariff tariff;
    lac::DsoSignal signal;
    std::vector<VehicleTruth> vehicles;
    std::vector<ScenarioEvent> events;
    // The document this was parsed from, kept for output provenance.
    json source;
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

template <class T>
T read_as(const json& v, const std::string& path)
{
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) {
                throw ScenarioInvalid(path, "expected a number");
            }
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) {
                throw ScenarioInvalid(path, "expected an integer");
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ScenarioInvalid(path, "expected true or false");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw ScenarioInvalid(path, "expected a string");
            }
        }
        return v.get<T>();
    } catch (const json::exception& e) {
        throw ScenarioInvalid(path, e.what());
    }
}

template <class T>
T required(const json& obj, const std::string& path, const char* key)
{
    if (!obj.contains(key)) {
        throw ScenarioInvalid(child(path, key), "missing required field");
    }
    return read_as<T>(obj.at(key), child(path, key));
}

template <class T>
T optional(const json& obj, const std::string& path, const char* key, T fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    return read_as<T>(obj.at(key), child(path, key));
}

inline void require_object(const json& v, const std::string& path)
{
    if (!v.is_object()) {
        throw ScenarioInvalid(path.empty() ? "/" : path, "expected an object");
    }
}

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> known)
{
    for (const auto& [k, v] : obj.items()) {
        bool ok = false;
        for (const char* name : known) {
            ok = ok || k == name;
        }
        if (!ok) {
            throw ScenarioInvalid(child(path, k), "unknown field");
        }
    }
}

// A per-slot series: either an array of at least `length` numbers or one
// number repeated. Missing gives `fallback` repeated.
inline std::vector<double> series(const json& obj, const std::string& path, const char* key, std::size_t length,
                                  double fallback)
{
    if (!obj.contains(key)) {
        return std::vector<double>(length, fallback);
    }
    const auto& v = obj.at(key);
    const auto p = child(path, key);
    if (v.is_number()) {
        return std::vector<double>(length, v.get<double>());
    }
    if (!v.is_array()) {
        throw ScenarioInvalid(p, "expected a number or an array of numbers");
    }
    if (v.size() < length) {
        throw ScenarioInvalid(p, "has " + std::to_string(v.size()) + " entries, needs at least " +
                                     std::to_string(length));
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(read_as<double>(v[i], child(p, i)));
    }
    return out;
}

inline center::PevProfile parse_pev(const json& j, const std::string& path)
{
    require_object(j, path);
    reject_unknown(j, path,
                   {"capacity_kwh", "max_power_kw", "phases", "arrival_soc_pct", "xi", "min_soc_pct", "max_soc_pct"});
    center::PevProfile p;
    p.capacity_kwh = optional(j, path, "capacity_kwh", p.capacity_kwh);
    p.max_power_kw = optional(j, path, "max_power_kw", p.max_power_kw);
    p.phases = optional(j, path, "phases", p.phases);
    p.arrival_soc_pct = required<double>(j, path, "arrival_soc_pct");
    p.xi = optional(j, path, "xi", p.xi);
    p.min_soc_pct = optional(j, path, "min_soc_pct", p.min_soc_pct);
    p.max_soc_pct = optional(j, path, "max_soc_pct", p.max_soc_pct);
    return p;
}

inline void parse_config(const json& j, const std::string& path, Scenario& s)
{
    require_object(j, path);
    reject_unknown(j, path,
                   {"slot_minutes", "horizon_slots", "mu", "epsilon", "replan_period_slots", "replan_on_events",
                    "prune_implied_soc_rows", "shortfall_penalty", "deviation_threshold_kw", "push_retries",
                    "ideal_actuation", "node_budget", "time_budget_ms"});
    auto& lc = s.center.lac;
    lc.slot_minutes = optional(j, path, "slot_minutes", lc.slot_minutes);
    lc.horizon_slots = optional(j, path, "horizon_slots", lc.horizon_slots);
    lc.mu = optional(j, path, "mu", lc.mu);
    lc.epsilon = optional(j, path, "epsilon", lc.epsilon);
    lc.replan_period_slots = optional(j, path, "replan_period_slots", lc.replan_period_slots);
    lc.replan_on_events = optional(j, path, "replan_on_events", lc.replan_on_events);
    lc.prune_implied_soc_rows = optional(j, path, "prune_implied_soc_rows", lc.prune_implied_soc_rows);
    lc.shortfall_penalty = optional(j, path, "shortfall_penalty", lc.shortfall_penalty);
    s.center.deviation_threshold_kw = optional(j, path, "deviation_threshold_kw", s.center.deviation_threshold_kw);
    s.center.push_retries = optional(j, path, "push_retries", s.center.push_retries);
    s.ideal_actuation = optional(j, path, "ideal_actuation", s.ideal_actuation);
    s.center.limits.node_budget = optional<std::size_t>(j, path, "node_budget", s.center.limits.node_budget);
    const auto ms = optional<std::int64_t>(j, path, "time_budget_ms", s.center.limits.time_budget.count());
    s.center.limits.time_budget = std::chrono::milliseconds(ms);
    if (!(lc.slot_minutes > 0.0)) {
        throw ScenarioInvalid(child(path, "slot_minutes"), "must be positive");
    }
    if (lc.horizon_slots <= 0) {
        throw ScenarioInvalid(child(path, "horizon_slots"), "must be positive");
    }
    if (!(lc.mu >= 0.0)) {
        throw ScenarioInvalid(child(path, "mu"), "must be non-negative");
    }
    if (!(lc.epsilon >= 0.0)) {
        throw ScenarioInvalid(child(path, "epsilon"), "must be non-negative");
    }
    if (s.center.push_retries < 0) {
        throw ScenarioInvalid(child(path, "push_retries"), "must be non-negative");
    }
    s.center.send_power_setpoints = s.ideal_actuation;
}

inline std::size_t line_of(const std::string& text, std::size_t byte)
{
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        line += text[i] == '\n';
    }
    return line;
}

} // namespace detail

/// Validates and converts a scenario document.
inline Scenario parse_scenario(const json& doc)
{
    using namespace detail;
    require_object(doc, "");
    reject_unknown(doc, "",
                   {"name", "slots", "seed", "config", "tariff", "dso", "sockets", "vehicles", "channel", "events"});
    Scenario s;
    s.source = doc;
    s.name = optional<std::string>(doc, "", "name", "");
    s.slots = optional<Slot>(doc, "", "slots", 0);
    if (s.slots < 0) {
        throw ScenarioInvalid("/slots", "must be non-negative");
    }
    s.seed = optional<std::uint64_t>(doc, "", "seed", 1);
    if (doc.contains("config")) {
        parse_config(doc.at("config"), "/config", s);
    }
    const auto length = static_cast<std::size_t>(s.slots);
    s.tariff.prices = series(doc, "", "tariff", length, 0.0);
    json dso = doc.value("dso", json::object());
    require_object(dso, "/dso");
    reject_unknown(dso, "/dso", {"p_ref", "p_max", "lambda"});
    s.signal.p_ref = series(dso, "/dso", "p_ref", length, 0.0);
    s.signal.p_max = series(dso, "/dso", "p_max", length, 1e9);
    s.signal.lambda = series(dso, "/dso", "lambda", length, 1.0);

    std::set<std::string> sockets;
    if (doc.contains("sockets")) {
        const auto& arr = doc.at("sockets");
        if (!arr.is_array()) {
            throw ScenarioInvalid("/sockets", "expected an array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = child("/sockets", i);
            const auto& j = arr[i];
            require_object(j, p);
            reject_unknown(j, p, {"station", "socket", "phases", "max_current_a", "voltage_v"});
            center::SocketInfo info;
            info.ref = required<std::string>(j, p, "station") + "/" + required<std::string>(j, p, "socket");
            info.phases = optional(j, p, "phases", info.phases);
            info.max_current_a = optional(j, p, "max_current_a", info.max_current_a);
            info.voltage_v = optional(j, p, "voltage_v", info.voltage_v);
            if (info.phases != 1 && info.phases != 3) {
                throw ScenarioInvalid(child(p, "phases"), "must be 1 or 3");
            }
            if (info.max_current_a < plant::kMinCurrentA) {
                throw ScenarioInvalid(child(p, "max_current_a"), "below the 6 A pilot minimum");
            }
            if (!sockets.insert(info.ref).second) {
                throw ScenarioInvalid(p, "duplicate socket " + info.ref);
            }
            s.center.sockets.push_back(info);
        }
    }

    std::set<std::string> vehicles;
    if (doc.contains("vehicles")) {
        const auto& arr = doc.at("vehicles");
        if (!arr.is_array()) {
            throw ScenarioInvalid("/vehicles", "expected an array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = child("/vehicles", i);
            const auto& j = arr[i];
            require_object(j, p);
            reject_unknown(j, p,
                           {"id", "true_capacity_kwh", "xi_true", "taper_knee_pct", "max_accept_kw", "arrival_soc_pct"});
            VehicleTruth v;
            v.id = required<std::string>(j, p, "id");
            v.true_capacity_kwh = optional(j, p, "true_capacity_kwh", v.true_capacity_kwh);
            v.xi_true = optional(j, p, "xi_true", v.xi_true);
            v.taper_knee_pct = optional(j, p, "taper_knee_pct", v.taper_knee_pct);
            v.max_accept_kw = optional(j, p, "max_accept_kw", v.max_accept_kw);
            v.arrival_soc_pct = optional(j, p, "arrival_soc_pct", v.arrival_soc_pct);
            if (!(v.true_capacity_kwh > 0.0)) {
                throw ScenarioInvalid(child(p, "true_capacity_kwh"), "must be positive");
            }
            if (!(v.xi_true >= 0.0 && v.xi_true < 1.0)) {
                throw ScenarioInvalid(child(p, "xi_true"), "must be in [0, 1)");
            }
            if (v.arrival_soc_pct > 100.0) {
                throw ScenarioInvalid(child(p, "arrival_soc_pct"), "above 100 %");
            }
            if (!vehicles.insert(v.id).second) {
                throw ScenarioInvalid(p, "duplicate vehicle " + v.id);
            }
            s.vehicles.push_back(v);
        }
    }

    if (doc.contains("channel")) {
        const auto& j = doc.at("channel");
        require_object(j, "/channel");
        reject_unknown(j, "/channel", {"loss_probability", "voltage_jitter"});
        s.loss_probability = optional(j, "/channel", "loss_probability", 0.0);
        s.voltage_jitter = optional(j, "/channel", "voltage_jitter", 0.0);
        if (!(s.loss_probability >= 0.0 && s.loss_probability < 1.0)) {
            throw ScenarioInvalid("/channel/loss_probability", "must be in [0, 1)");
        }
        if (!(s.voltage_jitter >= 0.0 && s.voltage_jitter < 0.5)) {
            throw ScenarioInvalid("/channel/voltage_jitter", "must be in [0, 0.5)");
        }
    }

    std::set<std::string> rfids;
    if (doc.contains("events")) {
        const auto& arr = doc.at("events");
        if (!arr.is_array()) {
            throw ScenarioInvalid("/events", "expected an array");
        }
        Slot previous = 0;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto p = child("/events", i);
            const auto& j = arr[i];
            require_object(j, p);
            ScenarioEvent ev;
            ev.slot = required<Slot>(j, p, "slot");
            if (ev.slot < previous) {
                throw ScenarioInvalid(child(p, "slot"), "events must be time-ordered");
            }
            if (ev.slot < 0 || ev.slot > s.slots) {
                throw ScenarioInvalid(child(p, "slot"), "outside the simulated slots");
            }
            previous = ev.slot;
            const auto type = required<std::string>(j, p, "type");
            if (type == "reserve") {
                reject_unknown(j, p,
                               {"slot", "type", "user", "rfid", "socket", "start", "departure", "target_soc_pct",
                                "vehicle", "pev"});
                ev.type = EventType::Reserve;
                auto& r = ev.reservation;
                r.rfid = required<std::string>(j, p, "rfid");
                r.user_id = optional<std::string>(j, p, "user", r.rfid);
                r.station_socket = required<std::string>(j, p, "socket");
                r.requested_start = required<Slot>(j, p, "start");
                r.departure = required<Slot>(j, p, "departure");
                r.desired_final_soc_pct = required<double>(j, p, "target_soc_pct");
                if (!j.contains("pev")) {
                    throw ScenarioInvalid(child(p, "pev"), "missing required field");
                }
                r.pev = parse_pev(j.at("pev"), child(p, "pev"));
                ev.vehicle = optional<std::string>(j, p, "vehicle", "");
                if (sockets.count(r.station_socket) == 0) {
                    throw ScenarioInvalid(child(p, "socket"), "unknown socket " + r.station_socket);
                }
                if (!ev.vehicle.empty() && vehicles.count(ev.vehicle) == 0) {
                    throw ScenarioInvalid(child(p, "vehicle"), "unknown vehicle " + ev.vehicle);
                }
                if (r.departure > s.slots) {
                    throw ScenarioInvalid(child(p, "departure"), "after the last simulated slot");
                }
                rfids.insert(r.rfid);
            } else if (type == "swipe" || type == "unplug") {
                reject_unknown(j, p, {"slot", "type", "rfid", "socket"});
                ev.type = type == "swipe" ? EventType::Swipe : EventType::Unplug;
                ev.rfid = required<std::string>(j, p, "rfid");
                if (rfids.count(ev.rfid) == 0) {
                    throw ScenarioInvalid(child(p, "rfid"), "no earlier reservation uses " + ev.rfid);
                }
                ev.socket = optional<std::string>(j, p, "socket", "");
                if (ev.type == EventType::Swipe && sockets.count(ev.socket) == 0) {
                    throw ScenarioInvalid(child(p, "socket"), "unknown socket " + ev.socket);
                }
            } else if (type == "dso") {
                reject_unknown(j, p, {"slot", "type", "p_ref", "p_max", "lambda"});
                ev.type = EventType::Dso;
                if (j.contains("p_ref")) {
                    ev.p_ref = series(j, p, "p_ref", length, 0.0);
                }
                if (j.contains("p_max")) {
                    ev.p_max = series(j, p, "p_max", length, 0.0);
                }
                if (j.contains("lambda")) {
                    ev.lambda = series(j, p, "lambda", length, 0.0);
                }
            } else if (type == "tariff") {
                reject_unknown(j, p, {"slot", "type", "prices"});
                ev.type = EventType::Tariff;
                if (!j.contains("prices")) {
                    throw ScenarioInvalid(child(p, "prices"), "missing required field");
                }
                ev.tariff.prices = series(j, p, "prices", length, 0.0);
            } else {
                throw ScenarioInvalid(child(p, "type"), "unknown event type " + type);
            }
            s.events.push_back(std::move(ev));
        }
    }
    return s;
}

/// Parses scenario text; syntax errors carry the line number.
inline Scenario parse_scenario_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioInvalid("line " + std::to_string(detail::line_of(text, e.byte)), e.what());
    }
    return parse_scenario(doc);
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ScenarioInvalid(path, "cannot open file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

} // namespace evmpc::harness
