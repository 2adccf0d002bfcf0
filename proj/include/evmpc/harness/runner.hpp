#pragma once

// Slot-stepped simulation of a scenario: stations and vehicles on one side,
// the control center on the other, a lossy report channel in between.
//
// Each slot s runs, in order: reports for slot s-1 travel to the center,
// scenario events at s, the center tick at s, then the stations execute s.

#include "evmpc/harness/scenario.hpp"
#include "evmpc/harness/stats.hpp"
#include "evmpc/lac/capacity.hpp"

#include <fmt/format.h>

#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace evmpc::harness {

inline constexpr int kCsvVersion = 1;
inline constexpr const char* kSeriesHeader = "slot,commanded_kw,applied_kw,p_ref_kw,p_max_kw,active_sessions";
inline constexpr const char* kSessionHeader =
    "slot,session,socket,commanded_kw,commanded_amps,applied_kw,meter_kwh,soc_predicted_kwh,soc_true_kwh,"
    "soc_true_pct,report_delivered";
inline constexpr const char* kResolveHeader =
    "slot,trigger,status,objective,previous_tail_objective,previous_tail_violation,relaxed,still_infeasible,"
    "node_limited,sessions";

struct SlotRow {
    Slot slot = 0;
    double commanded_kw = 0.0;
    double applied_kw = 0.0;
    double p_ref_kw = 0.0;
    double p_max_kw = 0.0;
    int active_sessions = 0;
};

struct SessionRow {
    Slot slot = 0;
    std::string session;
    std::string socket;
    double commanded_kw = 0.0;
    int commanded_amps = 0;
    double applied_kw = 0.0;
    double meter_kwh = 0.0;
    double soc_predicted_kwh = 0.0;
    double soc_true_kwh = 0.0;
    double soc_true_pct = 0.0;
    // Set once the slot's report is known; a lost report leaves it false.
    bool report_delivered = false;
};

struct SessionSummary {
    std::string session_id;
    std::string rfid;
    std::string socket;
    Slot start = 0;
    Slot end = 0;
    center::TerminationCause cause = center::TerminationCause::Unplug;
    double target_soc_pct = 0.0;
    double energy_kwh = 0.0;
    double cost = 0.0;
    double controller_final_soc_pct = 0.0;
    double true_arrival_soc_pct = 0.0;
    double true_final_soc_pct = 0.0;
    std::optional<double> capacity_estimate_kwh;
    int lost_reports = 0;
};

struct InvariantResult {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct RunOutput {
    std::string name;
    std::uint64_t seed = 0;
    Slot slots = 0;
    std::vector<SlotRow> series;
    std::vector<SessionRow> session_series;
    std::vector<SessionSummary> sessions;
    TrackingStats tracking;
    std::vector<lac::ResolveReport> resolves;
    std::vector<center::EventLogRecord> log;
    json final_snapshot;
    std::vector<json> wire;
    std::vector<std::string> rejections;
    std::vector<InvariantResult> invariants;
    json scenario;

    bool ok() const
    {
        return std::all_of(invariants.begin(), invariants.end(), [](const auto& i) { return i.ok; });
    }
    const SessionSummary* find_session(const std::string& id) const
    {
        for (const auto& s : sessions) {
            if (s.session_id == id) {
                return &s;
            }
        }
        return nullptr;
    }
};

inline void to_json(json& j, const InvariantResult& r)
{
    j = json{{"name", r.name}, {"ok", r.ok}, {"detail", r.detail}};
}

namespace detail {

inline std::string fixed(double v) { return fmt::format("{:.6f}", v); }

struct Plugged {
    std::string session;
    std::string rfid;
    plant::BatteryState battery;
    Slot start = 0;
    double arrival_soc_pct = 0.0;
    double target_soc_pct = 0.0;
    double declared_xi = 0.0;
    std::vector<double> slot_energy;
    bool ran_last = false;
    double last_applied_kw = 0.0;
    double last_voltage_v = 0.0;
    std::size_t last_row = 0;
    int lost = 0;
};

struct Station {
    plant::StationSocket socket;
    std::optional<Plugged> ev;
};

class Simulation {
public:
    explicit Simulation(const Scenario& sc) : sc_(sc), center_(sc.center, sc.tariff, sc.signal)
    {
        for (const auto& info : sc.center.sockets) {
            Station st;
            const auto cut = info.ref.find('/');
            st.socket.station_id = info.ref.substr(0, cut);
            st.socket.socket_id = cut == std::string::npos ? "" : info.ref.substr(cut + 1);
            st.socket.phases = info.phases;
            st.socket.max_current_a = info.max_current_a;
            st.socket.voltage_v = info.voltage_v;
            stations_[info.ref] = st;
        }
        center_.set_transport([this](const json& m) {
            out_.wire.push_back(json{{"slot", now_}, {"dir", "down"}, {"msg", m}});
            inbox_.push_back(m);
            return true;
        });
    }

    RunOutput run()
    {
        out_.name = sc_.name;
        out_.seed = sc_.seed;
        out_.slots = sc_.slots;
        out_.scenario = sc_.source;
        std::size_t next = 0;
        for (Slot s = 0; s <= sc_.slots; ++s) {
            now_ = s;
            deliver_reports(s);
            while (next < sc_.events.size() && sc_.events[next].slot == s) {
                apply_event(sc_.events[next++]);
            }
            center_.tick(s);
            after_call();
            if (s < sc_.slots) {
                execute(s);
            }
        }
        for (auto& [ref, st] : stations_) {
            if (st.ev) {
                end_session(st, center::TerminationCause::Unplug);
            }
        }
        finish();
        return std::move(out_);
    }

private:
    void after_call()
    {
        while (!inbox_.empty()) {
            const json m = inbox_.front();
            inbox_.pop_front();
            const auto type = m.at("type").get<std::string>();
            const auto socket = m.at("station_socket").get<std::string>();
            auto& st = stations_.at(socket);
            const auto session = m.at("session").get<std::string>();
            if (!st.ev || st.ev->session != session) {
                continue;  // stale message for a vehicle that has left
            }
            if (type == "schedule") {
                const auto msg = m.get<center::ScheduleMsg>();
                st.socket.replace_schedule(msg.from_slot, msg.amps, msg.power_kw);
            } else if (type == "stop") {
                end_session(st, center::TerminationCause::DepartureReached);
            }
        }
        check_overload();
    }

    // Every fresh plan must respect the threshold from its solve slot on.
    void check_overload()
    {
        const auto& reps = center_.resolve_reports();
        if (reps.size() == checked_resolves_) {
            return;
        }
        checked_resolves_ = reps.size();
        const auto& rep = reps.back();
        if (rep.still_infeasible) {
            return;
        }
        const auto& sig = center_.lac().signal();
        for (Slot k = rep.slot; k < sc_.slots && static_cast<std::size_t>(k) < sig.p_max.size(); ++k) {
            const double load = center_.lac().planned_load(k);
            const double cap = sig.p_max[static_cast<std::size_t>(k)];
            if (load > cap + 1e-6 && overload_detail_.empty()) {
                overload_detail_ = fmt::format("plan from slot {} loads slot {} with {:.6f} kW over {:.6f} kW",
                                               rep.slot, k, load, cap);
            }
        }
    }

    static std::string rejection_name(center::Rejection r) { return json(r).get<std::string>(); }

    void reject(const std::string& what, const center::Outcome& o)
    {
        if (!o.ok()) {
            out_.rejections.push_back(fmt::format("slot {}: {}: {}", now_, what, rejection_name(*o.error)));
        }
    }

    void apply_event(const ScenarioEvent& ev)
    {
        switch (ev.type) {
        case EventType::Reserve: {
            reservations_[ev.reservation.rfid] = &ev;
            const auto o = center_.reserve(ev.reservation, now_);
            reject("reserve " + ev.reservation.rfid, o);
            after_call();
            break;
        }
        case EventType::Swipe: swipe(ev); break;
        case EventType::Unplug:
            for (auto& [ref, st] : stations_) {
                if (st.ev && st.ev->rfid == ev.rfid) {
                    end_session(st, center::TerminationCause::Unplug);
                }
            }
            break;
        case EventType::Dso: {
            auto sig = center_.lac().signal();
            const auto overwrite = [&](std::vector<double>& dst, const std::optional<std::vector<double>>& src) {
                if (!src) {
                    return;
                }
                dst.resize(std::max(dst.size(), src->size()), 0.0);
                for (std::size_t i = static_cast<std::size_t>(ev.slot); i < src->size(); ++i) {
                    dst[i] = (*src)[i];
                }
            };
            overwrite(sig.p_ref, ev.p_ref);
            overwrite(sig.p_max, ev.p_max);
            overwrite(sig.lambda, ev.lambda);
            sig.effective_from = ev.slot;
            center_.apply_dso_signal(sig, now_);
            after_call();
            break;
        }
        case EventType::Tariff: {
            auto t = center_.lac().tariff();
            t.prices.resize(std::max(t.prices.size(), ev.tariff.prices.size()), 0.0);
            for (std::size_t i = static_cast<std::size_t>(ev.slot); i < ev.tariff.prices.size(); ++i) {
                t.prices[i] = ev.tariff.prices[i];
            }
            center_.apply_tariff(t, now_);
            after_call();
            break;
        }
        }
    }

    void swipe(const ScenarioEvent& ev)
    {
        auto& st = stations_.at(ev.socket);
        if (st.ev && st.ev->rfid == ev.rfid) {
            end_session(st, center::TerminationCause::RfidSwipe);
            return;
        }
        const center::AuthMsg msg{ev.rfid, ev.socket, now_};
        out_.wire.push_back(json{{"slot", now_}, {"dir", "up"}, {"msg", msg}});
        if (st.ev) {
            // Another vehicle holds the socket; the center will refuse.
            reject("swipe " + ev.rfid, center_.authenticate(msg));
            after_call();
            return;
        }
        st.socket.clear_schedule();
        const auto o = center_.authenticate(msg);
        reject("swipe " + ev.rfid, o);
        if (o.ok()) {
            plug(st, o.id, *reservations_.at(ev.rfid));
        }
        after_call();
    }

    void plug(Station& st, const std::string& session, const ScenarioEvent& res)
    {
        const auto& r = res.reservation;
        Plugged p;
        p.session = session;
        p.rfid = r.rfid;
        p.start = now_;
        p.target_soc_pct = r.desired_final_soc_pct;
        p.declared_xi = r.pev.xi;
        VehicleTruth truth;
        truth.true_capacity_kwh = r.pev.capacity_kwh;
        truth.xi_true = r.pev.xi;
        for (const auto& v : sc_.vehicles) {
            if (v.id == res.vehicle) {
                truth = v;
            }
        }
        p.arrival_soc_pct = truth.arrival_soc_pct >= 0.0 ? truth.arrival_soc_pct : r.pev.arrival_soc_pct;
        p.battery.true_capacity_kwh = truth.true_capacity_kwh;
        p.battery.xi_true = truth.xi_true;
        p.battery.taper_knee_pct = truth.taper_knee_pct;
        p.battery.max_accept_kw = truth.max_accept_kw;
        p.battery.soc_kwh = p.arrival_soc_pct / 100.0 * truth.true_capacity_kwh;
        // The socket meter register restarts with each session.
        st.socket.meter_energy_kwh = 0.0;
        st.ev = std::move(p);
    }

    void end_session(Station& st, center::TerminationCause cause)
    {
        auto p = std::move(*st.ev);
        st.ev.reset();
        st.socket.clear_schedule();
        const center::TerminateMsg msg{p.session, now_, cause, st.socket.meter_energy_kwh, p.slot_energy};
        out_.wire.push_back(json{{"slot", now_}, {"dir", "up"}, {"msg", msg}});
        center_.terminate(msg);
        SessionSummary sum;
        sum.session_id = p.session;
        sum.rfid = p.rfid;
        sum.socket = st.socket.ref();
        sum.start = p.start;
        sum.end = now_;
        sum.cause = cause;
        sum.target_soc_pct = p.target_soc_pct;
        sum.energy_kwh = st.socket.meter_energy_kwh;
        sum.true_arrival_soc_pct = p.arrival_soc_pct;
        sum.true_final_soc_pct = p.battery.soc_pct();
        sum.lost_reports = p.lost;
        if (const auto* rec = center_.session(p.session); rec && rec->final_report) {
            sum.cost = rec->final_report->total_cost;
            sum.controller_final_soc_pct = rec->final_report->final_soc_pct;
        }
        try {
            sum.capacity_estimate_kwh =
                lac::estimate_capacity(sum.energy_kwh, sum.true_arrival_soc_pct, sum.true_final_soc_pct, p.declared_xi);
        } catch (const lac::DegenerateReading&) {
        }
        // Cost as the center must have computed it, from this side's meter.
        double cost = 0.0;
        const auto& prices = center_.lac().tariff().prices;
        for (std::size_t i = 0; i < p.slot_energy.size(); ++i) {
            const auto k = static_cast<std::size_t>(p.start) + i;
            cost += p.slot_energy[i] * (k < prices.size() ? prices[k] : 0.0);
        }
        if (std::abs(cost - sum.cost) > 1e-9 && cost_detail_.empty()) {
            cost_detail_ = fmt::format("{}: center cost {:.12f}, metered {:.12f}", p.session, sum.cost, cost);
        }
        out_.sessions.push_back(sum);
        after_call();
    }

    void deliver_reports(Slot s)
    {
        for (auto& [ref, st] : stations_) {
            if (!st.ev || !st.ev->ran_last) {
                continue;
            }
            auto& p = *st.ev;
            p.ran_last = false;
            const auto report = plant::emit_report(st.socket, p.session, s - 1, p.last_applied_kw, p.last_voltage_v);
            const center::ReportMsg msg{report.session_id,     report.slot,      report.active_power_kw,
                                        report.cumulative_energy_kwh, report.voltage_v, report.current_a};
            const auto delivered = plant::channel_deliver(report, sc_.loss_probability, sc_.seed);
            out_.wire.push_back(json{{"slot", s}, {"dir", "up"}, {"msg", msg}, {"delivered", delivered.has_value()}});
            if (delivered) {
                out_.session_series[p.last_row].report_delivered = true;
                center_.ingest_report(msg);
            } else {
                ++p.lost;
                center_.report_missing(p.session, s - 1);
            }
            after_call();
        }
    }

    void execute(Slot s)
    {
        SlotRow row;
        row.slot = s;
        const auto& sig = center_.lac().signal();
        const auto at = [](const std::vector<double>& v, Slot k) {
            return static_cast<std::size_t>(k) < v.size() ? v[static_cast<std::size_t>(k)] : 0.0;
        };
        row.p_ref_kw = at(sig.p_ref, s);
        row.p_max_kw = at(sig.p_max, s);
        const double dt = sc_.center.lac.slot_hours();
        for (auto& [ref, st] : stations_) {
            if (!st.ev) {
                continue;
            }
            auto& p = *st.ev;
            const auto& sock = st.socket;
            const int amps = sock.commanded_amps(s);
            const double volts = plant::jittered_voltage(sock.voltage_v, sc_.voltage_jitter, sc_.seed, ref, s);
            double offered = amps * sock.phases * volts / 1000.0;
            if (sc_.ideal_actuation) {
                offered = sock.commanded_power(s).value_or(0.0);
            }
            const auto step = plant::step_battery_power(p.battery, offered, dt);
            p.battery = step.state;
            const double e = step.applied_power_kw * dt;
            st.socket.meter_energy_kwh += e;
            p.slot_energy.push_back(e);
            p.ran_last = true;
            p.last_applied_kw = step.applied_power_kw;
            p.last_voltage_v = volts;

            SessionRow r;
            r.slot = s;
            r.session = p.session;
            r.socket = ref;
            const auto* tracked = center_.lac().find(p.session);
            r.commanded_kw = tracked ? tracked->plan.power_at(s) : 0.0;
            r.commanded_amps = amps;
            r.applied_kw = step.applied_power_kw;
            r.meter_kwh = st.socket.meter_energy_kwh;
            r.soc_predicted_kwh = tracked ? center_.lac().soc_estimate(p.session, s + 1) : 0.0;
            r.soc_true_kwh = p.battery.soc_kwh;
            r.soc_true_pct = p.battery.soc_pct();
            p.last_row = out_.session_series.size();
            out_.session_series.push_back(r);

            row.commanded_kw += r.commanded_kw;
            row.applied_kw += r.applied_kw;
            ++row.active_sessions;
        }
        out_.series.push_back(row);
    }

    void finish()
    {
        out_.resolves = center_.resolve_reports();
        out_.log = center_.log();
        out_.final_snapshot = center_.snapshot();

        std::vector<double> cmd, app;
        for (const auto& r : out_.session_series) {
            cmd.push_back(r.commanded_kw);
            app.push_back(r.applied_kw);
        }
        out_.tracking = compute_tracking_stats(cmd, app);

        auto& inv = out_.invariants;
        inv.push_back({"series_length", out_.series.size() == static_cast<std::size_t>(sc_.slots),
                       fmt::format("{} rows for {} slots", out_.series.size(), sc_.slots)});

        std::string energy_detail;
        for (const auto& s : out_.sessions) {
            double last = 0.0;
            for (const auto& r : out_.session_series) {
                if (r.session == s.session_id) {
                    last = r.meter_kwh;
                }
            }
            if (last != s.energy_kwh && energy_detail.empty()) {
                energy_detail = fmt::format("{}: summary {:.9f} kWh, meter {:.9f} kWh", s.session_id, s.energy_kwh, last);
            }
        }
        inv.push_back({"summary_energy", energy_detail.empty(), energy_detail});
        inv.push_back({"cost_accrued", cost_detail_.empty(), cost_detail_});

        std::set<std::pair<Slot, std::string>> seen;
        std::string socket_detail;
        for (const auto& r : out_.session_series) {
            if (!seen.insert({r.slot, r.socket}).second && socket_detail.empty()) {
                socket_detail = fmt::format("slot {}: two sessions on {}", r.slot, r.socket);
            }
        }
        inv.push_back({"one_active_per_socket", socket_detail.empty(), socket_detail});
        inv.push_back({"overload", overload_detail_.empty(), overload_detail_});

        const auto replayed = center::ControlCenter::replay(sc_.center, sc_.tariff, sc_.signal, out_.log);
        const bool same = replayed.snapshot() == out_.final_snapshot;
        inv.push_back({"replay", same, same ? "" : "replayed center state differs"});
    }

    const Scenario& sc_;
    center::ControlCenter center_;
    std::map<std::string, Station> stations_;
    std::map<std::string, const ScenarioEvent*> reservations_;
    std::deque<json> inbox_;
    RunOutput out_;
    Slot now_ = 0;
    std::size_t checked_resolves_ = 0;
    std::string overload_detail_;
    std::string cost_detail_;
};

} // namespace detail

inline RunOutput run_scenario(const Scenario& scenario) { return detail::Simulation(scenario).run(); }

inline std::string series_csv(const RunOutput& out)
{
    std::string s = std::string(kSeriesHeader) + "\n";
    for (const auto& r : out.series) {
        s += fmt::format("{},{},{},{},{},{}\n", r.slot, detail::fixed(r.commanded_kw), detail::fixed(r.applied_kw),
                         detail::fixed(r.p_ref_kw), detail::fixed(r.p_max_kw), r.active_sessions);
    }
    return s;
}

inline std::string sessions_csv(const RunOutput& out)
{
    std::string s = std::string(kSessionHeader) + "\n";
    for (const auto& r : out.session_series) {
        s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.slot, r.session, r.socket,
                         detail::fixed(r.commanded_kw), r.commanded_amps, detail::fixed(r.applied_kw),
                         detail::fixed(r.meter_kwh), detail::fixed(r.soc_predicted_kwh), detail::fixed(r.soc_true_kwh),
                         detail::fixed(r.soc_true_pct), r.report_delivered ? 1 : 0);
    }
    return s;
}

inline std::string resolves_csv(const RunOutput& out)
{
    std::string s = std::string(kResolveHeader) + "\n";
    for (const auto& r : out.resolves) {
        std::string ids;
        for (const auto& id : r.session_ids) {
            ids += (ids.empty() ? "" : " ") + id;
        }
        s += fmt::format("{},{},{},{:.9g},{},{:.3g},{},{},{},{}\n", r.slot, lac::to_string(r.trigger),
                         milp::to_string(r.status), r.objective,
                         r.previous_tail_objective ? fmt::format("{:.9g}", *r.previous_tail_objective) : "",
                         r.previous_tail_violation, r.relaxed ? 1 : 0, r.still_infeasible ? 1 : 0,
                         r.node_limited ? 1 : 0, ids);
    }
    return s;
}

inline json summary_json(const RunOutput& out)
{
    json sessions = json::array();
    for (const auto& s : out.sessions) {
        sessions.push_back(json{{"session", s.session_id},
                                {"rfid", s.rfid},
                                {"socket", s.socket},
                                {"start", s.start},
                                {"end", s.end},
                                {"cause", s.cause},
                                {"target_soc_pct", s.target_soc_pct},
                                {"energy_kwh", s.energy_kwh},
                                {"cost", s.cost},
                                {"controller_final_soc_pct", s.controller_final_soc_pct},
                                {"true_arrival_soc_pct", s.true_arrival_soc_pct},
                                {"true_final_soc_pct", s.true_final_soc_pct},
                                {"capacity_estimate_kwh",
                                 s.capacity_estimate_kwh ? json(*s.capacity_estimate_kwh) : json()},
                                {"lost_reports", s.lost_reports}});
    }
    std::size_t relaxed = 0, infeasible = 0, limited = 0;
    for (const auto& r : out.resolves) {
        relaxed += r.relaxed;
        infeasible += r.still_infeasible;
        limited += r.node_limited;
    }
    return json{{"name", out.name},
                {"seed", out.seed},
                {"csv_version", kCsvVersion},
                {"slots", out.slots},
                {"sessions", sessions},
                {"tracking",
                 {{"samples", out.tracking.samples},
                  {"mean_abs_dev_kw", out.tracking.mean_abs_dev},
                  {"max_dev_kw", out.tracking.max_dev},
                  {"mse_kw2", out.tracking.mse}}},
                {"resolves",
                 {{"count", out.resolves.size()},
                  {"relaxed", relaxed},
                  {"still_infeasible", infeasible},
                  {"node_limited", limited}}},
                {"rejections", out.rejections},
                {"invariants", out.invariants},
                {"ok", out.ok()}};
}

/// Writes series.csv, sessions.csv, resolves.csv, summary.json,
/// events.jsonl (center log), wire.jsonl and scenario.json into `dir`.
inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const auto put = [&](const char* name, const std::string& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) {
            throw std::runtime_error("cannot write " + (dir / name).string());
        }
        f << text;
    };
    put("series.csv", series_csv(out));
    put("sessions.csv", sessions_csv(out));
    put("resolves.csv", resolves_csv(out));
    put("summary.json", summary_json(out).dump(2) + "\n");
    std::string events, wire;
    for (const auto& r : out.log) {
        events += json(r).dump() + "\n";
    }
    for (const auto& w : out.wire) {
        wire += w.dump() + "\n";
    }
    put("events.jsonl", events);
    put("wire.jsonl", wire);
    put("scenario.json", out.scenario.dump(2) + "\n");
}

} // namespace evmpc::harness
