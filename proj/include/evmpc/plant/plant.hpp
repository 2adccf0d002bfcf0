#pragma once

// Charging station, battery and report channel models.

#include "evmpc/lac/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::plant {

using lac::Slot;

inline constexpr int kMinCurrentA = 6;
inline constexpr int kMaxPilotCurrentA = 80;

struct OutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Integer current for a power set point, rounded down so the station never
/// draws more than commanded. Below the 6 A minimum the result is 0.
inline int quantize_setpoint(double power_kw, int phases, double voltage_v)
{
    if (!(power_kw > 0.0)) {
        return 0;
    }
    // The epsilon absorbs representation error in set points that are exact
    // multiples of one amp step (e.g. 6 A expressed through alpha).
    const double amps = power_kw * 1000.0 / (phases * voltage_v);
    const int a = static_cast<int>(std::floor(amps + 1e-9));
    return a < kMinCurrentA ? 0 : a;
}

struct Pilot {
    bool charging = false;  // false: state signalling "no charge allowed"
    double duty_percent = 100.0;
};

/// IEC 61851 control-pilot duty cycle for a current limit.
inline Pilot amps_to_duty(int amps)
{
    if (amps == 0) {
        return {false, 100.0};
    }
    if (amps < kMinCurrentA || amps > kMaxPilotCurrentA) {
        throw OutOfRange("pilot current " + std::to_string(amps) + " A not signalable");
    }
    if (amps <= 51) {
        return {true, amps / 0.6};
    }
    return {true, amps / 2.5 + 64.0};
}

struct BatteryState {
    double true_capacity_kwh = 22.0;
    double soc_kwh = 0.0;
    double xi_true = 0.0;
    double taper_knee_pct = 85.0;
    // Charger acceptance ceiling below the knee; derates linearly to 0 at 100 %.
    double max_accept_kw = 22.08;

    double soc_pct() const { return soc_kwh / true_capacity_kwh * 100.0; }
    double accept_limit_kw() const
    {
        const double pct = soc_pct();
        if (pct <= taper_knee_pct) {
            return max_accept_kw;
        }
        return std::max(0.0, max_accept_kw * (100.0 - pct) / (100.0 - taper_knee_pct));
    }
};

struct StepResult {
    BatteryState state;
    double applied_power_kw = 0.0;
};

/// Advances the battery by one slot with `offered_kw` available at the
/// socket. The returned power is what the meter sees; the battery stores it
/// minus losses.
inline StepResult step_battery_power(BatteryState b, double offered_kw, double dt_hours)
{
    if (!(dt_hours > 0.0)) {
        throw std::invalid_argument("slot length must be positive");
    }
    double power = std::max(0.0, std::min(offered_kw, b.accept_limit_kw()));
    const double room = b.true_capacity_kwh - b.soc_kwh;
    const double gain = power * dt_hours * (1.0 - b.xi_true);
    if (gain >= room) {
        power = room > 0.0 ? room / (dt_hours * (1.0 - b.xi_true)) : 0.0;
        b.soc_kwh = b.true_capacity_kwh;
    } else {
        b.soc_kwh += gain;
    }
    return {b, power};
}

inline StepResult step_battery(BatteryState b, int commanded_amps, int phases, double voltage_v, double dt_hours)
{
    return step_battery_power(b, commanded_amps * phases * voltage_v * 1e-3, dt_hours);
}

struct MeterReport {
    std::string session_id;
    Slot slot = 0;
    double active_power_kw = 0.0;
    double cumulative_energy_kwh = 0.0;
    double voltage_v = 230.0;
    int current_a = 0;
};

struct StationSocket {
    std::string station_id;
    std::string socket_id;
    int max_current_a = 32;
    int phases = 1;
    double voltage_v = 230.0;
    double meter_energy_kwh = 0.0;
    // Current limit per slot, starting at `setpoint_start`.
    Slot setpoint_start = 0;
    std::vector<int> current_setpoint;
    // Exact set points for ideal-actuation runs, aligned with current_setpoint.
    std::vector<double> power_setpoint_kw;

    std::string ref() const { return station_id + "/" + socket_id; }

    int commanded_amps(Slot k) const
    {
        const auto i = static_cast<std::ptrdiff_t>(k - setpoint_start);
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(current_setpoint.size())) {
            return 0;
        }
        return std::min(current_setpoint[static_cast<std::size_t>(i)], max_current_a);
    }

    std::optional<double> commanded_power(Slot k) const
    {
        const auto i = static_cast<std::ptrdiff_t>(k - setpoint_start);
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(power_setpoint_kw.size())) {
            return std::nullopt;
        }
        return power_setpoint_kw[static_cast<std::size_t>(i)];
    }

    /// Replaces the commands from `from` on; earlier slots keep theirs.
    void replace_schedule(Slot from, const std::vector<int>& amps, const std::vector<double>& power_kw = {})
    {
        if (current_setpoint.empty()) {
            setpoint_start = from;
        }
        const Slot first = std::min(from, setpoint_start);
        if (first < setpoint_start) {
            current_setpoint.insert(current_setpoint.begin(), static_cast<std::size_t>(setpoint_start - first), 0);
            if (!power_setpoint_kw.empty()) {
                power_setpoint_kw.insert(power_setpoint_kw.begin(), static_cast<std::size_t>(setpoint_start - first),
                                         0.0);
            }
            setpoint_start = first;
        }
        const auto keep = static_cast<std::size_t>(from - setpoint_start);
        current_setpoint.resize(keep, 0);
        current_setpoint.insert(current_setpoint.end(), amps.begin(), amps.end());
        if (!power_kw.empty()) {
            power_setpoint_kw.resize(keep, 0.0);
            power_setpoint_kw.insert(power_setpoint_kw.end(), power_kw.begin(), power_kw.end());
        }
    }

    void clear_schedule()
    {
        current_setpoint.clear();
        power_setpoint_kw.clear();
    }
};

/// Builds the status report for the slot that just elapsed.
inline MeterReport emit_report(const StationSocket& socket, const std::string& session_id, Slot slot,
                               double applied_power_kw, double voltage_v)
{
    MeterReport r;
    r.session_id = session_id;
    r.slot = slot;
    r.active_power_kw = applied_power_kw;
    r.cumulative_energy_kwh = socket.meter_energy_kwh;
    r.voltage_v = voltage_v;
    r.current_a = static_cast<int>(std::lround(applied_power_kw * 1000.0 / (socket.phases * voltage_v)));
    return r;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

// Uniform [0, 1) from a 64-bit word.
inline double unit_interval(std::uint64_t x)
{
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Seeded drop decision for one report. The draw depends only on the seed,
/// session and slot, so it does not shift when other reports change.
inline std::optional<MeterReport> channel_deliver(const MeterReport& report, double loss_probability,
                                                  std::uint64_t rng_seed)
{
    if (!(loss_probability >= 0.0 && loss_probability < 1.0)) {
        throw std::invalid_argument("loss probability must be in [0, 1)");
    }
    if (loss_probability == 0.0) {
        return report;
    }
    const std::uint64_t key = detail::splitmix64(
        rng_seed ^ detail::splitmix64(detail::fnv1a(report.session_id) ^ static_cast<std::uint64_t>(report.slot)));
    if (detail::unit_interval(key) < loss_probability) {
        return std::nullopt;
    }
    return report;
}

/// Seeded supply-voltage jitter, uniform in +-fraction around nominal.
inline double jittered_voltage(double nominal_v, double fraction, std::uint64_t seed, const std::string& socket,
                               Slot slot)
{
    if (fraction <= 0.0) {
        return nominal_v;
    }
    const std::uint64_t key =
        detail::splitmix64(seed ^ 0x5bd1e995ULL ^ detail::splitmix64(detail::fnv1a(socket) + static_cast<std::uint64_t>(slot)));
    return nominal_v * (1.0 + fraction * (2.0 * detail::unit_interval(key) - 1.0));
}

} // namespace evmpc::plant
