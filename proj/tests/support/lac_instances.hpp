#pragma once

// Random charging instances that are feasible by construction: a random
// witness schedule is drawn first and every bound is set so it fits.

#include "evmpc/lac/types.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace evmpc::testing {

struct LacInstance {
    std::vector<lac::ChargingSession> sessions;
    lac::Tariff tariff;
    lac::DsoSignal signal;
    lac::ControllerConfig config;
    lac::Slot now = 0;
    std::vector<std::vector<double>> witness_u;  // per session, slots [now, departure)
};

inline LacInstance random_instance(std::mt19937_64& rng, int max_sessions, int max_slots)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    LacInstance in;
    in.config.mu = unit(rng) < 0.2 ? 0.0 : std::pow(10.0, -2.0 + 3.0 * unit(rng));
    in.config.epsilon = 0.1 * unit(rng);
    in.now = pick(0, 3);
    const int slots = pick(2, max_slots);
    const int end = in.now + slots;
    in.config.horizon_slots = slots;
    const auto n = static_cast<std::size_t>(end);
    in.tariff.prices.resize(n);
    in.signal.p_ref.resize(n);
    in.signal.p_max.resize(n);
    in.signal.lambda.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        in.tariff.prices[k] = 0.05 + 0.4 * unit(rng);
        in.signal.lambda[k] = unit(rng) < 0.1 ? 0.0 : 0.5 + unit(rng);
    }
    const double hours = in.config.slot_hours();
    std::vector<double> load(n, 0.0);
    const int count = pick(1, max_sessions);
    for (int m = 0; m < count; ++m) {
        lac::ChargingSession s;
        s.id = "s" + std::to_string(m);
        s.phases = unit(rng) < 0.7 ? 1 : 3;
        s.delta_p_kw = s.phases == 1 ? 3.68 : 11.04;
        if (unit(rng) < 0.3) {
            s.delta_p_kw *= 0.5 + unit(rng);
        }
        s.alpha = std::min(0.9, lac::min_normalized_power(s.phases, s.delta_p_kw));
        s.xi = 0.15 * unit(rng);
        s.capacity_assumed_kwh = 15.0 + 10.0 * unit(rng);
        s.x_min_kwh = 0.05 * s.capacity_assumed_kwh * unit(rng);
        s.x0_kwh = s.x_min_kwh + 0.3 * s.capacity_assumed_kwh * unit(rng);
        s.departure = in.now + pick(1, slots);
        s.status = lac::SessionStatus::Active;
        std::vector<double> u;
        const double on_rate = unit(rng);
        double gain = 0.0, cost = 0.0;
        for (lac::Slot k = in.now; k < s.departure; ++k) {
            double v = 0.0;
            if (unit(rng) < on_rate) {
                v = unit(rng) < 0.5 ? 1.0 : s.alpha + (1.0 - s.alpha) * unit(rng);
            }
            u.push_back(v);
            load[static_cast<std::size_t>(k)] += s.delta_p_kw * v;
            gain += s.delta_p_kw * hours * (1.0 - s.xi) * v;
            cost += s.delta_p_kw * hours * in.tariff.prices[static_cast<std::size_t>(k)] * v;
        }
        const double final_soc = s.x0_kwh + gain;
        s.x_max_kwh = std::max(final_soc, s.x0_kwh) + 5.0 * unit(rng);
        s.x_ref_kwh = s.x0_kwh + (final_soc - s.x0_kwh) * unit(rng);
        if (unit(rng) < 0.5) {
            s.cost_accrued = 0.5 * unit(rng);
            s.cost_star = (s.cost_accrued + cost) * (1.0 + 0.5 * unit(rng)) / (1.0 + in.config.epsilon);
        }
        in.sessions.push_back(s);
        in.witness_u.push_back(std::move(u));
    }
    for (std::size_t k = 0; k < n; ++k) {
        in.signal.p_max[k] = load[k] + (unit(rng) < 0.5 ? 0.0 : 5.0 * unit(rng));
        in.signal.p_ref[k] = 8.0 * unit(rng);
    }
    return in;
}

} // namespace evmpc::testing
