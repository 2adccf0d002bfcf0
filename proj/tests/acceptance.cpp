// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include "evmpc/harness/presets.hpp"
#include "evmpc/harness/runner.hpp"
#include "evmpc/lac/capacity.hpp"
#include "evmpc/lac/problem.hpp"
#include "evmpc/lac/schedules.hpp"
#include "evmpc/milp/branch_and_bound.hpp"
#include "evmpc/milp/pattern_oracle.hpp"
#include "evmpc/plant/plant.hpp"
#include "support/lac_instances.hpp"

#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace evmpc;
using namespace evmpc::harness;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict oracle_optimality()
{
    constexpr int kInstances = 250;
    std::mt19937_64 rng(20240601);
    const auto t0 = std::chrono::steady_clock::now();
    int mismatches = 0;
    double worst = 0.0;
    for (int i = 0; i < kInstances; ++i) {
        const auto in = testing::random_instance(rng, 2, 6);
        const auto p = lac::build_problem(in.sessions, in.tariff, in.signal, in.config, in.now);
        const auto bb = milp::solve_semicontinuous(p.model);
        const auto oracle = milp::enumerate_patterns(p.model);
        if (bb.status != milp::SolveStatus::Optimal || oracle.status != milp::SolveStatus::Optimal) {
            ++mismatches;
            continue;
        }
        const double gap = std::abs(bb.objective_value - oracle.objective_value) /
                           std::max(1.0, std::abs(oracle.objective_value));
        worst = std::max(worst, gap);
        if (gap > 1e-6) {
            ++mismatches;
        }
    }
    const double secs = seconds_since(t0);
    return {mismatches == 0 && secs < 60.0,
            fmt::format("{} instances, {} mismatches, worst relative gap {:.2e}, {:.1f} s", kInstances, mismatches,
                        worst, secs)};
}

// Re-check written from the constraint definitions, using only the decoded
// per-slot powers.
struct Recheck {
    int overload = 0, soc_box = 0, final_soc = 0, cost_cap = 0, shape = 0;
    int total() const { return overload + soc_box + final_soc + cost_cap + shape; }
};

void recheck(const testing::LacInstance& in, const lac::ScheduleSet& set, Recheck& r)
{
    constexpr double tol = 1e-7;
    const double h = in.config.slot_hours();
    std::vector<double> load(in.signal.p_max.size(), 0.0);
    for (std::size_t m = 0; m < in.sessions.size(); ++m) {
        const auto& s = in.sessions[m];
        double soc = s.x0_kwh;
        double cost = s.cost_accrued;
        for (lac::Slot k = in.now; k < s.departure; ++k) {
            const double p = set.schedules[m].power_at(k);
            const double u = p / s.delta_p_kw;
            if (u < -tol || u > 1.0 + tol || (u > tol && u < s.alpha - tol)) {
                ++r.shape;
            }
            load[static_cast<std::size_t>(k)] += p;
            soc += (1.0 - s.xi) * p * h;
            cost += in.tariff.prices[static_cast<std::size_t>(k)] * p * h;
            if (soc > s.x_max_kwh + tol || soc < s.x_min_kwh - tol) {
                ++r.soc_box;
            }
        }
        const double flagged = set.relaxed ? set.shortfall_kwh.at(m) : 0.0;
        if (soc < s.x_ref_kwh - flagged - tol) {
            ++r.final_soc;
        }
        if (s.cost_star && cost > (1.0 + in.config.epsilon) * *s.cost_star + tol) {
            ++r.cost_cap;
        }
    }
    for (std::size_t k = 0; k < load.size(); ++k) {
        if (load[k] > in.signal.p_max[k] + tol) {
            ++r.overload;
        }
    }
}

Verdict constraint_suite()
{
    constexpr int kInstances = 500;
    std::mt19937_64 rng(20240602);
    milp::SearchLimits limits;
    limits.node_budget = 50;
    Recheck r;
    int relaxed = 0, node_limited = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < kInstances; ++i) {
        const auto in = testing::random_instance(rng, 5, 96);
        auto p = lac::build_problem(in.sessions, in.tariff, in.signal, in.config, in.now);
        const auto set = lac::solve_schedules(std::move(p), in.sessions, in.tariff, in.signal, in.config, limits);
        relaxed += set.relaxed ? 1 : 0;
        node_limited += set.node_limited ? 1 : 0;
        recheck(in, set, r);
    }
    return {r.total() == 0,
            fmt::format("{} instances, violations: overload {} soc {} final {} cost {} shape {}; {} relaxed, {} node "
                        "limited, {:.1f} s",
                        kInstances, r.overload, r.soc_box, r.final_soc, r.cost_cap, r.shape, relaxed, node_limited,
                        seconds_since(t0))};
}

Verdict capacity_mismatch()
{
    const auto nominal = run_scenario(parse_scenario(test1_document()));
    Test1Options o;
    o.controller_capacity_kwh = kTrueCapacityKwh;
    const auto matched = run_scenario(parse_scenario(test1_document(o)));
    const double a = nominal.sessions.at(0).true_final_soc_pct;
    const double b = matched.sessions.at(0).true_final_soc_pct;
    return {nominal.ok() && matched.ok() && a >= 35.0 && b >= 30.0 && b <= 32.0,
            fmt::format("final SoC {:.2f}% with a 22 kWh model, {:.2f}% with a 19 kWh model", a, b)};
}

Verdict quantization()
{
    const auto out = run_scenario(parse_scenario(test1_document()));
    const auto& t = out.tracking;
    return {out.ok() && t.max_dev < 0.23 && t.mean_abs_dev >= 0.09 && t.mean_abs_dev <= 0.14,
            fmt::format("max {:.4f} kW, mean {:.4f} kW over {} slots", t.max_dev, t.mean_abs_dev, t.samples)};
}

Verdict reprofiling()
{
    const auto live = run_scenario(parse_scenario(test2_document()));
    Test2Options f;
    f.frozen = true;
    const auto frozen = run_scenario(parse_scenario(test2_document(f)));
    int over_live = 0, over_frozen = 0;
    double worst_frozen = 0.0;
    for (std::size_t k = kThresholdCutSlot; k < live.series.size(); ++k) {
        const auto& l = live.series[k];
        const auto& z = frozen.series[k];
        over_live += l.commanded_kw > l.p_max_kw + 1e-9 ? 1 : 0;
        over_frozen += z.commanded_kw > z.p_max_kw + 1e-9 ? 1 : 0;
        worst_frozen = std::max(worst_frozen, z.commanded_kw - z.p_max_kw);
    }
    return {live.ok() && over_live == 0 && over_frozen > 0,
            fmt::format("re-solving: {} slots above P*; frozen plan: {} slots above P*, worst by {:.3f} kW", over_live,
                        over_frozen, worst_frozen)};
}

Verdict dominance()
{
    Test2Options o;
    o.ideal_plant = true;
    o.dso_events = false;
    const auto out = run_scenario(parse_scenario(test2_document(o)));
    int compared = 0, failures = 0, missing = 0;
    double worst = -1e300;
    for (std::size_t i = 1; i < out.resolves.size(); ++i) {
        const auto& r = out.resolves[i];
        if (r.session_ids.empty()) {
            continue;
        }
        if (!r.previous_tail_objective) {
            ++missing;
            continue;
        }
        ++compared;
        const double d = r.objective - *r.previous_tail_objective;
        worst = std::max(worst, d);
        if (d > 1e-6) {
            ++failures;
        }
    }
    return {out.ok() && compared > 0 && failures == 0 && missing == 0,
            fmt::format("{} re-solves compared, {} above the previous tail, {} without a tail, worst increase {:.2e}",
                        compared, failures, missing, worst)};
}

Verdict lost_reports()
{
    const double clean = run_scenario(parse_scenario(test2_document())).sessions.at(0).true_final_soc_pct;
    double worst = 0.0;
    int broken = 0, lost = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Test2Options o;
        o.loss_probability = 0.2;
        o.seed = seed;
        const auto out = run_scenario(parse_scenario(test2_document(o)));
        broken += out.ok() ? 0 : 1;
        lost += out.sessions.at(0).lost_reports;
        worst = std::max(worst, std::abs(out.sessions.at(0).true_final_soc_pct - clean));
    }
    return {broken == 0 && worst <= 1.0,
            fmt::format("20 seeds, {} reports lost in total, worst final SoC difference {:.3f} pp, {} runs with "
                        "failed invariants",
                        lost, worst, broken)};
}

Verdict determinism()
{
    Test2Options o;
    o.loss_probability = 0.2;
    o.seed = 11;
    const auto sc = parse_scenario(test2_document(o));
    const auto a = run_scenario(sc);
    const auto b = run_scenario(sc);
    const bool same = series_csv(a) == series_csv(b) && sessions_csv(a) == sessions_csv(b) &&
                      resolves_csv(a) == resolves_csv(b);
    const auto replayed = center::ControlCenter::replay(sc.center, sc.tariff, sc.signal, a.log);
    const bool replay_ok = replayed.snapshot() == a.final_snapshot;
    return {same && replay_ok,
            fmt::format("CSVs {}, replay of {} log records {}", same ? "identical" : "differ", a.log.size(),
                        replay_ok ? "matches" : "differs")};
}

struct Trace {
    double energy_kwh = 0.0;
    double start_pct = 0.0;
    double end_pct = 0.0;
};

// One session on the plant: random per-slot offers at a socket, metered
// energy summed from the applied power.
Trace plant_trace(std::mt19937_64& rng, double capacity, double xi, double start_pct, double target_delta_pct)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    plant::BatteryState b;
    b.true_capacity_kwh = capacity;
    b.xi_true = xi;
    b.soc_kwh = capacity * start_pct / 100.0;
    constexpr double dt = 5.0 / 60.0;
    Trace t{0.0, b.soc_pct(), 0.0};
    while (b.soc_pct() < start_pct + target_delta_pct) {
        const int amps = unit(rng) < 0.2 ? 0 : 6 + static_cast<int>(unit(rng) * 11.0);
        const auto r = plant::step_battery(b, amps, 1, 230.0, dt);
        b = r.state;
        t.energy_kwh += r.applied_power_kw * dt;
    }
    t.end_pct = b.soc_pct();
    return t;
}

Verdict capacity_estimator()
{
    std::mt19937_64 rng(20240609);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    int exact = 0;
    for (int i = 0; i < 200; ++i) {
        const double c = 15.0 + 10.0 * unit(rng);
        const double xi = 0.1 * unit(rng);
        const auto t = plant_trace(rng, c, xi, 5.0 + 40.0 * unit(rng), 5.0 + 40.0 * unit(rng));
        const double est = lac::estimate_capacity(t.energy_kwh, t.start_pct, t.end_pct, xi);
        worst = std::max(worst, std::abs(est - c) / c);
        ++exact;
    }
    // Two sessions shaped like the field pair (10 -> 38 % and 38 -> 49 %) on
    // one vehicle, read with up to 1 pp error at each end.
    constexpr double kTruth = 21.6;
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 500; ++i) {
        for (const auto& [start, delta] : {std::pair{10.0, 28.0}, std::pair{38.0, 11.0}}) {
            const auto t = plant_trace(rng, kTruth, 0.0, start, delta);
            const double s0 = t.start_pct + (2.0 * unit(rng) - 1.0);
            const double s1 = t.end_pct + (2.0 * unit(rng) - 1.0);
            const double est = lac::estimate_capacity(t.energy_kwh, s0, s1, 0.0);
            lo = std::min(lo, est);
            hi = std::max(hi, est);
        }
    }
    return {worst <= 0.02 && lo <= 19.8 && hi >= 23.6,
            fmt::format("{} exact traces, worst relative error {:.2e}; noisy readings of a {:.1f} kWh pack span "
                        "[{:.2f}, {:.2f}] kWh",
                        exact, worst, kTruth, lo, hi)};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"oracle optimality", oracle_optimality},
        {"constraint suite", constraint_suite},
        {"capacity mismatch", capacity_mismatch},
        {"quantization statistics", quantization},
        {"re-profiling", reprofiling},
        {"receding horizon dominance", dominance},
        {"lost-report robustness", lost_reports},
        {"determinism and replay", determinism},
        {"capacity estimator", capacity_estimator},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        failed += v.pass ? 0 : 1;
        fmt::print("{} {}. {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail);
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
