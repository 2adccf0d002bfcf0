#pragma once

// Exhaustive reference for small semi-continuous models: every on/off
// pattern is turned into a plain LP (off: var = 0, on: var in [alpha, 1]) and
// the best one wins. Exponential by construction; only for verification.

#include "evmpc/milp/model.hpp"
#include "evmpc/milp/simplex.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace evmpc::milp {

struct TooLarge : std::length_error {
    using std::length_error::length_error;
};

struct PatternResult {
    std::uint64_t mask = 0; // bit s set => semi-continuous var s is on
    MilpSolution lp;
};

struct OracleResult {
    SolveStatus status = SolveStatus::Infeasible;
    double objective_value = kInfinity;
    std::vector<double> values;
    std::vector<PatternResult> feasible_patterns;
    std::size_t patterns_tried = 0;
};

inline OracleResult enumerate_patterns(const MilpModel& model, std::size_t max_semicontinuous = 16)
{
    model.validate();
    const std::size_t count = model.semicontinuous.size();
    if (count > max_semicontinuous) {
        throw TooLarge("pattern oracle refuses " + std::to_string(count) +
                       " semi-continuous variables (limit " +
                       std::to_string(max_semicontinuous) + ")");
    }
    OracleResult out;
    const std::uint64_t total = std::uint64_t{1} << count;
    std::vector<Bound> bounds;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        bounds = model.bounds;
        for (std::size_t s = 0; s < count; ++s) {
            const auto& sc = model.semicontinuous[s];
            bounds[sc.var] = (mask >> s) & 1U ? Bound{sc.alpha, 1.0} : Bound{0.0, 0.0};
        }
        auto lp = solve_lp(model, bounds);
        ++out.patterns_tried;
        if (lp.status == SolveStatus::Unbounded) {
            out.status = SolveStatus::Unbounded;
            out.objective_value = -kInfinity;
            return out;
        }
        if (lp.status != SolveStatus::Optimal) {
            continue;
        }
        if (lp.objective_value < out.objective_value) {
            out.objective_value = lp.objective_value;
            out.values = lp.values;
            out.status = SolveStatus::Optimal;
        }
        out.feasible_patterns.push_back({mask, std::move(lp)});
    }
    return out;
}

} // namespace evmpc::milp
