#include "evmpc/milp/branch_and_bound.hpp"
#include "evmpc/milp/pattern_oracle.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace evmpc::milp;
using Catch::Approx;

TEST_CASE("lower bound inside the gap forces the variable up to alpha", "[bnb]")
{
    MilpModel m;
    m.add_semicontinuous(1.0, 0.3, "x");
    m.add_constraint({1.0}, Relation::GreaterEqual, 0.1);
    const auto sol = solve_semicontinuous(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values[0] == Approx(0.3));
}

TEST_CASE("zero branch wins without a lower row", "[bnb]")
{
    MilpModel m;
    m.add_semicontinuous(1.0, 0.3, "x");
    const auto sol = solve_semicontinuous(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values[0] == 0.0);
}

TEST_CASE("gap with no admissible value is infeasible", "[bnb]")
{
    MilpModel m;
    m.add_semicontinuous(1.0, 0.5, "x");
    m.add_constraint({1.0}, Relation::GreaterEqual, 0.1);
    m.add_constraint({1.0}, Relation::LessEqual, 0.4);
    CHECK(solve_semicontinuous(m).status == SolveStatus::Infeasible);
    // The relaxation alone is feasible.
    CHECK(solve_lp(m).status == SolveStatus::Optimal);
}

namespace {

// Generic small models: a few semi-continuous vars, an optional continuous
// epigraph-like var, mixed rows.
MilpModel random_model(std::mt19937_64& rng, std::size_t sc_count)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MilpModel m;
    for (std::size_t s = 0; s < sc_count; ++s) {
        m.add_semicontinuous(unit(rng) * 2.0 - 0.5, 0.1 + 0.8 * unit(rng));
    }
    const auto t = m.add_variable(0.5 + unit(rng), {0.0, kInfinity}, "t");
    const std::size_t rows = 2 + static_cast<std::size_t>(unit(rng) * 5);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> a(m.num_vars, 0.0);
        for (std::size_t s = 0; s < sc_count; ++s) {
            a[s] = unit(rng) < 0.3 ? 0.0 : unit(rng) * 2.0 - 0.4;
        }
        if (unit(rng) < 0.5) {
            a[t] = -1.0;
        }
        const double rhs = unit(rng) * sc_count * 0.6 - 0.3;
        m.add_constraint(a, unit(rng) < 0.6 ? Relation::LessEqual : Relation::GreaterEqual, rhs);
    }
    return m;
}

} // namespace

TEST_CASE("branch and bound matches exhaustive pattern enumeration", "[bnb][oracle]")
{
    std::mt19937_64 rng(424242);
    int optimal = 0;
    int infeasible = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t sc = 1 + trial % 10;
        const auto model = random_model(rng, sc);
        const auto oracle = enumerate_patterns(model);
        const auto lp = solve_lp(model);
        const auto sol = solve_semicontinuous(model);
        INFO("trial " << trial);
        if (oracle.status == SolveStatus::Unbounded) {
            CHECK(sol.status == SolveStatus::Unbounded);
            continue;
        }
        if (oracle.status == SolveStatus::Infeasible) {
            ++infeasible;
            CHECK(sol.status == SolveStatus::Infeasible);
            continue;
        }
        ++optimal;
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(std::abs(sol.objective_value - oracle.objective_value) <=
              1e-6 * std::abs(oracle.objective_value) + 1e-9);
        // Relaxation bound.
        REQUIRE(lp.status == SolveStatus::Optimal);
        CHECK(lp.objective_value <= sol.objective_value + 1e-9);
        // Every pattern-restricted LP optimum is at least the B&B optimum.
        for (const auto& p : oracle.feasible_patterns) {
            CHECK(sol.objective_value <= p.lp.objective_value + 1e-9);
        }
        CHECK(max_violation(model, sol.values) <= 1e-9);
        for (const auto& s : model.semicontinuous) {
            const double v = sol.values[s.var];
            CHECK((v == 0.0 || (v >= s.alpha - 1e-9 && v <= 1.0 + 1e-9)));
        }
    }
    CHECK(optimal > 100);
    CHECK(infeasible > 5);
}

TEST_CASE("identical models give identical solutions", "[bnb]")
{
    std::mt19937_64 rng(5);
    const auto model = random_model(rng, 10);
    const auto a = solve_semicontinuous(model);
    const auto b = solve_semicontinuous(model);
    CHECK(a.status == b.status);
    CHECK(a.values == b.values);
    CHECK(a.nodes == b.nodes);
}

TEST_CASE("node budget exhaustion is flagged, never silent", "[bnb]")
{
    // sum x_s = 0.55 * n with alpha close to 1 needs real search.
    const std::size_t n = 14;
    MilpModel m;
    for (std::size_t s = 0; s < n; ++s) {
        m.add_semicontinuous(1.0 + 0.01 * static_cast<double>(s), 0.9);
    }
    m.add_constraint(std::vector<double>(n, 1.0), Relation::GreaterEqual, 0.55 * n);
    SearchLimits limits;
    limits.node_budget = 3;
    const auto sol = solve_semicontinuous(m, limits);
    CHECK(sol.status == SolveStatus::NodeLimit);
    if (sol.has_incumbent) {
        CHECK(max_violation(m, sol.values) <= 1e-9);
        CHECK(sol.best_bound <= sol.objective_value + 1e-12);
    }
    const auto full = solve_semicontinuous(m);
    REQUIRE(full.status == SolveStatus::Optimal);
    CHECK(full.objective_value <= sol.objective_value + 1e-12);
}

TEST_CASE("oracle refuses oversized models", "[bnb]")
{
    MilpModel m;
    for (int s = 0; s < 20; ++s) {
        m.add_semicontinuous(1.0, 0.5);
    }
    CHECK_THROWS_AS(enumerate_patterns(m), TooLarge);
}
