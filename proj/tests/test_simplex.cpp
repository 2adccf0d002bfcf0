#include "evmpc/milp/simplex.hpp"

#include "support/vertex_oracle.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

using namespace evmpc::milp;
using Catch::Approx;

TEST_CASE("single variable corner", "[simplex]")
{
    MilpModel m;
    m.add_variable(-1.0, {0.0, kInfinity}, "x");
    m.add_constraint({1.0}, Relation::LessEqual, 1.0);
    m.add_constraint({1.0}, Relation::GreaterEqual, 0.0);
    const auto sol = solve_lp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values[0] == Approx(1.0));
    CHECK(sol.objective_value == Approx(-1.0));
}

TEST_CASE("contradictory rows are infeasible", "[simplex]")
{
    MilpModel m;
    m.add_variable(0.0, {-kInfinity, kInfinity}, "x");
    m.add_constraint({1.0}, Relation::GreaterEqual, 2.0);
    m.add_constraint({1.0}, Relation::LessEqual, 1.0);
    CHECK(solve_lp(m).status == SolveStatus::Infeasible);
}

TEST_CASE("crossed bounds are infeasible", "[simplex]")
{
    MilpModel m;
    m.add_variable(1.0, {0.0, 1.0});
    std::vector<Bound> b{{2.0, 1.0}};
    CHECK(solve_lp(m, std::span<const Bound>(b)).status == SolveStatus::Infeasible);
}

TEST_CASE("unbounded direction is reported", "[simplex]")
{
    MilpModel m;
    m.add_variable(-1.0, {0.0, kInfinity});
    m.add_variable(0.0, {0.0, kInfinity});
    m.add_constraint({1.0, -1.0}, Relation::LessEqual, 3.0);
    CHECK(solve_lp(m).status == SolveStatus::Unbounded);
}

TEST_CASE("free variable and equality rows", "[simplex]")
{
    // min |y| style: y free, x = 2 - y, minimise x + 3y with x in [0, 5].
    MilpModel m;
    m.add_variable(1.0, {0.0, 5.0}, "x");
    m.add_variable(3.0, {-kInfinity, kInfinity}, "y");
    m.add_constraint({1.0, 1.0}, Relation::Equal, 2.0);
    const auto sol = solve_lp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.values[0] == Approx(5.0));
    CHECK(sol.values[1] == Approx(-3.0));
    CHECK(sol.objective_value == Approx(-4.0));
}

TEST_CASE("malformed rows are rejected", "[simplex]")
{
    MilpModel m;
    m.add_variable(1.0, {0.0, 1.0});
    m.add_variable(1.0, {0.0, 1.0});
    m.constraints.push_back({{1.0}, Relation::LessEqual, 1.0, "short"});
    CHECK_THROWS_AS(solve_lp(m), MalformedModel);

    MilpModel bad_bounds;
    bad_bounds.add_variable(0.0, {1.0, 0.0});
    CHECK_THROWS_AS(solve_lp(bad_bounds), MalformedModel);

    MilpModel bad_alpha;
    bad_alpha.add_semicontinuous(1.0, 1.5);
    CHECK_THROWS_AS(solve_lp(bad_alpha), MalformedModel);
}

namespace {

MilpModel random_feasible_lp(std::mt19937_64& rng, std::size_t vars, std::size_t rows)
{
    std::uniform_real_distribution<double> coef(-3.0, 3.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> rel(0, 5);
    MilpModel m;
    std::vector<double> witness(vars);
    for (std::size_t j = 0; j < vars; ++j) {
        const double lo = -2.0 + 2.0 * unit(rng);
        const double hi = lo + 0.5 + 3.0 * unit(rng);
        m.add_variable(coef(rng), {lo, hi});
        witness[j] = lo + (hi - lo) * unit(rng);
    }
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<double> a(vars);
        double act = 0.0;
        for (std::size_t j = 0; j < vars; ++j) {
            a[j] = unit(rng) < 0.2 ? 0.0 : coef(rng);
            act += a[j] * witness[j];
        }
        const int r = rel(rng);
        if (r == 0) {
            m.add_constraint(a, Relation::Equal, act);
        } else if (r <= 2) {
            m.add_constraint(a, Relation::GreaterEqual, act - unit(rng));
        } else {
            m.add_constraint(a, Relation::LessEqual, act + unit(rng));
        }
    }
    return m;
}

} // namespace

TEST_CASE("random small LPs match vertex enumeration", "[simplex][oracle]")
{
    std::mt19937_64 rng(20240601);
    for (int trial = 0; trial < 150; ++trial) {
        const auto m = random_feasible_lp(rng, 5, 8);
        const auto expected = evmpc::testing::vertex_enumeration_optimum(m);
        REQUIRE(expected.has_value());
        const auto sol = solve_lp(m);
        INFO("trial " << trial);
        REQUIRE(sol.status == SolveStatus::Optimal);
        CHECK(sol.objective_value == Approx(*expected).epsilon(1e-9).margin(1e-9));
        CHECK(max_violation(m, sol.values) <= 1e-9);
    }
}

TEST_CASE("random infeasible LPs agree with vertex enumeration", "[simplex][oracle]")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    int infeasible_seen = 0;
    for (int trial = 0; trial < 200; ++trial) {
        MilpModel m;
        for (int j = 0; j < 3; ++j) {
            m.add_variable(coef(rng), {0.0, 1.0});
        }
        for (int i = 0; i < 5; ++i) {
            m.add_constraint({coef(rng), coef(rng), coef(rng)}, Relation::GreaterEqual, coef(rng));
        }
        const auto expected = evmpc::testing::vertex_enumeration_optimum(m);
        const auto sol = solve_lp(m);
        if (!expected) {
            ++infeasible_seen;
            CHECK(sol.status == SolveStatus::Infeasible);
        } else {
            REQUIRE(sol.status == SolveStatus::Optimal);
            CHECK(sol.objective_value == Approx(*expected).margin(1e-9));
        }
    }
    CHECK(infeasible_seen > 10);
}

TEST_CASE("solutions are deterministic", "[simplex]")
{
    std::mt19937_64 rng(99);
    const auto m = random_feasible_lp(rng, 12, 20);
    const auto a = solve_lp(m);
    const auto b = solve_lp(m);
    REQUIRE(a.status == SolveStatus::Optimal);
    CHECK(a.values == b.values);
    CHECK(a.objective_value == b.objective_value);
}

TEST_CASE("degenerate transportation-style LP terminates", "[simplex]")
{
    // Many ties in ratios: supplies exactly equal demands.
    MilpModel m;
    const int k = 6;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            m.add_variable(static_cast<double>((i + j) % 3), {0.0, kInfinity});
        }
    }
    for (int i = 0; i < k; ++i) {
        std::vector<double> row(k * k, 0.0);
        for (int j = 0; j < k; ++j) {
            row[i * k + j] = 1.0;
        }
        m.add_constraint(row, Relation::Equal, 1.0);
    }
    for (int j = 0; j < k; ++j) {
        std::vector<double> col(k * k, 0.0);
        for (int i = 0; i < k; ++i) {
            col[i * k + j] = 1.0;
        }
        m.add_constraint(col, Relation::Equal, 1.0);
    }
    const auto sol = solve_lp(m);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == Approx(0.0).margin(1e-12));
    CHECK(max_violation(m, sol.values) <= 1e-9);
}

TEST_CASE("debug listing has one line per constraint", "[simplex]")
{
    MilpModel m;
    m.add_variable(1.0, {0.0, 1.0}, "u0");
    m.add_semicontinuous(-2.0, 0.3, "u1");
    m.add_constraint({1.0, 1.0}, Relation::LessEqual, 1.5, "cap");
    m.add_constraint({1.0, -1.0}, Relation::GreaterEqual, 0.0, "order");
    std::ostringstream os;
    dump_lp(m, os);
    const auto text = os.str();
    INFO(text);
    CHECK(text.find("cap: u0 + u1 <= 1.5") != std::string::npos);
    CHECK(text.find("order: u0 - u1 >= 0") != std::string::npos);
    CHECK(text.find("u1 in {0} u [0.3, 1]") != std::string::npos);
}
