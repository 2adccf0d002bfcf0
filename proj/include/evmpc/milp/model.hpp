#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmpc::milp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Raised when a model violates its structural invariants. This is always a
/// builder bug, never a user input problem.
struct MalformedModel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Relation { LessEqual, Equal, GreaterEqual };

struct Constraint {
    std::vector<double> coefficients;
    Relation relation = Relation::LessEqual;
    double rhs = 0.0;
    std::string name;
};

struct Bound {
    double lo = 0.0;
    double hi = kInfinity;
};

/// Marks a variable as living in {0} u [alpha, 1].
struct SemiContinuous {
    std::size_t var = 0;
    double alpha = 0.0;
};

struct MilpModel {
    std::size_t num_vars = 0;
    std::vector<double> objective;
    std::vector<Constraint> constraints;
    std::vector<Bound> bounds;
    std::vector<SemiContinuous> semicontinuous;
    std::vector<std::string> var_names;

    std::size_t add_variable(double cost, Bound bound, std::string name = {})
    {
        for (auto& row : constraints) {
            row.coefficients.push_back(0.0);
        }
        objective.push_back(cost);
        bounds.push_back(bound);
        var_names.push_back(std::move(name));
        return num_vars++;
    }

    std::size_t add_semicontinuous(double cost, double alpha, std::string name = {})
    {
        const auto idx = add_variable(cost, {0.0, 1.0}, std::move(name));
        semicontinuous.push_back({idx, alpha});
        return idx;
    }

    /// Appends a row; `coefficients` may be shorter than num_vars and is
    /// zero-padded.
    std::size_t add_constraint(std::vector<double> coefficients, Relation relation, double rhs,
                               std::string name = {})
    {
        if (coefficients.size() > num_vars) {
            throw MalformedModel("constraint '" + name + "' has more coefficients than variables");
        }
        coefficients.resize(num_vars, 0.0);
        constraints.push_back({std::move(coefficients), relation, rhs, std::move(name)});
        return constraints.size() - 1;
    }

    void validate() const
    {
        if (objective.size() != num_vars) {
            throw MalformedModel("objective has " + std::to_string(objective.size()) +
                                 " coefficients, expected " + std::to_string(num_vars));
        }
        if (bounds.size() != num_vars) {
            throw MalformedModel("bounds vector size mismatch");
        }
        for (std::size_t j = 0; j < num_vars; ++j) {
            const auto& b = bounds[j];
            if (std::isnan(b.lo) || std::isnan(b.hi) || b.lo > b.hi) {
                throw MalformedModel("variable " + std::to_string(j) + " has lo > hi");
            }
            if (!std::isfinite(objective[j])) {
                throw MalformedModel("non-finite objective coefficient at " + std::to_string(j));
            }
        }
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            const auto& row = constraints[i];
            if (row.coefficients.size() != num_vars) {
                throw MalformedModel("row " + std::to_string(i) + " has " +
                                     std::to_string(row.coefficients.size()) +
                                     " coefficients, expected " + std::to_string(num_vars));
            }
            if (!std::isfinite(row.rhs)) {
                throw MalformedModel("row " + std::to_string(i) + " has non-finite rhs");
            }
            for (double a : row.coefficients) {
                if (!std::isfinite(a)) {
                    throw MalformedModel("row " + std::to_string(i) + " has non-finite coefficient");
                }
            }
        }
        std::vector<bool> seen(num_vars, false);
        for (const auto& sc : semicontinuous) {
            if (sc.var >= num_vars) {
                throw MalformedModel("semi-continuous index out of range");
            }
            if (seen[sc.var]) {
                throw MalformedModel("variable marked semi-continuous twice");
            }
            seen[sc.var] = true;
            if (!(sc.alpha > 0.0 && sc.alpha < 1.0)) {
                throw MalformedModel("semi-continuous threshold must lie in (0,1)");
            }
            if (bounds[sc.var].lo != 0.0 || bounds[sc.var].hi != 1.0) {
                throw MalformedModel("semi-continuous variable must have bounds [0,1]");
            }
        }
    }
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, NodeLimit };

inline const char* to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NodeLimit: return "NodeLimit";
    }
    return "?";
}

struct MilpSolution {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> values;
    double objective_value = 0.0;
    // Set when status == NodeLimit and `values` holds a feasible incumbent.
    bool has_incumbent = false;
    // Lower bound on the optimum proven by the search (equals objective_value
    // when Optimal).
    double best_bound = -kInfinity;
    std::size_t nodes = 0;
    std::size_t lp_iterations = 0;
};

inline double row_activity(const Constraint& row, const std::vector<double>& x)
{
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        s += row.coefficients[j] * x[j];
    }
    return s;
}

inline double objective_of(const MilpModel& model, const std::vector<double>& x)
{
    double s = 0.0;
    for (std::size_t j = 0; j < model.num_vars; ++j) {
        s += model.objective[j] * x[j];
    }
    return s;
}

/// Largest violation of any row or bound by `x` (0 when feasible).
inline double max_violation(const MilpModel& model, const std::vector<double>& x)
{
    double worst = 0.0;
    for (const auto& row : model.constraints) {
        const double lhs = row_activity(row, x);
        double v = 0.0;
        switch (row.relation) {
        case Relation::LessEqual: v = lhs - row.rhs; break;
        case Relation::GreaterEqual: v = row.rhs - lhs; break;
        case Relation::Equal: v = std::abs(lhs - row.rhs); break;
        }
        worst = std::max(worst, v);
    }
    for (std::size_t j = 0; j < model.num_vars; ++j) {
        worst = std::max(worst, model.bounds[j].lo - x[j]);
        worst = std::max(worst, x[j] - model.bounds[j].hi);
    }
    return worst;
}

/// Distance of a semi-continuous value from {0} u [alpha, 1].
inline double semicontinuity_violation(double v, double alpha)
{
    if (v <= 0.0 || v >= alpha) {
        return 0.0;
    }
    return std::min(v, alpha - v);
}

namespace detail {
inline void write_term(std::ostream& os, double coef, const std::string& name, bool first)
{
    if (coef < 0.0) {
        os << (first ? " -" : " - ");
    } else {
        os << (first ? " " : " + ");
    }
    const double mag = std::abs(coef);
    if (mag != 1.0) {
        os << mag << ' ';
    }
    os << name;
}

inline std::string var_label(const MilpModel& model, std::size_t j)
{
    if (j < model.var_names.size() && !model.var_names[j].empty()) {
        return model.var_names[j];
    }
    return "x" + std::to_string(j);
}
} // namespace detail

/// Human-readable LP-style listing, one constraint per line. Debug aid only.
inline void dump_lp(const MilpModel& model, std::ostream& os)
{
    os << "minimize\n  obj:";
    bool first = true;
    for (std::size_t j = 0; j < model.num_vars; ++j) {
        if (model.objective[j] != 0.0) {
            detail::write_term(os, model.objective[j], detail::var_label(model, j), first);
            first = false;
        }
    }
    if (first) {
        os << " 0";
    }
    os << "\nsubject to\n";
    for (std::size_t i = 0; i < model.constraints.size(); ++i) {
        const auto& row = model.constraints[i];
        os << "  " << (row.name.empty() ? "r" + std::to_string(i) : row.name) << ":";
        bool head = true;
        for (std::size_t j = 0; j < model.num_vars; ++j) {
            if (row.coefficients[j] != 0.0) {
                detail::write_term(os, row.coefficients[j], detail::var_label(model, j), head);
                head = false;
            }
        }
        if (head) {
            os << " 0";
        }
        switch (row.relation) {
        case Relation::LessEqual: os << " <= "; break;
        case Relation::GreaterEqual: os << " >= "; break;
        case Relation::Equal: os << " = "; break;
        }
        os << row.rhs << '\n';
    }
    os << "bounds\n";
    for (std::size_t j = 0; j < model.num_vars; ++j) {
        os << "  " << model.bounds[j].lo << " <= " << detail::var_label(model, j) << " <= "
           << model.bounds[j].hi << '\n';
    }
    if (!model.semicontinuous.empty()) {
        os << "semi-continuous\n";
        for (const auto& sc : model.semicontinuous) {
            os << "  " << detail::var_label(model, sc.var) << " in {0} u [" << sc.alpha << ", 1]\n";
        }
    }
    os << "end\n";
}

} // namespace evmpc::milp
