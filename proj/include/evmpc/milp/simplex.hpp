#pragma once

// Bounded-variable primal simplex on a dense tableau.
//
// Rows are turned into equalities with one slack per row; rows whose slack
// cannot absorb the initial residual get an artificial column and phase one
// minimises the sum of artificials. Pricing is Dantzig (largest reduced cost)
// and falls back to Bland's smallest-index rule after a run of degenerate
// pivots. Ties are always broken towards the smallest column index. The final
// basis is re-solved against the original matrix to strip accumulated drift.

#include "evmpc/milp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace evmpc::milp {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LpOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-9;
    // 0 selects 50 * (rows + cols) + 1000.
    std::size_t iteration_limit = 0;
    // Consecutive degenerate pivots before switching to Bland's rule.
    std::size_t degenerate_run = 30;
};

namespace detail {

class DenseSimplex {
public:
    DenseSimplex(const MilpModel& model, std::span<const Bound> bounds, const LpOptions& opts)
        : model_(model), opts_(opts), m_(model.constraints.size()), n_(model.num_vars)
    {
        setup(bounds);
    }

    MilpSolution run()
    {
        MilpSolution out;
        if (!initial_bounds_ok_) {
            out.status = SolveStatus::Infeasible;
            return out;
        }
        if (num_art_ > 0) {
            set_phase_one_costs();
            if (iterate(out.lp_iterations) == Outcome::Unbounded) {
                throw SolverError("phase one reported unbounded");
            }
            double infeasibility = 0.0;
            for (std::size_t a = 0; a < num_art_; ++a) {
                infeasibility += x_[n_ + m_ + a];
            }
            if (infeasibility > opts_.feasibility_tol) {
                out.status = SolveStatus::Infeasible;
                return out;
            }
            for (std::size_t a = 0; a < num_art_; ++a) {
                const std::size_t col = n_ + m_ + a;
                hi_[col] = 0.0;
                if (pos_[col] < 0) {
                    x_[col] = 0.0;
                    status_[col] = Status::AtLower;
                }
            }
        }
        set_phase_two_costs();
        if (iterate(out.lp_iterations) == Outcome::Unbounded) {
            out.status = SolveStatus::Unbounded;
            return out;
        }
        polish();
        out.values.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
        for (std::size_t j = 0; j < n_; ++j) {
            out.values[j] = std::clamp(out.values[j], lo_[j], hi_[j]);
        }
        out.status = SolveStatus::Optimal;
        out.objective_value = objective_of(model_, out.values);
        out.best_bound = out.objective_value;
        return out;
    }

private:
    enum class Status : std::uint8_t { Basic, AtLower, AtUpper, FreeZero };
    enum class Outcome { Optimal, Unbounded };

    double& at(std::size_t i, std::size_t j) { return tab_[i * cols_ + j]; }
    double at(std::size_t i, std::size_t j) const { return tab_[i * cols_ + j]; }

    void setup(std::span<const Bound> bounds)
    {
        // Decide which rows need an artificial before sizing the tableau.
        const std::size_t base = n_ + m_;
        lo_.resize(base);
        hi_.resize(base);
        x_.assign(base, 0.0);
        status_.assign(base, Status::AtLower);
        for (std::size_t j = 0; j < n_; ++j) {
            lo_[j] = bounds[j].lo;
            hi_[j] = bounds[j].hi;
            if (lo_[j] > hi_[j]) {
                initial_bounds_ok_ = false;
            }
            if (std::isfinite(lo_[j])) {
                x_[j] = lo_[j];
                status_[j] = Status::AtLower;
            } else if (std::isfinite(hi_[j])) {
                x_[j] = hi_[j];
                status_[j] = Status::AtUpper;
            } else {
                x_[j] = 0.0;
                status_[j] = Status::FreeZero;
            }
        }
        std::vector<double> residual(m_);
        std::vector<double> art_sign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& row = model_.constraints[i];
            double r = row.rhs;
            for (std::size_t j = 0; j < n_; ++j) {
                r -= row.coefficients[j] * x_[j];
            }
            residual[i] = r;
            const std::size_t s = n_ + i;
            switch (row.relation) {
            case Relation::LessEqual: lo_[s] = 0.0; hi_[s] = kInfinity; break;
            case Relation::GreaterEqual: lo_[s] = -kInfinity; hi_[s] = 0.0; break;
            case Relation::Equal: lo_[s] = 0.0; hi_[s] = 0.0; break;
            }
            if (r >= lo_[s] && r <= hi_[s]) {
                continue;
            }
            art_sign[i] = r > 0.0 ? 1.0 : -1.0;
            ++num_art_;
        }
        cols_ = base + num_art_;
        lo_.resize(cols_, 0.0);
        hi_.resize(cols_, kInfinity);
        x_.resize(cols_, 0.0);
        status_.resize(cols_, Status::AtLower);
        pos_.assign(cols_, -1);
        basis_.assign(m_, 0);
        art_row_.clear();
        tab_.assign(m_ * cols_, 0.0);

        std::size_t next_art = base;
        for (std::size_t i = 0; i < m_; ++i) {
            const auto& row = model_.constraints[i];
            for (std::size_t j = 0; j < n_; ++j) {
                at(i, j) = row.coefficients[j];
            }
            at(i, n_ + i) = 1.0;
            const std::size_t s = n_ + i;
            if (art_sign[i] == 0.0) {
                basis_[i] = s;
                pos_[s] = static_cast<std::ptrdiff_t>(i);
                status_[s] = Status::Basic;
                x_[s] = residual[i];
                continue;
            }
            // Slack sits at the bound nearest the residual; the artificial
            // carries the rest with a positive value.
            const double slack_value = residual[i] > hi_[s] ? hi_[s] : lo_[s];
            x_[s] = slack_value;
            status_[s] = residual[i] > hi_[s] ? Status::AtUpper : Status::AtLower;
            const std::size_t a = next_art++;
            at(i, a) = art_sign[i];
            x_[a] = std::abs(residual[i] - slack_value);
            // Normalise so the basic column reads +1.
            if (art_sign[i] < 0.0) {
                for (std::size_t j = 0; j < cols_; ++j) {
                    at(i, j) = -at(i, j);
                }
            }
            basis_[i] = a;
            pos_[a] = static_cast<std::ptrdiff_t>(i);
            status_[a] = Status::Basic;
            art_row_.push_back(i);
            art_sign_.push_back(art_sign[i]);
        }
        cost_.assign(cols_, 0.0);
        d_.assign(cols_, 0.0);
        limit_ = opts_.iteration_limit ? opts_.iteration_limit : 50 * (m_ + cols_) + 1000;
    }

    void set_phase_one_costs()
    {
        std::fill(cost_.begin(), cost_.end(), 0.0);
        for (std::size_t a = 0; a < num_art_; ++a) {
            cost_[n_ + m_ + a] = 1.0;
        }
        recompute_reduced_costs();
    }

    void set_phase_two_costs()
    {
        std::fill(cost_.begin(), cost_.end(), 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            cost_[j] = model_.objective[j];
        }
        recompute_reduced_costs();
    }

    void recompute_reduced_costs()
    {
        d_ = cost_;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost_[basis_[i]];
            if (cb == 0.0) {
                continue;
            }
            const double* row = &tab_[i * cols_];
            for (std::size_t j = 0; j < cols_; ++j) {
                d_[j] -= cb * row[j];
            }
        }
        for (std::size_t i = 0; i < m_; ++i) {
            d_[basis_[i]] = 0.0;
        }
    }

    // Returns the entering column and its direction (+1 increase, -1
    // decrease), or cols_ when the basis is optimal.
    std::pair<std::size_t, int> choose_entering(bool bland) const
    {
        const double tol = opts_.optimality_tol;
        std::size_t best = cols_;
        int dir = 0;
        double best_score = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            if (status_[j] == Status::Basic || lo_[j] == hi_[j]) {
                continue;
            }
            int cand = 0;
            switch (status_[j]) {
            case Status::AtLower: cand = d_[j] < -tol ? 1 : 0; break;
            case Status::AtUpper: cand = d_[j] > tol ? -1 : 0; break;
            case Status::FreeZero: cand = d_[j] < -tol ? 1 : (d_[j] > tol ? -1 : 0); break;
            case Status::Basic: break;
            }
            if (cand == 0) {
                continue;
            }
            if (bland) {
                return {j, cand};
            }
            const double score = std::abs(d_[j]);
            if (score > best_score) {
                best_score = score;
                best = j;
                dir = cand;
            }
        }
        return {best, dir};
    }

    Outcome iterate(std::size_t& iterations)
    {
        std::size_t degenerate = 0;
        std::vector<std::size_t> nz;
        nz.reserve(cols_);
        while (true) {
            if (iterations++ > limit_) {
                throw SolverError("simplex iteration limit exceeded");
            }
            const bool bland = degenerate >= opts_.degenerate_run;
            const auto [enter, dir] = choose_entering(bland);
            if (enter == cols_) {
                return Outcome::Optimal;
            }

            // Ratio test. The entering variable moves by dir * theta; basic
            // variable in row i moves by -dir * theta * T[i][enter].
            double theta = kInfinity;
            std::size_t leave_row = m_;
            bool leave_to_upper = false;
            double best_pivot = 0.0;
            const double span = hi_[enter] - lo_[enter];
            for (std::size_t i = 0; i < m_; ++i) {
                const double alpha = at(i, enter);
                if (std::abs(alpha) <= opts_.pivot_tol) {
                    continue;
                }
                const std::size_t b = basis_[i];
                const double rate = -dir * alpha;
                double ratio = kInfinity;
                bool to_upper = false;
                if (rate < 0.0 && std::isfinite(lo_[b])) {
                    ratio = std::max(0.0, (x_[b] - lo_[b]) / -rate);
                } else if (rate > 0.0 && std::isfinite(hi_[b])) {
                    ratio = std::max(0.0, (hi_[b] - x_[b]) / rate);
                    to_upper = true;
                } else {
                    continue;
                }
                const double tie = std::isfinite(theta) ? 1e-12 * (1.0 + theta) : 0.0;
                bool take = false;
                if (leave_row == m_ || ratio < theta - tie) {
                    take = true;
                } else if (ratio <= theta + tie && leave_row < m_) {
                    if (bland) {
                        take = b < basis_[leave_row];
                    } else {
                        const double mag = std::abs(alpha);
                        take = mag > best_pivot * (1.0 + 1e-9) ||
                               (mag >= best_pivot * (1.0 - 1e-9) && b < basis_[leave_row]);
                    }
                }
                if (take) {
                    theta = std::min(theta, ratio);
                    leave_row = i;
                    leave_to_upper = to_upper;
                    best_pivot = std::abs(alpha);
                }
            }
            if (leave_row < m_) {
                // Recompute the exact ratio for the chosen row.
                const std::size_t b = basis_[leave_row];
                const double rate = -dir * at(leave_row, enter);
                theta = leave_to_upper ? std::max(0.0, (hi_[b] - x_[b]) / rate)
                                       : std::max(0.0, (x_[b] - lo_[b]) / -rate);
            }

            if (std::isfinite(span) && span <= theta) {
                // Bound flip, no basis change.
                move_entering(enter, dir, span);
                x_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
                status_[enter] = dir > 0 ? Status::AtUpper : Status::AtLower;
                degenerate = span > 1e-12 ? 0 : degenerate + 1;
                continue;
            }
            if (leave_row == m_) {
                return Outcome::Unbounded;
            }

            move_entering(enter, dir, theta);
            const std::size_t leaving = basis_[leave_row];
            x_[leaving] = leave_to_upper ? hi_[leaving] : lo_[leaving];
            status_[leaving] = leave_to_upper ? Status::AtUpper : Status::AtLower;
            pos_[leaving] = -1;

            pivot(leave_row, enter, nz);
            basis_[leave_row] = enter;
            pos_[enter] = static_cast<std::ptrdiff_t>(leave_row);
            status_[enter] = Status::Basic;
            degenerate = theta > 1e-12 ? 0 : degenerate + 1;
        }
    }

    void move_entering(std::size_t enter, int dir, double step)
    {
        if (step == 0.0) {
            return;
        }
        x_[enter] += dir * step;
        for (std::size_t i = 0; i < m_; ++i) {
            const double alpha = at(i, enter);
            if (alpha != 0.0) {
                x_[basis_[i]] -= dir * step * alpha;
            }
        }
    }

    void pivot(std::size_t r, std::size_t c, std::vector<std::size_t>& nz)
    {
        double* prow = &tab_[r * cols_];
        const double inv = 1.0 / prow[c];
        nz.clear();
        for (std::size_t j = 0; j < cols_; ++j) {
            if (prow[j] != 0.0) {
                prow[j] *= inv;
                nz.push_back(j);
            }
        }
        prow[c] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) {
                continue;
            }
            double* row = &tab_[i * cols_];
            const double f = row[c];
            if (f == 0.0) {
                continue;
            }
            for (std::size_t j : nz) {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
        }
        const double f = d_[c];
        if (f != 0.0) {
            for (std::size_t j : nz) {
                d_[j] -= f * prow[j];
            }
            d_[c] = 0.0;
        }
    }

    // Re-solve B x_B = b - N x_N on the original columns with partial
    // pivoting.
    void polish()
    {
        if (m_ == 0) {
            return;
        }
        std::vector<double> mat(m_ * m_, 0.0);
        std::vector<double> rhs(m_);
        auto column_entry = [&](std::size_t col, std::size_t row) -> double {
            if (col < n_) {
                return model_.constraints[row].coefficients[col];
            }
            if (col < n_ + m_) {
                return col - n_ == row ? 1.0 : 0.0;
            }
            const std::size_t a = col - n_ - m_;
            return art_row_[a] == row ? art_sign_[a] : 0.0;
        };
        for (std::size_t i = 0; i < m_; ++i) {
            double r = model_.constraints[i].rhs;
            for (std::size_t j = 0; j < cols_; ++j) {
                if (status_[j] != Status::Basic && x_[j] != 0.0) {
                    r -= column_entry(j, i) * x_[j];
                }
            }
            rhs[i] = r;
            for (std::size_t k = 0; k < m_; ++k) {
                mat[i * m_ + k] = column_entry(basis_[k], i);
            }
        }
        std::vector<std::size_t> perm(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            perm[i] = i;
        }
        for (std::size_t k = 0; k < m_; ++k) {
            std::size_t p = k;
            double best = std::abs(mat[k * m_ + k]);
            for (std::size_t i = k + 1; i < m_; ++i) {
                const double v = std::abs(mat[i * m_ + k]);
                if (v > best) {
                    best = v;
                    p = i;
                }
            }
            if (best < 1e-13) {
                return; // keep tableau values
            }
            if (p != k) {
                for (std::size_t j = 0; j < m_; ++j) {
                    std::swap(mat[k * m_ + j], mat[p * m_ + j]);
                }
                std::swap(rhs[k], rhs[p]);
            }
            const double piv = mat[k * m_ + k];
            for (std::size_t i = k + 1; i < m_; ++i) {
                const double f = mat[i * m_ + k] / piv;
                if (f == 0.0) {
                    continue;
                }
                for (std::size_t j = k; j < m_; ++j) {
                    mat[i * m_ + j] -= f * mat[k * m_ + j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        std::vector<double> sol(m_);
        for (std::size_t k = m_; k-- > 0;) {
            double s = rhs[k];
            for (std::size_t j = k + 1; j < m_; ++j) {
                s -= mat[k * m_ + j] * sol[j];
            }
            sol[k] = s / mat[k * m_ + k];
        }
        for (std::size_t k = 0; k < m_; ++k) {
            x_[basis_[k]] = sol[k];
        }
    }

    const MilpModel& model_;
    LpOptions opts_;
    std::size_t m_;
    std::size_t n_;
    std::size_t cols_ = 0;
    std::size_t num_art_ = 0;
    std::size_t limit_ = 0;
    bool initial_bounds_ok_ = true;
    std::vector<double> tab_;
    std::vector<double> lo_, hi_, x_, cost_, d_;
    std::vector<Status> status_;
    std::vector<std::size_t> basis_;
    std::vector<std::ptrdiff_t> pos_;
    std::vector<std::size_t> art_row_;
    std::vector<double> art_sign_;
};

} // namespace detail

/// Solves the LP with the given per-variable bounds in place of
/// `model.bounds`. Semi-continuity marks are ignored.
inline MilpSolution solve_lp(const MilpModel& model, std::span<const Bound> bounds,
                             const LpOptions& opts = {})
{
    if (bounds.size() != model.num_vars) {
        throw MalformedModel("bounds override has wrong size");
    }
    detail::DenseSimplex simplex(model, bounds, opts);
    return simplex.run();
}

/// LP relaxation: semi-continuous variables are treated as continuous on
/// their [0,1] bounds.
inline MilpSolution solve_lp(const MilpModel& model, const LpOptions& opts = {})
{
    model.validate();
    return solve_lp(model, std::span<const Bound>(model.bounds), opts);
}

} // namespace evmpc::milp
