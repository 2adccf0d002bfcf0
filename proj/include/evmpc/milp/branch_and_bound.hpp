#pragma once

// Best-first branch and bound over semi-continuous variables.
//
// A node is a per-variable state (free, off, on); off pins the variable to 0,
// on restricts it to [alpha, 1]. Child LPs are solved eagerly so the open
// list is ordered by each node's own relaxation bound. A rounding pass at the
// root and a short dive seed the incumbent; while none is known the search
// expands the newest node instead.

#include "evmpc/milp/model.hpp"
#include "evmpc/milp/simplex.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace evmpc::milp {

struct SearchLimits {
    std::size_t node_budget = 100000;
    std::chrono::milliseconds time_budget{std::chrono::minutes(10)};
    // Pruning tolerance relative to max(1, |incumbent|).
    double relative_gap = 1e-9;
    LpOptions lp{};
};

inline constexpr double kSemicontinuityTol = 1e-9;

namespace detail {

enum class ScState : std::uint8_t { Free, Off, On };

struct Node {
    std::vector<ScState> states;
    MilpSolution lp;
    std::size_t id = 0;
};

struct BoundOrder {
    bool operator()(const Node* a, const Node* b) const
    {
        if (a->lp.objective_value != b->lp.objective_value) {
            return a->lp.objective_value < b->lp.objective_value;
        }
        return a->id < b->id;
    }
};

struct DepthOrder {
    bool operator()(const Node* a, const Node* b) const { return a->id > b->id; }
};

class SemicontinuousSearch {
public:
    SemicontinuousSearch(const MilpModel& model, const SearchLimits& limits)
        : model_(model), limits_(limits), start_(std::chrono::steady_clock::now())
    {
    }

    MilpSolution run()
    {
        std::vector<ScState> root_states(model_.semicontinuous.size(), ScState::Free);
        auto root = evaluate(root_states);
        if (root.status == SolveStatus::Unbounded) {
            return finish(SolveStatus::Unbounded, -kInfinity);
        }
        if (root.status != SolveStatus::Optimal) {
            return finish(SolveStatus::Infeasible, kInfinity);
        }
        root_bound_ = root.objective_value;
        if (branching_index(root.values) < 0) {
            offer(root);
            return finish(SolveStatus::Optimal, root.objective_value);
        }
        heuristics(root_states, root);

        std::vector<std::unique_ptr<Node>> storage;
        // Best bound first; until an incumbent exists, newest node first.
        std::set<Node*, BoundOrder> open;
        std::set<Node*, DepthOrder> newest;
        auto push = [&](std::vector<ScState> states, MilpSolution lp) {
            auto node = std::make_unique<Node>();
            node->states = std::move(states);
            node->lp = std::move(lp);
            node->id = next_id_++;
            open.insert(node.get());
            newest.insert(node.get());
            storage.push_back(std::move(node));
        };
        push(root_states, std::move(root));

        while (!open.empty()) {
            const double bound = (*open.begin())->lp.objective_value;
            if (pruned(bound)) {
                // Everything left is dominated by the incumbent.
                break;
            }
            if (out_of_budget()) {
                return finish(SolveStatus::NodeLimit, bound);
            }
            Node* node = incumbent_ ? *open.begin() : *newest.begin();
            open.erase(node);
            newest.erase(node);
            const int k = branching_index(node->lp.values);
            const auto& sc = model_.semicontinuous[static_cast<std::size_t>(k)];
            const bool up = node->lp.values[sc.var] >= 0.5 * sc.alpha;
            // The nearer side is pushed last so the depth phase takes it first.
            for (ScState child_state : {up ? ScState::Off : ScState::On, up ? ScState::On : ScState::Off}) {
                auto states = node->states;
                states[static_cast<std::size_t>(k)] = child_state;
                auto lp = evaluate(states);
                if (lp.status != SolveStatus::Optimal || pruned(lp.objective_value)) {
                    continue;
                }
                if (branching_index(lp.values) < 0) {
                    offer(lp);
                    continue;
                }
                push(std::move(states), std::move(lp));
            }
            release(node);
        }
        if (!incumbent_) {
            return finish(SolveStatus::Infeasible, kInfinity);
        }
        return finish(SolveStatus::Optimal, incumbent_->objective_value);
    }

private:
    MilpSolution evaluate(const std::vector<ScState>& states)
    {
        std::vector<Bound> bounds = model_.bounds;
        for (std::size_t s = 0; s < states.size(); ++s) {
            const auto& sc = model_.semicontinuous[s];
            if (states[s] == ScState::Off) {
                bounds[sc.var] = {0.0, 0.0};
            } else if (states[s] == ScState::On) {
                bounds[sc.var] = {sc.alpha, 1.0};
            }
        }
        ++nodes_;
        auto lp = solve_lp(model_, bounds, limits_.lp);
        iterations_ += lp.lp_iterations;
        if (lp.status == SolveStatus::Optimal) {
            for (std::size_t s = 0; s < states.size(); ++s) {
                auto& v = lp.values[model_.semicontinuous[s].var];
                if (std::abs(v) <= kSemicontinuityTol) {
                    v = 0.0;
                }
            }
        }
        return lp;
    }

    // Semi-continuous slot whose value sits deepest inside (0, alpha), or -1.
    int branching_index(const std::vector<double>& values) const
    {
        int best = -1;
        double worst = kSemicontinuityTol;
        for (std::size_t s = 0; s < model_.semicontinuous.size(); ++s) {
            const auto& sc = model_.semicontinuous[s];
            const double v = values[sc.var];
            if (v <= kSemicontinuityTol || v >= sc.alpha - kSemicontinuityTol) {
                continue;
            }
            const double viol = std::min(v, sc.alpha - v);
            if (viol > worst) {
                worst = viol;
                best = static_cast<int>(s);
            }
        }
        return best;
    }

    bool pruned(double bound) const
    {
        if (!incumbent_) {
            return false;
        }
        const double inc = incumbent_->objective_value;
        return bound >= inc - limits_.relative_gap * std::max(1.0, std::abs(inc));
    }

    void offer(const MilpSolution& candidate)
    {
        if (!incumbent_ || candidate.objective_value < incumbent_->objective_value) {
            incumbent_ = candidate;
        }
    }

    bool out_of_budget() const
    {
        if (nodes_ >= limits_.node_budget) {
            return true;
        }
        return std::chrono::steady_clock::now() - start_ > limits_.time_budget;
    }

    void heuristics(std::vector<ScState> states, const MilpSolution& root)
    {
        // Round half up, then round any positive value up.
        for (int variant = 0; variant < 2 && !incumbent_; ++variant) {
            std::vector<ScState> rounded(states.size());
            for (std::size_t s = 0; s < states.size(); ++s) {
                const auto& sc = model_.semicontinuous[s];
                const double v = root.values[sc.var];
                const bool on = variant == 0 ? v >= 0.5 * sc.alpha : v > 0.0;
                rounded[s] = on ? ScState::On : ScState::Off;
            }
            auto lp = evaluate(rounded);
            if (lp.status == SolveStatus::Optimal) {
                offer(lp);
            }
        }
        dive(std::move(states), root);
    }

    // Dive: fix every fractional variable to its nearer side at once; when
    // that LP fails, fix only the branching variable (nearer side first).
    void dive(std::vector<ScState> states, MilpSolution current)
    {
        const std::size_t max_depth = states.size();
        bool batches = true;
        for (std::size_t depth = 0; depth < max_depth && !out_of_budget(); ++depth) {
            const int k = branching_index(current.values);
            if (k < 0) {
                offer(current);
                return;
            }
            // Rounding up keeps energy-type rows satisfied; the nearer side
            // is the fallback for capacity-type rows.
            auto nearer = [&](std::size_t s) {
                const auto& sc = model_.semicontinuous[s];
                return current.values[sc.var] >= 0.5 * sc.alpha ? ScState::On : ScState::Off;
            };
            std::vector<std::vector<ScState>> trials;
            std::vector<std::size_t> fractional;
            for (std::size_t s = 0; s < states.size(); ++s) {
                const double v = current.values[model_.semicontinuous[s].var];
                if (states[s] == ScState::Free && v > kSemicontinuityTol &&
                    v < model_.semicontinuous[s].alpha - kSemicontinuityTol) {
                    fractional.push_back(s);
                }
            }
            if (batches && fractional.size() > 1) {
                auto up = states;
                auto near = states;
                for (std::size_t s : fractional) {
                    up[s] = ScState::On;
                    near[s] = nearer(s);
                }
                const bool distinct = near != up;
                trials.push_back(std::move(up));
                if (distinct) {
                    trials.push_back(std::move(near));
                }
            }
            const auto ks = static_cast<std::size_t>(k);
            for (ScState side : {ScState::On, ScState::Off}) {
                auto trial = states;
                trial[ks] = side;
                trials.push_back(std::move(trial));
            }
            const std::size_t batch_count = trials.size() - 2;
            bool advanced = false;
            for (std::size_t i = 0; i < trials.size(); ++i) {
                auto& trial = trials[i];
                auto lp = evaluate(trial);
                if (lp.status == SolveStatus::Optimal && !pruned(lp.objective_value)) {
                    states = std::move(trial);
                    current = std::move(lp);
                    advanced = true;
                    break;
                }
                if (i + 1 == batch_count) {
                    batches = false;  // rows are too tight for batch fixing
                }
            }
            if (!advanced) {
                return;
            }
        }
    }

    // Expanded nodes keep their slot in storage but drop the payload.
    static void release(Node* node)
    {
        node->lp.values.clear();
        node->lp.values.shrink_to_fit();
        node->states.clear();
        node->states.shrink_to_fit();
    }

    MilpSolution finish(SolveStatus status, double bound)
    {
        MilpSolution out;
        out.nodes = nodes_;
        out.lp_iterations = iterations_;
        if (status == SolveStatus::Optimal || status == SolveStatus::NodeLimit) {
            if (incumbent_) {
                out.values = incumbent_->values;
                out.objective_value = incumbent_->objective_value;
                out.has_incumbent = status == SolveStatus::NodeLimit;
            }
        }
        out.status = status;
        out.best_bound = status == SolveStatus::Optimal ? out.objective_value
                                                        : std::max(bound, root_bound_);
        if (status == SolveStatus::NodeLimit && incumbent_) {
            out.best_bound = std::min(out.best_bound, out.objective_value);
        }
        return out;
    }

    const MilpModel& model_;
    SearchLimits limits_;
    std::chrono::steady_clock::time_point start_;
    std::optional<MilpSolution> incumbent_;
    double root_bound_ = -kInfinity;
    std::size_t nodes_ = 0;
    std::size_t iterations_ = 0;
    std::size_t next_id_ = 0;
};

} // namespace detail

/// Exact minimisation with semi-continuous variables. Returns Optimal with
/// the global optimum, Infeasible, Unbounded (LP relaxation unbounded), or
/// NodeLimit when the budget ran out; `has_incumbent` then says whether
/// `values` holds a feasible point.
inline MilpSolution solve_semicontinuous(const MilpModel& model, const SearchLimits& limits = {})
{
    model.validate();
    detail::SemicontinuousSearch search(model, limits);
    return search.run();
}

} // namespace evmpc::milp
