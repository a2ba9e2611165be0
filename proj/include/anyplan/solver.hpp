#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "anyplan/automaton.hpp"
#include "anyplan/types.hpp"

namespace anyplan {

struct SolverConfig {
    double gamma = 0.95;
    double eval_tolerance = 1e-9;
    int max_eval_sweeps = 100000;
    bool parallel = true;  // OpenMP sweeps; serial path gives bit-identical results
};

enum class ValueProvenance { ExactFull, RestrictedEstimate };

struct ValueFunction {
    std::vector<double> values;  // indexed by StateId of the solved automaton
    ValueProvenance provenance = ValueProvenance::ExactFull;
};

// Envelope-state -> action map plus a reflex action covering everything else.
// The domain is kept sorted so lookups and iteration order are deterministic.
class Policy {
public:
    Policy() = default;
    Policy(std::vector<StateId> domain, std::vector<ActionId> actions, ActionId reflex);

    static Policy reflex_only(ActionId reflex) { return Policy({}, {}, reflex); }

    ActionId action_for(StateId s) const {
        auto it = std::lower_bound(domain_.begin(), domain_.end(), s);
        if (it != domain_.end() && *it == s)
            return actions_[static_cast<std::size_t>(it - domain_.begin())];
        return reflex_;
    }
    bool in_domain(StateId s) const {
        auto it = std::lower_bound(domain_.begin(), domain_.end(), s);
        return it != domain_.end() && *it == s;
    }
    const std::vector<StateId>& domain() const { return domain_; }
    const std::vector<ActionId>& actions() const { return actions_; }
    ActionId reflex() const { return reflex_; }

    // Dense action vector over all states of `n` states.
    std::vector<ActionId> as_dense(StateId n) const;

private:
    std::vector<StateId> domain_;
    std::vector<ActionId> actions_;
    ActionId reflex_ = 0;
};

struct EvalFailure {
    ValueFunction last_iterate;
    double residual;
};

// Successive-approximation policy evaluation (Jacobi sweeps, sup-norm stop).
// Throws AnyplanError on non-convergence; the error message carries the
// residual, and evaluate_with_failure exposes the last iterate.
ValueFunction policy_evaluate(const StochasticAutomaton& a, const Policy& policy,
                              const SolverConfig& cfg);
std::optional<EvalFailure> evaluate_with_failure(const StochasticAutomaton& a,
                                                 const Policy& policy, const SolverConfig& cfg,
                                                 ValueFunction& out);

// Greedy policy w.r.t. V; ties broken by lowest ActionId. States with no
// populated action row are an error naming the state.
Policy policy_improve(const StochasticAutomaton& a, const ValueFunction& v,
                      const SolverConfig& cfg);

struct PolicyIterationResult {
    Policy policy;
    ValueFunction value;
    int rounds_completed = 0;
    bool converged = false;
    Ticks ticks_spent = 0;
};

// Interruptible policy iteration. Each completed round (evaluate + improve)
// costs round_cost ticks; when the budget cannot cover another round the best
// complete pair so far is returned. budget < 0 means unbounded.
PolicyIterationResult policy_iteration(const StochasticAutomaton& a, const Policy& initial,
                                       const SolverConfig& cfg, Ticks budget = -1,
                                       Ticks round_cost = 0);

ValueFunction value_iteration(const StochasticAutomaton& a, const SolverConfig& cfg);

struct TransitionDistribution {
    std::vector<double> mass;  // indexed by StateId
    int horizon = 0;
};

// Exact n-step occupancy under a fixed policy. If absorb_goals is set, goal
// states keep their mass (treated as absorbing regardless of their rows).
TransitionDistribution n_step_distribution(const StochasticAutomaton& a, const Policy& policy,
                                           StateId start, int n, bool absorb_goals = false);

// -(1 - gamma^k) / (1 - gamma); the discounted cost of k unit-cost steps.
double discounted_step_cost(int k, double gamma);

// --- kernels (exposed for the serial/parallel benchmark) ---

// One Jacobi sweep of fixed-policy backup: out[s] = r(s) + gamma * sum p * in.
// Returns the sup-norm change. Serial and OpenMP variants compute identical
// per-state results (no cross-state reduction), so outputs are bit-equal.
double bellman_policy_sweep_serial(const StochasticAutomaton& a,
                                   const std::vector<ActionId>& act, double gamma,
                                   const std::vector<double>& in, std::vector<double>& out);
double bellman_policy_sweep_parallel(const StochasticAutomaton& a,
                                     const std::vector<ActionId>& act, double gamma,
                                     const std::vector<double>& in, std::vector<double>& out);
double bellman_optimal_sweep_serial(const StochasticAutomaton& a, double gamma,
                                    const std::vector<double>& in, std::vector<double>& out);
double bellman_optimal_sweep_parallel(const StochasticAutomaton& a, double gamma,
                                      const std::vector<double>& in, std::vector<double>& out);

}  // namespace anyplan
