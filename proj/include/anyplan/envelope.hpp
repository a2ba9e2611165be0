#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "anyplan/automaton.hpp"
#include "anyplan/solver.hpp"

namespace anyplan {

// Ordered set of system states; insertion order is preserved so restricted
// automata index their states deterministically.
class Envelope {
public:
    Envelope() = default;
    explicit Envelope(const std::vector<StateId>& members);

    bool contains(StateId s) const { return index_.count(s) > 0; }
    // true if newly inserted
    bool insert(StateId s);
    bool erase(StateId s);
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    const std::vector<StateId>& members() const { return members_; }
    int local_index(StateId s) const {
        auto it = index_.find(s);
        return it == index_.end() ? -1 : it->second;
    }

private:
    std::vector<StateId> members_;
    std::unordered_map<StateId, int> index_;
    void reindex();
};

// Envelope projection of a system automaton plus the OUT pseudo-state.
// Local state i corresponds to envelope.members()[i]; OUT is local |E|.
struct RestrictedAutomaton {
    const StochasticAutomaton* base = nullptr;
    Envelope envelope;
    StochasticAutomaton model{1, 1};  // |E|+1 states, same action count as base
    StateId out_id = 0;               // local id of OUT
    double p_back = 0.0;
    std::vector<double> reentry;  // over envelope members; empty = uniform

    StateId to_global(StateId local) const { return envelope.members()[local]; }
    int to_local(StateId global) const { return envelope.local_index(global); }

    // Lift a local policy on the model (dense over |E|+1) to a system Policy.
    Policy lift_policy(const std::vector<ActionId>& local_actions, ActionId reflex) const;
    // Restrict a system policy to a dense local action vector (OUT gets reflex).
    std::vector<ActionId> project_policy(const Policy& policy) const;
    // Value of a global state under a restricted estimate: envelope states map
    // to their local value, everything else to the OUT value.
    double value_of_global(const ValueFunction& local_values, StateId global) const;
};

// p(x,a,OUT) is computed as 1 minus the in-envelope successor mass, so each
// restricted row sums to 1 exactly in floating point.
RestrictedAutomaton restrict_automaton(const StochasticAutomaton& base, const Envelope& envelope,
                                       double p_back = 0.0,
                                       const std::vector<double>& reentry = {});

// Value of the absorbing OUT state: -1/(1-gamma).
double out_value(double gamma);

// States outside the envelope reachable in one policy step from inside it.
std::vector<StateId> fringe(const StochasticAutomaton& a, const Envelope& envelope,
                            const Policy& policy);

struct FallOutAnalysis {
    std::vector<StateId> fringe_states;
    std::vector<double> first_exit;  // aligned with fringe_states
    double residual = 0.0;           // in-envelope mass (transient remainder + goal-absorbed)
    // fringe states sorted by descending probability, ties by ascending StateId
    std::vector<StateId> ranked() const;
};

FallOutAnalysis falling_out_distribution(const StochasticAutomaton& a, const Envelope& envelope,
                                         const Policy& policy, StateId start,
                                         double tolerance = 1e-9, int max_sweeps = 100000);

// Most-reliable path: maximizes the product of per-edge best-action transition
// probabilities (least-cost search on -log p), deterministic tie-break by
// StateId. Throws if no goal is reachable.
std::vector<StateId> find_path(const StochasticAutomaton& a, StateId start,
                               const std::vector<StateId>& goal_states);

// Adds the top-N falling-out states to the envelope (fewer if the fringe is
// smaller). Never removes states.
Envelope extend_robustify(const StochasticAutomaton& a, const Envelope& envelope,
                          const Policy& policy, StateId start, int n,
                          double tolerance = 1e-9);

// Removes, among envelope states valued worse than current_state, the N with
// the smallest discounted occupancy from current_state under the policy.
// current_state, protected states and goal states are never removed.
Envelope prune(const StochasticAutomaton& a, const Envelope& envelope, const Policy& policy,
               const ValueFunction& envelope_values, StateId current_state, int n, double gamma,
               const std::vector<StateId>& protected_states = {}, double tolerance = 1e-9);

// Discounted expected visit mass from start under policy, restricted to the
// envelope (mass leaving the envelope or hitting a goal stops accumulating).
std::vector<double> discounted_occupancy(const StochasticAutomaton& a, const Envelope& envelope,
                                         const Policy& policy, StateId start,
                                         double gamma, double tolerance = 1e-9,
                                         int max_sweeps = 100000);

enum class StepKind { FindPath, Robustify, Prune, Optimize, ExtendPathToGoal, ExtendPathBack };

struct StrategyStep {
    StepKind kind;
    int n = 0;  // for Robustify/Prune
};

struct DeliberationStrategy {
    std::vector<StrategyStep> steps;
    std::string label;  // e.g. "FP R[10] O"
};

// Label grammar: space-separated tokens "FP", "R[<int>]", "P[<int>]", "O",
// plus "EG" (extend path to goal) and "EB" (extend path back) for custom use.
DeliberationStrategy parse_strategy(const std::string& label);
std::string format_strategy(const std::vector<StrategyStep>& steps);

struct CostConstants {
    Ticks c_pg = 1;   // per PI round: c_pg * |E|^3
    Ticks c_fp = 1;   // per node expanded in find_path
    Ticks c_alt = 10; // per fall-out / occupancy analysis: c_alt * |E|
    Ticks c_add = 1;  // per state added or removed
};

inline Ticks pg_round_cost(std::size_t envelope_size, const CostConstants& c) {
    Ticks e = static_cast<Ticks>(envelope_size);
    Ticks t = c.c_pg * e * e * e;
    return t < 1 ? 1 : t;
}

struct StrategyOutcome {
    Envelope envelope;
    Policy policy;           // system-level policy (envelope actions + reflex)
    ValueFunction values;    // restricted estimate over envelope model
    RestrictedAutomaton restricted;
    Ticks ticks = 0;
};

struct StrategyContext {
    const StochasticAutomaton* automaton;
    SolverConfig solver;
    CostConstants costs;
    double p_back = 0.0;
    ActionId reflex = 0;
    std::vector<StateId> protected_states;  // never pruned (start of run etc.)
};

// Executes the strategy's primitives in order, accumulating tick costs.
StrategyOutcome apply_strategy(const DeliberationStrategy& strategy, const StrategyContext& ctx,
                               const Envelope& envelope, const Policy& policy,
                               StateId current_state);

}  // namespace anyplan
