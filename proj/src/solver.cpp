#include "anyplan/solver.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace anyplan {

Policy::Policy(std::vector<StateId> domain, std::vector<ActionId> actions, ActionId reflex)
    : domain_(std::move(domain)), actions_(std::move(actions)), reflex_(reflex) {
    if (domain_.size() != actions_.size())
        throw AnyplanError("policy domain/action size mismatch");
    // sort jointly by state id
    std::vector<std::size_t> idx(domain_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return domain_[i] < domain_[j]; });
    std::vector<StateId> d(domain_.size());
    std::vector<ActionId> a(actions_.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        d[k] = domain_[idx[k]];
        a[k] = actions_[idx[k]];
    }
    for (std::size_t k = 1; k < d.size(); ++k)
        if (d[k] == d[k - 1]) throw AnyplanError("duplicate state in policy domain");
    domain_ = std::move(d);
    actions_ = std::move(a);
}

std::vector<ActionId> Policy::as_dense(StateId n) const {
    std::vector<ActionId> out(n, reflex_);
    for (std::size_t i = 0; i < domain_.size(); ++i)
        if (domain_[i] >= 0 && domain_[i] < n) out[domain_[i]] = actions_[i];
    return out;
}

namespace {

inline double backup_state(const StochasticAutomaton& a, StateId s, ActionId act, double gamma,
                           const std::vector<double>& v) {
    double acc = 0.0;
    for (const Transition* t = a.row_begin(s, act); t != a.row_end(s, act); ++t)
        acc += t->prob * v[t->to];
    return a.reward(s) + gamma * acc;
}

template <bool Parallel>
double policy_sweep(const StochasticAutomaton& a, const std::vector<ActionId>& act, double gamma,
                    const std::vector<double>& in, std::vector<double>& out) {
    const StateId n = a.num_states();
    double delta = 0.0;
#pragma omp parallel for reduction(max : delta) schedule(static) if (Parallel)
    for (StateId s = 0; s < n; ++s) {
        double v = a.row_empty(s, act[s]) ? a.reward(s) + gamma * in[s]
                                          : backup_state(a, s, act[s], gamma, in);
        double d = std::abs(v - in[s]);
        if (d > delta) delta = d;
        out[s] = v;
    }
    return delta;
}

template <bool Parallel>
double optimal_sweep(const StochasticAutomaton& a, double gamma, const std::vector<double>& in,
                     std::vector<double>& out) {
    const StateId n = a.num_states();
    const ActionId m = a.num_actions();
    double delta = 0.0;
#pragma omp parallel for reduction(max : delta) schedule(static) if (Parallel)
    for (StateId s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (ActionId act = 0; act < m; ++act) {
            if (a.row_empty(s, act)) continue;
            any = true;
            double q = backup_state(a, s, act, gamma, in);
            if (q > best) best = q;
        }
        if (!any) best = a.reward(s) + gamma * in[s];  // actionless state: self-loop semantics
        double d = std::abs(best - in[s]);
        if (d > delta) delta = d;
        out[s] = best;
    }
    return delta;
}

}  // namespace

double bellman_policy_sweep_serial(const StochasticAutomaton& a, const std::vector<ActionId>& act,
                                   double gamma, const std::vector<double>& in,
                                   std::vector<double>& out) {
    return policy_sweep<false>(a, act, gamma, in, out);
}
double bellman_policy_sweep_parallel(const StochasticAutomaton& a, const std::vector<ActionId>& act,
                                     double gamma, const std::vector<double>& in,
                                     std::vector<double>& out) {
    return policy_sweep<true>(a, act, gamma, in, out);
}
double bellman_optimal_sweep_serial(const StochasticAutomaton& a, double gamma,
                                    const std::vector<double>& in, std::vector<double>& out) {
    return optimal_sweep<false>(a, gamma, in, out);
}
double bellman_optimal_sweep_parallel(const StochasticAutomaton& a, double gamma,
                                      const std::vector<double>& in, std::vector<double>& out) {
    return optimal_sweep<true>(a, gamma, in, out);
}

std::optional<EvalFailure> evaluate_with_failure(const StochasticAutomaton& a,
                                                 const Policy& policy, const SolverConfig& cfg,
                                                 ValueFunction& out) {
    const StateId n = a.num_states();
    std::vector<ActionId> act = policy.as_dense(n);
    std::vector<double> cur(n, 0.0), next(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < cfg.max_eval_sweeps; ++sweep) {
        residual = cfg.parallel ? bellman_policy_sweep_parallel(a, act, cfg.gamma, cur, next)
                                : bellman_policy_sweep_serial(a, act, cfg.gamma, cur, next);
        cur.swap(next);
        if (residual <= cfg.eval_tolerance) {
            out.values = std::move(cur);
            return std::nullopt;
        }
    }
    return EvalFailure{ValueFunction{std::move(cur), ValueProvenance::ExactFull}, residual};
}

ValueFunction policy_evaluate(const StochasticAutomaton& a, const Policy& policy,
                              const SolverConfig& cfg) {
    ValueFunction v;
    if (auto fail = evaluate_with_failure(a, policy, cfg, v)) {
        std::ostringstream os;
        os << "policy evaluation did not converge in " << cfg.max_eval_sweeps
           << " sweeps, residual " << fail->residual;
        throw AnyplanError(os.str());
    }
    return v;
}

Policy policy_improve(const StochasticAutomaton& a, const ValueFunction& v,
                      const SolverConfig& cfg) {
    const StateId n = a.num_states();
    const ActionId m = a.num_actions();
    std::vector<StateId> domain(n);
    std::vector<ActionId> actions(n);
    for (StateId s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        ActionId best_a = -1;
        for (ActionId act = 0; act < m; ++act) {
            if (a.row_empty(s, act)) continue;
            double q = backup_state(a, s, act, cfg.gamma, v.values);
            if (q > best) {  // strict: ties keep the lowest action id
                best = q;
                best_a = act;
            }
        }
        if (best_a < 0)
            throw AnyplanError("state " + std::to_string(s) + " has no actions");
        domain[s] = s;
        actions[s] = best_a;
    }
    return Policy(std::move(domain), std::move(actions), 0);
}

PolicyIterationResult policy_iteration(const StochasticAutomaton& a, const Policy& initial,
                                       const SolverConfig& cfg, Ticks budget, Ticks round_cost) {
    PolicyIterationResult res;
    res.policy = initial;
    res.value = policy_evaluate(a, initial, cfg);
    Ticks spent = 0;
    const bool bounded = budget >= 0;
    while (true) {
        if (bounded && spent + round_cost > budget) break;
        Policy improved = policy_improve(a, res.value, cfg);
        ValueFunction v = policy_evaluate(a, improved, cfg);
        spent += round_cost;
        ++res.rounds_completed;
        bool changed = improved.as_dense(a.num_states()) != res.policy.as_dense(a.num_states());
        // progress in value, to terminate when approximate evaluation leaves
        // the improvement rule flapping between equally good policies
        double dv = 0.0;
        for (StateId s = 0; s < a.num_states(); ++s)
            dv = std::max(dv, std::abs(v.values[s] - res.value.values[s]));
        res.policy = std::move(improved);
        res.value = std::move(v);
        if (!changed || dv <= cfg.eval_tolerance * 10.0) {
            res.converged = true;
            break;
        }
    }
    res.ticks_spent = spent;
    return res;
}

ValueFunction value_iteration(const StochasticAutomaton& a, const SolverConfig& cfg) {
    const StateId n = a.num_states();
    std::vector<double> cur(n, 0.0), next(n, 0.0);
    double residual = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < cfg.max_eval_sweeps; ++sweep) {
        residual = cfg.parallel ? bellman_optimal_sweep_parallel(a, cfg.gamma, cur, next)
                                : bellman_optimal_sweep_serial(a, cfg.gamma, cur, next);
        cur.swap(next);
        if (residual <= cfg.eval_tolerance)
            return ValueFunction{std::move(cur), ValueProvenance::ExactFull};
    }
    std::ostringstream os;
    os << "value iteration did not converge, residual " << residual;
    throw AnyplanError(os.str());
}

TransitionDistribution n_step_distribution(const StochasticAutomaton& a, const Policy& policy,
                                           StateId start, int n, bool absorb_goals) {
    if (n < 0) throw AnyplanError("n_step_distribution: n must be >= 0");
    if (start < 0 || start >= a.num_states())
        throw AnyplanError("n_step_distribution: start out of range");
    std::vector<ActionId> act = policy.as_dense(a.num_states());
    std::vector<double> cur(a.num_states(), 0.0), next(a.num_states());
    cur[start] = 1.0;
    for (int step = 0; step < n; ++step) {
        std::fill(next.begin(), next.end(), 0.0);
        for (StateId s = 0; s < a.num_states(); ++s) {
            double m = cur[s];
            if (m == 0.0) continue;
            if (absorb_goals && a.is_goal(s)) {
                next[s] += m;
                continue;
            }
            if (a.row_empty(s, act[s])) {
                next[s] += m;  // no row: stay put
                continue;
            }
            for (const Transition* t = a.row_begin(s, act[s]); t != a.row_end(s, act[s]); ++t)
                next[t->to] += m * t->prob;
        }
        cur.swap(next);
    }
    return TransitionDistribution{std::move(cur), n};
}

double discounted_step_cost(int k, double gamma) {
    if (k < 0) throw AnyplanError("discounted_step_cost: k must be >= 0");
    if (gamma == 1.0) return -static_cast<double>(k);
    double acc = 0.0, g = 1.0;
    for (int i = 0; i < k; ++i) {
        acc += g;
        g *= gamma;
    }
    return -acc;
}

}  // namespace anyplan
