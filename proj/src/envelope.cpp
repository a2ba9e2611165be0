#include "anyplan/envelope.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace anyplan {

Envelope::Envelope(const std::vector<StateId>& members) {
    for (StateId s : members) insert(s);
}

bool Envelope::insert(StateId s) {
    if (index_.count(s)) return false;
    index_[s] = static_cast<int>(members_.size());
    members_.push_back(s);
    return true;
}

bool Envelope::erase(StateId s) {
    auto it = index_.find(s);
    if (it == index_.end()) return false;
    members_.erase(members_.begin() + it->second);
    reindex();
    return true;
}

void Envelope::reindex() {
    index_.clear();
    for (std::size_t i = 0; i < members_.size(); ++i)
        index_[members_[i]] = static_cast<int>(i);
}

Policy RestrictedAutomaton::lift_policy(const std::vector<ActionId>& local_actions,
                                        ActionId reflex) const {
    std::vector<StateId> domain = envelope.members();
    std::vector<ActionId> actions(domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) actions[i] = local_actions[i];
    return Policy(std::move(domain), std::move(actions), reflex);
}

std::vector<ActionId> RestrictedAutomaton::project_policy(const Policy& policy) const {
    std::vector<ActionId> out(envelope.size() + 1, policy.reflex());
    for (std::size_t i = 0; i < envelope.size(); ++i)
        out[i] = policy.action_for(envelope.members()[i]);
    return out;
}

double RestrictedAutomaton::value_of_global(const ValueFunction& local_values,
                                            StateId global) const {
    int local = to_local(global);
    return local >= 0 ? local_values.values[local] : local_values.values[out_id];
}

RestrictedAutomaton restrict_automaton(const StochasticAutomaton& base, const Envelope& envelope,
                                       double p_back, const std::vector<double>& reentry) {
    if (envelope.empty()) throw AnyplanError("restrict: envelope must be non-empty");
    if (p_back < 0.0 || p_back >= 1.0) throw AnyplanError("restrict: p_back must be in [0,1)");
    for (StateId s : envelope.members())
        if (s < 0 || s >= base.num_states())
            throw AnyplanError("restrict: envelope member " + std::to_string(s) +
                               " not in base automaton");

    RestrictedAutomaton r;
    r.base = &base;
    r.envelope = envelope;
    r.p_back = p_back;
    r.reentry = reentry;
    const StateId e = static_cast<StateId>(envelope.size());
    r.out_id = e;
    r.model = StochasticAutomaton(e + 1, base.num_actions());

    for (StateId i = 0; i < e; ++i) {
        StateId g = envelope.members()[i];
        for (ActionId a = 0; a < base.num_actions(); ++a) {
            if (base.row_empty(g, a)) {
                r.model.add_row(i, a, {});
                continue;
            }
            std::vector<Transition> row;
            double in_mass = 0.0;
            for (const Transition* t = base.row_begin(g, a); t != base.row_end(g, a); ++t) {
                int local = envelope.local_index(t->to);
                if (local >= 0) {
                    row.push_back({static_cast<StateId>(local), t->prob});
                    in_mass += t->prob;
                }
            }
            double out_mass = 1.0 - in_mass;  // exact complement
            if (out_mass > 0.0) row.push_back({r.out_id, out_mass});
            r.model.add_row(i, a, std::move(row));
        }
    }
    // OUT row: absorbing, or fall-back-in with mass p_back over the reentry
    // distribution (uniform when unspecified).
    for (ActionId a = 0; a < base.num_actions(); ++a) {
        std::vector<Transition> row;
        if (p_back > 0.0) {
            for (StateId i = 0; i < e; ++i) {
                double w = reentry.empty() ? 1.0 / static_cast<double>(e) : reentry[i];
                if (w > 0.0) row.push_back({i, p_back * w});
            }
        }
        row.push_back({r.out_id, 1.0 - p_back});
        r.model.add_row(r.out_id, a, std::move(row));
    }
    r.model.finalize();

    std::vector<StateId> goals;
    for (StateId i = 0; i < e; ++i)
        if (base.is_goal(envelope.members()[i])) goals.push_back(i);
    r.model.set_goal_states(std::move(goals));
    return r;
}

double out_value(double gamma) {
    if (gamma < 0.0 || gamma >= 1.0) throw AnyplanError("out_value: gamma must be in [0,1)");
    return -1.0 / (1.0 - gamma);
}

std::vector<StateId> fringe(const StochasticAutomaton& a, const Envelope& envelope,
                            const Policy& policy) {
    std::vector<char> seen(a.num_states(), 0);
    for (StateId x : envelope.members()) {
        ActionId act = policy.action_for(x);
        for (const Transition* t = a.row_begin(x, act); t != a.row_end(x, act); ++t)
            if (t->prob > 0.0 && !envelope.contains(t->to)) seen[t->to] = 1;
    }
    std::vector<StateId> out;
    for (StateId s = 0; s < a.num_states(); ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

std::vector<StateId> FallOutAnalysis::ranked() const {
    std::vector<std::size_t> idx(fringe_states.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        if (first_exit[i] != first_exit[j]) return first_exit[i] > first_exit[j];
        return fringe_states[i] < fringe_states[j];
    });
    std::vector<StateId> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = fringe_states[idx[i]];
    return out;
}

FallOutAnalysis falling_out_distribution(const StochasticAutomaton& a, const Envelope& envelope,
                                         const Policy& policy, StateId start, double tolerance,
                                         int max_sweeps) {
    if (!envelope.contains(start))
        throw AnyplanError("falling_out_distribution: start must be inside the envelope");
    FallOutAnalysis res;
    res.fringe_states = fringe(a, envelope, policy);
    std::vector<double> exit_mass(a.num_states(), 0.0);
    std::vector<double> cur(a.num_states(), 0.0), next(a.num_states());
    cur[start] = 1.0;
    double goal_absorbed = 0.0;
    double transient = a.is_goal(start) ? 0.0 : 1.0;
    if (a.is_goal(start)) goal_absorbed = 1.0;

    for (int sweep = 0; sweep < max_sweeps && transient > tolerance; ++sweep) {
        std::fill(next.begin(), next.end(), 0.0);
        for (StateId s : envelope.members()) {
            double m = cur[s];
            if (m == 0.0 || a.is_goal(s)) continue;
            ActionId act = policy.action_for(s);
            if (a.row_empty(s, act)) {
                next[s] += m;
                continue;
            }
            for (const Transition* t = a.row_begin(s, act); t != a.row_end(s, act); ++t) {
                if (!envelope.contains(t->to)) {
                    exit_mass[t->to] += m * t->prob;
                } else if (a.is_goal(t->to)) {
                    goal_absorbed += m * t->prob;
                } else {
                    next[t->to] += m * t->prob;
                }
            }
        }
        cur.swap(next);
        transient = 0.0;
        for (StateId s : envelope.members())
            if (!a.is_goal(s)) transient += cur[s];
    }
    res.first_exit.resize(res.fringe_states.size());
    for (std::size_t i = 0; i < res.fringe_states.size(); ++i)
        res.first_exit[i] = exit_mass[res.fringe_states[i]];
    res.residual = transient + goal_absorbed;
    return res;
}

namespace {

struct PathResult {
    std::vector<StateId> path;
    std::size_t expanded = 0;
};

PathResult find_path_counted(const StochasticAutomaton& a, StateId start,
                             const std::vector<StateId>& goal_states) {
    if (start < 0 || start >= a.num_states()) throw AnyplanError("find_path: invalid start");
    std::vector<char> is_goal(a.num_states(), 0);
    for (StateId g : goal_states) is_goal[g] = 1;
    PathResult res;
    if (is_goal[start]) {
        res.path = {start};
        return res;
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(a.num_states(), inf);
    std::vector<StateId> parent(a.num_states(), kNoState);
    std::vector<char> done(a.num_states(), 0);
    using Item = std::pair<double, StateId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[start] = 0.0;
    pq.push({0.0, start});
    StateId reached = kNoState;
    while (!pq.empty()) {
        auto [d, s] = pq.top();
        pq.pop();
        if (done[s]) continue;
        done[s] = 1;
        ++res.expanded;
        if (is_goal[s]) {
            reached = s;
            break;
        }
        // best transition probability per successor over all actions
        std::vector<std::pair<StateId, double>> best;
        for (ActionId act = 0; act < a.num_actions(); ++act) {
            for (const Transition* t = a.row_begin(s, act); t != a.row_end(s, act); ++t) {
                if (t->prob <= 0.0 || t->to == s) continue;
                bool found = false;
                for (auto& [to, p] : best)
                    if (to == t->to) {
                        if (t->prob > p) p = t->prob;
                        found = true;
                        break;
                    }
                if (!found) best.push_back({t->to, t->prob});
            }
        }
        for (auto [to, p] : best) {
            if (done[to]) continue;
            double nd = d - std::log(p);
            if (nd < dist[to]) {
                dist[to] = nd;
                parent[to] = s;
                pq.push({nd, to});
            }
        }
    }
    if (reached == kNoState) throw AnyplanError("find_path: no goal state is reachable");
    std::vector<StateId> rev;
    for (StateId s = reached; s != kNoState; s = parent[s]) rev.push_back(s);
    res.path.assign(rev.rbegin(), rev.rend());
    return res;
}

}  // namespace

std::vector<StateId> find_path(const StochasticAutomaton& a, StateId start,
                               const std::vector<StateId>& goal_states) {
    return find_path_counted(a, start, goal_states).path;
}

Envelope extend_robustify(const StochasticAutomaton& a, const Envelope& envelope,
                          const Policy& policy, StateId start, int n, double tolerance) {
    if (n < 1) throw AnyplanError("extend_robustify: n must be >= 1");
    Envelope out = envelope;
    FallOutAnalysis fo = falling_out_distribution(a, envelope, policy, start, tolerance);
    std::vector<StateId> ranked = fo.ranked();
    for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < n; ++i)
        out.insert(ranked[i]);
    return out;
}

std::vector<double> discounted_occupancy(const StochasticAutomaton& a, const Envelope& envelope,
                                         const Policy& policy, StateId start, double gamma,
                                         double tolerance, int max_sweeps) {
    std::vector<double> occ(a.num_states(), 0.0);
    std::vector<double> cur(a.num_states(), 0.0), next(a.num_states());
    cur[start] = 1.0;
    double weight = 1.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double transient = 0.0;
        for (StateId s : envelope.members()) {
            if (!a.is_goal(s)) transient += cur[s];
        }
        if (weight * transient <= tolerance) break;
        for (StateId s : envelope.members()) occ[s] += weight * cur[s];
        std::fill(next.begin(), next.end(), 0.0);
        for (StateId s : envelope.members()) {
            double m = cur[s];
            if (m == 0.0 || a.is_goal(s)) continue;
            ActionId act = policy.action_for(s);
            if (a.row_empty(s, act)) {
                next[s] += m;
                continue;
            }
            for (const Transition* t = a.row_begin(s, act); t != a.row_end(s, act); ++t)
                if (envelope.contains(t->to) && !a.is_goal(t->to)) next[t->to] += m * t->prob;
        }
        cur.swap(next);
        weight *= gamma;
    }
    return occ;
}

Envelope prune(const StochasticAutomaton& a, const Envelope& envelope, const Policy& policy,
               const ValueFunction& envelope_values, StateId current_state, int n, double gamma,
               const std::vector<StateId>& protected_states, double tolerance) {
    int cur_local = envelope.local_index(current_state);
    if (cur_local < 0) throw AnyplanError("prune: current_state must be inside the envelope");
    double v_cur = envelope_values.values[cur_local];
    std::vector<char> keep(a.num_states(), 0);
    keep[current_state] = 1;
    for (StateId s : protected_states)
        if (s >= 0 && s < a.num_states()) keep[s] = 1;

    std::vector<double> occ =
        discounted_occupancy(a, envelope, policy, current_state, gamma, tolerance);
    std::vector<StateId> candidates;
    for (std::size_t i = 0; i < envelope.size(); ++i) {
        StateId s = envelope.members()[i];
        if (keep[s] || a.is_goal(s)) continue;
        if (envelope_values.values[i] < v_cur) candidates.push_back(s);
    }
    std::sort(candidates.begin(), candidates.end(), [&](StateId x, StateId y) {
        if (occ[x] != occ[y]) return occ[x] < occ[y];
        return x < y;
    });
    Envelope out = envelope;
    for (std::size_t i = 0; i < candidates.size() && static_cast<int>(i) < n; ++i)
        out.erase(candidates[i]);
    return out;
}

DeliberationStrategy parse_strategy(const std::string& label) {
    DeliberationStrategy s;
    s.label = label;
    std::istringstream is(label);
    std::string tok;
    while (is >> tok) {
        if (tok == "FP") {
            s.steps.push_back({StepKind::FindPath, 0});
        } else if (tok == "O") {
            s.steps.push_back({StepKind::Optimize, 0});
        } else if (tok == "EG") {
            s.steps.push_back({StepKind::ExtendPathToGoal, 0});
        } else if (tok == "EB") {
            s.steps.push_back({StepKind::ExtendPathBack, 0});
        } else if ((tok.size() > 3) && (tok[0] == 'R' || tok[0] == 'P') && tok[1] == '[' &&
                   tok.back() == ']') {
            int n = 0;
            try {
                n = std::stoi(tok.substr(2, tok.size() - 3));
            } catch (const std::exception&) {
                throw AnyplanError("bad strategy token: " + tok);
            }
            if (n < 1) throw AnyplanError("bad strategy count in token: " + tok);
            s.steps.push_back({tok[0] == 'R' ? StepKind::Robustify : StepKind::Prune, n});
        } else {
            throw AnyplanError("bad strategy token: " + tok);
        }
    }
    if (s.steps.empty()) throw AnyplanError("empty strategy label");
    return s;
}

std::string format_strategy(const std::vector<StrategyStep>& steps) {
    std::string out;
    for (const StrategyStep& st : steps) {
        if (!out.empty()) out += ' ';
        switch (st.kind) {
            case StepKind::FindPath: out += "FP"; break;
            case StepKind::Optimize: out += "O"; break;
            case StepKind::ExtendPathToGoal: out += "EG"; break;
            case StepKind::ExtendPathBack: out += "EB"; break;
            case StepKind::Robustify: out += "R[" + std::to_string(st.n) + "]"; break;
            case StepKind::Prune: out += "P[" + std::to_string(st.n) + "]"; break;
        }
    }
    return out;
}

StrategyOutcome apply_strategy(const DeliberationStrategy& strategy, const StrategyContext& ctx,
                               const Envelope& envelope, const Policy& policy,
                               StateId current_state) {
    const StochasticAutomaton& a = *ctx.automaton;
    StrategyOutcome out;
    out.envelope = envelope;
    out.policy = policy;
    bool values_fresh = false;

    auto evaluate_current = [&]() {
        out.restricted = restrict_automaton(a, out.envelope, ctx.p_back);
        std::vector<ActionId> local = out.restricted.project_policy(out.policy);
        std::vector<StateId> dom(local.size());
        for (std::size_t i = 0; i < local.size(); ++i) dom[i] = static_cast<StateId>(i);
        Policy local_policy(std::move(dom), std::move(local), ctx.reflex);
        out.values = policy_evaluate(out.restricted.model, local_policy, ctx.solver);
        out.values.provenance = ValueProvenance::RestrictedEstimate;
        values_fresh = true;
    };

    for (const StrategyStep& step : strategy.steps) {
        switch (step.kind) {
            case StepKind::FindPath: {
                if (!out.envelope.contains(current_state)) {
                    PathResult pr = find_path_counted(a, current_state, a.goal_states());
                    std::size_t added = 0;
                    for (StateId s : pr.path)
                        if (out.envelope.insert(s)) ++added;
                    out.ticks += ctx.costs.c_fp * static_cast<Ticks>(pr.expanded) +
                                 ctx.costs.c_add * static_cast<Ticks>(added);
                    values_fresh = false;
                }
                break;
            }
            case StepKind::Robustify: {
                Envelope grown = extend_robustify(a, out.envelope, out.policy, current_state,
                                                  step.n, ctx.solver.eval_tolerance);
                std::size_t added = grown.size() - out.envelope.size();
                out.ticks += ctx.costs.c_alt * static_cast<Ticks>(out.envelope.size()) +
                             ctx.costs.c_add * static_cast<Ticks>(added);
                if (added > 0) values_fresh = false;
                out.envelope = std::move(grown);
                break;
            }
            case StepKind::Prune: {
                if (!values_fresh) evaluate_current();
                Envelope shrunk =
                    prune(a, out.envelope, out.policy, out.values, current_state, step.n,
                          ctx.solver.gamma, ctx.protected_states, ctx.solver.eval_tolerance);
                std::size_t removed = out.envelope.size() - shrunk.size();
                out.ticks += ctx.costs.c_alt * static_cast<Ticks>(out.envelope.size()) +
                             ctx.costs.c_add * static_cast<Ticks>(removed);
                if (removed > 0) values_fresh = false;
                out.envelope = std::move(shrunk);
                break;
            }
            case StepKind::ExtendPathToGoal:
            case StepKind::ExtendPathBack: {
                FallOutAnalysis fo = falling_out_distribution(a, out.envelope, out.policy,
                                                              current_state,
                                                              ctx.solver.eval_tolerance);
                out.ticks += ctx.costs.c_alt * static_cast<Ticks>(out.envelope.size());
                std::vector<StateId> ranked = fo.ranked();
                if (ranked.empty()) break;
                StateId from = ranked.front();
                const std::vector<StateId>& targets = (step.kind == StepKind::ExtendPathToGoal)
                                                          ? a.goal_states()
                                                          : out.envelope.members();
                PathResult pr = find_path_counted(a, from, targets);
                std::size_t added = 0;
                for (StateId s : pr.path)
                    if (out.envelope.insert(s)) ++added;
                out.ticks += ctx.costs.c_fp * static_cast<Ticks>(pr.expanded) +
                             ctx.costs.c_add * static_cast<Ticks>(added);
                if (added > 0) values_fresh = false;
                break;
            }
            case StepKind::Optimize: {
                out.restricted = restrict_automaton(a, out.envelope, ctx.p_back);
                std::vector<ActionId> local = out.restricted.project_policy(out.policy);
                std::vector<StateId> dom(local.size());
                for (std::size_t i = 0; i < local.size(); ++i) dom[i] = static_cast<StateId>(i);
                Policy local_policy(std::move(dom), local, ctx.reflex);
                PolicyIterationResult pi =
                    policy_iteration(out.restricted.model, local_policy, ctx.solver, -1,
                                     pg_round_cost(out.envelope.size(), ctx.costs));
                out.ticks += pi.ticks_spent;
                std::vector<ActionId> dense = pi.policy.as_dense(out.restricted.model.num_states());
                out.policy = out.restricted.lift_policy(dense, ctx.reflex);
                out.values = pi.value;
                out.values.provenance = ValueProvenance::RestrictedEstimate;
                values_fresh = true;
                break;
            }
        }
    }
    if (!values_fresh) evaluate_current();
    return out;
}

}  // namespace anyplan
