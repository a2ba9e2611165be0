#include "anyplan/recurrent.hpp"

#include <cmath>

namespace anyplan {

namespace {

// Push the distribution one step under `policy`, goals absorbing. Returns the
// goal mass of the input distribution (reward bookkeeping happens on entry).
void push_once(const StochasticAutomaton& a, const std::vector<ActionId>& act,
               const std::vector<double>& cur, std::vector<double>& next) {
    std::fill(next.begin(), next.end(), 0.0);
    for (StateId s = 0; s < a.num_states(); ++s) {
        double m = cur[s];
        if (m == 0.0) continue;
        if (a.is_goal(s) || a.row_empty(s, act[s])) {
            next[s] += m;
            continue;
        }
        for (const Transition* t = a.row_begin(s, act[s]); t != a.row_end(s, act[s]); ++t)
            next[t->to] += m * t->prob;
    }
}

double goal_mass(const StochasticAutomaton& a, const std::vector<double>& d) {
    double g = 0.0;
    for (StateId s : a.goal_states()) g += d[s];
    return g;
}

}  // namespace

double eiv_sample(const StochasticAutomaton& a, const Policy& pi, StateId x, int k, double gamma,
                  const std::vector<double>& v_old, const std::vector<double>& v_new) {
    if (k < 0) throw AnyplanError("eiv_sample: k must be >= 0");
    std::vector<ActionId> act = pi.as_dense(a.num_states());
    std::vector<double> cur(a.num_states(), 0.0), next(a.num_states());
    cur[x] = 1.0;
    double value = 0.0, g = 1.0;
    for (int i = 0; i < k; ++i) {
        value += g * -(1.0 - goal_mass(a, cur));  // -1 reward outside goals
        push_once(a, act, cur, next);
        cur.swap(next);
        g *= gamma;
    }
    double tail = 0.0;
    for (StateId s = 0; s < a.num_states(); ++s) tail += cur[s] * v_new[s];
    return (value + g * tail) - v_old[x];
}

double myopic_strategy_value(const StochasticAutomaton& a, const Policy& pi,
                             const Policy& improved, StateId x, int n, double gamma,
                             const std::vector<double>& v_star) {
    if (n < 1) throw AnyplanError("myopic_strategy_value: n must be >= 1");
    std::vector<ActionId> act_pi = pi.as_dense(a.num_states());
    std::vector<ActionId> act_f = improved.as_dense(a.num_states());
    std::vector<double> cur(a.num_states(), 0.0), next(a.num_states());
    cur[x] = 1.0;
    double value = 0.0, g = 1.0;
    for (int i = 0; i < 2 * n; ++i) {
        value += g * -(1.0 - goal_mass(a, cur));
        push_once(a, i < n ? act_pi : act_f, cur, next);
        cur.swap(next);
        g *= gamma;
    }
    double tail = 0.0;
    for (StateId s = 0; s < a.num_states(); ++s) tail += cur[s] * v_star[s];
    return value + g * tail;
}

double fatness(std::size_t envelope_size, std::size_t fringe_size) {
    return static_cast<double>(envelope_size) /
           static_cast<double>(fringe_size == 0 ? 1 : fringe_size);
}

std::vector<DeliberationStrategy> standard_strategy_roster() {
    static const char* kLabels[24] = {
        "FP O",
        "FP R[10] O",
        "FP R[20] O",
        "FP R[50] O",
        "FP R[100] O",
        "FP P[10] O",
        "FP P[20] O",
        "FP P[50] O",
        "FP P[100] O",
        "FP R[10] P[10] O",
        "FP R[20] P[10] O",
        "FP R[50] P[20] O",
        "FP R[100] P[50] O",
        "FP P[10] R[20] O",
        "FP P[20] R[50] O",
        "FP P[50] R[100] O",
        "FP R[10] O P[10] O",
        "FP R[20] O P[10] O",
        "FP R[50] O P[50] O",
        "FP R[100] O P[50] O",
        "FP P[10] O R[10] O",
        "FP P[20] O R[20] O",
        "FP R[10] R[10] O",
        "FP R[50] R[50] O",
    };
    std::vector<DeliberationStrategy> roster;
    roster.reserve(24);
    for (const char* l : kLabels) roster.push_back(parse_strategy(l));
    return roster;
}

EIVTable::EIVTable(std::vector<std::vector<double>> feature_edges, std::size_t roster_size,
                   long min_count)
    : feature_edges_(std::move(feature_edges)), roster_size_(roster_size), min_count_(min_count) {
    if (feature_edges_.size() != kNumFeatures)
        throw AnyplanError("EIVTable: expected 4 feature edge lists");
    cells_.resize(static_cast<std::size_t>(num_cells()) * roster_size_);
    marginals_.resize(roster_size_);
}

int EIVTable::num_cells() const {
    int n = 1;
    for (int f = 0; f < kNumFeatures; ++f) n *= bins(f);
    return n;
}

int EIVTable::cell_index(const EIVFeatures& f) const {
    double vals[kNumFeatures] = {f.env_size, f.value, f.fatness, f.mdist};
    int idx = 0;
    for (int feat = 0; feat < kNumFeatures; ++feat) {
        int b = 0;
        const std::vector<double>& edges = feature_edges_[feat];
        while (b < static_cast<int>(edges.size()) && vals[feat] > edges[b]) ++b;
        idx = idx * bins(feat) + b;
    }
    return idx;
}

EIVCellStats& EIVTable::cell(int cell_idx, int strategy) {
    return cells_[static_cast<std::size_t>(cell_idx) * roster_size_ + strategy];
}
const EIVCellStats& EIVTable::cell(int cell_idx, int strategy) const {
    return cells_[static_cast<std::size_t>(cell_idx) * roster_size_ + strategy];
}

const EIVCellStats& EIVTable::resolve(const EIVFeatures& f, int strategy) const {
    const EIVCellStats& c = cell(cell_index(f), strategy);
    if (c.count >= min_count_) return c;
    return marginals_[strategy];
}

namespace {

std::vector<double> quantile_edges_of(std::vector<double> xs, int bins) {
    std::sort(xs.begin(), xs.end());
    std::vector<double> edges;
    for (int b = 1; b < bins; ++b) {
        std::size_t idx = xs.size() * b / bins;
        if (idx >= xs.size()) idx = xs.size() - 1;
        double e = xs[idx];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    return edges;
}

}  // namespace

EIVTable build_eiv_table(const std::vector<EIVSample>& samples,
                         const std::vector<DeliberationStrategy>& roster,
                         const EIVBinningConfig& binning) {
    if (samples.empty()) throw AnyplanError("build_eiv_table: no samples");
    std::vector<std::vector<double>> edges(EIVTable::kNumFeatures);
    for (int f = 0; f < EIVTable::kNumFeatures; ++f) {
        std::vector<double> xs;
        xs.reserve(samples.size());
        for (const EIVSample& s : samples) {
            const double v[4] = {s.features.env_size, s.features.value, s.features.fatness,
                                 s.features.mdist};
            xs.push_back(v[f]);
        }
        edges[f] = quantile_edges_of(std::move(xs), binning.bins_per_feature);
    }
    EIVTable table(std::move(edges), roster.size(), binning.min_count);
    struct Acc {
        double sum = 0, sumsq = 0;
        long n = 0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(table.num_cells()) * roster.size());
    std::vector<Acc> marg(roster.size());
    for (const EIVSample& s : samples) {
        double per_step = s.improvement / static_cast<double>(std::max(1, s.k_steps));
        std::size_t i =
            static_cast<std::size_t>(table.cell_index(s.features)) * roster.size() +
            s.strategy_index;
        acc[i].sum += per_step;
        acc[i].sumsq += per_step * per_step;
        acc[i].n += 1;
        marg[s.strategy_index].sum += per_step;
        marg[s.strategy_index].sumsq += per_step * per_step;
        marg[s.strategy_index].n += 1;
    }
    auto fill = [](EIVCellStats& c, const Acc& a) {
        c.count = a.n;
        if (a.n > 0) {
            c.mean = a.sum / a.n;
            c.var = a.n > 1 ? std::max(0.0, (a.sumsq - a.sum * a.sum / a.n) / (a.n - 1)) : 0.0;
        }
    };
    for (int ci = 0; ci < table.num_cells(); ++ci)
        for (std::size_t st = 0; st < roster.size(); ++st)
            fill(table.cell(ci, static_cast<int>(st)),
                 acc[static_cast<std::size_t>(ci) * roster.size() + st]);
    for (std::size_t st = 0; st < roster.size(); ++st)
        fill(table.marginal(static_cast<int>(st)), marg[st]);
    return table;
}

int lookup_best_strategy(const EIVTable& table, const EIVFeatures& features) {
    int best = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t st = 0; st < table.roster_size(); ++st) {
        const EIVCellStats& c = table.resolve(features, static_cast<int>(st));
        if (c.count > 0 && c.mean > best_mean) {
            best_mean = c.mean;
            best = static_cast<int>(st);
        }
    }
    return best;
}

namespace {

struct Simulation {
    const StochasticAutomaton& a;
    const RecurrentConfig& cfg;
    Rng exec_rng;   // dedicated stream: executor randomness is independent of
                    // any deliberation randomness, so matched seeds agree
                    // across schedulers until policies diverge
    RunTrace trace;
    StateId x;
    Policy active;  // what the executor currently holds
    int policy_id = 0;

    Simulation(const StochasticAutomaton& a_, const RecurrentConfig& cfg_, StateId start,
               std::uint64_t seed)
        : a(a_), cfg(cfg_), exec_rng(Rng(seed).fork(1)), x(start),
          active(Policy::reflex_only(cfg_.reflex)) {}

    bool at_goal() const { return a.is_goal(x); }
    bool capped() const { return trace.steps_taken >= cfg.coupling.step_cap; }
    bool done() const { return at_goal() || capped(); }

    // Advance the executor by up to m steps; stops early at goal or cap.
    // Returns the number of steps actually taken.
    int advance(int m) {
        int taken = 0;
        while (taken < m && !done()) {
            ActionId act = active.action_for(x);
            bool reflexive = !active.in_domain(x);
            StateId nxt = x;
            if (!a.row_empty(x, act)) {
                double u = exec_rng.uniform_real();
                double c = 0.0;
                for (const Transition* t = a.row_begin(x, act); t != a.row_end(x, act); ++t) {
                    c += t->prob;
                    if (u < c) {
                        nxt = t->to;
                        break;
                    }
                }
            }
            trace.steps.push_back({trace.steps_taken, x, act, reflexive, policy_id});
            x = nxt;
            ++trace.steps_taken;
            ++taken;
        }
        return taken;
    }

    void deliver(Policy p) {
        active = std::move(p);
        ++policy_id;
    }
};

int interval_steps(const CouplingConfig& c, Ticks k_ticks) {
    Ticks t = c.mode == CouplingMode::FixedTicks ? c.fixed_ticks : k_ticks;
    double steps = std::ceil(static_cast<double>(t) / c.ticks_per_step);
    return std::max(1, static_cast<int>(steps));
}

}  // namespace

RunTrace run_recurrent(const StochasticAutomaton& a, StateId start, SchedulerSpec scheduler,
                       const RecurrentConfig& cfg, std::uint64_t seed) {
    Simulation sim(a, cfg, start, seed);
    Rng plan_rng = Rng(seed).fork(2);
    const std::vector<DeliberationStrategy> roster = standard_strategy_roster();

    if (scheduler.kind == SchedulerKind::Iter || scheduler.kind == SchedulerKind::Whole) {
        const Ticks round_cost =
            pg_round_cost(static_cast<std::size_t>(a.num_states()), cfg.costs);
        Policy work = Policy::reflex_only(cfg.reflex);
        ValueFunction value = policy_evaluate(a, work, cfg.solver);
        bool converged = false;
        Ticks pending = 0;  // WHOLE accumulates until convergence
        while (!sim.done()) {
            if (converged) {
                sim.advance(1);
                continue;
            }
            Policy improved = policy_improve(a, value, cfg.solver);
            ValueFunction v2 = policy_evaluate(a, improved, cfg.solver);
            bool changed = improved.as_dense(a.num_states()) != work.as_dense(a.num_states());
            work = std::move(improved);
            value = std::move(v2);
            if (!changed) converged = true;
            pending += round_cost;
            if (scheduler.kind == SchedulerKind::Iter || converged) {
                int m = interval_steps(cfg.coupling, pending);
                int k = sim.advance(m);
                sim.trace.invocations.push_back({"PI-ROUND", pending, k,
                                                 static_cast<std::size_t>(a.num_states()),
                                                 static_cast<std::size_t>(a.num_states()),
                                                 value.values[start], value.values[start]});
                sim.deliver(work);
                pending = 0;
            }
        }
        sim.trace.reached_goal = sim.at_goal();
        sim.trace.capped = !sim.trace.reached_goal;
        return sim.trace;
    }

    // envelope-based schedulers (Lookup / Fixed)
    StrategyContext ctx{&a, cfg.solver, cfg.costs, cfg.p_back, cfg.reflex, {start}};
    DeliberationStrategy fixed;
    if (scheduler.kind == SchedulerKind::Fixed) fixed = parse_strategy(scheduler.fixed_label);
    Envelope env;
    Policy plan_policy = Policy::reflex_only(cfg.reflex);
    RestrictedAutomaton restricted;
    ValueFunction values;
    bool have_values = false;
    StateId x_known = start;

    auto features_at = [&](StateId s) {
        EIVFeatures f;
        f.env_size = static_cast<double>(env.size());
        f.value = have_values ? restricted.value_of_global(values, s) : out_value(cfg.solver.gamma);
        std::size_t fr = env.empty() ? 0 : fringe(a, env, plan_policy).size();
        f.fatness = fatness(env.size(), fr);
        if (cfg.map)
            f.mdist = grid::manhattan_distance(cfg.map->location_of(s), cfg.goal);
        return f;
    };

    while (!sim.done()) {
        if (cfg.coupling.mode == CouplingMode::OnFallout && sim.policy_id > 0 &&
            sim.active.in_domain(sim.x)) {
            sim.advance(1);
            continue;
        }
        const DeliberationStrategy* strat;
        if (scheduler.kind == SchedulerKind::Fixed) {
            strat = &fixed;
        } else if (scheduler.table && scheduler.table->roster_size() == roster.size()) {
            strat = &roster[lookup_best_strategy(*scheduler.table, features_at(x_known))];
        } else {
            strat = &roster[plan_rng.uniform_index(roster.size())];  // empty-table fallback
        }
        double v_before = have_values ? restricted.value_of_global(values, x_known)
                                      : out_value(cfg.solver.gamma);
        std::size_t env_before = env.size();
        StrategyOutcome out;
        try {
            out = apply_strategy(*strat, ctx, env, plan_policy, x_known);
        } catch (const AnyplanError&) {
            // goal unreachable from x_known (disconnected map); execute reflexively
            sim.advance(1);
            continue;
        }
        int m = interval_steps(cfg.coupling, std::max<Ticks>(1, out.ticks));
        int k = sim.advance(m);
        env = out.envelope;
        plan_policy = out.policy;
        restricted = std::move(out.restricted);
        values = std::move(out.values);
        have_values = true;
        double v_after = restricted.value_of_global(values, x_known);
        sim.trace.invocations.push_back(
            {strat->label, out.ticks, k, env_before, env.size(), v_before, v_after});
        sim.deliver(plan_policy);
        x_known = sim.x;
    }
    sim.trace.reached_goal = sim.at_goal();
    sim.trace.capped = !sim.trace.reached_goal;
    return sim.trace;
}

std::vector<EIVSample> gather_eiv_statistics(const grid::GridMap& map,
                                             const std::vector<DeliberationStrategy>& roster,
                                             const EIVGatherConfig& cfg, std::uint64_t seed) {
    std::vector<EIVSample> samples;
    Rng master(seed);
    for (int run = 0; run < cfg.run_budget; ++run) {
        Rng task_rng = master.fork(static_cast<std::uint64_t>(run) + 1);
        grid::Task task;
        try {
            task = grid::random_task(map, task_rng, cfg.max_distance_fraction);
        } catch (const AnyplanError&) {
            break;
        }
        StochasticAutomaton a = grid::build_task_automaton(map, task.goal, cfg.p_success);
        const RecurrentConfig& rc = cfg.recurrent;
        Simulation sim(a, rc, task.start, task_rng.next_u64());
        Rng strat_rng = task_rng.fork(7);
        StrategyContext ctx{&a, rc.solver, rc.costs, rc.p_back, rc.reflex, {task.start}};
        Envelope env;
        Policy plan_policy = Policy::reflex_only(rc.reflex);
        RestrictedAutomaton restricted;
        ValueFunction values;
        bool have_values = false;
        StateId x_known = task.start;
        auto dense_values = [&]() {
            std::vector<double> v(a.num_states(), out_value(rc.solver.gamma));
            if (have_values)
                for (StateId s = 0; s < a.num_states(); ++s)
                    v[s] = restricted.value_of_global(values, s);
            return v;
        };
        while (!sim.done()) {
            int si = static_cast<int>(strat_rng.uniform_index(roster.size()));
            std::vector<double> v_old = dense_values();
            EIVFeatures f;
            f.env_size = static_cast<double>(env.size());
            f.value = v_old[x_known];
            f.fatness = fatness(env.size(), env.empty() ? 0 : fringe(a, env, plan_policy).size());
            f.mdist = grid::manhattan_distance(map.location_of(x_known), task.goal);
            Policy pi_old = plan_policy;
            StrategyOutcome out;
            try {
                out = apply_strategy(roster[si], ctx, env, plan_policy, x_known);
            } catch (const AnyplanError&) {
                sim.advance(1);
                continue;
            }
            int m = interval_steps(rc.coupling, std::max<Ticks>(1, out.ticks));
            int k = sim.advance(m);
            env = out.envelope;
            plan_policy = out.policy;
            restricted = std::move(out.restricted);
            values = std::move(out.values);
            have_values = true;
            std::vector<double> v_new = dense_values();
            double eiv = eiv_sample(a, pi_old, x_known, k, rc.solver.gamma, v_old, v_new);
            samples.push_back({f, si, k, out.ticks, eiv});
            sim.deliver(plan_policy);
            x_known = sim.x;
        }
    }
    return samples;
}

}  // namespace anyplan
