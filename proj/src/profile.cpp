#include "anyplan/profile.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

namespace anyplan {

const std::vector<int> kDefaultNGrid = {1, 2, 5, 10, 20, 50};

ProfileTable::ProfileTable(std::vector<double> size_edges, std::vector<double> value_edges,
                           std::vector<int> n_grid, long min_count)
    : size_edges_(std::move(size_edges)),
      value_edges_(std::move(value_edges)),
      n_grid_(std::move(n_grid)),
      min_count_(min_count) {
    cells_.resize(static_cast<std::size_t>(size_bins()) * value_bins() * n_grid_.size());
}

int ProfileTable::size_bin(double env_size) const {
    int b = 0;
    while (b < static_cast<int>(size_edges_.size()) && env_size > size_edges_[b]) ++b;
    return b;
}

int ProfileTable::value_bin(double v) const {
    int b = 0;
    while (b < static_cast<int>(value_edges_.size()) && v > value_edges_[b]) ++b;
    return b;
}

ProfileCellStats& ProfileTable::cell(int sb, int vb, int ni) {
    return cells_[(static_cast<std::size_t>(sb) * value_bins() + vb) * n_grid_.size() + ni];
}
const ProfileCellStats& ProfileTable::cell(int sb, int vb, int ni) const {
    return cells_[(static_cast<std::size_t>(sb) * value_bins() + vb) * n_grid_.size() + ni];
}

bool ProfileTable::any_populated() const {
    for (const ProfileCellStats& c : cells_)
        if (!c.sparse) return true;
    return false;
}

std::optional<std::pair<int, int>> ProfileTable::resolve(double env_size, double v) const {
    if (!any_populated()) return std::nullopt;
    int sb = size_bin(env_size), vb = value_bin(v);
    auto populated = [&](int s, int val) {
        for (std::size_t ni = 0; ni < n_grid_.size(); ++ni)
            if (!cell(s, val, static_cast<int>(ni)).sparse) return true;
        return false;
    };
    if (populated(sb, vb)) return std::make_pair(sb, vb);
    // nearest populated cell by L1 bin distance, ties by (size bin, value bin)
    int best_s = -1, best_v = -1, best_d = INT_MAX;
    for (int s = 0; s < size_bins(); ++s)
        for (int val = 0; val < value_bins(); ++val) {
            if (!populated(s, val)) continue;
            int d = std::abs(s - sb) + std::abs(val - vb);
            if (d < best_d) {
                best_d = d;
                best_s = s;
                best_v = val;
            }
        }
    return std::make_pair(best_s, best_v);
}

namespace {

// Build the initial envelope and value estimate for a task: findpath then
// optimize. Returns false if the goal is unreachable.
bool initial_outcome(const StochasticAutomaton& a, StateId start, const StrategyContext& ctx,
                     StrategyOutcome& out) {
    static const DeliberationStrategy kInit = parse_strategy("FP O");
    try {
        out = apply_strategy(kInit, ctx, Envelope{}, Policy::reflex_only(ctx.reflex), start);
    } catch (const AnyplanError&) {
        return false;
    }
    return true;
}

// One-step successor closure under every action (catch-all extension frontier
// once the fall-out ranking and the precomputed trajectory are exhausted).
std::vector<StateId> action_fringe(const StochasticAutomaton& a, const Envelope& env) {
    std::vector<char> seen(a.num_states(), 0);
    for (StateId x : env.members())
        for (ActionId act = 0; act < a.num_actions(); ++act)
            for (const Transition* t = a.row_begin(x, act); t != a.row_end(x, act); ++t)
                if (t->prob > 0.0 && !env.contains(t->to)) seen[t->to] = 1;
    std::vector<StateId> out;
    for (StateId s = 0; s < a.num_states(); ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

}  // namespace

std::vector<ProfileSample> gather_profile_statistics(const grid::GridMap& map,
                                                     const GatherConfig& cfg,
                                                     std::uint64_t seed) {
    std::vector<ProfileSample> samples;
    if (cfg.sample_budget < 1) return samples;
    static const DeliberationStrategy kOpt = parse_strategy("O");
    Rng master(seed);
    std::uint64_t task_index = 0;
    int fruitless = 0;  // consecutive tasks contributing nothing
    while (static_cast<int>(samples.size()) < cfg.sample_budget && fruitless < 1000) {
        Rng task_rng = master.fork(++task_index);
        grid::Task task;
        try {
            task = grid::random_task(map, task_rng, cfg.max_distance_fraction);
        } catch (const AnyplanError&) {
            break;  // map admits no tasks at all
        }
        StochasticAutomaton a = grid::build_task_automaton(map, task.goal, cfg.p_success);
        StrategyContext ctx{&a, cfg.solver, cfg.costs, 0.0, grid::Stay, {task.start}};
        std::vector<StateId> path;
        try {
            path = find_path(a, task.start, a.goal_states());
        } catch (const AnyplanError&) {
            ++fruitless;
            continue;  // unreachable goal: skip the task
        }
        // Start from the bare initial state so rounds measure real improvement
        // as the envelope grows toward the goal.
        Envelope env;
        env.insert(task.start);
        StrategyOutcome cur =
            apply_strategy(kOpt, ctx, env, Policy::reflex_only(ctx.reflex), task.start);

        const std::size_t before_task = samples.size();
        int frontier_rounds = 0;  // rounds past the end of the trajectory
        for (int round = 0; round < cfg.max_rounds_per_task; ++round) {
            if (static_cast<int>(samples.size()) >= cfg.sample_budget) break;
            double v_before = cur.restricted.value_of_global(cur.values, task.start);
            int env_size = static_cast<int>(cur.envelope.size());

            // candidate additions, ranked: falling-out states first, then the
            // unused remainder of the trajectory, then the action frontier
            std::vector<StateId> candidates;
            FallOutAnalysis fo = falling_out_distribution(a, cur.envelope, cur.policy, task.start);
            for (StateId s : fo.ranked()) candidates.push_back(s);
            for (StateId s : path)
                if (!cur.envelope.contains(s) &&
                    std::find(candidates.begin(), candidates.end(), s) == candidates.end())
                    candidates.push_back(s);
            if (candidates.empty()) {
                if (++frontier_rounds > 2) break;  // a couple of saturated rounds is enough
                for (StateId s : action_fringe(a, cur.envelope)) candidates.push_back(s);
                if (candidates.empty()) break;  // envelope closed
            }

            // counterfactual branches share the base envelope, so the top-n
            // extensions are nested and per-sample curves are monotone in n
            std::vector<StrategyOutcome> branches;
            for (int n : cfg.n_grid) {
                Envelope grown = cur.envelope;
                Ticks added = 0;
                for (StateId s : candidates) {
                    if (added >= n) break;
                    if (grown.insert(s)) ++added;
                }
                StrategyOutcome o = apply_strategy(kOpt, ctx, grown, cur.policy, task.start);
                o.ticks += cfg.costs.c_alt * static_cast<Ticks>(cur.envelope.size()) +
                           cfg.costs.c_add * added;
                double v_after = o.restricted.value_of_global(o.values, task.start);
                samples.push_back({env_size, v_before, n, v_after - v_before, o.ticks});
                branches.push_back(std::move(o));
            }
            // commit a random branch so later rounds see varied envelope sizes
            cur = std::move(branches[task_rng.uniform_index(branches.size())]);
        }
        fruitless = samples.size() == before_task ? fruitless + 1 : 0;
    }
    if (static_cast<int>(samples.size()) > cfg.sample_budget) samples.resize(cfg.sample_budget);
    return samples;
}

namespace {

std::vector<double> quantile_edges(std::vector<double> xs, int bins) {
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

ProfileTable build_profile_table(const std::vector<ProfileSample>& samples,
                                 const ProfileBinningConfig& binning,
                                 const std::vector<int>& n_grid) {
    if (samples.empty()) throw AnyplanError("build_profile_table: no samples");
    std::vector<double> sizes, values;
    sizes.reserve(samples.size());
    values.reserve(samples.size());
    for (const ProfileSample& s : samples) {
        sizes.push_back(s.env_size);
        values.push_back(s.v_before);
    }
    ProfileTable table(quantile_edges(std::move(sizes), binning.size_bins),
                       quantile_edges(std::move(values), binning.value_bins), n_grid,
                       binning.min_count);
    // two-pass mean/variance per cell
    struct Acc {
        double sum_dv = 0, sum_cost = 0;
        long n = 0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(table.size_bins()) * table.value_bins() *
                         n_grid.size());
    auto idx_of = [&](const ProfileSample& s) -> long {
        auto it = std::find(n_grid.begin(), n_grid.end(), s.n);
        if (it == n_grid.end()) return -1;
        std::size_t ni = static_cast<std::size_t>(it - n_grid.begin());
        return (static_cast<long>(table.size_bin(s.env_size)) * table.value_bins() +
                table.value_bin(s.v_before)) *
                   static_cast<long>(n_grid.size()) +
               static_cast<long>(ni);
    };
    for (const ProfileSample& s : samples) {
        long i = idx_of(s);
        if (i < 0) continue;
        acc[i].sum_dv += s.delta_v;
        acc[i].sum_cost += static_cast<double>(s.cost);
        acc[i].n += 1;
    }
    std::vector<double> ss(acc.size(), 0.0);
    for (const ProfileSample& s : samples) {
        long i = idx_of(s);
        if (i < 0 || acc[i].n == 0) continue;
        double d = s.delta_v - acc[i].sum_dv / acc[i].n;
        ss[i] += d * d;
    }
    bool any = false;
    for (int sb = 0; sb < table.size_bins(); ++sb)
        for (int vb = 0; vb < table.value_bins(); ++vb)
            for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
                std::size_t i =
                    (static_cast<std::size_t>(sb) * table.value_bins() + vb) * n_grid.size() + ni;
                ProfileCellStats& c = table.cell(sb, vb, static_cast<int>(ni));
                c.count = acc[i].n;
                if (acc[i].n > 0) {
                    c.mean_dv = acc[i].sum_dv / acc[i].n;
                    c.mean_cost = acc[i].sum_cost / acc[i].n;
                    c.var_dv = acc[i].n > 1 ? ss[i] / (acc[i].n - 1) : 0.0;
                }
                c.sparse = acc[i].n < binning.min_count;
                if (!c.sparse) any = true;
            }
    if (!any)
        throw AnyplanError(
            "build_profile_table: every cell is sparse; gather more samples or lower min_count");
    return table;
}

GreedyDecision greedy_round(const ProfileTable& table, double env_size, double v,
                            Ticks remaining_ticks, std::optional<double> delay_cost_rate) {
    GreedyDecision d;
    auto cellpos = table.resolve(env_size, v);
    if (!cellpos) return d;
    auto [sb, vb] = *cellpos;
    double best_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t ni = 0; ni < table.n_grid().size(); ++ni) {
        const ProfileCellStats& c = table.cell(sb, vb, static_cast<int>(ni));
        if (c.sparse) continue;
        double cost = std::max(1.0, c.mean_cost);
        if (!delay_cost_rate && remaining_ticks >= 0 && cost > static_cast<double>(remaining_ticks))
            continue;
        double ratio = c.mean_dv / cost;
        if (ratio > best_ratio) {
            best_ratio = ratio;
            d.n = table.n_grid()[ni];
            d.expected_dv = c.mean_dv;
            d.expected_cost = cost;
            d.stop = false;
        }
    }
    if (d.stop) return d;
    if (delay_cost_rate) {
        if (d.expected_dv - *delay_cost_rate * d.expected_cost <= 0.0) d.stop = true;
    } else if (d.expected_dv <= 0.0) {
        d.stop = true;
    }
    return d;
}

PrecursorResult run_precursor(const StochasticAutomaton& a, StateId start, PrecursorMode mode,
                              const PrecursorConfig& cfg, const ProfileTable* table) {
    const char* mode_name = mode == PrecursorMode::Greedy ? "GREEDY"
                            : mode == PrecursorMode::InflexibleFull ? "INFLEXIBLE-FULL"
                                                                    : "FLEXIBLE-FULL";
    PrecursorResult res;
    res.policy = Policy::reflex_only(cfg.reflex);
    auto exact_value = [&](const Policy& p) {
        return policy_evaluate(a, p, cfg.solver).values[start];
    };
    res.trace.push_back({0, exact_value(res.policy), mode_name, 0});
    const Ticks deadline = cfg.deadline;
    const bool bounded = deadline >= 0;

    if (mode == PrecursorMode::Greedy) {
        if (!table && (bounded || cfg.delay_cost_rate))
            throw AnyplanError("GREEDY mode requires a profile table");
        StrategyContext ctx{&a, cfg.solver, cfg.costs, 0.0, cfg.reflex, {start}};
        StrategyOutcome cur;
        if (!initial_outcome(a, start, ctx, cur))
            throw AnyplanError("run_precursor: goal unreachable from start");
        if (bounded && cur.ticks > deadline) {
            res.ticks_spent = 0;  // could not finish the first round before the deadline
            return res;
        }
        res.ticks_spent = cur.ticks;
        res.policy = cur.policy;
        int round = 1;
        res.trace.push_back({res.ticks_spent, exact_value(res.policy), mode_name, round});
        while (true) {
            double v_hat = cur.restricted.value_of_global(cur.values, start);
            int n = 0;
            if (bounded || cfg.delay_cost_rate) {
                GreedyDecision d = greedy_round(*table, static_cast<double>(cur.envelope.size()),
                                                v_hat, bounded ? deadline - res.ticks_spent : -1,
                                                cfg.delay_cost_rate);
                if (d.stop) break;
                n = d.n;
            } else {
                // unbounded convergence run: close the envelope outright
                n = kDefaultNGrid.back();
            }
            std::vector<StateId> fr = fringe(a, cur.envelope, cur.policy);
            StrategyOutcome next;
            if (!fr.empty()) {
                DeliberationStrategy s = parse_strategy("R[" + std::to_string(n) + "] O");
                next = apply_strategy(s, ctx, cur.envelope, cur.policy, start);
            } else {
                std::vector<StateId> af = action_fringe(a, cur.envelope);
                if (af.empty()) break;  // envelope closed: restricted model is exact
                Envelope grown = cur.envelope;
                std::size_t added = 0;
                for (StateId s : af) {
                    if (static_cast<int>(added) >= n) break;
                    if (grown.insert(s)) ++added;
                }
                static const DeliberationStrategy kOpt = parse_strategy("O");
                next = apply_strategy(kOpt, ctx, grown, cur.policy, start);
                next.ticks += cfg.costs.c_alt * static_cast<Ticks>(cur.envelope.size()) +
                              cfg.costs.c_add * static_cast<Ticks>(added);
            }
            if (bounded && res.ticks_spent + next.ticks > deadline) break;
            bool grew = next.envelope.size() != cur.envelope.size();
            double v_new = next.restricted.value_of_global(next.values, start);
            cur = std::move(next);
            res.ticks_spent += cur.ticks;
            res.policy = cur.policy;
            ++round;
            res.trace.push_back({res.ticks_spent, exact_value(res.policy), mode_name, round});
            if (!bounded && !cfg.delay_cost_rate && !grew && v_new <= v_hat + 1e-12 &&
                action_fringe(a, cur.envelope).empty())
                break;
        }
        return res;
    }

    // full-space baselines
    const Ticks round_cost = pg_round_cost(static_cast<std::size_t>(a.num_states()), cfg.costs);
    Policy held = res.policy;  // what the executor would receive
    Policy work = res.policy;
    ValueFunction value = policy_evaluate(a, work, cfg.solver);
    double reflex_value = res.trace.front().value;
    int round = 0;
    while (true) {
        if (bounded && res.ticks_spent + round_cost > deadline) break;
        Policy improved = policy_improve(a, value, cfg.solver);
        ValueFunction v2 = policy_evaluate(a, improved, cfg.solver);
        res.ticks_spent += round_cost;
        ++round;
        bool changed = improved.as_dense(a.num_states()) != work.as_dense(a.num_states());
        work = std::move(improved);
        value = std::move(v2);
        if (mode == PrecursorMode::FlexibleFull) {
            held = work;
            res.trace.push_back({res.ticks_spent, value.values[start], mode_name, round});
        } else {
            // inflexible: the reflex policy stands until convergence
            if (changed) res.trace.push_back({res.ticks_spent, reflex_value, mode_name, round});
        }
        if (!changed) {
            held = work;
            if (mode == PrecursorMode::InflexibleFull)
                res.trace.push_back({res.ticks_spent, value.values[start], mode_name, round});
            break;
        }
    }
    res.policy = held;
    return res;
}

}  // namespace anyplan
