#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "anyplan/gridworld.hpp"
#include "anyplan/recurrent.hpp"
#include "doctest.h"

using namespace anyplan;

namespace {

StochasticAutomaton chain5() {
    StochasticAutomaton a(5, 2);
    a.add_row(0, 0, {{0, 1.0}});
    a.add_row(0, 1, {{0, 0.2}, {1, 0.8}});
    a.add_row(1, 0, {{1, 1.0}});
    a.add_row(1, 1, {{2, 0.8}, {3, 0.2}});
    a.add_row(2, 0, {{2, 1.0}});
    a.add_row(2, 1, {{0, 0.2}, {4, 0.8}});
    a.add_row(3, 0, {{3, 1.0}});
    a.add_row(3, 1, {{1, 1.0}});
    a.add_row(4, 0, {{4, 1.0}});
    a.add_row(4, 1, {{4, 1.0}});
    a.finalize();
    a.set_goal_states({4});
    return a;
}

// Exhaustive trajectory recursion with goals absorbing and collecting zero
// reward; switches from `first` to `second` actions at depth n.
double enumerate_value(const StochasticAutomaton& a, const std::vector<ActionId>& first,
                       const std::vector<ActionId>& second, StateId s, int depth, int switch_at,
                       int horizon, double gamma, const std::vector<double>& tail) {
    if (depth == horizon) return tail[s];
    if (a.is_goal(s))
        return 0.0 + gamma * enumerate_value(a, first, second, s, depth + 1, switch_at, horizon,
                                             gamma, tail);
    ActionId act = depth < switch_at ? first[s] : second[s];
    double acc = 0.0;
    if (a.row_empty(s, act)) {
        acc = enumerate_value(a, first, second, s, depth + 1, switch_at, horizon, gamma, tail);
    } else {
        for (const Transition* t = a.row_begin(s, act); t != a.row_end(s, act); ++t)
            acc += t->prob * enumerate_value(a, first, second, t->to, depth + 1, switch_at,
                                             horizon, gamma, tail);
    }
    return -1.0 + gamma * acc;
}

const char* kSmall =
    "3 3\n"
    "...\n"
    ".#.\n"
    "...\n";

}  // namespace

TEST_CASE("fatness ratio guards against empty fringes") {
    CHECK(fatness(10, 5) == doctest::Approx(2.0));
    CHECK(fatness(10, 0) == doctest::Approx(10.0));
    CHECK(fatness(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("the strategy roster is frozen, valid and well-formed") {
    std::vector<DeliberationStrategy> roster = standard_strategy_roster();
    REQUIRE(roster.size() == 24);
    std::set<std::string> labels;
    for (const DeliberationStrategy& s : roster) {
        CHECK(format_strategy(s.steps) == s.label);  // label matches the steps
        CHECK(s.steps.front().kind == StepKind::FindPath);
        CHECK(s.steps.back().kind == StepKind::Optimize);
        labels.insert(s.label);
    }
    CHECK(labels.size() == 24);  // no duplicates
    for (const char* expected : {"FP O", "FP R[100] O", "FP P[10] O", "FP R[10] P[10] O",
                                 "FP R[10] O P[10] O", "FP R[50] R[50] O"})
        CHECK(labels.count(expected) == 1);
}

TEST_CASE("estimated improvement in value: direct arithmetic cases") {
    StochasticAutomaton a = chain5();
    std::vector<double> v_old = {-12.0, -9.0, -4.0, -14.0, 0.0};
    std::vector<double> v_new = {-11.0, -8.0, -3.5, -13.0, 0.0};
    Policy pi = Policy::reflex_only(1);

    // k = 0: no movement, pure estimate revision at x
    CHECK(eiv_sample(a, pi, 1, 0, 0.95, v_old, v_new) ==
          doctest::Approx(v_new[1] - v_old[1]).epsilon(1e-15));

    // k = 1: one -1-reward step under pi, then the new estimate
    double expect = -1.0 + 0.95 * (0.8 * v_new[2] + 0.2 * v_new[3]) - v_old[1];
    CHECK(eiv_sample(a, pi, 1, 1, 0.95, v_old, v_new) == doctest::Approx(expect).epsilon(1e-12));

    // starting at the goal: zero reward throughout
    CHECK(eiv_sample(a, pi, 4, 3, 0.95, v_old, v_new) ==
          doctest::Approx(std::pow(0.95, 3) * v_new[4] - v_old[4]).epsilon(1e-12));

    CHECK_THROWS_AS(eiv_sample(a, pi, 1, -1, 0.95, v_old, v_new), AnyplanError);
}

TEST_CASE("estimated improvement matches exhaustive trajectory enumeration") {
    StochasticAutomaton a = chain5();
    Rng rng(21);
    Policy pi = Policy::reflex_only(1);
    std::vector<ActionId> act = pi.as_dense(5);
    for (int k : {0, 1, 2, 4, 6}) {
        std::vector<double> v_old(5), v_new(5);
        for (int i = 0; i < 5; ++i) {
            v_old[i] = -20.0 * rng.uniform_real();
            v_new[i] = -20.0 * rng.uniform_real();
        }
        double got = eiv_sample(a, pi, 1, k, 0.9, v_old, v_new);
        double want = enumerate_value(a, act, act, 1, 0, k, k, 0.9, v_new) - v_old[1];
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("myopic strategy value: closed-form and goal cases") {
    // one non-goal state that loops on itself: -1 - g - g^2 * 10 = -10 at g=0.9
    StochasticAutomaton a(2, 1);
    a.add_row(0, 0, {{0, 1.0}});
    a.add_row(1, 0, {{1, 1.0}});
    a.finalize();
    a.set_goal_states({1});
    Policy pi = Policy::reflex_only(0);
    std::vector<double> v_star = {-10.0, 0.0};
    CHECK(myopic_strategy_value(a, pi, pi, 0, 1, 0.9, v_star) ==
          doctest::Approx(-10.0).epsilon(1e-12));

    // starting at the goal is worth exactly gamma^(2n) * v_star(goal) = 0
    CHECK(myopic_strategy_value(a, pi, pi, 1, 3, 0.9, v_star) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(myopic_strategy_value(a, pi, pi, 0, 0, 0.9, v_star), AnyplanError);
}

TEST_CASE("myopic strategy value matches exhaustive trajectory enumeration") {
    StochasticAutomaton a = chain5();
    Rng rng(22);
    Policy pi = Policy::reflex_only(1);   // always move
    Policy stay = Policy::reflex_only(0); // improved policy: freeze
    std::vector<ActionId> act_pi = pi.as_dense(5), act_f = stay.as_dense(5);
    for (int n : {1, 2, 3}) {
        std::vector<double> v_star(5);
        for (int i = 0; i < 5; ++i) v_star[i] = -20.0 * rng.uniform_real();
        for (StateId x = 0; x < 5; ++x) {
            double got = myopic_strategy_value(a, pi, stay, x, n, 0.92, v_star);
            double want = enumerate_value(a, act_pi, act_f, x, 0, n, 2 * n, 0.92, v_star);
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("eiv table indexing, fallback and argmax tie-breaking") {
    EIVTable t({{5.0}, {-10.0}, {2.0}, {3.0}}, 3, 3);
    CHECK(t.num_cells() == 16);
    CHECK(t.cell_index({1.0, -15.0, 1.0, 1.0}) == 0);
    CHECK(t.cell_index({1.0, -15.0, 1.0, 9.0}) == 1);
    CHECK(t.cell_index({9.0, -15.0, 1.0, 1.0}) == 8);
    CHECK(t.cell_index({9.0, -5.0, 9.0, 9.0}) == 15);

    EIVFeatures f{1.0, -15.0, 1.0, 1.0};
    t.cell(0, 1) = {7.0, 0.0, 2};       // under min_count: falls back to marginal
    t.marginal(1) = {0.5, 0.0, 10};
    CHECK(t.resolve(f, 1).mean == doctest::Approx(0.5));
    t.cell(0, 1).count = 3;
    CHECK(t.resolve(f, 1).mean == doctest::Approx(7.0));

    // exact tie between strategies 0 and 1: lower roster index wins
    t.cell(0, 0) = {7.0, 0.0, 3};
    CHECK(lookup_best_strategy(t, f) == 0);
    t.cell(0, 0) = {6.0, 0.0, 3};
    CHECK(lookup_best_strategy(t, f) == 1);
}

TEST_CASE("eiv table construction aggregates per-step improvements") {
    std::vector<DeliberationStrategy> roster = standard_strategy_roster();
    std::vector<EIVSample> samples;
    samples.push_back({{4, -15, 2, 3}, 0, 2, 100, 4.0});   // 2.0 per step
    samples.push_back({{4, -15, 2, 3}, 0, 4, 100, 4.0});   // 1.0 per step
    samples.push_back({{4, -15, 2, 3}, 0, 0, 100, 3.0});   // k clamped to 1: 3.0
    samples.push_back({{4, -15, 2, 3}, 5, 1, 100, -1.0});
    EIVBinningConfig binning;
    binning.bins_per_feature = 2;
    binning.min_count = 1;
    EIVTable t = build_eiv_table(samples, roster, binning);
    CHECK(t.marginal(0).count == 3);
    CHECK(t.marginal(0).mean == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(t.marginal(5).mean == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(t.marginal(1).count == 0);
    CHECK_THROWS_AS(build_eiv_table({}, roster, binning), AnyplanError);
}

TEST_CASE("interleaved runs are deterministic and reach the goal") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::East);
    RecurrentConfig cfg;
    cfg.map = &m;
    cfg.goal = {2, 2};

    SchedulerSpec fixed;
    fixed.kind = SchedulerKind::Fixed;
    fixed.fixed_label = "FP O";
    RunTrace t1 = run_recurrent(a, start, fixed, cfg, 123);
    RunTrace t2 = run_recurrent(a, start, fixed, cfg, 123);
    CHECK(t1.reached_goal);
    CHECK_FALSE(t1.capped);
    REQUIRE(t1.steps.size() == t2.steps.size());
    for (std::size_t i = 0; i < t1.steps.size(); ++i) {
        CHECK(t1.steps[i].state == t2.steps[i].state);
        CHECK(t1.steps[i].action == t2.steps[i].action);
    }
    REQUIRE(t1.invocations.size() == t2.invocations.size());
    for (std::size_t i = 0; i < t1.invocations.size(); ++i) {
        CHECK(t1.invocations[i].label == t2.invocations[i].label);
        CHECK(t1.invocations[i].ticks == t2.invocations[i].ticks);
    }
    CHECK(t1.steps_taken == static_cast<int>(t1.steps.size()));

    // a different seed gives a different (but still goal-reaching) run
    RunTrace t3 = run_recurrent(a, start, fixed, cfg, 124);
    CHECK(t3.reached_goal);
}

TEST_CASE("the step cap marks runs as capped") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::West);  // facing away
    RecurrentConfig cfg;
    cfg.coupling.step_cap = 2;
    SchedulerSpec fixed;
    fixed.kind = SchedulerKind::Fixed;
    fixed.fixed_label = "FP O";
    RunTrace t = run_recurrent(a, start, fixed, cfg, 5);
    CHECK(t.capped);
    CHECK_FALSE(t.reached_goal);
    CHECK(t.steps_taken == 2);
}

TEST_CASE("full-space baselines ship policies and finish on small maps") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::East);
    RecurrentConfig cfg;
    cfg.coupling.ticks_per_step = 1e5;

    SchedulerSpec iter;
    iter.kind = SchedulerKind::Iter;
    RunTrace ti = run_recurrent(a, start, iter, cfg, 42);
    CHECK(ti.reached_goal);
    CHECK(!ti.invocations.empty());

    SchedulerSpec whole;
    whole.kind = SchedulerKind::Whole;
    RunTrace tw = run_recurrent(a, start, whole, cfg, 42);
    CHECK(tw.reached_goal);
    CHECK(tw.invocations.size() == 1);  // ships only the converged policy

    // lookup without a table falls back to random strategy choice and still works
    SchedulerSpec lookup;
    lookup.kind = SchedulerKind::Lookup;
    RunTrace tl = run_recurrent(a, start, lookup, cfg, 42);
    CHECK(tl.reached_goal);
}

TEST_CASE("statistics gathering for the eiv table is deterministic") {
    grid::GridMap m = grid::load_map(kSmall);
    std::vector<DeliberationStrategy> roster = standard_strategy_roster();
    EIVGatherConfig cfg;
    cfg.run_budget = 3;
    std::vector<EIVSample> s1 = gather_eiv_statistics(m, roster, cfg, 9);
    std::vector<EIVSample> s2 = gather_eiv_statistics(m, roster, cfg, 9);
    REQUIRE(!s1.empty());
    REQUIRE(s1.size() == s2.size());
    for (std::size_t i = 0; i < s1.size(); ++i) {
        CHECK(s1[i].strategy_index == s2[i].strategy_index);
        CHECK(s1[i].improvement == s2[i].improvement);
        CHECK(s1[i].strategy_index >= 0);
        CHECK(s1[i].strategy_index < 24);
        CHECK(s1[i].k_steps >= 0);
        CHECK(s1[i].features.mdist >= 0.0);
    }
}
