#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "anyplan/gridworld.hpp"
#include "anyplan/profile.hpp"
#include "doctest.h"

using namespace anyplan;

namespace {

// One populated cell with two refinement options.
ProfileTable two_option_table(double dv1, double cost1, double dv2, double cost2) {
    ProfileTable t({}, {}, {1, 5}, 1);
    ProfileCellStats& a = t.cell(0, 0, 0);
    a = {dv1, cost1, 0.0, 10, false};
    ProfileCellStats& b = t.cell(0, 0, 1);
    b = {dv2, cost2, 0.0, 10, false};
    return t;
}

const char* kSmall =
    "3 3\n"
    "...\n"
    ".#.\n"
    "...\n";

}  // namespace

TEST_CASE("greedy rule picks the best improvement-per-cost ratio") {
    // 3/2 = 1.5 beats 5/10 = 0.5 even though the absolute gain is smaller
    ProfileTable t = two_option_table(3.0, 2.0, 5.0, 10.0);
    GreedyDecision d = greedy_round(t, 4.0, -10.0, 1000);
    CHECK_FALSE(d.stop);
    CHECK(d.n == 1);
    CHECK(d.expected_dv == doctest::Approx(3.0));
    CHECK(d.expected_cost == doctest::Approx(2.0));

    // brute-force cross-check on a symmetric table
    ProfileTable t2 = two_option_table(1.0, 4.0, 9.0, 12.0);
    GreedyDecision d2 = greedy_round(t2, 4.0, -10.0, 1000);
    CHECK(d2.n == 5);  // 0.75 beats 0.25
}

TEST_CASE("greedy rule filters options that do not fit the remaining budget") {
    ProfileTable t = two_option_table(1.0, 4.0, 9.0, 12.0);
    GreedyDecision d = greedy_round(t, 4.0, -10.0, /*remaining=*/5);
    CHECK_FALSE(d.stop);
    CHECK(d.n == 1);  // the better option costs 12 and no longer fits
    GreedyDecision none = greedy_round(t, 4.0, -10.0, /*remaining=*/2);
    CHECK(none.stop);
}

TEST_CASE("greedy rule stops on non-positive expected improvement") {
    ProfileTable t = two_option_table(-0.5, 2.0, 0.0, 10.0);
    CHECK(greedy_round(t, 4.0, -10.0, 1000).stop);

    // delay-cost stop: improvement must beat rate * cost
    ProfileTable g = two_option_table(3.0, 2.0, 5.0, 10.0);
    CHECK_FALSE(greedy_round(g, 4.0, -10.0, -1, 1.0).stop);  // 3 - 1*2 > 0
    CHECK(greedy_round(g, 4.0, -10.0, -1, 2.0).stop);        // 3 - 2*2 < 0

    // an all-sparse table yields no decision
    ProfileTable sparse({}, {}, {1, 5}, 5);
    CHECK(greedy_round(sparse, 4.0, -10.0, 1000).stop);
}

TEST_CASE("profile table binning and fallback") {
    ProfileTable t({10.0}, {-10.0}, {1}, 1);
    CHECK(t.size_bins() == 2);
    CHECK(t.value_bins() == 2);
    CHECK(t.size_bin(5.0) == 0);
    CHECK(t.size_bin(10.0) == 0);
    CHECK(t.size_bin(11.0) == 1);
    CHECK(t.value_bin(-15.0) == 0);
    CHECK(t.value_bin(-3.0) == 1);

    CHECK_FALSE(t.resolve(5.0, -15.0).has_value());  // nothing populated yet
    t.cell(1, 1, 0) = {1.0, 1.0, 0.0, 3, false};
    auto cell = t.resolve(5.0, -15.0);  // far corner falls back to the populated one
    REQUIRE(cell.has_value());
    CHECK(cell->first == 1);
    CHECK(cell->second == 1);
}

TEST_CASE("table construction reproduces per-cell statistics") {
    std::vector<ProfileSample> samples;
    Rng rng(5);
    for (int i = 0; i < 400; ++i) {
        int env = 3 + static_cast<int>(rng.uniform_index(40));
        double v = -18.0 + 15.0 * rng.uniform_real();
        for (int n : {1, 5}) {
            double dv = 0.1 * n + rng.uniform_real();
            samples.push_back({env, v, n, dv, 10 * n});
        }
    }
    ProfileBinningConfig binning;
    binning.size_bins = 2;
    binning.value_bins = 2;
    binning.min_count = 1;
    ProfileTable t = build_profile_table(samples, binning, {1, 5});

    long total = 0;
    for (int sb = 0; sb < t.size_bins(); ++sb)
        for (int vb = 0; vb < t.value_bins(); ++vb)
            for (int ni = 0; ni < 2; ++ni) {
                const ProfileCellStats& c = t.cell(sb, vb, ni);
                total += c.count;
                if (c.count == 0) continue;
                // recompute the cell mean independently
                double sum = 0;
                long cnt = 0;
                int want_n = ni == 0 ? 1 : 5;
                for (const ProfileSample& s : samples)
                    if (t.size_bin(s.env_size) == sb && t.value_bin(s.v_before) == vb &&
                        s.n == want_n) {
                        sum += s.delta_v;
                        ++cnt;
                    }
                CHECK(cnt == c.count);
                CHECK(c.mean_dv == doctest::Approx(sum / cnt).epsilon(1e-12));
            }
    CHECK(total == static_cast<long>(samples.size()));
    CHECK_THROWS_AS(build_profile_table({}, binning, {1, 5}), AnyplanError);
}

TEST_CASE("unbounded deliberation converges to the same start value in every mode") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::East);
    PrecursorConfig cfg;

    PrecursorResult greedy = run_precursor(a, start, PrecursorMode::Greedy, cfg);
    PrecursorResult inflex = run_precursor(a, start, PrecursorMode::InflexibleFull, cfg);
    PrecursorResult flex = run_precursor(a, start, PrecursorMode::FlexibleFull, cfg);

    double vg = greedy.trace.back().value;
    double vi = inflex.trace.back().value;
    double vf = flex.trace.back().value;
    CHECK(std::abs(vg - vi) < 1e-4);
    CHECK(std::abs(vg - vf) < 1e-4);
    CHECK(vg > greedy.trace.front().value);  // better than the reflex policy

    for (const PrecursorResult* r : {&greedy, &inflex, &flex}) {
        REQUIRE(!r->trace.empty());
        CHECK(r->trace.front().tick == 0);
        for (std::size_t i = 1; i < r->trace.size(); ++i)
            CHECK(r->trace[i].tick >= r->trace[i - 1].tick);
    }
    CHECK(greedy.trace.back().mode == "GREEDY");
    CHECK(inflex.trace.back().mode == "INFLEXIBLE-FULL");
    CHECK(flex.trace.back().mode == "FLEXIBLE-FULL");
}

TEST_CASE("the inflexible mode reports the reflex value until it finishes") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::East);
    PrecursorConfig cfg;
    PrecursorResult r = run_precursor(a, start, PrecursorMode::InflexibleFull, cfg);
    REQUIRE(r.trace.size() >= 2);
    double reflex_value = r.trace.front().value;
    for (std::size_t i = 0; i + 1 < r.trace.size(); ++i)
        CHECK(r.trace[i].value == doctest::Approx(reflex_value).epsilon(1e-9));
    CHECK(r.trace.back().value > reflex_value);
}

TEST_CASE("bounded greedy needs a table and respects the deadline") {
    grid::GridMap m = grid::load_map(kSmall);
    StochasticAutomaton a = grid::build_task_automaton(m, {2, 2});
    StateId start = m.state_id(grid::Location{0, 0}, grid::East);

    PrecursorConfig bounded;
    bounded.deadline = 2000;
    CHECK_THROWS_AS(run_precursor(a, start, PrecursorMode::Greedy, bounded, nullptr),
                    AnyplanError);

    GatherConfig gcfg;
    gcfg.sample_budget = 120;
    gcfg.n_grid = {1, 2, 5};
    std::vector<ProfileSample> samples = gather_profile_statistics(m, gcfg, 77);
    REQUIRE(!samples.empty());
    ProfileBinningConfig binning;
    binning.size_bins = 2;
    binning.value_bins = 2;
    binning.min_count = 1;
    ProfileTable table = build_profile_table(samples, binning, gcfg.n_grid);

    PrecursorResult r = run_precursor(a, start, PrecursorMode::Greedy, bounded, &table);
    CHECK(r.ticks_spent <= bounded.deadline);
    CHECK(r.trace.back().tick == r.ticks_spent);

    // the full-space baseline cannot complete even one round at this deadline
    PrecursorResult inflex = run_precursor(a, start, PrecursorMode::InflexibleFull, bounded);
    CHECK(inflex.trace.size() == 1);  // reflex only
    CHECK(r.trace.back().value >= inflex.trace.back().value);
}

TEST_CASE("gathered samples are monotone in n within each round") {
    grid::GridMap m = grid::load_map(kSmall);
    GatherConfig cfg;
    cfg.sample_budget = 90;
    cfg.n_grid = {1, 2, 5};
    std::vector<ProfileSample> samples = gather_profile_statistics(m, cfg, 3);
    REQUIRE(samples.size() >= cfg.n_grid.size());
    // samples arrive in grid order per round with a shared base
    for (std::size_t i = 0; i + cfg.n_grid.size() <= samples.size(); i += cfg.n_grid.size()) {
        for (std::size_t j = 0; j < cfg.n_grid.size(); ++j) {
            CHECK(samples[i + j].n == cfg.n_grid[j]);
            CHECK(samples[i + j].env_size == samples[i].env_size);
            CHECK(samples[i + j].v_before == samples[i].v_before);
            if (j > 0) CHECK(samples[i + j].delta_v >= samples[i + j - 1].delta_v - 1e-6);
        }
    }
    // deterministic re-gather
    std::vector<ProfileSample> again = gather_profile_statistics(m, cfg, 3);
    REQUIRE(again.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(again[i].delta_v == samples[i].delta_v);
        CHECK(again[i].cost == samples[i].cost);
    }
}
