#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "anyplan/gridworld.hpp"
#include "anyplan/solver.hpp"
#include "doctest.h"

using namespace anyplan;
using namespace anyplan::grid;

namespace {

const char* kSmall =
    "3 3\n"
    "...\n"
    ".#.\n"
    "...\n";

}  // namespace

TEST_CASE("map loading, saving and state indexing") {
    GridMap m = load_map(kSmall);
    CHECK(m.width() == 3);
    CHECK(m.height() == 3);
    CHECK(m.num_locations() == 8);
    CHECK(m.num_states() == 32);
    CHECK(save_map(m) == kSmall);
    CHECK(m.cell(1, 1) == Cell::Wall);
    CHECK(m.location_index(1, 1) == -1);
    CHECK_FALSE(m.walkable(1, 1));
    CHECK_FALSE(m.walkable(-1, 0));
    CHECK(m.walkable(0, 0));

    StateId s = m.state_id(Location{2, 1}, East);
    CHECK(m.location_of(s) == Location{2, 1});
    CHECK(m.orientation_of(s) == East);

    CHECK_THROWS_AS(load_map("3 3\n...\n..\n...\n"), AnyplanError);   // short row
    CHECK_THROWS_AS(load_map("3 3\n...\n.X.\n...\n"), AnyplanError);  // bad character
    CHECK_THROWS_AS(load_map("nope\n"), AnyplanError);                // bad header
    CHECK_THROWS_AS(load_map("2 1\n##\n"), AnyplanError);             // no free cell
}

TEST_CASE("a 166-location map yields 664 states") {
    std::string text = "17 10\n";
    std::vector<std::string> rows(10, std::string(17, '.'));
    rows[3][4] = '#';
    rows[5][9] = '#';
    rows[7][2] = '#';
    rows[8][14] = '#';
    for (const std::string& r : rows) text += r + "\n";
    GridMap m = load_map(text);
    CHECK(m.num_locations() == 166);
    CHECK(m.num_states() == 664);
}

TEST_CASE("robot state text round-trips") {
    GridMap m = load_map(kSmall);
    for (StateId s = 0; s < m.num_states(); ++s) {
        std::string text = format_robot_state(m, s);
        CHECK(parse_robot_state(m, text) == s);
    }
    CHECK(format_robot_state(m, m.state_id(Location{0, 2}, South)) == "0,2,S");
    CHECK_THROWS_AS(parse_robot_state(m, "1,1,N"), AnyplanError);  // wall
    CHECK_THROWS_AS(parse_robot_state(m, "0,0,Q"), AnyplanError);
}

TEST_CASE("movement automaton has the documented row structure") {
    GridMap m = load_map(kSmall);
    StochasticAutomaton a = build_automaton(m, 0.8);
    CHECK(a.num_states() == 32);
    CHECK(a.num_actions() == 5);
    CHECK(validate_automaton(a).empty());

    // STAY is certain
    StateId s = m.state_id(Location{0, 0}, East);
    const Transition* b = a.row_begin(s, Stay);
    REQUIRE(a.row_end(s, Stay) - b == 1);
    CHECK(b->to == s);
    CHECK(b->prob == 1.0);

    // FORWARD from (0,0) facing East: (0,1) with 0.8, stay with 0.2
    const Transition* f = a.row_begin(s, Forward);
    REQUIRE(a.row_end(s, Forward) - f == 2);
    StateId tgt = m.state_id(Location{0, 1}, East);
    bool saw_target = false, saw_self = false;
    for (int i = 0; i < 2; ++i) {
        if (f[i].to == tgt) {
            CHECK(f[i].prob == 0.8);
            saw_target = true;
        }
        if (f[i].to == s) {
            CHECK(f[i].prob == doctest::Approx(0.2).epsilon(1e-15));
            saw_self = true;
        }
    }
    CHECK(saw_target);
    CHECK(saw_self);

    // FORWARD into the wall is a certain no-op
    StateId blocked = m.state_id(Location{0, 1}, South);  // (1,1) is the wall
    const Transition* w = a.row_begin(blocked, Forward);
    REQUIRE(a.row_end(blocked, Forward) - w == 1);
    CHECK(w->to == blocked);
    CHECK(w->prob == 1.0);

    // turning changes orientation only, stochastically
    const Transition* t = a.row_begin(s, TurnRight);
    REQUIRE(a.row_end(s, TurnRight) - t == 2);
    StateId turned = m.state_id(Location{0, 0}, South);
    CHECK(((t[0].to == turned && t[1].to == s) || (t[1].to == turned && t[0].to == s)));
}

TEST_CASE("sink locations absorb under every action") {
    GridMap m = load_map("2 2\n.O\n..\n");
    StochasticAutomaton a = build_automaton(m);
    for (Orientation o : {North, East, South, West}) {
        StateId s = m.state_id(Location{0, 1}, o);
        for (ActionId act = 0; act < kNumGridActions; ++act) {
            const Transition* b = a.row_begin(s, act);
            REQUIRE(a.row_end(s, act) - b == 1);
            CHECK(b->to == s);
            CHECK(b->prob == 1.0);
        }
    }
}

TEST_CASE("task automaton makes the goal absorbing with zero reward") {
    GridMap m = load_map(kSmall);
    StochasticAutomaton a = build_task_automaton(m, Location{2, 2}, 0.8);
    CHECK(validate_automaton(a).empty());
    CHECK(a.goal_states().size() == 4);
    for (Orientation o : {North, East, South, West}) {
        StateId g = m.state_id(Location{2, 2}, o);
        CHECK(a.is_goal(g));
        CHECK(a.reward(g) == 0.0);
        for (ActionId act = 0; act < kNumGridActions; ++act) {
            const Transition* b = a.row_begin(g, act);
            REQUIRE(a.row_end(g, act) - b == 1);
            CHECK(b->to == g);
        }
    }
    CHECK(a.reward(m.state_id(Location{0, 0}, North)) == -1.0);

    // solvable: optimal values are bounded and the goal is worth 0
    SolverConfig cfg;
    ValueFunction v = value_iteration(a, cfg);
    for (StateId s = 0; s < a.num_states(); ++s) {
        CHECK(v.values[s] <= 1e-9);
        CHECK(v.values[s] >= -1.0 / (1.0 - cfg.gamma) - 1e-9);
    }
    CHECK(v.values[m.state_id(Location{2, 2}, North)] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(v.values[m.state_id(Location{2, 1}, East)] > -5.0);  // adjacent to the goal
}

TEST_CASE("random tasks are deterministic, admissible and exclude sinks") {
    GridMap m = load_map("6 6\n......\n.O....\n......\n...#..\n......\n......\n");
    Rng r1(99), r2(99);
    Task t1 = random_task(m, r1, 0.5);
    Task t2 = random_task(m, r2, 0.5);
    CHECK(t1.start == t2.start);
    CHECK(t1.goal == t2.goal);

    Rng rng(7);
    double bound = 0.5 * (m.width() + m.height());
    for (int i = 0; i < 200; ++i) {
        Task t = random_task(m, rng, 0.5);
        Location sl = m.location_of(t.start);
        CHECK(m.cell(sl.row, sl.col) == Cell::Free);
        CHECK(m.cell(t.goal.row, t.goal.col) == Cell::Free);
        CHECK(manhattan_distance(sl, t.goal) < bound);
        CHECK(manhattan_distance(sl, t.goal) > 0);
    }
}

TEST_CASE("manhattan distance") {
    CHECK(manhattan_distance({0, 0}, {0, 0}) == 0);
    CHECK(manhattan_distance({1, 2}, {4, 0}) == 5);
    CHECK(manhattan_distance({4, 0}, {1, 2}) == 5);
}

TEST_CASE("generated office maps are connected, sink-free and big enough") {
    for (int target : {60, 150, 260}) {
        GridMap m = make_office_map(target, 7);
        CHECK(m.num_locations() >= target);
        for (const Location& l : m.locations()) CHECK(m.cell(l.row, l.col) == Cell::Free);

        // connectivity: everything reachable from the first location
        std::vector<char> seen(m.num_locations(), 0);
        std::vector<int> stack = {0};
        seen[0] = 1;
        int visited = 0;
        while (!stack.empty()) {
            int i = stack.back();
            stack.pop_back();
            ++visited;
            Location l = m.locations()[i];
            const int dr[] = {1, -1, 0, 0}, dc[] = {0, 0, 1, -1};
            for (int d = 0; d < 4; ++d) {
                int r = l.row + dr[d], c = l.col + dc[d];
                if (!m.walkable(r, c)) continue;
                int j = m.location_index(r, c);
                if (!seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        CHECK(visited == m.num_locations());

        // deterministic per (size, seed)
        CHECK(save_map(make_office_map(target, 7)) == save_map(m));
    }
}
