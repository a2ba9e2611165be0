// Timing comparison of the serial and OpenMP Bellman-sweep kernels on a
// large generated office map. Also double-checks that the two paths produce
// bit-identical iterates, since the solver relies on that for determinism.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "anyplan/gridworld.hpp"
#include "anyplan/solver.hpp"

using namespace anyplan;

namespace {

using Clock = std::chrono::steady_clock;

double time_sweeps(int reps, bool parallel, const StochasticAutomaton& a,
                   const std::vector<ActionId>& act, std::vector<double>& v,
                   std::vector<double>& next) {
    auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) {
        if (parallel)
            bellman_policy_sweep_parallel(a, act, 0.95, v, next);
        else
            bellman_policy_sweep_serial(a, act, 0.95, v, next);
        std::swap(v, next);
    }
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int min_locations = argc > 1 ? std::atoi(argv[1]) : 20000;
    int reps = argc > 2 ? std::atoi(argv[2]) : 200;

    grid::GridMap map = grid::make_office_map(min_locations, 7);
    grid::Location goal = map.locations().back();
    StochasticAutomaton a = grid::build_task_automaton(map, goal);
    std::printf("automaton: %d states, %d actions\n", a.num_states(), a.num_actions());

    SolverConfig cfg;
    ValueFunction v0 = value_iteration(a, cfg);
    std::vector<ActionId> act = policy_improve(a, v0, cfg).as_dense(a.num_states());

    std::vector<double> vs(a.num_states(), 0.0), ns(vs), vp(vs), np(vs);
    // warm-up + equality check over the full rep count
    for (int i = 0; i < reps; ++i) {
        bellman_policy_sweep_serial(a, act, 0.95, vs, ns);
        bellman_policy_sweep_parallel(a, act, 0.95, vp, np);
        if (std::memcmp(ns.data(), np.data(), ns.size() * sizeof(double)) != 0) {
            std::fprintf(stderr, "serial and parallel sweeps diverged at rep %d\n", i);
            return 1;
        }
        std::swap(vs, ns);
        std::swap(vp, np);
    }
    std::printf("bit-identical over %d sweeps: yes\n", reps);

    std::fill(vs.begin(), vs.end(), 0.0);
    double t_serial = time_sweeps(reps, false, a, act, vs, ns);
    std::fill(vs.begin(), vs.end(), 0.0);
    double t_parallel = time_sweeps(reps, true, a, act, vs, ns);

    std::printf("serial:   %.3f s (%.2f us/sweep)\n", t_serial, 1e6 * t_serial / reps);
    std::printf("parallel: %.3f s (%.2f us/sweep)\n", t_parallel, 1e6 * t_parallel / reps);
    std::printf("speedup:  %.2fx\n", t_serial / t_parallel);
    return 0;
}
