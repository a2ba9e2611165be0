#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anyplan/envelope.hpp"
#include "anyplan/gridworld.hpp"

namespace anyplan {

// Expected value of running strategy F for the next interval: follow pi for n
// steps, F(pi) for n more, then the estimate v_star. Goal states are
// absorbing in the push-forwards and collect zero reward, so the formula is
// exact even when the goal is reachable within 2n steps.
double myopic_strategy_value(const StochasticAutomaton& a, const Policy& pi,
                             const Policy& improved, StateId x, int n, double gamma,
                             const std::vector<double>& v_star);

// Estimated improvement in value of a strategy that took k steps to compute:
// [cost of k steps under pi + gamma^k * E_{delta_k}[v_new]] - v_old(x).
// v_old/v_new are dense per-state estimates (restricted estimates lifted to
// the full state space).
double eiv_sample(const StochasticAutomaton& a, const Policy& pi, StateId x, int k, double gamma,
                  const std::vector<double>& v_old, const std::vector<double>& v_new);

// The frozen 24-strategy family; includes the standard quoted examples.
std::vector<DeliberationStrategy> standard_strategy_roster();

struct EIVFeatures {
    double env_size = 0.0;
    double value = 0.0;    // current restricted estimate of the executor state
    double fatness = 0.0;  // |E| / max(1, |fringe|)
    double mdist = 0.0;    // Manhattan distance start -> goal
};

double fatness(std::size_t envelope_size, std::size_t fringe_size);

struct EIVSample {
    EIVFeatures features;
    int strategy_index = 0;
    int k_steps = 0;
    Ticks ticks = 0;
    double improvement = 0.0;  // the raw eiv_sample value (delta V)
};

struct EIVCellStats {
    double mean = 0.0;  // mean of improvement / k
    double var = 0.0;
    long count = 0;
};

// Quantile-binned lookup of mean improvement-per-step for each strategy,
// conditioned on (|E|, V, fatness, M). Sparse cells fall back to the
// per-strategy marginal.
class EIVTable {
public:
    EIVTable() = default;
    EIVTable(std::vector<std::vector<double>> feature_edges, std::size_t roster_size,
             long min_count);

    static constexpr int kNumFeatures = 4;

    int bins(int feature) const { return static_cast<int>(feature_edges_[feature].size()) + 1; }
    const std::vector<std::vector<double>>& feature_edges() const { return feature_edges_; }
    std::size_t roster_size() const { return roster_size_; }
    long min_count() const { return min_count_; }

    int cell_index(const EIVFeatures& f) const;
    int num_cells() const;
    EIVCellStats& cell(int cell_idx, int strategy);
    const EIVCellStats& cell(int cell_idx, int strategy) const;
    EIVCellStats& marginal(int strategy) { return marginals_[strategy]; }
    const EIVCellStats& marginal(int strategy) const { return marginals_[strategy]; }

    // Cell statistic if populated, else the strategy marginal.
    const EIVCellStats& resolve(const EIVFeatures& f, int strategy) const;

private:
    std::vector<std::vector<double>> feature_edges_;  // per feature, interior edges
    std::size_t roster_size_ = 0;
    long min_count_ = 1;
    std::vector<EIVCellStats> cells_;  // [cell][strategy]
    std::vector<EIVCellStats> marginals_;
};

struct EIVBinningConfig {
    int bins_per_feature = 3;
    long min_count = 5;
};

EIVTable build_eiv_table(const std::vector<EIVSample>& samples,
                         const std::vector<DeliberationStrategy>& roster,
                         const EIVBinningConfig& binning);

// Argmax of mean improvement-per-step over the roster; ties by roster order.
int lookup_best_strategy(const EIVTable& table, const EIVFeatures& features);

enum class CouplingMode { FixedTicks, StrategyPaced, OnFallout };

struct CouplingConfig {
    CouplingMode mode = CouplingMode::StrategyPaced;
    Ticks fixed_ticks = 1;                  // interval length for FixedTicks
    double ticks_per_step = 1e4;            // deliberation ticks per execution step
    int step_cap = 5000;
};

enum class SchedulerKind { Lookup, Iter, Whole, Fixed };

struct SchedulerSpec {
    SchedulerKind kind = SchedulerKind::Lookup;
    const EIVTable* table = nullptr;  // Lookup; null falls back to uniform choice
    std::string fixed_label;          // Fixed
};

struct StepRecord {
    int step = 0;
    StateId state = 0;
    ActionId action = 0;
    bool reflexive = false;  // executor state outside the active policy's domain
    int policy_id = 0;
};

struct InvocationRecord {
    std::string label;
    Ticks ticks = 0;
    int k_steps = 0;
    std::size_t env_before = 0;
    std::size_t env_after = 0;
    double v_before = 0.0;
    double v_after = 0.0;
};

struct RunTrace {
    std::vector<StepRecord> steps;
    std::vector<InvocationRecord> invocations;
    bool reached_goal = false;
    bool capped = false;
    int steps_taken = 0;
};

struct RecurrentConfig {
    SolverConfig solver;
    CostConstants costs;
    CouplingConfig coupling;
    ActionId reflex = 0;
    double p_back = 0.05;
    // Grid geometry for the Manhattan-distance feature; M = 0 when absent.
    const grid::GridMap* map = nullptr;
    grid::Location goal{};
};

// Weakly-coupled planner/executor simulation: the executor steps under the
// latest received policy while the planner deliberates; policies and observed
// states are exchanged only at interval boundaries. Deterministic per seed.
RunTrace run_recurrent(const StochasticAutomaton& a, StateId start, SchedulerSpec scheduler,
                       const RecurrentConfig& cfg, std::uint64_t seed);

struct EIVGatherConfig {
    int run_budget = 100;
    RecurrentConfig recurrent;
    double p_success = 0.8;
    double max_distance_fraction = 1.0 / 3.0;
};

// Uniform-random strategy choice over the roster; one EIVSample per strategy
// invocation. Deterministic given seed.
std::vector<EIVSample> gather_eiv_statistics(const grid::GridMap& map,
                                             const std::vector<DeliberationStrategy>& roster,
                                             const EIVGatherConfig& cfg, std::uint64_t seed);

}  // namespace anyplan
