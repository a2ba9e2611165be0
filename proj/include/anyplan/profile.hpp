#pragma once

#include <optional>
#include <string>
#include <vector>

#include "anyplan/envelope.hpp"
#include "anyplan/gridworld.hpp"

namespace anyplan {

// One gathered data point: a refinement of n states applied to an envelope of
// env_size whose optimized start value was v_before.
struct ProfileSample {
    int env_size = 0;
    double v_before = 0.0;
    int n = 0;
    double delta_v = 0.0;
    Ticks cost = 0;
};

struct ProfileCellStats {
    double mean_dv = 0.0;
    double mean_cost = 0.0;
    double var_dv = 0.0;
    long count = 0;
    bool sparse = true;
};

// Binned performance profiles: (envelope-size bin, value bin) -> curve over
// the n-grid of expected improvement and expected cost.
class ProfileTable {
public:
    ProfileTable() = default;
    ProfileTable(std::vector<double> size_edges, std::vector<double> value_edges,
                 std::vector<int> n_grid, long min_count);

    int size_bins() const { return static_cast<int>(size_edges_.size()) + 1; }
    int value_bins() const { return static_cast<int>(value_edges_.size()) + 1; }
    const std::vector<int>& n_grid() const { return n_grid_; }
    const std::vector<double>& size_edges() const { return size_edges_; }
    const std::vector<double>& value_edges() const { return value_edges_; }
    long min_count() const { return min_count_; }

    int size_bin(double env_size) const;
    int value_bin(double v) const;
    ProfileCellStats& cell(int sb, int vb, int ni);
    const ProfileCellStats& cell(int sb, int vb, int ni) const;

    // Cell for the query, falling back to the nearest populated cell by bin
    // distance (a cell is populated if any n-option is non-sparse).
    std::optional<std::pair<int, int>> resolve(double env_size, double v) const;
    bool any_populated() const;

private:
    std::vector<double> size_edges_;   // interior edges, ascending
    std::vector<double> value_edges_;
    std::vector<int> n_grid_;
    long min_count_ = 1;
    std::vector<ProfileCellStats> cells_;  // [sb][vb][ni] row-major
};

struct ProfileBinningConfig {
    int size_bins = 4;
    int value_bins = 4;
    long min_count = 5;
};

extern const std::vector<int> kDefaultNGrid;  // {1, 2, 5, 10, 20, 50}

struct GatherConfig {
    int sample_budget = 1000;        // number of recorded samples (upper bound)
    std::vector<int> n_grid = kDefaultNGrid;
    int max_rounds_per_task = 8;
    SolverConfig solver;
    CostConstants costs;
    double p_success = 0.8;
    double max_distance_fraction = 1.0 / 3.0;
};

// Draws random tasks on the map and, per round, measures the counterfactual
// improvement of adding the top-n fall-out states for every n in the grid
// from a common base envelope. Deterministic given the seed.
std::vector<ProfileSample> gather_profile_statistics(const grid::GridMap& map,
                                                     const GatherConfig& cfg,
                                                     std::uint64_t seed);

ProfileTable build_profile_table(const std::vector<ProfileSample>& samples,
                                 const ProfileBinningConfig& binning,
                                 const std::vector<int>& n_grid = kDefaultNGrid);

struct GreedyDecision {
    bool stop = true;
    int n = 0;
    double expected_dv = 0.0;
    double expected_cost = 0.0;
};

// Greedy ratio rule: among grid options that fit the remaining budget, pick
// the n maximizing E[dV]/E[cost]; stop when nothing fits or the best E[dV] is
// non-positive. With delay_cost_rate set (no-deadline model), stop when the
// best E[dV] - rate * E[cost] is non-positive.
GreedyDecision greedy_round(const ProfileTable& table, double env_size, double v,
                            Ticks remaining_ticks,
                            std::optional<double> delay_cost_rate = std::nullopt);

enum class PrecursorMode { Greedy, InflexibleFull, FlexibleFull };

struct TraceEntry {
    Ticks tick = 0;
    double value = 0.0;  // exact full-automaton value of the held policy
    std::string mode;
    int round = 0;
};

struct PrecursorResult {
    Policy policy;
    std::vector<TraceEntry> trace;
    Ticks ticks_spent = 0;
};

struct PrecursorConfig {
    SolverConfig solver;
    CostConstants costs;
    ActionId reflex = 0;
    Ticks deadline = -1;  // < 0: unbounded
    std::optional<double> delay_cost_rate;
};

// Deadline-bounded deliberation. GREEDY needs a table; with an unbounded
// budget it keeps extending until the envelope is closed, so all modes
// converge to the same start value. Trace values are exact full-automaton
// evaluations of the held policy (offline, not charged ticks).
PrecursorResult run_precursor(const StochasticAutomaton& a, StateId start, PrecursorMode mode,
                              const PrecursorConfig& cfg, const ProfileTable* table = nullptr);

}  // namespace anyplan
