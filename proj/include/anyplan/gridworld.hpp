#pragma once

#include <string>
#include <vector>

#include "anyplan/automaton.hpp"
#include "anyplan/types.hpp"

namespace anyplan {
namespace grid {

enum class Cell : char { Free = '.', Wall = '#', Sink = 'O' };

enum Orientation { North = 0, East = 1, South = 2, West = 3 };

// Action ids, in fixed order. STAY first so tie-breaking by lowest id keeps
// an uninformed policy in place.
enum GridAction : ActionId { Stay = 0, Forward = 1, TurnRight = 2, TurnLeft = 3, TurnAbout = 4 };
constexpr ActionId kNumGridActions = 5;

struct Location {
    int row = 0;
    int col = 0;
    bool operator==(const Location&) const = default;
};

class GridMap {
public:
    GridMap(int width, int height, std::vector<Cell> cells);

    int width() const { return width_; }
    int height() const { return height_; }
    Cell cell(int row, int col) const { return cells_[row * width_ + col]; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }
    bool walkable(int row, int col) const {
        return in_bounds(row, col) && cell(row, col) != Cell::Wall;
    }

    int num_locations() const { return static_cast<int>(locations_.size()); }
    int num_states() const { return num_locations() * 4; }
    const std::vector<Location>& locations() const { return locations_; }
    // -1 on WALL cells.
    int location_index(int row, int col) const { return loc_index_[row * width_ + col]; }

    StateId state_id(int location_index, Orientation o) const {
        return static_cast<StateId>(location_index * 4 + o);
    }
    StateId state_id(const Location& loc, Orientation o) const {
        return state_id(location_index(loc.row, loc.col), o);
    }
    Location location_of(StateId s) const { return locations_[s / 4]; }
    Orientation orientation_of(StateId s) const { return static_cast<Orientation>(s % 4); }

private:
    int width_;
    int height_;
    std::vector<Cell> cells_;
    std::vector<Location> locations_;
    std::vector<int> loc_index_;
};

// Format: line 1 "<width> <height>", then height lines of width characters
// from {'.', '#', 'O'}.
GridMap load_map(const std::string& text);
GridMap load_map_file(const std::string& path);
std::string save_map(const GridMap& map);

// "<row>,<col>,<N|E|S|W>"
std::string format_robot_state(const GridMap& map, StateId s);
StateId parse_robot_state(const GridMap& map, const std::string& text);

// Orientation-dependent automaton: 5 actions per state; STAY certain, the
// rest succeed with p_success and otherwise leave the state unchanged.
// FORWARD into a wall or off the map is a certain no-op. Sink locations
// absorb under every action.
StochasticAutomaton build_automaton(const GridMap& map, double p_success = 0.8);

// Goal/reward construction: the 4 orientation states at goal_location become
// absorbing goals (reward 0); every other state rewards -1. Returns the
// automaton with goal states installed.
StochasticAutomaton build_task_automaton(const GridMap& map, const Location& goal_location,
                                         double p_success = 0.8);

int manhattan_distance(const Location& a, const Location& b);

struct Task {
    StateId start;
    Location goal;
};

// Uniform over (start state, goal location) pairs of non-sink free cells with
// Manhattan distance strictly below max_distance_fraction * (width + height).
Task random_task(const GridMap& map, Rng& rng, double max_distance_fraction = 1.0 / 3.0);

// Synthetic office-corridor map generator used for desk-scale experiments;
// deterministic for a given size. Produces a connected, sink-free map with a
// corridor backbone and rooms, at least `min_locations` walkable cells.
GridMap make_office_map(int min_locations, std::uint64_t seed = 0);

}  // namespace grid
}  // namespace anyplan
