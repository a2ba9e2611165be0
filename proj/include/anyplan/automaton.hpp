#pragma once

#include <string>
#include <vector>

#include "anyplan/types.hpp"

namespace anyplan {

struct Transition {
    StateId to;
    double prob;
};

// Sparse stochastic automaton in CSR layout: row (state, action) holds its
// successor list in transitions[row_offset[row] .. row_offset[row+1]).
// Rows with no entries are allowed only transiently during construction;
// validate() reports them.
class StochasticAutomaton {
public:
    StochasticAutomaton(StateId num_states, ActionId num_actions);

    StateId num_states() const { return num_states_; }
    ActionId num_actions() const { return num_actions_; }

    // Rows must be supplied in increasing (state, action) order.
    void add_row(StateId state, ActionId action, std::vector<Transition> entries);
    void finalize();

    const Transition* row_begin(StateId s, ActionId a) const {
        return transitions_.data() + row_offset_[row_index(s, a)];
    }
    const Transition* row_end(StateId s, ActionId a) const {
        return transitions_.data() + row_offset_[row_index(s, a) + 1];
    }
    bool row_empty(StateId s, ActionId a) const {
        std::size_t r = row_index(s, a);
        return row_offset_[r] == row_offset_[r + 1];
    }

    void set_goal_states(std::vector<StateId> goals);
    const std::vector<StateId>& goal_states() const { return goal_states_; }
    bool is_goal(StateId s) const { return is_goal_[s]; }

    // Reward for the goal-of-achievement formulation: 0 at goals, -1 elsewhere.
    double reward(StateId s) const { return is_goal_[s] ? 0.0 : -1.0; }

private:
    std::size_t row_index(StateId s, ActionId a) const {
        return static_cast<std::size_t>(s) * num_actions_ + a;
    }

    StateId num_states_;
    ActionId num_actions_;
    std::vector<std::size_t> row_offset_;
    std::vector<Transition> transitions_;
    std::vector<StateId> goal_states_;
    std::vector<char> is_goal_;
    std::size_t next_row_ = 0;
    bool finalized_ = false;
};

struct Violation {
    std::string kind;     // "row-sum", "negative-prob", "dangling-index",
                          // "duplicate-successor", "empty-row", "goal-out-of-range"
    StateId state = kNoState;
    ActionId action = -1;
    std::string detail;
};

// Empty result iff all StochasticAutomaton invariants hold.
std::vector<Violation> validate_automaton(const StochasticAutomaton& a);

}  // namespace anyplan
