#include "anyplan/automaton.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace anyplan {

StochasticAutomaton::StochasticAutomaton(StateId num_states, ActionId num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      row_offset_(static_cast<std::size_t>(num_states) * num_actions + 1, 0),
      is_goal_(num_states, 0) {
    if (num_states <= 0 || num_actions <= 0)
        throw AnyplanError("automaton must have positive state and action counts");
}

void StochasticAutomaton::add_row(StateId state, ActionId action, std::vector<Transition> entries) {
    if (finalized_) throw AnyplanError("add_row after finalize");
    std::size_t r = row_index(state, action);
    // rows arrive in order; fill offsets for skipped empty rows
    for (std::size_t i = next_row_; i <= r; ++i) row_offset_[i] = transitions_.size();
    next_row_ = r + 1;
    for (const Transition& t : entries) transitions_.push_back(t);
    row_offset_[r + 1] = transitions_.size();
}

void StochasticAutomaton::finalize() {
    std::size_t rows = static_cast<std::size_t>(num_states_) * num_actions_;
    for (std::size_t i = next_row_; i <= rows; ++i) row_offset_[i] = transitions_.size();
    next_row_ = rows + 1;
    finalized_ = true;
}

void StochasticAutomaton::set_goal_states(std::vector<StateId> goals) {
    goal_states_ = std::move(goals);
    std::fill(is_goal_.begin(), is_goal_.end(), 0);
    for (StateId g : goal_states_) {
        if (g < 0 || g >= num_states_) throw AnyplanError("goal state out of range");
        is_goal_[g] = 1;
    }
}

std::vector<Violation> validate_automaton(const StochasticAutomaton& a) {
    std::vector<Violation> out;
    for (StateId s = 0; s < a.num_states(); ++s) {
        for (ActionId act = 0; act < a.num_actions(); ++act) {
            const Transition* b = a.row_begin(s, act);
            const Transition* e = a.row_end(s, act);
            if (b == e) continue;  // empty rows reported per state below
            double sum = 0.0;
            std::set<StateId> seen;
            for (const Transition* t = b; t != e; ++t) {
                sum += t->prob;
                if (t->prob < 0.0)
                    out.push_back({"negative-prob", s, act,
                                   "p=" + std::to_string(t->prob)});
                if (t->to < 0 || t->to >= a.num_states())
                    out.push_back({"dangling-index", s, act,
                                   "successor " + std::to_string(t->to)});
                if (!seen.insert(t->to).second)
                    out.push_back({"duplicate-successor", s, act,
                                   "successor " + std::to_string(t->to)});
            }
            if (std::abs(sum - 1.0) > 1e-9) {
                std::ostringstream os;
                os << "sum=" << sum;
                out.push_back({"row-sum", s, act, os.str()});
            }
        }
    }
    return out;
}

}  // namespace anyplan
