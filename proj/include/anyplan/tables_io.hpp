#pragma once

#include <string>
#include <vector>

#include "anyplan/profile.hpp"
#include "anyplan/recurrent.hpp"

namespace anyplan {

// Versioned text formats. Doubles are written with round-trip precision so
// save/load is lossless and repeated saves are byte-identical.

std::string save_profile_table(const ProfileTable& table);
ProfileTable load_profile_table(const std::string& text);

std::string save_eiv_table(const EIVTable& table, const std::vector<DeliberationStrategy>& roster);
// Loads the table; the roster labels in the file must match `roster`.
EIVTable load_eiv_table(const std::string& text, const std::vector<DeliberationStrategy>& roster);

// "tick,value,mode,round" rows.
std::string save_trace_csv(const std::vector<TraceEntry>& trace);

// Per-step and per-invocation CSVs for a recurrent run.
std::string save_run_steps_csv(const RunTrace& trace);
std::string save_run_invocations_csv(const RunTrace& trace);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Round-trip double formatting (shortest exact representation).
std::string format_double(double v);

}  // namespace anyplan
