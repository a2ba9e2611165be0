#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "anyplan/tables_io.hpp"

namespace anyplan {

// Flat key=value experiment spec. Unknown keys are errors; every command
// validates against its own allowlist.
class ExperimentSpec {
public:
    static ExperimentSpec parse(const std::string& text);
    static ExperimentSpec from_file(const std::string& path);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def = "") const;
    std::string require_string(const std::string& key) const;
    long long get_int(const std::string& key, long long def) const;
    double get_double(const std::string& key, double def) const;
    std::uint64_t get_seed() const { return static_cast<std::uint64_t>(get_int("seed", 0)); }

    // Throws if any present key is not in the allowlist.
    void check_keys(const std::vector<std::string>& allowed) const;

private:
    std::map<std::string, std::string> kv_;
};

// Exit codes: 0 success, 1 validation failure, 2 runtime error.
int cmd_gather(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);
int cmd_precursor(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);
int cmd_recurrent(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);
int cmd_oracle(const ExperimentSpec& spec, std::ostream& out, std::ostream& err);
int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace anyplan
