#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "anyplan/experiment.hpp"

namespace {

// Shared flag plumbing: each subcommand reads an optional key=value config
// file, then command-line flags override individual keys.
struct CommonFlags {
    std::string config;
    std::string map;
    std::string out;
    std::string table;
    std::string seed;
    std::string gamma;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment spec file (key=value lines)");
    cmd->add_option("--map", f.map, "map file");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--gamma", f.gamma, "discount factor");
    cmd->add_option("--out", f.out, "output file or prefix");
    cmd->add_option("--table", f.table, "statistics table file");
}

anyplan::ExperimentSpec build_spec(const CommonFlags& f) {
    anyplan::ExperimentSpec spec;
    if (!f.config.empty()) spec = anyplan::ExperimentSpec::from_file(f.config);
    if (!f.map.empty()) spec.set("map", f.map);
    if (!f.seed.empty()) spec.set("seed", f.seed);
    if (!f.gamma.empty()) spec.set("gamma", f.gamma);
    if (!f.out.empty()) spec.set("out", f.out);
    if (!f.table.empty()) spec.set("table", f.table);
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"anytime planning toolkit for sparse stochastic automata"};
    app.require_subcommand(1);

    CommonFlags gather_f, precursor_f, recurrent_f, oracle_f;
    std::string gather_kind;
    std::string oracle_goal;
    std::string validate_path;

    CLI::App* gather = app.add_subcommand("gather", "collect deliberation statistics");
    add_common(gather, gather_f);
    gather->add_option("--kind", gather_kind, "table kind: profile or eiv");

    CLI::App* precursor = app.add_subcommand("precursor", "deadline-bounded deliberation runs");
    add_common(precursor, precursor_f);

    CLI::App* recurrent = app.add_subcommand("recurrent", "interleaved plan/execute runs");
    add_common(recurrent, recurrent_f);

    CLI::App* oracle = app.add_subcommand("oracle", "exact solve of a task automaton");
    add_common(oracle, oracle_f);
    oracle->add_option("--goal", oracle_goal, "goal location <row>,<col>");

    CLI::App* validate = app.add_subcommand("validate", "check a map or table file");
    validate->add_option("file", validate_path, "file to validate")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    try {
        if (gather->parsed()) {
            anyplan::ExperimentSpec spec = build_spec(gather_f);
            if (!gather_kind.empty()) spec.set("kind", gather_kind);
            return anyplan::cmd_gather(spec, std::cout, std::cerr);
        }
        if (precursor->parsed())
            return anyplan::cmd_precursor(build_spec(precursor_f), std::cout, std::cerr);
        if (recurrent->parsed())
            return anyplan::cmd_recurrent(build_spec(recurrent_f), std::cout, std::cerr);
        if (oracle->parsed()) {
            anyplan::ExperimentSpec spec = build_spec(oracle_f);
            if (!oracle_goal.empty()) spec.set("goal", oracle_goal);
            return anyplan::cmd_oracle(spec, std::cout, std::cerr);
        }
        if (validate->parsed())
            return anyplan::cmd_validate(validate_path, std::cout, std::cerr);
    } catch (const anyplan::AnyplanError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
