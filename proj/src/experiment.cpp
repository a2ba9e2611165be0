#include "anyplan/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace anyplan {

ExperimentSpec ExperimentSpec::parse(const std::string& text) {
    ExperimentSpec spec;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw AnyplanError("spec line " + std::to_string(lineno) + ": expected key=value");
        spec.kv_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
    return parse(read_file(path));
}

std::string ExperimentSpec::get_string(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
}

std::string ExperimentSpec::require_string(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw AnyplanError("spec: missing required key '" + key + "'");
    return it->second;
}

long long ExperimentSpec::get_int(const std::string& key, long long def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw AnyplanError("spec: bad integer for key '" + key + "'");
    }
}

double ExperimentSpec::get_double(const std::string& key, double def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw AnyplanError("spec: bad number for key '" + key + "'");
    }
}

void ExperimentSpec::check_keys(const std::vector<std::string>& allowed) const {
    for (const auto& [k, v] : kv_)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw AnyplanError("spec: unknown key '" + k + "'");
}

namespace {

SolverConfig solver_from(const ExperimentSpec& spec) {
    SolverConfig cfg;
    cfg.gamma = spec.get_double("gamma", 0.95);
    cfg.eval_tolerance = spec.get_double("eval_tolerance", 1e-9);
    return cfg;
}

grid::Location parse_location(const std::string& s) {
    std::istringstream is(s);
    int r, c;
    char comma;
    if (!(is >> r >> comma >> c) || comma != ',')
        throw AnyplanError("bad location '" + s + "', expected <row>,<col>");
    return {r, c};
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        std::size_t c = s.find(',', pos);
        if (c == std::string::npos) {
            if (pos < s.size()) out.push_back(s.substr(pos));
            break;
        }
        out.push_back(s.substr(pos, c - pos));
        pos = c + 1;
    }
    return out;
}

struct Summary {
    double mean = 0, median = 0, stddev = 0;
};

Summary summarize(std::vector<double> xs) {
    Summary s;
    if (xs.empty()) return s;
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / xs.size();
    double ss = 0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
    std::sort(xs.begin(), xs.end());
    s.median = xs.size() % 2 ? xs[xs.size() / 2]
                             : 0.5 * (xs[xs.size() / 2 - 1] + xs[xs.size() / 2]);
    return s;
}

}  // namespace

int cmd_gather(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        spec.check_keys({"map", "seed", "out", "kind", "gamma", "eval_tolerance", "samples",
                         "runs", "min_count", "size_bins", "value_bins", "bins_per_feature",
                         "p_success", "max_distance_fraction", "ticks_per_step", "p_back",
                         "step_cap"});
        grid::GridMap map = grid::load_map_file(spec.require_string("map"));
        std::string kind = spec.get_string("kind", "profile");
        std::string out_path = spec.require_string("out");
        std::uint64_t seed = spec.get_seed();
        if (kind == "profile") {
            GatherConfig cfg;
            cfg.sample_budget = static_cast<int>(spec.get_int("samples", 1000));
            cfg.solver = solver_from(spec);
            cfg.p_success = spec.get_double("p_success", 0.8);
            cfg.max_distance_fraction = spec.get_double("max_distance_fraction", 1.0 / 3.0);
            auto samples = gather_profile_statistics(map, cfg, seed);
            ProfileBinningConfig binning;
            binning.size_bins = static_cast<int>(spec.get_int("size_bins", 4));
            binning.value_bins = static_cast<int>(spec.get_int("value_bins", 4));
            binning.min_count = spec.get_int("min_count", 5);
            ProfileTable table = build_profile_table(samples, binning, cfg.n_grid);
            write_file(out_path, save_profile_table(table));
            long populated = 0, total = 0;
            double var_sum = 0;
            for (int sb = 0; sb < table.size_bins(); ++sb)
                for (int vb = 0; vb < table.value_bins(); ++vb)
                    for (std::size_t ni = 0; ni < table.n_grid().size(); ++ni) {
                        const auto& c = table.cell(sb, vb, static_cast<int>(ni));
                        if (!c.sparse) {
                            ++populated;
                            var_sum += c.var_dv;
                        }
                        total += c.count;
                    }
            out << "profile table: " << populated << " populated cells, " << total
                << " samples, mean cell variance "
                << format_double(populated ? var_sum / populated : 0.0) << "\n";
        } else if (kind == "eiv") {
            EIVGatherConfig cfg;
            cfg.run_budget = static_cast<int>(spec.get_int("runs", 100));
            cfg.recurrent.solver = solver_from(spec);
            cfg.recurrent.p_back = spec.get_double("p_back", 0.05);
            cfg.recurrent.coupling.ticks_per_step = spec.get_double("ticks_per_step", 1e4);
            cfg.recurrent.coupling.step_cap =
                static_cast<int>(spec.get_int("step_cap", 5000));
            cfg.p_success = spec.get_double("p_success", 0.8);
            cfg.max_distance_fraction = spec.get_double("max_distance_fraction", 1.0 / 3.0);
            auto roster = standard_strategy_roster();
            auto samples = gather_eiv_statistics(map, roster, cfg, seed);
            EIVBinningConfig binning;
            binning.bins_per_feature = static_cast<int>(spec.get_int("bins_per_feature", 3));
            binning.min_count = spec.get_int("min_count", 5);
            EIVTable table = build_eiv_table(samples, roster, binning);
            write_file(out_path, save_eiv_table(table, roster));
            out << "eiv table: " << samples.size() << " samples over " << roster.size()
                << " strategies, " << table.num_cells() << " cells\n";
        } else {
            throw AnyplanError("gather: kind must be 'profile' or 'eiv'");
        }
        return 0;
    } catch (const AnyplanError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_precursor(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        spec.check_keys({"map", "seed", "out", "table", "gamma", "eval_tolerance", "modes",
                         "tasks", "deadline", "delay_cost_rate", "p_success",
                         "max_distance_fraction"});
        grid::GridMap map = grid::load_map_file(spec.require_string("map"));
        std::string out_prefix = spec.require_string("out");
        std::vector<std::string> modes =
            split_list(spec.get_string("modes", "GREEDY,INFLEXIBLE-FULL,FLEXIBLE-FULL"));
        int tasks = static_cast<int>(spec.get_int("tasks", 1));
        PrecursorConfig pcfg;
        pcfg.solver = solver_from(spec);
        pcfg.deadline = spec.get_int("deadline", -1);
        if (spec.has("delay_cost_rate"))
            pcfg.delay_cost_rate = spec.get_double("delay_cost_rate", 0.0);
        double p_success = spec.get_double("p_success", 0.8);
        double mdf = spec.get_double("max_distance_fraction", 1.0 / 3.0);

        ProfileTable table;
        bool have_table = spec.has("table");
        if (have_table) table = load_profile_table(read_file(spec.require_string("table")));

        Rng master(spec.get_seed());
        for (int t = 0; t < tasks; ++t) {
            Rng task_rng = master.fork(static_cast<std::uint64_t>(t) + 1);
            grid::Task task = grid::random_task(map, task_rng, mdf);
            StochasticAutomaton a = grid::build_task_automaton(map, task.goal, p_success);
            for (const std::string& mode_name : modes) {
                PrecursorMode mode;
                if (mode_name == "GREEDY")
                    mode = PrecursorMode::Greedy;
                else if (mode_name == "INFLEXIBLE-FULL")
                    mode = PrecursorMode::InflexibleFull;
                else if (mode_name == "FLEXIBLE-FULL")
                    mode = PrecursorMode::FlexibleFull;
                else
                    throw AnyplanError("unknown precursor mode '" + mode_name + "'");
                if (mode == PrecursorMode::Greedy && !have_table &&
                    (pcfg.deadline >= 0 || pcfg.delay_cost_rate))
                    throw AnyplanError("GREEDY mode requires table=<profile table file>");
                PrecursorResult res =
                    run_precursor(a, task.start, mode, pcfg, have_table ? &table : nullptr);
                write_file(out_prefix + "_task" + std::to_string(t) + "_" + mode_name + ".csv",
                           save_trace_csv(res.trace));
                out << "task " << t << " " << mode_name << ": final value "
                    << format_double(res.trace.back().value) << " ticks " << res.ticks_spent
                    << "\n";
            }
        }
        return 0;
    } catch (const AnyplanError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_recurrent(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        spec.check_keys({"map", "seed", "out", "table", "gamma", "eval_tolerance", "schedulers",
                         "tasks", "step_cap", "ticks_per_step", "p_back", "p_success",
                         "max_distance_fraction", "fixed_strategy"});
        grid::GridMap map = grid::load_map_file(spec.require_string("map"));
        std::string out_prefix = spec.require_string("out");
        std::vector<std::string> scheds =
            split_list(spec.get_string("schedulers", "LOOKUP,ITER,WHOLE"));
        int tasks = static_cast<int>(spec.get_int("tasks", 25));
        RecurrentConfig rcfg;
        rcfg.solver = solver_from(spec);
        rcfg.p_back = spec.get_double("p_back", 0.05);
        rcfg.coupling.ticks_per_step = spec.get_double("ticks_per_step", 1e4);
        rcfg.coupling.step_cap = static_cast<int>(spec.get_int("step_cap", 5000));
        double p_success = spec.get_double("p_success", 0.8);
        double mdf = spec.get_double("max_distance_fraction", 1.0 / 3.0);

        auto roster = standard_strategy_roster();
        EIVTable table;
        bool have_table = spec.has("table");
        if (have_table) table = load_eiv_table(read_file(spec.require_string("table")), roster);
        bool need_table = std::find(scheds.begin(), scheds.end(), "LOOKUP") != scheds.end();
        if (need_table && !have_table)
            throw AnyplanError("LOOKUP scheduler requires table=<eiv table file>");

        std::ostringstream agg;
        agg << "scheduler,mean_steps,median_steps,stddev_steps,runs,capped\n";
        Rng master(spec.get_seed());
        std::vector<grid::Task> task_list;
        std::vector<std::uint64_t> run_seeds;
        for (int t = 0; t < tasks; ++t) {
            Rng task_rng = master.fork(static_cast<std::uint64_t>(t) + 1);
            task_list.push_back(grid::random_task(map, task_rng, mdf));
            run_seeds.push_back(task_rng.next_u64());
        }
        for (const std::string& name : scheds) {
            SchedulerSpec sspec;
            if (name == "LOOKUP") {
                sspec.kind = SchedulerKind::Lookup;
                sspec.table = &table;
            } else if (name == "ITER") {
                sspec.kind = SchedulerKind::Iter;
            } else if (name == "WHOLE") {
                sspec.kind = SchedulerKind::Whole;
            } else if (name.rfind("FIXED:", 0) == 0) {
                sspec.kind = SchedulerKind::Fixed;
                sspec.fixed_label = name.substr(6);
            } else {
                throw AnyplanError("unknown scheduler '" + name + "'");
            }
            std::vector<double> steps;
            int capped = 0;
            for (int t = 0; t < tasks; ++t) {
                StochasticAutomaton a =
                    grid::build_task_automaton(map, task_list[t].goal, p_success);
                RecurrentConfig cfg_t = rcfg;
                cfg_t.map = &map;
                cfg_t.goal = task_list[t].goal;
                RunTrace trace = run_recurrent(a, task_list[t].start, sspec, cfg_t, run_seeds[t]);
                steps.push_back(static_cast<double>(trace.steps_taken));
                if (trace.capped) ++capped;
                std::string base =
                    out_prefix + "_task" + std::to_string(t) + "_" + name;
                write_file(base + "_steps.csv", save_run_steps_csv(trace));
                write_file(base + "_invocations.csv", save_run_invocations_csv(trace));
            }
            Summary s = summarize(steps);
            agg << name << ',' << format_double(s.mean) << ',' << format_double(s.median) << ','
                << format_double(s.stddev) << ',' << tasks << ',' << capped << '\n';
            out << name << ": mean steps " << format_double(s.mean) << " (capped " << capped
                << "/" << tasks << ")\n";
        }
        write_file(out_prefix + "_aggregate.csv", agg.str());
        return 0;
    } catch (const AnyplanError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_oracle(const ExperimentSpec& spec, std::ostream& out, std::ostream& err) {
    try {
        spec.check_keys({"map", "goal", "gamma", "eval_tolerance", "out", "p_success",
                         "max_states", "seed"});
        grid::GridMap map = grid::load_map_file(spec.require_string("map"));
        grid::Location goal = parse_location(spec.require_string("goal"));
        long long cap = spec.get_int("max_states", 200000);
        if (map.num_states() > cap)
            throw AnyplanError("oracle: automaton has " + std::to_string(map.num_states()) +
                               " states, exceeding the cap of " + std::to_string(cap));
        StochasticAutomaton a =
            grid::build_task_automaton(map, goal, spec.get_double("p_success", 0.8));
        SolverConfig cfg = solver_from(spec);
        ValueFunction v = value_iteration(a, cfg);
        Policy pi = policy_improve(a, v, cfg);
        std::ostringstream os;
        os << "oracle v1\n";
        os << "gamma " << format_double(cfg.gamma) << "\n";
        os << "state,value,action\n";
        for (StateId s = 0; s < a.num_states(); ++s)
            os << s << ',' << format_double(v.values[s]) << ',' << pi.action_for(s) << '\n';
        write_file(spec.require_string("out"), os.str());
        out << "oracle: " << a.num_states() << " states solved\n";
        return 0;
    } catch (const AnyplanError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
    try {
        std::string text = read_file(path);
        if (text.rfind("profile-table v1", 0) == 0) {
            load_profile_table(text);
            out << "profile table ok\n";
            return 0;
        }
        if (text.rfind("eiv-table v1", 0) == 0) {
            load_eiv_table(text, standard_strategy_roster());
            out << "eiv table ok\n";
            return 0;
        }
        // otherwise treat as a map and validate the generated automaton
        grid::GridMap map = grid::load_map(text);
        StochasticAutomaton a = grid::build_automaton(map);
        std::vector<Violation> v = validate_automaton(a);
        if (v.empty()) {
            out << "map ok: " << map.num_locations() << " locations, " << map.num_states()
                << " states\n";
            return 0;
        }
        for (const Violation& viol : v)
            err << viol.kind << " at state " << viol.state << " action " << viol.action << ": "
                << viol.detail << "\n";
        return 1;
    } catch (const AnyplanError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace anyplan
