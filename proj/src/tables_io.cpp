#include "anyplan/tables_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace anyplan {

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw AnyplanError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw AnyplanError("cannot write file: " + path);
    f << content;
}

namespace {

std::vector<double> parse_doubles(std::istringstream& is) {
    std::vector<double> out;
    double v;
    while (is >> v) out.push_back(v);
    return out;
}

std::string join_doubles(const std::vector<double>& xs) {
    std::string out;
    for (double x : xs) {
        if (!out.empty()) out += ' ';
        out += format_double(x);
    }
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(',', pos);
        if (c == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
    return out;
}

double to_double(const std::string& s) {
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw AnyplanError("bad number in table file: '" + s + "'");
    }
}

}  // namespace

std::string save_profile_table(const ProfileTable& table) {
    std::ostringstream os;
    os << "profile-table v1\n";
    os << "size-edges " << join_doubles(table.size_edges()) << '\n';
    os << "value-edges " << join_doubles(table.value_edges()) << '\n';
    os << "n-grid";
    for (int n : table.n_grid()) os << ' ' << n;
    os << '\n';
    os << "min-count " << table.min_count() << '\n';
    os << "size_bin,value_bin,n,mean_dv,mean_cost,var_dv,count\n";
    for (int sb = 0; sb < table.size_bins(); ++sb)
        for (int vb = 0; vb < table.value_bins(); ++vb)
            for (std::size_t ni = 0; ni < table.n_grid().size(); ++ni) {
                const ProfileCellStats& c = table.cell(sb, vb, static_cast<int>(ni));
                if (c.count == 0) continue;
                os << sb << ',' << vb << ',' << table.n_grid()[ni] << ','
                   << format_double(c.mean_dv) << ',' << format_double(c.mean_cost) << ','
                   << format_double(c.var_dv) << ',' << c.count << '\n';
            }
    return os.str();
}

ProfileTable load_profile_table(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "profile-table v1")
        throw AnyplanError("profile table: bad or missing version header");
    auto expect_prefix = [&](const char* prefix) {
        if (!std::getline(is, line) || line.rfind(prefix, 0) != 0)
            throw AnyplanError(std::string("profile table: expected '") + prefix + "' line");
        std::istringstream ls(line.substr(std::string(prefix).size()));
        return ls;
    };
    std::istringstream se = expect_prefix("size-edges");
    std::vector<double> size_edges = parse_doubles(se);
    std::istringstream ve = expect_prefix("value-edges");
    std::vector<double> value_edges = parse_doubles(ve);
    std::istringstream ng = expect_prefix("n-grid");
    std::vector<int> n_grid;
    {
        int n;
        while (ng >> n) n_grid.push_back(n);
    }
    std::istringstream mc = expect_prefix("min-count");
    long min_count;
    if (!(mc >> min_count)) throw AnyplanError("profile table: bad min-count");
    if (!std::getline(is, line) || line.rfind("size_bin,", 0) != 0)
        throw AnyplanError("profile table: missing CSV header");

    ProfileTable table(size_edges, value_edges, n_grid, min_count);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 7) throw AnyplanError("profile table: bad row '" + line + "'");
        int sb = std::stoi(f[0]), vb = std::stoi(f[1]), n = std::stoi(f[2]);
        auto it = std::find(n_grid.begin(), n_grid.end(), n);
        if (sb < 0 || sb >= table.size_bins() || vb < 0 || vb >= table.value_bins() ||
            it == n_grid.end())
            throw AnyplanError("profile table: cell out of range in '" + line + "'");
        ProfileCellStats& c = table.cell(sb, vb, static_cast<int>(it - n_grid.begin()));
        c.mean_dv = to_double(f[3]);
        c.mean_cost = to_double(f[4]);
        c.var_dv = to_double(f[5]);
        c.count = std::stol(f[6]);
        c.sparse = c.count < min_count;
    }
    return table;
}

std::string save_eiv_table(const EIVTable& table,
                           const std::vector<DeliberationStrategy>& roster) {
    std::ostringstream os;
    os << "eiv-table v1\n";
    static const char* kFeatureNames[4] = {"env-size", "value", "fatness", "mdist"};
    for (int f = 0; f < EIVTable::kNumFeatures; ++f)
        os << kFeatureNames[f] << "-edges " << join_doubles(table.feature_edges()[f]) << '\n';
    os << "min-count " << table.min_count() << '\n';
    os << "strategies";
    for (const DeliberationStrategy& s : roster) os << '|' << s.label;
    os << '\n';
    os << "cell,strategy,mean,var,count\n";
    for (int ci = -1; ci < table.num_cells(); ++ci)
        for (std::size_t st = 0; st < roster.size(); ++st) {
            const EIVCellStats& c =
                ci < 0 ? table.marginal(static_cast<int>(st)) : table.cell(ci, static_cast<int>(st));
            if (c.count == 0) continue;
            os << ci << ',' << st << ',' << format_double(c.mean) << ',' << format_double(c.var)
               << ',' << c.count << '\n';
        }
    return os.str();
}

EIVTable load_eiv_table(const std::string& text,
                        const std::vector<DeliberationStrategy>& roster) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "eiv-table v1")
        throw AnyplanError("eiv table: bad or missing version header");
    std::vector<std::vector<double>> edges(EIVTable::kNumFeatures);
    static const char* kFeatureNames[4] = {"env-size", "value", "fatness", "mdist"};
    for (int f = 0; f < EIVTable::kNumFeatures; ++f) {
        std::string prefix = std::string(kFeatureNames[f]) + "-edges";
        if (!std::getline(is, line) || line.rfind(prefix, 0) != 0)
            throw AnyplanError("eiv table: expected '" + prefix + "' line");
        std::istringstream ls(line.substr(prefix.size()));
        edges[f] = parse_doubles(ls);
    }
    if (!std::getline(is, line) || line.rfind("min-count", 0) != 0)
        throw AnyplanError("eiv table: expected min-count");
    long min_count = std::stol(line.substr(9));
    if (!std::getline(is, line) || line.rfind("strategies", 0) != 0)
        throw AnyplanError("eiv table: expected strategies line");
    {
        std::vector<std::string> labels;
        std::size_t pos = line.find('|');
        while (pos != std::string::npos) {
            std::size_t next = line.find('|', pos + 1);
            labels.push_back(line.substr(pos + 1, next == std::string::npos ? std::string::npos
                                                                            : next - pos - 1));
            pos = next;
        }
        if (labels.size() != roster.size())
            throw AnyplanError("eiv table: roster size mismatch");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != roster[i].label)
                throw AnyplanError("eiv table: roster label mismatch at index " +
                                   std::to_string(i));
    }
    if (!std::getline(is, line) || line.rfind("cell,", 0) != 0)
        throw AnyplanError("eiv table: missing CSV header");
    EIVTable table(std::move(edges), roster.size(), min_count);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 5) throw AnyplanError("eiv table: bad row '" + line + "'");
        int ci = std::stoi(f[0]);
        int st = std::stoi(f[1]);
        if (ci < -1 || ci >= table.num_cells() || st < 0 ||
            st >= static_cast<int>(roster.size()))
            throw AnyplanError("eiv table: cell out of range in '" + line + "'");
        EIVCellStats& c = ci < 0 ? table.marginal(st) : table.cell(ci, st);
        c.mean = to_double(f[2]);
        c.var = to_double(f[3]);
        c.count = std::stol(f[4]);
    }
    return table;
}

std::string save_trace_csv(const std::vector<TraceEntry>& trace) {
    std::ostringstream os;
    os << "tick,value,mode,round\n";
    for (const TraceEntry& e : trace)
        os << e.tick << ',' << format_double(e.value) << ',' << e.mode << ',' << e.round << '\n';
    return os.str();
}

std::string save_run_steps_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << "step,state,action,reflexive,policy_id\n";
    for (const StepRecord& r : trace.steps)
        os << r.step << ',' << r.state << ',' << r.action << ',' << (r.reflexive ? 1 : 0) << ','
           << r.policy_id << '\n';
    return os.str();
}

std::string save_run_invocations_csv(const RunTrace& trace) {
    std::ostringstream os;
    os << "label,ticks,k_steps,env_before,env_after,v_before,v_after\n";
    for (const InvocationRecord& r : trace.invocations)
        os << r.label << ',' << r.ticks << ',' << r.k_steps << ',' << r.env_before << ','
           << r.env_after << ',' << format_double(r.v_before) << ',' << format_double(r.v_after)
           << '\n';
    return os.str();
}

}  // namespace anyplan
