#include "anyplan/gridworld.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace anyplan {
namespace grid {

GridMap::GridMap(int width, int height, std::vector<Cell> cells)
    : width_(width), height_(height), cells_(std::move(cells)) {
    if (width_ <= 0 || height_ <= 0) throw AnyplanError("map dimensions must be positive");
    if (cells_.size() != static_cast<std::size_t>(width_) * height_)
        throw AnyplanError("map cell count does not match dimensions");
    loc_index_.assign(cells_.size(), -1);
    for (int r = 0; r < height_; ++r)
        for (int c = 0; c < width_; ++c)
            if (cell(r, c) != Cell::Wall) {
                loc_index_[r * width_ + c] = static_cast<int>(locations_.size());
                locations_.push_back({r, c});
            }
    bool any_free = false;
    for (Cell c : cells_)
        if (c == Cell::Free) any_free = true;
    if (!any_free) throw AnyplanError("map has no FREE cells");
}

GridMap load_map(const std::string& text) {
    std::istringstream is(text);
    int w = 0, h = 0;
    std::string header;
    if (!std::getline(is, header)) throw AnyplanError("map: missing header line");
    {
        std::istringstream hs(header);
        if (!(hs >> w >> h)) throw AnyplanError("map: bad header '" + header + "'");
    }
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(w) * h);
    for (int r = 0; r < h; ++r) {
        std::string line;
        if (!std::getline(is, line)) throw AnyplanError("map: missing row " + std::to_string(r));
        if (static_cast<int>(line.size()) != w)
            throw AnyplanError("map: row " + std::to_string(r) + " has length " +
                               std::to_string(line.size()) + ", expected " + std::to_string(w));
        for (char c : line) {
            switch (c) {
                case '.': cells.push_back(Cell::Free); break;
                case '#': cells.push_back(Cell::Wall); break;
                case 'O': cells.push_back(Cell::Sink); break;
                default:
                    throw AnyplanError(std::string("map: unknown character '") + c + "'");
            }
        }
    }
    return GridMap(w, h, std::move(cells));
}

GridMap load_map_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw AnyplanError("cannot open map file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return load_map(ss.str());
}

std::string save_map(const GridMap& map) {
    std::ostringstream os;
    os << map.width() << ' ' << map.height() << '\n';
    for (int r = 0; r < map.height(); ++r) {
        for (int c = 0; c < map.width(); ++c) os << static_cast<char>(map.cell(r, c));
        os << '\n';
    }
    return os.str();
}

std::string format_robot_state(const GridMap& map, StateId s) {
    static const char* names = "NESW";
    Location loc = map.location_of(s);
    std::ostringstream os;
    os << loc.row << ',' << loc.col << ',' << names[map.orientation_of(s)];
    return os.str();
}

StateId parse_robot_state(const GridMap& map, const std::string& text) {
    int row = 0, col = 0;
    char o = 0, c1 = 0, c2 = 0;
    std::istringstream is(text);
    if (!(is >> row >> c1 >> col >> c2 >> o) || c1 != ',' || c2 != ',')
        throw AnyplanError("bad robot state '" + text + "'");
    int oi;
    switch (o) {
        case 'N': oi = North; break;
        case 'E': oi = East; break;
        case 'S': oi = South; break;
        case 'W': oi = West; break;
        default: throw AnyplanError("bad orientation in '" + text + "'");
    }
    if (!map.walkable(row, col)) throw AnyplanError("robot state on wall: '" + text + "'");
    return map.state_id(map.location_index(row, col), static_cast<Orientation>(oi));
}

namespace {

constexpr int kDRow[4] = {-1, 0, 1, 0};  // N E S W
constexpr int kDCol[4] = {0, 1, 0, -1};

}  // namespace

StochasticAutomaton build_automaton(const GridMap& map, double p_success) {
    if (p_success <= 0.0 || p_success > 1.0)
        throw AnyplanError("p_success must be in (0, 1]");
    StochasticAutomaton a(map.num_states(), kNumGridActions);
    for (StateId s = 0; s < map.num_states(); ++s) {
        Location loc = map.location_of(s);
        Orientation o = map.orientation_of(s);
        bool sink = map.cell(loc.row, loc.col) == Cell::Sink;
        for (ActionId act = 0; act < kNumGridActions; ++act) {
            if (sink || act == Stay) {
                a.add_row(s, act, {{s, 1.0}});
                continue;
            }
            StateId target = s;
            switch (act) {
                case Forward: {
                    int nr = loc.row + kDRow[o];
                    int nc = loc.col + kDCol[o];
                    if (map.walkable(nr, nc))
                        target = map.state_id(map.location_index(nr, nc), o);
                    break;
                }
                case TurnRight:
                    target = map.state_id(s / 4, static_cast<Orientation>((o + 1) % 4));
                    break;
                case TurnLeft:
                    target = map.state_id(s / 4, static_cast<Orientation>((o + 3) % 4));
                    break;
                case TurnAbout:
                    target = map.state_id(s / 4, static_cast<Orientation>((o + 2) % 4));
                    break;
            }
            if (target == s || p_success == 1.0) {
                a.add_row(s, act, {{target, 1.0}});
            } else if (target < s) {
                a.add_row(s, act, {{target, p_success}, {s, 1.0 - p_success}});
            } else {
                a.add_row(s, act, {{s, 1.0 - p_success}, {target, p_success}});
            }
        }
    }
    a.finalize();
    return a;
}

StochasticAutomaton build_task_automaton(const GridMap& map, const Location& goal_location,
                                         double p_success) {
    if (!map.walkable(goal_location.row, goal_location.col))
        throw AnyplanError("goal location is a wall");
    if (map.cell(goal_location.row, goal_location.col) == Cell::Sink)
        throw AnyplanError("goal location is a sink");
    int gi = map.location_index(goal_location.row, goal_location.col);
    StochasticAutomaton a(map.num_states(), kNumGridActions);
    StochasticAutomaton plain = build_automaton(map, p_success);
    for (StateId s = 0; s < map.num_states(); ++s) {
        bool goal = (s / 4) == gi;
        for (ActionId act = 0; act < kNumGridActions; ++act) {
            if (goal) {
                a.add_row(s, act, {{s, 1.0}});  // goals absorbing
            } else {
                std::vector<Transition> row(plain.row_begin(s, act), plain.row_end(s, act));
                a.add_row(s, act, std::move(row));
            }
        }
    }
    a.finalize();
    std::vector<StateId> goals;
    for (int o = 0; o < 4; ++o) goals.push_back(map.state_id(gi, static_cast<Orientation>(o)));
    a.set_goal_states(goals);
    return a;
}

int manhattan_distance(const Location& a, const Location& b) {
    return std::abs(a.row - b.row) + std::abs(a.col - b.col);
}

Task random_task(const GridMap& map, Rng& rng, double max_distance_fraction) {
    std::vector<int> eligible;  // non-sink free location indices
    for (int i = 0; i < map.num_locations(); ++i) {
        Location l = map.locations()[i];
        if (map.cell(l.row, l.col) == Cell::Free) eligible.push_back(i);
    }
    double bound = max_distance_fraction * (map.width() + map.height());
    bool any = false;
    for (std::size_t i = 0; i < eligible.size() && !any; ++i)
        for (std::size_t j = 0; j < eligible.size() && !any; ++j)
            if (i != j &&
                manhattan_distance(map.locations()[eligible[i]], map.locations()[eligible[j]]) <
                    bound)
                any = true;
    if (!any) throw AnyplanError("random_task: no admissible start/goal pair");
    // rejection sampling keeps the distribution exactly uniform over admissible pairs
    while (true) {
        int si = eligible[rng.uniform_index(eligible.size())];
        int gi = eligible[rng.uniform_index(eligible.size())];
        if (si == gi) continue;
        Location sl = map.locations()[si];
        Location gl = map.locations()[gi];
        if (manhattan_distance(sl, gl) >= bound) continue;
        Orientation o = static_cast<Orientation>(rng.uniform_index(4));
        return Task{map.state_id(si, o), gl};
    }
}

GridMap make_office_map(int min_locations, std::uint64_t seed) {
    // Corridor backbone with rooms off it; grow the grid until the location
    // count is reached. Layout is a deterministic function of (size, seed).
    int side = 8;
    while (true) {
        int w = side, h = side;
        std::vector<Cell> cells(static_cast<std::size_t>(w) * h, Cell::Wall);
        auto at = [&](int r, int c) -> Cell& { return cells[r * w + c]; };
        Rng rng(seed + 0x5eedULL + static_cast<std::uint64_t>(side));
        // horizontal corridors every 4 rows, one vertical connector per band
        for (int r = 1; r < h - 1; r += 4)
            for (int c = 1; c < w - 1; ++c) at(r, c) = Cell::Free;
        for (int r = 1; r + 4 < h; r += 4) {
            int c = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(w - 2)));
            for (int rr = r; rr <= r + 4; ++rr) at(rr, c) = Cell::Free;
        }
        // rooms: 2x2 alcoves under the corridors, door included
        for (int r = 2; r < h - 2; r += 4) {
            for (int c = 2; c < w - 3; c += 4) {
                if (rng.uniform_index(4) == 0) continue;  // leave some walls
                at(r, c) = Cell::Free;
                at(r, c + 1) = Cell::Free;
                at(r + 1, c) = Cell::Free;
                at(r + 1, c + 1) = Cell::Free;
            }
        }
        GridMap m(w, h, cells);
        if (m.num_locations() >= min_locations) {
            // keep only the largest connected component free to guarantee connectivity
            std::vector<int> comp(m.num_locations(), -1);
            int ncomp = 0;
            for (int i = 0; i < m.num_locations(); ++i) {
                if (comp[i] >= 0) continue;
                std::vector<int> stack{i};
                comp[i] = ncomp;
                while (!stack.empty()) {
                    int cur = stack.back();
                    stack.pop_back();
                    Location l = m.locations()[cur];
                    for (int d = 0; d < 4; ++d) {
                        int nr = l.row + kDRow[d], nc = l.col + kDCol[d];
                        if (!m.walkable(nr, nc)) continue;
                        int ni = m.location_index(nr, nc);
                        if (comp[ni] < 0) {
                            comp[ni] = ncomp;
                            stack.push_back(ni);
                        }
                    }
                }
                ++ncomp;
            }
            std::vector<int> count(ncomp, 0);
            for (int c : comp) ++count[c];
            int bigc = 0;
            for (int c = 1; c < ncomp; ++c)
                if (count[c] > count[bigc]) bigc = c;
            if (count[bigc] >= min_locations) {
                std::vector<Cell> pruned(cells);
                for (int i = 0; i < m.num_locations(); ++i)
                    if (comp[i] != bigc) {
                        Location l = m.locations()[i];
                        pruned[l.row * w + l.col] = Cell::Wall;
                    }
                return GridMap(w, h, std::move(pruned));
            }
        }
        side += 4;
        if (side > 512) throw AnyplanError("make_office_map: could not reach requested size");
    }
}

}  // namespace grid
}  // namespace anyplan
