#pragma once

// Grid maps, straight-line clearance, and 8-connected shortest paths.
//
// Cell (i, j) covers [i, i+1) x [j, j+1); agents are points in cell units.
// Diagonal steps are only allowed when both orthogonal neighbours are free.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "evobt/errors.hpp"
#include "evobt/geometry.hpp"

namespace evobt {

struct Cell {
    int x = 0;
    int y = 0;
    auto operator<=>(const Cell&) const = default;
};

inline Cell cell_of(Vec2 p) { return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))}; }
inline Vec2 center_of(Cell c) { return {c.x + 0.5, c.y + 0.5}; }

struct ArenaMap {
    std::string name;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> blocked;  // row-major
    std::vector<Cell> waypoints;
    std::vector<Cell> zombie_spawns;
    std::vector<Cell> human_spawns;

    static ArenaMap open(int w, int h, std::string name = "open") {
        ArenaMap m;
        m.name = std::move(name);
        m.width = w;
        m.height = h;
        m.blocked.assign(static_cast<std::size_t>(w) * h, 0);
        return m;
    }

    bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width + c.x; }
    Cell cell_at(std::size_t i) const { return {static_cast<int>(i % width), static_cast<int>(i / width)}; }
    std::size_t cell_count() const { return blocked.size(); }

    /// Out-of-bounds cells count as blocked.
    bool is_blocked(Cell c) const { return !in_bounds(c) || blocked[index(c)] != 0; }
    bool is_free(Cell c) const { return !is_blocked(c); }
    bool is_free(Vec2 p) const { return is_free(cell_of(p)); }
    void set_blocked(Cell c, bool b) { blocked[index(c)] = b ? 1 : 0; }

    std::vector<Cell> free_cells() const {
        std::vector<Cell> out;
        for (std::size_t i = 0; i < blocked.size(); ++i)
            if (!blocked[i]) out.push_back(cell_at(i));
        return out;
    }

    bool operator==(const ArenaMap&) const = default;
};

struct Step {
    int dx;
    int dy;
};
inline constexpr Step kSteps[8] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

/// Whether a single grid step from `c` is legal (no corner cutting).
inline bool step_allowed(const ArenaMap& m, Cell c, Step s) {
    const Cell n{c.x + s.dx, c.y + s.dy};
    if (m.is_blocked(n)) return false;
    if (s.dx != 0 && s.dy != 0) return m.is_free(Cell{c.x + s.dx, c.y}) && m.is_free(Cell{c.x, c.y + s.dy});
    return true;
}

/// Cells reachable from `start`, by flood fill over legal steps.
inline std::vector<std::uint8_t> reachable_from(const ArenaMap& m, Cell start) {
    std::vector<std::uint8_t> seen(m.cell_count(), 0);
    if (m.is_blocked(start)) return seen;
    std::vector<Cell> stack{start};
    seen[m.index(start)] = 1;
    while (!stack.empty()) {
        const Cell c = stack.back();
        stack.pop_back();
        for (const auto& s : kSteps) {
            if (!step_allowed(m, c, s)) continue;
            const Cell n{c.x + s.dx, c.y + s.dy};
            if (!seen[m.index(n)]) {
                seen[m.index(n)] = 1;
                stack.push_back(n);
            }
        }
    }
    return seen;
}

inline std::vector<std::string> map_problems(const ArenaMap& m) {
    std::vector<std::string> out;
    if (m.width <= 0 || m.height <= 0) return {"map has no cells"};
    if (m.blocked.size() != static_cast<std::size_t>(m.width) * m.height) return {"cell grid size mismatch"};
    auto check = [&](const std::vector<Cell>& cells, const char* what) {
        for (const auto& c : cells)
            if (m.is_blocked(c))
                out.push_back(std::string(what) + " at (" + std::to_string(c.x) + "," + std::to_string(c.y) + ") is blocked");
    };
    check(m.waypoints, "waypoint");
    check(m.zombie_spawns, "zombie spawn");
    check(m.human_spawns, "human spawn");
    const auto free = m.free_cells();
    if (free.empty()) {
        out.push_back("map has no free cells");
        return out;
    }
    const auto seen = reachable_from(m, free.front());
    const auto reached = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
    if (reached != free.size()) out.push_back("free region is not connected");
    return out;
}

/// Text format: "name <n>", "size <w> <h>", then h rows of
/// '#' obstacle, '.' free, 'W' waypoint, 'Z' zombie spawn, 'H' human spawn.
inline ArenaMap parse_map(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    ArenaMap m;
    bool have_size = false;
    int row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && !have_size) continue;
        if (!have_size) {
            std::istringstream hs(line);
            std::string word;
            hs >> word;
            if (word == "name") {
                std::getline(hs >> std::ws, m.name);
            } else if (word == "size") {
                if (!(hs >> m.width >> m.height) || m.width <= 0 || m.height <= 0) throw MapError("bad size line");
                m.blocked.assign(static_cast<std::size_t>(m.width) * m.height, 0);
                have_size = true;
            } else {
                throw MapError("unexpected header line '" + line + "'");
            }
            continue;
        }
        if (row >= m.height) {
            if (line.empty()) continue;
            throw MapError("more rows than declared height");
        }
        if (static_cast<int>(line.size()) != m.width)
            throw MapError("row " + std::to_string(row) + " has width " + std::to_string(line.size()));
        for (int x = 0; x < m.width; ++x) {
            const Cell c{x, row};
            switch (line[static_cast<std::size_t>(x)]) {
                case '#': m.set_blocked(c, true); break;
                case '.': break;
                case 'W': m.waypoints.push_back(c); break;
                case 'Z': m.zombie_spawns.push_back(c); break;
                case 'H': m.human_spawns.push_back(c); break;
                default: throw MapError(std::string("unknown map symbol '") + line[static_cast<std::size_t>(x)] + "'");
            }
        }
        ++row;
    }
    if (!have_size) throw MapError("missing size line");
    if (row != m.height) throw MapError("fewer rows than declared height");
    if (auto p = map_problems(m); !p.empty()) throw MapError(m.name + ": " + p.front());
    return m;
}

inline std::string format_map(const ArenaMap& m) {
    std::vector<std::string> rows(static_cast<std::size_t>(m.height), std::string(static_cast<std::size_t>(m.width), '.'));
    for (std::size_t i = 0; i < m.cell_count(); ++i)
        if (m.blocked[i]) rows[i / m.width][i % m.width] = '#';
    auto mark = [&](const std::vector<Cell>& cells, char ch) {
        for (const auto& c : cells) rows[static_cast<std::size_t>(c.y)][static_cast<std::size_t>(c.x)] = ch;
    };
    mark(m.waypoints, 'W');
    mark(m.zombie_spawns, 'Z');
    mark(m.human_spawns, 'H');
    std::string out = "name " + m.name + "\nsize " + std::to_string(m.width) + " " + std::to_string(m.height) + "\n";
    for (const auto& r : rows) out += r + "\n";
    return out;
}

/// Repeats `base` nx by ny times and clears the walls along interior seams,
/// keeping the outer frame.
inline ArenaMap tile_map(const ArenaMap& base, int nx, int ny, std::string name) {
    ArenaMap m = ArenaMap::open(base.width * nx, base.height * ny, std::move(name));
    std::vector<Cell> wp, zs, hs;
    for (int ty = 0; ty < ny; ++ty) {
        for (int tx = 0; tx < nx; ++tx) {
            const int ox = tx * base.width, oy = ty * base.height;
            for (int y = 0; y < base.height; ++y)
                for (int x = 0; x < base.width; ++x) m.set_blocked({ox + x, oy + y}, base.is_blocked({x, y}));
            for (const auto& c : base.waypoints) wp.push_back({ox + c.x, oy + c.y});
            for (const auto& c : base.zombie_spawns) zs.push_back({ox + c.x, oy + c.y});
            for (const auto& c : base.human_spawns) hs.push_back({ox + c.x, oy + c.y});
        }
    }
    auto seam = [](int v, int tile, int tiles) {
        const int local = v % tile;
        const int k = v / tile;
        return (local == tile - 1 && k < tiles - 1) || (local == 0 && k > 0);
    };
    for (int y = 1; y < m.height - 1; ++y)
        for (int x = 1; x < m.width - 1; ++x)
            if (seam(x, base.width, nx) || seam(y, base.height, ny)) m.set_blocked({x, y}, false);
    // row-major, matching the order parse_map reads them
    auto row_major = [](Cell a, Cell b) { return std::pair{a.y, a.x} < std::pair{b.y, b.x}; };
    std::ranges::sort(wp, row_major);
    std::ranges::sort(zs, row_major);
    std::ranges::sort(hs, row_major);
    m.waypoints = wp;
    m.zombie_spawns = zs;
    m.human_spawns = hs;
    return m;
}

/// Amanatides-Woo traversal. A segment passing exactly through a grid
/// corner needs both side cells free, mirroring the no-corner-cutting rule.
inline bool segment_clear(const ArenaMap& m, Vec2 a, Vec2 b) {
    Cell c = cell_of(a);
    const Cell end = cell_of(b);
    if (m.is_blocked(c) || m.is_blocked(end)) return false;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const int sx = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int sy = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    constexpr double inf = std::numeric_limits<double>::infinity();
    double tmax_x = sx == 0 ? inf : ((sx > 0 ? c.x + 1.0 : static_cast<double>(c.x)) - a.x) / dx;
    double tmax_y = sy == 0 ? inf : ((sy > 0 ? c.y + 1.0 : static_cast<double>(c.y)) - a.y) / dy;
    const double tdx = sx == 0 ? inf : sx / dx;
    const double tdy = sy == 0 ? inf : sy / dy;
    int guard = std::abs(end.x - c.x) + std::abs(end.y - c.y) + 2;
    while (c != end && guard-- > 0) {
        if (tmax_x < tmax_y) {
            c.x += sx;
            tmax_x += tdx;
        } else if (tmax_y < tmax_x) {
            c.y += sy;
            tmax_y += tdy;
        } else {
            if (m.is_blocked({c.x + sx, c.y}) || m.is_blocked({c.x, c.y + sy})) return false;
            c.x += sx;
            c.y += sy;
            tmax_x += tdx;
            tmax_y += tdy;
        }
        if (m.is_blocked(c)) return false;
    }
    return c == end;
}

/// Cost a + b*sqrt(2), kept as integer step counts so comparisons are exact.
struct PathCost {
    int orthogonal = 0;
    int diagonal = 0;
    double value() const { return orthogonal + diagonal * std::numbers::sqrt2; }
    bool operator==(const PathCost&) const = default;
};

struct GridPath {
    std::vector<Cell> cells;  // excludes the start, ends at the goal
    PathCost cost;
};

/// A* with the octile heuristic. Empty path when from == to; none when the
/// goal is unreachable. Throws BlockedStart.
inline std::optional<GridPath> find_path(const ArenaMap& m, Cell from, Cell to) {
    if (m.is_blocked(from)) throw BlockedStart("path start is blocked");
    if (from == to) return GridPath{};
    if (m.is_blocked(to)) return std::nullopt;

    auto h = [&](Cell c) {
        const int ax = std::abs(c.x - to.x), ay = std::abs(c.y - to.y);
        return std::abs(ax - ay) + std::min(ax, ay) * std::numbers::sqrt2;
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(m.cell_count(), inf);
    std::vector<PathCost> gc(m.cell_count());
    std::vector<std::int64_t> parent(m.cell_count(), -1);
    std::vector<std::uint8_t> closed(m.cell_count(), 0);
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    g[m.index(from)] = 0.0;
    open.push({h(from), m.index(from)});
    while (!open.empty()) {
        const auto [f, i] = open.top();
        open.pop();
        if (closed[i]) continue;
        closed[i] = 1;
        const Cell c = m.cell_at(i);
        if (c == to) break;
        for (const auto& s : kSteps) {
            if (!step_allowed(m, c, s)) continue;
            const Cell n{c.x + s.dx, c.y + s.dy};
            const std::size_t j = m.index(n);
            if (closed[j]) continue;
            const bool diag = s.dx != 0 && s.dy != 0;
            PathCost nc = gc[i];
            (diag ? nc.diagonal : nc.orthogonal) += 1;
            // compare on the exact representation to avoid drift over long paths
            if (nc.value() < g[j] - 1e-12) {
                g[j] = nc.value();
                gc[j] = nc;
                parent[j] = static_cast<std::int64_t>(i);
                open.push({g[j] + h(n), j});
            }
        }
    }
    const std::size_t goal = m.index(to);
    if (parent[goal] < 0) return std::nullopt;
    GridPath p;
    p.cost = gc[goal];
    for (std::int64_t i = static_cast<std::int64_t>(goal); i != static_cast<std::int64_t>(m.index(from)); i = parent[static_cast<std::size_t>(i)])
        p.cells.push_back(m.cell_at(static_cast<std::size_t>(i)));
    std::ranges::reverse(p.cells);
    return p;
}

/// Shortest-path distance from every cell to `goal` (infinity if unreachable).
inline std::vector<double> distance_field(const ArenaMap& m, Cell goal) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(m.cell_count(), inf);
    if (m.is_blocked(goal)) return d;
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    d[m.index(goal)] = 0.0;
    open.push({0.0, m.index(goal)});
    while (!open.empty()) {
        const auto [dist, i] = open.top();
        open.pop();
        if (dist > d[i]) continue;
        const Cell c = m.cell_at(i);
        for (const auto& s : kSteps) {
            if (!step_allowed(m, c, s)) continue;  // steps are symmetric
            const std::size_t j = m.index({c.x + s.dx, c.y + s.dy});
            const double nd = dist + ((s.dx != 0 && s.dy != 0) ? std::numbers::sqrt2 : 1.0);
            if (nd < d[j]) {
                d[j] = nd;
                open.push({nd, j});
            }
        }
    }
    return d;
}

/// Per-goal distance fields, computed on first use. One cache per episode.
class PathCache {
public:
    explicit PathCache(const ArenaMap& m) : map_(&m) {}

    const std::vector<double>& field(Cell goal) {
        auto it = fields_.find(goal);
        if (it == fields_.end()) it = fields_.emplace(goal, distance_field(*map_, goal)).first;
        return it->second;
    }

    /// Displacement of length at most `max_len` that makes progress toward
    /// `goal` without entering blocked space; none if unreachable.
    std::optional<Vec2> step_toward(Vec2 from, Vec2 goal, double max_len) {
        const ArenaMap& m = *map_;
        const Cell gc = cell_of(goal);
        const Cell c = cell_of(from);
        Vec2 aim = goal;
        if (c != gc && !segment_clear(m, from, goal)) {
            const auto& f = field(gc);
            if (f[m.index(c)] == std::numeric_limits<double>::infinity()) return std::nullopt;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& s : kSteps) {
                if (!step_allowed(m, c, s)) continue;
                const Cell n{c.x + s.dx, c.y + s.dy};
                const double v = f[m.index(n)] + ((s.dx != 0 && s.dy != 0) ? std::numbers::sqrt2 : 1.0);
                if (v < best) {
                    best = v;
                    aim = center_of(n);
                }
            }
        }
        const Vec2 d = aim - from;
        const double len = d.length();
        if (len <= max_len) return d;
        return d * (max_len / len);
    }

private:
    const ArenaMap* map_;
    std::map<Cell, std::vector<double>> fields_;
};

}  // namespace evobt
