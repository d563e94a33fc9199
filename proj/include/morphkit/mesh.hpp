#pragma once

// Linkage mesh of the design domain.
//
// Every occupied grid cell becomes one octagonal cell of pitch 2*edge_length: each square side
// is two rigid bars joined by a midpoint hinge. Vertices live on a half-pitch lattice with
// integer coordinates (a, b), position (a*e, b*e); a cell at grid (row, col) spans
// a in [2col, 2col+2], b in [2row, 2row+2]. Row 0 is the bottom row. Corners are shared
// hinges between up to four cells.
//
// Vertex ids are assigned by scanning lattice points with b (then a) ascending, so they are a
// pure function of the occupancy mask.

#include <algorithm>
#include <array>
#include <istream>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "morphkit/csv.hpp"
#include "morphkit/geometry.hpp"

namespace morphkit {

using VertexId = std::int32_t;

struct HandleSpec {
    VertexId vertex = 0;
    Vec2 target = Vec2::Zero();  // absolute target position, mm
};

struct DomainSpec {
    int rows = 0;
    int cols = 0;
    std::vector<bool> occupancy;  // row-major, row 0 at the bottom
    double edge_length = kDefaultEdgeLength;
    std::vector<HandleSpec> handles;
    std::vector<VertexId> fixed;

    bool occupied(int r, int c) const { return occupancy[static_cast<std::size_t>(r) * cols + c]; }

    static DomainSpec full(int rows, int cols, double edge_length = kDefaultEdgeLength) {
        DomainSpec s;
        s.rows = rows;
        s.cols = cols;
        s.edge_length = edge_length;
        s.occupancy.assign(static_cast<std::size_t>(rows) * cols, true);
        return s;
    }
};

enum class VertexRole : std::uint8_t { corner, midpoint };

struct Edge {
    VertexId v0 = 0;
    VertexId v1 = 0;
    double rest_length = 0.0;
};

struct LatticePoint {
    int a = 0;
    int b = 0;
};

struct GridCell {
    int row = 0;
    int col = 0;
};

using CellVertices = std::array<VertexId, kCellVertices>;

/// Immutable after construction.
class LinkageMesh {
public:
    std::vector<Vec2> vertices;  // rest positions
    std::vector<Edge> edges;
    std::vector<CellVertices> cells;
    std::vector<VertexRole> vertex_role;
    std::vector<std::vector<VertexId>> adjacency;
    std::vector<LatticePoint> lattice;
    std::vector<GridCell> cell_grid;
    double edge_length = kDefaultEdgeLength;
    int rows = 0;
    int cols = 0;

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t cell_count() const { return cells.size(); }

    std::optional<VertexId> vertex_at(int a, int b) const {
        auto it = lattice_index_.find(key(a, b));
        if (it == lattice_index_.end()) return std::nullopt;
        return it->second;
    }

    /// Corner of the grid lattice (i along x, j along y), in corner units.
    std::optional<VertexId> corner(int i, int j) const { return vertex_at(2 * i, 2 * j); }

    Octagon cell_positions(std::size_t cell, std::span<const Vec2> positions) const {
        Octagon p;
        for (int j = 0; j < kCellVertices; ++j) p[j] = positions[cells[cell][j]];
        return p;
    }

private:
    friend LinkageMesh build_mesh(const DomainSpec& spec);

    std::int64_t key(int a, int b) const { return static_cast<std::int64_t>(b) * (2 * cols + 1) + a; }

    std::unordered_map<std::int64_t, VertexId> lattice_index_;
};

/// Lattice offsets of the 8 cell vertices, counter-clockwise from the bottom-left corner.
inline constexpr std::array<std::array<int, 2>, kCellVertices> kCellOffsets{
    {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

namespace detail {
inline std::vector<std::vector<std::size_t>> occupancy_components(const DomainSpec& spec) {
    std::vector<int> label(spec.occupancy.size(), -1);
    std::vector<std::vector<std::size_t>> comps;
    for (std::size_t start = 0; start < spec.occupancy.size(); ++start) {
        if (!spec.occupancy[start] || label[start] >= 0) continue;
        const int id = static_cast<int>(comps.size());
        comps.emplace_back();
        std::queue<std::size_t> q;
        q.push(start);
        label[start] = id;
        while (!q.empty()) {
            const std::size_t cur = q.front();
            q.pop();
            comps.back().push_back(cur);
            const int r = static_cast<int>(cur) / spec.cols, c = static_cast<int>(cur) % spec.cols;
            const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[0] >= spec.rows || n[1] < 0 || n[1] >= spec.cols) continue;
                const std::size_t k = static_cast<std::size_t>(n[0]) * spec.cols + n[1];
                if (spec.occupancy[k] && label[k] < 0) {
                    label[k] = id;
                    q.push(k);
                }
            }
        }
    }
    return comps;
}
}  // namespace detail

/// Builds the deduplicated linkage mesh for an occupancy grid and validates handle/fixed ids.
inline LinkageMesh build_mesh(const DomainSpec& spec) {
    if (spec.rows <= 0 || spec.cols <= 0) throw ValidationError("domain must have positive rows and cols");
    if (spec.occupancy.size() != static_cast<std::size_t>(spec.rows) * spec.cols)
        throw ValidationError("occupancy size does not match rows*cols");
    if (!(spec.edge_length > 0)) throw ValidationError("edge_length must be positive");

    const auto comps = detail::occupancy_components(spec);
    if (comps.empty()) throw ValidationError("occupancy has no occupied cell");
    if (comps.size() > 1) {
        std::ostringstream msg;
        msg << "occupancy is not edge-connected: " << comps.size() << " components";
        for (std::size_t i = 0; i < comps.size(); ++i) {
            msg << "; component " << i << " (" << comps[i].size() << " cells) starts at row "
                << comps[i].front() / spec.cols << " col " << comps[i].front() % spec.cols;
        }
        throw ValidationError(msg.str());
    }

    LinkageMesh m;
    m.rows = spec.rows;
    m.cols = spec.cols;
    m.edge_length = spec.edge_length;

    const int na = 2 * spec.cols + 1, nb = 2 * spec.rows + 1;
    std::vector<char> used(static_cast<std::size_t>(na) * nb, 0);
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) {
            if (!spec.occupied(r, c)) continue;
            for (const auto& off : kCellOffsets)
                used[static_cast<std::size_t>(2 * r + off[1]) * na + (2 * c + off[0])] = 1;
        }
    for (int b = 0; b < nb; ++b)
        for (int a = 0; a < na; ++a) {
            if (!used[static_cast<std::size_t>(b) * na + a]) continue;
            const auto id = static_cast<VertexId>(m.vertices.size());
            m.lattice_index_.emplace(m.key(a, b), id);
            m.lattice.push_back({a, b});
            m.vertices.emplace_back(a * spec.edge_length, b * spec.edge_length);
            m.vertex_role.push_back((a % 2 == 0 && b % 2 == 0) ? VertexRole::corner : VertexRole::midpoint);
        }

    std::map<std::pair<VertexId, VertexId>, std::size_t> edge_index;
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) {
            if (!spec.occupied(r, c)) continue;
            CellVertices cv{};
            for (int j = 0; j < kCellVertices; ++j)
                cv[j] = m.lattice_index_.at(m.key(2 * c + kCellOffsets[j][0], 2 * r + kCellOffsets[j][1]));
            for (int j = 0; j < kCellVertices; ++j) {
                const VertexId u = cv[j], v = cv[(j + 1) % kCellVertices];
                const auto k = std::minmax(u, v);
                if (edge_index.emplace(k, m.edges.size()).second)
                    m.edges.push_back({k.first, k.second, spec.edge_length});
            }
            m.cells.push_back(cv);
            m.cell_grid.push_back({r, c});
        }

    m.adjacency.assign(m.vertices.size(), {});
    for (const auto& e : m.edges) {
        m.adjacency[e.v0].push_back(e.v1);
        m.adjacency[e.v1].push_back(e.v0);
    }
    for (auto& adj : m.adjacency) std::sort(adj.begin(), adj.end());

    const auto n = static_cast<VertexId>(m.vertices.size());
    for (const auto& h : spec.handles) {
        if (h.vertex < 0 || h.vertex >= n)
            throw ValidationError("handle references unknown vertex id " + std::to_string(h.vertex));
        if (!h.target.allFinite()) throw ValidationError("handle target is not finite");
    }
    for (VertexId f : spec.fixed)
        if (f < 0 || f >= n) throw ValidationError("fixed list references unknown vertex id " + std::to_string(f));
    return m;
}

/// Current configuration of one cell: centered coordinates and interior angles. On
/// non-converged meshes the result may violate edge-length/closure invariants; it is
/// reported, not rejected.
inline CellConfig extract_cell_config(const LinkageMesh& mesh, std::span<const Vec2> positions, std::size_t cell) {
    if (cell >= mesh.cell_count()) throw ValidationError("cell index out of range: " + std::to_string(cell));
    CellConfig cfg;
    cfg.coords = centered(mesh.cell_positions(cell, positions));
    cfg.angles = angles_from_coords(cfg.coords);
    return cfg;
}

inline CellConfig extract_cell_config(const LinkageMesh& mesh, std::size_t cell) {
    return extract_cell_config(mesh, mesh.vertices, cell);
}

/// CSV mesh export: VERTICES (id,x,y,role), EDGES (v0,v1,rest_length), CELLS (c0..c7).
inline void write_mesh_csv(std::ostream& os, const LinkageMesh& mesh, std::span<const Vec2> positions) {
    os << "VERTICES\nid,x,y,role\n";
    for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
        os << i << ',' << fmt_double(positions[i].x()) << ',' << fmt_double(positions[i].y()) << ','
           << (mesh.vertex_role[i] == VertexRole::corner ? "corner" : "midpoint") << '\n';
    os << "EDGES\nv0,v1,rest_length\n";
    for (const auto& e : mesh.edges) os << e.v0 << ',' << e.v1 << ',' << fmt_double(e.rest_length) << '\n';
    os << "CELLS\nc0,c1,c2,c3,c4,c5,c6,c7\n";
    for (const auto& c : mesh.cells) {
        for (int j = 0; j < kCellVertices; ++j) os << (j ? "," : "") << c[j];
        os << '\n';
    }
}

inline void write_mesh_csv(std::ostream& os, const LinkageMesh& mesh) { write_mesh_csv(os, mesh, mesh.vertices); }

/// Plain topology + positions, as stored in a mesh CSV.
struct MeshTable {
    std::vector<Vec2> positions;
    std::vector<std::array<VertexId, 2>> edges;
    std::vector<double> rest_lengths;
    std::vector<CellVertices> cells;
};

inline MeshTable mesh_table(const LinkageMesh& mesh, std::span<const Vec2> positions) {
    MeshTable t;
    t.positions.assign(positions.begin(), positions.end());
    for (const auto& e : mesh.edges) {
        t.edges.push_back({e.v0, e.v1});
        t.rest_lengths.push_back(e.rest_length);
    }
    t.cells = mesh.cells;
    return t;
}

/// Reads the write_mesh_csv format; ids must be 0..n-1 in order and references in range.
inline MeshTable read_mesh_csv(std::istream& is) {
    MeshTable t;
    std::string line;
    std::size_t lineno = 0;
    enum class Section { none, vertices, edges, cells } sec = Section::none;
    bool expect_header = false;
    auto fail = [&](const std::string& what) { throw ValidationError("mesh CSV line " + std::to_string(lineno) + ": " + what); };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "VERTICES" || line == "EDGES" || line == "CELLS") {
            sec = line == "VERTICES" ? Section::vertices : line == "EDGES" ? Section::edges : Section::cells;
            expect_header = true;
            continue;
        }
        if (expect_header) {
            const char* want = sec == Section::vertices ? "id,x,y,role"
                               : sec == Section::edges  ? "v0,v1,rest_length"
                                                        : "c0,c1,c2,c3,c4,c5,c6,c7";
            if (line != want) fail(std::string("expected header ") + want);
            expect_header = false;
            continue;
        }
        const auto f = split_csv_line(line);
        switch (sec) {
            case Section::none: fail("data before a section marker"); break;
            case Section::vertices:
                if (f.size() != 4) fail("expected 4 fields");
                if (parse_int(f[0], lineno) != static_cast<long long>(t.positions.size())) fail("vertex ids must be consecutive from 0");
                t.positions.emplace_back(parse_double(f[1], lineno), parse_double(f[2], lineno));
                break;
            case Section::edges:
                if (f.size() != 3) fail("expected 3 fields");
                t.edges.push_back({static_cast<VertexId>(parse_int(f[0], lineno)), static_cast<VertexId>(parse_int(f[1], lineno))});
                t.rest_lengths.push_back(parse_double(f[2], lineno));
                break;
            case Section::cells: {
                if (f.size() != kCellVertices) fail("expected 8 fields");
                CellVertices c{};
                for (int j = 0; j < kCellVertices; ++j) c[j] = static_cast<VertexId>(parse_int(f[j], lineno));
                t.cells.push_back(c);
                break;
            }
        }
    }
    const auto n = static_cast<VertexId>(t.positions.size());
    auto in_range = [&](VertexId v) { return v >= 0 && v < n; };
    for (const auto& e : t.edges)
        if (!in_range(e[0]) || !in_range(e[1])) throw ValidationError("mesh CSV: edge references unknown vertex");
    for (const auto& c : t.cells)
        for (VertexId v : c)
            if (!in_range(v)) throw ValidationError("mesh CSV: cell references unknown vertex");
    if (t.positions.empty()) throw ValidationError("mesh CSV has no vertices");
    return t;
}

/// Positions from a mesh CSV, checked against the topology of `mesh`.
inline std::vector<Vec2> read_positions(std::istream& is, const LinkageMesh& mesh) {
    MeshTable t = read_mesh_csv(is);
    bool same = t.positions.size() == mesh.vertex_count() && t.cells == mesh.cells && t.edges.size() == mesh.edges.size();
    for (std::size_t e = 0; same && e < t.edges.size(); ++e)
        same = t.edges[e][0] == mesh.edges[e].v0 && t.edges[e][1] == mesh.edges[e].v1;
    if (!same) throw ValidationError("mesh CSV topology does not match the task mesh");
    return t.positions;
}

}  // namespace morphkit
