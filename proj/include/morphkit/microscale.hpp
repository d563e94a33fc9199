#pragma once

// Microscale design: one infill design per cell of a solved macroscale mesh.
//
// Adjustable search (AS) visits cells in known-vertex priority order, takes the nearest
// dataset record for the cell's current shape, pins the cell's vertices at that record's
// placed coordinates and re-solves the macroscale problem before moving on. The alternative
// path exports per-cell target angles (conditions) for an external generator and imports the
// designs it returns.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "morphkit/configdb.hpp"
#include "morphkit/conlme.hpp"
#include "morphkit/csv.hpp"
#include "morphkit/surrogate.hpp"

namespace morphkit {

struct CellAssignment {
    std::size_t cell = 0;
    RecordId record = -1;  // -1 when the design came from outside the database
    InfillDesign design;
    CellConfig achieved;  // surrogate_forward(design)
    CellConfig target;    // cell shape in the macroscale solution
    double rotation = 0;  // aligns achieved onto target
    double dissimilarity = 0;
};

/// Visitation order: repeatedly the unprocessed cell with the most known vertices (lowest index
/// on ties); a visited cell's vertices all become known.
inline std::vector<std::size_t> search_order(const LinkageMesh& mesh, std::span<const VertexId> known_vertices) {
    const std::size_t nc = mesh.cell_count();
    std::vector<std::vector<std::size_t>> vertex_cells(mesh.vertex_count());
    for (std::size_t c = 0; c < nc; ++c)
        for (VertexId v : mesh.cells[c]) vertex_cells[v].push_back(c);

    std::vector<char> known(mesh.vertex_count(), 0);
    std::vector<int> count(nc, 0);
    for (VertexId v : known_vertices) {
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertex_count()) throw ValidationError("known vertex out of range");
        if (known[v]) continue;
        known[v] = 1;
        for (std::size_t c : vertex_cells[v]) ++count[c];
    }

    // Lazy max-heap on (count, -index); stale entries are skipped on pop.
    using Entry = std::pair<int, long long>;
    std::priority_queue<Entry> heap;
    for (std::size_t c = 0; c < nc; ++c) heap.emplace(count[c], -static_cast<long long>(c));
    std::vector<char> done(nc, 0);
    std::vector<std::size_t> order;
    order.reserve(nc);
    while (order.size() < nc) {
        const auto [k, negc] = heap.top();
        heap.pop();
        const auto c = static_cast<std::size_t>(-negc);
        if (done[c] || k != count[c]) continue;
        done[c] = 1;
        order.push_back(c);
        for (VertexId v : mesh.cells[c]) {
            if (known[v]) continue;
            known[v] = 1;
            for (std::size_t o : vertex_cells[v]) {
                ++count[o];
                if (!done[o]) heap.emplace(count[o], -static_cast<long long>(o));
            }
        }
    }
    return order;
}

struct AsOptions {
    std::size_t shortlist_k = 32;
    int resolve_iters = 2;   // alternation cap for intermediate re-solves (warm-started)
    int final_iters = 200;   // cap for the re-solve after the last assignment
    double tol = 1e-6;
};

struct AsStep {
    std::size_t cell = 0;
    RecordId record = -1;
    double dissimilarity = 0;
    int iterations = 0;
    double max_energy_increase = 0;
};

struct AsResult {
    std::vector<CellAssignment> assignments;  // indexed by cell
    std::vector<std::size_t> order;
    std::vector<AsStep> steps;
    ConlmeState final_state;
    std::vector<Handle> pins;  // handle set of the final re-solve (task handles + cell pins)
};

/// Re-solve failure during AS; carries the assignments made so far.
class AsAborted : public NumericalError {
public:
    AsAborted(const std::string& what, std::vector<CellAssignment> partial)
        : NumericalError(what), partial_(std::move(partial)) {}
    const std::vector<CellAssignment>& partial() const { return partial_; }

private:
    std::vector<CellAssignment> partial_;
};

inline AsResult as_design(const LinkageMesh& mesh, const ConlmeState& macro, const std::vector<Handle>& handles,
                          const SolverWeights& weights, const ConfigDatabase& db, const AsOptions& opt = {}) {
    const std::size_t nc = mesh.cell_count();
    if (macro.positions.size() != mesh.vertex_count()) throw ValidationError("macro state does not match the mesh");

    std::vector<VertexId> known_ids;
    for (const auto& h : handles) known_ids.push_back(h.vertex);
    AsResult res;
    res.order = search_order(mesh, known_ids);
    res.assignments.resize(nc);

    ConlmeOptions copt;
    copt.shortlist_k = opt.shortlist_k;
    copt.tol = opt.tol;
    copt.max_iter = opt.resolve_iters;
    std::vector<Handle> pins = handles;
    ConlmeSolver solver(mesh, weights, pins, db, copt);

    std::vector<char> known(mesh.vertex_count(), 0);
    for (VertexId v : known_ids) known[v] = 1;
    std::vector<std::optional<Match>> frozen(nc);
    Positions pos = macro.positions;
    std::vector<Match> prev = macro.assignments;

    std::vector<CellAssignment> partial;
    for (std::size_t step = 0; step < res.order.size(); ++step) {
        const std::size_t c = res.order[step];
        CellConfig target;
        target.coords = centered(mesh.cell_positions(c, pos));
        target.angles = angles_from_coords(target.coords);
        std::optional<RecordId> hint;
        if (prev.size() == nc && prev[c].record >= 0) hint = prev[c].record;
        const Match m = db.nearest(target, opt.shortlist_k, hint);
        const ConfigRecord& rec = db.record(m.record);

        CellAssignment a;
        a.cell = c;
        a.record = m.record;
        a.design = rec.design;
        a.achieved = rec.config;
        a.target = target;
        a.rotation = m.rotation;
        a.dissimilarity = m.dissimilarity;
        res.assignments[c] = a;
        partial.push_back(a);
        frozen[c] = m;

        const Vec2 center = centroid(mesh.cell_positions(c, pos));
        const Octagon placed = rotated(rec.config.coords, m.rotation);
        for (int j = 0; j < kCellVertices; ++j) {
            const VertexId v = mesh.cells[c][j];
            if (known[v]) continue;
            known[v] = 1;
            pins.push_back({v, center + placed[j], 1.0});
        }

        const bool last = step + 1 == res.order.size();
        solver.system().set_handles(pins);
        if (last) solver.options().max_iter = opt.final_iters;
        ConlmeState st;
        try {
            st = solver.run(pos, frozen, prev);
        } catch (const NumericalError& e) {
            throw AsAborted(std::string("adjustable search re-solve failed after assigning cell ") + std::to_string(c) +
                                ": " + e.what(),
                            partial);
        }
        res.steps.push_back({c, m.record, m.dissimilarity, st.iteration, max_energy_increase(st)});
        pos = st.positions;
        prev = st.assignments;
        if (last) res.final_state = std::move(st);
    }
    if (nc == 0) res.final_state = macro;
    res.pins = std::move(pins);
    return res;
}

// Condition table: per-cell target angles for an external designer.

struct ConditionRow {
    std::size_t cell = 0;
    Angles angles{};
};

inline std::vector<ConditionRow> emit_conditions(const LinkageMesh& mesh, std::span<const Vec2> positions) {
    std::vector<ConditionRow> rows(mesh.cell_count());
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) rows[c] = {c, extract_cell_config(mesh, positions, c).angles};
    return rows;
}

/// Target shape reconstructed from condition angles. The walk is not required to close: cells
/// of a non-converged or infeasible macro solution carry some internal inconsistency.
inline CellConfig condition_config(const ConditionRow& row, double edge_length) {
    return {row.angles, walk_octagon(row.angles, edge_length).coords};
}

inline std::vector<std::string> conditions_header() {
    std::vector<std::string> h{"cell"};
    for (auto& s : numbered("th", kCellVertices)) h.push_back(s);
    return h;
}

inline void write_conditions(std::ostream& os, std::span<const ConditionRow> rows) {
    os << join(conditions_header()) << '\n';
    for (const auto& r : rows) {
        os << r.cell;
        for (double t : r.angles) os << ',' << fmt_double(t);
        os << '\n';
    }
}

inline std::vector<ConditionRow> read_conditions(std::istream& is) {
    const CsvTable t = read_csv(is, conditions_header());
    std::vector<ConditionRow> rows(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto line = t.line_numbers[i];
        const long long cell = parse_int(t.rows[i][0], line);
        if (cell < 0) throw ValidationError("conditions row " + std::to_string(line) + ": negative cell index");
        rows[i].cell = static_cast<std::size_t>(cell);
        for (int j = 0; j < kCellVertices; ++j) rows[i].angles[j] = parse_double(t.rows[i][1 + j], line);
    }
    return rows;
}

// Designs table: one infill design per cell.

struct DesignRow {
    std::size_t cell = 0;
    InfillDesign design;
};

inline std::vector<std::string> designs_header() {
    std::vector<std::string> h{"cell"};
    for (const char* p : {"r", "h", "b"})
        for (auto& s : numbered(p, kCellVertices)) h.push_back(s);
    return h;
}

inline void write_designs(std::ostream& os, std::span<const DesignRow> rows) {
    os << join(designs_header()) << '\n';
    for (const auto& r : rows) {
        os << r.cell;
        for (const auto& b : r.design.beams) os << ',' << fmt_double(b.radius);
        for (const auto& b : r.design.beams) os << ',' << fmt_double(b.thickness);
        for (const auto& b : r.design.beams) os << ',' << b.orientation;
        os << '\n';
    }
}

/// Parses and bound-checks every row; errors carry the 1-based file line.
inline std::vector<DesignRow> read_designs(std::istream& is) {
    const CsvTable t = read_csv(is, designs_header());
    std::vector<DesignRow> rows(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto line = t.line_numbers[i];
        const long long cell = parse_int(t.rows[i][0], line);
        if (cell < 0) throw ValidationError("designs row " + std::to_string(line) + ": negative cell index");
        rows[i].cell = static_cast<std::size_t>(cell);
        for (int k = 0; k < kCellVertices; ++k) {
            auto& b = rows[i].design.beams[k];
            b.radius = parse_double(t.rows[i][1 + k], line);
            b.thickness = parse_double(t.rows[i][1 + kCellVertices + k], line);
            b.orientation = static_cast<int>(parse_int(t.rows[i][1 + 2 * kCellVertices + k], line));
        }
        if (auto v = design_violation(rows[i].design); !v.empty())
            throw ValidationError("designs row " + std::to_string(line) + ": " + v);
    }
    return rows;
}

inline std::vector<DesignRow> design_rows(std::span<const CellAssignment> assignments) {
    std::vector<DesignRow> rows;
    rows.reserve(assignments.size());
    for (const auto& a : assignments) rows.push_back({a.cell, a.design});
    return rows;
}

struct ImportResult {
    std::vector<CellAssignment> assignments;  // indexed by cell
    std::vector<std::size_t> flagged;         // dissimilarity above the report threshold
};

/// Joins designs to conditions by cell and evaluates each design through the surrogate.
inline ImportResult import_designs(std::span<const ConditionRow> conditions, std::span<const DesignRow> designs,
                                   const MaterialParams& mat, double edge_length = kDefaultEdgeLength,
                                   double report_threshold = 0.05) {
    const std::size_t nc = conditions.size();
    std::vector<const ConditionRow*> cond(nc, nullptr);
    for (std::size_t i = 0; i < nc; ++i) {
        const auto c = conditions[i].cell;
        if (c >= nc) throw ValidationError("condition row " + std::to_string(i + 2) + ": cell " + std::to_string(c) +
                                           " outside 0.." + std::to_string(nc - 1));
        if (cond[c]) throw ValidationError("condition row " + std::to_string(i + 2) + ": duplicate cell " + std::to_string(c));
        cond[c] = &conditions[i];
    }
    std::vector<const DesignRow*> des(nc, nullptr);
    for (std::size_t i = 0; i < designs.size(); ++i) {
        const auto c = designs[i].cell;
        const std::string where = "designs row " + std::to_string(i + 2) + ": ";
        if (c >= nc) throw ValidationError(where + "cell " + std::to_string(c) + " has no condition");
        if (des[c]) throw ValidationError(where + "duplicate cell " + std::to_string(c));
        if (auto v = design_violation(designs[i].design); !v.empty()) throw ValidationError(where + v);
        des[c] = &designs[i];
    }
    std::vector<std::size_t> missing;
    for (std::size_t c = 0; c < nc; ++c)
        if (!des[c]) missing.push_back(c);
    if (!missing.empty()) {
        std::string msg = "designs table is missing cell";
        msg += missing.size() > 1 ? "s" : "";
        for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + std::to_string(missing[k]);
        if (missing.size() > 20) msg += " ...";
        throw ValidationError(msg);
    }

    ImportResult out;
    out.assignments.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        CellAssignment& a = out.assignments[c];
        a.cell = c;
        a.design = des[c]->design;
        try {
            a.achieved = surrogate_forward(a.design, mat, edge_length);
        } catch (const ClosureError& e) {
            throw NumericalError("cell " + std::to_string(c) + ": design has no valid surrogate configuration (" +
                                 e.what() + ")");
        }
        a.target = condition_config(*cond[c], edge_length);
        const Alignment al = procrustes_align(a.target.coords, a.achieved.coords);
        a.rotation = al.rotation;
        a.dissimilarity = al.residual;
        if (a.dissimilarity > report_threshold) out.flagged.push_back(c);
    }
    return out;
}

/// Database retrieval for every condition row (the retrieval stand-in for an external designer).
inline std::vector<DesignRow> retrieve_designs(std::span<const ConditionRow> conditions, const ConfigDatabase& db,
                                               double edge_length = kDefaultEdgeLength, std::size_t shortlist_k = 32) {
    std::vector<DesignRow> rows(conditions.size());
    parallel_for(conditions.size(), [&](std::size_t i) {
        const Match m = db.nearest(condition_config(conditions[i], edge_length), shortlist_k);
        rows[i] = {conditions[i].cell, db.record(m.record).design};
    });
    return rows;
}

}  // namespace morphkit
