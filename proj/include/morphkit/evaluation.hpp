#pragma once

// Verification of an assembled design and the accuracy metrics.
//
// assemble_evaluate rebuilds the global shape that the designed cells produce together: every
// cell is pulled towards its achieved (surrogate) configuration under a free rotation, fixed
// vertices are pinned at rest, and a small Laplacian proximal term regularizes each step. The
// proximal term is anchored at the previous iterate, so it vanishes at convergence and the
// result is a stationary point of the shape-matching energy alone.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "morphkit/configdb.hpp"
#include "morphkit/conlme.hpp"
#include "morphkit/microscale.hpp"

namespace morphkit {

struct EvaluateOptions {
    double w_S = 1.0;
    double w_L = 1e-3;
    double pin_weight = 1e4;
    int max_iter = 2000;
    double tol = 1e-10;  // mm
};

struct Reconstruction {
    Positions positions;
    int iterations = 0;
    bool converged = false;
    double shape_residual = 0;  // sum over cells of ||centered cell - R achieved||^2, mm^2
    double pin_residual = 0;    // sum over fixed vertices of ||v - rest||^2, mm^2
};

inline Reconstruction assemble_evaluate(const LinkageMesh& mesh, std::span<const CellAssignment> assignments,
                                        std::span<const VertexId> fixed_vertices, const EvaluateOptions& opt = {}) {
    const std::size_t nc = mesh.cell_count();
    if (assignments.size() != nc) throw ValidationError("assemble_evaluate needs one assignment per cell");
    for (std::size_t c = 0; c < nc; ++c)
        if (assignments[c].cell != c) throw ValidationError("assignments must be indexed by cell");
    if (fixed_vertices.empty()) throw ValidationError("assemble_evaluate needs at least one fixed vertex");

    const double w_t = opt.pin_weight;
    std::vector<Handle> pins;
    for (VertexId v : fixed_vertices) pins.push_back({v, mesh.vertices.at(static_cast<std::size_t>(v)), 1.0});
    const NormalSystem sys(mesh, {opt.w_L, opt.w_S, w_t}, pins);

    Reconstruction r;
    r.positions = mesh.vertices;
    Positions disp(mesh.vertex_count(), Vec2::Zero());
    std::vector<Octagon> targets(nc);
    std::vector<double> trace;
    for (int it = 1; it <= opt.max_iter; ++it) {
        parallel_for(nc, [&](std::size_t c) {
            const Octagon cur = centered(mesh.cell_positions(c, r.positions));
            const Alignment al = procrustes_align(cur, assignments[c].achieved.coords);
            targets[c] = rotated(assignments[c].achieved.coords, al.rotation);
        });
        for (std::size_t i = 0; i < disp.size(); ++i) disp[i] = r.positions[i] - mesh.vertices[i];
        Positions next = sys.solve(targets, disp);
        double max_disp = 0;
        for (std::size_t i = 0; i < next.size(); ++i) max_disp = std::max(max_disp, (next[i] - r.positions[i]).norm());
        r.positions = std::move(next);
        r.iterations = it;
        trace.push_back(max_disp);
        if (!std::isfinite(max_disp) || (trace.size() > 20 && max_disp > 1e3 * mesh.edge_length))
            throw NumericalError("assembled reconstruction diverged at iteration " + std::to_string(it));
        if (max_disp < opt.tol) {
            r.converged = true;
            break;
        }
    }
    for (std::size_t c = 0; c < nc; ++c) {
        const Octagon cur = centered(mesh.cell_positions(c, r.positions));
        r.shape_residual += std::pow(procrustes_align(cur, assignments[c].achieved.coords).residual, 2);
    }
    for (VertexId v : fixed_vertices) r.pin_residual += (r.positions[v] - mesh.vertices[v]).squaredNorm();
    return r;
}

// Coefficient of determination averaged over dimensions.

struct R2Result {
    std::optional<double> value;                   // mean over non-degenerate dimensions
    std::vector<std::optional<double>> per_dim;    // absent where the target variance vanishes
    std::size_t degenerate = 0;
};

/// targets/actuals: K rows of D values. A dimension whose target standard deviation is below
/// degenerate_sd is skipped and flagged.
inline R2Result r2_average(const std::vector<std::vector<double>>& targets, const std::vector<std::vector<double>>& actuals,
                           double degenerate_sd = 1e-12) {
    if (targets.size() != actuals.size()) throw ValidationError("R2: target and actual counts differ");
    const std::size_t K = targets.size();
    if (K == 0) throw ValidationError("R2: no samples");
    const std::size_t D = targets[0].size();
    for (std::size_t i = 0; i < K; ++i)
        if (targets[i].size() != D || actuals[i].size() != D) throw ValidationError("R2: ragged input");
    R2Result r;
    r.per_dim.resize(D);
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t j = 0; j < D; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < K; ++i) mean += targets[i][j];
        mean /= static_cast<double>(K);
        double ss_res = 0, ss_tot = 0;
        for (std::size_t i = 0; i < K; ++i) {
            ss_res += (targets[i][j] - actuals[i][j]) * (targets[i][j] - actuals[i][j]);
            ss_tot += (targets[i][j] - mean) * (targets[i][j] - mean);
        }
        if (K < 2 || ss_tot <= degenerate_sd * degenerate_sd * static_cast<double>(K)) {
            ++r.degenerate;
            continue;
        }
        r.per_dim[j] = 1.0 - ss_res / ss_tot;
        sum += *r.per_dim[j];
        ++used;
    }
    if (used > 0) r.value = sum / static_cast<double>(used);
    return r;
}

/// Micro-scale R2 over K cells of 8 angle changes (target vs achieved).
inline R2Result r2_micro(const std::vector<std::vector<double>>& targets, const std::vector<std::vector<double>>& actuals) {
    if (targets.size() < 2) throw ValidationError("R2_micro needs at least 2 cells");
    for (const auto& t : targets)
        if (t.size() != kCellVertices) throw ValidationError("R2_micro rows must have 8 angle changes");
    R2Result r = r2_average(targets, actuals);
    if (!r.value) throw ValidationError("R2_micro: every angle dimension has zero target variance");
    return r;
}

/// Macro-scale R2 over M handle positions (x, y); degenerate dimensions are flagged only.
inline R2Result r2_macro(const std::vector<std::vector<double>>& targets, const std::vector<std::vector<double>>& actuals) {
    if (targets.size() < 2) throw ValidationError("R2_macro needs at least 2 handles");
    for (const auto& t : targets)
        if (t.size() != 2) throw ValidationError("R2_macro rows must have 2 coordinates");
    return r2_average(targets, actuals);
}

struct HandleError {
    double mae = 0;            // mm
    std::optional<double> mre; // fraction; absent when L_c = 0
    double L_c = 0;            // mm
};

inline HandleError mae_mre(std::span<const Vec2> target_disp, std::span<const Vec2> actual_disp) {
    if (target_disp.empty()) throw ValidationError("MAE needs at least one handle");
    if (target_disp.size() != actual_disp.size()) throw ValidationError("MAE: target and actual counts differ");
    HandleError e;
    for (std::size_t i = 0; i < target_disp.size(); ++i) {
        e.mae += (target_disp[i] - actual_disp[i]).norm();
        e.L_c = std::max(e.L_c, target_disp[i].norm());
    }
    e.mae /= static_cast<double>(target_disp.size());
    if (e.L_c > 0) e.mre = e.mae / e.L_c;
    return e;
}

/// Scalar form: MRE from a reported (MAE, L_c) pair.
inline double mre_from(double mae, double L_c) {
    if (!(L_c > 0)) throw ValidationError("L_c must be positive");
    return mae / L_c;
}

struct Diagnostics {
    std::vector<double> dissimilarity;  // per cell, mm
    std::vector<double> edge_deviation; // per edge, |length after - length before|, mm
    std::vector<double> area_change;    // per cell, mm^2
    double area_before = 0;
    double area_after = 0;
    double total_area_change = 0;       // signed fraction of the initial occupied area

    double max_dissimilarity() const { return max_of(dissimilarity); }
    double max_edge_deviation() const { return max_of(edge_deviation); }

private:
    static double max_of(const std::vector<double>& v) { return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end()); }
};

/// Diagnostic maps of `after` relative to `before` (same topology). Dissimilarity is skipped
/// when db is null.
inline Diagnostics diagnostics(const LinkageMesh& mesh, std::span<const Vec2> before, std::span<const Vec2> after,
                               const ConfigDatabase* db, std::size_t shortlist_k = 32) {
    if (before.size() != mesh.vertex_count() || after.size() != mesh.vertex_count())
        throw ValidationError("diagnostics: position tables do not match the mesh");
    Diagnostics d;
    const std::size_t nc = mesh.cell_count();
    d.edge_deviation.resize(mesh.edges.size());
    for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
        const auto& ed = mesh.edges[e];
        d.edge_deviation[e] = std::abs((after[ed.v1] - after[ed.v0]).norm() - (before[ed.v1] - before[ed.v0]).norm());
    }
    d.area_change.resize(nc);
    for (std::size_t c = 0; c < nc; ++c) {
        const double a0 = cell_area(mesh.cell_positions(c, before));
        const double a1 = cell_area(mesh.cell_positions(c, after));
        d.area_change[c] = a1 - a0;
        d.area_before += a0;
        d.area_after += a1;
    }
    d.total_area_change = d.area_before > 0 ? (d.area_after - d.area_before) / d.area_before : 0.0;
    if (db) {
        d.dissimilarity.resize(nc);
        parallel_for(nc, [&](std::size_t c) {
            CellConfig q;
            q.coords = centered(mesh.cell_positions(c, after));
            try {
                q.angles = angles_from_coords(q.coords);
            } catch (const ValidationError&) {
                q.angles = rest_angles();
            }
            d.dissimilarity[c] = db->nearest(q, shortlist_k).dissimilarity;
        });
    }
    return d;
}

/// Angle changes relative to the rest angles, one row per cell.
inline std::vector<std::vector<double>> angle_changes(std::span<const Angles> angles) {
    const Angles rest = rest_angles();
    std::vector<std::vector<double>> out(angles.size(), std::vector<double>(kCellVertices));
    for (std::size_t i = 0; i < angles.size(); ++i)
        for (int j = 0; j < kCellVertices; ++j) out[i][j] = angles[i][j] - rest[j];
    return out;
}

struct EvaluationReport {
    HandleError handle_error;
    R2Result r2_macro;
    R2Result r2_micro;
    std::size_t handle_count = 0;
    Reconstruction reconstruction;
    Diagnostics macro;      // macroscale solution vs rest, with dissimilarity
    Diagnostics assembled;  // reconstructed structure vs rest (edges and areas only)
};

/// Full evaluation of an assembled design: handle accuracy of the reconstruction, micro R2 of
/// achieved vs target angle changes, and diagnostic maps of the macroscale solution.
inline EvaluationReport evaluate_design(const LinkageMesh& mesh, const DomainSpec& task,
                                        std::span<const CellAssignment> assignments, std::span<const Vec2> macro_positions,
                                        const ConfigDatabase* db, const EvaluateOptions& opt = {}) {
    EvaluationReport rep;
    rep.reconstruction = assemble_evaluate(mesh, assignments, task.fixed, opt);
    const Positions& v = rep.reconstruction.positions;

    std::vector<Vec2> td, ad;
    std::vector<std::vector<double>> tp, ap;
    for (const auto& h : task.handles) {
        td.push_back(h.target - mesh.vertices[h.vertex]);
        ad.push_back(v[h.vertex] - mesh.vertices[h.vertex]);
        tp.push_back({h.target.x(), h.target.y()});
        ap.push_back({v[h.vertex].x(), v[h.vertex].y()});
    }
    rep.handle_count = td.size();
    if (!td.empty()) rep.handle_error = mae_mre(td, ad);
    if (tp.size() >= 2) {
        rep.r2_macro = r2_macro(tp, ap);
    } else {
        rep.r2_macro.per_dim.assign(2, std::nullopt);
        rep.r2_macro.degenerate = 2;
    }

    std::vector<Angles> ta, aa;
    for (const auto& a : assignments) {
        ta.push_back(a.target.angles);
        aa.push_back(a.achieved.angles);
    }
    if (ta.size() >= 2) {
        rep.r2_micro = r2_average(angle_changes(ta), angle_changes(aa));
    } else {
        rep.r2_micro.per_dim.assign(kCellVertices, std::nullopt);
        rep.r2_micro.degenerate = kCellVertices;
    }
    rep.macro = diagnostics(mesh, mesh.vertices, macro_positions, db);
    rep.assembled = diagnostics(mesh, mesh.vertices, v, nullptr);
    return rep;
}

}  // namespace morphkit
