#pragma once

// Constrained Laplacian mesh editing.
//
// Unknown: vertex displacement u = v - v_rest, stacked per coordinate (all operators act on x
// and y identically, so the 2N x 2N system is block-diagonal and one N x N factorization
// serves both coordinates). Energy:
//
//   w_L * ||L_L (u - u_anchor)||^2                 Laplacian of displacement, u_anchor = 0
//   + w_S * sum_cells ||L_S v - b^D||^2             cell shape vs aligned dataset record
//   + w_t * sum_handles weight_h * ||v_h - t_h||^2  handle targets
//
// Normal matrix  L^a = w_L L_L^T L_L + w_S L_S^T L_S + w_t L_t^T W L_t,
// right side     b^a = w_S L_S^T (b^D - L_S v_rest) + w_t L_t^T W (t - v_rest)   (+ anchor term).
//
// conlme_solve alternates per-cell retrieval (nearest record + Procrustes rotation) with an
// exact linear solve, starting from the w_S = 0 solution.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "morphkit/configdb.hpp"
#include "morphkit/mesh.hpp"
#include "morphkit/parallel.hpp"

namespace morphkit {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Positions = std::vector<Vec2>;

struct SolverWeights {
    double w_L = 1.0;
    double w_S = 1.0;
    double w_t = 1e3;

    /// Minimal requirements for a system matrix; positive definiteness is checked on factorization.
    void validate_system() const {
        if (!(w_L >= 0 && w_S >= 0 && w_t >= 0)) throw ValidationError("solver weights must be nonnegative");
        if (!(w_t > 0)) throw ValidationError("w_t must be positive");
    }

    void validate() const {
        validate_system();
        if (!(w_L + w_S > 0)) throw ValidationError("w_L + w_S must be positive");
    }
};

/// Soft positional constraint; weight multiplies w_t.
struct Handle {
    VertexId vertex = 0;
    Vec2 target = Vec2::Zero();
    double weight = 1.0;
};

/// Handles from a domain: prescribed targets plus fixed vertices pinned at rest.
inline std::vector<Handle> task_handles(const LinkageMesh& mesh, const DomainSpec& spec) {
    std::vector<Handle> out;
    for (const auto& h : spec.handles) out.push_back({h.vertex, h.target, 1.0});
    for (VertexId f : spec.fixed) out.push_back({f, mesh.vertices[f], 1.0});
    return out;
}

/// Uniform graph Laplacian: row i is v_i - mean of neighbours.
inline SparseMatrix assemble_laplacian(const LinkageMesh& mesh) {
    const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& adj = mesh.adjacency[static_cast<std::size_t>(i)];
        if (adj.empty()) throw ValidationError("vertex " + std::to_string(i) + " is isolated (degree 0)");
        trip.emplace_back(i, i, 1.0);
        const double w = 1.0 / static_cast<double>(adj.size());
        for (VertexId j : adj) trip.emplace_back(i, j, -w);
    }
    SparseMatrix L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

/// Per-cell centering operator; row 8c + j gives v_{c,j} - centroid_c (one coordinate).
inline SparseMatrix assemble_consistency(const LinkageMesh& mesh) {
    const auto rows = static_cast<Eigen::Index>(kCellVertices * mesh.cell_count());
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t c = 0; c < mesh.cell_count(); ++c)
        for (int j = 0; j < kCellVertices; ++j) {
            const auto row = static_cast<Eigen::Index>(kCellVertices * c + j);
            for (int k = 0; k < kCellVertices; ++k)
                trip.emplace_back(row, mesh.cells[c][k], (j == k ? 1.0 : 0.0) - 1.0 / kCellVertices);
        }
    SparseMatrix S(rows, static_cast<Eigen::Index>(mesh.vertex_count()));
    S.setFromTriplets(trip.begin(), trip.end());
    return S;
}

/// Selection matrix: one row per handle, 1 at its vertex.
inline SparseMatrix assemble_selection(std::size_t vertex_count, std::span<const Handle> handles) {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t h = 0; h < handles.size(); ++h) trip.emplace_back(static_cast<Eigen::Index>(h), handles[h].vertex, 1.0);
    SparseMatrix T(static_cast<Eigen::Index>(handles.size()), static_cast<Eigen::Index>(vertex_count));
    T.setFromTriplets(trip.begin(), trip.end());
    return T;
}

/// diag(A, A): the operator on the stacked [x; y] vector.
inline SparseMatrix coordinate_blocks(const SparseMatrix& A) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int q = 0; q < 2; ++q)
        for (Eigen::Index k = 0; k < A.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(A, k); it; ++it)
                trip.emplace_back(it.row() + q * A.rows(), it.col() + q * A.cols(), it.value());
    SparseMatrix B(2 * A.rows(), 2 * A.cols());
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
}

struct EnergyTerms {
    double laplacian = 0;
    double consistency = 0;
    double target = 0;
    double total = 0;
};

/// Factorized normal matrix L^a for one (mesh, weights, handle set). The sparsity pattern does
/// not depend on the handles, so set_handles refactorizes numerically on the cached pattern.
class NormalSystem {
public:
    NormalSystem(const LinkageMesh& mesh, const SolverWeights& weights, std::vector<Handle> handles)
        : mesh_(&mesh), weights_(weights) {
        weights_.validate_system();
        L_ = assemble_laplacian(mesh);
        S_ = assemble_consistency(mesh);
        LtL_ = SparseMatrix(L_.transpose()) * L_;
        StS_ = SparseMatrix(S_.transpose()) * S_;
        const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
        rest_x_.resize(n);
        rest_y_.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            rest_x_[i] = mesh.vertices[static_cast<std::size_t>(i)].x();
            rest_y_[i] = mesh.vertices[static_cast<std::size_t>(i)].y();
        }
        srest_x_ = S_ * rest_x_;
        srest_y_ = S_ * rest_y_;
        set_handles(std::move(handles));
    }

    void set_handles(std::vector<Handle> handles) {
        if (handles.empty()) throw ValidationError("system needs at least one handle (w_t term would vanish)");
        const auto n = static_cast<Eigen::Index>(mesh_->vertex_count());
        for (const auto& h : handles)
            if (h.vertex < 0 || h.vertex >= n) throw ValidationError("handle vertex out of range");
        handles_ = std::move(handles);
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
        for (const auto& h : handles_) diag[h.vertex] += weights_.w_t * h.weight;
        std::vector<Eigen::Triplet<double>> trip;
        for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, diag[i]);
        SparseMatrix D(n, n);
        D.setFromTriplets(trip.begin(), trip.end());
        A_ = weights_.w_L * LtL_ + weights_.w_S * StS_ + D;
        A_.makeCompressed();
        if (!analyzed_) {
            ldlt_.analyzePattern(A_);
            analyzed_ = true;
        }
        ldlt_.factorize(A_);
        if (ldlt_.info() != Eigen::Success)
            throw NumericalError("normal matrix factorization failed");
        const Eigen::VectorXd d = ldlt_.vectorD();
        const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
        if (!(d.minCoeff() > 1e-13 * scale))
            throw NumericalError("normal matrix is not positive definite: need w_t > 0 with at least one handle, "
                                 "w_L + w_S > 0, and a connected mesh");
    }

    const LinkageMesh& mesh() const { return *mesh_; }
    const SolverWeights& weights() const { return weights_; }
    const std::vector<Handle>& handles() const { return handles_; }
    const SparseMatrix& matrix() const { return A_; }
    SparseMatrix full_matrix() const { return coordinate_blocks(A_); }
    const SparseMatrix& laplacian() const { return L_; }
    const SparseMatrix& consistency() const { return S_; }

    /// Minimizer of the quadratic energy for fixed per-cell targets (centered, rotated record
    /// coordinates). laplacian_anchor is a displacement field subtracted inside E_L.
    Positions solve(std::span<const Octagon> targets, std::span<const Vec2> laplacian_anchor = {}) const {
        const auto n = static_cast<Eigen::Index>(mesh_->vertex_count());
        const auto m = static_cast<Eigen::Index>(kCellVertices * mesh_->cell_count());
        if (targets.size() != mesh_->cell_count()) throw ValidationError("one target per cell required");
        Eigen::VectorXd bx(m), by(m);
        for (std::size_t c = 0; c < targets.size(); ++c)
            for (int j = 0; j < kCellVertices; ++j) {
                bx[static_cast<Eigen::Index>(kCellVertices * c + j)] = targets[c][j].x();
                by[static_cast<Eigen::Index>(kCellVertices * c + j)] = targets[c][j].y();
            }
        Eigen::VectorXd rx = weights_.w_S * (S_.transpose() * (bx - srest_x_));
        Eigen::VectorXd ry = weights_.w_S * (S_.transpose() * (by - srest_y_));
        for (const auto& h : handles_) {
            const double w = weights_.w_t * h.weight;
            rx[h.vertex] += w * (h.target.x() - rest_x_[h.vertex]);
            ry[h.vertex] += w * (h.target.y() - rest_y_[h.vertex]);
        }
        if (!laplacian_anchor.empty() && weights_.w_L > 0) {
            Eigen::VectorXd ax(n), ay(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                ax[i] = laplacian_anchor[static_cast<std::size_t>(i)].x();
                ay[i] = laplacian_anchor[static_cast<std::size_t>(i)].y();
            }
            rx += weights_.w_L * (LtL_ * ax);
            ry += weights_.w_L * (LtL_ * ay);
        }
        const Eigen::VectorXd ux = ldlt_.solve(rx);
        const Eigen::VectorXd uy = ldlt_.solve(ry);
        if (!ux.allFinite() || !uy.allFinite()) throw NumericalError("linear solve produced non-finite values");
        Positions v(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = Vec2(rest_x_[i] + ux[i], rest_y_[i] + uy[i]);
        return v;
    }

    EnergyTerms energy(std::span<const Vec2> v, std::span<const Octagon> targets,
                       std::span<const Vec2> laplacian_anchor = {}) const {
        const auto n = static_cast<Eigen::Index>(mesh_->vertex_count());
        Eigen::VectorXd ux(n), uy(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec2 u = v[static_cast<std::size_t>(i)] - mesh_->vertices[static_cast<std::size_t>(i)];
            if (!laplacian_anchor.empty()) u -= laplacian_anchor[static_cast<std::size_t>(i)];
            ux[i] = u.x();
            uy[i] = u.y();
        }
        EnergyTerms e;
        e.laplacian = (L_ * ux).squaredNorm() + (L_ * uy).squaredNorm();
        for (std::size_t c = 0; c < mesh_->cell_count(); ++c) {
            const Octagon cur = centered(mesh_->cell_positions(c, v));
            for (int j = 0; j < kCellVertices; ++j) e.consistency += (cur[j] - targets[c][j]).squaredNorm();
        }
        for (const auto& h : handles_) e.target += h.weight * (v[h.vertex] - h.target).squaredNorm();
        e.total = weights_.w_L * e.laplacian + weights_.w_S * e.consistency + weights_.w_t * e.target;
        return e;
    }

private:
    const LinkageMesh* mesh_;
    SolverWeights weights_;
    std::vector<Handle> handles_;
    SparseMatrix L_, S_, LtL_, StS_, A_;
    Eigen::VectorXd rest_x_, rest_y_, srest_x_, srest_y_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    bool analyzed_ = false;
};

/// Placed target for one cell: the record's canonical coordinates rotated by the alignment angle.
inline Octagon aligned_record(const ConfigDatabase& db, const Match& m) {
    return rotated(db.record(m.record).config.coords, m.rotation);
}

/// Single exact solve for fixed assignments.
inline Positions solve_step(const NormalSystem& system, const ConfigDatabase& db, std::span<const Match> assignments) {
    std::vector<Octagon> targets(assignments.size());
    for (std::size_t c = 0; c < assignments.size(); ++c) targets[c] = aligned_record(db, assignments[c]);
    return system.solve(targets);
}

/// Per-edge |length - rest_length|.
inline std::vector<double> edge_deviations(const LinkageMesh& mesh, std::span<const Vec2> v) {
    std::vector<double> out(mesh.edges.size());
    for (std::size_t e = 0; e < mesh.edges.size(); ++e)
        out[e] = std::abs((v[mesh.edges[e].v1] - v[mesh.edges[e].v0]).norm() - mesh.edges[e].rest_length);
    return out;
}

struct IterationRecord {
    int iteration = 0;
    EnergyTerms energy;
    double max_displacement = 0;
};

struct ConlmeState {
    Positions positions;
    std::vector<Match> assignments;
    int iteration = 0;
    bool converged = false;
    std::vector<IterationRecord> log;
    std::vector<double> dissimilarity;   // per cell, re-evaluated at the final positions
    std::vector<double> edge_deviation;  // per edge, at the final positions

    double max_dissimilarity() const {
        return dissimilarity.empty() ? 0.0 : *std::max_element(dissimilarity.begin(), dissimilarity.end());
    }
};

struct ConlmeOptions {
    int max_iter = 200;
    double tol = 1e-6;  // mm, max per-vertex displacement between iterations
    std::size_t shortlist_k = 32;
    bool fixed_iterations = false;  // run exactly max_iter iterations (benchmarking)
};

/// Alternating solver bound to one normal system. Cells listed in `frozen` keep their match;
/// all others are re-matched against the database each iteration.
class ConlmeSolver {
public:
    ConlmeSolver(const LinkageMesh& mesh, const SolverWeights& weights, std::vector<Handle> handles,
                 const ConfigDatabase& db, ConlmeOptions opt = {})
        : system_(mesh, weights, std::move(handles)), db_(&db), opt_(opt) {
        if (db.empty()) throw ValidationError("configuration database is empty");
    }

    NormalSystem& system() { return system_; }
    const NormalSystem& system() const { return system_; }
    ConlmeOptions& options() { return opt_; }
    const ConlmeOptions& options() const { return opt_; }

    /// Start of the alternation: the w_S = 0 solve (Laplacian + targets). With w_L = 0 that
    /// system is singular in general, so the rest mesh is used instead.
    Positions initial_positions() const {
        const auto& m = system_.mesh();
        SolverWeights w = system_.weights();
        if (w.w_L <= 0) return m.vertices;
        w.w_S = 0;
        NormalSystem init(m, w, system_.handles());
        std::vector<Octagon> zero(m.cell_count());
        for (auto& o : zero) o.fill(Vec2::Zero());
        return init.solve(zero);
    }

    Match match_cell(std::span<const Vec2> v, std::size_t cell, std::optional<RecordId> hint) const {
        CellConfig q;
        q.coords = centered(system_.mesh().cell_positions(cell, v));
        try {
            q.angles = angles_from_coords(q.coords);
        } catch (const ValidationError&) {
            q.angles = rest_angles();  // degenerate cell: shortlist around rest, hint still applies
        }
        return db_->nearest(q, opt_.shortlist_k, hint);
    }

    /// Procrustes re-alignment of a fixed record to the current cell.
    Match realign(std::span<const Vec2> v, std::size_t cell, RecordId record) const {
        const Octagon cur = centered(system_.mesh().cell_positions(cell, v));
        const Alignment al = procrustes_align(cur, db_->record(record).config.coords);
        return {record, al.rotation, al.residual};
    }

    ConlmeState run(std::optional<Positions> start = {}, const std::vector<std::optional<Match>>& frozen = {},
                    std::vector<Match> previous = {}) const {
        const auto& mesh = system_.mesh();
        const std::size_t nc = mesh.cell_count();
        ConlmeState st;
        st.positions = start ? std::move(*start) : initial_positions();
        st.assignments = previous.size() == nc ? std::move(previous) : std::vector<Match>(nc);
        std::vector<double> disp_history;
        std::vector<Octagon> targets(nc);

        for (int it = 1; it <= opt_.max_iter; ++it) {
            parallel_for(nc, [&](std::size_t c) {
                if (c < frozen.size() && frozen[c]) {
                    st.assignments[c] = *frozen[c];
                } else {
                    std::optional<RecordId> hint;
                    if (st.assignments[c].record >= 0) hint = st.assignments[c].record;
                    st.assignments[c] = match_cell(st.positions, c, hint);
                }
                targets[c] = aligned_record(*db_, st.assignments[c]);
            });
            Positions next = system_.solve(targets);
            double max_disp = 0;
            for (std::size_t i = 0; i < next.size(); ++i) max_disp = std::max(max_disp, (next[i] - st.positions[i]).norm());
            st.positions = std::move(next);
            st.iteration = it;
            st.log.push_back({it, system_.energy(st.positions, targets), max_disp});
            disp_history.push_back(max_disp);

            const std::size_t h = disp_history.size();
            if (h >= 6) {
                bool growing = true;
                for (std::size_t k = h - 5; k < h; ++k) growing = growing && disp_history[k] > disp_history[k - 1];
                if (growing && disp_history[h - 1] > 10 * disp_history[h - 6]) {
                    std::ostringstream msg;
                    msg << "ConLME diverging at iteration " << it << "; max displacement trace:";
                    for (std::size_t k = h - 6; k < h; ++k) msg << ' ' << disp_history[k];
                    throw NumericalError(msg.str());
                }
            }
            if (!opt_.fixed_iterations && max_disp < opt_.tol) {
                st.converged = true;
                break;
            }
        }
        if (opt_.fixed_iterations) st.converged = !disp_history.empty() && disp_history.back() < opt_.tol;

        st.dissimilarity.resize(nc);
        parallel_for(nc, [&](std::size_t c) {
            const bool is_frozen = c < frozen.size() && frozen[c];
            st.dissimilarity[c] = is_frozen ? realign(st.positions, c, frozen[c]->record).dissimilarity
                                            : match_cell(st.positions, c, st.assignments[c].record).dissimilarity;
        });
        st.edge_deviation = edge_deviations(mesh, st.positions);
        return st;
    }

private:
    NormalSystem system_;
    const ConfigDatabase* db_;
    ConlmeOptions opt_;
};

inline ConlmeState conlme_solve(const LinkageMesh& mesh, std::vector<Handle> handles, const SolverWeights& weights,
                                const ConfigDatabase& db, const ConlmeOptions& opt = {}) {
    ConlmeSolver solver(mesh, weights, std::move(handles), db, opt);
    return solver.run();
}

/// Largest increase of total energy between consecutive logged iterations (<= 0 when monotone).
inline double max_energy_increase(const ConlmeState& st) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < st.log.size(); ++k)
        worst = std::max(worst, st.log[k].energy.total - st.log[k - 1].energy.total);
    return st.log.size() < 2 ? 0.0 : worst;
}

struct AutoWeightResult {
    SolverWeights weights;
    bool met = false;
    double max_dissimilarity = 0;
    ConlmeState state;
    std::vector<std::pair<double, double>> trials;  // (w_S, max dissimilarity)
};

/// Doubles w_S from its initial value (at most 12 times) until the worst per-cell
/// dissimilarity is at or below the threshold. Returns the first passing weights, or the best
/// trial with met = false.
inline AutoWeightResult auto_weight_ws(const LinkageMesh& mesh, const std::vector<Handle>& handles,
                                       const SolverWeights& init, const ConfigDatabase& db, double threshold,
                                       const ConlmeOptions& opt = {}) {
    if (!(threshold > 0)) throw ValidationError("dissimilarity threshold must be positive");
    AutoWeightResult best;
    best.max_dissimilarity = std::numeric_limits<double>::infinity();
    SolverWeights w = init;
    for (int doubling = 0; doubling <= 12; ++doubling) {
        ConlmeState st = conlme_solve(mesh, handles, w, db, opt);
        const double d = st.max_dissimilarity();
        best.trials.emplace_back(w.w_S, d);
        if (d < best.max_dissimilarity) {
            best.weights = w;
            best.max_dissimilarity = d;
            best.state = std::move(st);
        }
        if (d <= threshold) {
            best.met = true;
            best.weights = w;
            best.max_dissimilarity = d;
            if (best.state.positions.empty() || best.trials.back().second != d) best.state = conlme_solve(mesh, handles, w, db, opt);
            return best;
        }
        w.w_S *= 2;
    }
    return best;
}

}  // namespace morphkit
