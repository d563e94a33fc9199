#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "morphkit/conlme.hpp"
#include "morphkit/tasks.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace morphkit;
using testing_support::shared_db;

namespace {

Eigen::MatrixXd dense(const SparseMatrix& A) { return Eigen::MatrixXd(A); }

std::vector<Octagon> rest_targets(const LinkageMesh& m) {
    std::vector<Octagon> t(m.cell_count());
    for (std::size_t c = 0; c < m.cell_count(); ++c) t[c] = centered(m.cell_positions(c, m.vertices));
    return t;
}

std::vector<Handle> rest_handles(const LinkageMesh& m, std::initializer_list<VertexId> ids) {
    std::vector<Handle> h;
    for (VertexId v : ids) h.push_back({v, m.vertices[v], 1.0});
    return h;
}

double handle_mae(const std::vector<Handle>& hs, const Positions& v) {
    double s = 0;
    for (const auto& h : hs) s += (v[h.vertex] - h.target).norm();
    return s / static_cast<double>(hs.size());
}

}  // namespace

TEST(Laplacian, RowSumsZeroAndConstantKernel) {
    DomainSpec s = DomainSpec::full(3, 4);
    s.occupancy[5] = false;
    const LinkageMesh m = build_mesh(s);
    const SparseMatrix L = assemble_laplacian(m);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(L.cols());
    EXPECT_LT((L * ones).lpNorm<Eigen::Infinity>(), 1e-15);
    for (Eigen::Index i = 0; i < L.rows(); ++i) {
        EXPECT_DOUBLE_EQ(L.coeff(i, i), 1.0);
        EXPECT_NEAR(dense(L).row(i).sum(), 0.0, 1e-15);
    }
    // Interior vertices of the uniform lattice are at their neighbour average; not every boundary row is.
    Eigen::VectorXd x(m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) x[static_cast<Eigen::Index>(i)] = m.vertices[i].x();
    EXPECT_GT((L * x).norm(), 0.0);

    LinkageMesh broken = m;
    broken.adjacency[2].clear();
    EXPECT_THROW(assemble_laplacian(broken), ValidationError);
}

TEST(Consistency, CentersRestCellsAndAnnihilatesTranslation) {
    const LinkageMesh m = build_mesh(DomainSpec::full(2, 2));
    const SparseMatrix S = assemble_consistency(m);
    ASSERT_EQ(S.rows(), 8 * 4);
    Eigen::VectorXd x(m.vertex_count()), y(m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        x[static_cast<Eigen::Index>(i)] = m.vertices[i].x();
        y[static_cast<Eigen::Index>(i)] = m.vertices[i].y();
    }
    const Eigen::VectorXd sx = S * x, sy = S * y;
    const auto targets = rest_targets(m);
    for (std::size_t c = 0; c < m.cell_count(); ++c)
        for (int j = 0; j < 8; ++j) {
            EXPECT_NEAR(sx[static_cast<Eigen::Index>(8 * c + j)], targets[c][j].x(), 1e-15);
            EXPECT_NEAR(sy[static_cast<Eigen::Index>(8 * c + j)], targets[c][j].y(), 1e-15);
        }
    EXPECT_LT((S * Eigen::VectorXd::Constant(S.cols(), 3.7)).norm(), 1e-14);
}

TEST(Consistency, SingleCellHas16RowsRank14) {
    const LinkageMesh m = build_mesh(DomainSpec::full(1, 1));
    const Eigen::MatrixXd S2 = dense(coordinate_blocks(assemble_consistency(m)));
    EXPECT_EQ(S2.rows(), 16);
    EXPECT_EQ(S2.cols(), 16);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(S2);
    lu.setThreshold(1e-10);
    EXPECT_EQ(lu.rank(), 14);
}

TEST(NormalSystem, SingleCellPositiveDefiniteAndSymmetric) {
    const LinkageMesh m = build_mesh(DomainSpec::full(1, 1));
    const NormalSystem sys(m, {1, 1, 10}, rest_handles(m, {0}));
    const Eigen::MatrixXd A = dense(sys.full_matrix());
    ASSERT_EQ(A.rows(), 16);
    EXPECT_EQ((A - A.transpose()).norm(), 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    // Dense matrix built from the definitions.
    const Eigen::MatrixXd L = dense(assemble_laplacian(m)), S = dense(assemble_consistency(m));
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(8, 8);
    T(0, 0) = 1;
    const Eigen::MatrixXd expect = L.transpose() * L + S.transpose() * S + 10 * T;
    EXPECT_LT((dense(sys.matrix()) - expect).norm(), 1e-13);
}

TEST(NormalSystem, SelectionOnlyIsScaledIdentity) {
    const LinkageMesh m = build_mesh(DomainSpec::full(1, 2));
    std::vector<Handle> all;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) all.push_back({static_cast<VertexId>(i), m.vertices[i], 1.0});
    const NormalSystem sys(m, {0, 0, 7.5}, all);
    const Eigen::MatrixXd A = dense(sys.full_matrix());
    EXPECT_LT((A - 7.5 * Eigen::MatrixXd::Identity(A.rows(), A.cols())).norm(), 1e-15);
}

TEST(NormalSystem, IndefiniteSystemsRejected) {
    const LinkageMesh m = build_mesh(DomainSpec::full(1, 1));
    EXPECT_THROW(NormalSystem(m, {0, 0, 10}, rest_handles(m, {0})), NumericalError);
    EXPECT_THROW(NormalSystem(m, {1, 1, 0}, rest_handles(m, {0})), ValidationError);
    EXPECT_THROW(NormalSystem(m, {1, 1, 10}, {}), ValidationError);
    EXPECT_THROW(NormalSystem(m, {-1, 1, 10}, rest_handles(m, {0})), ValidationError);
    std::vector<Handle> bad{{99, Vec2::Zero(), 1.0}};
    EXPECT_THROW(NormalSystem(m, {1, 1, 10}, bad), ValidationError);
    SolverWeights w{0, 0, 1};
    EXPECT_NO_THROW(w.validate_system());
    EXPECT_THROW(w.validate(), ValidationError);
}

TEST(SolveStep, RestIsFixedPoint) {
    const LinkageMesh m = build_mesh(DomainSpec::full(3, 3));
    const NormalSystem sys(m, {1, 1, 1000}, rest_handles(m, {0, 1, 5}));
    const std::vector<Match> rest(m.cell_count(), Match{0, 0.0, 0.0});
    const Positions v = solve_step(sys, shared_db(), rest);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LT((v[i] - m.vertices[i]).norm(), 1e-9);
}

TEST(SolveStep, SelectionDominance) {
    const LinkageMesh m = build_mesh(DomainSpec::full(2, 2));
    std::vector<Handle> hs{{0, Vec2(-0.2, 0.1), 1.0}, {static_cast<VertexId>(m.vertex_count() - 1), Vec2(2.5, 2.2), 1.0}};
    const NormalSystem sys(m, {1e-6, 0, 1e6}, hs);
    const Positions v = sys.solve(rest_targets(m));
    for (const auto& h : hs) EXPECT_LT((v[h.vertex] - h.target).norm(), 1e-6);
}

TEST(SolveStep, MatchesDenseOracleOnSmallMeshes) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(0, 1);
    const ConfigDatabase& db = shared_db();
    for (int trial = 0; trial < 25; ++trial) {
        const int rows = 1 + trial % 3, cols = 1 + (trial / 3) % 3;
        const LinkageMesh m = build_mesh(DomainSpec::full(rows, cols));
        SolverWeights w{std::pow(10.0, -1 + 2 * U(rng)), std::pow(10.0, -1 + 2 * U(rng)), std::pow(10.0, 3 * U(rng))};
        std::vector<Handle> hs;
        const int nh = 1 + static_cast<int>(U(rng) * 4);
        for (int k = 0; k < nh; ++k) {
            const auto v = static_cast<VertexId>(U(rng) * m.vertex_count());
            hs.push_back({v, m.vertices[v] + Vec2(U(rng) - 0.5, U(rng) - 0.5), 0.5 + U(rng)});
        }
        std::vector<Match> as(m.cell_count());
        for (auto& a : as) a = {static_cast<RecordId>(U(rng) * db.size()), 2 * kPi * U(rng), 0};
        const NormalSystem sys(m, w, hs);
        const Positions got = solve_step(sys, db, as);
        std::vector<Octagon> targets;
        for (const auto& a : as) targets.push_back(aligned_record(db, a));
        const auto want = oracles::dense_solve(m, w, hs, targets);
        EXPECT_LT(oracles::max_relative_gap(got, want), 1e-8) << "trial " << trial;
    }
}

TEST(SolveStep, RefactorizationMatchesFreshSystem) {
    const LinkageMesh m = build_mesh(DomainSpec::full(3, 3));
    NormalSystem sys(m, {1, 1, 100}, rest_handles(m, {0}));
    std::vector<Handle> moved{{0, Vec2(0.1, 0), 1.0}, {20, m.vertices[20] + Vec2(0, 0.3), 2.0}};
    sys.set_handles(moved);
    const NormalSystem fresh(m, {1, 1, 100}, moved);
    const Positions a = sys.solve(rest_targets(m)), b = fresh.solve(rest_targets(m));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT((a[i] - b[i]).norm(), 1e-12);
}

TEST(Energy, MatchesDirectEvaluation) {
    const LinkageMesh m = build_mesh(DomainSpec::full(2, 1));
    std::vector<Handle> hs{{0, Vec2(0.05, -0.02), 1.0}, {5, Vec2(0.9, 0.1), 3.0}};
    const SolverWeights w{0.5, 2, 10};
    const NormalSystem sys(m, w, hs);
    Positions v = m.vertices;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N(0, 0.05);
    for (auto& p : v) p += Vec2(N(rng), N(rng));
    const auto targets = rest_targets(m);
    const EnergyTerms e = sys.energy(v, targets);
    const Eigen::MatrixXd L = dense(assemble_laplacian(m));
    Eigen::VectorXd ux(v.size()), uy(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        ux[static_cast<Eigen::Index>(i)] = v[i].x() - m.vertices[i].x();
        uy[static_cast<Eigen::Index>(i)] = v[i].y() - m.vertices[i].y();
    }
    EXPECT_NEAR(e.laplacian, (L * ux).squaredNorm() + (L * uy).squaredNorm(), 1e-14);
    double t = 0;
    for (const auto& h : hs) t += h.weight * (v[h.vertex] - h.target).squaredNorm();
    EXPECT_NEAR(e.target, t, 1e-14);
    EXPECT_NEAR(e.total, w.w_L * e.laplacian + w.w_S * e.consistency + w.w_t * e.target, 1e-12);
    // The solve minimizes the energy for fixed targets.
    const Positions vs = sys.solve(targets);
    EXPECT_LE(sys.energy(vs, targets).total, e.total);
}

TEST(ConlmeSolve, ZeroDisplacementReturnsRest) {
    const ResolvedTask task = resolve(rest_task(4, 3));
    const ConlmeState st = conlme_solve(task.mesh, task_handles(task.mesh, task.domain), {}, shared_db());
    EXPECT_TRUE(st.converged);
    EXPECT_LE(st.iteration, 2);
    for (std::size_t i = 0; i < st.positions.size(); ++i) EXPECT_LT((st.positions[i] - task.mesh.vertices[i]).norm(), 1e-9);
    EXPECT_LT(st.max_dissimilarity(), 1e-9);
}

TEST(ConlmeSolve, SingleHandleOn3x3) {
    const LinkageMesh m = build_mesh(DomainSpec::full(3, 3));
    std::vector<Handle> hs;
    for (int b = 0; b <= 6; ++b) hs.push_back({*m.vertex_at(0, b), m.vertices[*m.vertex_at(0, b)], 1.0});
    const VertexId tip = *m.vertex_at(6, 0);
    hs.push_back({tip, m.vertices[tip] + Vec2(0, -0.1), 1.0});
    const SolverWeights w{1, 1, 1000};
    ConlmeSolver solver(m, w, hs, shared_db());
    const ConlmeState st = solver.run();
    EXPECT_TRUE(st.converged);
    EXPECT_LE(handle_mae({hs.back()}, st.positions), 0.02);
    EXPECT_LE(max_energy_increase(st), 1e-9);
    // The last linear solve agrees with the dense oracle for the final assignments.
    std::vector<Octagon> targets;
    for (const auto& a : st.assignments) targets.push_back(aligned_record(shared_db(), a));
    const auto oracle = oracles::dense_solve(m, w, hs, targets);
    EXPECT_LT(oracles::max_relative_gap(solve_step(solver.system(), shared_db(), st.assignments), oracle), 1e-8);
}

TEST(ConlmeSolve, EnergyNonIncreasingOnSinusoid) {
    const ResolvedTask task = resolve(sinusoid_task(6, 3, 0.5));
    const ConlmeState st = conlme_solve(task.mesh, task_handles(task.mesh, task.domain), {}, shared_db());
    ASSERT_GE(st.log.size(), 2u);
    for (std::size_t k = 1; k < st.log.size(); ++k)
        EXPECT_LE(st.log[k].energy.total - st.log[k - 1].energy.total, 1e-9) << "iteration " << st.log[k].iteration;
    EXPECT_EQ(st.assignments.size(), task.mesh.cell_count());
    EXPECT_EQ(st.edge_deviation.size(), task.mesh.edges.size());
}

TEST(ConlmeSolve, TranslationEquivariant) {
    const ResolvedTask task = resolve(sinusoid_task(4, 2, 0.3));
    auto hs = task_handles(task.mesh, task.domain);
    const ConlmeState a = conlme_solve(task.mesh, hs, {}, shared_db());
    const Vec2 d(0.37, -0.21);
    for (auto& h : hs) h.target += d;
    const ConlmeState b = conlme_solve(task.mesh, hs, {}, shared_db());
    ASSERT_EQ(a.iteration, b.iteration);
    for (std::size_t i = 0; i < a.positions.size(); ++i) EXPECT_LT((b.positions[i] - a.positions[i] - d).norm(), 1e-8);
}

TEST(ConlmeSolve, FixedIterationMode) {
    const ResolvedTask task = resolve(sinusoid_task(4, 2, 0.5));
    ConlmeOptions o;
    o.max_iter = 3;
    o.fixed_iterations = true;
    const ConlmeState st = conlme_solve(task.mesh, task_handles(task.mesh, task.domain), {}, shared_db(), o);
    EXPECT_EQ(st.iteration, 3);
    EXPECT_EQ(st.log.size(), 3u);
}

TEST(AutoWeight, InfiniteThresholdKeepsInitialWeights) {
    const ResolvedTask task = resolve(sinusoid_task(4, 2, 0.5));
    const SolverWeights init{2, 0.5, 500};
    const auto r = auto_weight_ws(task.mesh, task_handles(task.mesh, task.domain), init, shared_db(),
                                  std::numeric_limits<double>::infinity());
    EXPECT_TRUE(r.met);
    EXPECT_EQ(r.weights.w_S, init.w_S);
    EXPECT_EQ(r.weights.w_L, init.w_L);
    EXPECT_EQ(r.weights.w_t, init.w_t);
    EXPECT_EQ(r.trials.size(), 1u);
    EXPECT_THROW(auto_weight_ws(task.mesh, task_handles(task.mesh, task.domain), init, shared_db(), 0.0), ValidationError);
}

TEST(AutoWeight, RestTaskPassesAtInitialWeight) {
    const ResolvedTask task = resolve(rest_task(3, 2));
    const auto r = auto_weight_ws(task.mesh, task_handles(task.mesh, task.domain), {}, shared_db(), 0.02);
    EXPECT_TRUE(r.met);
    EXPECT_EQ(r.weights.w_S, 1.0);
    EXPECT_LT(r.max_dissimilarity, 1e-9);
}

TEST(AutoWeight, SinusoidTerminatesAndReports) {
    const ResolvedTask task = resolve(sinusoid_task(10, 5, 0.5));
    const auto r = auto_weight_ws(task.mesh, task_handles(task.mesh, task.domain), {}, shared_db(), 0.02);
    EXPECT_LE(r.trials.size(), 13u);
    EXPECT_TRUE(std::isfinite(r.max_dissimilarity));
    EXPECT_EQ(r.max_dissimilarity, r.state.max_dissimilarity());
    if (r.met) {
        EXPECT_LE(r.max_dissimilarity, 0.02);
    }
    for (std::size_t k = 1; k < r.trials.size(); ++k) EXPECT_DOUBLE_EQ(r.trials[k].first, 2 * r.trials[k - 1].first);
}
