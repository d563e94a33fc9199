#pragma once

// Scaling benchmarks on the sinusoid cantilever family.
//
// Stages per (grid, amplitude):
//   conlme         assemble + factorize + a fixed number of alternation iterations
//   as             adjustable search on a converged macroscale solution
//   emit_retrieve  condition emission + per-cell database retrieval + design import

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "morphkit/microscale.hpp"
#include "morphkit/tasks.hpp"

namespace morphkit {

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    std::size_t points = 0;
};

/// Least-squares line through (log x, log y). Absent with fewer than two distinct x.
inline std::optional<SlopeFit> loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ValidationError("slope fit: x and y lengths differ");
    std::set<double> distinct;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw ValidationError("slope fit needs positive values");
        distinct.insert(x[i]);
    }
    if (distinct.size() < 2) return std::nullopt;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.points = x.size();
    return f;
}

struct GridSize {
    int cols = 0;
    int rows = 0;
};

/// "10x5,20x10" -> {{10, 5}, {20, 10}}.
inline std::vector<GridSize> parse_grids(const std::string& text) {
    std::vector<GridSize> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t x = item.find('x');
        if (x == std::string::npos) throw ValidationError("grid '" + item + "' must look like COLSxROWS");
        GridSize g;
        try {
            std::size_t used = 0;
            g.cols = std::stoi(item.substr(0, x), &used);
            if (used != x) throw std::invalid_argument("cols");
            const std::string r = item.substr(x + 1);
            g.rows = std::stoi(r, &used);
            if (used != r.size()) throw std::invalid_argument("rows");
        } catch (const std::exception&) {
            throw ValidationError("grid '" + item + "' must look like COLSxROWS");
        }
        if (g.cols <= 0 || g.rows <= 0) throw ValidationError("grid sizes must be positive");
        out.push_back(g);
        pos = comma + 1;
    }
    return out;
}

inline std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        out.push_back(parse_double(text.substr(pos, comma - pos), 0));
        pos = comma + 1;
    }
    return out;
}

struct BenchRow {
    GridSize grid;
    std::size_t cells = 0;
    double amplitude = 0;
    std::string stage;
    double wall_ms = 0;
};

struct BenchOptions {
    int conlme_iters = 10;
    bool conlme = true;
    bool adjustable_search = true;
    bool emit_retrieve = true;
    AsOptions as;
};

namespace detail {
template <typename F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace detail

inline std::vector<BenchRow> run_bench(std::span<const GridSize> grids, std::span<const double> amplitudes,
                                       const ConfigDatabase& db, const MaterialParams& mat, const BenchOptions& opt = {}) {
    std::vector<BenchRow> rows;
    for (const GridSize& g : grids)
        for (double amp : amplitudes) {
            const ResolvedTask task = resolve(sinusoid_task(g.cols, g.rows, amp));
            const auto handles = task_handles(task.mesh, task.domain);
            const std::size_t cells = task.mesh.cell_count();
            if (opt.conlme) {
                ConlmeOptions copt;
                copt.max_iter = opt.conlme_iters;
                copt.fixed_iterations = true;
                const double ms = detail::time_ms([&] {
                    ConlmeSolver solver(task.mesh, task.file.weights, handles, db, copt);
                    solver.run();
                });
                rows.push_back({g, cells, amp, "conlme", ms});
            }
            if (opt.adjustable_search || opt.emit_retrieve) {
                const ConlmeState macro = conlme_solve(task.mesh, handles, task.file.weights, db);
                if (opt.adjustable_search) {
                    const double ms =
                        detail::time_ms([&] { as_design(task.mesh, macro, handles, task.file.weights, db, opt.as); });
                    rows.push_back({g, cells, amp, "as", ms});
                }
                if (opt.emit_retrieve) {
                    const double ms = detail::time_ms([&] {
                        const auto cond = emit_conditions(task.mesh, macro.positions);
                        const auto designs = retrieve_designs(cond, db, task.mesh.edge_length);
                        import_designs(cond, designs, mat, task.mesh.edge_length);
                    });
                    rows.push_back({g, cells, amp, "emit_retrieve", ms});
                }
            }
        }
    return rows;
}

/// Slope of wall time vs cell count for one stage, pooled over amplitudes.
inline std::optional<SlopeFit> stage_slope(std::span<const BenchRow> rows, const std::string& stage) {
    std::vector<double> x, y;
    for (const auto& r : rows)
        if (r.stage == stage) {
            x.push_back(static_cast<double>(r.cells));
            y.push_back(std::max(r.wall_ms, 1e-6));
        }
    return loglog_slope(x, y);
}

inline void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
    os << "cols,rows,cells,amplitude,stage,wall_ms\n";
    for (const auto& r : rows)
        os << r.grid.cols << ',' << r.grid.rows << ',' << r.cells << ',' << fmt_double(r.amplitude) << ',' << r.stage << ','
           << fmt_double(r.wall_ms) << '\n';
}

}  // namespace morphkit
