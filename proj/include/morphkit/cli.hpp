#pragma once

// morphkit command line: gen-dataset, design, evaluate, bench, render.
//
// Exit codes: 0 success, 2 usage, 3 invalid input, 4 numerical failure (non-converged or
// infeasible stage; diagnostic files are still written).
//
// Solution bundle written by `design`:
//   task.json               canonical copy of the task
//   macro_mesh.csv          ConLME solution (VERTICES/EDGES/CELLS)
//   macro_assignments.csv   cell,record,rotation,dissimilarity
//   iterations.csv          ConLME iteration log
//   conditions.csv          cell,th1..th8 target angles of the macro solution
//   designs.csv             cell,r1..r8,h1..h8,b1..b8 (AS output, or supplied for external-designs)
//   as_assignments.csv      AS only: order,cell,record,rotation,dissimilarity,iterations
//   as_mesh.csv             AS only: mesh after the last AS re-solve
//   run_log.json            stage results (deterministic)
//   timings.json            per-stage wall times (the only non-deterministic file)

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "morphkit/bench.hpp"
#include "morphkit/configdb.hpp"
#include "morphkit/conlme.hpp"
#include "morphkit/evaluation.hpp"
#include "morphkit/microscale.hpp"
#include "morphkit/render.hpp"
#include "morphkit/tasks.hpp"

namespace morphkit::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumerical = 4;

class UsageError : public Error {
public:
    using Error::Error;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + p.string());
    return in;
}

inline void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    body(out);
    if (!out) throw ValidationError("error writing " + p.string());
}

inline std::string json_text(const ojson& j) { return j.dump(2) + "\n"; }

inline ojson optional_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

inline ConfigDatabase load_dataset(const fs::path& p, const TaskFile* task) {
    DatasetLoadOptions opt;
    if (task) {
        opt.edge_length = task->edge_length;
        opt.material = task->material;
    }
    auto in = open_in(p);
    return read_dataset(in, opt);
}

class Stopwatch {
public:
    double lap_ms() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// gen-dataset

inline int cmd_gen_dataset(std::size_t n, std::uint64_t seed, const fs::path& out_path, std::ostream& out) {
    if (n == 0) throw UsageError("--n must be at least 1");
    DatasetStats stats;
    const ConfigDatabase db = generate_dataset(n, seed, MaterialParams{}, {}, &stats);
    write_file(out_path, [&](std::ostream& os) { write_dataset(os, db); });
    const DatasetStats env = angle_envelope(db);
    double lo = 0, hi = 0;
    for (int j = 0; j < kCellVertices; ++j) {
        lo = std::min(lo, env.min_deviation[j]);
        hi = std::max(hi, env.max_deviation[j]);
    }
    out << "wrote " << db.size() << " records to " << out_path.string() << "\n";
    out << "discarded " << stats.discarded << " of " << stats.attempts << " draws (" << fmt_double(100 * stats.discard_rate())
        << "%)\n";
    out << "angle deviation from rest: [" << fmt_double(lo) << ", " << fmt_double(hi) << "] rad\n";
    return kExitOk;
}

// design

inline void write_assignments_csv(std::ostream& os, std::span<const Match> a) {
    os << "cell,record,rotation,dissimilarity\n";
    for (std::size_t c = 0; c < a.size(); ++c)
        os << c << ',' << a[c].record << ',' << fmt_double(a[c].rotation) << ',' << fmt_double(a[c].dissimilarity) << '\n';
}

inline void write_iterations_csv(std::ostream& os, const ConlmeState& st) {
    os << "iteration,E_L,E_S,E_t,total,max_displacement\n";
    for (const auto& r : st.log)
        os << r.iteration << ',' << fmt_double(r.energy.laplacian) << ',' << fmt_double(r.energy.consistency) << ','
           << fmt_double(r.energy.target) << ',' << fmt_double(r.energy.total) << ',' << fmt_double(r.max_displacement)
           << '\n';
}

inline double handle_mae(const LinkageMesh& mesh, const DomainSpec& d, std::span<const Vec2> v) {
    if (d.handles.empty()) return 0.0;
    std::vector<Vec2> td, ad;
    for (const auto& h : d.handles) {
        td.push_back(h.target - mesh.vertices[h.vertex]);
        ad.push_back(v[h.vertex] - mesh.vertices[h.vertex]);
    }
    return mae_mre(td, ad).mae;
}

inline int cmd_design(const fs::path& task_path, const fs::path& dataset_path, const fs::path& out_dir, std::ostream& out) {
    const TaskFile tf = parse_task(read_file(task_path));
    const ResolvedTask task = resolve(tf);
    const ConfigDatabase db = load_dataset(dataset_path, &tf);
    fs::create_directories(out_dir);
    Stopwatch sw;
    ojson timings;
    ojson log;
    log["task"] = tf.name;
    log["method"] = tf.microscale_method == MicroscaleMethod::adjustable_search ? "as" : "external-designs";
    log["dataset_records"] = db.size();
    log["cells"] = task.mesh.cell_count();
    log["vertices"] = task.mesh.vertex_count();
    timings["load"] = sw.lap_ms();
    write_file(out_dir / "task.json", [&](std::ostream& os) { os << json_text(task_json(tf)); });

    const auto handles = task_handles(task.mesh, task.domain);
    bool ok = true;
    const AutoWeightResult aw = auto_weight_ws(task.mesh, handles, tf.weights, db, tf.dissim_threshold);
    timings["auto_weight_conlme"] = sw.lap_ms();
    const ConlmeState& macro = aw.state;
    {
        ojson a;
        a["threshold"] = tf.dissim_threshold;
        a["met"] = aw.met;
        a["weights"] = {{"w_L", aw.weights.w_L}, {"w_S", aw.weights.w_S}, {"w_t", aw.weights.w_t}};
        auto trials = ojson::array();
        for (const auto& [ws, d] : aw.trials) trials.push_back({{"w_S", ws}, {"max_dissimilarity", d}});
        a["trials"] = trials;
        log["auto_weight"] = a;
        ojson m;
        m["iterations"] = macro.iteration;
        m["converged"] = macro.converged;
        m["max_dissimilarity"] = macro.max_dissimilarity();
        m["max_edge_deviation"] = macro.edge_deviation.empty()
                                      ? 0.0
                                      : *std::max_element(macro.edge_deviation.begin(), macro.edge_deviation.end());
        m["max_energy_increase"] = max_energy_increase(macro);
        m["handle_mae"] = handle_mae(task.mesh, task.domain, macro.positions);
        log["conlme"] = m;
    }
    if (!aw.met) {
        ok = false;
        out << "warning: max dissimilarity " << fmt_double(aw.max_dissimilarity) << " mm above threshold "
            << fmt_double(tf.dissim_threshold) << " mm after 12 doublings of w_S\n";
    }
    if (!macro.converged) {
        ok = false;
        out << "warning: ConLME did not converge in " << macro.iteration << " iterations\n";
    }
    write_file(out_dir / "macro_mesh.csv", [&](std::ostream& os) { write_mesh_csv(os, task.mesh, macro.positions); });
    write_file(out_dir / "macro_assignments.csv", [&](std::ostream& os) { write_assignments_csv(os, macro.assignments); });
    write_file(out_dir / "iterations.csv", [&](std::ostream& os) { write_iterations_csv(os, macro); });
    const auto conditions = emit_conditions(task.mesh, macro.positions);
    write_file(out_dir / "conditions.csv", [&](std::ostream& os) { write_conditions(os, conditions); });
    timings["write_macro"] = sw.lap_ms();

    std::string status;
    if (tf.microscale_method == MicroscaleMethod::adjustable_search) {
        AsResult as;
        try {
            as = as_design(task.mesh, macro, handles, aw.weights, db);
        } catch (const AsAborted& e) {
            write_file(out_dir / "designs_partial.csv", [&](std::ostream& os) { write_designs(os, design_rows(e.partial())); });
            log["status"] = "as-aborted";
            log["error"] = e.what();
            write_file(out_dir / "run_log.json", [&](std::ostream& os) { os << json_text(log); });
            throw;
        }
        timings["adjustable_search"] = sw.lap_ms();
        write_file(out_dir / "designs.csv", [&](std::ostream& os) { write_designs(os, design_rows(as.assignments)); });
        write_file(out_dir / "as_assignments.csv", [&](std::ostream& os) {
            os << "order,cell,record,rotation,dissimilarity,iterations\n";
            for (std::size_t k = 0; k < as.steps.size(); ++k) {
                const auto& s = as.steps[k];
                os << k << ',' << s.cell << ',' << s.record << ',' << fmt_double(as.assignments[s.cell].rotation) << ','
                   << fmt_double(s.dissimilarity) << ',' << s.iterations << '\n';
            }
        });
        write_file(out_dir / "as_mesh.csv", [&](std::ostream& os) { write_mesh_csv(os, task.mesh, as.final_state.positions); });
        double worst_increase = max_energy_increase(as.final_state), pin_err = 0;
        for (const auto& s : as.steps) worst_increase = std::max(worst_increase, s.max_energy_increase);
        for (std::size_t k = handles.size(); k < as.pins.size(); ++k)
            pin_err = std::max(pin_err, (as.final_state.positions[as.pins[k].vertex] - as.pins[k].target).norm());
        ojson a;
        a["steps"] = as.steps.size();
        a["final_iterations"] = as.final_state.iteration;
        a["converged"] = as.final_state.converged;
        a["max_energy_increase"] = worst_increase;
        a["max_pin_error"] = pin_err;
        a["handle_mae"] = handle_mae(task.mesh, task.domain, as.final_state.positions);
        log["as"] = a;
        if (!as.final_state.converged) {
            ok = false;
            out << "warning: final AS re-solve did not converge\n";
        }
        status = ok ? "complete" : "not-converged";
    } else {
        const fs::path supplied = out_dir / "designs.csv";
        if (!fs::exists(supplied)) {
            status = "awaiting-designs";
            out << "wrote " << (out_dir / "conditions.csv").string() << " (" << conditions.size() << " cells)\n"
                << "next: generate designs for these conditions, save them as " << supplied.string()
                << " (header " << join(designs_header()) << "), then re-run design or run evaluate\n";
        } else {
            auto in = open_in(supplied);
            const auto designs = read_designs(in);
            const ImportResult imp = import_designs(conditions, designs, tf.material, tf.edge_length);
            timings["import_designs"] = sw.lap_ms();
            ojson a;
            a["cells"] = imp.assignments.size();
            auto flagged = ojson::array();
            for (auto c : imp.flagged) flagged.push_back(c);
            a["flagged_cells"] = flagged;
            log["import"] = a;
            status = ok ? "complete" : "not-converged";
        }
    }
    log["status"] = status;
    write_file(out_dir / "run_log.json", [&](std::ostream& os) { os << json_text(log); });
    write_file(out_dir / "timings.json", [&](std::ostream& os) { os << json_text(timings); });
    out << "design " << status << ": " << task.mesh.cell_count() << " cells, w_S = " << fmt_double(aw.weights.w_S)
        << ", max dissimilarity " << fmt_double(macro.max_dissimilarity()) << " mm -> " << out_dir.string() << "\n";
    return ok ? kExitOk : kExitNumerical;
}

// evaluate

struct Bundle {
    TaskFile file;
    ResolvedTask task;
    std::vector<Vec2> macro_positions;
    std::vector<ConditionRow> conditions;
    std::vector<DesignRow> designs;
};

inline void require_files(const fs::path& dir, std::initializer_list<const char*> names) {
    std::string missing;
    for (const char* n : names)
        if (!fs::exists(dir / n)) missing += std::string(missing.empty() ? "" : ", ") + n;
    if (!missing.empty()) throw ValidationError("solution bundle " + dir.string() + " is missing: " + missing);
}

inline Bundle load_bundle(const fs::path& dir, bool need_designs) {
    if (need_designs)
        require_files(dir, {"task.json", "macro_mesh.csv", "conditions.csv", "designs.csv"});
    else
        require_files(dir, {"task.json", "macro_mesh.csv"});
    Bundle b;
    b.file = parse_task(read_file(dir / "task.json"));
    b.task = resolve(b.file);
    {
        auto in = open_in(dir / "macro_mesh.csv");
        b.macro_positions = read_positions(in, b.task.mesh);
    }
    if (need_designs) {
        auto c = open_in(dir / "conditions.csv");
        b.conditions = read_conditions(c);
        auto d = open_in(dir / "designs.csv");
        b.designs = read_designs(d);
    }
    return b;
}

inline ojson r2_json(const R2Result& r) {
    ojson j;
    j["value"] = optional_json(r.value);
    auto dims = ojson::array();
    for (const auto& d : r.per_dim) dims.push_back(optional_json(d));
    j["per_dimension"] = dims;
    j["degenerate_dimensions"] = r.degenerate;
    return j;
}

inline int cmd_evaluate(const fs::path& dir, const fs::path& dataset_path, std::ostream& out) {
    const Bundle b = load_bundle(dir, true);
    const ConfigDatabase db = load_dataset(dataset_path, &b.file);
    const ImportResult imp = import_designs(b.conditions, b.designs, b.file.material, b.file.edge_length);
    const EvaluationReport rep =
        evaluate_design(b.task.mesh, b.task.domain, imp.assignments, b.macro_positions, &db);
    const auto& mesh = b.task.mesh;

    ojson j;
    j["task"] = b.file.name;
    j["cells"] = mesh.cell_count();
    j["handles"] = rep.handle_count;
    j["mae_mm"] = rep.handle_error.mae;
    j["mre"] = optional_json(rep.handle_error.mre);
    j["L_c_mm"] = rep.handle_error.L_c;
    j["r2_macro"] = r2_json(rep.r2_macro);
    j["r2_micro"] = r2_json(rep.r2_micro);
    j["reconstruction"] = {{"iterations", rep.reconstruction.iterations},
                           {"converged", rep.reconstruction.converged},
                           {"shape_residual_mm2", rep.reconstruction.shape_residual},
                           {"pin_residual_mm2", rep.reconstruction.pin_residual}};
    j["macro"] = {{"max_dissimilarity_mm", rep.macro.max_dissimilarity()},
                  {"max_edge_deviation_mm", rep.macro.max_edge_deviation()},
                  {"total_area_change", rep.macro.total_area_change}};
    j["assembled"] = {{"max_edge_deviation_mm", rep.assembled.max_edge_deviation()},
                      {"total_area_change", rep.assembled.total_area_change}};
    auto flagged = ojson::array();
    for (auto c : imp.flagged) flagged.push_back(c);
    j["flagged_cells"] = flagged;
    write_file(dir / "report.json", [&](std::ostream& os) { os << json_text(j); });
    write_file(dir / "cells.csv", [&](std::ostream& os) {
        os << "cell,dissimilarity,area_change_macro,area_change_assembled,design_dissimilarity\n";
        for (std::size_t c = 0; c < mesh.cell_count(); ++c)
            os << c << ',' << fmt_double(rep.macro.dissimilarity[c]) << ',' << fmt_double(rep.macro.area_change[c]) << ','
               << fmt_double(rep.assembled.area_change[c]) << ',' << fmt_double(imp.assignments[c].dissimilarity) << '\n';
    });
    write_file(dir / "edges.csv", [&](std::ostream& os) {
        os << "edge,v0,v1,deviation_macro,deviation_assembled\n";
        for (std::size_t e = 0; e < mesh.edges.size(); ++e)
            os << e << ',' << mesh.edges[e].v0 << ',' << mesh.edges[e].v1 << ',' << fmt_double(rep.macro.edge_deviation[e])
               << ',' << fmt_double(rep.assembled.edge_deviation[e]) << '\n';
    });
    write_file(dir / "evaluated_mesh.csv",
               [&](std::ostream& os) { write_mesh_csv(os, mesh, rep.reconstruction.positions); });
    RenderInput ri;
    ri.mesh = mesh_table(mesh, rep.reconstruction.positions);
    ri.cell_values = imp.assignments.empty() ? std::vector<double>{} : std::vector<double>(mesh.cell_count());
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) ri.cell_values[c] = imp.assignments[c].dissimilarity;
    ri.value_label = "design dissimilarity (mm)";
    for (const auto& h : b.task.domain.handles) ri.markers.push_back({h.target, rep.reconstruction.positions[h.vertex]});
    write_file(dir / "evaluation.svg", [&](std::ostream& os) { render_svg(os, ri); });

    out << "MAE " << fmt_double(rep.handle_error.mae) << " mm, L_c " << fmt_double(rep.handle_error.L_c) << " mm, MRE "
        << (rep.handle_error.mre ? fmt_double(100 * *rep.handle_error.mre) + "%" : std::string("n/a")) << "\n";
    out << "R2_macro " << (rep.r2_macro.value ? fmt_double(*rep.r2_macro.value) : std::string("n/a")) << " ("
        << rep.r2_macro.degenerate << " degenerate dims), R2_micro "
        << (rep.r2_micro.value ? fmt_double(*rep.r2_micro.value) : std::string("n/a")) << " (" << rep.r2_micro.degenerate
        << " degenerate dims)\n";
    out << "total area change " << fmt_double(100 * rep.macro.total_area_change) << "% (macro), "
        << fmt_double(100 * rep.assembled.total_area_change) << "% (assembled)\n";
    return rep.reconstruction.converged ? kExitOk : kExitNumerical;
}

// bench

inline int cmd_bench(const std::string& grids_text, const std::string& amps_text, const fs::path& out_path, std::ostream& out) {
    std::vector<GridSize> grids;
    std::vector<double> amps;
    try {
        grids = parse_grids(grids_text);
        amps = parse_list(amps_text);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
    for (std::size_t k = 1; k < grids.size(); ++k)
        if (grids[k].cols * grids[k].rows < grids[k - 1].cols * grids[k - 1].rows)
            throw UsageError("--grids must be in ascending order of cell count");
    const MaterialParams mat;
    const ConfigDatabase db = generate_dataset(20000, 1, mat, {});
    const auto rows = run_bench(grids, amps, db, mat);
    write_file(out_path, [&](std::ostream& os) { write_bench_csv(os, rows); });
    for (const char* stage : {"conlme", "as", "emit_retrieve"}) {
        const auto fit = stage_slope(rows, stage);
        if (fit)
            out << stage << ": log-log slope " << fmt_double(fit->slope) << " (R2 " << fmt_double(fit->r2) << ", "
                << fit->points << " points)\n";
        else
            out << stage << ": slope fitting skipped (needs at least two grid sizes)\n";
    }
    return kExitOk;
}

// render

inline int cmd_render(const std::string& mesh_path, const std::string& solution_dir, const std::string& color,
                      const fs::path& out_path, std::ostream& out) {
    if (mesh_path.empty() == solution_dir.empty()) throw UsageError("give exactly one of --mesh or --solution");
    if (color != "none" && color != "dissimilarity" && color != "edge" && color != "area")
        throw UsageError("--color must be none, dissimilarity, edge or area");
    RenderInput ri;
    std::vector<double> dissim;
    if (!mesh_path.empty()) {
        auto in = open_in(mesh_path);
        ri.mesh = read_mesh_csv(in);
        if (color == "dissimilarity") throw UsageError("dissimilarity coloring needs --solution");
    } else {
        const Bundle b = load_bundle(solution_dir, false);
        ri.mesh = mesh_table(b.task.mesh, b.macro_positions);
        for (const auto& h : b.task.domain.handles) ri.markers.push_back({h.target, b.macro_positions[h.vertex]});
        if (color == "dissimilarity") {
            const fs::path p = fs::path(solution_dir) / "macro_assignments.csv";
            auto in = open_in(p);
            const CsvTable t = read_csv(in, {"cell", "record", "rotation", "dissimilarity"});
            if (t.rows.size() != b.task.mesh.cell_count()) throw ValidationError("macro_assignments.csv has the wrong row count");
            for (std::size_t i = 0; i < t.rows.size(); ++i) dissim.push_back(parse_double(t.rows[i][3], t.line_numbers[i]));
        }
    }
    const MeshTable& m = ri.mesh;
    if (color == "dissimilarity") {
        ri.cell_values = dissim;
        ri.value_label = "dissimilarity (mm)";
    } else if (color == "edge") {
        // Cell value: largest deviation among the bars of the cell.
        std::map<std::pair<VertexId, VertexId>, double> dev;
        for (std::size_t e = 0; e < m.edges.size(); ++e) {
            const auto [a, bv] = m.edges[e];
            const double d = std::abs((m.positions[bv] - m.positions[a]).norm() - m.rest_lengths[e]);
            dev[{std::min(a, bv), std::max(a, bv)}] = d;
        }
        for (const auto& c : m.cells) {
            double worst = 0;
            for (int j = 0; j < kCellVertices; ++j) {
                const VertexId a = c[j], bv = c[(j + 1) % kCellVertices];
                auto it = dev.find({std::min(a, bv), std::max(a, bv)});
                if (it != dev.end()) worst = std::max(worst, it->second);
            }
            ri.cell_values.push_back(worst);
        }
        ri.value_label = "max edge length deviation (mm)";
    } else if (color == "area") {
        // Rest cell: square of side 2 * (mean bar length), midpoints on the sides.
        std::map<std::pair<VertexId, VertexId>, double> rest;
        for (std::size_t e = 0; e < m.edges.size(); ++e)
            rest[{std::min(m.edges[e][0], m.edges[e][1]), std::max(m.edges[e][0], m.edges[e][1])}] = m.rest_lengths[e];
        for (const auto& c : m.cells) {
            double len = 0;
            Octagon p;
            for (int j = 0; j < kCellVertices; ++j) {
                const VertexId a = c[j], bv = c[(j + 1) % kCellVertices];
                len += rest[{std::min(a, bv), std::max(a, bv)}] / kCellVertices;
                p[j] = m.positions[a];
            }
            ri.cell_values.push_back(cell_area(p) - 4 * len * len);
        }
        ri.value_label = "area change (mm^2)";
    }
    write_file(out_path, [&](std::ostream& os) { render_svg(os, ri); });
    out << "wrote " << out_path.string() << " (" << m.cells.size() << " cells)\n";
    return kExitOk;
}

/// Parses argv and dispatches; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"morphkit: two-scale design of shape-morphing metamaterials"};
    app.require_subcommand(1);

    std::size_t n = 0;
    std::uint64_t seed = 1;
    std::string out_file, task_file, dataset_file, out_dir, solution_dir, grids, amplitudes = "0.5", mesh_file,
                                                                                   color;

    auto* gen = app.add_subcommand("gen-dataset", "sample designs and write the configuration dataset CSV");
    gen->add_option("--n", n, "number of records")->required();
    gen->add_option("--seed", seed, "sampling seed");
    gen->add_option("--out", out_file, "output CSV")->required();

    auto* design = app.add_subcommand("design", "solve a task and write a solution bundle");
    design->add_option("--task", task_file, "task JSON")->required();
    design->add_option("--dataset", dataset_file, "dataset CSV")->required();
    design->add_option("--out-dir", out_dir, "bundle directory")->required();

    auto* evaluate = app.add_subcommand("evaluate", "verify a solution bundle and write the report");
    evaluate->add_option("--solution-dir", solution_dir, "bundle directory")->required();
    evaluate->add_option("--dataset", dataset_file, "dataset CSV")->required();

    auto* bench = app.add_subcommand("bench", "time the sinusoid cantilever family across grid sizes");
    bench->add_option("--grids", grids, "ascending COLSxROWS list, e.g. 10x5,20x10,40x20")->required();
    bench->add_option("--amplitudes", amplitudes, "amplitude ratios, e.g. 0.25,0.5");
    bench->add_option("--out", out_file, "output CSV")->required();

    auto* render = app.add_subcommand("render", "write an SVG of a mesh or solution");
    render->add_option("--mesh", mesh_file, "mesh CSV");
    render->add_option("--solution", solution_dir, "bundle directory");
    render->add_option("--color", color, "none | dissimilarity | edge | area");
    render->add_option("--out", out_file, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen_dataset(n, seed, out_file, out);
        if (design->parsed()) return cmd_design(task_file, dataset_file, out_dir, out);
        if (evaluate->parsed()) return cmd_evaluate(solution_dir, dataset_file, out);
        if (bench->parsed()) return cmd_bench(grids, amplitudes, out_file, out);
        if (render->parsed()) {
            if (color.empty()) color = solution_dir.empty() ? "none" : "dissimilarity";
            return cmd_render(mesh_file, solution_dir, color, out_file, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitUsage;
}

}  // namespace morphkit::cli
