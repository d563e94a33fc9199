// Acceptance suite: one PASS/FAIL line per criterion with the measured values.
//
// Exit status is 0 when the set of failing criteria equals the set given with --expect-fail,
// so a known shortfall stays visible without masking regressions elsewhere.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "morphkit/bench.hpp"
#include "morphkit/cli.hpp"
#include "morphkit/evaluation.hpp"
#include "oracles.hpp"

using namespace morphkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Scratch {
    fs::path root = fs::temp_directory_path() / ("morphkit_acceptance_" + std::to_string(::getpid()));
    Scratch(const Scratch&) = delete;
    Scratch& operator=(const Scratch&) = delete;
    Scratch() {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(root, ec);
    }
};

int run_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
    args.insert(args.begin(), "morphkit");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (err_text) *err_text = err.str();
    return code;
}

void write_task(const fs::path& p, const TaskFile& t) { std::ofstream(p) << task_json(t).dump(2) << '\n'; }

const ConfigDatabase& database() {
    static const ConfigDatabase db = generate_dataset(20000, 1, MaterialParams{});
    return db;
}

// Metric reproduction

Outcome metric_reproduction() {
    struct Row {
        const char* name;
        double mae, L_c, printed;
    };
    const Row rows[] = {
        {"airfoil tail drop", 0.4586, 9.27, 4.95},   {"octopus", 1.9326, 8.49, 22.75},
        {"airfoil shape change 1", 1.6168, 5.77, 27.56}, {"airfoil shape change 2", 1.8023, 12.42, 16.60},
        {"tweezers", 1.2728, 10.30, 12.36},          {"checkerboard beam", 0.3283, 10.30, 3.19},
    };
    const double tol_pp = 0.01, half_unit = 0.005;  // L_c is printed to two decimals
    bool formula_ok = true;
    std::vector<std::string> flagged;
    std::ostringstream os;
    double computed[6];
    for (int i = 0; i < 6; ++i) {
        const Row& r = rows[i];
        // Single handle whose achieved displacement falls short by MAE along the target direction.
        const std::vector<Vec2> td{{r.L_c, 0.0}}, ad{{r.L_c - r.mae, 0.0}};
        const HandleError e = mae_mre(td, ad);
        computed[i] = 100 * e.mre.value_or(NAN);
        formula_ok = formula_ok && std::abs(computed[i] - 100 * r.mae / r.L_c) < 1e-10 &&
                     std::abs(computed[i] - 100 * mre_from(r.mae, r.L_c)) < 1e-10;
        const double lo = 100 * r.mae / (r.L_c + half_unit) - tol_pp, hi = 100 * r.mae / (r.L_c - half_unit) + tol_pp;
        if (r.printed < lo || r.printed > hi) flagged.push_back(std::string(r.name) + " computed " + num(computed[i]) + "% vs printed " + num(r.printed) + "%");
    }
    const bool examples = std::abs(computed[0] - 4.95) <= tol_pp && std::abs(computed[2] - 28.02) <= tol_pp &&
                          100 * rows[1].mae / (rows[1].L_c + half_unit) - tol_pp <= 22.75;
    os << "MRE(%) " << num(computed[0]) << ", " << num(computed[1]) << ", " << num(computed[2]) << ", "
       << num(computed[3]) << ", " << num(computed[4]) << ", " << num(computed[5]) << "; flagged:";
    if (flagged.empty()) os << " none";
    for (const auto& f : flagged) os << " [" << f << "]";
    return {formula_ok && examples, os.str()};
}

// Oracle equivalence

Outcome oracle_equivalence() {
    const ConfigDatabase& db = database();
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> U(0, 1);
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = 1 + static_cast<int>(U(rng) * 3), cols = 1 + static_cast<int>(U(rng) * 3);
        const LinkageMesh m = build_mesh(DomainSpec::full(rows, cols));
        const SolverWeights w{std::pow(10.0, -2 + 3 * U(rng)), std::pow(10.0, -1 + 2 * U(rng)), std::pow(10.0, 4 * U(rng))};
        std::vector<Handle> hs;
        std::set<VertexId> used;
        const int nh = 1 + static_cast<int>(U(rng) * 6);
        for (int k = 0; k < nh; ++k) {
            const auto v = static_cast<VertexId>(U(rng) * m.vertex_count());
            if (!used.insert(v).second) continue;
            hs.push_back({v, m.vertices[v] + Vec2(U(rng) - 0.5, U(rng) - 0.5), 0.25 + 2 * U(rng)});
        }
        std::vector<Match> as(m.cell_count());
        for (auto& a : as) a = {static_cast<RecordId>(U(rng) * db.size()), 2 * kPi * U(rng), 0};
        const NormalSystem sys(m, w, hs);
        const Positions got = solve_step(sys, db, as);
        std::vector<Octagon> targets;
        for (const auto& a : as) targets.push_back(aligned_record(db, a));
        worst = std::max(worst, oracles::max_relative_gap(got, oracles::dense_solve(m, w, hs, targets)));
    }
    return {worst <= 1e-8, "50 cases, worst relative gap " + num(worst, 3) + " (limit 1e-8)"};
}

// Rotation-invariant retrieval

Outcome retrieval() {
    const ConfigDatabase& db = database();
    std::mt19937_64 rng(8080);
    std::uniform_int_distribution<RecordId> pick(0, static_cast<RecordId>(db.size()) - 1);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    const int n = 1000;
    int hits = 0;
    double worst = 0;
    for (int i = 0; i < n; ++i) {
        const RecordId id = pick(rng);
        CellConfig q = db.record(id).config;
        q.coords = rotated(q.coords, angle(rng));
        const Match m = nearest_config(db, q, 32);
        worst = std::max(worst, m.dissimilarity);
        if (m.record == id && m.dissimilarity < 1e-8) ++hits;
    }
    const double rate = static_cast<double>(hits) / n;
    return {rate >= 0.999, std::to_string(hits) + "/" + std::to_string(n) + " recovered, worst dissimilarity " + num(worst, 3) + " mm"};
}

// Surrogate validity

Outcome surrogate_validity() {
    const MaterialParams mat;
    const auto designs = sample_designs(10000, 424242);
    std::size_t discarded = 0, valid = 0;
    double worst_sum = 0, worst_closure = 0;
    for (const auto& x : designs) {
        CellConfig c;
        try {
            c = surrogate_forward(x, mat);
        } catch (const ClosureError&) {
            ++discarded;
            continue;
        }
        ++valid;
        worst_sum = std::max(worst_sum, std::abs(angle_sum(c.angles) - 6 * kPi));
        worst_closure = std::max(worst_closure, walk_octagon(c.angles, kDefaultEdgeLength).closure);
    }
    const double rate = static_cast<double>(discarded) / designs.size();
    std::ostringstream os;
    os << valid << " valid, discard rate " << num(100 * rate, 3) << "%, worst |sum - 6 pi| " << num(worst_sum, 3)
       << ", worst closure " << num(worst_closure, 3) << " mm";
    return {worst_sum <= 1e-8 && worst_closure <= 1e-8 && rate < 0.10, os.str()};
}

// Scaling

std::string describe(const std::vector<BenchRow>& rows, const std::string& stage) {
    std::ostringstream os;
    bool first = true;
    for (const auto& r : rows)
        if (r.stage == stage) {
            os << (first ? "" : ", ") << r.grid.cols << "x" << r.grid.rows << " " << num(r.wall_ms, 3) << " ms";
            first = false;
        }
    return os.str();
}

struct ScalingRuns {
    std::vector<BenchRow> conlme;
    std::vector<BenchRow> as;
};

const ScalingRuns& scaling_runs() {
    static const ScalingRuns runs = [] {
        ScalingRuns r;
        const std::vector<double> amps{0.5};
        BenchOptions c;
        c.adjustable_search = c.emit_retrieve = false;
        const std::vector<GridSize> cg{{10, 10}, {20, 20}, {40, 40}, {80, 80}, {100, 100}};
        r.conlme = run_bench(cg, amps, database(), MaterialParams{}, c);
        BenchOptions a;
        a.conlme = false;
        const std::vector<GridSize> ag{{5, 5}, {10, 10}, {20, 20}, {30, 30}, {40, 40}};
        r.as = run_bench(ag, amps, database(), MaterialParams{}, a);
        return r;
    }();
    return runs;
}

Outcome scaling_conlme() {
    const auto& rows = scaling_runs().conlme;
    const auto fit = stage_slope(rows, "conlme");
    if (!fit) return {false, "no slope fit"};
    return {fit->slope >= 0.8 && fit->slope <= 1.3,
            "slope " + num(fit->slope, 3) + " (R2 " + num(fit->r2, 3) + ", want [0.8, 1.3]); " + describe(rows, "conlme")};
}

Outcome scaling_as() {
    const auto& rows = scaling_runs().as;
    const auto fit = stage_slope(rows, "as");
    if (!fit) return {false, "no slope fit"};
    return {fit->slope >= 1.5, "slope " + num(fit->slope, 3) + " (R2 " + num(fit->r2, 3) + ", want >= 1.5); " + describe(rows, "as")};
}

Outcome scaling_crossover() {
    const auto& rows = scaling_runs().as;
    bool pass = true;
    int compared = 0;
    std::ostringstream os;
    for (const auto& a : rows) {
        if (a.stage != "as" || a.cells >= 100) continue;
        for (const auto& e : rows)
            if (e.stage == "emit_retrieve" && e.cells == a.cells && e.amplitude == a.amplitude) {
                ++compared;
                pass = pass && a.wall_ms < e.wall_ms;
                os << a.grid.cols << "x" << a.grid.rows << ": AS " << num(a.wall_ms, 3) << " ms vs emit+retrieve "
                   << num(e.wall_ms, 3) << " ms; ";
            }
    }
    os << "emit+retrieve by grid: " << describe(rows, "emit_retrieve");
    return {pass && compared > 0, os.str()};
}

// End-to-end runs through the command-line pipeline

struct DesignRun {
    int design_code = -1;
    int evaluate_code = -1;
    nlohmann::json log;
    nlohmann::json report;
    std::vector<double> trial_increases;  // re-run of every auto-weight trial
};

struct EndToEnd {
    Scratch scratch;
    fs::path dataset;
    DesignRun sinusoid;
    std::string error;
};

double json_number_or_zero(const nlohmann::json& j) { return j.is_number() ? j.get<double>() : 0.0; }

DesignRun design_and_evaluate(const TaskFile& t, const fs::path& dir, const fs::path& dataset) {
    DesignRun r;
    fs::create_directories(dir);
    write_task(dir / "task_in.json", t);
    const fs::path out = dir / "bundle";
    r.design_code = run_cli({"design", "--task", (dir / "task_in.json").string(), "--dataset", dataset.string(), "--out-dir", out.string()});
    if (fs::exists(out / "run_log.json")) r.log = nlohmann::json::parse(slurp(out / "run_log.json"));
    if (r.design_code != 0) return r;
    r.evaluate_code = run_cli({"evaluate", "--solution-dir", out.string(), "--dataset", dataset.string()});
    if (fs::exists(out / "report.json")) r.report = nlohmann::json::parse(slurp(out / "report.json"));

    const ResolvedTask task = resolve(t);
    const auto handles = task_handles(task.mesh, task.domain);
    for (const auto& trial : r.log["auto_weight"]["trials"]) {
        SolverWeights w = t.weights;
        w.w_S = trial["w_S"].get<double>();
        r.trial_increases.push_back(max_energy_increase(conlme_solve(task.mesh, handles, w, database())));
    }
    return r;
}

EndToEnd& end_to_end() {
    static EndToEnd x;
    static bool done = false;
    if (done) return x;
    done = true;
    x.dataset = x.scratch.root / "dataset.csv";
    std::string err;
    if (run_cli({"gen-dataset", "--n", "20000", "--seed", "1", "--out", x.dataset.string()}, &err) != 0) {
        x.error = "gen-dataset failed: " + err;
        return x;
    }
    x.sinusoid = design_and_evaluate(sinusoid_task(20, 10, 0.5), x.scratch.root / "sinusoid_20x10", x.dataset);
    return x;
}

Outcome e2e_sinusoid() {
    const EndToEnd& e = end_to_end();
    if (!e.error.empty()) return {false, e.error};
    const DesignRun& r = e.sinusoid;
    if (r.design_code != 0 || r.evaluate_code != 0)
        return {false, "design exit " + std::to_string(r.design_code) + ", evaluate exit " + std::to_string(r.evaluate_code) + ", status " +
                           r.log.value("status", std::string("?"))};
    const double threshold = 0.02;
    const bool converged = r.log["status"] == "complete" && r.log["conlme"]["converged"].get<bool>() &&
                           r.log["as"]["converged"].get<bool>() && r.report["reconstruction"]["converged"].get<bool>();
    const double mre = r.report["mre"].is_number() ? r.report["mre"].get<double>() : NAN;
    const double dissim = r.report["macro"]["max_dissimilarity_mm"].get<double>();
    const double area_macro = r.report["macro"]["total_area_change"].get<double>();
    const double area_asm = r.report["assembled"]["total_area_change"].get<double>();
    const bool area_ok = area_macro < 0 && std::abs(area_macro) < 0.05 && area_asm < 0 && std::abs(area_asm) < 0.05;
    std::ostringstream os;
    os << "converged " << (converged ? "yes" : "no") << " (ConLME " << r.log["conlme"]["iterations"] << " iterations, w_S "
       << r.log["auto_weight"]["weights"]["w_S"] << "), MRE " << num(100 * mre, 4) << "% (limit 25%), max dissimilarity "
       << num(dissim, 3) << " mm (threshold " << threshold << "), area change " << num(100 * area_macro, 3) << "% macro, "
       << num(100 * area_asm, 3) << "% assembled, R2_macro " << num(json_number_or_zero(r.report["r2_macro"]["value"]))
       << ", R2_micro " << num(json_number_or_zero(r.report["r2_micro"]["value"]));
    return {converged && mre <= 0.25 && dissim <= threshold && area_ok, os.str()};
}

Outcome energy_monotonicity(const std::vector<DesignRun*>& runs) {
    double worst = -INFINITY;
    int checked = 0;
    for (const DesignRun* r : runs) {
        if (r->log.is_null() || !r->log.contains("conlme")) return {false, "missing run log"};
        worst = std::max(worst, json_number_or_zero(r->log["conlme"]["max_energy_increase"]));
        if (r->log.contains("as")) worst = std::max(worst, json_number_or_zero(r->log["as"]["max_energy_increase"]));
        for (double d : r->trial_increases) worst = std::max(worst, d);
        checked += 1 + static_cast<int>(r->trial_increases.size());
    }
    return {worst <= 1e-9, std::to_string(checked) + " ConLME runs plus AS re-solves, largest increase " + num(worst, 3) + " (limit 1e-9)"};
}

// Determinism

struct DeterminismRuns {
    DesignRun a, b;
    bool datasets_equal = false;
    bool bundles_equal = false;
    std::size_t files = 0;
    std::string mismatch;
};

DeterminismRuns& determinism_runs() {
    static DeterminismRuns d = [] {
        DeterminismRuns x;
        const EndToEnd& e = end_to_end();
        const fs::path root = e.scratch.root / "determinism";
        fs::create_directories(root);
        const fs::path second = root / "dataset_again.csv";
        run_cli({"gen-dataset", "--n", "20000", "--seed", "1", "--out", second.string()});
        x.datasets_equal = fs::exists(second) && slurp(second) == slurp(e.dataset);
        const TaskFile t = sinusoid_task(10, 5, 0.5);
        x.a = design_and_evaluate(t, root / "a", e.dataset);
        x.b = design_and_evaluate(t, root / "b", e.dataset);
        x.bundles_equal = x.a.design_code == 0 && x.b.design_code == 0;
        for (const auto& entry : fs::directory_iterator(root / "a" / "bundle")) {
            const std::string name = entry.path().filename().string();
            if (name == "timings.json") continue;
            ++x.files;
            if (slurp(entry.path()) != slurp(root / "b" / "bundle" / name)) {
                x.bundles_equal = false;
                x.mismatch += " " + name;
            }
        }
        return x;
    }();
    return d;
}

Outcome determinism() {
    const DeterminismRuns& d = determinism_runs();
    std::ostringstream os;
    os << "gen-dataset 20000 records " << (d.datasets_equal ? "identical" : "DIFFERENT") << "; design sinusoid-10x5 "
       << d.files << " files " << (d.bundles_equal ? "identical" : "DIFFERENT:" + d.mismatch) << " (timings.json excluded)";
    return {d.datasets_equal && d.bundles_equal && d.files >= 10, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"morphkit acceptance suite"};
    std::vector<std::string> expect_fail, only;
    app.add_option("--expect-fail", expect_fail, "criterion expected to fail (repeatable)");
    app.add_option("--only", only, "run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"metric-reproduction", metric_reproduction},
        {"oracle-equivalence", oracle_equivalence},
        {"retrieval", retrieval},
        {"surrogate-validity", surrogate_validity},
        {"scaling-conlme", scaling_conlme},
        {"scaling-as", scaling_as},
        {"scaling-crossover", scaling_crossover},
        {"e2e-sinusoid", e2e_sinusoid},
        {"determinism", determinism},
        {"energy-monotonicity",
         [] {
             auto& d = determinism_runs();
             return energy_monotonicity({&end_to_end().sinusoid, &d.a, &d.b});
         }},
    };
    std::set<std::string> known;
    for (const auto& c : criteria) known.insert(c.first);
    for (const auto& id : expect_fail)
        if (!known.count(id)) {
            std::cerr << "unknown criterion '" << id << "'\n";
            return 2;
        }

    std::set<std::string> failed, ran;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        ran.insert(id);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool expected = std::find(expect_fail.begin(), expect_fail.end(), id) != expect_fail.end();
        if (!o.pass) failed.insert(id);
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << ": " << o.detail << " [" << num(s, 3) << " s]"
                  << (expected ? (o.pass ? " (expected to fail, passed)" : " (expected)") : "") << std::endl;
    }

    std::set<std::string> expected;
    for (const auto& id : expect_fail)
        if (ran.count(id)) expected.insert(id);
    std::cout << failed.size() << " of " << ran.size() << " criteria failed";
    if (!expected.empty()) std::cout << ", " << expected.size() << " expected";
    std::cout << std::endl;
    return failed == expected ? 0 : 1;
}
