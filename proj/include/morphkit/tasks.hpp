#pragma once

// Task files and the built-in task families.
//
// Task JSON (unknown keys are rejected at every level):
//   {
//     "name": "sinusoid-20x10",                       optional
//     "domain": {
//       "rows": 10, "cols": 20, "edge_length": 0.5,   edge_length optional
//       "occupancy": ["####", ...],                   optional; top row first, '#' occupied, '.' empty
//       "fixed":   [[a, b], ...],                     lattice coordinates (half-pitch units)
//       "handles": [{"at": [a, b], "target": [x, y]}, ...]   target in mm
//     },
//     "weights":  {"w_L": 1, "w_S": 1, "w_t": 1000},  optional, per-key defaults
//     "material": {"delta_alpha": 0.003, "delta_T": 100, "c0": 0.05},  optional
//     "microscale_method": "as" | "external-designs",
//     "dissim_threshold": 0.02,                       mm
//     "seed": 1
//   }

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "morphkit/conlme.hpp"
#include "morphkit/mesh.hpp"
#include "morphkit/surrogate.hpp"

namespace morphkit {

enum class MicroscaleMethod { adjustable_search, external_designs };

struct LatticeHandle {
    LatticePoint at;
    Vec2 target = Vec2::Zero();
};

/// Lattice-addressed task; resolve() maps lattice points to vertex ids of the built mesh.
struct TaskFile {
    std::string name;
    int rows = 0;
    int cols = 0;
    double edge_length = kDefaultEdgeLength;
    std::vector<bool> occupancy;  // row-major, row 0 at the bottom
    std::vector<LatticePoint> fixed;
    std::vector<LatticeHandle> handles;
    SolverWeights weights;
    MaterialParams material;
    MicroscaleMethod microscale_method = MicroscaleMethod::adjustable_search;
    double dissim_threshold = 0.02;
    std::uint64_t seed = 1;
};

struct ResolvedTask {
    TaskFile file;
    DomainSpec domain;
    LinkageMesh mesh;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ValidationError("unknown key '" + k + "' in " + where);
}

inline double get_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError("missing key '" + std::string(key) + "' in " + where);
    const auto& v = j.at(key);
    if (!v.is_number()) throw ValidationError("'" + std::string(key) + "' in " + where + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError("'" + std::string(key) + "' in " + where + " must be finite");
    return d;
}

inline int get_int(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw ValidationError("missing key '" + std::string(key) + "' in " + where);
    const auto& v = j.at(key);
    if (!v.is_number_integer()) throw ValidationError("'" + std::string(key) + "' in " + where + " must be an integer");
    return v.get<int>();
}

inline LatticePoint get_lattice(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
        throw ValidationError(where + " must be an [a, b] pair of integers");
    return {j[0].get<int>(), j[1].get<int>()};
}

inline Vec2 get_point(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(where + " must be an [x, y] pair of numbers");
    const Vec2 p(j[0].get<double>(), j[1].get<double>());
    if (!p.allFinite()) throw ValidationError(where + " must be finite");
    return p;
}

}  // namespace detail

inline TaskFile parse_task(const nlohmann::json& j) {
    using namespace detail;
    check_keys(j, "task", {"name", "domain", "weights", "material", "microscale_method", "dissim_threshold", "seed"});
    TaskFile t;
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw ValidationError("'name' must be a string");
        t.name = j["name"].get<std::string>();
    }
    if (!j.contains("domain")) throw ValidationError("missing key 'domain' in task");
    const auto& d = j["domain"];
    check_keys(d, "domain", {"rows", "cols", "edge_length", "occupancy", "fixed", "handles"});
    t.rows = get_int(d, "rows", "domain");
    t.cols = get_int(d, "cols", "domain");
    if (t.rows <= 0 || t.cols <= 0) throw ValidationError("domain rows and cols must be positive");
    if (d.contains("edge_length")) t.edge_length = get_number(d, "edge_length", "domain");
    t.occupancy.assign(static_cast<std::size_t>(t.rows) * t.cols, true);
    if (d.contains("occupancy")) {
        const auto& occ = d["occupancy"];
        if (!occ.is_array() || occ.size() != static_cast<std::size_t>(t.rows))
            throw ValidationError("domain occupancy must list " + std::to_string(t.rows) + " row strings");
        for (int k = 0; k < t.rows; ++k) {
            if (!occ[k].is_string()) throw ValidationError("occupancy rows must be strings");
            const std::string s = occ[k].get<std::string>();
            if (s.size() != static_cast<std::size_t>(t.cols))
                throw ValidationError("occupancy row " + std::to_string(k) + " must have " + std::to_string(t.cols) + " characters");
            const int r = t.rows - 1 - k;
            for (int c = 0; c < t.cols; ++c) {
                if (s[c] != '#' && s[c] != '.') throw ValidationError("occupancy characters must be '#' or '.'");
                t.occupancy[static_cast<std::size_t>(r) * t.cols + c] = s[c] == '#';
            }
        }
    }
    if (d.contains("fixed")) {
        if (!d["fixed"].is_array()) throw ValidationError("domain fixed must be an array");
        for (const auto& f : d["fixed"]) t.fixed.push_back(get_lattice(f, "fixed entry"));
    }
    if (d.contains("handles")) {
        if (!d["handles"].is_array()) throw ValidationError("domain handles must be an array");
        for (const auto& h : d["handles"]) {
            check_keys(h, "handle", {"at", "target"});
            if (!h.contains("at") || !h.contains("target")) throw ValidationError("handle needs 'at' and 'target'");
            t.handles.push_back({get_lattice(h["at"], "handle 'at'"), get_point(h["target"], "handle 'target'")});
        }
    }
    if (j.contains("weights")) {
        const auto& w = j["weights"];
        check_keys(w, "weights", {"w_L", "w_S", "w_t"});
        if (w.contains("w_L")) t.weights.w_L = get_number(w, "w_L", "weights");
        if (w.contains("w_S")) t.weights.w_S = get_number(w, "w_S", "weights");
        if (w.contains("w_t")) t.weights.w_t = get_number(w, "w_t", "weights");
    }
    t.weights.validate();
    if (j.contains("material")) {
        const auto& m = j["material"];
        check_keys(m, "material", {"delta_alpha", "delta_T", "c0"});
        if (m.contains("delta_alpha")) t.material.delta_alpha = get_number(m, "delta_alpha", "material");
        if (m.contains("delta_T")) t.material.delta_T = get_number(m, "delta_T", "material");
        if (m.contains("c0")) t.material.c0 = get_number(m, "c0", "material");
    }
    t.material.validate();
    if (!j.contains("microscale_method") || !j["microscale_method"].is_string())
        throw ValidationError("task needs 'microscale_method' (\"as\" or \"external-designs\")");
    const std::string m = j["microscale_method"].get<std::string>();
    if (m == "as")
        t.microscale_method = MicroscaleMethod::adjustable_search;
    else if (m == "external-designs")
        t.microscale_method = MicroscaleMethod::external_designs;
    else
        throw ValidationError("microscale_method must be \"as\" or \"external-designs\", got \"" + m + "\"");
    t.dissim_threshold = get_number(j, "dissim_threshold", "task");
    if (!(t.dissim_threshold > 0)) throw ValidationError("dissim_threshold must be positive");
    if (!j.contains("seed") || !j["seed"].is_number_unsigned()) throw ValidationError("task needs a nonnegative integer 'seed'");
    t.seed = j["seed"].get<std::uint64_t>();
    return t;
}

inline TaskFile parse_task(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("task file is not valid JSON: ") + e.what());
    }
    return parse_task(j);
}

inline nlohmann::ordered_json task_json(const TaskFile& t) {
    nlohmann::ordered_json j;
    if (!t.name.empty()) j["name"] = t.name;
    nlohmann::ordered_json d;
    d["rows"] = t.rows;
    d["cols"] = t.cols;
    d["edge_length"] = t.edge_length;
    bool full = true;
    for (bool o : t.occupancy) full = full && o;
    if (!full) {
        auto occ = nlohmann::ordered_json::array();
        for (int r = t.rows - 1; r >= 0; --r) {
            std::string s;
            for (int c = 0; c < t.cols; ++c) s += t.occupancy[static_cast<std::size_t>(r) * t.cols + c] ? '#' : '.';
            occ.push_back(s);
        }
        d["occupancy"] = occ;
    }
    auto fixed = nlohmann::ordered_json::array();
    for (const auto& f : t.fixed) fixed.push_back({f.a, f.b});
    d["fixed"] = fixed;
    auto handles = nlohmann::ordered_json::array();
    for (const auto& h : t.handles) {
        nlohmann::ordered_json e;
        e["at"] = {h.at.a, h.at.b};
        e["target"] = {h.target.x(), h.target.y()};
        handles.push_back(e);
    }
    d["handles"] = handles;
    j["domain"] = d;
    j["weights"] = {{"w_L", t.weights.w_L}, {"w_S", t.weights.w_S}, {"w_t", t.weights.w_t}};
    j["material"] = {{"delta_alpha", t.material.delta_alpha}, {"delta_T", t.material.delta_T}, {"c0", t.material.c0}};
    j["microscale_method"] = t.microscale_method == MicroscaleMethod::adjustable_search ? "as" : "external-designs";
    j["dissim_threshold"] = t.dissim_threshold;
    j["seed"] = t.seed;
    return j;
}

/// Builds the mesh and maps lattice-addressed handles/fixed vertices to vertex ids.
inline ResolvedTask resolve(const TaskFile& t) {
    ResolvedTask r;
    r.file = t;
    r.domain.rows = t.rows;
    r.domain.cols = t.cols;
    r.domain.edge_length = t.edge_length;
    r.domain.occupancy = t.occupancy;
    r.mesh = build_mesh(r.domain);
    auto lookup = [&](const LatticePoint& p, const char* what) {
        auto v = r.mesh.vertex_at(p.a, p.b);
        if (!v)
            throw ValidationError(std::string(what) + " [" + std::to_string(p.a) + ", " + std::to_string(p.b) +
                                  "] is not a mesh vertex");
        return *v;
    };
    std::set<VertexId> seen;
    for (const auto& f : t.fixed) {
        const VertexId v = lookup(f, "fixed vertex");
        if (!seen.insert(v).second) throw ValidationError("vertex listed twice among fixed/handles");
        r.domain.fixed.push_back(v);
    }
    for (const auto& h : t.handles) {
        const VertexId v = lookup(h.at, "handle");
        if (!seen.insert(v).second) throw ValidationError("vertex listed twice among fixed/handles");
        r.domain.handles.push_back({v, h.target});
    }
    if (r.domain.fixed.empty() && r.domain.handles.empty()) throw ValidationError("task has no fixed or handle vertices");
    // Rebuild with handles so build_mesh applies its own validation of ids and targets.
    r.mesh = build_mesh(r.domain);
    return r;
}

// Built-in task families.

/// Target point on the bottom-edge profile y(x) = -A (1 - cos(pi x / L)) / 2 at arc length s.
inline Vec2 sinusoid_point(double s, double length, double amplitude) {
    if (amplitude == 0) return {s, 0.0};
    auto y = [&](double x) { return -amplitude * (1.0 - std::cos(kPi * x / length)) / 2.0; };
    auto dy = [&](double x) { return -amplitude * kPi / (2.0 * length) * std::sin(kPi * x / length); };
    // Arc length by composite Simpson on a fine fixed grid, then bisection for x(s).
    auto arc = [&](double x) {
        const int n = 256;
        const double hstep = x / n;
        double acc = 0;
        for (int i = 0; i <= n; ++i) {
            const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
            acc += w * std::sqrt(1 + dy(i * hstep) * dy(i * hstep));
        }
        return acc * hstep / 3.0;
    };
    double lo = 0, hi = s;
    for (int it = 0; it < 100 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        (arc(mid) < s ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    return {x, y(x)};
}

/// Cantilever of cols x rows cells: left edge fixed; every bottom-edge vertex is a handle
/// whose target lies on the profile at its rest arc length, amplitude = amp_ratio * width.
inline TaskFile sinusoid_task(int cols, int rows, double amp_ratio, double dissim_threshold = 0.02,
                              MicroscaleMethod method = MicroscaleMethod::adjustable_search) {
    TaskFile t;
    t.name = "sinusoid-" + std::to_string(cols) + "x" + std::to_string(rows);
    t.rows = rows;
    t.cols = cols;
    t.occupancy.assign(static_cast<std::size_t>(rows) * cols, true);
    const double e = t.edge_length;
    const double length = 2 * e * cols;
    const double amplitude = amp_ratio * 2 * e * rows;
    for (int b = 0; b <= 2 * rows; ++b) t.fixed.push_back({0, b});
    for (int a = 1; a <= 2 * cols; ++a) t.handles.push_back({{a, 0}, sinusoid_point(a * e, length, amplitude)});
    t.microscale_method = method;
    t.dissim_threshold = dissim_threshold;
    return t;
}

/// Beam with a sparse middle row: full bottom and top rows, middle row alternating, left edge
/// fixed, a single handle at the bottom-right corner dropped by `drop` mm.
inline TaskFile checkerboard_task(int cols = 24, double drop = 4.0) {
    TaskFile t;
    t.name = "checkerboard-beam";
    t.rows = 3;
    t.cols = cols;
    t.occupancy.assign(static_cast<std::size_t>(3) * cols, true);
    for (int c = 1; c < cols; c += 2) t.occupancy[static_cast<std::size_t>(cols) + c] = false;
    t.occupancy[static_cast<std::size_t>(cols) + cols - 1] = true;  // keep the free end closed
    const double e = t.edge_length;
    for (int b = 0; b <= 6; ++b) t.fixed.push_back({0, b});
    t.handles.push_back({{2 * cols, 0}, Vec2(2 * e * cols, -drop)});
    t.dissim_threshold = 0.02;
    return t;
}

/// Masked body with five hanging arms; the top edge is fixed and each arm tip gets its own
/// displacement.
inline TaskFile octopus_task() {
    TaskFile t;
    t.name = "octopus";
    const std::vector<std::string> rows_top_first = {
        "....#######....",
        "...#########...",
        "..###########..",
        "..###########..",
        "..###########..",
        "..###########..",
        ".##.#..#..#.##.",
        ".#..#..#..#..#.",
        "##..#..#..#..##",
        "#...#..#..#...#",
        "#...#..#..#...#",
        "#...#..#..#...#",
    };
    t.rows = static_cast<int>(rows_top_first.size());
    t.cols = static_cast<int>(rows_top_first[0].size());
    t.occupancy.assign(static_cast<std::size_t>(t.rows) * t.cols, false);
    for (int k = 0; k < t.rows; ++k)
        for (int c = 0; c < t.cols; ++c)
            t.occupancy[static_cast<std::size_t>(t.rows - 1 - k) * t.cols + c] = rows_top_first[k][c] == '#';
    const double e = t.edge_length;
    for (int a = 8; a <= 22; ++a) t.fixed.push_back({a, 2 * t.rows});
    // Arm tips: bottom-edge midpoints of the lowest cell of each arm.
    const int tip_cols[5] = {0, 4, 7, 10, 14};
    const Vec2 disp[5] = {{-1.5, 1.0}, {-0.8, -0.6}, {0.0, -1.2}, {0.8, -0.6}, {1.5, 1.0}};
    for (int k = 0; k < 5; ++k) {
        const int a = 2 * tip_cols[k] + 1;
        t.handles.push_back({{a, 0}, Vec2(a * e, 0.0) + disp[k]});
    }
    t.dissim_threshold = 0.02;
    return t;
}

/// Task with every handle at its rest position (fixed left edge, bottom edge handles).
inline TaskFile rest_task(int cols, int rows) {
    TaskFile t = sinusoid_task(cols, rows, 0.0);
    t.name = "rest-" + std::to_string(cols) + "x" + std::to_string(rows);
    return t;
}

}  // namespace morphkit
