#pragma once

// Equilateral octagon geometry: the kinematic description of one unit cell.
//
// A cell is an 8-bar closed linkage. Vertices are numbered counter-clockwise from the
// bottom-left corner, so even indices are cell corners and odd indices are side midpoints.
// theta[j] is the interior angle at vertex j. Walking the boundary, edge k (from vertex k to
// vertex k+1) has heading phi_k = sum_{j=1..k} (pi - theta[j]); edge 0 starts along +x.

#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Core>

#include "morphkit/errors.hpp"

namespace morphkit {

using Vec2 = Eigen::Vector2d;

inline constexpr int kCellVertices = 8;

using Angles = std::array<double, kCellVertices>;
using Octagon = std::array<Vec2, kCellVertices>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDefaultEdgeLength = 0.5;  // mm

/// Interior angle sum of a simple octagon.
inline constexpr double kAngleSum = 6.0 * kPi;

/// Rest (undeformed) angles: 90 degrees at corners, 180 degrees at midpoints.
inline Angles rest_angles() {
    Angles a{};
    for (int j = 0; j < kCellVertices; ++j) a[j] = (j % 2 == 0) ? kPi / 2 : kPi;
    return a;
}

/// One unit cell's kinematic state.
struct CellConfig {
    Angles angles{};
    Octagon coords{};  // centered: vertex centroid at the origin
};

inline Vec2 centroid(std::span<const Vec2> pts) {
    Vec2 c = Vec2::Zero();
    for (const auto& p : pts) c += p;
    return c / static_cast<double>(pts.size());
}

inline Octagon centered(const Octagon& pts) {
    const Vec2 c = centroid(pts);
    Octagon out;
    for (int j = 0; j < kCellVertices; ++j) out[j] = pts[j] - c;
    return out;
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Edge headings phi_0..phi_7 for the boundary walk.
inline Angles edge_headings(const Angles& theta) {
    Angles phi{};
    phi[0] = 0.0;
    for (int k = 1; k < kCellVertices; ++k) phi[k] = phi[k - 1] + (kPi - theta[k]);
    return phi;
}

struct OctagonWalk {
    Octagon coords;   // centered
    double closure;   // distance between the walk's end point and its start, mm
};

/// Edge walk without a closure check. Used for intermediate (non-closing) angle sets.
inline OctagonWalk walk_octagon(const Angles& theta, double edge_length) {
    const Angles phi = edge_headings(theta);
    Octagon p;
    p[0] = Vec2::Zero();
    for (int k = 1; k < kCellVertices; ++k)
        p[k] = p[k - 1] + edge_length * Vec2(std::cos(phi[k - 1]), std::sin(phi[k - 1]));
    const Vec2 end = p[7] + edge_length * Vec2(std::cos(phi[7]), std::sin(phi[7]));
    return {centered(p), end.norm()};
}

/// Reconstructs the octagon from its eight interior angles.
/// Throws ClosureError if the walk fails to close within 1e-6 mm.
inline Octagon octagon_from_angles(const Angles& theta, double edge_length = kDefaultEdgeLength) {
    if (!(edge_length > 0)) throw ValidationError("edge_length must be positive");
    auto walk = walk_octagon(theta, edge_length);
    if (!(walk.closure <= 1e-6)) throw ClosureError("octagon edge walk does not close", walk.closure);
    return walk.coords;
}

/// Signed shoelace area; positive for counter-clockwise order.
inline double signed_area(std::span<const Vec2> pts) {
    double s = 0.0;
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) s += cross(pts[i], pts[(i + 1) % n]);
    return 0.5 * s;
}

inline double cell_area(std::span<const Vec2> pts) { return std::abs(signed_area(pts)); }

/// Interior angles in (0, 2*pi), indexed by vertex. Orientation is normalized, so clockwise
/// input yields the same angles as its counter-clockwise equivalent.
inline Angles angles_from_coords(const Octagon& pts) {
    constexpr double kTiny = 1e-12;
    for (int i = 0; i < kCellVertices; ++i)
        for (int j = i + 1; j < kCellVertices; ++j)
            if ((pts[i] - pts[j]).norm() <= kTiny)
                throw ValidationError("octagon has repeated vertex " + std::to_string(i) + "/" + std::to_string(j));
    const double orient = signed_area(pts) >= 0 ? 1.0 : -1.0;
    Angles theta{};
    for (int j = 0; j < kCellVertices; ++j) {
        const Vec2 prev = pts[(j + kCellVertices - 1) % kCellVertices] - pts[j];
        const Vec2 next = pts[(j + 1) % kCellVertices] - pts[j];
        double a = std::atan2(orient * cross(next, prev), next.dot(prev));
        if (a <= 0) a += 2 * kPi;
        theta[j] = a;
    }
    return theta;
}

inline double angle_sum(const Angles& theta) {
    double s = 0.0;
    for (double t : theta) s += t;
    return s;
}

namespace detail {
inline bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double d1 = cross(b - a, c - a);
    const double d2 = cross(b - a, d - a);
    const double d3 = cross(d - c, a - c);
    const double d4 = cross(d - c, b - c);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}
}  // namespace detail

/// True when no two non-adjacent edges properly intersect.
inline bool is_simple(const Octagon& pts) {
    for (int i = 0; i < kCellVertices; ++i)
        for (int j = i + 2; j < kCellVertices; ++j) {
            if (i == 0 && j == kCellVertices - 1) continue;
            if (detail::segments_cross(pts[i], pts[(i + 1) % 8], pts[j], pts[(j + 1) % 8])) return false;
        }
    return true;
}

inline Vec2 rotate(const Vec2& p, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

inline Octagon rotated(const Octagon& pts, double phi) {
    Octagon out;
    for (int j = 0; j < kCellVertices; ++j) out[j] = rotate(pts[j], phi);
    return out;
}

}  // namespace morphkit
