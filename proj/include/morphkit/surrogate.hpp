#pragma once

// Deterministic forward model: infill design -> deformed cell angles.
//
// Stands in for per-cell thermomechanical FEA. Each of the eight curved beams is a thermal
// bimorph whose curvature drives the two octagon vertices it is incident to. The raw angle
// increments are then projected onto the closure manifold (angle sum 6*pi and a closed edge
// walk), so every output is a valid equilateral octagon.

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "morphkit/geometry.hpp"

namespace morphkit {

struct Beam {
    double radius = 0.125;    // mm
    double thickness = 0.05;  // mm
    int orientation = 1;      // +1 or -1: stacking order of the two layers
};

/// Beam k spans octagon vertices k -> k+1 (mod 8).
struct InfillDesign {
    std::array<Beam, kCellVertices> beams{};
};

struct DesignBounds {
    static constexpr double radius_min = 0.05;
    static constexpr double radius_max = 0.20;
    static constexpr double thickness_min = 0.02;
    static constexpr double thickness_max = 0.08;
};

/// Empty string when valid, otherwise a description of the first violated bound.
inline std::string design_violation(const InfillDesign& x) {
    for (int k = 0; k < kCellVertices; ++k) {
        const auto& b = x.beams[k];
        const std::string tag = "beam " + std::to_string(k + 1) + ": ";
        if (!(b.radius >= DesignBounds::radius_min && b.radius <= DesignBounds::radius_max))
            return tag + "radius " + std::to_string(b.radius) + " outside [0.05, 0.20] mm";
        if (!(b.thickness >= DesignBounds::thickness_min && b.thickness <= DesignBounds::thickness_max))
            return tag + "thickness " + std::to_string(b.thickness) + " outside [0.02, 0.08] mm";
        if (b.orientation != 1 && b.orientation != -1) return tag + "orientation must be +1 or -1";
    }
    return {};
}

inline void validate_design(const InfillDesign& x) {
    if (auto v = design_violation(x); !v.empty()) throw ValidationError("invalid infill design: " + v);
}

/// Identical beams with alternating orientation: the raw increments cancel exactly.
inline InfillDesign neutral_design() {
    InfillDesign x;
    for (int k = 0; k < kCellVertices; ++k) x.beams[k] = {0.125, 0.05, (k % 2 == 0) ? 1 : -1};
    return x;
}

struct MaterialParams {
    double delta_alpha = 0.003;  // CTE contrast, 1/degC
    double delta_T = 100.0;      // degC
    double c0 = 0.05;            // angle-coupling gain; keeps most deviations within about 0.5 rad

    void validate() const {
        if (!(delta_alpha > 0)) throw ValidationError("delta_alpha must be positive");
        if (!(delta_T >= 0 && delta_T <= 100)) throw ValidationError("delta_T must lie in [0, 100]");
        if (!(c0 > 0)) throw ValidationError("c0 must be positive");
    }
};

/// Equal-layer, equal-modulus thermal bimorph: kappa = 1.5 * delta_alpha * delta_T / h.
inline double beam_curvature(double thickness, const MaterialParams& mat) {
    if (!(thickness > 0)) throw ValidationError("beam thickness must be positive");
    return 1.5 * mat.delta_alpha * mat.delta_T / thickness;
}

/// Each vertex angle is driven by its two incident beams, weighted by normalized radius.
inline Angles raw_angle_increments(const InfillDesign& x, const MaterialParams& mat,
                                   double edge_length = kDefaultEdgeLength) {
    std::array<double, kCellVertices> drive{};
    for (int k = 0; k < kCellVertices; ++k) {
        const auto& b = x.beams[k];
        drive[k] = (b.radius / DesignBounds::radius_max) * b.orientation * beam_curvature(b.thickness, mat);
    }
    Angles d{};
    for (int j = 0; j < kCellVertices; ++j)
        d[j] = mat.c0 * edge_length * (drive[(j + kCellVertices - 1) % kCellVertices] + drive[j]);
    return d;
}

/// Closure constraints on a unit-edge walk: (angle sum - 6pi, x-closure, y-closure).
inline Eigen::Vector3d closure_constraints(const Angles& theta) {
    const Angles phi = edge_headings(theta);
    Eigen::Vector3d c(angle_sum(theta) - kAngleSum, 0.0, 0.0);
    for (double p : phi) {
        c[1] += std::cos(p);
        c[2] += std::sin(p);
    }
    return c;
}

/// 3x8 Jacobian of closure_constraints. theta[0] only enters the angle sum.
inline Eigen::Matrix<double, 3, 8> closure_jacobian(const Angles& theta) {
    const Angles phi = edge_headings(theta);
    Eigen::Matrix<double, 3, 8> J = Eigen::Matrix<double, 3, 8>::Zero();
    J.row(0).setOnes();
    double sin_tail = 0, cos_tail = 0;
    for (int j = kCellVertices - 1; j >= 1; --j) {
        sin_tail += std::sin(phi[j]);
        cos_tail += std::cos(phi[j]);
        J(1, j) = sin_tail;
        J(2, j) = -cos_tail;
    }
    return J;
}

struct ProjectionOptions {
    double residual_tol = 1e-10;
    double step_tol = 1e-12;
    int max_iter = 50;
};

/// Nearest closure-feasible angle vector to theta_target (least squares), by Newton's method
/// on the Lagrangian KKT system. Throws ClosureError on non-convergence or when the result
/// leaves (0, 2*pi).
inline Angles closure_project(const Angles& theta_target, const ProjectionOptions& opt = {}) {
    using Vec8 = Eigen::Matrix<double, 8, 1>;
    using Kkt = Eigen::Matrix<double, 11, 11>;
    const Vec8 target = Eigen::Map<const Vec8>(theta_target.data());

    Angles theta = theta_target;
    Eigen::Vector3d lambda = Eigen::Vector3d::Zero();
    Eigen::Vector3d c = closure_constraints(theta);
    if (c.lpNorm<Eigen::Infinity>() < opt.residual_tol) return theta;

    for (int it = 0; it < opt.max_iter; ++it) {
        const Angles phi = edge_headings(theta);
        const Eigen::Matrix<double, 3, 8> J = closure_jacobian(theta);

        // Hessians of the walk constraints: d2c/dtheta_i dtheta_j = -sum_{k >= max(i,j)} (cos|sin) phi_k.
        std::array<double, kCellVertices> cos_tail{}, sin_tail{};
        double cs = 0, sn = 0;
        for (int k = kCellVertices - 1; k >= 1; --k) {
            cs += std::cos(phi[k]);
            sn += std::sin(phi[k]);
            cos_tail[k] = cs;
            sin_tail[k] = sn;
        }
        Eigen::Matrix<double, 8, 8> H = Eigen::Matrix<double, 8, 8>::Identity();
        for (int i = 1; i < kCellVertices; ++i)
            for (int j = 1; j < kCellVertices; ++j) {
                const int m = std::max(i, j);
                H(i, j) += -lambda[1] * cos_tail[m] - lambda[2] * sin_tail[m];
            }

        const Vec8 th = Eigen::Map<const Vec8>(theta.data());
        Kkt K = Kkt::Zero();
        K.topLeftCorner<8, 8>() = H;
        K.topRightCorner<8, 3>() = J.transpose();
        K.bottomLeftCorner<3, 8>() = J;
        Eigen::Matrix<double, 11, 1> rhs;
        rhs.head<8>() = -((th - target) + J.transpose() * lambda);
        rhs.tail<3>() = -c;
        const Eigen::Matrix<double, 11, 1> step = K.fullPivLu().solve(rhs);
        if (!step.allFinite()) throw ClosureError("closure projection produced a non-finite step", c.norm());

        for (int j = 0; j < kCellVertices; ++j) theta[j] += step[j];
        lambda += step.tail<3>();
        c = closure_constraints(theta);
        if (c.lpNorm<Eigen::Infinity>() < opt.residual_tol && step.head<8>().lpNorm<Eigen::Infinity>() < opt.step_tol)
            break;
        if (it + 1 == opt.max_iter)
            throw ClosureError("closure projection did not converge in " + std::to_string(opt.max_iter) + " iterations",
                               c.lpNorm<Eigen::Infinity>());
    }
    for (double t : theta)
        if (!(t > 0 && t < 2 * kPi)) throw ClosureError("projected angle leaves (0, 2pi)", t);
    return theta;
}

/// Design -> deformed cell configuration. Throws ClosureError when the projection fails or
/// the resulting octagon self-intersects (such samples are discarded by dataset generation).
inline CellConfig surrogate_forward(const InfillDesign& x, const MaterialParams& mat,
                                    double edge_length = kDefaultEdgeLength) {
    validate_design(x);
    const Angles rest = rest_angles();
    const Angles raw = raw_angle_increments(x, mat, edge_length);
    Angles target{};
    for (int j = 0; j < kCellVertices; ++j) target[j] = rest[j] + raw[j];
    CellConfig cfg;
    cfg.angles = closure_project(target);
    cfg.coords = octagon_from_angles(cfg.angles, edge_length);
    if (!is_simple(cfg.coords)) throw ClosureError("surrogate octagon self-intersects", 0.0);
    return cfg;
}

}  // namespace morphkit
