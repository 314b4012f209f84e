#pragma once

#include <Eigen/Core>

#include "edemap/errors.hpp"
#include "edemap/mesh.hpp"

namespace edemap {

/// Elliptic radii (a, b, c) of the target domain
/// { (x,y,z) : x^2/a^2 + y^2/b^2 + z^2/c^2 = 1 }.
struct EllipsoidRadii {
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;

    EllipsoidRadii() = default;
    EllipsoidRadii(double a_, double b_, double c_) : a(a_), b(b_), c(c_) {
        if (!(a > 0.0 && b > 0.0 && c > 0.0)) {
            throw ValidationError("ellipsoid radii must be positive");
        }
    }

    bool is_sphere(double tol = 0.0) const {
        return std::abs(a - b) <= tol && std::abs(b - c) <= tol;
    }
};

/// Per-vertex positions on an ellipsoid, together with the radii of the
/// domain they live on. The source connectivity is carried separately.
struct ParamMap {
    MatrixXd positions;
    EllipsoidRadii radii;
};

/// Left-hand side of the ellipsoid equation, per point. Equals 1 on the
/// surface.
VectorXd ellipsoid_equation(const MatrixXd& positions, const EllipsoidRadii& radii);

/// Radially scales every point onto the ellipsoid: divide by
/// sqrt(x^2/a^2 + y^2/b^2 + z^2/c^2). Idempotent on surface points.
MatrixXd project_to_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii);

/// Outward unit normals of the ellipsoid at the given (near-)surface points:
/// (x/a^2, y/b^2, z/c^2) normalized.
MatrixXd vertex_normals_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii);

/// The rescaling h: E_{a,b,c} -> S^2, (x,y,z) |-> (x/a, y/b, z/c).
MatrixXd ellipsoid_to_sphere(const MatrixXd& positions, const EllipsoidRadii& radii);

/// Inverse rescaling h^{-1}: S^2 -> E_{a,b,c}.
MatrixXd sphere_to_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii);

} // namespace edemap
