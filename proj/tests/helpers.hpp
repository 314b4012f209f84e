#pragma once

#include <cmath>
#include <string>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"
#include "edemap/remesh.hpp"

namespace edemap::testing {

/// Regular tetrahedron with unit edge length.
inline TriMesh tetrahedron() {
    MatrixXd V(4, 3);
    V << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    V /= 2.0 * std::sqrt(2.0); // edge length 1
    MatrixXi F(4, 3);
    F << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
    return make_mesh(V, F);
}

/// Right-angle tetrahedron at the origin; face 0 is the right triangle with
/// legs 1 in the z = 0 plane.
inline TriMesh corner_tetrahedron() {
    MatrixXd V(4, 3);
    V << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    MatrixXi F(4, 3);
    F << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
    return make_mesh(V, F);
}

inline TriMesh icosahedron() { return icosphere(0); }

/// Icosphere carried onto an ellipsoid (positions satisfy the ellipsoid
/// equation exactly).
inline TriMesh ellipsoid_mesh(const EllipsoidRadii& radii, int level) {
    const TriMesh s = icosphere(level);
    return make_mesh(sphere_to_ellipsoid(s.V, radii), s.F);
}

/// Smooth star-shaped bumpy model (genus 0).
inline TriMesh blob_model(int level) {
    const TriMesh s = icosphere(level);
    MatrixXd V = s.V;
    for (int i = 0; i < V.rows(); ++i) {
        const double x = V(i, 0), y = V(i, 1), z = V(i, 2);
        const double r = 1.0 + 0.3 * std::sin(2.5 * x + 0.8) * std::cos(1.7 * y - 0.3) +
                         0.15 * std::sin(3.1 * z);
        V.row(i) *= r;
    }
    return make_mesh(V, s.F);
}

/// Dumbbell along z: thick lobes, thin waist.
inline TriMesh peanut_model(int level) {
    const TriMesh s = icosphere(level);
    MatrixXd V = s.V;
    for (int i = 0; i < V.rows(); ++i) {
        const double z = V(i, 2);
        const double r = 0.6 + 0.5 * z * z;
        V(i, 0) *= r;
        V(i, 1) *= r;
        V(i, 2) *= 1.1;
    }
    return make_mesh(V, s.F);
}

/// Elongated bent model (banana): diameter ratio around 4:1.
inline TriMesh banana_model(int level) {
    const TriMesh s = icosphere(level);
    MatrixXd V = s.V;
    for (int i = 0; i < V.rows(); ++i) {
        const double x = V(i, 0) * 0.35;
        const double y = V(i, 1) * 0.35;
        const double z = V(i, 2) * 1.3;
        V(i, 0) = x + 0.5 * z * z;
        V(i, 1) = y;
        V(i, 2) = z;
    }
    return make_mesh(V, s.F);
}

inline std::string temp_dir() {
    const char* env = std::getenv("TMPDIR");
    return env ? std::string(env) : std::string("/tmp");
}

} // namespace edemap::testing
