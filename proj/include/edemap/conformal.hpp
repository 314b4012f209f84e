#pragma once

#include <Eigen/Core>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"

namespace edemap {

enum class Pole { North, South };

/// Stereographic projection of unit-sphere points: north pole gives
/// (x, y)/(1 - z), south pole (x, y)/(1 + z). Throws PoleError when a point
/// sits at the projection pole.
MatrixXd stereographic(const MatrixXd& sphere_points, Pole pole);

/// Inverse of the projection above; the plane origin maps to (0,0,-1) under
/// the north-pole convention.
MatrixXd inverse_stereographic(const MatrixXd& plane_points, Pole pole);

/// Inverse ellipsoidal stereographic projection (north-pole convention):
/// the unit-sphere inverse image scaled by the radii. (0,0) maps to
/// (0,0,-c).
MatrixXd inverse_ellipsoidal_stereographic(const MatrixXd& plane_points, const EllipsoidRadii& radii);

/// Plane Moebius transform z -> (z - z(p0)) / (z - z(pinf)); p0 lands at the
/// origin and pinf becomes the point of maximal modulus (placed at twice the
/// largest transformed modulus, since its exact image is the point at
/// infinity).
MatrixXd mobius_normalize(const MatrixXd& plane_points, int p0, int pinf);

/// Monotone radial rescale z -> z * s(|z|), piecewise linear in
/// log-modulus, matching the 20th/50th/80th modulus percentiles to those of
/// an equal-area sphere sampling (0.5, 1, 2). The median modulus maps to 1.
MatrixXd rescale_distribution(const MatrixXd& plane_points);

struct SphericalMap {
    MatrixXd positions; // |V| x 3 on the unit sphere
    int big_face = -1;  // face removed for the harmonic step (covers a pole cap)
};

/// Conformal parameterization of a genus-0 closed mesh onto the unit
/// sphere: harmonic map of the punctured mesh into a fixed triangle,
/// inverse stereographic projection, one LBS repair pass in the chart that
/// spreads the crowded polar region, and a Moebius centering of the area
/// centroid.
SphericalMap spherical_conformal_map(const TriMesh& mesh);

/// Conformal parameterization onto the prescribed ellipsoid: spherical map,
/// stereographic projection, Moebius pole alignment along the first
/// principal axis, radial redistribution, and an LBS compensation of the
/// non-conformality of the inverse ellipsoidal projection.
ParamMap fecm(const TriMesh& mesh, const EllipsoidRadii& radii);

} // namespace edemap
