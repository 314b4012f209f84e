#pragma once

#include <Eigen/Core>

#include <complex>
#include <utility>
#include <vector>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"

namespace edemap {

using VectorXcd = Eigen::VectorXcd;

/// A piecewise-linear planar map: matching source/target coordinates over a
/// shared face list.
struct PlanarMap {
    MatrixXd source; // |V| x 2
    MatrixXd target; // |V| x 2
    MatrixXi faces;  // |F| x 3
};

/// Per-face Beltrami coefficient of a planar map, from the P1 partial
/// derivatives. Throws ConformalFactorZero when a face is degenerate or
/// anti-conformal (|f_z| below 1e-14 relative to |f_z| + |f_zbar|).
VectorXcd beltrami_of_planar_map(const PlanarMap& map);

/// Tolerant variant used inside correction loops: near-degenerate faces get
/// a large finite coefficient instead of throwing, so that truncation can
/// deal with them.
VectorXcd beltrami_of_planar_map_tolerant(const PlanarMap& map);

/// Per-face Beltrami coefficient of the map from a planar chart to a 3D
/// embedding. The 3D faces are rigidly flattened using the chart's majority
/// handedness, so the moduli of orientation-consistent faces stay below one
/// regardless of the chart's winding.
VectorXcd beltrami_plane_to_surface(const MatrixXd& uv, const MatrixXi& faces,
                                    const MatrixXd& positions3d);

/// Per-face Beltrami coefficient between two embeddings of the same mesh.
/// Each face pair is rigidly flattened (first edge on the positive real
/// axis, own-normal up) before applying the planar formula, so the result is
/// invariant under rigid motions of either side and measures pure shape
/// distortion.
VectorXcd beltrami_of_surface_map(const TriMesh& mesh, const MatrixXd& source_positions,
                                  const MatrixXd& target_positions);

/// Reconstructs a quasi-conformal map with prescribed per-face coefficient
/// by solving the two elliptic systems div(A grad u) = div(A grad v) = 0
/// with Dirichlet point constraints. Needs sup|mu| < 1 - 1e-6 and at least
/// two constraints.
MatrixXd lbs_reconstruct(const MatrixXi& faces, const MatrixXd& source_uv, const VectorXcd& mu,
                         const std::vector<std::pair<int, Eigen::Vector2d>>& constraints);

/// Coefficient of g after f from the coefficients of the factors:
/// (mu_f + (mu_g o f) tau) / (1 + conj(mu_f)(mu_g o f) tau), tau computed
/// per face from the planar map f.
VectorXcd compose_beltrami(const VectorXcd& mu_f, const PlanarMap& f, const VectorXcd& mu_g_on_image);

/// Solves the composition identity for the inner planar factor g (assumed
/// near-identity): returns mu_g such that an outer map with coefficient
/// mu_outer composed after g has total coefficient mu_total.
VectorXcd solve_inner_beltrami(const VectorXcd& mu_total, const VectorXcd& mu_outer);

/// Orientation sign of each face relative to the origin (positive for
/// outward counterclockwise faces of a star-shaped surface around 0).
VectorXi orientation_signs(const TriMesh& mesh, const MatrixXd& positions);

/// Number of faces whose orientation flips between the reference and test
/// positions. Both position sets must live on star-shaped surfaces centered
/// at the origin (spheres/ellipsoids here).
int count_flipped_faces(const TriMesh& mesh, const MatrixXd& reference, const MatrixXd& test);

/// Faces with nonpositive orientation sign (validity check for a single
/// parameterization).
int count_inverted_faces(const TriMesh& mesh, const MatrixXd& positions);

/// Removes fold-overs from a spherical map by per-hemisphere stereographic
/// LBS repair rounds (up to five). Flip-free input is returned unchanged.
/// Throws CorrectionFailed if flips survive all rounds.
MatrixXd overlap_correction_sphere(const TriMesh& mesh, const MatrixXd& initial,
                                   const MatrixXd& current);

/// Ellipsoidal variant: transports both maps to the unit sphere with the
/// rescaling (x/a, y/b, z/c), corrects there, and rescales back.
MatrixXd overlap_correction_ellipsoid(const TriMesh& mesh, const MatrixXd& initial,
                                      const MatrixXd& current, const EllipsoidRadii& radii);

} // namespace edemap
