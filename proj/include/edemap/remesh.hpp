#pragma once

#include <Eigen/Core>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"

namespace edemap {

/// Subdivided icosahedron projected onto the unit sphere;
/// |V| = 10 * 4^level + 2.
TriMesh icosphere(int level);

/// Near-uniform closed mesh on the ellipsoid with the requested vertex
/// count (hit exactly, which is within the +-1% contract): a subdivided
/// icosahedron is scaled onto the ellipsoid, decimated by shortest-edge
/// collapses to the target count, and relaxed by tangential smoothing with
/// local edge flips.
TriMesh uniform_ellipsoid_mesh(const EllipsoidRadii& radii, int target_vertices);

/// Transfers a sampling of the parameter ellipsoid back onto the original
/// surface through the inverse parameterization: each sample is located in
/// the parameterization (radial barycentric containment on the unit-sphere
/// rescaling, smallest-residual tie-break) and the source position is
/// interpolated barycentrically. Connectivity of `samples` is preserved.
TriMesh pull_back(const TriMesh& source_mesh, const ParamMap& param, const TriMesh& samples);

} // namespace edemap
