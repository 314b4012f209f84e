#pragma once

#include <Eigen/Core>

#include <string>

#include "edemap/mesh.hpp"

namespace edemap {

/// Per-face metrics of a parameterization plus their summaries; everything
/// downstream reports comes from here.
struct DistortionReport {
    VectorXd d_area;       // per-face logged normalized area ratio
    double mean_abs_d_area = 0.0;
    double sd_abs_d_area = 0.0;
    VectorXd abs_mu;       // per-face |mu|
    double mean_abs_mu = 0.0;
    double var_normalized_density = 0.0; // Var(rho_V / mean(rho_V))
    int flipped = 0;
};

/// Logged area ratio per face, normalized by the total areas so that a
/// globally scaled image has zero distortion.
VectorXd area_distortion(const TriMesh& mesh, const MatrixXd& map_positions);

/// Variance of rho / mean(rho).
double density_variance(const VectorXd& rho_vertex);

/// R = sum_j |e_j/(e1+e2+e3) - 1/3|; zero only for equilateral triangles.
double face_regularity(double e1, double e2, double e3);

struct RemeshReport {
    double delta_size = 0.0;  // log(A_max / A_min)
    double delta_shape = 0.0; // mean face regularity
    VectorXd regularity;      // per-face R
    int vertex_count = 0;
};

RemeshReport remesh_quality(const TriMesh& mesh, const MatrixXd& positions);
inline RemeshReport remesh_quality(const TriMesh& mesh) { return remesh_quality(mesh, mesh.V); }

/// Full distortion report of a parameterization of `mesh`.
DistortionReport distortion_report(const TriMesh& mesh, const MatrixXd& map_positions,
                                   const VectorXd& population = VectorXd());

void write_distortion_csv(const std::string& path, const DistortionReport& report);

} // namespace edemap
