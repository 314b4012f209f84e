#pragma once

#include <Eigen/Core>

#include <functional>
#include <string>
#include <vector>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"
#include "edemap/operators.hpp"

namespace edemap {

struct EdemConfig {
    double dt = 0.1;
    double epsilon = 1e-3;
    int n_max = 300;
    EllipsoidRadii radii;
    VectorXd population; // per face; empty means "area" preset
};

struct TraceRecord {
    int iteration = 0;
    double sd_over_mean = 0.0;
    int flips_pre = 0;
    int flips_post = 0;
    double max_displacement = 0.0;
};

enum class StopReason { Converged, IterationCap, Stalled };

struct EdemTrace {
    std::vector<TraceRecord> records;
    StopReason stop = StopReason::Converged;
    int clamped_densities = 0; // diffusion positivity clamps over the run
};

struct EdemResult {
    ParamMap map;
    EdemTrace trace;
    MatrixXd initial_positions; // the conformal initialization f0
};

/// Velocity of the density flow at the vertices: -grad(rho)/rho averaged
/// from faces to vertices. Uniform density gives the zero field.
MatrixXd velocity_field(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& rho_vertex,
                        const MatrixXd& grad_rho_vertex);

/// Removes the normal component: v - (v.n)n.
MatrixXd project_velocity(const MatrixXd& velocity, const MatrixXd& normals);

/// State advanced by one diffusion/transport iteration.
struct EdemState {
    MatrixXd positions;
    DensityField density;
};

/// One iteration of the density-equalizing flow on the ellipsoid: implicit
/// diffusion of the vertex density, projected velocity update of the
/// positions, re-projection onto the ellipsoid, fold-over correction
/// against the initial map, and density re-coupling.
TraceRecord edem_step(const TriMesh& mesh, const MatrixXd& initial_positions, EdemState& state,
                      const EdemConfig& config, SpdSolver* solver = nullptr, int* clamped = nullptr);

using ProgressCallback = std::function<void(const TraceRecord&)>;

/// The full pipeline: conformal initialization, then iterations until
/// sd(rho_V)/mean(rho_V) < epsilon or the iteration cap. A run that makes
/// no progress for ten iterations stops early and returns the best map
/// seen.
EdemResult run_edem(const TriMesh& mesh, const EdemConfig& config,
                    const ProgressCallback& progress = nullptr);

/// Same iteration driven from an externally supplied initial map (used by
/// the quasi-conformal extension and by tests).
EdemResult run_edem_from(const TriMesh& mesh, const ParamMap& initial, const EdemConfig& config,
                         const ProgressCallback& progress = nullptr);

/// sd(rho)/mean(rho), the stopping functional.
double sd_over_mean(const VectorXd& rho);

void write_trace_csv(const std::string& path, const EdemTrace& trace);

} // namespace edemap
