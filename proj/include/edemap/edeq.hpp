#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "edemap/edem.hpp"
#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"

namespace edemap {

struct EdeqConfig {
    double dt = 0.1;
    double db = 0.1;
    double dc = 0.1;
    int K = 5;          // descent iterations per fixed radii
    double alpha = 1.0; // weight of the conformality term
    double epsilon = 1e-5;
    int n_max = 300;
    EllipsoidRadii initial_radii;
    VectorXd population; // empty means "area" preset
};

struct EnergyRecord {
    int iteration = 0;
    double e_edem = 0.0;
    double e_bc = 0.0;
    double e_total = 0.0;
    double a = 0.0, b = 0.0, c = 0.0;
    int flips = 0;
};

struct ShapeUpdateRecord {
    int iteration = 0;
    int m = 0;          // update counter; steps scale by 0.9^m
    double db_m = 0.0;
    double dc_m = 0.0;
    double e2_before = 0.0;
    double e2_after = 0.0;
    EllipsoidRadii radii_before;
    EllipsoidRadii radii_after;
};

struct EnergyReport {
    std::vector<EnergyRecord> records;
    std::vector<ShapeUpdateRecord> shape_updates;
    StopReason stop = StopReason::Converged;
};

struct EdeqResult {
    ParamMap map; // positions on the final ellipsoid
    EnergyReport report;
    MatrixXd initial_positions;
    EllipsoidRadii initial_radii;
};

/// Density-equalization residual: sum over faces of
/// Area(T) ||grad rho_F(T) / rho_F(T)||^2. Zero for uniform density and
/// invariant under scaling the population.
double energy_edem(const TriMesh& mesh, const MatrixXd& positions, const DensityField& density);

/// Conformal distortion: sum over faces of Area(T0) |mu(T)|^2, measured
/// against the initial parameterization.
double energy_bc(const TriMesh& mesh, const MatrixXd& source_t0, const MatrixXd& current);

/// One descent iteration of the density term; same mechanics as edem_step.
TraceRecord e1_descent_step(const TriMesh& mesh, const MatrixXd& reference, EdemState& state,
                            const EdemConfig& step_config, SpdSolver* solver = nullptr,
                            int* clamped = nullptr);

/// Greedy radius update: evaluates the combined energy on the nine
/// (a, b + kb db, c + kc dc) candidates with the positions carried over by
/// the anisotropic rescale, and keeps the argmin. Ties prefer the incumbent,
/// then fewer changed radii, then lexicographic (kb, kc). Never increases
/// the energy. The first radius is never changed.
struct ShapeUpdateOutcome {
    EllipsoidRadii radii;
    MatrixXd positions;
    double e2_before = 0.0;
    double e2_after = 0.0;
};
ShapeUpdateOutcome shape_update(const TriMesh& mesh, const MatrixXd& positions,
                                const DensityField& density, const MatrixXd& f0,
                                const EllipsoidRadii& radii, double db_m, double dc_m, double alpha);

EdeqResult run_edeq(const TriMesh& mesh, const EdeqConfig& config,
                    const ProgressCallback& progress = nullptr);

/// Variant starting from a caller-provided initial parameterization.
EdeqResult run_edeq_from(const TriMesh& mesh, const ParamMap& initial, const EdeqConfig& config,
                         const ProgressCallback& progress = nullptr);

void write_energy_csv(const std::string& path, const EnergyReport& report);

} // namespace edemap
