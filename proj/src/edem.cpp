#include "edemap/edem.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "edemap/conformal.hpp"
#include "edemap/qc.hpp"

namespace edemap {

double sd_over_mean(const VectorXd& rho) {
    const double mean = rho.mean();
    if (!(mean > 0.0)) throw NonpositiveDensityError("density mean is not positive");
    const double var = (rho.array() - mean).square().sum() / static_cast<double>(rho.size());
    return std::sqrt(var) / mean;
}

MatrixXd velocity_field(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& rho_vertex,
                        const MatrixXd& grad_rho_vertex) {
    (void)mesh;
    (void)positions;
    if ((rho_vertex.array() <= 0.0).any()) {
        throw NonpositiveDensityError("vertex density must be positive");
    }
    return -(grad_rho_vertex.array().colwise() / rho_vertex.array());
}

MatrixXd project_velocity(const MatrixXd& velocity, const MatrixXd& normals) {
    const VectorXd normal_part = (velocity.array() * normals.array()).rowwise().sum();
    return velocity - (normals.array().colwise() * normal_part.array()).matrix();
}

TraceRecord edem_step(const TriMesh& mesh, const MatrixXd& initial_positions, EdemState& state,
                      const EdemConfig& config, SpdSolver* solver, int* clamped) {
    TraceRecord rec;

    const SparseMatrixd L = cotangent_laplacian(mesh, state.positions);
    const VectorXd mass = lumped_mass(mesh, state.positions);

    VectorXd rho_next;
    int clamp_count = 0;
    if (solver) {
        SparseMatrixd A = config.dt * L;
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += mass(i);
        solver->factorize(A);
        rho_next = solver->solve(mass.asDiagonal() * state.density.rho_vertex);
        const double floor = 1e-8 * state.density.rho_vertex.mean();
        for (int i = 0; i < rho_next.size(); ++i) {
            if (!(rho_next(i) > 0.0)) {
                rho_next(i) = floor;
                ++clamp_count;
            }
        }
    } else {
        rho_next = diffusion_step(state.density.rho_vertex, L, mass, config.dt, &clamp_count);
    }
    if (clamped) *clamped += clamp_count;

    const MatrixXd grad_face = density_gradient(mesh, state.positions, rho_next);
    const SparseMatrixd M = face_to_vertex_matrix(mesh, state.positions);
    const MatrixXd grad_vertex = M * grad_face;

    const MatrixXd velocity = velocity_field(mesh, state.positions, rho_next, grad_vertex);
    const MatrixXd normals = vertex_normals_ellipsoid(state.positions, config.radii);
    const MatrixXd tangential = project_velocity(velocity, normals);

    // velocity already carries the downhill sign, so the tracer update adds it
    MatrixXd moved = state.positions + config.dt * tangential;
    rec.max_displacement = (config.dt * tangential).rowwise().norm().maxCoeff();
    const double bounding = std::max({config.radii.a, config.radii.b, config.radii.c});
    if (!(rec.max_displacement <= bounding) || !moved.allFinite()) {
        throw StepDiverged("vertex displacement " + std::to_string(rec.max_displacement) +
                           " exceeds the domain scale");
    }
    moved = project_to_ellipsoid(moved, config.radii);

    rec.flips_pre = count_flipped_faces(mesh, initial_positions, moved);
    if (rec.flips_pre > 0) {
        moved = overlap_correction_ellipsoid(mesh, initial_positions, moved, config.radii);
    }
    rec.flips_post = count_flipped_faces(mesh, initial_positions, moved);

    state.positions = moved;
    recouple_density(mesh, state.positions, state.density);
    rec.sd_over_mean = sd_over_mean(state.density.rho_vertex);
    return rec;
}

namespace {

EdemResult iterate(const TriMesh& mesh, const MatrixXd& f0, const EdemConfig& config,
                   const ProgressCallback& progress) {
    EdemResult result;
    result.initial_positions = f0;

    VectorXd population = config.population;
    if (population.size() == 0) population = face_areas(mesh, mesh.V); // "area" preset
    if (population.size() != mesh.num_faces()) {
        throw ValidationError("population size does not match face count");
    }

    EdemState state{f0, make_density(mesh, f0, population)};

    MatrixXd best_positions = state.positions;
    DensityField best_density = state.density;
    double best_sd = sd_over_mean(state.density.rho_vertex);
    int iters_since_best = 0;

    SpdSolver solver;
    {
        SparseMatrixd A = cotangent_laplacian(mesh, state.positions);
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0; // pattern with diagonal
        solver.analyze(A);
    }

    result.trace.stop = StopReason::IterationCap;
    for (int n = 0; n < config.n_max; ++n) {
        TraceRecord rec = edem_step(mesh, f0, state, config, &solver, &result.trace.clamped_densities);
        rec.iteration = n;
        result.trace.records.push_back(rec);
        if (progress) progress(rec);

        if (rec.sd_over_mean < best_sd * (1.0 - 1e-3)) {
            best_sd = rec.sd_over_mean;
            best_positions = state.positions;
            best_density = state.density;
            iters_since_best = 0;
        } else {
            if (rec.sd_over_mean < best_sd) {
                best_sd = rec.sd_over_mean;
                best_positions = state.positions;
                best_density = state.density;
            }
            ++iters_since_best;
        }

        if (rec.sd_over_mean < config.epsilon) {
            result.trace.stop = StopReason::Converged;
            break;
        }
        if (iters_since_best >= 10) {
            result.trace.stop = StopReason::Stalled;
            state.positions = best_positions;
            state.density = best_density;
            break;
        }
    }

    result.map = ParamMap{state.positions, config.radii};
    return result;
}

} // namespace

EdemResult run_edem(const TriMesh& mesh, const EdemConfig& config, const ProgressCallback& progress) {
    const ParamMap f0 = fecm(mesh, config.radii);
    return iterate(mesh, f0.positions, config, progress);
}

EdemResult run_edem_from(const TriMesh& mesh, const ParamMap& initial, const EdemConfig& config,
                         const ProgressCallback& progress) {
    return iterate(mesh, initial.positions, config, progress);
}

void write_trace_csv(const std::string& path, const EdemTrace& trace) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw ParseError("cannot write " + path);
    std::fprintf(out, "iteration,sd_over_mean,flips_pre,flips_post,max_disp\n");
    for (const TraceRecord& r : trace.records) {
        std::fprintf(out, "%d,%.17g,%d,%d,%.17g\n", r.iteration, r.sd_over_mean, r.flips_pre,
                     r.flips_post, r.max_displacement);
    }
    std::fclose(out);
}

} // namespace edemap
