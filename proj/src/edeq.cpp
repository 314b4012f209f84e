#include "edemap/edeq.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "edemap/conformal.hpp"
#include "edemap/qc.hpp"

namespace edemap {

double energy_edem(const TriMesh& mesh, const MatrixXd& positions, const DensityField& density) {
    if ((density.rho_face.array() <= 0.0).any()) {
        throw NonpositiveDensityError("face density must be positive");
    }
    const VectorXd areas = face_areas(mesh, positions);
    const MatrixXd grad = density_gradient(mesh, positions, density.rho_vertex);
    double energy = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double g2 = grad.row(f).squaredNorm();
        energy += areas(f) * g2 / (density.rho_face(f) * density.rho_face(f));
    }
    return energy;
}

double energy_bc(const TriMesh& mesh, const MatrixXd& source_t0, const MatrixXd& current) {
    const VectorXcd mu = beltrami_of_surface_map(mesh, source_t0, current);
    const VectorXd areas0 = face_areas(mesh, source_t0);
    double energy = 0.0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        energy += areas0(f) * std::norm(mu(f));
    }
    return energy;
}

TraceRecord e1_descent_step(const TriMesh& mesh, const MatrixXd& reference, EdemState& state,
                            const EdemConfig& step_config, SpdSolver* solver, int* clamped) {
    // the descent direction of the density term is exactly the projected
    // velocity of the diffusion flow
    return edem_step(mesh, reference, state, step_config, solver, clamped);
}

ShapeUpdateOutcome shape_update(const TriMesh& mesh, const MatrixXd& positions,
                                const DensityField& density, const MatrixXd& f0,
                                const EllipsoidRadii& radii, double db_m, double dc_m, double alpha) {
    // candidates in tie-break priority: incumbent, then one radius changed,
    // then both, lexicographic in (kb, kc)
    static constexpr std::array<std::array<int, 2>, 9> kCandidates = {
        {{0, 0}, {-1, 0}, {0, -1}, {0, 1}, {1, 0}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}}};

    auto evaluate = [&](double b_new, double c_new, MatrixXd& cand_positions) {
        cand_positions = positions;
        cand_positions.col(1) *= b_new / radii.b;
        cand_positions.col(2) *= c_new / radii.c;
        DensityField cand_density = density;
        recouple_density(mesh, cand_positions, cand_density);
        return energy_edem(mesh, cand_positions, cand_density) +
               alpha * energy_bc(mesh, f0, cand_positions);
    };

    ShapeUpdateOutcome outcome;
    outcome.radii = radii;
    outcome.positions = positions;
    {
        MatrixXd incumbent;
        outcome.e2_before = evaluate(radii.b, radii.c, incumbent);
    }
    outcome.e2_after = outcome.e2_before;

    for (const auto& [kb, kc] : kCandidates) {
        if (kb == 0 && kc == 0) continue; // incumbent already evaluated
        const double b_new = radii.b + kb * db_m;
        const double c_new = radii.c + kc * dc_m;
        if (!(b_new > 0.0) || !(c_new > 0.0)) continue;
        MatrixXd cand_positions;
        const double e2 = evaluate(b_new, c_new, cand_positions);
        if (e2 < outcome.e2_after - 1e-12) {
            outcome.e2_after = e2;
            outcome.radii = EllipsoidRadii(radii.a, b_new, c_new);
            outcome.positions = std::move(cand_positions);
        }
    }
    return outcome;
}

namespace {

EdeqResult iterate(const TriMesh& mesh, const MatrixXd& f0, const EdeqConfig& config,
                   const ProgressCallback& progress) {
    EdeqResult result;
    result.initial_positions = f0;
    result.initial_radii = config.initial_radii;

    VectorXd population = config.population;
    if (population.size() == 0) population = face_areas(mesh, mesh.V);
    if (population.size() != mesh.num_faces()) {
        throw ValidationError("population size does not match face count");
    }

    EllipsoidRadii radii = config.initial_radii;
    EdemState state{f0, make_density(mesh, f0, population)};
    MatrixXd reference = f0; // f0 carried to the current ellipsoid by rescaling

    SpdSolver solver;
    {
        SparseMatrixd A = cotangent_laplacian(mesh, state.positions);
        for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += 1.0;
        solver.analyze(A);
    }

    double prev_energy = energy_edem(mesh, state.positions, state.density) +
                         config.alpha * energy_bc(mesh, f0, state.positions);
    int clamped = 0;

    result.report.stop = StopReason::IterationCap;
    for (int n = 0; n < config.n_max; ++n) {
        EdemConfig step;
        step.dt = config.dt;
        step.radii = radii;
        TraceRecord rec = e1_descent_step(mesh, reference, state, step, &solver, &clamped);
        rec.iteration = n;

        if (n > 0 && config.K > 0 && n % config.K == 0) {
            const int m = n / config.K;
            const double decay = std::pow(0.9, m);
            ShapeUpdateOutcome outcome =
                shape_update(mesh, state.positions, state.density, f0, radii,
                             decay * config.db, decay * config.dc, config.alpha);
            ShapeUpdateRecord su;
            su.iteration = n;
            su.m = m;
            su.db_m = decay * config.db;
            su.dc_m = decay * config.dc;
            su.e2_before = outcome.e2_before;
            su.e2_after = outcome.e2_after;
            su.radii_before = radii;
            su.radii_after = outcome.radii;
            result.report.shape_updates.push_back(su);

            if (outcome.radii.b != radii.b || outcome.radii.c != radii.c) {
                reference.col(1) *= outcome.radii.b / radii.b;
                reference.col(2) *= outcome.radii.c / radii.c;
                state.positions = outcome.positions;
                radii = outcome.radii;
                recouple_density(mesh, state.positions, state.density);
            }
        }

        EnergyRecord er;
        er.iteration = n;
        er.e_edem = energy_edem(mesh, state.positions, state.density);
        er.e_bc = energy_bc(mesh, f0, state.positions);
        er.e_total = er.e_edem + config.alpha * er.e_bc;
        er.a = radii.a;
        er.b = radii.b;
        er.c = radii.c;
        er.flips = rec.flips_post;
        result.report.records.push_back(er);
        if (progress) progress(rec);

        const double denom = std::abs(prev_energy);
        const double change = std::abs(er.e_total - prev_energy);
        prev_energy = er.e_total;
        if ((denom > 0.0 && change / denom < config.epsilon) ||
            (denom == 0.0 && change == 0.0)) {
            result.report.stop = StopReason::Converged;
            break;
        }
    }

    result.map = ParamMap{state.positions, radii};
    return result;
}

} // namespace

EdeqResult run_edeq(const TriMesh& mesh, const EdeqConfig& config, const ProgressCallback& progress) {
    const ParamMap f0 = fecm(mesh, config.initial_radii);
    return iterate(mesh, f0.positions, config, progress);
}

EdeqResult run_edeq_from(const TriMesh& mesh, const ParamMap& initial, const EdeqConfig& config,
                         const ProgressCallback& progress) {
    if (std::abs(initial.radii.a - config.initial_radii.a) > 1e-12 ||
        std::abs(initial.radii.b - config.initial_radii.b) > 1e-12 ||
        std::abs(initial.radii.c - config.initial_radii.c) > 1e-12) {
        throw ValidationError("initial map radii do not match the configured radii");
    }
    return iterate(mesh, initial.positions, config, progress);
}

void write_energy_csv(const std::string& path, const EnergyReport& report) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw ParseError("cannot write " + path);
    std::fprintf(out, "iteration,E_edem,E_bc,E,a,b,c,flips\n");
    for (const EnergyRecord& r : report.records) {
        std::fprintf(out, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.iteration, r.e_edem, r.e_bc,
                     r.e_total, r.a, r.b, r.c, r.flips);
    }
    std::fclose(out);
}

} // namespace edemap
