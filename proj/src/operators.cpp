#include "edemap/operators.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <vector>

namespace edemap {

DensityField make_density(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& population) {
    if (population.size() != mesh.num_faces()) {
        throw ValidationError("population size does not match face count");
    }
    if ((population.array() <= 0.0).any()) {
        throw ValidationError("population must be positive");
    }
    DensityField d;
    d.population = population;
    recouple_density(mesh, positions, d);
    return d;
}

void recouple_density(const TriMesh& mesh, const MatrixXd& positions, DensityField& density) {
    const VectorXd areas = face_areas(mesh, positions);
    density.rho_face = density.population.array() / areas.array();
    density.rho_vertex = face_to_vertex_matrix(mesh, positions) * density.rho_face;
}

SparseMatrixd cotangent_laplacian(const TriMesh& mesh, const MatrixXd& positions) {
    const int nv = mesh.num_vertices();
    const int nf = mesh.num_faces();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(nf) * 12);
    for (int f = 0; f < nf; ++f) {
        const int i = mesh.F(f, 0), j = mesh.F(f, 1), k = mesh.F(f, 2);
        const Eigen::Vector3d pi = positions.row(i), pj = positions.row(j), pk = positions.row(k);
        // cotangent at each corner, stable dot/cross form
        auto cot = [](const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
            const double cross = u.cross(v).norm();
            if (cross <= 0.0) throw DegenerateFaceError("zero-area face in cotangent evaluation");
            return u.dot(v) / cross;
        };
        const double cot_i = cot(pj - pi, pk - pi); // opposite edge (j,k)
        const double cot_j = cot(pk - pj, pi - pj); // opposite edge (k,i)
        const double cot_k = cot(pi - pk, pj - pk); // opposite edge (i,j)
        const double wij = 0.5 * cot_k, wjk = 0.5 * cot_i, wki = 0.5 * cot_j;
        triplets.emplace_back(i, j, -wij);
        triplets.emplace_back(j, i, -wij);
        triplets.emplace_back(j, k, -wjk);
        triplets.emplace_back(k, j, -wjk);
        triplets.emplace_back(k, i, -wki);
        triplets.emplace_back(i, k, -wki);
        triplets.emplace_back(i, i, wij + wki);
        triplets.emplace_back(j, j, wij + wjk);
        triplets.emplace_back(k, k, wjk + wki);
    }
    SparseMatrixd L(nv, nv);
    L.setFromTriplets(triplets.begin(), triplets.end());
    return L;
}

VectorXd lumped_mass(const TriMesh& mesh, const MatrixXd& positions) {
    const VectorXd areas = face_areas(mesh, positions);
    VectorXd mass = VectorXd::Zero(mesh.num_vertices());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double third = areas(f) / 3.0;
        mass(mesh.F(f, 0)) += third;
        mass(mesh.F(f, 1)) += third;
        mass(mesh.F(f, 2)) += third;
    }
    return mass;
}

namespace {

VectorXd cg_fallback(const SparseMatrixd& A, const VectorXd& b) {
    Eigen::ConjugateGradient<SparseMatrixd, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(10 * A.rows());
    cg.compute(A);
    return cg.solve(b);
}

double relative_residual(const SparseMatrixd& A, const VectorXd& x, const VectorXd& b) {
    const double bn = b.norm();
    if (bn == 0.0) return (A * x).norm();
    return (A * x - b).norm() / bn;
}

} // namespace

VectorXd solve_spd(const SparseMatrixd& A, const VectorXd& b) {
    Eigen::SimplicialLDLT<SparseMatrixd> ldlt(A);
    VectorXd x;
    if (ldlt.info() == Eigen::Success) {
        x = ldlt.solve(b);
        if (relative_residual(A, x, b) < 1e-10) return x;
    }
    x = cg_fallback(A, b);
    const double res = relative_residual(A, x, b);
    if (res >= 1e-10) {
        throw SolveError("SPD solve failed, residual " + std::to_string(res));
    }
    return x;
}

void SpdSolver::analyze(const SparseMatrixd& A) {
    ldlt_.analyzePattern(A);
    analyzed_ = true;
    factorized_ = false;
}

void SpdSolver::factorize(const SparseMatrixd& A) {
    if (!analyzed_) ldlt_.analyzePattern(A);
    analyzed_ = true;
    ldlt_.factorize(A);
    matrix_ = &A;
    factorized_ = ldlt_.info() == Eigen::Success;
}

VectorXd SpdSolver::solve(const VectorXd& b) const {
    if (!matrix_) throw SolveError("SpdSolver used before factorize()");
    if (factorized_) {
        VectorXd x = ldlt_.solve(b);
        if (relative_residual(*matrix_, x, b) < 1e-10) return x;
    }
    VectorXd x = cg_fallback(*matrix_, b);
    const double res = relative_residual(*matrix_, x, b);
    if (res >= 1e-10) {
        throw SolveError("SPD solve failed, residual " + std::to_string(res));
    }
    return x;
}

VectorXd diffusion_step(const VectorXd& rho_vertex, const SparseMatrixd& L, const VectorXd& mass,
                        double dt, int* clamped_count) {
    if (!(dt > 0.0)) throw ValidationError("diffusion step size must be positive");
    SparseMatrixd A = dt * L;
    for (int i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += mass(i);
    const VectorXd rhs = mass.asDiagonal() * rho_vertex;
    VectorXd rho_next = solve_spd(A, rhs);

    // Obtuse triangles can break the discrete maximum principle; clamp so
    // the velocity field stays defined.
    int clamped = 0;
    const double floor = 1e-8 * rho_vertex.mean();
    for (int i = 0; i < rho_next.size(); ++i) {
        if (!(rho_next(i) > 0.0)) {
            rho_next(i) = floor;
            ++clamped;
        }
    }
    if (clamped_count) *clamped_count = clamped;
    return rho_next;
}

MatrixXd density_gradient(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& rho_vertex) {
    const int nf = mesh.num_faces();
    MatrixXd grad(nf, 3);
    for (int f = 0; f < nf; ++f) {
        const int i = mesh.F(f, 0), j = mesh.F(f, 1), k = mesh.F(f, 2);
        const Eigen::Vector3d pi = positions.row(i), pj = positions.row(j), pk = positions.row(k);
        const Eigen::Vector3d cross = (pj - pi).cross(pk - pi);
        const double two_area = cross.norm();
        if (two_area <= 0.0) throw DegenerateFaceError("zero-area face " + std::to_string(f));
        const Eigen::Vector3d n = cross / two_area;
        const Eigen::Vector3d e_jk = pk - pj;
        const Eigen::Vector3d e_ki = pi - pk;
        const Eigen::Vector3d e_ij = pj - pi;
        grad.row(f) =
            n.cross(rho_vertex(i) * e_jk + rho_vertex(j) * e_ki + rho_vertex(k) * e_ij) / two_area;
    }
    return grad;
}

} // namespace edemap
