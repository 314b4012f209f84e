#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>

#include "edemap/mesh.hpp"

namespace edemap {

/// Population and derived face/vertex densities. rho_face = population/area
/// holds exactly at construction; rho_vertex is the area-weighted
/// face-to-vertex average.
struct DensityField {
    VectorXd population;
    VectorXd rho_face;
    VectorXd rho_vertex;
};

DensityField make_density(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& population);

/// Recomputes rho_face/rho_vertex from the stored population and the
/// current geometry (the re-coupling step).
void recouple_density(const TriMesh& mesh, const MatrixXd& positions, DensityField& density);

/// Cotangent Laplacian: off-diagonal -(cot a + cot b)/2, diagonal minus the
/// row sum. Symmetric with zero row sums; positive semidefinite for
/// nonobtuse meshes. Cotangents are evaluated as dot/cross of edge vectors.
SparseMatrixd cotangent_laplacian(const TriMesh& mesh, const MatrixXd& positions);

/// Diagonal lumped mass: one third of the incident face areas.
VectorXd lumped_mass(const TriMesh& mesh, const MatrixXd& positions);

/// Solves the SPD system A x = b by sparse Cholesky; falls back to
/// Jacobi-preconditioned conjugate gradients (tol 1e-10, 10n iterations).
/// Throws SolveError with the achieved residual if neither reaches
/// ||Ax-b||/||b|| < 1e-10.
VectorXd solve_spd(const SparseMatrixd& A, const VectorXd& b);

/// Matrix-free variant reusing a prepared factorization for repeated solves
/// with identical sparsity.
class SpdSolver {
public:
    void analyze(const SparseMatrixd& A);
    void factorize(const SparseMatrixd& A);
    VectorXd solve(const VectorXd& b) const;

private:
    Eigen::SimplicialLDLT<SparseMatrixd> ldlt_;
    const SparseMatrixd* matrix_ = nullptr;
    bool analyzed_ = false;
    bool factorized_ = false;
};

/// One backward-Euler diffusion step: solve (A + dt L) rho_next = A rho.
/// Conserves the lumped mass 1^T A rho. Nonpositive output entries are
/// clamped to 1e-8 * mean(rho) and reported through clamped_count.
VectorXd diffusion_step(const VectorXd& rho_vertex, const SparseMatrixd& L, const VectorXd& mass,
                        double dt, int* clamped_count = nullptr);

/// Per-face density gradient of the piecewise-linear vertex field:
/// n x (rho_i e_jk + rho_j e_ki + rho_k e_ij) / (2 Area). Lies in the face
/// plane.
MatrixXd density_gradient(const TriMesh& mesh, const MatrixXd& positions, const VectorXd& rho_vertex);

} // namespace edemap
