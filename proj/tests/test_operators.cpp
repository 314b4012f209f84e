#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "edemap/operators.hpp"
#include "edemap/qc.hpp"
#include "helpers.hpp"

using namespace edemap;
using namespace edemap::testing;

TEST_CASE("cotangent_laplacian: regular tetrahedron analytic weights") {
    const TriMesh tetra = tetrahedron();
    const MatrixXd L = MatrixXd(cotangent_laplacian(tetra, tetra.V));
    const double w = 1.0 / std::sqrt(3.0); // (cot60 + cot60)/2
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i == j) {
                CHECK(std::abs(L(i, j) - 3.0 * w) < 1e-12);
            } else {
                CHECK(std::abs(L(i, j) + w) < 1e-12);
            }
        }
    }
}

TEST_CASE("cotangent_laplacian: zero row sums and symmetry") {
    const TriMesh blob = blob_model(2);
    const SparseMatrixd L = cotangent_laplacian(blob, blob.V);
    const VectorXd ones = VectorXd::Ones(blob.num_vertices());
    const double max_diag = MatrixXd(L).diagonal().cwiseAbs().maxCoeff();
    CHECK((L * ones).cwiseAbs().maxCoeff() < 1e-10 * max_diag);
    CHECK((MatrixXd(L) - MatrixXd(L).transpose()).cwiseAbs().maxCoeff() < 1e-12 * max_diag);
}

TEST_CASE("cotangent_laplacian: isometry invariance") {
    const TriMesh blob = blob_model(1);
    Eigen::Matrix3d R;
    const double t = 0.7;
    R << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
    const MatrixXd rotated = (blob.V * R.transpose()).rowwise() + Eigen::RowVector3d(0.3, -1.0, 2.0);
    const MatrixXd L0 = MatrixXd(cotangent_laplacian(blob, blob.V));
    const MatrixXd L1 = MatrixXd(cotangent_laplacian(blob, rotated));
    CHECK((L0 - L1).cwiseAbs().maxCoeff() < 1e-12 * L0.diagonal().maxCoeff());
}

TEST_CASE("lumped_mass: analytic tetrahedron and area total") {
    const TriMesh tetra = tetrahedron();
    const VectorXd mass = lumped_mass(tetra, tetra.V);
    for (int i = 0; i < 4; ++i) {
        CHECK(mass(i) == doctest::Approx(std::sqrt(3.0) / 4.0).epsilon(1e-12));
    }

    const TriMesh peanut = peanut_model(2);
    const VectorXd m = lumped_mass(peanut, peanut.V);
    const double total_area = face_areas(peanut, peanut.V).sum();
    CHECK(m.sum() == doctest::Approx(total_area).epsilon(1e-10));

    const VectorXd ms = lumped_mass(peanut, MatrixXd(2.5 * peanut.V));
    CHECK((ms - 6.25 * m).cwiseAbs().maxCoeff() < 1e-10 * m.maxCoeff());
}

TEST_CASE("diffusion_step: uniform density is a fixed point") {
    const TriMesh blob = blob_model(2);
    const SparseMatrixd L = cotangent_laplacian(blob, blob.V);
    const VectorXd mass = lumped_mass(blob, blob.V);
    const VectorXd rho = VectorXd::Constant(blob.num_vertices(), 3.7);
    const VectorXd next = diffusion_step(rho, L, mass, 0.1);
    CHECK((next.array() - 3.7).abs().maxCoeff() < 1e-12);
}

TEST_CASE("diffusion_step: lumped mass conservation") {
    const TriMesh peanut = peanut_model(2);
    const SparseMatrixd L = cotangent_laplacian(peanut, peanut.V);
    const VectorXd mass = lumped_mass(peanut, peanut.V);
    VectorXd rho(peanut.num_vertices());
    for (int i = 0; i < rho.size(); ++i) rho(i) = 1.0 + 0.8 * std::sin(5.0 * peanut.V(i, 2));
    const VectorXd next = diffusion_step(rho, L, mass, 0.1);
    const double before = mass.dot(rho);
    const double after = mass.dot(next);
    CHECK(std::abs(after - before) < 1e-8 * std::abs(before));
}

TEST_CASE("diffusion_step: dense 4x4 oracle on the tetrahedron") {
    const TriMesh tetra = tetrahedron();
    const SparseMatrixd L = cotangent_laplacian(tetra, tetra.V);
    const VectorXd mass = lumped_mass(tetra, tetra.V);
    VectorXd rho(4);
    rho << 2.0, 2.0, 1.0, 1.0;
    const VectorXd got = diffusion_step(rho, L, mass, 0.1);

    // independent oracle: analytic matrices, dense solve
    const double w = 1.0 / std::sqrt(3.0);
    MatrixXd Ld = MatrixXd::Constant(4, 4, -w);
    Ld.diagonal().setConstant(3.0 * w);
    MatrixXd Ad = MatrixXd::Zero(4, 4);
    Ad.diagonal().setConstant(std::sqrt(3.0) / 4.0);
    const VectorXd expected = (Ad + 0.1 * Ld).fullPivLu().solve(Ad * rho);
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("diffusion_step: variance decreases for linear perturbations") {
    const TriMesh sphere = icosphere(3);
    const SparseMatrixd L = cotangent_laplacian(sphere, sphere.V);
    const VectorXd mass = lumped_mass(sphere, sphere.V);
    for (const double eps : {0.1, 0.5}) {
        const VectorXd rho = VectorXd::Ones(sphere.num_vertices()) + eps * sphere.V.col(2);
        const VectorXd next = diffusion_step(rho, L, mass, 0.1);
        auto variance = [](const VectorXd& v) {
            const double m = v.mean();
            return (v.array() - m).square().sum() / static_cast<double>(v.size());
        };
        CHECK(variance(next) < variance(rho));
        CHECK((next.array() > 0.0).all());
    }
}

TEST_CASE("density_gradient: uniform field vanishes, linear field reproduced") {
    const TriMesh corner = corner_tetrahedron();
    const VectorXd uniform = VectorXd::Constant(4, 2.0);
    CHECK(density_gradient(corner, corner.V, uniform).cwiseAbs().maxCoeff() < 1e-12);

    // face 0 lies in z = 0; rho = x there, gradient must be (1,0,0)
    VectorXd rho = corner.V.col(0);
    const MatrixXd grad = density_gradient(corner, corner.V, rho);
    CHECK((grad.row(0) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("density_gradient: tangential to every face") {
    const TriMesh blob = blob_model(2);
    VectorXd rho(blob.num_vertices());
    for (int i = 0; i < rho.size(); ++i) rho(i) = 1.0 + 0.5 * std::cos(3.0 * blob.V(i, 0));
    const MatrixXd grad = density_gradient(blob, blob.V, rho);
    const MatrixXd normals = face_normals(blob, blob.V);
    for (int f = 0; f < blob.num_faces(); ++f) {
        const double mag = grad.row(f).norm();
        if (mag > 0.0) {
            CHECK(std::abs(grad.row(f).dot(normals.row(f))) < 1e-10 * mag);
        }
    }
}

TEST_CASE("solve_spd: small analytic systems") {
    SparseMatrixd I(3, 3);
    I.setIdentity();
    VectorXd b(3);
    b << 1, -2, 3;
    CHECK((solve_spd(I, b) - b).norm() < 1e-12);

    SparseMatrixd A(2, 2);
    A.insert(0, 0) = 2.0;
    A.insert(0, 1) = 1.0;
    A.insert(1, 0) = 1.0;
    A.insert(1, 1) = 2.0;
    A.makeCompressed();
    VectorXd rhs(2);
    rhs << 3, 3;
    const VectorXd x = solve_spd(A, rhs);
    CHECK(std::abs(x(0) - 1.0) < 1e-12);
    CHECK(std::abs(x(1) - 1.0) < 1e-12);
}

TEST_CASE("solve_spd: random SPD versus dense factorization oracle") {
    std::mt19937 rng(42);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 50;
    MatrixXd R(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) R(i, j) = gauss(rng);
    }
    const MatrixXd dense = R.transpose() * R + 5.0 * MatrixXd::Identity(n, n);
    const SparseMatrixd sparse = dense.sparseView();
    VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = gauss(rng);
    const VectorXd expected = dense.llt().solve(b);
    CHECK((solve_spd(sparse, b) - expected).norm() < 1e-9 * expected.norm());
}

TEST_CASE("make_density: coupling invariants") {
    const TriMesh blob = blob_model(2);
    VectorXd pop = face_areas(blob, blob.V) * 2.0;
    const DensityField d = make_density(blob, blob.V, pop);
    const VectorXd areas = face_areas(blob, blob.V);
    CHECK((d.rho_face.array() * areas.array() - pop.array()).abs().maxCoeff() < 1e-14 * pop.maxCoeff());
    const VectorXd rv = face_to_vertex_matrix(blob, blob.V) * d.rho_face;
    CHECK((d.rho_vertex - rv).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d.rho_vertex.array() - 2.0).abs().maxCoeff() < 1e-12);

    VectorXd bad = pop;
    bad(0) = 0.0;
    CHECK_THROWS_AS(make_density(blob, blob.V, bad), ValidationError);
}
