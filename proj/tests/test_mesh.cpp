#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "edemap/ellipsoid.hpp"
#include "edemap/mesh.hpp"
#include "edemap/qc.hpp"
#include "helpers.hpp"

using namespace edemap;
using namespace edemap::testing;

namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
    const std::string path = temp_dir() + "/" + name;
    std::ofstream out(path);
    out << contents;
    return path;
}

} // namespace

TEST_CASE("load_mesh: regular tetrahedron OBJ") {
    const double s = 1.0 / (2.0 * std::sqrt(2.0));
    std::ostringstream obj;
    obj << "v " << s << " " << s << " " << s << "\n"
        << "v " << s << " " << -s << " " << -s << "\n"
        << "v " << -s << " " << s << " " << -s << "\n"
        << "v " << -s << " " << -s << " " << s << "\n"
        << "f 1 2 3\nf 1 4 2\nf 1 3 4\nf 2 4 3\n";
    const TriMesh mesh = load_mesh(write_temp("tetra.obj", obj.str()));
    CHECK(mesh.num_vertices() == 4);
    CHECK(mesh.num_edges() == 6);
    CHECK(mesh.num_faces() == 4);
    CHECK(mesh.num_vertices() - mesh.num_edges() + mesh.num_faces() == 2);
}

TEST_CASE("load_mesh: icosahedron counts") {
    const TriMesh ico = icosahedron();
    std::ostringstream obj;
    for (int i = 0; i < ico.num_vertices(); ++i) {
        obj << "v " << ico.V(i, 0) << " " << ico.V(i, 1) << " " << ico.V(i, 2) << "\n";
    }
    for (int f = 0; f < ico.num_faces(); ++f) {
        obj << "f " << ico.F(f, 0) + 1 << " " << ico.F(f, 1) + 1 << " " << ico.F(f, 2) + 1 << "\n";
    }
    const TriMesh mesh = load_mesh(write_temp("ico.obj", obj.str()));
    CHECK(mesh.num_vertices() == 12);
    CHECK(mesh.num_edges() == 30);
    CHECK(mesh.num_faces() == 20);
}

TEST_CASE("load_mesh: open surface rejected") {
    const std::string path = write_temp("tri.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    CHECK_THROWS_AS(load_mesh(path), TopologyError);
}

TEST_CASE("load_mesh: OFF format") {
    const std::string off =
        "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
    const TriMesh mesh = load_mesh(write_temp("tetra.off", off));
    CHECK(mesh.num_vertices() == 4);
    CHECK(mesh.num_faces() == 4);
}

TEST_CASE("load_mesh: unsupported extension") {
    CHECK_THROWS_AS(load_mesh("mesh.ply"), ParseError);
}

TEST_CASE("make_mesh: inconsistent orientation is repaired") {
    TriMesh ico = icosahedron();
    MatrixXi F = ico.F;
    std::swap(F(3, 1), F(3, 2)); // flip one face
    const TriMesh repaired = make_mesh(ico.V, F);
    CHECK(count_inverted_faces(repaired, repaired.V) == 0);
    // every directed edge appears once in each direction
    for (int e = 0; e < repaired.num_edges(); ++e) {
        int forward = 0, backward = 0;
        for (int f = 0; f < repaired.num_faces(); ++f) {
            for (int k = 0; k < 3; ++k) {
                if (repaired.F(f, k) == repaired.E(e, 0) &&
                    repaired.F(f, (k + 1) % 3) == repaired.E(e, 1)) {
                    ++forward;
                }
                if (repaired.F(f, k) == repaired.E(e, 1) &&
                    repaired.F(f, (k + 1) % 3) == repaired.E(e, 0)) {
                    ++backward;
                }
            }
        }
        CHECK(forward == 1);
        CHECK(backward == 1);
    }
}

TEST_CASE("make_mesh: degenerate face rejected") {
    MatrixXd V(4, 3);
    V << 0, 0, 0, 1, 0, 0, 0.5, 0, 0, 0, 0, 1; // third point collinear
    MatrixXi F(4, 3);
    F << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
    CHECK_THROWS_AS(make_mesh(V, F), DegenerateFaceError);
}

TEST_CASE("make_mesh: non-manifold edge rejected") {
    MatrixXd V(5, 3);
    V << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, -1;
    MatrixXi F(6, 3);
    F << 0, 1, 2, 0, 2, 3, 0, 3, 1, 0, 1, 4, 0, 4, 2, 1, 3, 2;
    CHECK_THROWS_AS(make_mesh(V, F), TopologyError);
}

TEST_CASE("face_areas: analytic values") {
    const TriMesh corner = corner_tetrahedron();
    const VectorXd areas = face_areas(corner, corner.V);
    // face 0 is the right triangle with legs 1
    CHECK(areas(0) == doctest::Approx(0.5).epsilon(1e-14));

    const TriMesh tetra = tetrahedron();
    const VectorXd eq = face_areas(tetra, tetra.V);
    for (int f = 0; f < 4; ++f) {
        CHECK(eq(f) == doctest::Approx(std::sqrt(3.0) / 4.0).epsilon(1e-12));
    }

    const VectorXd scaled = face_areas(tetra, MatrixXd(3.0 * tetra.V));
    for (int f = 0; f < 4; ++f) {
        CHECK(scaled(f) == doctest::Approx(9.0 * eq(f)).epsilon(1e-12));
    }
}

TEST_CASE("face_to_vertex_matrix: row-stochastic with incidence pattern") {
    const TriMesh tetra = tetrahedron();
    const SparseMatrixd M = face_to_vertex_matrix(tetra, tetra.V);
    CHECK(M.rows() == 4);
    CHECK(M.cols() == 4);
    const MatrixXd dense = MatrixXd(M);
    for (int i = 0; i < 4; ++i) {
        int nnz = 0;
        for (int j = 0; j < 4; ++j) {
            if (dense(i, j) != 0.0) {
                ++nnz;
                CHECK(dense(i, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
            }
        }
        CHECK(nnz == 3);
        CHECK(dense.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }

    const TriMesh blob = blob_model(2);
    const SparseMatrixd Mb = face_to_vertex_matrix(blob, blob.V);
    const VectorXd row_sums = Mb * VectorXd::Ones(blob.num_faces());
    CHECK((row_sums.array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("vertex_normals_ellipsoid: poles, axes, sphere") {
    const EllipsoidRadii radii(1.5, 2.0, 4.0);
    MatrixXd P(2, 3);
    P << 0, 0, 4, 1.5, 0, 0;
    const MatrixXd N = vertex_normals_ellipsoid(P, radii);
    CHECK((N.row(0) - Eigen::RowVector3d(0, 0, 1)).norm() < 1e-12);
    CHECK((N.row(1) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-12);

    const TriMesh sphere = icosphere(2);
    const MatrixXd Ns = vertex_normals_ellipsoid(sphere.V, EllipsoidRadii(1, 1, 1));
    CHECK((Ns - sphere.V).cwiseAbs().maxCoeff() < 1e-12);

    // normals parallel to the ellipsoid-equation gradient
    const TriMesh emesh = ellipsoid_mesh(radii, 2);
    const MatrixXd Ne = vertex_normals_ellipsoid(emesh.V, radii);
    for (int i = 0; i < emesh.num_vertices(); ++i) {
        Eigen::Vector3d grad(emesh.V(i, 0) / (radii.a * radii.a), emesh.V(i, 1) / (radii.b * radii.b),
                             emesh.V(i, 2) / (radii.c * radii.c));
        const double cosine = Ne.row(i).dot(grad.normalized());
        CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("project_to_ellipsoid: examples and idempotency") {
    MatrixXd P(3, 3);
    P << 2, 0, 0, 0, 4, 0, 0.3, -0.2, 0.1;

    const MatrixXd on_sphere = project_to_ellipsoid(P, EllipsoidRadii(1, 1, 1));
    CHECK((on_sphere.row(0) - Eigen::RowVector3d(1, 0, 0)).norm() < 1e-12);

    const EllipsoidRadii radii(1, 2, 4);
    const MatrixXd on_ell = project_to_ellipsoid(P, radii);
    CHECK((on_ell.row(1) - Eigen::RowVector3d(0, 2, 0)).norm() < 1e-12);
    CHECK((ellipsoid_equation(on_ell, radii).array() - 1.0).abs().maxCoeff() < 1e-12);

    const MatrixXd twice = project_to_ellipsoid(on_ell, radii);
    CHECK((twice - on_ell).cwiseAbs().maxCoeff() < 1e-12);

    MatrixXd origin(1, 3);
    origin << 0, 0, 0;
    CHECK_THROWS_AS(project_to_ellipsoid(origin, radii), ZeroVectorError);
}

TEST_CASE("save_obj / load_mesh round trip is exact") {
    const TriMesh blob = blob_model(1);
    const std::string path = temp_dir() + "/roundtrip.obj";
    save_obj(path, blob.V, blob.F);
    const TriMesh again = load_mesh(path);
    REQUIRE(again.num_vertices() == blob.num_vertices());
    CHECK((again.V - blob.V).cwiseAbs().maxCoeff() == 0.0);
    CHECK((again.F - blob.F).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("load_population_csv validates") {
    const std::string good = write_temp("pop.csv", "1.0\n2.5\n0.5\n3\n");
    const VectorXd pop = load_population_csv(good, 4);
    CHECK(pop(1) == 2.5);
    const std::string zero = write_temp("pop0.csv", "1.0\n0\n0.5\n3\n");
    CHECK_THROWS_AS(load_population_csv(zero, 4), ParseError);
    CHECK_THROWS_AS(load_population_csv(good, 5), ParseError);
}
