#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "edemap/ellipsoid.hpp"
#include "edemap/qc.hpp"
#include "helpers.hpp"

using namespace edemap;
using namespace edemap::testing;
using Complex = std::complex<double>;

namespace {

// n x n unit-square grid, counterclockwise triangles
void make_grid(int n, MatrixXd& uv, MatrixXi& F) {
    uv.resize(n * n, 2);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            uv.row(j * n + i) << static_cast<double>(i) / (n - 1), static_cast<double>(j) / (n - 1);
        }
    }
    F.resize(2 * (n - 1) * (n - 1), 3);
    int row = 0;
    for (int j = 0; j + 1 < n; ++j) {
        for (int i = 0; i + 1 < n; ++i) {
            const int a = j * n + i, b = j * n + i + 1, c = (j + 1) * n + i + 1, d = (j + 1) * n + i;
            F.row(row++) << a, b, c;
            F.row(row++) << a, c, d;
        }
    }
}

std::vector<int> boundary_vertices(int n) {
    std::vector<int> out;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (i == 0 || j == 0 || i == n - 1 || j == n - 1) out.push_back(j * n + i);
        }
    }
    return out;
}

// smooth perturbation map with sup-face |mu| capped at the requested level
MatrixXd random_qc_map(const MatrixXd& uv, const MatrixXi& F, std::mt19937& rng, double mu_cap) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const double ax = 2.0 + unif(rng), ay = 2.0 + unif(rng);
    const double px = unif(rng) * 3.0, py = unif(rng) * 3.0;
    const Complex c1(0.25 * unif(rng), 0.25 * unif(rng));
    const Complex c2(0.25 * unif(rng), 0.25 * unif(rng));

    MatrixXd target = uv;
    auto apply = [&](double scale) {
        for (int v = 0; v < uv.rows(); ++v) {
            const double x = uv(v, 0), y = uv(v, 1);
            const Complex phi = scale * (c1 * std::sin(ax * x + px) * std::sin(ay * y + py) +
                                         c2 * std::cos(ax * x) * std::sin(ay * y));
            target(v, 0) = x + phi.real();
            target(v, 1) = y + phi.imag();
        }
    };
    double scale = 1.0;
    apply(scale);
    for (int tries = 0; tries < 40; ++tries) {
        const VectorXcd mu = beltrami_of_planar_map({uv, target, F});
        const double sup = mu.cwiseAbs().maxCoeff();
        if (sup <= mu_cap) break;
        scale *= 0.8;
        apply(scale);
    }
    return target;
}

} // namespace

TEST_CASE("beltrami_of_planar_map: identity and affine stretches") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(8, uv, F);

    const VectorXcd mu_id = beltrami_of_planar_map({uv, uv, F});
    CHECK(mu_id.cwiseAbs().maxCoeff() < 1e-14);

    MatrixXd stretched = uv;
    stretched.col(0) *= 2.0;
    const VectorXcd mu_s = beltrami_of_planar_map({uv, stretched, F});
    for (int f = 0; f < F.rows(); ++f) {
        CHECK(std::abs(mu_s(f) - Complex(1.0 / 3.0, 0.0)) < 1e-13);
    }

    MatrixXd sheared = uv;
    sheared.col(0) += 0.1 * uv.col(1);
    const VectorXcd mu_h = beltrami_of_planar_map({uv, sheared, F});
    const Complex expected = Complex(0.0, 0.1) / Complex(2.0, -0.1);
    CHECK(std::abs(expected) == doctest::Approx(0.049937617).epsilon(1e-6));
    for (int f = 0; f < F.rows(); ++f) {
        CHECK(std::abs(mu_h(f) - expected) < 1e-13);
    }
}

TEST_CASE("beltrami_of_planar_map: degenerate image face throws") {
    MatrixXd uv(3, 2), target(3, 2);
    uv << 0, 0, 1, 0, 0, 1;
    target << 0, 0, 0, 0, 0, 0; // collapsed
    MatrixXi F(1, 3);
    F << 0, 1, 2;
    CHECK_THROWS_AS(beltrami_of_planar_map({uv, target, F}), ConformalFactorZero);
}

TEST_CASE("beltrami_of_surface_map: identity, rigid motions, stretch") {
    const TriMesh tetra = tetrahedron();
    CHECK(beltrami_of_surface_map(tetra, tetra.V, tetra.V).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::Matrix3d R;
    R = Eigen::AngleAxisd(0.9, Eigen::Vector3d(1, 2, 3).normalized());
    const MatrixXd moved = (tetra.V * R.transpose()).rowwise() + Eigen::RowVector3d(5, -2, 1);
    CHECK(beltrami_of_surface_map(tetra, tetra.V, moved).cwiseAbs().maxCoeff() < 1e-10);

    // corner tetra face 0 is the unit right triangle in z=0; doubling x is
    // the planar (2x, y) stretch on that face
    const TriMesh corner = corner_tetrahedron();
    MatrixXd stretched = corner.V;
    stretched.col(0) *= 2.0;
    const VectorXcd mu = beltrami_of_surface_map(corner, corner.V, stretched);
    CHECK(std::abs(mu(0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("lbs_reconstruct: conformal identity with fixed boundary") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(16, uv, F);
    const VectorXcd mu = VectorXcd::Zero(F.rows());
    std::vector<std::pair<int, Eigen::Vector2d>> constraints;
    for (int v : boundary_vertices(16)) constraints.emplace_back(v, uv.row(v));
    const MatrixXd rec = lbs_reconstruct(F, uv, mu, constraints);
    CHECK((rec - uv).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("lbs_reconstruct: constant mu reproduces the affine map") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(16, uv, F);
    const VectorXcd mu = VectorXcd::Constant(F.rows(), Complex(1.0 / 3.0, 0.0));
    std::vector<std::pair<int, Eigen::Vector2d>> constraints;
    for (int v : boundary_vertices(16)) {
        constraints.emplace_back(v, Eigen::Vector2d(2.0 * uv(v, 0), uv(v, 1)));
    }
    const MatrixXd rec = lbs_reconstruct(F, uv, mu, constraints);
    for (int v = 0; v < uv.rows(); ++v) {
        CHECK(std::abs(rec(v, 0) - 2.0 * uv(v, 0)) < 1e-8);
        CHECK(std::abs(rec(v, 1) - uv(v, 1)) < 1e-8);
    }
}

TEST_CASE("lbs_reconstruct: constraints are interpolated exactly") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(10, uv, F);
    std::mt19937 rng(7);
    const MatrixXd target = random_qc_map(uv, F, rng, 0.5);
    const VectorXcd mu = beltrami_of_planar_map({uv, target, F});
    std::vector<std::pair<int, Eigen::Vector2d>> constraints;
    for (int v : boundary_vertices(10)) constraints.emplace_back(v, target.row(v));
    const MatrixXd rec = lbs_reconstruct(F, uv, mu, constraints);
    for (int v : boundary_vertices(10)) {
        CHECK((rec.row(v) - target.row(v)).norm() == 0.0);
    }
}

TEST_CASE("lbs_reconstruct: out-of-range coefficient rejected") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(4, uv, F);
    VectorXcd mu = VectorXcd::Zero(F.rows());
    mu(0) = Complex(1.0, 0.0);
    std::vector<std::pair<int, Eigen::Vector2d>> constraints = {{0, uv.row(0)}, {3, uv.row(3)}};
    CHECK_THROWS_AS(lbs_reconstruct(F, uv, mu, constraints), BeltramiOutOfRange);
    CHECK_THROWS_AS(lbs_reconstruct(F, uv, VectorXcd::Zero(F.rows()),
                                    std::vector<std::pair<int, Eigen::Vector2d>>{{0, uv.row(0)}}),
                    ValidationError);
}

TEST_CASE("lbs round trip: random smooth coefficients on a 64-grid") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(64, uv, F);
    std::mt19937 rng(2024);
    for (int trial = 0; trial < 3; ++trial) {
        const MatrixXd target = random_qc_map(uv, F, rng, 0.5);
        const VectorXcd mu = beltrami_of_planar_map({uv, target, F});
        REQUIRE(mu.cwiseAbs().maxCoeff() <= 0.5);
        std::vector<std::pair<int, Eigen::Vector2d>> constraints;
        for (int v : boundary_vertices(64)) constraints.emplace_back(v, target.row(v));
        const MatrixXd rec = lbs_reconstruct(F, uv, mu, constraints);
        const VectorXcd mu_rec = beltrami_of_planar_map({uv, rec, F});
        CHECK((mu_rec - mu).cwiseAbs().maxCoeff() <= 0.05);
    }
}

TEST_CASE("compose_beltrami: conformal outer map leaves mu unchanged") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(10, uv, F);
    std::mt19937 rng(11);
    const MatrixXd target = random_qc_map(uv, F, rng, 0.4);
    const VectorXcd mu_f = beltrami_of_planar_map({uv, target, F});
    const VectorXcd mu_g = VectorXcd::Zero(F.rows());
    const VectorXcd composed = compose_beltrami(mu_f, {uv, target, F}, mu_g);
    CHECK((composed - mu_f).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compose_beltrami: identity inner map returns mu_g") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(10, uv, F);
    const VectorXcd mu_f = VectorXcd::Zero(F.rows());
    VectorXcd mu_g(F.rows());
    for (int f = 0; f < F.rows(); ++f) mu_g(f) = Complex(0.1 + 0.001 * f, -0.05);
    const VectorXcd composed = compose_beltrami(mu_f, {uv, uv, F}, mu_g);
    CHECK((composed - mu_g).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("compose_beltrami: anti-linear outer map, exact oracle") {
    MatrixXd uv;
    MatrixXi F;
    make_grid(24, uv, F);
    std::mt19937 rng(5);
    const MatrixXd mid = random_qc_map(uv, F, rng, 0.3);
    const VectorXcd mu_f = beltrami_of_planar_map({uv, mid, F});

    // g(w) = w + c conj(w): mu_g = c everywhere, affine, so composition of
    // the per-face affine maps is exact
    const Complex c(0.15, 0.1);
    MatrixXd composed_pts(uv.rows(), 2);
    for (int v = 0; v < uv.rows(); ++v) {
        const Complex w(mid(v, 0), mid(v, 1));
        const Complex out = w + c * std::conj(w);
        composed_pts.row(v) << out.real(), out.imag();
    }
    const VectorXcd expected = beltrami_of_planar_map({uv, composed_pts, F});
    const VectorXcd got = compose_beltrami(mu_f, {uv, mid, F}, VectorXcd::Constant(F.rows(), c));
    CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("solve_inner_beltrami inverts the composition identity") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> unif(-0.6, 0.6);
    VectorXcd total(50), outer(50);
    for (int i = 0; i < 50; ++i) {
        total(i) = Complex(unif(rng), unif(rng)) * 0.7;
        outer(i) = Complex(unif(rng), unif(rng)) * 0.7;
    }
    const VectorXcd inner = solve_inner_beltrami(total, outer);
    for (int i = 0; i < 50; ++i) {
        const Complex lhs = (inner(i) + outer(i)) / (1.0 + std::conj(inner(i)) * outer(i));
        CHECK(std::abs(lhs - total(i)) < 1e-12);
    }
}

TEST_CASE("count_flipped_faces: reflection through the opposite face") {
    const TriMesh tetra = tetrahedron();
    CHECK(count_flipped_faces(tetra, tetra.V, tetra.V) == 0);

    // reflect vertex 0 through the plane of its 1-ring (face {1,2,3})
    MatrixXd test = tetra.V;
    const Eigen::Vector3d p1 = tetra.V.row(1), p2 = tetra.V.row(2), p3 = tetra.V.row(3);
    const Eigen::Vector3d n = (p2 - p1).cross(p3 - p1).normalized();
    const Eigen::Vector3d p0 = tetra.V.row(0);
    test.row(0) = p0 - 2.0 * (p0 - p1).dot(n) * n;

    // oracle: per-face orientation signs
    int expected = 0;
    for (int f = 0; f < 4; ++f) {
        const Eigen::Vector3d a = tetra.V.row(tetra.F(f, 0)), b = tetra.V.row(tetra.F(f, 1)),
                              c = tetra.V.row(tetra.F(f, 2));
        const Eigen::Vector3d a2 = test.row(tetra.F(f, 0)), b2 = test.row(tetra.F(f, 1)),
                              c2 = test.row(tetra.F(f, 2));
        if ((a.dot(b.cross(c)) > 0) != (a2.dot(b2.cross(c2)) > 0)) ++expected;
    }
    CHECK(expected == 3); // the valence of vertex 0
    CHECK(count_flipped_faces(tetra, tetra.V, test) == expected);
}

TEST_CASE("overlap_correction_sphere: no-op on fold-free input") {
    const TriMesh sphere = icosphere(2);
    MatrixXd current = sphere.V;
    // a conformal-ish wobble that keeps orientation
    for (int i = 0; i < current.rows(); ++i) {
        current.row(i) += 0.02 * Eigen::RowVector3d(std::sin(3 * current(i, 2)), 0.0, 0.0);
    }
    current.rowwise().normalize();
    REQUIRE(count_flipped_faces(sphere, sphere.V, current) == 0);
    const MatrixXd corrected = overlap_correction_sphere(sphere, sphere.V, current);
    CHECK((corrected - current).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("overlap_correction_sphere: removes a manufactured fold") {
    const TriMesh sphere = icosphere(2);
    MatrixXd current = sphere.V;
    const int v = 37;
    const int q = sphere.vert_verts[v][0];
    current.row(v) = (Eigen::RowVector3d(sphere.V.row(v)) +
                      2.5 * (Eigen::RowVector3d(sphere.V.row(q)) - Eigen::RowVector3d(sphere.V.row(v))))
                         .normalized();
    const int flips = count_flipped_faces(sphere, sphere.V, current);
    REQUIRE(flips > 0);

    const MatrixXd corrected = overlap_correction_sphere(sphere, sphere.V, current);
    CHECK(count_flipped_faces(sphere, sphere.V, corrected) == 0);
    CHECK((corrected.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-9);

    // projection property: a second application is a no-op
    const MatrixXd again = overlap_correction_sphere(sphere, sphere.V, corrected);
    CHECK((again - corrected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("overlap_correction_ellipsoid: removes a fold and matches the sphere case") {
    const EllipsoidRadii radii(1, 2, 4);
    const TriMesh emesh = ellipsoid_mesh(radii, 2);
    MatrixXd current = emesh.V;
    const int v = 80;
    const int q = emesh.vert_verts[v][0];
    current.row(v) = emesh.V.row(v) + 2.5 * (emesh.V.row(q) - emesh.V.row(v));
    current = project_to_ellipsoid(current, radii);
    REQUIRE(count_flipped_faces(emesh, emesh.V, current) > 0);

    const MatrixXd corrected = overlap_correction_ellipsoid(emesh, emesh.V, current, radii);
    CHECK(count_flipped_faces(emesh, emesh.V, corrected) == 0);
    CHECK((ellipsoid_equation(corrected, radii).array() - 1.0).abs().maxCoeff() < 1e-9);

    // unit radii behave exactly like the sphere scheme
    const TriMesh sphere = icosphere(2);
    MatrixXd scur = sphere.V;
    scur.row(v) = (Eigen::RowVector3d(sphere.V.row(v)) +
                   2.5 * (Eigen::RowVector3d(sphere.V.row(sphere.vert_verts[v][0])) -
                          Eigen::RowVector3d(sphere.V.row(v))))
                      .normalized();
    REQUIRE(count_flipped_faces(sphere, sphere.V, scur) > 0);
    const MatrixXd c1 = overlap_correction_sphere(sphere, sphere.V, scur);
    const MatrixXd c2 = overlap_correction_ellipsoid(sphere, sphere.V, scur, EllipsoidRadii(1, 1, 1));
    CHECK((c1 - c2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("flip-free chart maps have |mu| < 1") {
    const TriMesh sphere = icosphere(2);
    MatrixXd current = sphere.V;
    for (int i = 0; i < current.rows(); ++i) {
        current.row(i) += 0.05 * Eigen::RowVector3d(0.0, std::cos(2 * current(i, 0)), 0.0);
    }
    current.rowwise().normalize();
    REQUIRE(count_flipped_faces(sphere, sphere.V, current) == 0);

    // lower-hemisphere faces in the north-pole chart
    MatrixXd uv0(sphere.num_vertices(), 2), uv1(sphere.num_vertices(), 2);
    std::vector<int> faces;
    for (int f = 0; f < sphere.num_faces(); ++f) {
        bool ok = true;
        for (int e = 0; e < 3; ++e) {
            if (sphere.V(sphere.F(f, e), 2) > 0.0 || current(sphere.F(f, e), 2) > 0.5) ok = false;
        }
        if (ok) faces.push_back(f);
    }
    for (int i = 0; i < sphere.num_vertices(); ++i) {
        uv0.row(i) << sphere.V(i, 0) / (1 - sphere.V(i, 2)), sphere.V(i, 1) / (1 - sphere.V(i, 2));
        uv1.row(i) << current(i, 0) / (1 - current(i, 2)), current(i, 1) / (1 - current(i, 2));
    }
    MatrixXi Fsub(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i) Fsub.row(static_cast<int>(i)) = sphere.F.row(faces[i]);
    const VectorXcd mu = beltrami_of_planar_map({uv0, uv1, Fsub});
    CHECK(mu.cwiseAbs().maxCoeff() < 1.0);
}
