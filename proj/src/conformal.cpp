#include "edemap/conformal.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <complex>
#include <numeric>
#include <cstdlib>
#include <cstdio>
#include <vector>

#include "edemap/operators.hpp"
#include "edemap/qc.hpp"

namespace edemap {

namespace {

using Complex = std::complex<double>;

MatrixXd normalize_rows(const MatrixXd& positions) {
    const VectorXd len = positions.rowwise().norm();
    return positions.array().colwise() / len.array();
}

// Dirichlet solve of a symmetric operator with a handful of pinned vertices;
// LDLT first, sparse LU as a fallback for indefinite cotangent systems.
MatrixXd dirichlet_solve(const SparseMatrixd& L, const std::vector<int>& fixed,
                         const MatrixXd& fixed_values, int n_cols) {
    const int nv = static_cast<int>(L.rows());
    std::vector<int> to_free(static_cast<size_t>(nv), -1);
    std::vector<char> pinned(static_cast<size_t>(nv), 0);
    for (int v : fixed) pinned[static_cast<size_t>(v)] = 1;
    int n_free = 0;
    for (int i = 0; i < nv; ++i) {
        if (!pinned[static_cast<size_t>(i)]) to_free[static_cast<size_t>(i)] = n_free++;
    }

    MatrixXd result = MatrixXd::Zero(nv, n_cols);
    for (size_t s = 0; s < fixed.size(); ++s) result.row(fixed[s]) = fixed_values.row(static_cast<int>(s));
    if (n_free == 0) return result;

    std::vector<Eigen::Triplet<double>> trip;
    MatrixXd rhs = MatrixXd::Zero(n_free, n_cols);
    for (int col = 0; col < L.outerSize(); ++col) {
        for (SparseMatrixd::InnerIterator it(L, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            if (pinned[static_cast<size_t>(r)]) continue;
            if (pinned[static_cast<size_t>(c)]) {
                rhs.row(to_free[static_cast<size_t>(r)]) -= it.value() * result.row(c);
            } else {
                trip.emplace_back(to_free[static_cast<size_t>(r)], to_free[static_cast<size_t>(c)], it.value());
            }
        }
    }
    SparseMatrixd Lff(n_free, n_free);
    Lff.setFromTriplets(trip.begin(), trip.end());

    MatrixXd sol;
    Eigen::SimplicialLDLT<SparseMatrixd> ldlt(Lff);
    bool ok = false;
    if (ldlt.info() == Eigen::Success) {
        sol = ldlt.solve(rhs);
        ok = (Lff * sol - rhs).norm() <= 1e-8 * std::max(1.0, rhs.norm());
    }
    if (!ok) {
        Eigen::SparseLU<SparseMatrixd> lu(Lff);
        if (lu.info() != Eigen::Success) throw SolveError("harmonic system factorization failed");
        sol = lu.solve(rhs);
        if ((Lff * sol - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) {
            throw SolveError("harmonic system solve did not converge");
        }
    }
    for (int i = 0; i < nv; ++i) {
        if (!pinned[static_cast<size_t>(i)]) result.row(i) = sol.row(to_free[static_cast<size_t>(i)]);
    }
    return result;
}

SparseMatrixd uniform_laplacian(const TriMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(mesh.num_edges()) * 4);
    for (int e = 0; e < mesh.num_edges(); ++e) {
        const int a = mesh.E(e, 0), b = mesh.E(e, 1);
        trip.emplace_back(a, b, -1.0);
        trip.emplace_back(b, a, -1.0);
        trip.emplace_back(a, a, 1.0);
        trip.emplace_back(b, b, 1.0);
    }
    SparseMatrixd L(mesh.num_vertices(), mesh.num_vertices());
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
}

// Signed planar areas; used to detect fold-overs of the harmonic embedding.
int count_plane_inversions(const MatrixXd& uv, const MatrixXi& F, int skip_face, double expected_sign) {
    int bad = 0;
    for (int f = 0; f < F.rows(); ++f) {
        if (f == skip_face) continue;
        const Eigen::Vector2d p0 = uv.row(F(f, 0));
        const Eigen::Vector2d d1 = Eigen::Vector2d(uv.row(F(f, 1))) - p0;
        const Eigen::Vector2d d2 = Eigen::Vector2d(uv.row(F(f, 2))) - p0;
        if ((d1.x() * d2.y() - d1.y() * d2.x()) * expected_sign <= 0.0) ++bad;
    }
    return bad;
}

// Harmonic map of the punctured mesh into a fixed equilateral triangle.
MatrixXd harmonic_plane_map(const TriMesh& mesh, int big_face, const SparseMatrixd& L) {
    const std::vector<int> fixed = {mesh.F(big_face, 0), mesh.F(big_face, 1), mesh.F(big_face, 2)};
    MatrixXd corners(3, 2);
    corners << 0.0, 0.0, 1.0, 0.0, 0.5, std::sqrt(3.0) / 2.0;
    return dirichlet_solve(L, fixed, corners, 2);
}

Eigen::Matrix3d rotation_to_north(const Eigen::Vector3d& direction) {
    const Eigen::Vector3d d = direction.normalized();
    const Eigen::Vector3d z(0.0, 0.0, 1.0);
    const double c = d.dot(z);
    if (c > 1.0 - 1e-14) return Eigen::Matrix3d::Identity();
    if (c < -1.0 + 1e-14) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(0, 0) = -1.0;
        flip(2, 2) = -1.0;
        return flip; // rotation by pi about the y-axis
    }
    const Eigen::Vector3d axis = d.cross(z).normalized();
    const double angle = std::acos(std::clamp(c, -1.0, 1.0));
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Sphere Moebius "boost": pushes mass toward -a while keeping S^2 invariant.
MatrixXd sphere_boost(const MatrixXd& S, const Eigen::Vector3d& a) {
    const double aa = a.squaredNorm();
    MatrixXd out(S.rows(), 3);
    for (int i = 0; i < S.rows(); ++i) {
        const Eigen::Vector3d x = S.row(i);
        const Eigen::Vector3d d = x - a;
        out.row(i) = ((1.0 - aa) * d / d.squaredNorm() - a).transpose();
    }
    return normalize_rows(out);
}

Eigen::Vector3d area_centroid(const TriMesh& mesh, const MatrixXd& S) {
    const VectorXd areas = face_areas(mesh, S);
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const Eigen::Vector3d centroid =
            (S.row(mesh.F(f, 0)) + S.row(mesh.F(f, 1)) + S.row(mesh.F(f, 2))) / 3.0;
        c += areas(f) * centroid;
    }
    return c / areas.sum();
}

MatrixXd mobius_center(const TriMesh& mesh, MatrixXd S) {
    double step = 0.8;
    Eigen::Vector3d c = area_centroid(mesh, S);
    for (int iter = 0; iter < 50 && c.norm() > 1e-4; ++iter) {
        bool improved = false;
        for (int tries = 0; tries < 6; ++tries) {
            const Eigen::Vector3d a = step * c;
            if (a.norm() >= 0.999) {
                step *= 0.5;
                continue;
            }
            const MatrixXd candidate = sphere_boost(S, a);
            const Eigen::Vector3d c_new = area_centroid(mesh, candidate);
            if (c_new.norm() < c.norm()) {
                S = candidate;
                c = c_new;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
    }
    return S;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of empty set");
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(pos);
    const size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

} // namespace

MatrixXd stereographic(const MatrixXd& sphere_points, Pole pole) {
    MatrixXd out(sphere_points.rows(), 2);
    for (int i = 0; i < sphere_points.rows(); ++i) {
        const double z = sphere_points(i, 2);
        const double den = pole == Pole::North ? (1.0 - z) : (1.0 + z);
        if (std::abs(den) < 1e-12) {
            throw PoleError("point " + std::to_string(i) + " is at the projection pole");
        }
        out(i, 0) = sphere_points(i, 0) / den;
        out(i, 1) = sphere_points(i, 1) / den;
    }
    return out;
}

MatrixXd inverse_stereographic(const MatrixXd& plane_points, Pole pole) {
    MatrixXd out(plane_points.rows(), 3);
    for (int i = 0; i < plane_points.rows(); ++i) {
        const double x = plane_points(i, 0);
        const double y = plane_points(i, 1);
        const double r2 = x * x + y * y;
        const double den = 1.0 + r2;
        out(i, 0) = 2.0 * x / den;
        out(i, 1) = 2.0 * y / den;
        out(i, 2) = pole == Pole::North ? (r2 - 1.0) / den : (1.0 - r2) / den;
    }
    return out;
}

MatrixXd inverse_ellipsoidal_stereographic(const MatrixXd& plane_points, const EllipsoidRadii& radii) {
    MatrixXd s = inverse_stereographic(plane_points, Pole::North);
    return sphere_to_ellipsoid(s, radii);
}

MatrixXd mobius_normalize(const MatrixXd& plane_points, int p0, int pinf) {
    const int n = static_cast<int>(plane_points.rows());
    if (p0 == pinf) throw CoincidentPolesError("pole vertices coincide");
    if (p0 < 0 || pinf < 0 || p0 >= n || pinf >= n) throw ValidationError("pole index out of range");
    const Complex z0(plane_points(p0, 0), plane_points(p0, 1));
    const Complex zinf(plane_points(pinf, 0), plane_points(pinf, 1));
    const double scale = std::max(std::abs(z0), std::abs(zinf));
    if (std::abs(z0 - zinf) <= 1e-14 * std::max(scale, 1.0)) {
        throw CoincidentPolesError("pole images coincide in the plane");
    }

    MatrixXd out(n, 2);
    double max_mod = 0.0;
    int far_idx = -1;
    for (int i = 0; i < n; ++i) {
        if (i == pinf) continue;
        const Complex z(plane_points(i, 0), plane_points(i, 1));
        const Complex w = (z - z0) / (z - zinf);
        out(i, 0) = w.real();
        out(i, 1) = w.imag();
        const double mod = std::abs(w);
        if (mod > max_mod) {
            max_mod = mod;
            far_idx = i;
        }
    }
    // pinf maps to infinity; place it beyond every other image, in the
    // direction of the current farthest point.
    Complex dir(1.0, 0.0);
    if (far_idx >= 0 && max_mod > 0.0) {
        dir = Complex(out(far_idx, 0), out(far_idx, 1)) / max_mod;
    }
    const Complex w_inf = 2.0 * std::max(max_mod, 1.0) * dir;
    out(pinf, 0) = w_inf.real();
    out(pinf, 1) = w_inf.imag();
    return out;
}

MatrixXd rescale_distribution(const MatrixXd& plane_points) {
    const int n = static_cast<int>(plane_points.rows());
    std::vector<double> logr;
    logr.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double r = std::hypot(plane_points(i, 0), plane_points(i, 1));
        if (r > 0.0) logr.push_back(std::log(r));
    }
    if (logr.empty()) return plane_points;

    const double q20 = percentile(logr, 0.20);
    const double q50 = percentile(logr, 0.50);
    const double q80 = percentile(logr, 0.80);
    // targets: moduli of an equal-area sphere sampling under stereographic
    // projection, sqrt(p/(1-p)) at p = 0.2, 0.5, 0.8
    const double t20 = std::log(0.5), t50 = 0.0, t80 = std::log(2.0);

    auto remap = [&](double lr) {
        if (!(q20 < q50 && q50 < q80)) return lr - q50; // degenerate: median scaling only
        if (lr <= q50) return t20 + (lr - q20) * (t50 - t20) / (q50 - q20);
        return t50 + (lr - q50) * (t80 - t50) / (q80 - q50);
    };

    MatrixXd out = plane_points;
    for (int i = 0; i < n; ++i) {
        const double r = std::hypot(plane_points(i, 0), plane_points(i, 1));
        if (r <= 0.0) continue;
        const double s = std::exp(remap(std::log(r))) / r;
        out(i, 0) *= s;
        out(i, 1) *= s;
    }
    return out;
}

namespace {

// One pass of the crowded-pole repair: reconstruct the parameterization in
// the chart where the crowded region is spread out, targeting the Beltrami
// coefficient of the chart-to-surface map.
MatrixXd south_pole_repair(const TriMesh& mesh, const MatrixXd& sphere, const MatrixXd& plane_north) {
    const int nv = mesh.num_vertices();

    std::vector<int> order(static_cast<size_t>(nv));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ra = plane_north.row(a).norm();
        const double rb = plane_north.row(b).norm();
        if (ra != rb) return ra < rb;
        return a < b;
    });
    const int fixnum = std::max(nv / 10, 3);

    MatrixXd P(nv, 2);
    for (int i = 0; i < nv; ++i) {
        const double den = std::max(1.0 + sphere(i, 2), 1e-15);
        P(i, 0) = sphere(i, 0) / den;
        P(i, 1) = sphere(i, 1) / den;
    }

    VectorXcd mu = beltrami_plane_to_surface(P, mesh.F, mesh.V);
    for (int f = 0; f < mu.size(); ++f) {
        const double m = std::abs(mu(f));
        if (!std::isfinite(m) || m >= 0.95) {
            mu(f) = (std::isfinite(m) && m > 0.0) ? mu(f) * (0.95 / m) : Complex(0.0, 0.0);
        }
    }

    std::vector<std::pair<int, Eigen::Vector2d>> constraints;
    constraints.reserve(static_cast<size_t>(fixnum));
    for (int s = 0; s < std::min(fixnum, nv); ++s) {
        const int v = order[static_cast<size_t>(s)];
        constraints.emplace_back(v, P.row(v));
    }

    const MatrixXd P_new = lbs_reconstruct(mesh.F, P, mu, constraints);
    MatrixXd out(nv, 3);
    for (int i = 0; i < nv; ++i) {
        const double r2 = P_new.row(i).squaredNorm();
        const double den = 1.0 + r2;
        out(i, 0) = 2.0 * P_new(i, 0) / den;
        out(i, 1) = 2.0 * P_new(i, 1) / den;
        out(i, 2) = (1.0 - r2) / den;
    }
    return out;
}

} // namespace

SphericalMap spherical_conformal_map(const TriMesh& mesh) {
    const int nf = mesh.num_faces();

    // most regular face, ties broken by larger area
    const VectorXd areas = face_areas(mesh, mesh.V);
    int big_face = 0;
    double best_reg = std::numeric_limits<double>::infinity();
    for (int f = 0; f < nf; ++f) {
        const double e0 = (mesh.V.row(mesh.F(f, 1)) - mesh.V.row(mesh.F(f, 2))).norm();
        const double e1 = (mesh.V.row(mesh.F(f, 2)) - mesh.V.row(mesh.F(f, 0))).norm();
        const double e2 = (mesh.V.row(mesh.F(f, 0)) - mesh.V.row(mesh.F(f, 1))).norm();
        const double sum = e0 + e1 + e2;
        const double reg = std::abs(e0 / sum - 1.0 / 3.0) + std::abs(e1 / sum - 1.0 / 3.0) +
                           std::abs(e2 / sum - 1.0 / 3.0);
        if (reg < best_reg - 1e-15 || (std::abs(reg - best_reg) <= 1e-15 && areas(f) > areas(big_face))) {
            best_reg = reg;
            big_face = f;
        }
    }

    // harmonic map of the punctured mesh; Tutte weights as fallback when the
    // cotangent embedding folds over
    MatrixXd uv = harmonic_plane_map(mesh, big_face, cotangent_laplacian(mesh, mesh.V));
    if (count_plane_inversions(uv, mesh.F, big_face, -1.0) > 0) {
        uv = harmonic_plane_map(mesh, big_face, uniform_laplacian(mesh));
    }

    // recentre on the crowded region
    uv.rowwise() -= uv.colwise().mean();

    // balance the two polar scales: make the removed face (north) and the
    // innermost face (south) equally resolved
    double north_side = 0.0;
    {
        const Complex z0(uv(mesh.F(big_face, 0), 0), uv(mesh.F(big_face, 0), 1));
        const Complex z1(uv(mesh.F(big_face, 1), 0), uv(mesh.F(big_face, 1), 1));
        const Complex z2(uv(mesh.F(big_face, 2), 0), uv(mesh.F(big_face, 2), 1));
        north_side = (std::abs(z0 - z1) + std::abs(z1 - z2) + std::abs(z2 - z0)) / 3.0;
    }
    int inner_face = -1;
    double inner_score = std::numeric_limits<double>::infinity();
    for (int f = 0; f < nf; ++f) {
        if (f == big_face) continue;
        double score = 0.0;
        for (int e = 0; e < 3; ++e) score += uv.row(mesh.F(f, e)).norm();
        if (score < inner_score) {
            inner_score = score;
            inner_face = f;
        }
    }
    double south_side = 0.0;
    bool south_valid = true;
    {
        auto w_of = [&](int v) {
            Complex z(uv(v, 0), uv(v, 1));
            if (std::abs(z) < 1e-12) south_valid = false; // vertex at the chart origin
            return Complex(1.0, 0.0) / std::conj(z);
        };
        const Complex w0 = w_of(mesh.F(inner_face, 0));
        const Complex w1 = w_of(mesh.F(inner_face, 1));
        const Complex w2 = w_of(mesh.F(inner_face, 2));
        if (south_valid) {
            south_side = (std::abs(w0 - w1) + std::abs(w1 - w2) + std::abs(w2 - w0)) / 3.0;
        }
    }
    if (south_valid && north_side > 0.0 && south_side > 0.0 && std::isfinite(south_side)) {
        uv *= std::sqrt(south_side / north_side);
    }

    // percentile rescale before the chart repair: elongated inputs crowd the
    // plane so badly that chart coordinates hit precision limits otherwise;
    // the repair solve removes the radial distortion this introduces
    uv = rescale_distribution(uv);

    MatrixXd sphere = inverse_stereographic(uv, Pole::North);
    MatrixXd pre_repair = sphere;
    // keep the chart repair only when it does not add fold-overs
    try {
        const MatrixXd repaired = south_pole_repair(mesh, sphere, uv);
        if (count_inverted_faces(mesh, normalize_rows(repaired)) <=
            count_inverted_faces(mesh, normalize_rows(sphere))) {
            sphere = repaired;
        }
    } catch (const NumericalError&) {
        // keep the unrepaired map rather than fail
    }

    // center the area centroid first: an off-center map can look radially
    // folded even when it is an embedding
    sphere = mobius_center(mesh, normalize_rows(sphere));
    pre_repair = mobius_center(mesh, normalize_rows(pre_repair));

    if (count_inverted_faces(mesh, sphere) > 0) {
        // repair against the pre-repair map when it is clean
        if (count_inverted_faces(mesh, pre_repair) == 0) {
            sphere = overlap_correction_sphere(mesh, pre_repair, sphere);
        } else {
            throw ConvergenceError("spherical parameterization is not fold-free");
        }
    }

    return {normalize_rows(sphere), big_face};
}

ParamMap fecm(const TriMesh& mesh, const EllipsoidRadii& radii) {
    const SphericalMap sm = spherical_conformal_map(mesh);

    // rotate the removed-face cap onto the north pole so the projection pole
    // avoids all vertices
    Eigen::Vector3d cap_dir = Eigen::Vector3d::Zero();
    for (int e = 0; e < 3; ++e) cap_dir += Eigen::Vector3d(sm.positions.row(mesh.F(sm.big_face, e)));
    const Eigen::Matrix3d R = rotation_to_north(cap_dir);
    const MatrixXd sphere = sm.positions * R.transpose();

    MatrixXd plane = stereographic(sphere, Pole::North);

    // pole vertices: the diameter pair along the first principal axis
    const MatrixXd centered = mesh.V.rowwise() - mesh.V.colwise().mean();
    const Eigen::Matrix3d cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d axis = eig.eigenvectors().col(2);
    int p0 = 0, pinf = 0;
    const VectorXd coord = centered * axis;
    coord.minCoeff(&p0);
    coord.maxCoeff(&pinf);
    if (p0 == pinf) throw CoincidentPolesError("degenerate principal axis");

    plane = mobius_normalize(plane, p0, pinf);
    plane = rescale_distribution(plane);

    // reference for fold checks: the sphere map carried to the ellipsoid
    const MatrixXd reference =
        project_to_ellipsoid(sphere_to_ellipsoid(sphere, radii), radii);

    // constraints for the compensation solve: the infinity vertex and its
    // ring stay put (their chart faces wrap the far pole)
    std::vector<std::pair<int, Eigen::Vector2d>> constraints;
    constraints.emplace_back(pinf, plane.row(pinf));
    for (int nb : mesh.vert_verts[static_cast<size_t>(pinf)]) {
        constraints.emplace_back(nb, plane.row(nb));
    }

    auto mean_abs_mu = [&](const MatrixXd& positions) {
        return beltrami_of_surface_map(mesh, mesh.V, positions).cwiseAbs().mean();
    };

    MatrixXd best = project_to_ellipsoid(inverse_ellipsoidal_stereographic(plane, radii), radii);
    double best_mu = mean_abs_mu(best);
    MatrixXd plane_cur = plane;
    for (int pass = 0; pass < 3; ++pass) {
        const VectorXcd mu_inv = beltrami_plane_to_surface(plane_cur, mesh.F, mesh.V);
        const MatrixXd eta = inverse_ellipsoidal_stereographic(plane_cur, radii);
        const VectorXcd mu_eta = beltrami_plane_to_surface(plane_cur, mesh.F, eta);
        VectorXcd mu_g = solve_inner_beltrami(mu_inv, mu_eta);
        for (int f = 0; f < mu_g.size(); ++f) {
            const double m = std::abs(mu_g(f));
            if (!std::isfinite(m)) {
                mu_g(f) = Complex(0.0, 0.0);
            } else if (m > 0.95) {
                mu_g(f) *= 0.95 / m;
            }
        }
        MatrixXd plane_next;
        try {
            plane_next = lbs_reconstruct(mesh.F, plane_cur, mu_g, constraints);
        } catch (const NumericalError&) {
            break;
        }
        const MatrixXd candidate =
            project_to_ellipsoid(inverse_ellipsoidal_stereographic(plane_next, radii), radii);
        const double cand_mu = mean_abs_mu(candidate);
        if (cand_mu < best_mu - 1e-6) {
            best = candidate;
            best_mu = cand_mu;
            plane_cur = plane_next;
        } else {
            break;
        }
    }

    MatrixXd positions = best;
    if (count_inverted_faces(mesh, positions) > 0) {
        positions = overlap_correction_ellipsoid(mesh, reference, positions, radii);
    }
    return {positions, radii};
}

} // namespace edemap
