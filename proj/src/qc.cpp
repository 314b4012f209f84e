#include "edemap/qc.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <unordered_map>
#include <cstdlib>
#include <cstdio>

namespace edemap {

namespace {

using Complex = std::complex<double>;

struct FaceDerivatives {
    Complex fz;
    Complex fzbar;
};

// P1 partial derivatives of the complex-valued map over one planar face.
FaceDerivatives face_derivatives(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                                 const Eigen::Vector2d& p2, const Complex& w0, const Complex& w1,
                                 const Complex& w2) {
    const Eigen::Vector2d e0 = p2 - p1;
    const Eigen::Vector2d e1 = p0 - p2;
    const Eigen::Vector2d e2 = p1 - p0;
    const double two_area = e2.x() * (-e1.y()) - e2.y() * (-e1.x()); // cross(p1-p0, p2-p0)
    if (two_area == 0.0) throw DegenerateFaceError("degenerate source face in Beltrami computation");
    // grad of hat_l = perp(opposite edge) / (2A), perp(v) = (-v_y, v_x)
    const Complex fx = (w0 * (-e0.y()) + w1 * (-e1.y()) + w2 * (-e2.y())) / two_area;
    const Complex fy = (w0 * e0.x() + w1 * e1.x() + w2 * e2.x()) / two_area;
    const Complex i(0.0, 1.0);
    return {0.5 * (fx - i * fy), 0.5 * (fx + i * fy)};
}

Complex mu_from_derivatives(const FaceDerivatives& d, bool tolerant) {
    const double scale = std::abs(d.fz) + std::abs(d.fzbar);
    if (std::abs(d.fz) < 1e-14 * std::max(scale, 1e-300)) {
        if (!tolerant) {
            throw ConformalFactorZero("vanishing conformal factor (degenerate or anti-conformal face)");
        }
        if (std::abs(d.fzbar) == 0.0) return Complex(0.0, 0.0); // collapsed to a point
        return 10.0 * d.fzbar / std::abs(d.fzbar);
    }
    return d.fzbar / d.fz;
}

VectorXcd beltrami_planar_impl(const PlanarMap& map, bool tolerant) {
    const int nf = static_cast<int>(map.faces.rows());
    VectorXcd mu(nf);
    for (int f = 0; f < nf; ++f) {
        const int i = map.faces(f, 0), j = map.faces(f, 1), k = map.faces(f, 2);
        const FaceDerivatives d = face_derivatives(
            map.source.row(i), map.source.row(j), map.source.row(k),
            Complex(map.target(i, 0), map.target(i, 1)), Complex(map.target(j, 0), map.target(j, 1)),
            Complex(map.target(k, 0), map.target(k, 1)));
        mu(f) = mu_from_derivatives(d, tolerant);
    }
    return mu;
}

// Rigid flattening: first edge along the positive real axis, own normal up.
std::array<Eigen::Vector2d, 3> flatten_face(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                            const Eigen::Vector3d& p2) {
    const Eigen::Vector3d e1 = p1 - p0;
    const Eigen::Vector3d e2 = p2 - p0;
    const double x = e1.norm();
    if (x <= 0.0) throw DegenerateFaceError("collapsed edge in face flattening");
    const Eigen::Vector3d u = e1 / x;
    const double px = e2.dot(u);
    const double py = (e2 - px * u).norm();
    return {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(x, 0.0), Eigen::Vector2d(px, py)};
}

} // namespace

VectorXcd beltrami_of_planar_map(const PlanarMap& map) { return beltrami_planar_impl(map, false); }

VectorXcd beltrami_of_planar_map_tolerant(const PlanarMap& map) {
    return beltrami_planar_impl(map, true);
}

VectorXcd beltrami_plane_to_surface(const MatrixXd& uv, const MatrixXi& faces,
                                    const MatrixXd& positions3d) {
    const int nf = static_cast<int>(faces.rows());
    // majority winding of the chart decides the flattening handedness
    int positive = 0;
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector2d p0 = uv.row(faces(f, 0));
        const Eigen::Vector2d d1 = Eigen::Vector2d(uv.row(faces(f, 1))) - p0;
        const Eigen::Vector2d d2 = Eigen::Vector2d(uv.row(faces(f, 2))) - p0;
        if (d1.x() * d2.y() - d1.y() * d2.x() > 0.0) ++positive;
    }
    const double handed = (2 * positive >= nf) ? 1.0 : -1.0;

    VectorXcd mu(nf);
    for (int f = 0; f < nf; ++f) {
        const int i = faces(f, 0), j = faces(f, 1), k = faces(f, 2);
        auto t = flatten_face(positions3d.row(i), positions3d.row(j), positions3d.row(k));
        const FaceDerivatives d = face_derivatives(
            uv.row(i), uv.row(j), uv.row(k), Complex(t[0].x(), handed * t[0].y()),
            Complex(t[1].x(), handed * t[1].y()), Complex(t[2].x(), handed * t[2].y()));
        mu(f) = mu_from_derivatives(d, true);
    }
    return mu;
}

VectorXcd beltrami_of_surface_map(const TriMesh& mesh, const MatrixXd& source_positions,
                                  const MatrixXd& target_positions) {
    const int nf = mesh.num_faces();
    VectorXcd mu(nf);
    for (int f = 0; f < nf; ++f) {
        const int i = mesh.F(f, 0), j = mesh.F(f, 1), k = mesh.F(f, 2);
        const auto s = flatten_face(source_positions.row(i), source_positions.row(j),
                                    source_positions.row(k));
        const auto t = flatten_face(target_positions.row(i), target_positions.row(j),
                                    target_positions.row(k));
        const FaceDerivatives d =
            face_derivatives(s[0], s[1], s[2], Complex(t[0].x(), t[0].y()),
                             Complex(t[1].x(), t[1].y()), Complex(t[2].x(), t[2].y()));
        mu(f) = mu_from_derivatives(d, true);
    }
    return mu;
}

MatrixXd lbs_reconstruct(const MatrixXi& faces, const MatrixXd& source_uv, const VectorXcd& mu,
                         const std::vector<std::pair<int, Eigen::Vector2d>>& constraints) {
    const int nv = static_cast<int>(source_uv.rows());
    const int nf = static_cast<int>(faces.rows());
    if (mu.size() != nf) throw ValidationError("Beltrami field size does not match face count");
    if (constraints.size() < 2) throw ValidationError("LBS needs at least two constrained vertices");
    for (int f = 0; f < nf; ++f) {
        const double m = std::abs(mu(f));
        if (!std::isfinite(m) || m >= 1.0 - 1e-6) {
            throw BeltramiOutOfRange("|mu| = " + std::to_string(m) + " on face " + std::to_string(f));
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(nf) * 9);
    for (int f = 0; f < nf; ++f) {
        const double rho = mu(f).real();
        const double tau = mu(f).imag();
        const double den = 1.0 - rho * rho - tau * tau;
        const double a1 = ((rho - 1.0) * (rho - 1.0) + tau * tau) / den;
        const double a2 = -2.0 * tau / den;
        const double a3 = (1.0 + 2.0 * rho + rho * rho + tau * tau) / den;

        const int vid[3] = {faces(f, 0), faces(f, 1), faces(f, 2)};
        const Eigen::Vector2d p[3] = {source_uv.row(vid[0]), source_uv.row(vid[1]),
                                      source_uv.row(vid[2])};
        const Eigen::Vector2d d1 = p[1] - p[0];
        const Eigen::Vector2d d2 = p[2] - p[0];
        const double two_area = d1.x() * d2.y() - d1.y() * d2.x(); // signed
        if (two_area == 0.0) throw DegenerateFaceError("degenerate face in LBS assembly");
        Eigen::Vector2d grad[3];
        const Eigen::Vector2d opp[3] = {p[2] - p[1], p[0] - p[2], p[1] - p[0]};
        for (int l = 0; l < 3; ++l) grad[l] = Eigen::Vector2d(-opp[l].y(), opp[l].x()) / two_area;

        const double w = 0.5 * std::abs(two_area);
        Eigen::Matrix2d A;
        A << a1, a2, a2, a3;
        for (int r = 0; r < 3; ++r) {
            for (int s = 0; s < 3; ++s) {
                triplets.emplace_back(vid[r], vid[s], w * grad[r].dot(A * grad[s]));
            }
        }
    }
    SparseMatrixd K(nv, nv);
    K.setFromTriplets(triplets.begin(), triplets.end());

    std::vector<int> to_free(static_cast<size_t>(nv), -1);
    std::vector<char> is_constrained(static_cast<size_t>(nv), 0);
    MatrixXd result = MatrixXd::Zero(nv, 2);
    for (const auto& [vid, target] : constraints) {
        if (vid < 0 || vid >= nv) throw ValidationError("constraint vertex out of range");
        is_constrained[static_cast<size_t>(vid)] = 1;
        result.row(vid) = target;
    }
    int n_free = 0;
    for (int i = 0; i < nv; ++i) {
        if (!is_constrained[static_cast<size_t>(i)]) to_free[static_cast<size_t>(i)] = n_free++;
    }
    if (n_free == 0) return result;

    std::vector<Eigen::Triplet<double>> ff_trip;
    MatrixXd rhs = MatrixXd::Zero(n_free, 2);
    for (int col = 0; col < K.outerSize(); ++col) {
        for (SparseMatrixd::InnerIterator it(K, col); it; ++it) {
            const int r = static_cast<int>(it.row());
            const int c = static_cast<int>(it.col());
            if (is_constrained[static_cast<size_t>(r)]) continue;
            if (is_constrained[static_cast<size_t>(c)]) {
                rhs.row(to_free[static_cast<size_t>(r)]) -= it.value() * result.row(c);
            } else {
                ff_trip.emplace_back(to_free[static_cast<size_t>(r)], to_free[static_cast<size_t>(c)],
                                     it.value());
            }
        }
    }
    SparseMatrixd Kff(n_free, n_free);
    Kff.setFromTriplets(ff_trip.begin(), ff_trip.end());

    Eigen::SimplicialLDLT<SparseMatrixd> solver(Kff);
    if (solver.info() != Eigen::Success) throw SolveError("LBS factorization failed");
    const MatrixXd sol = solver.solve(rhs);
    const double res = (Kff * sol - rhs).norm();
    const double rhs_norm = rhs.norm();
    if (!(res <= 1e-8 * std::max(rhs_norm, 1.0))) {
        throw SolveError("LBS solve residual too large: " + std::to_string(res));
    }
    for (int i = 0; i < nv; ++i) {
        if (!is_constrained[static_cast<size_t>(i)]) result.row(i) = sol.row(to_free[static_cast<size_t>(i)]);
    }
    return result;
}

VectorXcd compose_beltrami(const VectorXcd& mu_f, const PlanarMap& f, const VectorXcd& mu_g_on_image) {
    const int nf = static_cast<int>(f.faces.rows());
    if (mu_f.size() != nf || mu_g_on_image.size() != nf) {
        throw ValidationError("Beltrami field size does not match face count");
    }
    VectorXcd out(nf);
    for (int face = 0; face < nf; ++face) {
        const int i = f.faces(face, 0), j = f.faces(face, 1), k = f.faces(face, 2);
        const FaceDerivatives d = face_derivatives(
            f.source.row(i), f.source.row(j), f.source.row(k), Complex(f.target(i, 0), f.target(i, 1)),
            Complex(f.target(j, 0), f.target(j, 1)), Complex(f.target(k, 0), f.target(k, 1)));
        if (std::abs(d.fz) == 0.0) throw DenominatorNearZero("f_z vanishes in composition");
        const Complex tau = std::conj(d.fz) / d.fz;
        const Complex num = mu_f(face) + mu_g_on_image(face) * tau;
        const Complex den = 1.0 + std::conj(mu_f(face)) * mu_g_on_image(face) * tau;
        if (std::abs(den) < 1e-14) throw DenominatorNearZero("composition denominator near zero");
        out(face) = num / den;
    }
    return out;
}

VectorXcd solve_inner_beltrami(const VectorXcd& mu_total, const VectorXcd& mu_outer) {
    if (mu_total.size() != mu_outer.size()) throw ValidationError("Beltrami field sizes differ");
    VectorXcd mu_g(mu_total.size());
    for (int f = 0; f < mu_total.size(); ++f) {
        const Complex t = mu_total(f);
        const Complex m = mu_outer(f);
        const Complex A = t - m;
        const Complex B = m * t;
        const double bb = std::norm(B);
        if (bb >= 1.0 - 1e-9) {
            mu_g(f) = Complex(0.0, 0.0); // degenerate inputs: no correction on this face
            continue;
        }
        mu_g(f) = (A + B * std::conj(A)) / (1.0 - bb);
    }
    return mu_g;
}

VectorXi orientation_signs(const TriMesh& mesh, const MatrixXd& positions) {
    const int nf = mesh.num_faces();
    VectorXi signs(nf);
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d p0 = positions.row(mesh.F(f, 0));
        const Eigen::Vector3d p1 = positions.row(mesh.F(f, 1));
        const Eigen::Vector3d p2 = positions.row(mesh.F(f, 2));
        const double det = p0.dot(p1.cross(p2));
        signs(f) = det > 0.0 ? 1 : (det < 0.0 ? -1 : 0);
    }
    return signs;
}

int count_flipped_faces(const TriMesh& mesh, const MatrixXd& reference, const MatrixXd& test) {
    const VectorXi ref = orientation_signs(mesh, reference);
    const VectorXi cur = orientation_signs(mesh, test);
    int flips = 0;
    for (int f = 0; f < mesh.num_faces(); ++f) {
        if ((ref(f) > 0) != (cur(f) > 0)) ++flips;
    }
    return flips;
}

int count_inverted_faces(const TriMesh& mesh, const MatrixXd& positions) {
    const VectorXi signs = orientation_signs(mesh, positions);
    return static_cast<int>((signs.array() <= 0).count());
}

namespace {

constexpr int kMaxCorrectionRounds = 5;
constexpr double kTruncation = 0.9;

void check_on_unit_sphere(const MatrixXd& positions, const char* label) {
    const VectorXd radius = positions.rowwise().norm();
    if (((radius.array() - 1.0).abs() > 1e-9).any()) {
        throw ValidationError(std::string(label) + " positions are not on the unit sphere");
    }
}

MatrixXd normalize_rows(const MatrixXd& positions) {
    const VectorXd len = positions.rowwise().norm();
    return positions.array().colwise() / len.array();
}

struct Chart {
    std::vector<int> faces;        // global face ids
    std::vector<int> verts;        // global vertex ids
    std::vector<int> local_of;     // global -> local (-1 outside)
    std::vector<char> constrained; // per local vertex
    MatrixXi local_faces;
    bool south = true; // south chart projects from the north pole
};

Eigen::Vector2d project_chart(const Eigen::Vector3d& p, bool south) {
    const double den = south ? (1.0 - p.z()) : (1.0 + p.z());
    return Eigen::Vector2d(p.x() / den, p.y() / den);
}

Eigen::Vector3d unproject_chart(const Eigen::Vector2d& q, bool south) {
    const double r2 = q.squaredNorm();
    const double den = 1.0 + r2;
    const double z = (r2 - 1.0) / den;
    return Eigen::Vector3d(2.0 * q.x() / den, 2.0 * q.y() / den, south ? z : -z);
}

Chart build_chart(const TriMesh& mesh, const MatrixXd& initial, bool south) {
    const int nv = mesh.num_vertices();
    const int nf = mesh.num_faces();
    std::vector<char> core(static_cast<size_t>(nv), 0);
    for (int i = 0; i < nv; ++i) {
        const double z = initial(i, 2);
        core[static_cast<size_t>(i)] = south ? (z <= 0.0) : (z >= 0.0);
    }
    std::vector<char> face_in(static_cast<size_t>(nf), 0);
    std::vector<char> vert_in(static_cast<size_t>(nv), 0);
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            if (core[static_cast<size_t>(mesh.F(f, e))]) {
                face_in[static_cast<size_t>(f)] = 1;
                break;
            }
        }
    }
    for (int f = 0; f < nf; ++f) {
        if (!face_in[static_cast<size_t>(f)]) continue;
        for (int e = 0; e < 3; ++e) vert_in[static_cast<size_t>(mesh.F(f, e))] = 1;
    }
    // 1-ring overlap band: any face touching the region's vertex set
    std::vector<char> face_band = face_in;
    for (int f = 0; f < nf; ++f) {
        if (face_band[static_cast<size_t>(f)]) continue;
        for (int e = 0; e < 3; ++e) {
            if (vert_in[static_cast<size_t>(mesh.F(f, e))]) {
                face_band[static_cast<size_t>(f)] = 1;
                break;
            }
        }
    }

    Chart chart;
    chart.south = south;
    chart.local_of.assign(static_cast<size_t>(nv), -1);
    for (int f = 0; f < nf; ++f) {
        if (face_band[static_cast<size_t>(f)]) chart.faces.push_back(f);
    }
    for (int f : chart.faces) {
        for (int e = 0; e < 3; ++e) {
            const int v = mesh.F(f, e);
            if (chart.local_of[static_cast<size_t>(v)] < 0) {
                chart.local_of[static_cast<size_t>(v)] = static_cast<int>(chart.verts.size());
                chart.verts.push_back(v);
            }
        }
    }
    chart.local_faces.resize(static_cast<int>(chart.faces.size()), 3);
    for (size_t f = 0; f < chart.faces.size(); ++f) {
        for (int e = 0; e < 3; ++e) {
            chart.local_faces(static_cast<int>(f), e) =
                chart.local_of[static_cast<size_t>(mesh.F(chart.faces[f], e))];
        }
    }

    // submesh boundary = vertices of edges used by exactly one chart face
    std::map<std::pair<int, int>, int> edge_use;
    for (int f = 0; f < chart.local_faces.rows(); ++f) {
        for (int e = 0; e < 3; ++e) {
            int a = chart.local_faces(f, e), b = chart.local_faces(f, (e + 1) % 3);
            if (a > b) std::swap(a, b);
            edge_use[{a, b}] += 1;
        }
    }
    chart.constrained.assign(chart.verts.size(), 0);
    for (const auto& [edge, uses] : edge_use) {
        if (uses == 1) {
            chart.constrained[static_cast<size_t>(edge.first)] = 1;
            chart.constrained[static_cast<size_t>(edge.second)] = 1;
        }
    }
    return chart;
}

// One two-chart repair pass. Returns the blended, re-normalized positions.
// `round` tightens the truncation: stubborn folds get a smaller coefficient
// over a widening neighborhood, pulling the patch toward a conformal fill.
MatrixXd correction_round(const TriMesh& mesh, const MatrixXd& initial, const MatrixXd& current,
                          int round) {
    const int nv = mesh.num_vertices();
    MatrixXd accum = MatrixXd::Zero(nv, 3);
    VectorXi hits = VectorXi::Zero(nv);

    const VectorXi ref_signs = orientation_signs(mesh, initial);
    const VectorXi cur_signs = orientation_signs(mesh, current);

    // faces near a fold: grow the affected set with the round number
    std::vector<char> near_fold(static_cast<size_t>(mesh.num_faces()), 0);
    {
        std::vector<char> bad_vertex(static_cast<size_t>(nv), 0);
        for (int f = 0; f < mesh.num_faces(); ++f) {
            if ((ref_signs(f) > 0) != (cur_signs(f) > 0)) {
                for (int e = 0; e < 3; ++e) bad_vertex[static_cast<size_t>(mesh.F(f, e))] = 1;
            }
        }
        for (int grow = 0; grow < round; ++grow) {
            std::vector<char> next = bad_vertex;
            for (int f = 0; f < mesh.num_faces(); ++f) {
                bool touch = false;
                for (int e = 0; e < 3; ++e) touch |= bad_vertex[static_cast<size_t>(mesh.F(f, e))] != 0;
                if (touch) {
                    for (int e = 0; e < 3; ++e) next[static_cast<size_t>(mesh.F(f, e))] = 1;
                }
            }
            bad_vertex.swap(next);
        }
        for (int f = 0; f < mesh.num_faces(); ++f) {
            for (int e = 0; e < 3; ++e) {
                if (bad_vertex[static_cast<size_t>(mesh.F(f, e))]) near_fold[static_cast<size_t>(f)] = 1;
            }
        }
    }
    const double rho_bad = kTruncation * std::pow(0.5, round);

    for (const bool south : {true, false}) {
        Chart chart = build_chart(mesh, initial, south);
        const int n_local = static_cast<int>(chart.verts.size());
        MatrixXd uv0(n_local, 2), uv1(n_local, 2);
        bool pole_hit = false;
        for (int l = 0; l < n_local; ++l) {
            const int g = chart.verts[static_cast<size_t>(l)];
            const Eigen::Vector3d p0 = initial.row(g);
            Eigen::Vector3d p1 = current.row(g);
            const double d0 = south ? (1.0 - p0.z()) : (1.0 + p0.z());
            if (d0 < 1e-12) {
                // cannot happen for a chart built from the initial split;
                // bail out defensively if it does
                pole_hit = true;
                break;
            }
            // a drifted vertex may sit near this chart's pole; its chart
            // coordinate only feeds the (truncated) mu and possibly a
            // constraint target, so clamp rather than fail
            const double d1 = south ? (1.0 - p1.z()) : (1.0 + p1.z());
            if (d1 < 1e-9) p1.z() = south ? (1.0 - 1e-9) : (-1.0 + 1e-9);
            uv0.row(l) = project_chart(p0, south);
            uv1.row(l) = project_chart(p1, south);
        }
        if (pole_hit) continue; // the other chart and later rounds still apply

        PlanarMap pm{uv0, uv1, chart.local_faces};
        VectorXcd mu = beltrami_of_planar_map_tolerant(pm);
        for (int f = 0; f < chart.local_faces.rows(); ++f) {
            const int gf = chart.faces[static_cast<size_t>(f)];
            const bool flipped = (ref_signs(gf) > 0) != (cur_signs(gf) > 0);
            const double m = std::abs(mu(f));
            if (flipped || m >= 1.0 || !std::isfinite(m)) {
                mu(f) = (m > 0.0 && std::isfinite(m)) ? mu(f) * (rho_bad / m) : Complex(rho_bad, 0.0);
            } else if (near_fold[static_cast<size_t>(gf)] && m > rho_bad) {
                // the stretched environment around a fold encodes the fold;
                // cap it so the reconstruction can actually open the patch
                mu(f) *= rho_bad / m;
            } else if (m > kTruncation) {
                mu(f) *= kTruncation / m;
            }
        }

        std::vector<std::pair<int, Eigen::Vector2d>> constraints;
        for (int l = 0; l < n_local; ++l) {
            if (chart.constrained[static_cast<size_t>(l)]) constraints.emplace_back(l, uv1.row(l));
        }
        if (constraints.size() < 2) continue;

        MatrixXd uv_new;
        try {
            uv_new = lbs_reconstruct(chart.local_faces, uv0, mu, constraints);
        } catch (const NumericalError&) {
            continue; // leave this chart's vertices to the other chart / next round
        }
        for (int l = 0; l < n_local; ++l) {
            if (chart.constrained[static_cast<size_t>(l)]) continue;
            const Eigen::Vector3d p = unproject_chart(uv_new.row(l), south);
            accum.row(chart.verts[static_cast<size_t>(l)]) += p.transpose();
            hits(chart.verts[static_cast<size_t>(l)]) += 1;
        }
    }

    MatrixXd next = current;
    for (int i = 0; i < nv; ++i) {
        if (hits(i) > 0) next.row(i) = accum.row(i) / hits(i); // chart blend
    }
    return normalize_rows(next);
}

} // namespace

MatrixXd overlap_correction_sphere(const TriMesh& mesh, const MatrixXd& initial,
                                   const MatrixXd& current) {
    check_on_unit_sphere(initial, "initial");
    check_on_unit_sphere(current, "current");
    if (count_flipped_faces(mesh, initial, current) == 0) return current;

    // rounds are monotone: a round that adds folds is discarded and the next
    // round retries from the best map seen with a stronger truncation
    MatrixXd best = current;
    int best_flips = count_flipped_faces(mesh, initial, best);
    for (int round = 0; round < kMaxCorrectionRounds; ++round) {
        const MatrixXd candidate = correction_round(mesh, initial, best, round);
        const int flips = count_flipped_faces(mesh, initial, candidate);
        if (std::getenv("EDEMAP_DEBUG_CORRECTION")) {
            std::fprintf(stderr, "[correction] round %d flips %d (best %d)\n", round, flips, best_flips);
        }
        if (flips < best_flips) {
            best = candidate;
            best_flips = flips;
        }
        if (best_flips == 0) return best;
    }
    throw CorrectionFailed("fold-overs remain after " + std::to_string(kMaxCorrectionRounds) +
                           " correction rounds");
}

MatrixXd overlap_correction_ellipsoid(const TriMesh& mesh, const MatrixXd& initial,
                                      const MatrixXd& current, const EllipsoidRadii& radii) {
    const VectorXd qi = ellipsoid_equation(initial, radii);
    const VectorXd qc = ellipsoid_equation(current, radii);
    if (((qi.array() - 1.0).abs() > 1e-9).any() || ((qc.array() - 1.0).abs() > 1e-9).any()) {
        throw ValidationError("positions are not on the prescribed ellipsoid");
    }
    if (count_flipped_faces(mesh, initial, current) == 0) return current;
    const MatrixXd s0 = normalize_rows(ellipsoid_to_sphere(initial, radii));
    const MatrixXd sn = normalize_rows(ellipsoid_to_sphere(current, radii));
    const MatrixXd corrected = overlap_correction_sphere(mesh, s0, sn);
    return project_to_ellipsoid(sphere_to_ellipsoid(corrected, radii), radii);
}

} // namespace edemap
