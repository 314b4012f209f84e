#include "edemap/remesh.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "edemap/qc.hpp"

namespace edemap {

namespace {

struct DynMesh {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    std::vector<char> vert_alive;
    std::vector<char> face_alive;
    std::vector<std::vector<int>> vfaces;

    int alive_vertices = 0;

    void rebuild_incidence() {
        vfaces.assign(verts.size(), {});
        for (size_t f = 0; f < faces.size(); ++f) {
            if (!face_alive[f]) continue;
            for (int e = 0; e < 3; ++e) vfaces[static_cast<size_t>(faces[f][static_cast<size_t>(e)])].push_back(static_cast<int>(f));
        }
    }

    std::vector<int> ring(int v) const {
        std::vector<int> out;
        for (int f : vfaces[static_cast<size_t>(v)]) {
            for (int e = 0; e < 3; ++e) {
                const int u = faces[static_cast<size_t>(f)][static_cast<size_t>(e)];
                if (u != v && std::find(out.begin(), out.end(), u) == out.end()) out.push_back(u);
            }
        }
        return out;
    }
};

DynMesh to_dyn(const MatrixXd& V, const MatrixXi& F) {
    DynMesh m;
    m.verts.resize(static_cast<size_t>(V.rows()));
    for (int i = 0; i < V.rows(); ++i) m.verts[static_cast<size_t>(i)] = V.row(i);
    m.faces.resize(static_cast<size_t>(F.rows()));
    for (int f = 0; f < F.rows(); ++f) m.faces[static_cast<size_t>(f)] = {F(f, 0), F(f, 1), F(f, 2)};
    m.vert_alive.assign(m.verts.size(), 1);
    m.face_alive.assign(m.faces.size(), 1);
    m.alive_vertices = static_cast<int>(m.verts.size());
    m.rebuild_incidence();
    return m;
}

TriMesh from_dyn(const DynMesh& m) {
    std::vector<int> remap(m.verts.size(), -1);
    int nv = 0;
    for (size_t i = 0; i < m.verts.size(); ++i) {
        if (m.vert_alive[i]) remap[i] = nv++;
    }
    int nf = 0;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        if (m.face_alive[f]) ++nf;
    }
    MatrixXd V(nv, 3);
    for (size_t i = 0; i < m.verts.size(); ++i) {
        if (m.vert_alive[i]) V.row(remap[i]) = m.verts[i];
    }
    MatrixXi F(nf, 3);
    int row = 0;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        if (!m.face_alive[f]) continue;
        for (int e = 0; e < 3; ++e) F(row, e) = remap[static_cast<size_t>(m.faces[f][static_cast<size_t>(e)])];
        ++row;
    }
    return make_mesh(V, F);
}

Eigen::Vector3d outward(const Eigen::Vector3d& p, const EllipsoidRadii& r) {
    return Eigen::Vector3d(p.x() / (r.a * r.a), p.y() / (r.b * r.b), p.z() / (r.c * r.c)).normalized();
}

Eigen::Vector3d project_point(const Eigen::Vector3d& p, const EllipsoidRadii& r) {
    const double q = p.x() * p.x() / (r.a * r.a) + p.y() * p.y() / (r.b * r.b) +
                     p.z() * p.z() / (r.c * r.c);
    return p / std::sqrt(q);
}

bool face_ok(const DynMesh& m, const std::array<int, 3>& face, const EllipsoidRadii& radii) {
    const Eigen::Vector3d& p0 = m.verts[static_cast<size_t>(face[0])];
    const Eigen::Vector3d& p1 = m.verts[static_cast<size_t>(face[1])];
    const Eigen::Vector3d& p2 = m.verts[static_cast<size_t>(face[2])];
    const Eigen::Vector3d n = (p1 - p0).cross(p2 - p0);
    const double area2 = n.norm();
    if (area2 <= 1e-16) return false;
    const Eigen::Vector3d centroid = (p0 + p1 + p2) / 3.0;
    return n.dot(outward(centroid, radii)) > 1e-12; // keep outward orientation
}

// Collapse v into u at the midpoint (projected). Returns false and leaves
// the mesh untouched when the collapse would break the manifold link
// condition or fold a surviving face.
bool try_collapse(DynMesh& m, int u, int v, const EllipsoidRadii& radii) {
    const auto ring_u = m.ring(u);
    const auto ring_v = m.ring(v);
    std::vector<int> common;
    for (int x : ring_u) {
        if (std::find(ring_v.begin(), ring_v.end(), x) != ring_v.end()) common.push_back(x);
    }
    if (common.size() != 2) return false;

    const Eigen::Vector3d old_u = m.verts[static_cast<size_t>(u)];
    const Eigen::Vector3d merged =
        project_point(0.5 * (m.verts[static_cast<size_t>(u)] + m.verts[static_cast<size_t>(v)]), radii);

    std::vector<int> dead_faces;
    std::vector<int> changed_faces;
    for (int f : m.vfaces[static_cast<size_t>(v)]) {
        const auto& face = m.faces[static_cast<size_t>(f)];
        if (std::find(face.begin(), face.end(), u) != face.end()) {
            dead_faces.push_back(f);
        } else {
            changed_faces.push_back(f);
        }
    }
    if (dead_faces.size() != 2) return false;

    // simulate: u moves to the midpoint, v's faces are re-pointed at u
    m.verts[static_cast<size_t>(u)] = merged;
    bool ok = true;
    for (int f : changed_faces) {
        auto face = m.faces[static_cast<size_t>(f)];
        for (auto& idx : face) {
            if (idx == v) idx = u;
        }
        if (!face_ok(m, face, radii)) {
            ok = false;
            break;
        }
    }
    if (ok) {
        for (int f : m.vfaces[static_cast<size_t>(u)]) {
            if (std::find(dead_faces.begin(), dead_faces.end(), f) != dead_faces.end()) continue;
            if (!face_ok(m, m.faces[static_cast<size_t>(f)], radii)) {
                ok = false;
                break;
            }
        }
    }
    if (!ok) {
        m.verts[static_cast<size_t>(u)] = old_u;
        return false;
    }

    for (int f : dead_faces) m.face_alive[static_cast<size_t>(f)] = 0;
    for (int f : changed_faces) {
        for (auto& idx : m.faces[static_cast<size_t>(f)]) {
            if (idx == v) idx = u;
        }
        m.vfaces[static_cast<size_t>(u)].push_back(f);
    }
    auto& ufaces = m.vfaces[static_cast<size_t>(u)];
    ufaces.erase(std::remove_if(ufaces.begin(), ufaces.end(),
                                [&](int f) { return !m.face_alive[static_cast<size_t>(f)]; }),
                 ufaces.end());
    for (int w : common) {
        auto& wf = m.vfaces[static_cast<size_t>(w)];
        wf.erase(std::remove_if(wf.begin(), wf.end(),
                                [&](int f) { return !m.face_alive[static_cast<size_t>(f)]; }),
                 wf.end());
    }
    m.vfaces[static_cast<size_t>(v)].clear();
    m.vert_alive[static_cast<size_t>(v)] = 0;
    m.alive_vertices -= 1;
    return true;
}

void decimate_to(DynMesh& m, int target, const EllipsoidRadii& radii) {
    while (m.alive_vertices > target) {
        // shortest alive edges first; ties by index for determinism
        struct Cand {
            double len;
            int u, v;
        };
        std::vector<Cand> cands;
        for (size_t f = 0; f < m.faces.size(); ++f) {
            if (!m.face_alive[f]) continue;
            for (int e = 0; e < 3; ++e) {
                int a = m.faces[f][static_cast<size_t>(e)];
                int b = m.faces[f][static_cast<size_t>((e + 1) % 3)];
                if (a > b) std::swap(a, b);
                if (a == m.faces[f][static_cast<size_t>(e)]) {
                    cands.push_back({(m.verts[static_cast<size_t>(a)] - m.verts[static_cast<size_t>(b)]).norm(), a, b});
                }
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
            if (x.len != y.len) return x.len < y.len;
            if (x.u != y.u) return x.u < y.u;
            return x.v < y.v;
        });
        std::vector<char> touched(m.verts.size(), 0);
        int collapsed = 0;
        for (const Cand& c : cands) {
            if (m.alive_vertices <= target) break;
            if (!m.vert_alive[static_cast<size_t>(c.u)] || !m.vert_alive[static_cast<size_t>(c.v)]) continue;
            if (touched[static_cast<size_t>(c.u)] || touched[static_cast<size_t>(c.v)]) continue;
            if (try_collapse(m, c.u, c.v, radii)) {
                touched[static_cast<size_t>(c.u)] = 1;
                ++collapsed;
            }
        }
        if (collapsed == 0) {
            throw TargetTooSmall("cannot decimate further toward the requested vertex count");
        }
    }
}

void flip_edges(DynMesh& m, const EllipsoidRadii& radii) {
    auto min_angle = [&](int a, int b, int c) {
        const Eigen::Vector3d& pa = m.verts[static_cast<size_t>(a)];
        const Eigen::Vector3d& pb = m.verts[static_cast<size_t>(b)];
        const Eigen::Vector3d& pc = m.verts[static_cast<size_t>(c)];
        double best = std::numeric_limits<double>::infinity();
        const Eigen::Vector3d e0 = pb - pa, e1 = pc - pb, e2 = pa - pc;
        const double l0 = e0.norm(), l1 = e1.norm(), l2 = e2.norm();
        if (l0 <= 0 || l1 <= 0 || l2 <= 0) return 0.0;
        best = std::min(best, std::acos(std::clamp(e0.dot(-e2) / (l0 * l2), -1.0, 1.0)));
        best = std::min(best, std::acos(std::clamp((-e0).dot(e1) / (l0 * l1), -1.0, 1.0)));
        best = std::min(best, std::acos(std::clamp((-e1).dot(e2) / (l1 * l2), -1.0, 1.0)));
        return best;
    };

    // face pairs per undirected edge
    std::map<std::pair<int, int>, std::array<int, 2>> edge_faces;
    for (size_t f = 0; f < m.faces.size(); ++f) {
        if (!m.face_alive[f]) continue;
        for (int e = 0; e < 3; ++e) {
            int a = m.faces[f][static_cast<size_t>(e)], b = m.faces[f][static_cast<size_t>((e + 1) % 3)];
            if (a > b) std::swap(a, b);
            auto it = edge_faces.find({a, b});
            if (it == edge_faces.end()) {
                edge_faces[{a, b}] = {static_cast<int>(f), -1};
            } else {
                it->second[1] = static_cast<int>(f);
            }
        }
    }

    for (const auto& [edge, pair] : edge_faces) {
        const int f0 = pair[0], f1 = pair[1];
        if (f1 < 0 || !m.face_alive[static_cast<size_t>(f0)] || !m.face_alive[static_cast<size_t>(f1)]) continue;
        const int u = edge.first, v = edge.second;
        auto opposite = [&](int f) {
            for (int e = 0; e < 3; ++e) {
                const int w = m.faces[static_cast<size_t>(f)][static_cast<size_t>(e)];
                if (w != u && w != v) return w;
            }
            return -1;
        };
        const int p = opposite(f0);
        const int q = opposite(f1);
        if (p < 0 || q < 0 || p == q) continue;
        // p and q must not already share an edge
        const auto ring_p = m.ring(p);
        if (std::find(ring_p.begin(), ring_p.end(), q) != ring_p.end()) continue;

        const double before = std::min(min_angle(u, v, p), min_angle(u, v, q));
        const double after = std::min(min_angle(p, q, u), min_angle(p, q, v));
        if (after <= before + 1e-12) continue;

        // orientation of the replacement faces, matching f0's winding
        auto winding = [&](int f, int a, int b) {
            const auto& face = m.faces[static_cast<size_t>(f)];
            for (int e = 0; e < 3; ++e) {
                if (face[static_cast<size_t>(e)] == a && face[static_cast<size_t>((e + 1) % 3)] == b) return true;
            }
            return false;
        };
        std::array<int, 3> nf0, nf1;
        if (winding(f0, u, v)) {
            nf0 = {u, q, p};
            nf1 = {v, p, q};
        } else {
            nf0 = {u, p, q};
            nf1 = {v, q, p};
        }
        if (!face_ok(m, nf0, radii) || !face_ok(m, nf1, radii)) continue;

        auto detach = [&](int f, int w) {
            auto& wf = m.vfaces[static_cast<size_t>(w)];
            wf.erase(std::remove(wf.begin(), wf.end(), f), wf.end());
        };
        detach(f0, u);
        detach(f0, v);
        detach(f1, u);
        detach(f1, v);
        m.faces[static_cast<size_t>(f0)] = nf0;
        m.faces[static_cast<size_t>(f1)] = nf1;
        for (int w : nf0) {
            auto& wf = m.vfaces[static_cast<size_t>(w)];
            if (std::find(wf.begin(), wf.end(), f0) == wf.end()) wf.push_back(f0);
        }
        for (int w : nf1) {
            auto& wf = m.vfaces[static_cast<size_t>(w)];
            if (std::find(wf.begin(), wf.end(), f1) == wf.end()) wf.push_back(f1);
        }
    }
}

void smooth(DynMesh& m, const EllipsoidRadii& radii, int iterations, bool with_flips) {
    for (int it = 0; it < iterations; ++it) {
        std::vector<Eigen::Vector3d> next(m.verts.size());
        for (size_t v = 0; v < m.verts.size(); ++v) {
            if (!m.vert_alive[v]) continue;
            const auto ring = m.ring(static_cast<int>(v));
            if (ring.empty()) {
                next[v] = m.verts[v];
                continue;
            }
            Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
            for (int u : ring) centroid += m.verts[static_cast<size_t>(u)];
            centroid /= static_cast<double>(ring.size());
            Eigen::Vector3d d = centroid - m.verts[v];
            const Eigen::Vector3d n = outward(m.verts[v], radii);
            d -= d.dot(n) * n; // tangential component only
            next[v] = project_point(m.verts[v] + 0.5 * d, radii);
        }
        for (size_t v = 0; v < m.verts.size(); ++v) {
            if (m.vert_alive[v]) m.verts[v] = next[v];
        }
        if (with_flips && (it % 10 == 9)) flip_edges(m, radii);
    }
}

} // namespace

TriMesh icosphere(int level) {
    if (level < 0) throw ValidationError("subdivision level must be nonnegative");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    MatrixXd V(12, 3);
    V << -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, 0, 0, -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1,
        -phi, phi, 0, -1, phi, 0, 1, -phi, 0, -1, -phi, 0, 1;
    V.rowwise().normalize();
    MatrixXi F(20, 3);
    F << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7,
        1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9,
        8, 1;

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        std::vector<Eigen::Vector3d> verts(static_cast<size_t>(V.rows()));
        for (int i = 0; i < V.rows(); ++i) verts[static_cast<size_t>(i)] = V.row(i);
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find({key.first, key.second});
            if (it != midpoint.end()) return it->second;
            const int idx = static_cast<int>(verts.size());
            verts.push_back((verts[static_cast<size_t>(a)] + verts[static_cast<size_t>(b)]).normalized());
            midpoint[{key.first, key.second}] = idx;
            return idx;
        };
        MatrixXi F2(F.rows() * 4, 3);
        for (int f = 0; f < F.rows(); ++f) {
            const int a = F(f, 0), b = F(f, 1), c = F(f, 2);
            const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            F2.row(4 * f + 0) << a, ab, ca;
            F2.row(4 * f + 1) << b, bc, ab;
            F2.row(4 * f + 2) << c, ca, bc;
            F2.row(4 * f + 3) << ab, bc, ca;
        }
        V.resize(static_cast<int>(verts.size()), 3);
        for (size_t i = 0; i < verts.size(); ++i) V.row(static_cast<int>(i)) = verts[i];
        F = F2;
    }
    return make_mesh(V, F);
}

TriMesh uniform_ellipsoid_mesh(const EllipsoidRadii& radii, int target_vertices) {
    if (target_vertices < 12) throw TargetTooSmall("need at least 12 vertices for a closed mesh");

    int level = 0;
    while (10 * (1 << (2 * level)) + 2 < target_vertices) ++level;
    const TriMesh sphere = icosphere(level);

    MatrixXd V = sphere_to_ellipsoid(sphere.V, radii);
    DynMesh dyn = to_dyn(V, sphere.F);

    smooth(dyn, radii, 10, false);
    if (dyn.alive_vertices > target_vertices) decimate_to(dyn, target_vertices, radii);
    smooth(dyn, radii, 30, true);
    return from_dyn(dyn);
}

namespace {

struct SphereGrid {
    int dim = 1;
    std::vector<std::vector<int>> cells;

    static SphereGrid build(const MatrixXd& U, const MatrixXi& F) {
        SphereGrid g;
        g.dim = std::max(4, static_cast<int>(std::cbrt(static_cast<double>(F.rows()))));
        g.cells.assign(static_cast<size_t>(g.dim) * g.dim * g.dim, {});
        for (int f = 0; f < F.rows(); ++f) {
            Eigen::Vector3d lo = U.row(F(f, 0)).cwiseMin(U.row(F(f, 1))).cwiseMin(U.row(F(f, 2)));
            Eigen::Vector3d hi = U.row(F(f, 0)).cwiseMax(U.row(F(f, 1))).cwiseMax(U.row(F(f, 2)));
            // spherical triangles bulge beyond their chordal box
            const double pad =
                0.5 * std::max({(U.row(F(f, 0)) - U.row(F(f, 1))).norm(),
                                (U.row(F(f, 1)) - U.row(F(f, 2))).norm(),
                                (U.row(F(f, 2)) - U.row(F(f, 0))).norm()}) +
                1e-9;
            lo.array() -= pad;
            hi.array() += pad;
            const auto [ilo, jlo, klo] = g.cell_of(lo);
            const auto [ihi, jhi, khi] = g.cell_of(hi);
            for (int i = ilo; i <= ihi; ++i) {
                for (int j = jlo; j <= jhi; ++j) {
                    for (int k = klo; k <= khi; ++k) {
                        g.cells[g.index(i, j, k)].push_back(f);
                    }
                }
            }
        }
        return g;
    }

    std::tuple<int, int, int> cell_of(const Eigen::Vector3d& p) const {
        auto clampi = [&](double x) {
            const int i = static_cast<int>((x + 1.0) * 0.5 * dim);
            return std::clamp(i, 0, dim - 1);
        };
        return {clampi(p.x()), clampi(p.y()), clampi(p.z())};
    }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * dim + j) * dim + k;
    }
};

struct Located {
    int face = -1;
    Eigen::Vector3d bary = Eigen::Vector3d::Zero();
    double residual = std::numeric_limits<double>::infinity();
};

// Radial barycentric containment on the unit sphere: solve s ~ sum l_i u_i,
// residual = most-negative normalized coordinate.
bool locate_in_face(const MatrixXd& U, const MatrixXi& F, int f, const Eigen::Vector3d& s,
                    Located& best) {
    Eigen::Matrix3d A;
    A.col(0) = U.row(F(f, 0));
    A.col(1) = U.row(F(f, 1));
    A.col(2) = U.row(F(f, 2));
    const double det = A.determinant();
    if (std::abs(det) < 1e-14) return false;
    const Eigen::Vector3d lambda = A.partialPivLu().solve(s);
    const double sum = lambda.sum();
    if (!(sum > 0.0)) return false; // behind the origin (antipodal face)
    const Eigen::Vector3d norm = lambda / sum;
    const double residual = std::max(0.0, -norm.minCoeff());
    if (residual < best.residual) {
        best = {f, norm, residual};
    }
    return residual == 0.0;
}

} // namespace

TriMesh pull_back(const TriMesh& source_mesh, const ParamMap& param, const TriMesh& samples) {
    const VectorXd q = ellipsoid_equation(samples.V, param.radii);
    if (((q.array() - 1.0).abs() > 1e-6).any()) {
        throw ValidationError("samples do not lie on the parameterization ellipsoid");
    }

    MatrixXd U = ellipsoid_to_sphere(param.positions, param.radii);
    U.rowwise().normalize();
    MatrixXd S = ellipsoid_to_sphere(samples.V, param.radii);
    S.rowwise().normalize();

    const SphereGrid grid = SphereGrid::build(U, source_mesh.F);

    MatrixXd out(samples.num_vertices(), 3);
    for (int sv = 0; sv < samples.num_vertices(); ++sv) {
        const Eigen::Vector3d s = S.row(sv);
        Located best;
        const auto [ci, cj, ck] = grid.cell_of(s);
        bool done = false;
        for (int radius = 0; radius <= grid.dim && !done; ++radius) {
            bool any_cell = false;
            for (int i = std::max(0, ci - radius); i <= std::min(grid.dim - 1, ci + radius) && !done; ++i) {
                for (int j = std::max(0, cj - radius); j <= std::min(grid.dim - 1, cj + radius) && !done; ++j) {
                    for (int k = std::max(0, ck - radius); k <= std::min(grid.dim - 1, ck + radius) && !done; ++k) {
                        if (radius > 0 && i != ci - radius && i != ci + radius && j != cj - radius &&
                            j != cj + radius && k != ck - radius && k != ck + radius) {
                            continue; // only the new shell
                        }
                        any_cell = true;
                        for (int f : grid.cells[grid.index(i, j, k)]) {
                            if (locate_in_face(U, source_mesh.F, f, s, best)) done = true;
                            if (done) break;
                        }
                    }
                }
            }
            if (best.residual <= 1e-6 && radius > 0) break; // good hit and one spare shell
            if (!any_cell && radius > 0) break;
        }
        if (best.residual > 1e-6) {
            // exhaustive fallback before reporting a genuine failure
            for (int f = 0; f < source_mesh.num_faces(); ++f) {
                if (locate_in_face(U, source_mesh.F, f, s, best)) break;
            }
        }
        if (best.face < 0 || best.residual > 1e-6) {
            throw LocationFailure("sample " + std::to_string(sv) +
                                  " not contained in any parameterization face (residual " +
                                  std::to_string(best.residual) + ")");
        }
        out.row(sv) = best.bary(0) * source_mesh.V.row(source_mesh.F(best.face, 0)) +
                      best.bary(1) * source_mesh.V.row(source_mesh.F(best.face, 1)) +
                      best.bary(2) * source_mesh.V.row(source_mesh.F(best.face, 2));
    }
    return make_mesh(out, samples.F);
}

} // namespace edemap
