#include "edemap/mesh.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace edemap {

namespace {

// Key for an undirected edge.
inline std::int64_t edge_key(int a, int b, int n) {
    if (a > b) std::swap(a, b);
    return static_cast<std::int64_t>(a) * n + b;
}

struct EdgeInfo {
    int count = 0;
    int face[2] = {-1, -1};
    int corner[2] = {-1, -1}; // corner index within the face opposite this edge
};

void orient_consistently(const MatrixXd& V, MatrixXi& F) {
    const int nf = static_cast<int>(F.rows());
    const int nv = static_cast<int>(V.rows());

    // directed-edge -> face lookup built on the fly; BFS over face adjacency,
    // flipping faces whose shared edge runs in the same direction.
    std::unordered_map<std::int64_t, std::vector<int>> faces_of_edge;
    faces_of_edge.reserve(static_cast<size_t>(nf) * 3);
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            faces_of_edge[edge_key(F(f, e), F(f, (e + 1) % 3), nv)].push_back(f);
        }
    }

    auto directed = [&](int f, int a, int b) {
        for (int e = 0; e < 3; ++e) {
            if (F(f, e) == a && F(f, (e + 1) % 3) == b) return true;
        }
        return false;
    };

    std::vector<char> visited(static_cast<size_t>(nf), 0);
    std::deque<int> queue;
    for (int seed = 0; seed < nf; ++seed) {
        if (visited[static_cast<size_t>(seed)]) continue;
        visited[static_cast<size_t>(seed)] = 1;
        queue.push_back(seed);
        while (!queue.empty()) {
            const int f = queue.front();
            queue.pop_front();
            for (int e = 0; e < 3; ++e) {
                const int a = F(f, e);
                const int b = F(f, (e + 1) % 3);
                for (int g : faces_of_edge[edge_key(a, b, nv)]) {
                    if (g == f) continue;
                    const bool same_dir = directed(g, a, b);
                    if (!visited[static_cast<size_t>(g)]) {
                        if (same_dir) std::swap(F(g, 1), F(g, 2));
                        visited[static_cast<size_t>(g)] = 1;
                        queue.push_back(g);
                    } else if (same_dir) {
                        throw TopologyError("orientation is globally inconsistent (non-orientable input)");
                    }
                }
            }
        }
    }

    // Global outward convention: the signed volume of a closed CCW-outward
    // mesh is positive.
    double vol6 = 0.0;
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d p0 = V.row(F(f, 0));
        const Eigen::Vector3d p1 = V.row(F(f, 1));
        const Eigen::Vector3d p2 = V.row(F(f, 2));
        vol6 += p0.dot(p1.cross(p2));
    }
    if (vol6 < 0.0) {
        for (int f = 0; f < nf; ++f) std::swap(F(f, 1), F(f, 2));
    }
}

} // namespace

double TriMesh::bbox_diagonal() const {
    return (V.colwise().maxCoeff() - V.colwise().minCoeff()).norm();
}

TriMesh make_mesh(const MatrixXd& V, const MatrixXi& F) {
    if (V.rows() < 4 || F.rows() < 4) {
        throw TopologyError("mesh too small to be a closed surface");
    }
    if (V.cols() != 3 || F.cols() != 3) {
        throw ParseError("vertices must be 3D points and faces triangles");
    }
    const int nv = static_cast<int>(V.rows());
    const int nf = static_cast<int>(F.rows());
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            if (F(f, e) < 0 || F(f, e) >= nv) throw ParseError("face index out of range");
        }
        if (F(f, 0) == F(f, 1) || F(f, 1) == F(f, 2) || F(f, 2) == F(f, 0)) {
            throw DegenerateFaceError("face with repeated vertex index");
        }
    }

    TriMesh mesh;
    mesh.V = V;
    mesh.F = F;
    orient_consistently(mesh.V, mesh.F);

    // Edge table and manifoldness: every undirected edge must appear in
    // exactly two faces, once per direction after orientation.
    std::map<std::pair<int, int>, EdgeInfo> edges;
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) {
            int a = mesh.F(f, e), b = mesh.F(f, (e + 1) % 3);
            auto key = std::minmax(a, b);
            EdgeInfo& info = edges[{key.first, key.second}];
            if (info.count >= 2) throw TopologyError("non-manifold edge (shared by more than two faces)");
            info.face[info.count] = f;
            info.corner[info.count] = (e + 2) % 3;
            ++info.count;
        }
    }
    for (const auto& [key, info] : edges) {
        if (info.count != 2) {
            throw TopologyError("boundary edge found (surface is not closed)");
        }
    }

    mesh.E.resize(static_cast<int>(edges.size()), 2);
    {
        int row = 0;
        for (const auto& [key, info] : edges) {
            mesh.E(row, 0) = key.first;
            mesh.E(row, 1) = key.second;
            ++row;
        }
    }

    const int euler = nv - mesh.num_edges() + nf;
    if (euler != 2) {
        throw TopologyError("Euler characteristic " + std::to_string(euler) + " != 2 (not genus-0)");
    }

    // Degenerate faces, relative to the bounding-box scale.
    const double diag = mesh.bbox_diagonal();
    const double area_floor = 1e-12 * diag * diag;
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d e1 = mesh.V.row(mesh.F(f, 1)) - mesh.V.row(mesh.F(f, 0));
        const Eigen::Vector3d e2 = mesh.V.row(mesh.F(f, 2)) - mesh.V.row(mesh.F(f, 0));
        if (0.5 * e1.cross(e2).norm() <= area_floor) {
            throw DegenerateFaceError("zero-area face " + std::to_string(f));
        }
    }

    mesh.vert_faces.assign(static_cast<size_t>(nv), {});
    for (int f = 0; f < nf; ++f) {
        for (int e = 0; e < 3; ++e) mesh.vert_faces[static_cast<size_t>(mesh.F(f, e))].push_back(f);
    }
    mesh.vert_verts.assign(static_cast<size_t>(nv), {});
    for (int r = 0; r < mesh.num_edges(); ++r) {
        mesh.vert_verts[static_cast<size_t>(mesh.E(r, 0))].push_back(mesh.E(r, 1));
        mesh.vert_verts[static_cast<size_t>(mesh.E(r, 1))].push_back(mesh.E(r, 0));
    }

    mesh.face_adj.setConstant(nf, 3, -1);
    for (const auto& [key, info] : edges) {
        (void)key;
        for (int s = 0; s < 2; ++s) {
            const int f = info.face[s];
            const int g = info.face[1 - s];
            const int e = (info.corner[s] + 1) % 3; // edge opposite the stored corner
            mesh.face_adj(f, e) = g;
        }
    }
    return mesh;
}

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<std::array<double, 3>> verts;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#') continue;
        if (tag == "v") {
            std::array<double, 3> p{};
            if (!(ss >> p[0] >> p[1] >> p[2])) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": malformed vertex");
            }
            verts.push_back(p);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept v, v/vt, v/vt/vn, v//vn
                const auto slash = tok.find('/');
                const std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                int v = 0;
                const auto res = std::from_chars(head.data(), head.data() + head.size(), v);
                if (res.ec != std::errc()) {
                    throw ParseError(path + ":" + std::to_string(lineno) + ": malformed face index");
                }
                if (v < 0) v = static_cast<int>(verts.size()) + 1 + v; // negative = relative
                idx.push_back(v - 1);
            }
            if (idx.size() != 3) {
                throw ParseError(path + ":" + std::to_string(lineno) + ": only triangle faces are supported");
            }
            faces.push_back({idx[0], idx[1], idx[2]});
        }
        // all other records (vn, vt, g, o, s, usemtl, mtllib) are ignored
    }
    if (verts.empty() || faces.empty()) throw ParseError(path + ": no geometry found");
    MatrixXd V(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) V.row(static_cast<int>(i)) << verts[i][0], verts[i][1], verts[i][2];
    MatrixXi F(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i) F.row(static_cast<int>(i)) << faces[i][0], faces[i][1], faces[i][2];
    return make_mesh(V, F);
}

TriMesh load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string header;
    in >> header;
    if (header != "OFF") throw ParseError(path + ": missing OFF header");
    int nv = 0, nf = 0, ne = 0;
    if (!(in >> nv >> nf >> ne)) throw ParseError(path + ": malformed OFF counts");
    if (nv <= 0 || nf <= 0) throw ParseError(path + ": empty OFF mesh");
    MatrixXd V(nv, 3);
    for (int i = 0; i < nv; ++i) {
        if (!(in >> V(i, 0) >> V(i, 1) >> V(i, 2))) throw ParseError(path + ": malformed OFF vertex");
    }
    MatrixXi F(nf, 3);
    for (int f = 0; f < nf; ++f) {
        int k = 0;
        if (!(in >> k)) throw ParseError(path + ": malformed OFF face");
        if (k != 3) throw ParseError(path + ": only triangle faces are supported");
        if (!(in >> F(f, 0) >> F(f, 1) >> F(f, 2))) throw ParseError(path + ": malformed OFF face");
    }
    return make_mesh(V, F);
}

} // namespace

TriMesh load_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return load_obj(path);
    if (ext == "off") return load_off(path);
    throw ParseError("unsupported mesh format '" + ext + "' (expected obj or off)");
}

void save_obj(const std::string& path, const MatrixXd& V, const MatrixXi& F) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw ParseError("cannot write " + path);
    for (int i = 0; i < V.rows(); ++i) {
        std::fprintf(out, "v %.17g %.17g %.17g\n", V(i, 0), V(i, 1), V(i, 2));
    }
    for (int f = 0; f < F.rows(); ++f) {
        std::fprintf(out, "f %d %d %d\n", F(f, 0) + 1, F(f, 1) + 1, F(f, 2) + 1);
    }
    std::fclose(out);
}

VectorXd load_population_csv(const std::string& path, int expected_faces) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double v = 0.0;
        if (!(ss >> v)) throw ParseError(path + ":" + std::to_string(lineno) + ": malformed population value");
        if (!(v > 0.0)) throw ParseError("population must be positive (line " + std::to_string(lineno) + ")");
        values.push_back(v);
    }
    if (static_cast<int>(values.size()) != expected_faces) {
        throw ParseError(path + ": expected " + std::to_string(expected_faces) + " rows, got " +
                         std::to_string(values.size()));
    }
    return Eigen::Map<VectorXd>(values.data(), static_cast<int>(values.size()));
}

VectorXd face_areas(const TriMesh& mesh, const MatrixXd& positions) {
    const int nf = mesh.num_faces();
    VectorXd areas(nf);
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d e1 = positions.row(mesh.F(f, 1)) - positions.row(mesh.F(f, 0));
        const Eigen::Vector3d e2 = positions.row(mesh.F(f, 2)) - positions.row(mesh.F(f, 0));
        areas(f) = 0.5 * e1.cross(e2).norm();
    }
    return areas;
}

MatrixXd face_normals(const TriMesh& mesh, const MatrixXd& positions) {
    const int nf = mesh.num_faces();
    MatrixXd normals(nf, 3);
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d e1 = positions.row(mesh.F(f, 1)) - positions.row(mesh.F(f, 0));
        const Eigen::Vector3d e2 = positions.row(mesh.F(f, 2)) - positions.row(mesh.F(f, 0));
        Eigen::Vector3d n = e1.cross(e2);
        const double len = n.norm();
        if (len <= 0.0) throw DegenerateFaceError("zero-area face " + std::to_string(f));
        normals.row(f) = n / len;
    }
    return normals;
}

SparseMatrixd face_to_vertex_matrix(const TriMesh& mesh, const MatrixXd& positions) {
    const VectorXd areas = face_areas(mesh, positions);
    const int nv = mesh.num_vertices();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<size_t>(mesh.num_faces()) * 3);
    for (int i = 0; i < nv; ++i) {
        double total = 0.0;
        for (int f : mesh.vert_faces[static_cast<size_t>(i)]) total += areas(f);
        if (!(total > 0.0)) throw DegenerateFaceError("vertex " + std::to_string(i) + " has zero incident area");
        for (int f : mesh.vert_faces[static_cast<size_t>(i)]) {
            triplets.emplace_back(i, f, areas(f) / total);
        }
    }
    SparseMatrixd M(nv, mesh.num_faces());
    M.setFromTriplets(triplets.begin(), triplets.end());
    return M;
}

} // namespace edemap
