#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/Sparse>

#include <string>
#include <vector>

#include "edemap/errors.hpp"

namespace edemap {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;
using SparseMatrixd = Eigen::SparseMatrix<double>;

/// Closed, oriented, genus-0 triangle mesh.
///
/// V holds vertex positions (rows), F holds counterclockwise vertex-index
/// triples with respect to the outward normal. Edge table and incidence
/// lists are derived at construction; all members are immutable afterwards.
struct TriMesh {
    MatrixXd V; // |V| x 3
    MatrixXi F; // |F| x 3, CCW w.r.t. outward normal

    MatrixXi E;                              // |E| x 2, i < j
    std::vector<std::vector<int>> vert_faces; // incident faces per vertex
    std::vector<std::vector<int>> vert_verts; // 1-ring neighbours per vertex
    MatrixXi face_adj;                        // |F| x 3, neighbour across edge (F(f,e),F(f,e+1))

    int num_vertices() const { return static_cast<int>(V.rows()); }
    int num_faces() const { return static_cast<int>(F.rows()); }
    int num_edges() const { return static_cast<int>(E.rows()); }

    double bbox_diagonal() const;
};

/// Builds a validated mesh from raw vertices and faces: orients faces
/// consistently (outward), derives the edge table and incidence lists, and
/// checks that the surface is closed, manifold, genus-0, and free of
/// degenerate faces.
TriMesh make_mesh(const MatrixXd& V, const MatrixXi& F);

/// Loads OBJ or OFF (chosen by file extension) and validates via make_mesh.
TriMesh load_mesh(const std::string& path);

/// Writes positions/faces as OBJ (v/f records, 1-based). Output is
/// locale-independent and round-trips doubles exactly.
void save_obj(const std::string& path, const MatrixXd& V, const MatrixXi& F);

/// Parses a one-positive-value-per-line CSV; row i is the population of
/// face i. Throws ParseError on malformed or nonpositive entries.
VectorXd load_population_csv(const std::string& path, int expected_faces);

/// Area of every face by the cross-product formula.
VectorXd face_areas(const TriMesh& mesh, const MatrixXd& positions);

/// Unit face normals (CCW orientation).
MatrixXd face_normals(const TriMesh& mesh, const MatrixXd& positions);

/// Row-stochastic |V| x |F| conversion matrix: entry (i,j) is
/// Area(T_j) / sum of incident areas when face j touches vertex i.
SparseMatrixd face_to_vertex_matrix(const TriMesh& mesh, const MatrixXd& positions);

} // namespace edemap
