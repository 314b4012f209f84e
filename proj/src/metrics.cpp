#include "edemap/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "edemap/operators.hpp"
#include "edemap/qc.hpp"

namespace edemap {

VectorXd area_distortion(const TriMesh& mesh, const MatrixXd& map_positions) {
    const VectorXd source = face_areas(mesh, mesh.V);
    const VectorXd image = face_areas(mesh, map_positions);
    const double source_total = source.sum();
    const double image_total = image.sum();
    if (!(image.array() > 0.0).all()) throw DegenerateFaceError("zero-area face in the image");
    return ((image / image_total).array() / (source / source_total).array()).log();
}

double density_variance(const VectorXd& rho_vertex) {
    if ((rho_vertex.array() <= 0.0).any()) throw NonpositiveDensityError("density must be positive");
    const VectorXd normalized = rho_vertex / rho_vertex.mean();
    const double mean = normalized.mean();
    return (normalized.array() - mean).square().sum() / static_cast<double>(normalized.size());
}

double face_regularity(double e1, double e2, double e3) {
    if (!(e1 > 0.0 && e2 > 0.0 && e3 > 0.0)) throw ValidationError("edge lengths must be positive");
    const double sum = e1 + e2 + e3;
    return std::abs(e1 / sum - 1.0 / 3.0) + std::abs(e2 / sum - 1.0 / 3.0) +
           std::abs(e3 / sum - 1.0 / 3.0);
}

RemeshReport remesh_quality(const TriMesh& mesh, const MatrixXd& positions) {
    RemeshReport report;
    report.vertex_count = mesh.num_vertices();
    const VectorXd areas = face_areas(mesh, positions);
    report.delta_size = std::log(areas.maxCoeff() / areas.minCoeff());
    report.regularity.resize(mesh.num_faces());
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double e1 = (positions.row(mesh.F(f, 1)) - positions.row(mesh.F(f, 2))).norm();
        const double e2 = (positions.row(mesh.F(f, 2)) - positions.row(mesh.F(f, 0))).norm();
        const double e3 = (positions.row(mesh.F(f, 0)) - positions.row(mesh.F(f, 1))).norm();
        report.regularity(f) = face_regularity(e1, e2, e3);
    }
    report.delta_shape = report.regularity.mean();
    return report;
}

DistortionReport distortion_report(const TriMesh& mesh, const MatrixXd& map_positions,
                                   const VectorXd& population) {
    DistortionReport report;
    report.d_area = area_distortion(mesh, map_positions);
    const VectorXd abs_da = report.d_area.cwiseAbs();
    report.mean_abs_d_area = abs_da.mean();
    report.sd_abs_d_area =
        std::sqrt((abs_da.array() - report.mean_abs_d_area).square().sum() /
                  static_cast<double>(abs_da.size()));
    report.abs_mu = beltrami_of_surface_map(mesh, mesh.V, map_positions).cwiseAbs();
    report.mean_abs_mu = report.abs_mu.mean();
    report.flipped = count_inverted_faces(mesh, map_positions);

    VectorXd pop = population;
    if (pop.size() == 0) pop = face_areas(mesh, mesh.V);
    const DensityField density = make_density(mesh, map_positions, pop);
    report.var_normalized_density = density_variance(density.rho_vertex);
    return report;
}

void write_distortion_csv(const std::string& path, const DistortionReport& report) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw ParseError("cannot write " + path);
    std::fprintf(out, "face,d_area,abs_mu\n");
    for (int f = 0; f < report.d_area.size(); ++f) {
        std::fprintf(out, "%d,%.17g,%.17g\n", f, report.d_area(f), report.abs_mu(f));
    }
    std::fclose(out);
}

} // namespace edemap
