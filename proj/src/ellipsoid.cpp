#include "edemap/ellipsoid.hpp"

namespace edemap {

VectorXd ellipsoid_equation(const MatrixXd& positions, const EllipsoidRadii& radii) {
    return positions.col(0).array().square() / (radii.a * radii.a) +
           positions.col(1).array().square() / (radii.b * radii.b) +
           positions.col(2).array().square() / (radii.c * radii.c);
}

MatrixXd project_to_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii) {
    const VectorXd q = ellipsoid_equation(positions, radii);
    if ((q.array() <= 0.0).any()) {
        throw ZeroVectorError("cannot project the origin onto the ellipsoid");
    }
    return positions.array().colwise() / q.array().sqrt();
}

MatrixXd vertex_normals_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii) {
    MatrixXd n(positions.rows(), 3);
    n.col(0) = positions.col(0) / (radii.a * radii.a);
    n.col(1) = positions.col(1) / (radii.b * radii.b);
    n.col(2) = positions.col(2) / (radii.c * radii.c);
    const VectorXd len = n.rowwise().norm();
    if ((len.array() <= 0.0).any()) {
        throw ZeroVectorError("normal undefined at the origin");
    }
    return n.array().colwise() / len.array();
}

MatrixXd ellipsoid_to_sphere(const MatrixXd& positions, const EllipsoidRadii& radii) {
    MatrixXd s = positions;
    s.col(0) /= radii.a;
    s.col(1) /= radii.b;
    s.col(2) /= radii.c;
    return s;
}

MatrixXd sphere_to_ellipsoid(const MatrixXd& positions, const EllipsoidRadii& radii) {
    MatrixXd e = positions;
    e.col(0) *= radii.a;
    e.col(1) *= radii.b;
    e.col(2) *= radii.c;
    return e;
}

} // namespace edemap
