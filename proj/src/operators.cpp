#include <sarap/error.hpp>
#include <sarap/operators.hpp>

#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace sarap {

namespace {

double degenerate_area_threshold(const Positions& positions)
{
    const double d = bbox_diagonal(positions);
    return kDegenerateAreaRatio * d * d;
}

double triangle_area(const Positions& x, const Triangles& t, int f)
{
    const Eigen::Vector3d a = x.row(t(f, 0));
    const Eigen::Vector3d b = x.row(t(f, 1));
    const Eigen::Vector3d c = x.row(t(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
}

void check_area(double area, double threshold, int f)
{
    if (!(area >= threshold) || area == 0.0) {
        throw Error(ErrorCode::DegenerateTriangle,
            "triangle " + std::to_string(f) + " has area " + std::to_string(area));
    }
}

double cotan_unchecked(const HalfEdgeMesh& mesh, const Positions& x, int h)
{
    const Eigen::Vector3d a = x.row(mesh.origin(h));
    const Eigen::Vector3d b = x.row(mesh.target(h));
    const Eigen::Vector3d c = x.row(mesh.opposite_corner(h));
    const Eigen::Vector3d ca = a - c;
    const Eigen::Vector3d cb = b - c;
    return ca.dot(cb) / ca.cross(cb).norm();
}

} // namespace

double cotan_weight(const HalfEdgeMesh& mesh, const Positions& positions, int h)
{
    if (h < 0 || h >= mesh.num_halfedges()) {
        throw Error(ErrorCode::OutOfRange, "half-edge " + std::to_string(h) + " out of range");
    }
    const int f = mesh.face(h);
    check_area(triangle_area(positions, mesh.triangles(), f), degenerate_area_threshold(positions), f);
    return cotan_unchecked(mesh, positions, h);
}

double cotan_weight(const HalfEdgeMesh& mesh, int h)
{
    return cotan_weight(mesh, mesh.positions(), h);
}

Eigen::VectorXd vertex_areas(const HalfEdgeMesh& mesh, const Positions& positions)
{
    const double threshold = degenerate_area_threshold(positions);
    Eigen::VectorXd areas = Eigen::VectorXd::Zero(mesh.num_vertices());
    const auto& t = mesh.triangles();
    for (int f = 0; f < mesh.num_faces(); ++f) {
        const double area = triangle_area(positions, t, f);
        check_area(area, threshold, f);
        for (int k = 0; k < 3; ++k) {
            areas(t(f, k)) += area / 3.0;
        }
    }
    return areas;
}

Eigen::VectorXd vertex_areas(const HalfEdgeMesh& mesh)
{
    return vertex_areas(mesh, mesh.positions());
}

DiscreteOperators assemble_laplacian(const HalfEdgeMesh& mesh, const Positions& positions)
{
    if (positions.rows() != mesh.num_vertices()) {
        throw Error(ErrorCode::InvalidParam, "position count does not match mesh");
    }
    DiscreteOperators ops;
    ops.areas = vertex_areas(mesh, positions);

    const int nh = mesh.num_halfedges();
    ops.weights.resize(nh);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(4 * nh));
    for (int h = 0; h < nh; ++h) {
        const double w = cotan_unchecked(mesh, positions, h);
        ops.weights(h) = w;
        if (w < 0.0) {
            ++ops.negative_weights;
        }
        const int a = mesh.origin(h);
        const int b = mesh.target(h);
        // (a,b) and (b,a) receive identical contribution sequences, so L is exactly symmetric.
        triplets.emplace_back(a, b, -0.5 * w);
        triplets.emplace_back(b, a, -0.5 * w);
        triplets.emplace_back(a, a, 0.5 * w);
        triplets.emplace_back(b, b, 0.5 * w);
    }
    const int n = mesh.num_vertices();
    ops.laplacian.resize(n, n);
    ops.laplacian.setFromTriplets(triplets.begin(), triplets.end());
    ops.laplacian.makeCompressed();
    return ops;
}

DiscreteOperators assemble_laplacian(const HalfEdgeMesh& mesh)
{
    return assemble_laplacian(mesh, mesh.positions());
}

Eigen::Vector3d laplacian_vector(const HalfEdgeMesh& mesh, const DiscreteOperators& ops, const Positions& x, int v)
{
    Eigen::Vector3d l = Eigen::Vector3d::Zero();
    for (int f : mesh.faces_around(v)) {
        for (int h = 3 * f; h < 3 * f + 3; ++h) {
            const int sign = mesh.target(h) == v ? 1 : (mesh.origin(h) == v ? -1 : 0);
            if (sign == 0) {
                continue;
            }
            const Eigen::Vector3d e = x.row(mesh.target(h)) - x.row(mesh.origin(h));
            l += ops.weights(h) / (2.0 * ops.areas(v)) * sign * e;
        }
    }
    return l;
}

Positions laplacian_vectors(const DiscreteOperators& ops, const Positions& x)
{
    Positions lx = ops.laplacian * x;
    return ops.areas.cwiseInverse().asDiagonal() * lx;
}

Eigen::VectorXd mean_curvature(const HalfEdgeMesh& mesh, const Positions& positions)
{
    const auto ops = assemble_laplacian(mesh, positions);
    return 0.5 * laplacian_vectors(ops, positions).rowwise().norm();
}

} // namespace sarap
