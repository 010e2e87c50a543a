#pragma once

#include <sarap/mesh.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace sarap {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Triangles with area below this fraction of the squared bbox diagonal are degenerate.
inline constexpr double kDegenerateAreaRatio = 1e-12;

/// Cotangent discretization of a triangle mesh.
///
/// Sign convention: L is positive semidefinite with L_uv = -(cot a + cot b)/2 on edges,
/// so that row v of M^-1 L X is the area-normalized Laplacian vector of X at v
/// (pointing from the weighted neighbor average towards v).
struct DiscreteOperators
{
    Eigen::VectorXd weights; ///< cot of the opposite angle, one per half-edge; never clamped
    Eigen::VectorXd areas;   ///< lumped (barycentric) vertex areas, diagonal of M
    SparseMatrix laplacian;
    int negative_weights = 0;

    int num_vertices() const { return static_cast<int>(areas.size()); }
};

/// Cotangent of the angle opposite half-edge h, evaluated at `positions`.
/// Throws DegenerateTriangle.
double cotan_weight(const HalfEdgeMesh& mesh, const Positions& positions, int h);
double cotan_weight(const HalfEdgeMesh& mesh, int h);

/// A_v = sum of incident triangle areas / 3.
Eigen::VectorXd vertex_areas(const HalfEdgeMesh& mesh, const Positions& positions);
Eigen::VectorXd vertex_areas(const HalfEdgeMesh& mesh);

/// Operators of the mesh connectivity evaluated at `positions` (rest pose by default).
DiscreteOperators assemble_laplacian(const HalfEdgeMesh& mesh, const Positions& positions);
DiscreteOperators assemble_laplacian(const HalfEdgeMesh& mesh);

/// Direct half-edge summation of the area-corrected cotan Laplacian vector of X at v.
/// Weights and areas come from `ops`; edge vectors from `x`.
Eigen::Vector3d laplacian_vector(const HalfEdgeMesh& mesh, const DiscreteOperators& ops, const Positions& x, int v);

/// All Laplacian vectors at once, M^-1 L X.
Positions laplacian_vectors(const DiscreteOperators& ops, const Positions& x);

/// Mean curvature magnitude |l_v| / 2 of the surface at its own positions.
Eigen::VectorXd mean_curvature(const HalfEdgeMesh& mesh, const Positions& positions);

} // namespace sarap
