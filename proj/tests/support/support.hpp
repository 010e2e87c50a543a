#pragma once

#include <sarap/linear.hpp>
#include <sarap/mesh.hpp>

#include <Eigen/Core>

#include <random>
#include <vector>

namespace sarap::testing {

/// Grid of res x res vertices with jittered positions, a random diagonal per cell
/// and a random height field. Always a valid manifold disk.
TriangleMesh random_mesh(std::uint64_t seed, int res);

/// Uniformly distributed proper rotation.
Eigen::Matrix3d random_rotation(std::mt19937_64& rng);

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& m);

/// Applies x -> R x + t to every row.
Positions rigid(const Positions& x, const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

/// Rows `indices` of x as a constraint set.
ConstraintSet constraints_at(const Positions& x, const std::vector<int>& indices);

/// Dense solution of the KKT system [A~ H^T; H 0] [V; mu] = [r + eps prev; C].
Positions dense_kkt(const Eigen::MatrixXd& a_reg, const ConstraintSet& c, const Positions& r_tilde);

/// Dense solution of A X = rhs with the constrained rows of X fixed to C.
Positions dense_constrained(const Eigen::MatrixXd& a, const Positions& rhs, const ConstraintSet& c);

/// Standard spokes-and-rims ARAP, written independently of the library: its own
/// cotangents, its own assembly, plain SVD rotations and direct elimination of the
/// handle rows. The same proximal term eps |V - V_prev|^2 and the same stopping rule
/// (max vertex displacement / bbox diagonal) are used. Starts from the rest pose with
/// handles snapped to their targets.
struct ArapOracleResult
{
    Positions positions;
    int iterations = 0;
    bool converged = false;
};
ArapOracleResult standard_arap(const TriangleMesh& mesh, const ConstraintSet& handles, double epsilon,
    double tolerance, int max_iterations);

} // namespace sarap::testing
