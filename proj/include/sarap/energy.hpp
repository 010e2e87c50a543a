#pragma once

#include <sarap/linear.hpp>
#include <sarap/mesh.hpp>
#include <sarap/operators.hpp>

#include <Eigen/Core>

#include <memory>
#include <vector>

namespace sarap {

using RotationField = std::vector<Eigen::Matrix3d>;

enum class RotationFit { EdgeOnly, Full };

/// Rest-state data the energy is measured against. Immutable once built.
struct DeformModel
{
    HalfEdgeMesh mesh;
    DiscreteOperators ops;
    Positions rest_edges;      ///< one row per half-edge: target - origin
    Positions rest_laplacians; ///< one row per vertex: l_v of the rest pose
    double bbox_diagonal = 0.0;

    static std::shared_ptr<const DeformModel> build(TriangleMesh mesh);
    explicit DeformModel(HalfEdgeMesh m);

    int num_vertices() const { return mesh.num_vertices(); }
    const Positions& rest() const { return mesh.positions(); }
};

/// Rotation R maximizing tr(R S) for S = sum w e e'^T = U S W^T, i.e.
/// R = W diag(1, 1, det(W U^T)) U^T. Falls back to the identity when S has rank < 2
/// (or is not finite); `degenerate` reports that case.
Eigen::Matrix3d fit_procrustes(const Eigen::Matrix3d& covariance, bool* degenerate = nullptr);

/// sum_{e in N_v} w_e e e'^T over the spokes-and-rims neighborhood of v.
Eigen::Matrix3d edge_covariance(const DeformModel& model, const Positions& deformed, int v);

Eigen::Matrix3d fit_rotation_edge_only(const DeformModel& model, const Positions& deformed, int v);

/// Fits the rotation to edges and the vertex Laplacian vector together:
/// S = (1 - lambda) sum (w_e/6) e e'^T + lambda A_v l_v l'_v^T, the exact per-vertex
/// minimizer of the total energy for fixed positions.
Eigen::Matrix3d fit_rotation_full(const DeformModel& model, const Positions& deformed, int v, double lambda);

/// All rotations at once. Per-face covariances are accumulated into the incident vertices,
/// which gives the same result as the per-vertex fits. `degenerate_count` is optional.
RotationField local_step(const DeformModel& model, const Positions& deformed, RotationFit fit, double lambda,
    int* degenerate_count = nullptr);

/// E_ARAP = sum_v sum_{e in N_v} (w_e / 6) |e' - R_v e|^2.
///
/// The 1/6 makes the quadratic part exactly V'^T L V' for the half-cotan L, so the
/// stationarity condition of the total energy is the global-step system below.
double energy_arap(const DeformModel& model, const Positions& deformed, const RotationField& rotations);

/// E_smooth = sum_v A_v |l'_v - R_v l_v|^2, evaluated vertex by vertex with the
/// half-edge loop for l'_v.
double energy_smooth(const DeformModel& model, const Positions& deformed, const RotationField& rotations);

/// Same quantity as ||M^-1 L V' - [R_v l_v]||^2 weighted by M.
double energy_smooth_matrix(const DeformModel& model, const Positions& deformed, const RotationField& rotations);

inline double energy_total(double lambda, double e_arap, double e_smooth)
{
    return (1.0 - lambda) * e_arap + lambda * e_smooth;
}

struct EnergyBreakdown
{
    double total = 0.0;
    double arap = 0.0;
    double smooth = 0.0;
};

EnergyBreakdown evaluate_energy(const DeformModel& model, const Positions& deformed, const RotationField& rotations,
    double lambda);

/// lambda L M^-1 L + (1 - lambda) L, exactly symmetric.
SparseSym assemble_system_matrix(const DiscreteOperators& ops, double lambda);

/// lambda L [R_v l_v] + (1 - lambda) b with b_p = sum_v sum_{e in N_v} d_e^p (w_e/6) R_v e.
/// With identity rotations this reproduces A * rest.
Positions assemble_rhs(const DeformModel& model, const RotationField& rotations, double lambda);

/// Gradient of the total energy in the positions, rotations held fixed: 2 (A V' - rhs).
Positions energy_gradient(const DeformModel& model, const SparseSym& system, const Positions& deformed,
    const RotationField& rotations, double lambda);

} // namespace sarap
