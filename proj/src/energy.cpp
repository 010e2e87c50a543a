#include <sarap/energy.hpp>
#include <sarap/error.hpp>

#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>

namespace sarap {

DeformModel::DeformModel(HalfEdgeMesh m)
    : mesh(std::move(m))
    , ops(assemble_laplacian(mesh))
    , bbox_diagonal(mesh.bbox_diagonal())
{
    const auto& x = mesh.positions();
    rest_edges.resize(mesh.num_halfedges(), 3);
    for (int h = 0; h < mesh.num_halfedges(); ++h) {
        rest_edges.row(h) = x.row(mesh.target(h)) - x.row(mesh.origin(h));
    }
    rest_laplacians = laplacian_vectors(ops, x);
}

std::shared_ptr<const DeformModel> DeformModel::build(TriangleMesh mesh)
{
    return std::make_shared<const DeformModel>(HalfEdgeMesh(std::move(mesh)));
}

Eigen::Matrix3d fit_procrustes(const Eigen::Matrix3d& covariance, bool* degenerate)
{
    if (degenerate) {
        *degenerate = false;
    }
    if (!covariance.allFinite()) {
        if (degenerate) {
            *degenerate = true;
        }
        return Eigen::Matrix3d::Identity();
    }
    const Eigen::JacobiSVD<Eigen::Matrix3d> svd(covariance, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Vector3d& sigma = svd.singularValues();
    if (!(sigma(0) > 0.0) || sigma(1) <= 1e-12 * sigma(0)) {
        if (degenerate) {
            *degenerate = true;
        }
        return Eigen::Matrix3d::Identity();
    }
    const Eigen::Matrix3d& u = svd.matrixU();
    const Eigen::Matrix3d& w = svd.matrixV();
    Eigen::Vector3d d(1.0, 1.0, (w * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
    return w * d.asDiagonal() * u.transpose();
}

namespace {

/// sum over the face's half-edges of w e e'^T
Eigen::Matrix3d face_covariance(const DeformModel& model, const Positions& deformed, int f)
{
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    for (int h = 3 * f; h < 3 * f + 3; ++h) {
        const Eigen::Vector3d e = model.rest_edges.row(h);
        const Eigen::Vector3d ed = deformed.row(model.mesh.target(h)) - deformed.row(model.mesh.origin(h));
        s.noalias() += model.ops.weights(h) * e * ed.transpose();
    }
    return s;
}

} // namespace

Eigen::Matrix3d edge_covariance(const DeformModel& model, const Positions& deformed, int v)
{
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    for (int h : spokes_and_rims(model.mesh, v)) {
        const Eigen::Vector3d e = model.rest_edges.row(h);
        const Eigen::Vector3d ed = deformed.row(model.mesh.target(h)) - deformed.row(model.mesh.origin(h));
        s.noalias() += model.ops.weights(h) * e * ed.transpose();
    }
    return s;
}

Eigen::Matrix3d fit_rotation_edge_only(const DeformModel& model, const Positions& deformed, int v)
{
    return fit_procrustes(edge_covariance(model, deformed, v));
}

Eigen::Matrix3d fit_rotation_full(const DeformModel& model, const Positions& deformed, int v, double lambda)
{
    const Eigen::Vector3d l = model.rest_laplacians.row(v);
    const Eigen::Vector3d ld = laplacian_vector(model.mesh, model.ops, deformed, v);
    const Eigen::Matrix3d s = (1.0 - lambda) / 6.0 * edge_covariance(model, deformed, v) +
                              lambda * model.ops.areas(v) * l * ld.transpose();
    return fit_procrustes(s);
}

RotationField local_step(const DeformModel& model, const Positions& deformed, RotationFit fit, double lambda,
    int* degenerate_count)
{
    const int n = model.num_vertices();
    const int nf = model.mesh.num_faces();
    const auto& t = model.mesh.triangles();

    std::vector<Eigen::Matrix3d> cov(static_cast<std::size_t>(n), Eigen::Matrix3d::Zero());
    for (int f = 0; f < nf; ++f) {
        const Eigen::Matrix3d s = face_covariance(model, deformed, f);
        for (int k = 0; k < 3; ++k) {
            cov[static_cast<std::size_t>(t(f, k))] += s;
        }
    }
    Positions deformed_laplacians;
    if (fit == RotationFit::Full) {
        deformed_laplacians = laplacian_vectors(model.ops, deformed);
    }

    RotationField rotations(static_cast<std::size_t>(n));
    int degenerate = 0;
    for (int v = 0; v < n; ++v) {
        Eigen::Matrix3d s = cov[static_cast<std::size_t>(v)];
        if (fit == RotationFit::Full) {
            const Eigen::Vector3d l = model.rest_laplacians.row(v);
            const Eigen::Vector3d ld = deformed_laplacians.row(v);
            s = (1.0 - lambda) / 6.0 * s + lambda * model.ops.areas(v) * l * ld.transpose();
        }
        bool bad = false;
        rotations[static_cast<std::size_t>(v)] = fit_procrustes(s, &bad);
        degenerate += bad ? 1 : 0;
    }
    if (degenerate_count) {
        *degenerate_count = degenerate;
    }
    return rotations;
}

double energy_arap(const DeformModel& model, const Positions& deformed, const RotationField& rotations)
{
    const auto& t = model.mesh.triangles();
    double energy = 0.0;
    for (int f = 0; f < model.mesh.num_faces(); ++f) {
        for (int h = 3 * f; h < 3 * f + 3; ++h) {
            const Eigen::Vector3d e = model.rest_edges.row(h);
            const Eigen::Vector3d ed = deformed.row(model.mesh.target(h)) - deformed.row(model.mesh.origin(h));
            const double w = model.ops.weights(h) / 6.0;
            for (int k = 0; k < 3; ++k) {
                energy += w * (ed - rotations[static_cast<std::size_t>(t(f, k))] * e).squaredNorm();
            }
        }
    }
    return energy;
}

double energy_smooth(const DeformModel& model, const Positions& deformed, const RotationField& rotations)
{
    double energy = 0.0;
    for (int v = 0; v < model.num_vertices(); ++v) {
        const Eigen::Vector3d ld = laplacian_vector(model.mesh, model.ops, deformed, v);
        const Eigen::Vector3d l = model.rest_laplacians.row(v);
        energy += model.ops.areas(v) * (ld - rotations[static_cast<std::size_t>(v)] * l).squaredNorm();
    }
    return energy;
}

namespace {

Positions rotated_laplacians(const DeformModel& model, const RotationField& rotations)
{
    Positions r(model.num_vertices(), 3);
    for (int v = 0; v < model.num_vertices(); ++v) {
        r.row(v) = (rotations[static_cast<std::size_t>(v)] * model.rest_laplacians.row(v).transpose()).transpose();
    }
    return r;
}

} // namespace

double energy_smooth_matrix(const DeformModel& model, const Positions& deformed, const RotationField& rotations)
{
    const Positions diff = laplacian_vectors(model.ops, deformed) - rotated_laplacians(model, rotations);
    return model.ops.areas.dot(diff.rowwise().squaredNorm());
}

EnergyBreakdown evaluate_energy(const DeformModel& model, const Positions& deformed, const RotationField& rotations,
    double lambda)
{
    EnergyBreakdown e;
    e.arap = energy_arap(model, deformed, rotations);
    e.smooth = energy_smooth_matrix(model, deformed, rotations);
    e.total = energy_total(lambda, e.arap, e.smooth);
    return e;
}

SparseSym assemble_system_matrix(const DiscreteOperators& ops, double lambda)
{
    const SparseSym& l = ops.laplacian;
    const Eigen::VectorXd inv_area = ops.areas.cwiseInverse();
    SparseSym scaled = inv_area.asDiagonal() * l;
    SparseSym bilaplacian = (l * scaled).pruned();
    SparseSym a = lambda * bilaplacian + (1.0 - lambda) * l;
    SparseSym at = a.transpose();
    SparseSym sym = 0.5 * (a + at);
    sym.makeCompressed();
    return sym;
}

Positions assemble_rhs(const DeformModel& model, const RotationField& rotations, double lambda)
{
    const int n = model.num_vertices();
    const auto& t = model.mesh.triangles();
    Positions b = Positions::Zero(n, 3);
    for (int f = 0; f < model.mesh.num_faces(); ++f) {
        const Eigen::Matrix3d r_sum = rotations[static_cast<std::size_t>(t(f, 0))] +
                                      rotations[static_cast<std::size_t>(t(f, 1))] +
                                      rotations[static_cast<std::size_t>(t(f, 2))];
        for (int h = 3 * f; h < 3 * f + 3; ++h) {
            const Eigen::Vector3d term = model.ops.weights(h) / 6.0 * (r_sum * model.rest_edges.row(h).transpose());
            b.row(model.mesh.target(h)) += term.transpose();
            b.row(model.mesh.origin(h)) -= term.transpose();
        }
    }
    if (lambda == 0.0) {
        return b;
    }
    const Positions smooth = model.ops.laplacian * rotated_laplacians(model, rotations);
    return lambda * smooth + (1.0 - lambda) * b;
}

Positions energy_gradient(const DeformModel& model, const SparseSym& system, const Positions& deformed,
    const RotationField& rotations, double lambda)
{
    return 2.0 * (system * deformed - assemble_rhs(model, rotations, lambda));
}

} // namespace sarap
