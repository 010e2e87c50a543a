#include <sarap/deformer.hpp>
#include <sarap/error.hpp>

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <string>

namespace sarap {

RotationFit parse_rotation_fit(std::string_view name)
{
    if (name == "edge_only") return RotationFit::EdgeOnly;
    if (name == "full") return RotationFit::Full;
    throw Error(ErrorCode::InvalidParam, "unknown rotation fit '" + std::string(name) + "'");
}

ConstraintMode parse_constraint_mode(std::string_view name)
{
    if (name == "substitution") return ConstraintMode::Substitution;
    if (name == "kkt_updating") return ConstraintMode::KktUpdating;
    throw Error(ErrorCode::InvalidParam, "unknown constraint mode '" + std::string(name) + "'");
}

InitMode parse_init_mode(std::string_view name)
{
    if (name == "original_mesh") return InitMode::OriginalMesh;
    if (name == "poisson") return InitMode::Poisson;
    if (name == "bilaplacian") return InitMode::BiLaplacian;
    if (name == "previous") return InitMode::Previous;
    throw Error(ErrorCode::InvalidParam, "unknown init mode '" + std::string(name) + "'");
}

std::string_view to_string(RotationFit fit)
{
    return fit == RotationFit::EdgeOnly ? "edge_only" : "full";
}

std::string_view to_string(ConstraintMode mode)
{
    return mode == ConstraintMode::Substitution ? "substitution" : "kkt_updating";
}

std::string_view to_string(InitMode mode)
{
    switch (mode) {
    case InitMode::OriginalMesh: return "original_mesh";
    case InitMode::Poisson: return "poisson";
    case InitMode::BiLaplacian: return "bilaplacian";
    case InitMode::Previous: return "previous";
    }
    return "unknown";
}

void DeformParams::validate() const
{
    if (!(lambda >= 0.0 && lambda < 1.0)) {
        throw Error(ErrorCode::InvalidParam, "lambda must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw Error(ErrorCode::InvalidParam, "epsilon must be positive");
    }
    if (!(tolerance > 0.0)) {
        throw Error(ErrorCode::InvalidParam, "tolerance must be positive");
    }
    if (max_iterations < 0) {
        throw Error(ErrorCode::InvalidParam, "max_iterations must be non-negative");
    }
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Positions snapped_rest(const DeformModel& model, const ConstraintSet& constraints)
{
    Positions x = model.rest();
    for (int j = 0; j < constraints.size(); ++j) {
        x.row(constraints.indices[static_cast<std::size_t>(j)]) = constraints.targets.row(j);
    }
    return x;
}

} // namespace

Positions initialize(const DeformModel& model, const ConstraintSet& constraints, InitMode mode,
    const Positions* previous)
{
    constraints.validate(model.num_vertices());
    switch (mode) {
    case InitMode::OriginalMesh:
        return snapped_rest(model, constraints);
    case InitMode::Poisson: {
        if (constraints.size() == 0) {
            return model.rest();
        }
        const SparseSym& l = model.ops.laplacian;
        return substitution_solve(l, l * model.rest(), constraints);
    }
    case InitMode::BiLaplacian: {
        if (constraints.size() == 0) {
            return model.rest();
        }
        const SparseSym b = assemble_system_matrix(model.ops, 1.0);
        return substitution_solve(b, b * model.rest(), constraints);
    }
    case InitMode::Previous:
        if (!previous || previous->rows() != model.num_vertices()) {
            throw Error(ErrorCode::InvalidParam, "previous initialization needs positions for every vertex");
        }
        return *previous;
    }
    throw Error(ErrorCode::InvalidParam, "unknown init mode");
}

Deformer::Deformer(std::shared_ptr<const DeformModel> model, DeformParams params)
    : m_model(std::move(model))
    , m_params(params)
    , m_positions(m_model->rest())
    , m_rotations(static_cast<std::size_t>(m_model->num_vertices()), Eigen::Matrix3d::Identity())
{
    m_params.validate();
    m_constraints.targets.resize(0, 3);
    rebuild_system();
}

void Deformer::rebuild_system()
{
    m_system = assemble_system_matrix(m_model->ops, m_params.lambda);
    m_system_reg = regularize(m_system, m_params.epsilon);
    m_substitution.reset();
    m_updating.reset();
    m_factor.reset();
    if (m_params.constraint_mode == ConstraintMode::KktUpdating) {
        const auto start = std::chrono::steady_clock::now();
        m_factor.emplace(m_system_reg, m_params.backend);
        ++m_factorizations;
        m_updating.emplace(build_updating(*m_factor, m_params.epsilon, m_constraints));
        m_factorization_seconds += seconds_since(start);
    }
}

void Deformer::set_positions(Positions positions)
{
    if (positions.rows() != m_model->num_vertices()) {
        throw Error(ErrorCode::InvalidParam, "position count does not match mesh");
    }
    m_positions = std::move(positions);
    m_converged = false;
}

void Deformer::initialize(InitMode mode)
{
    set_positions(sarap::initialize(*m_model, m_constraints, mode, &m_positions));
}

void Deformer::set_lambda(double lambda)
{
    DeformParams next = m_params;
    next.lambda = lambda;
    next.validate();
    m_params = next;
    m_converged = false;
    rebuild_system();
}

void Deformer::set_tolerance(double tolerance)
{
    DeformParams next = m_params;
    next.tolerance = tolerance;
    next.validate();
    m_params = next;
}

void Deformer::add_constraint(int vertex, const Eigen::Vector3d& target)
{
    if (vertex < 0 || vertex >= m_model->num_vertices()) {
        throw Error(ErrorCode::OutOfRange, "vertex " + std::to_string(vertex) + " out of range");
    }
    if (m_updating) {
        m_updating->add_constraint(vertex, target);
    }
    m_constraints.add(vertex, target);
    m_substitution.reset();
    m_converged = false;
}

void Deformer::remove_constraint(int vertex)
{
    if (m_updating) {
        m_updating->remove_constraint(vertex);
    }
    m_constraints.remove(vertex);
    m_substitution.reset();
    m_converged = false;
}

void Deformer::set_target(int vertex, const Eigen::Vector3d& target)
{
    if (m_updating) {
        m_updating->set_target(vertex, target);
    }
    const int j = m_constraints.find(vertex);
    if (j < 0) {
        throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(vertex) + " is not constrained");
    }
    m_constraints.targets.row(j) = target.transpose();
    m_converged = false;
}

void Deformer::set_constraints(const ConstraintSet& constraints)
{
    constraints.validate(m_model->num_vertices());
    m_constraints = constraints;
    m_substitution.reset();
    if (m_updating) {
        m_updating.emplace(build_updating(*m_factor, m_params.epsilon, m_constraints));
    }
    m_converged = false;
}

Positions Deformer::global_solve(const Positions& rhs, const Positions& prev)
{
    if (m_params.constraint_mode == ConstraintMode::KktUpdating) {
        if (m_constraints.size() == 0) {
            return m_factor->solve(rhs + m_params.epsilon * prev);
        }
        return m_updating->kkt_solve(rhs, prev);
    }
    if (!m_substitution) {
        const auto start = std::chrono::steady_clock::now();
        m_substitution = std::make_unique<SubstitutionSolver>(m_system_reg, m_constraints.indices, m_params.backend);
        ++m_factorizations;
        m_factorization_seconds += seconds_since(start);
    }
    return m_substitution->solve(rhs + m_params.epsilon * prev, m_constraints.targets);
}

const IterationRecord& Deformer::iterate()
{
    IterationRecord record;
    record.iteration = iterations() + 1;

    RotationField rotations = local_step(*m_model, m_positions, m_params.rotation_fit, m_params.lambda,
        &record.degenerate_rotations);
    if (record.degenerate_rotations > 0) {
        spdlog::debug("iteration {}: {} degenerate covariances, identity used", record.iteration,
            record.degenerate_rotations);
    }
    const Positions rhs = assemble_rhs(*m_model, rotations, m_params.lambda);
    Positions next = global_solve(rhs, m_positions);

    record.energy = evaluate_energy(*m_model, next, rotations, m_params.lambda);
    if (!std::isfinite(record.energy.total) || !next.allFinite()) {
        throw Error(ErrorCode::NonFinite, "energy became non-finite at iteration " + std::to_string(record.iteration));
    }
    record.change = (next - m_positions).rowwise().norm().maxCoeff() / m_model->bbox_diagonal;

    m_positions = std::move(next);
    m_rotations = std::move(rotations);
    m_trace.push_back(record);
    spdlog::trace("iteration {}: E={:.9g} E_arap={:.9g} E_smooth={:.9g} change={:.3g}", record.iteration,
        record.energy.total, record.energy.arap, record.energy.smooth, record.change);
    return m_trace.back();
}

bool Deformer::run(int max_iterations)
{
    m_converged = false;
    for (int i = 0; i < max_iterations; ++i) {
        if (iterate().change < m_params.tolerance) {
            m_converged = true;
            break;
        }
    }
    return m_converged;
}

DeformResult deform(std::shared_ptr<const DeformModel> model, const ConstraintSet& constraints,
    const DeformParams& params, const Positions* initial)
{
    Deformer deformer(std::move(model), params);
    deformer.set_constraints(constraints);
    if (params.init == InitMode::Previous) {
        if (!initial) {
            throw Error(ErrorCode::InvalidParam, "init 'previous' needs initial positions");
        }
        deformer.set_positions(*initial);
    } else {
        deformer.initialize(params.init);
    }
    DeformResult result;
    result.converged = deformer.run();
    result.positions = deformer.positions();
    result.iterations = deformer.iterations();
    result.trace = deformer.trace();
    return result;
}

} // namespace sarap
