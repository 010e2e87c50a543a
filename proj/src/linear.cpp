#include <sarap/error.hpp>
#include <sarap/linear.hpp>

#include <Eigen/LU>
#include <Eigen/SparseCholesky>
#ifdef SARAP_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <algorithm>
#include <mutex>
#include <string>
#include <variant>

namespace sarap {

SparseSym regularize(const SparseSym& a, double epsilon)
{
    if (!(epsilon > 0.0)) {
        throw Error(ErrorCode::InvalidParam, "epsilon must be positive");
    }
    SparseSym identity(a.rows(), a.cols());
    identity.setIdentity();
    SparseSym result = a + epsilon * identity;
    result.makeCompressed();
    return result;
}

bool cholmod_available()
{
#ifdef SARAP_HAVE_CHOLMOD
    return true;
#else
    return false;
#endif
}

struct Factorization::Impl
{
    using EigenLLT = Eigen::SimplicialLLT<SparseSym, Eigen::Lower, Eigen::AMDOrdering<int>>;
#ifdef SARAP_HAVE_CHOLMOD
    using CholmodLLT = Eigen::CholmodSimplicialLLT<SparseSym, Eigen::Lower>;
    using CholmodSupernodal = Eigen::CholmodSupernodalLLT<SparseSym, Eigen::Lower>;
#endif

    SolverBackend backend = SolverBackend::EigenLLT;
    int n = 0;
    std::unique_ptr<EigenLLT> eigen;
#ifdef SARAP_HAVE_CHOLMOD
    std::unique_ptr<CholmodLLT> cholmod;
    std::unique_ptr<CholmodSupernodal> supernodal;
    // CHOLMOD keeps workspace in its common object; solves must not overlap.
    std::mutex cholmod_mutex;
#endif
};

Factorization::Factorization(const SparseSym& matrix, SolverBackend backend)
    : m_impl(std::make_shared<Impl>())
{
    if (matrix.rows() != matrix.cols()) {
        throw Error(ErrorCode::InvalidParam, "factorization needs a square matrix");
    }
    m_impl->n = static_cast<int>(matrix.rows());
    if (backend == SolverBackend::Default) {
        backend = cholmod_available() ? SolverBackend::Cholmod : SolverBackend::EigenLLT;
    }
    if ((backend == SolverBackend::Cholmod || backend == SolverBackend::CholmodSupernodal) && !cholmod_available()) {
        throw Error(ErrorCode::InvalidParam, "CHOLMOD backend not compiled in");
    }
    m_impl->backend = backend;

    bool ok = false;
#ifdef SARAP_HAVE_CHOLMOD
    if (backend == SolverBackend::Cholmod) {
        m_impl->cholmod = std::make_unique<Impl::CholmodLLT>();
        m_impl->cholmod->cholmod().print = 0; // failures surface as exceptions
        m_impl->cholmod->compute(matrix);
        ok = m_impl->cholmod->info() == Eigen::Success;
    }
    if (backend == SolverBackend::CholmodSupernodal) {
        m_impl->supernodal = std::make_unique<Impl::CholmodSupernodal>();
        m_impl->supernodal->cholmod().print = 0;
        m_impl->supernodal->compute(matrix);
        ok = m_impl->supernodal->info() == Eigen::Success;
    }
#endif
    if (backend == SolverBackend::EigenLLT) {
        m_impl->eigen = std::make_unique<Impl::EigenLLT>();
        m_impl->eigen->compute(matrix);
        ok = m_impl->eigen->info() == Eigen::Success;
    }
    if (!ok) {
        throw Error(ErrorCode::NotPositiveDefinite,
            "Cholesky factorization failed; matrix is not positive definite (missing regularization?)");
    }
}

Factorization::~Factorization() = default;
Factorization::Factorization(const Factorization&) = default;
Factorization& Factorization::operator=(const Factorization&) = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

Eigen::MatrixXd Factorization::solve(const Eigen::MatrixXd& rhs) const
{
    if (rhs.rows() != m_impl->n) {
        throw Error(ErrorCode::InvalidParam,
            "right-hand side has " + std::to_string(rhs.rows()) + " rows, expected " + std::to_string(m_impl->n));
    }
#ifdef SARAP_HAVE_CHOLMOD
    if (m_impl->cholmod) {
        std::lock_guard lock(m_impl->cholmod_mutex);
        return m_impl->cholmod->solve(rhs);
    }
    if (m_impl->supernodal) {
        std::lock_guard lock(m_impl->cholmod_mutex);
        return m_impl->supernodal->solve(rhs);
    }
#endif
    return m_impl->eigen->solve(rhs);
}

int Factorization::size() const
{
    return m_impl->n;
}

SolverBackend Factorization::backend() const
{
    return m_impl->backend;
}

Factorization factorize(const SparseSym& matrix, SolverBackend backend)
{
    return Factorization(matrix, backend);
}

Eigen::MatrixXd solve(const Factorization& factor, const Eigen::MatrixXd& rhs)
{
    return factor.solve(rhs);
}

// ---------------------------------------------------------------------------

bool ConstraintSet::contains(int vertex) const
{
    return find(vertex) >= 0;
}

int ConstraintSet::find(int vertex) const
{
    const auto it = std::find(indices.begin(), indices.end(), vertex);
    return it == indices.end() ? -1 : static_cast<int>(it - indices.begin());
}

void ConstraintSet::add(int vertex, const Eigen::Vector3d& target)
{
    if (contains(vertex)) {
        throw Error(ErrorCode::DuplicateConstraint, "vertex " + std::to_string(vertex) + " is already constrained");
    }
    indices.push_back(vertex);
    targets.conservativeResize(static_cast<Eigen::Index>(indices.size()), 3);
    targets.row(targets.rows() - 1) = target.transpose();
}

void ConstraintSet::remove(int vertex)
{
    const int j = find(vertex);
    if (j < 0) {
        throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(vertex) + " is not constrained");
    }
    indices.erase(indices.begin() + j);
    Positions kept(static_cast<Eigen::Index>(indices.size()), 3);
    kept.topRows(j) = targets.topRows(j);
    kept.bottomRows(kept.rows() - j) = targets.bottomRows(targets.rows() - j - 1);
    targets = std::move(kept);
}

void ConstraintSet::validate(int num_vertices) const
{
    if (static_cast<Eigen::Index>(indices.size()) != targets.rows()) {
        throw Error(ErrorCode::InvalidParam, "constraint index and target counts differ");
    }
    std::vector<int> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i] < 0 || sorted[i] >= num_vertices) {
            throw Error(ErrorCode::OutOfRange, "constrained vertex " + std::to_string(sorted[i]) + " out of range");
        }
        if (i > 0 && sorted[i] == sorted[i - 1]) {
            throw Error(ErrorCode::DuplicateConstraint, "vertex " + std::to_string(sorted[i]) + " constrained twice");
        }
    }
    if (!targets.allFinite()) {
        throw Error(ErrorCode::NonFinite, "constraint targets contain NaN or Inf");
    }
}

// ---------------------------------------------------------------------------

SubstitutionSolver::SubstitutionSolver(const SparseSym& a, std::span<const int> constrained, SolverBackend backend)
    : m_n(static_cast<int>(a.rows()))
    , m_constrained(constrained.begin(), constrained.end())
{
    // local[v] >= 0: index among free vertices; local[v] < 0: -(slot in constrained) - 1
    std::vector<int> local(static_cast<std::size_t>(m_n), 0);
    for (std::size_t j = 0; j < m_constrained.size(); ++j) {
        const int v = m_constrained[j];
        if (v < 0 || v >= m_n) {
            throw Error(ErrorCode::OutOfRange, "constrained vertex " + std::to_string(v) + " out of range");
        }
        if (local[static_cast<std::size_t>(v)] != 0) {
            throw Error(ErrorCode::DuplicateConstraint, "vertex " + std::to_string(v) + " constrained twice");
        }
        local[static_cast<std::size_t>(v)] = -static_cast<int>(j) - 1;
    }
    for (int v = 0; v < m_n; ++v) {
        if (local[static_cast<std::size_t>(v)] == 0) {
            local[static_cast<std::size_t>(v)] = static_cast<int>(m_free.size());
            m_free.push_back(v);
        }
    }
    if (m_free.empty()) {
        return;
    }

    std::vector<Eigen::Triplet<double>> ff;
    std::vector<Eigen::Triplet<double>> fc;
    ff.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int col = 0; col < a.outerSize(); ++col) {
        for (SparseSym::InnerIterator it(a, col); it; ++it) {
            const int r = local[static_cast<std::size_t>(it.row())];
            const int c = local[static_cast<std::size_t>(it.col())];
            if (r < 0) {
                continue;
            }
            if (c >= 0) {
                ff.emplace_back(r, c, it.value());
            } else {
                fc.emplace_back(r, -c - 1, it.value());
            }
        }
    }
    const auto nf = static_cast<Eigen::Index>(m_free.size());
    SparseSym a_ff(nf, nf);
    a_ff.setFromTriplets(ff.begin(), ff.end());
    m_free_constrained.resize(nf, static_cast<Eigen::Index>(m_constrained.size()));
    m_free_constrained.setFromTriplets(fc.begin(), fc.end());
    try {
        m_factor = std::make_unique<Factorization>(a_ff, backend);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NotPositiveDefinite) {
            throw Error(ErrorCode::SingularSystem,
                "free block of the constrained system is singular; is every connected component constrained?");
        }
        throw;
    }
}

Positions SubstitutionSolver::solve(const Positions& rhs, const Positions& targets) const
{
    if (rhs.rows() != m_n || targets.rows() != static_cast<Eigen::Index>(m_constrained.size())) {
        throw Error(ErrorCode::InvalidParam, "substitution solve: dimension mismatch");
    }
    Positions x(m_n, 3);
    for (std::size_t j = 0; j < m_constrained.size(); ++j) {
        x.row(m_constrained[j]) = targets.row(static_cast<Eigen::Index>(j));
    }
    if (m_free.empty()) {
        return x;
    }
    const auto nf = static_cast<Eigen::Index>(m_free.size());
    Eigen::MatrixXd b(nf, 3);
    for (Eigen::Index i = 0; i < nf; ++i) {
        b.row(i) = rhs.row(m_free[static_cast<std::size_t>(i)]);
    }
    if (!m_constrained.empty()) {
        b -= m_free_constrained * targets;
    }
    const Eigen::MatrixXd xf = m_factor->solve(b);
    for (Eigen::Index i = 0; i < nf; ++i) {
        x.row(m_free[static_cast<std::size_t>(i)]) = xf.row(i);
    }
    return x;
}

Positions substitution_solve(const SparseSym& a, const Positions& rhs, const ConstraintSet& constraints)
{
    constraints.validate(static_cast<int>(a.rows()));
    const SubstitutionSolver solver(a, constraints.indices);
    return solver.solve(rhs, constraints.targets);
}

// ---------------------------------------------------------------------------

UpdatingSolver::UpdatingSolver(Factorization factor, double epsilon)
    : m_factor(std::move(factor))
    , m_epsilon(epsilon)
    , m_q(m_factor.size(), 0)
{
    m_constraints.targets.resize(0, 3);
}

void UpdatingSolver::add_constraint(int vertex, const Eigen::Vector3d& target)
{
    if (vertex < 0 || vertex >= num_vertices()) {
        throw Error(ErrorCode::OutOfRange, "vertex " + std::to_string(vertex) + " out of range");
    }
    m_constraints.add(vertex, target);
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(num_vertices());
    indicator(vertex) = 1.0;
    const Eigen::VectorXd column = m_factor.solve(indicator);
    ++m_column_solves;
    m_q.conservativeResize(Eigen::NoChange, m_q.cols() + 1);
    m_q.col(m_q.cols() - 1) = column;
}

void UpdatingSolver::remove_constraint(int vertex)
{
    const int j = m_constraints.find(vertex);
    if (j < 0) {
        throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(vertex) + " is not constrained");
    }
    m_constraints.remove(vertex);
    const auto cols = m_q.cols();
    if (j + 1 < cols) {
        m_q.middleCols(j, cols - j - 1) = m_q.rightCols(cols - j - 1).eval();
    }
    m_q.conservativeResize(Eigen::NoChange, cols - 1);
}

void UpdatingSolver::set_target(int vertex, const Eigen::Vector3d& target)
{
    const int j = m_constraints.find(vertex);
    if (j < 0) {
        throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(vertex) + " is not constrained");
    }
    m_constraints.targets.row(j) = target.transpose();
}

namespace {

/// H Q: rows of Q at the constrained vertices. Symmetric since A~^-1 is.
Eigen::MatrixXd constrained_rows(const Eigen::MatrixXd& q, const std::vector<int>& indices)
{
    const auto nd = static_cast<Eigen::Index>(indices.size());
    Eigen::MatrixXd hq(nd, nd);
    for (Eigen::Index i = 0; i < nd; ++i) {
        hq.row(i) = q.row(indices[static_cast<std::size_t>(i)]);
    }
    return hq;
}

Eigen::FullPivLU<Eigen::MatrixXd> factor_constraint_block(const Eigen::MatrixXd& q, const std::vector<int>& indices)
{
    // -Q^T H^T in the elimination; we factor H Q and flip the sign of the solution instead.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(constrained_rows(q, indices));
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularConstraintBlock, "constraint block Q^T H^T is singular");
    }
    return lu;
}

} // namespace

Positions UpdatingSolver::multipliers(const Positions& r_tilde) const
{
    if (m_constraints.size() == 0) {
        throw Error(ErrorCode::SingularConstraintBlock, "KKT solve needs at least one constraint");
    }
    const auto lu = factor_constraint_block(m_q, m_constraints.indices);
    // -Q^T H^T L = C - Q^T r~  <=>  (H Q) L = Q^T r~ - C
    const Eigen::MatrixXd rhs = m_q.transpose() * r_tilde - m_constraints.targets;
    return lu.solve(rhs);
}

Positions UpdatingSolver::kkt_solve(const Positions& r, const Positions& prev) const
{
    if (r.rows() != num_vertices() || prev.rows() != num_vertices()) {
        throw Error(ErrorCode::InvalidParam, "KKT solve: dimension mismatch");
    }
    if (m_constraints.size() == 0) {
        throw Error(ErrorCode::SingularConstraintBlock, "KKT solve needs at least one constraint");
    }
    const Positions r_tilde = r + m_epsilon * prev;
    const auto lu = factor_constraint_block(m_q, m_constraints.indices);
    const Eigen::MatrixXd rhs = m_q.transpose() * r_tilde - m_constraints.targets;
    Eigen::MatrixXd lagrange = lu.solve(rhs);

    Eigen::MatrixXd b = r_tilde;
    for (int j = 0; j < m_constraints.size(); ++j) {
        b.row(m_constraints.indices[static_cast<std::size_t>(j)]) -= lagrange.row(j);
    }
    Positions x = m_factor.solve(b);

    // One refinement step on the Schur complement: A~^-1 is large along the nullspace of A,
    // so round-off in the multipliers shows up as a uniform drift off the handle targets.
    Eigen::MatrixXd residual(m_constraints.size(), 3);
    for (int j = 0; j < m_constraints.size(); ++j) {
        residual.row(j) = m_constraints.targets.row(j) - x.row(m_constraints.indices[static_cast<std::size_t>(j)]);
    }
    const Eigen::MatrixXd correction = lu.solve(residual);
    x += m_q * correction;
    return x;
}

UpdatingSolver build_updating(const Factorization& factor, double epsilon, const ConstraintSet& constraints)
{
    constraints.validate(factor.size());
    UpdatingSolver solver(factor, epsilon);
    for (int j = 0; j < constraints.size(); ++j) {
        solver.add_constraint(constraints.indices[static_cast<std::size_t>(j)],
            constraints.targets.row(j).transpose());
    }
    return solver;
}

} // namespace sarap
