#pragma once

#include <sarap/mesh.hpp>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <memory>
#include <span>
#include <vector>

namespace sarap {

/// Symmetric sparse matrix, full storage (both triangles).
using SparseSym = Eigen::SparseMatrix<double>;

inline constexpr double kDefaultEpsilon = 1e-8;

/// A + epsilon * I. Throws InvalidParam unless epsilon > 0.
SparseSym regularize(const SparseSym& a, double epsilon);

enum class SolverBackend {
    Default, ///< Cholmod when compiled in, else EigenLLT
    EigenLLT,
    /// Simplicial CHOLMOD. No BLAS calls; its nested-dissection ordering gives much less
    /// fill than Eigen's AMD on large meshes, so back-substitutions are about twice as fast.
    Cholmod,
    /// Supernodal CHOLMOD. Fastest, but relies on the system BLAS; some OpenBLAS builds
    /// mis-detect virtualized CPUs (set OPENBLAS_CORETYPE if factorizations fail).
    CholmodSupernodal,
};

bool cholmod_available();

/// Sparse Cholesky factor of a symmetric positive definite matrix. Immutable and
/// cheap to copy; copies share the factor.
class Factorization
{
public:
    /// Throws NotPositiveDefinite.
    explicit Factorization(const SparseSym& matrix, SolverBackend backend = SolverBackend::Default);
    ~Factorization();
    Factorization(const Factorization&);
    Factorization& operator=(const Factorization&);
    Factorization(Factorization&&) noexcept;
    Factorization& operator=(Factorization&&) noexcept;

    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    int size() const;
    SolverBackend backend() const;

private:
    struct Impl;
    std::shared_ptr<Impl> m_impl;
};

Factorization factorize(const SparseSym& matrix, SolverBackend backend = SolverBackend::Default);
Eigen::MatrixXd solve(const Factorization& factor, const Eigen::MatrixXd& rhs);

/// Rows of H (constrained vertices, in insertion order) and their targets C.
struct ConstraintSet
{
    std::vector<int> indices;
    Positions targets;

    int size() const { return static_cast<int>(indices.size()); }
    bool contains(int vertex) const;
    /// Position of `vertex` in `indices`, or -1.
    int find(int vertex) const;
    void add(int vertex, const Eigen::Vector3d& target);
    void remove(int vertex);

    /// Throws OutOfRange or DuplicateConstraint.
    void validate(int num_vertices) const;
};

/// Solves A X = rhs with the constrained rows of X fixed, by eliminating the
/// constrained rows and columns. The free block is factored once per constraint layout.
class SubstitutionSolver
{
public:
    /// Throws SingularSystem when the free block is not positive definite.
    SubstitutionSolver(const SparseSym& a, std::span<const int> constrained,
        SolverBackend backend = SolverBackend::Default);

    /// `targets` rows follow the order of `constrained` given at construction.
    Positions solve(const Positions& rhs, const Positions& targets) const;

    int num_free() const { return static_cast<int>(m_free.size()); }

private:
    int m_n = 0;
    std::vector<int> m_free;
    std::vector<int> m_constrained;
    SparseSym m_free_constrained; ///< A_fc
    std::unique_ptr<Factorization> m_factor;
};

Positions substitution_solve(const SparseSym& a, const Positions& rhs, const ConstraintSet& constraints);

/// Constrained solves against a fixed factorization of A~ = A + eps I through the
/// Schur complement of the KKT system. Adding a constraint costs one back-substitution,
/// removing one is free; the factorization is never touched.
class UpdatingSolver
{
public:
    UpdatingSolver(Factorization factor, double epsilon);

    /// Throws OutOfRange or DuplicateConstraint.
    void add_constraint(int vertex, const Eigen::Vector3d& target);
    /// Throws NotConstrained.
    void remove_constraint(int vertex);
    /// Throws NotConstrained.
    void set_target(int vertex, const Eigen::Vector3d& target);

    /// Solves the dense n_d x n_d system for the Lagrange multipliers given r~.
    /// Throws SingularConstraintBlock.
    Positions multipliers(const Positions& r_tilde) const;

    /// Minimizes against r~ = r + eps * prev subject to H V = C.
    Positions kkt_solve(const Positions& r, const Positions& prev) const;

    const ConstraintSet& constraints() const { return m_constraints; }
    const Eigen::MatrixXd& q() const { return m_q; }
    const Factorization& factorization() const { return m_factor; }
    double epsilon() const { return m_epsilon; }
    int num_vertices() const { return m_factor.size(); }
    /// Back-substitutions spent on Q columns since construction.
    int column_solves() const { return m_column_solves; }

private:
    Factorization m_factor;
    double m_epsilon;
    ConstraintSet m_constraints;
    Eigen::MatrixXd m_q;
    int m_column_solves = 0;
};

/// Q = A~^-1 H^T built column by column from scratch.
UpdatingSolver build_updating(const Factorization& factor, double epsilon, const ConstraintSet& constraints);

} // namespace sarap
