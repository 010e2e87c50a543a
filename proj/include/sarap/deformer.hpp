#pragma once

#include <sarap/energy.hpp>
#include <sarap/linear.hpp>

#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace sarap {

enum class ConstraintMode { Substitution, KktUpdating };
enum class InitMode { OriginalMesh, Poisson, BiLaplacian, Previous };

RotationFit parse_rotation_fit(std::string_view name);
ConstraintMode parse_constraint_mode(std::string_view name);
InitMode parse_init_mode(std::string_view name);
std::string_view to_string(RotationFit fit);
std::string_view to_string(ConstraintMode mode);
std::string_view to_string(InitMode mode);

struct DeformParams
{
    double lambda = 0.95;
    double epsilon = kDefaultEpsilon;
    int max_iterations = 1000;
    /// Stop when max_v |V'_k(v) - V'_{k-1}(v)| / bbox diagonal drops below this.
    double tolerance = 1e-4;
    RotationFit rotation_fit = RotationFit::EdgeOnly;
    ConstraintMode constraint_mode = ConstraintMode::Substitution;
    InitMode init = InitMode::BiLaplacian;
    SolverBackend backend = SolverBackend::Default;

    /// Throws InvalidParam.
    void validate() const;
};

struct IterationRecord
{
    int iteration = 0;
    EnergyBreakdown energy; ///< at the new positions, with the rotations of this iteration
    double change = 0.0;    ///< max vertex displacement / bbox diagonal
    int degenerate_rotations = 0;
};

/// Handle-free initial guesses. Constrained rows always equal their targets.
/// Previous returns `previous` (required) unchanged.
Positions initialize(const DeformModel& model, const ConstraintSet& constraints, InitMode mode,
    const Positions* previous = nullptr);

/// One deformation problem: rest model, parameters, handles and the current pose.
/// Keeps the system factorization between iterations; handle edits in KktUpdating
/// mode reuse it, in Substitution mode they trigger a refactorization on the next solve.
class Deformer
{
public:
    Deformer(std::shared_ptr<const DeformModel> model, DeformParams params);

    const DeformModel& model() const { return *m_model; }
    const DeformParams& params() const { return m_params; }
    const ConstraintSet& constraints() const { return m_constraints; }
    const Positions& positions() const { return m_positions; }
    const RotationField& rotations() const { return m_rotations; }
    const std::vector<IterationRecord>& trace() const { return m_trace; }
    const SparseSym& system_matrix() const { return m_system; }

    void set_positions(Positions positions);
    /// Applies `mode` with the current handles (Previous keeps the current pose).
    void initialize(InitMode mode);

    /// Rebuilds A and its factorization; Q is re-derived in KktUpdating mode.
    void set_lambda(double lambda);
    void set_tolerance(double tolerance);
    void set_rotation_fit(RotationFit fit) { m_params.rotation_fit = fit; }

    void add_constraint(int vertex, const Eigen::Vector3d& target);
    void remove_constraint(int vertex);
    void set_target(int vertex, const Eigen::Vector3d& target);
    void set_constraints(const ConstraintSet& constraints);

    /// One local step followed by one global step.
    const IterationRecord& iterate();

    /// Iterates until the change drops below the tolerance or `max_iterations` more
    /// iterations ran. Returns true on convergence.
    bool run(int max_iterations);
    bool run() { return run(m_params.max_iterations); }

    /// Number of sparse factorizations performed so far.
    int factorizations() const { return m_factorizations; }
    /// Wall-clock seconds spent in those factorizations (including Q rebuilds).
    double factorization_seconds() const { return m_factorization_seconds; }
    int iterations() const { return static_cast<int>(m_trace.size()); }
    bool converged() const { return m_converged; }

private:
    void rebuild_system();
    Positions global_solve(const Positions& rhs, const Positions& prev);

    std::shared_ptr<const DeformModel> m_model;
    DeformParams m_params;
    ConstraintSet m_constraints;
    Positions m_positions;
    RotationField m_rotations;
    std::vector<IterationRecord> m_trace;
    bool m_converged = false;

    SparseSym m_system;     ///< A
    SparseSym m_system_reg; ///< A + eps I
    std::optional<Factorization> m_factor;
    std::optional<UpdatingSolver> m_updating;
    std::unique_ptr<SubstitutionSolver> m_substitution;
    int m_factorizations = 0;
    double m_factorization_seconds = 0.0;
};

struct DeformResult
{
    Positions positions;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> trace;
};

/// Full pipeline: initialize according to params.init, then local-global iterations.
/// `initial` is used when params.init is Previous. Throws NonFinite if the energy blows up.
DeformResult deform(std::shared_ptr<const DeformModel> model, const ConstraintSet& constraints,
    const DeformParams& params, const Positions* initial = nullptr);

} // namespace sarap
