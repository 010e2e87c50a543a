#include "support/support.hpp"

#include <sarap/energy.hpp>
#include <sarap/error.hpp>
#include <sarap/generators.hpp>
#include <sarap/linear.hpp>
#include <sarap/operators.hpp>

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <chrono>
#include <numeric>

using namespace sarap;

namespace {

/// System matrix of a random mesh for lambda = 0.95, plus its regularized form.
struct Fixture
{
    std::shared_ptr<const DeformModel> model;
    SparseSym a;
    SparseSym a_reg;
    Eigen::MatrixXd a_reg_dense;

    explicit Fixture(std::uint64_t seed, int res = 6, double lambda = 0.95)
        : model(DeformModel::build(testing::random_mesh(seed, res)))
        , a(assemble_system_matrix(model->ops, lambda))
        , a_reg(regularize(a, kDefaultEpsilon))
        , a_reg_dense(testing::dense(a_reg))
    {}
    int n() const { return model->num_vertices(); }
};

Positions random_positions(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> g;
    Positions x(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = g(rng);
    }
    return x;
}

ConstraintSet random_constraints(std::mt19937_64& rng, int n, int count)
{
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    ConstraintSet c;
    c.targets.resize(0, 3);
    std::normal_distribution<double> g;
    for (int j = 0; j < count; ++j) {
        c.add(all[static_cast<std::size_t>(j)], Eigen::Vector3d(g(rng), g(rng), g(rng)));
    }
    return c;
}

double rel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

} // namespace

TEST_CASE("regularize")
{
    SUBCASE("zero 1x1")
    {
        SparseSym z(1, 1);
        const SparseSym r = regularize(z, 1e-8);
        CHECK(r.coeff(0, 0) == 1e-8);
    }
    SUBCASE("Laplacian maps ones to eps ones")
    {
        const auto model = DeformModel::build(testing::random_mesh(1, 5));
        const SparseSym r = regularize(model->ops.laplacian, 1e-8);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(r.rows());
        CHECK(((r * ones) - 1e-8 * ones).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("smallest eigenvalue is at least eps")
    {
        std::mt19937_64 rng(3);
        const Eigen::MatrixXd b = random_positions(rng, 12) * random_positions(rng, 12).transpose().topRows(3);
        const Eigen::MatrixXd psd = b * b.transpose();
        const SparseSym r = regularize(psd.sparseView(), 1e-3);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(testing::dense(r));
        CHECK(eig.eigenvalues().minCoeff() >= 1e-3 * (1.0 - 1e-9));
    }
    SUBCASE("eps must be positive")
    {
        CHECK_THROWS_AS(regularize(SparseSym(2, 2), 0.0), Error);
    }
}

TEST_CASE("factorization solves")
{
    const Fixture fx(2);
    const Factorization f = factorize(fx.a_reg);
    std::mt19937_64 rng(4);
    // forward error on a well-conditioned matrix
    const SparseSym well = regularize(fx.a, 1.0);
    const Eigen::MatrixXd x = random_positions(rng, fx.n());
    CHECK(rel(factorize(well).solve(well * x), x) <= 1e-9);
    // with eps = 1e-8 the constant mode is only pinned by eps; a right-hand side in the
    // range of A (as the assembled ones are) keeps the solution well scaled
    Eigen::MatrixXd b = random_positions(rng, fx.n());
    b.rowwise() -= b.colwise().mean();
    CHECK(rel(fx.a_reg * f.solve(b), b) <= 1e-10);
    CHECK(f.solve(Eigen::MatrixXd::Zero(fx.n(), 3)).isZero(0.0));

    SparseSym identity(5, 5);
    identity.setIdentity();
    const Eigen::MatrixXd rhs = random_positions(rng, 5);
    CHECK(rel(factorize(identity).solve(rhs), rhs) < 1e-15);

    CHECK_THROWS_AS(f.solve(Eigen::MatrixXd::Zero(fx.n() + 1, 3)), Error);
    try {
        factorize(fx.a); // singular without eps
        // some orderings survive a singular PSD matrix by round-off; then it must at least be rejected on a negative one
        factorize(SparseSym(-fx.a_reg));
        FAIL("expected NotPositiveDefinite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotPositiveDefinite);
    }
}

TEST_CASE("CHOLMOD backends agree with Eigen" * doctest::skip(!cholmod_available()))
{
    const Fixture fx(6);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd rhs = random_positions(rng, fx.n());
    // A + eps I is conditioned around 1/eps, so solvers only agree to ~1e-5 on it;
    // compare on a well-conditioned shift and check backward error on the real system
    const SparseSym shifted = regularize(fx.a, 1.0);
    const Eigen::MatrixXd expected = Factorization(shifted, SolverBackend::EigenLLT).solve(rhs);
    const Factorization simplicial(shifted, SolverBackend::Cholmod);
    CHECK(simplicial.backend() == SolverBackend::Cholmod);
    CHECK(factorize(shifted).backend() == SolverBackend::Cholmod);
    CHECK(rel(simplicial.solve(rhs), expected) < 1e-12);

    const Eigen::MatrixXd x = Factorization(fx.a_reg, SolverBackend::Cholmod).solve(rhs);
    CHECK((fx.a_reg_dense * x - rhs).norm() / (fx.a_reg_dense.norm() * x.norm()) < 1e-14);

    try {
        const Factorization c(shifted, SolverBackend::CholmodSupernodal);
        CHECK(rel(c.solve(rhs), expected) < 1e-12);
    } catch (const Error& e) {
        // a broken system BLAS shows up as a spurious NotPositiveDefinite
        MESSAGE("supernodal CHOLMOD unusable here: " << std::string(e.what()));
    }
}

TEST_CASE("constraint sets")
{
    ConstraintSet c;
    c.targets.resize(0, 3);
    c.add(4, {1, 2, 3});
    c.add(1, {4, 5, 6});
    c.add(7, {7, 8, 9});
    CHECK_THROWS_AS(c.add(1, {0, 0, 0}), Error);
    CHECK(c.find(7) == 2);
    c.remove(1);
    CHECK(c.indices == std::vector<int>{4, 7});
    CHECK(c.targets.row(1) == Eigen::RowVector3d(7, 8, 9));
    CHECK_THROWS_AS(c.remove(1), Error);
    CHECK_NOTHROW(c.validate(8));
    CHECK_THROWS_AS(c.validate(7), Error);
    c.targets(0, 0) = std::nan("");
    CHECK_THROWS_AS(c.validate(8), Error);
}

TEST_CASE("substitution solve")
{
    const Fixture fx(3);
    std::mt19937_64 rng(7);

    SUBCASE("all vertices constrained")
    {
        const auto c = random_constraints(rng, fx.n(), fx.n());
        const Positions x = substitution_solve(fx.a, random_positions(rng, fx.n()), c);
        for (int j = 0; j < c.size(); ++j) {
            CHECK(x.row(c.indices[static_cast<std::size_t>(j)]) == c.targets.row(j));
        }
    }
    SUBCASE("consistent system returns the rest pose")
    {
        const Positions& v = fx.model->rest();
        const auto c = testing::constraints_at(v, {0, 5, 17});
        const Positions x = substitution_solve(fx.a, fx.a * v, c);
        CHECK((x - v).cwiseAbs().maxCoeff() <= 1e-9);
    }
    SUBCASE("dense elimination oracle")
    {
        const Fixture small(4, 5); // 25 vertices
        for (int count : {1, 3, 8}) {
            const auto c = random_constraints(rng, small.n(), count);
            const Positions rhs = random_positions(rng, small.n());
            const Positions x = substitution_solve(small.a, rhs, c);
            const Positions expected = testing::dense_constrained(testing::dense(small.a), rhs, c);
            CHECK(rel(x, expected) <= 1e-9);
            for (int j = 0; j < c.size(); ++j) {
                CHECK(x.row(c.indices[static_cast<std::size_t>(j)]) == c.targets.row(j));
            }
        }
    }
    SUBCASE("unconstrained singular system")
    {
        ConstraintSet none;
        none.targets.resize(0, 3);
        try {
            substitution_solve(fx.a, random_positions(rng, fx.n()), none);
            // round-off may let a singular PSD factorization pass; then the result must still be finite
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SingularSystem);
        }
    }
    SUBCASE("bad indices")
    {
        const std::vector<int> dup{1, 1};
        CHECK_THROWS_AS(SubstitutionSolver(fx.a, dup), Error);
        const std::vector<int> out{fx.n()};
        CHECK_THROWS_AS(SubstitutionSolver(fx.a, out), Error);
    }
}

TEST_CASE("updating solver bookkeeping")
{
    const Fixture fx(5);
    const Factorization f = factorize(fx.a_reg);
    std::mt19937_64 rng(9);

    SUBCASE("add then remove restores Q bitwise")
    {
        auto s = build_updating(f, kDefaultEpsilon, random_constraints(rng, fx.n(), 4));
        const Eigen::MatrixXd before = s.q();
        const int solves = s.column_solves();
        int fresh = 0;
        while (s.constraints().contains(fresh)) {
            ++fresh;
        }
        s.add_constraint(fresh, {1, 2, 3});
        CHECK(s.column_solves() == solves + 1);
        CHECK(s.q().cols() == before.cols() + 1);
        s.remove_constraint(fresh);
        CHECK(s.column_solves() == solves + 1);
        CHECK(s.q() == before);
    }
    SUBCASE("one-by-one equals batch build")
    {
        const auto c = random_constraints(rng, fx.n(), 6);
        UpdatingSolver s(f, kDefaultEpsilon);
        for (int j = 0; j < c.size(); ++j) {
            s.add_constraint(c.indices[static_cast<std::size_t>(j)], c.targets.row(j).transpose());
        }
        const auto batch = build_updating(f, kDefaultEpsilon, c);
        CHECK((s.q() - batch.q()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(s.column_solves() == 6);
    }
    SUBCASE("interleaved add and remove equals a fresh build")
    {
        UpdatingSolver s(f, kDefaultEpsilon);
        std::uniform_int_distribution<int> pick(0, fx.n() - 1);
        std::bernoulli_distribution drop(0.35);
        for (int step = 0; step < 60; ++step) {
            const int v = pick(rng);
            if (s.constraints().contains(v)) {
                if (drop(rng)) {
                    s.remove_constraint(v);
                } else {
                    s.set_target(v, {0.5, 0.5, static_cast<double>(step)});
                }
            } else {
                s.add_constraint(v, {static_cast<double>(step), 0, 0});
            }
        }
        const auto fresh = build_updating(f, kDefaultEpsilon, s.constraints());
        CHECK((s.q() - fresh.q()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(s.constraints().targets == fresh.constraints().targets);
    }
    SUBCASE("errors")
    {
        UpdatingSolver s(f, kDefaultEpsilon);
        s.add_constraint(2, {0, 0, 0});
        CHECK_THROWS_AS(s.add_constraint(2, {0, 0, 0}), Error);
        CHECK_THROWS_AS(s.add_constraint(-1, {0, 0, 0}), Error);
        CHECK_THROWS_AS(s.add_constraint(fx.n(), {0, 0, 0}), Error);
        CHECK_THROWS_AS(s.remove_constraint(3), Error);
        CHECK_THROWS_AS(s.set_target(3, {0, 0, 0}), Error);
    }
}

TEST_CASE("KKT solve matches the dense KKT system")
{
    std::mt19937_64 rng(13);
    for (std::uint64_t seed : {21u, 22u}) {
        const Fixture fx(seed, 6); // 36 vertices
        const Factorization f = factorize(fx.a_reg);
        for (int count : {1, 2, 10, fx.n()}) {
            const auto c = random_constraints(rng, fx.n(), count);
            const auto s = build_updating(f, kDefaultEpsilon, c);
            const Positions r = random_positions(rng, fx.n());
            const Positions prev = random_positions(rng, fx.n());
            const Positions x = s.kkt_solve(r, prev);
            const Positions expected = testing::dense_kkt(fx.a_reg_dense, c, r + kDefaultEpsilon * prev);
            CHECK(rel(x, expected) <= 1e-9);
            for (int j = 0; j < c.size(); ++j) {
                CHECK((x.row(c.indices[static_cast<std::size_t>(j)]) - c.targets.row(j)).cwiseAbs().maxCoeff() <= 1e-8);
            }
        }
    }
}

TEST_CASE("KKT solve of a consistent system returns the rest pose")
{
    const Fixture fx(8);
    const Factorization f = factorize(fx.a_reg);
    const Positions& v = fx.model->rest();
    std::mt19937_64 rng(2);
    const Positions prev = v + 0.01 * random_positions(rng, fx.n());
    const auto s = build_updating(f, kDefaultEpsilon, testing::constraints_at(v, {0, 9, 20}));
    const Positions r = fx.a_reg * v - kDefaultEpsilon * prev;
    CHECK((s.kkt_solve(r, prev) - v).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("both constrained solves decrease the quadratic objective")
{
    const Fixture fx(10);
    std::mt19937_64 rng(5);
    const auto c = random_constraints(rng, fx.n(), 5);
    const Positions r = random_positions(rng, fx.n());
    Positions start = fx.model->rest();
    for (int j = 0; j < c.size(); ++j) {
        start.row(c.indices[static_cast<std::size_t>(j)]) = c.targets.row(j);
    }
    auto objective = [&](const Positions& x) { return (x.transpose() * (fx.a * x)).trace() - 2.0 * (x.transpose() * r).trace(); };
    const Positions sub = substitution_solve(fx.a_reg, r + kDefaultEpsilon * start, c);
    const Positions kkt = build_updating(factorize(fx.a_reg), kDefaultEpsilon, c).kkt_solve(r, start);
    CHECK(objective(sub) < objective(start));
    CHECK(objective(kkt) < objective(start));
}

TEST_CASE("dense multiplier step cost grows with the number of constraints")
{
    const auto model = DeformModel::build(make_test_mesh(MeshKind::BumpyPlane, 101));
    const SparseSym a_reg = regularize(assemble_system_matrix(model->ops, 0.95), kDefaultEpsilon);
    const Factorization f = factorize(a_reg);
    std::mt19937_64 rng(1);
    const Positions r = random_positions(rng, model->num_vertices());

    auto median_time = [&](int count) {
        const auto s = build_updating(f, kDefaultEpsilon, random_constraints(rng, model->num_vertices(), count));
        std::vector<double> times;
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const Positions m = s.multipliers(r);
            times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            CHECK(m.allFinite());
        }
        std::nth_element(times.begin(), times.begin() + 3, times.end());
        return times[3];
    };
    const double t2 = median_time(2);
    const double t50 = median_time(50);
    const double t200 = median_time(200);
    MESSAGE("multiplier step: " << t2 * 1e3 << " ms (2), " << t50 * 1e3 << " ms (50), " << t200 * 1e3 << " ms (200)");
    CHECK(t2 < t50);
    CHECK(t50 < t200);
}
