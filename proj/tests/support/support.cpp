#include "support.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace sarap::testing {

TriangleMesh random_mesh(std::uint64_t seed, int res)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.25, 0.25);
    std::uniform_real_distribution<double> height(-0.3, 0.3);
    std::bernoulli_distribution flip(0.5);
    const double h = 1.0 / (res - 1);

    TriangleMesh mesh;
    mesh.positions.resize(res * res, 3);
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            const bool border = i == 0 || j == 0 || i == res - 1 || j == res - 1;
            const double dx = border ? 0.0 : jitter(rng) * h;
            const double dy = border ? 0.0 : jitter(rng) * h;
            mesh.positions.row(j * res + i) << i * h + dx, j * h + dy, height(rng) * h;
        }
    }
    mesh.triangles.resize(2 * (res - 1) * (res - 1), 3);
    int t = 0;
    for (int j = 0; j + 1 < res; ++j) {
        for (int i = 0; i + 1 < res; ++i) {
            const int a = j * res + i;
            const int b = a + 1;
            const int c = a + res + 1;
            const int d = a + res;
            if (flip(rng)) {
                mesh.triangles.row(t++) << a, b, c;
                mesh.triangles.row(t++) << a, c, d;
            } else {
                mesh.triangles.row(t++) << a, b, d;
                mesh.triangles.row(t++) << b, c, d;
            }
        }
    }
    return mesh;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& m)
{
    return Eigen::MatrixXd(m);
}

Positions rigid(const Positions& x, const Eigen::Matrix3d& r, const Eigen::Vector3d& t)
{
    Positions y = x * r.transpose();
    y.rowwise() += t.transpose();
    return y;
}

ConstraintSet constraints_at(const Positions& x, const std::vector<int>& indices)
{
    ConstraintSet c;
    c.targets.resize(0, 3);
    for (int v : indices) {
        c.add(v, x.row(v).transpose());
    }
    return c;
}

Positions dense_kkt(const Eigen::MatrixXd& a_reg, const ConstraintSet& c, const Positions& r_tilde)
{
    const Eigen::Index n = a_reg.rows();
    const Eigen::Index m = c.size();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n + m, n + m);
    k.topLeftCorner(n, n) = a_reg;
    for (Eigen::Index j = 0; j < m; ++j) {
        k(n + j, c.indices[static_cast<std::size_t>(j)]) = 1.0;
        k(c.indices[static_cast<std::size_t>(j)], n + j) = 1.0;
    }
    Eigen::MatrixXd rhs(n + m, 3);
    rhs.topRows(n) = r_tilde;
    rhs.bottomRows(m) = c.targets;
    const Eigen::MatrixXd sol = k.fullPivLu().solve(rhs);
    return sol.topRows(n);
}

Positions dense_constrained(const Eigen::MatrixXd& a, const Positions& rhs, const ConstraintSet& c)
{
    const Eigen::Index n = a.rows();
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    Positions x = Positions::Zero(n, 3);
    for (int j = 0; j < c.size(); ++j) {
        fixed[static_cast<std::size_t>(c.indices[static_cast<std::size_t>(j)])] = true;
        x.row(c.indices[static_cast<std::size_t>(j)]) = c.targets.row(j);
    }
    std::vector<Eigen::Index> free;
    for (Eigen::Index v = 0; v < n; ++v) {
        if (!fixed[static_cast<std::size_t>(v)]) {
            free.push_back(v);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd aff(nf, nf);
    Eigen::MatrixXd b(nf, 3);
    for (Eigen::Index i = 0; i < nf; ++i) {
        b.row(i) = rhs.row(free[i]) - a.row(free[i]) * x;
        for (Eigen::Index j = 0; j < nf; ++j) {
            aff(i, j) = a(free[i], free[j]);
        }
    }
    const Eigen::MatrixXd xf = aff.fullPivLu().solve(b);
    for (Eigen::Index i = 0; i < nf; ++i) {
        x.row(free[i]) = xf.row(i);
    }
    return x;
}

namespace {

// cot of the angle at corner p between p->q and p->r
double cot_at(const Eigen::Vector3d& p, const Eigen::Vector3d& q, const Eigen::Vector3d& r)
{
    const Eigen::Vector3d a = q - p;
    const Eigen::Vector3d b = r - p;
    return a.dot(b) / a.cross(b).norm();
}

double bbox(const Positions& x)
{
    return (x.colwise().maxCoeff() - x.colwise().minCoeff()).norm();
}

} // namespace

ArapOracleResult standard_arap(const TriangleMesh& mesh, const ConstraintSet& handles, double epsilon,
    double tolerance, int max_iterations)
{
    const Positions& p = mesh.positions;
    const int n = mesh.num_vertices();
    const int nt = mesh.num_triangles();

    // c(t, k): cot of the angle at corner k, weight of the opposite edge (k+1 -> k+2)
    Eigen::MatrixXd c(nt, 3);
    for (int t = 0; t < nt; ++t) {
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector3d a = p.row(mesh.triangles(t, k));
            const Eigen::Vector3d b = p.row(mesh.triangles(t, (k + 1) % 3));
            const Eigen::Vector3d d = p.row(mesh.triangles(t, (k + 2) % 3));
            c(t, k) = cot_at(a, b, d);
        }
    }

    // Energy sum_i sum_{t in T_i} sum_{(j,k) in t} c_jk |p'_j - p'_k - R_i (p_j - p_k)|^2
    // has Hessian 2 K with K_jk = -3 (c_jk over both triangles of edge jk). The proximal
    // term is scaled like the energy (K = 6 L for the half-cotan L).
    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    for (int v : handles.indices) {
        fixed[static_cast<std::size_t>(v)] = true;
    }
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    int nf = 0;
    for (int v = 0; v < n; ++v) {
        if (!fixed[static_cast<std::size_t>(v)]) {
            slot[static_cast<std::size_t>(v)] = nf++;
        }
    }
    std::vector<Eigen::Triplet<double>> kff;
    std::vector<std::vector<std::pair<int, double>>> kfc(static_cast<std::size_t>(n));
    auto couple = [&](int i, int j, double w) {
        // adds w * (x_i - x_j)^2 to the quadratic form
        for (auto [a, b, s] : {std::tuple{i, i, w}, std::tuple{j, j, w}, std::tuple{i, j, -w}, std::tuple{j, i, -w}}) {
            const int sa = slot[static_cast<std::size_t>(a)];
            const int sb = slot[static_cast<std::size_t>(b)];
            if (sa < 0) {
                continue;
            }
            if (sb >= 0) {
                kff.emplace_back(sa, sb, s);
            } else {
                kfc[static_cast<std::size_t>(a)].emplace_back(b, s);
            }
        }
    };
    for (int t = 0; t < nt; ++t) {
        for (int k = 0; k < 3; ++k) {
            couple(mesh.triangles(t, (k + 1) % 3), mesh.triangles(t, (k + 2) % 3), 3.0 * c(t, k));
        }
    }
    for (int v = 0; v < n; ++v) {
        if (slot[static_cast<std::size_t>(v)] >= 0) {
            kff.emplace_back(slot[static_cast<std::size_t>(v)], slot[static_cast<std::size_t>(v)], 6.0 * epsilon);
        }
    }
    Eigen::SparseMatrix<double> kmat(nf, nf);
    kmat.setFromTriplets(kff.begin(), kff.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(kmat);

    Positions x = p;
    for (int j = 0; j < handles.size(); ++j) {
        x.row(handles.indices[static_cast<std::size_t>(j)]) = handles.targets.row(j);
    }
    const double diag = bbox(p);
    ArapOracleResult result;
    std::vector<Eigen::Matrix3d> rot(static_cast<std::size_t>(n));
    for (int it = 0; it < max_iterations; ++it) {
        std::vector<Eigen::Matrix3d> s(static_cast<std::size_t>(n), Eigen::Matrix3d::Zero());
        for (int t = 0; t < nt; ++t) {
            Eigen::Matrix3d st = Eigen::Matrix3d::Zero();
            for (int k = 0; k < 3; ++k) {
                const int a = mesh.triangles(t, (k + 1) % 3);
                const int b = mesh.triangles(t, (k + 2) % 3);
                const Eigen::Vector3d e = p.row(b) - p.row(a);
                const Eigen::Vector3d ed = x.row(b) - x.row(a);
                st += c(t, k) * e * ed.transpose();
            }
            for (int k = 0; k < 3; ++k) {
                s[static_cast<std::size_t>(mesh.triangles(t, k))] += st;
            }
        }
        for (int v = 0; v < n; ++v) {
            Eigen::JacobiSVD<Eigen::Matrix3d> svd(s[static_cast<std::size_t>(v)], Eigen::ComputeFullU | Eigen::ComputeFullV);
            Eigen::Matrix3d u = svd.matrixU();
            Eigen::Matrix3d r = svd.matrixV() * u.transpose();
            if (r.determinant() < 0) {
                u.col(2) *= -1.0;
                r = svd.matrixV() * u.transpose();
            }
            rot[static_cast<std::size_t>(v)] = r;
        }
        // gradient of the rotation term: -2 b, b_j = sum c (R_i+R_j'+R_k') e with sign by endpoint
        Positions b = Positions::Zero(n, 3);
        for (int t = 0; t < nt; ++t) {
            const Eigen::Matrix3d rsum = rot[static_cast<std::size_t>(mesh.triangles(t, 0))] +
                                         rot[static_cast<std::size_t>(mesh.triangles(t, 1))] +
                                         rot[static_cast<std::size_t>(mesh.triangles(t, 2))];
            for (int k = 0; k < 3; ++k) {
                const int a = mesh.triangles(t, (k + 1) % 3);
                const int bb = mesh.triangles(t, (k + 2) % 3);
                const Eigen::Vector3d e = p.row(bb) - p.row(a);
                const Eigen::Vector3d g = c(t, k) * rsum * e;
                b.row(bb) += g.transpose();
                b.row(a) -= g.transpose();
            }
        }
        Eigen::MatrixXd rhs(nf, 3);
        for (int v = 0; v < n; ++v) {
            const int sv = slot[static_cast<std::size_t>(v)];
            if (sv < 0) {
                continue;
            }
            Eigen::RowVector3d row = b.row(v) + 6.0 * epsilon * x.row(v);
            for (auto [u, w] : kfc[static_cast<std::size_t>(v)]) {
                row -= w * x.row(u);
            }
            rhs.row(sv) = row;
        }
        const Eigen::MatrixXd sol = solver.solve(rhs);
        Positions next = x;
        for (int v = 0; v < n; ++v) {
            const int sv = slot[static_cast<std::size_t>(v)];
            if (sv >= 0) {
                next.row(v) = sol.row(sv);
            }
        }
        const double change = (next - x).rowwise().norm().maxCoeff() / diag;
        x = next;
        result.iterations = it + 1;
        if (change < tolerance) {
            result.converged = true;
            break;
        }
    }
    result.positions = x;
    return result;
}

} // namespace sarap::testing
