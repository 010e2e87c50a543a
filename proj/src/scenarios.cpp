#include <sarap/error.hpp>
#include <sarap/scenarios.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace sarap {

std::vector<int> vertices_where(const Positions& positions, int axis, double value, double tol)
{
    std::vector<int> out;
    for (int v = 0; v < positions.rows(); ++v) {
        if (std::abs(positions(v, axis) - value) <= tol) {
            out.push_back(v);
        }
    }
    return out;
}

int nearest_vertex(const Positions& positions, const Eigen::Vector3d& point)
{
    Eigen::Index best = 0;
    (positions.rowwise() - point.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best);
}

std::vector<int> k_ring(const HalfEdgeMesh& mesh, int v, int rings)
{
    std::set<int> visited{v};
    std::vector<int> frontier{v};
    for (int r = 0; r < rings; ++r) {
        std::vector<int> next;
        for (int u : frontier) {
            for (int f : mesh.faces_around(u)) {
                for (int k = 0; k < 3; ++k) {
                    const int w = mesh.triangles()(f, k);
                    if (visited.insert(w).second) {
                        next.push_back(w);
                    }
                }
            }
        }
        frontier = std::move(next);
    }
    return {visited.begin(), visited.end()};
}

namespace {

void fix(ConstraintSet& c, const Positions& x, const std::vector<int>& vertices)
{
    for (int v : vertices) {
        c.add(v, x.row(v).transpose());
    }
}

Scenario bumpy_plane_scenario(int res)
{
    Scenario s;
    s.name = "bumpy_plane";
    s.mesh = make_test_mesh(MeshKind::BumpyPlane, res);
    const auto& x = s.mesh.positions;
    const HalfEdgeMesh he(s.mesh);
    s.constraints.targets.resize(0, 3);
    std::vector<int> boundary;
    for (int v = 0; v < he.num_vertices(); ++v) {
        if (he.is_boundary_vertex(v)) {
            boundary.push_back(v);
        }
    }
    fix(s.constraints, x, boundary);
    s.focus_vertex = nearest_vertex(x, Eigen::Vector3d(0.5, 0.5, 0.0));
    const Eigen::Vector3d target =
        x.row(s.focus_vertex).transpose() + Eigen::Vector3d(0.0, 0.0, 0.3 * bbox_diagonal(x));
    s.constraints.add(s.focus_vertex, target);
    return s;
}

Scenario cylinder_scenario(int res)
{
    Scenario s;
    s.name = "bumpy_cylinder";
    s.mesh = make_test_mesh(MeshKind::BumpyCylinder, res);
    const auto& x = s.mesh.positions;
    const double height = x.col(2).maxCoeff();
    const double tol = 1e-9 * height;
    s.constraints.targets.resize(0, 3);
    fix(s.constraints, x, vertices_where(x, 2, 0.0, tol));
    const auto top = vertices_where(x, 2, height, tol);
    const Eigen::Vector3d shift(0.5 * height, 0.0, -0.25 * height);
    for (int v : top) {
        s.constraints.add(v, x.row(v).transpose() + shift);
    }
    s.focus_vertex = top.front();
    return s;
}

Scenario bar_scenario(int res)
{
    Scenario s;
    s.name = "bar";
    s.mesh = make_test_mesh(MeshKind::Bar, res);
    const auto& x = s.mesh.positions;
    const double length = x.col(0).maxCoeff();
    const double tol = 1e-9 * length;
    s.constraints.targets.resize(0, 3);
    fix(s.constraints, x, vertices_where(x, 0, 0.0, tol));
    const Eigen::Vector3d axis_point(length, 0.5 * x.col(1).maxCoeff(), 0.5 * x.col(2).maxCoeff());
    const Eigen::Matrix3d twist = Eigen::AngleAxisd(0.5 * std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
    const auto end = vertices_where(x, 0, length, tol);
    for (int v : end) {
        const Eigen::Vector3d p = x.row(v).transpose();
        s.constraints.add(v, axis_point + twist * (p - axis_point));
    }
    s.focus_vertex = end.front();
    return s;
}

Scenario spiky_plane_scenario(int res)
{
    Scenario s;
    s.name = "spiky_plane";
    s.mesh = make_test_mesh(MeshKind::SpikyPlane, res);
    const auto& x = s.mesh.positions;
    const double size = x.col(0).maxCoeff();
    const double tol = 1e-9 * size;
    s.constraints.targets.resize(0, 3);
    fix(s.constraints, x, vertices_where(x, 0, 0.0, tol));
    const auto far = vertices_where(x, 0, size, tol);
    const Eigen::Vector3d axis_point(size, 0.5 * x.col(1).maxCoeff(), 0.0);
    const Eigen::Matrix3d twist = Eigen::AngleAxisd(0.25 * std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix();
    for (int v : far) {
        const Eigen::Vector3d p = x.row(v).transpose();
        s.constraints.add(v, axis_point + twist * (p - axis_point));
    }
    s.focus_vertex = far.front();
    s.init = InitMode::OriginalMesh;
    return s;
}

} // namespace

namespace {

std::string canonical(std::string_view text)
{
    std::string name(text);
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

} // namespace

Scenario make_scenario(std::string_view text, int resolution)
{
    const std::string name = canonical(text);
    if (name == "bumpy_plane") return bumpy_plane_scenario(resolution);
    if (name == "bumpy_cylinder") return cylinder_scenario(resolution);
    if (name == "bar") return bar_scenario(resolution);
    if (name == "spiky_plane") return spiky_plane_scenario(resolution);
    throw Error(ErrorCode::InvalidParam, "unknown scenario '" + std::string(name) + "'");
}

std::vector<std::string> scenario_names()
{
    return {"bumpy_plane", "bumpy_cylinder", "bar", "spiky_plane"};
}

int default_resolution(std::string_view text)
{
    const std::string name = canonical(text);
    if (name == "bumpy_plane") return 41;
    if (name == "bumpy_cylinder") return 32;
    if (name == "bar") return 8;
    if (name == "spiky_plane") return 33;
    throw Error(ErrorCode::InvalidParam, "unknown scenario '" + std::string(name) + "'");
}

} // namespace sarap
