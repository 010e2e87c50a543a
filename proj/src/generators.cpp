#include <sarap/error.hpp>
#include <sarap/generators.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace sarap {

namespace {

struct Bump
{
    double u;
    double v;
};

/// Uniform double in [0, 1) with a fixed mapping, independent of the standard library's distributions.
double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<Bump> place_bumps(const TestMeshParams& params, double margin)
{
    std::mt19937_64 rng(params.seed);
    std::vector<Bump> bumps;
    bumps.reserve(static_cast<std::size_t>(params.bumps));
    for (int i = 0; i < params.bumps; ++i) {
        const double u = margin + (1.0 - 2.0 * margin) * uniform01(rng);
        const double v = margin + (1.0 - 2.0 * margin) * uniform01(rng);
        bumps.push_back({u, v});
    }
    return bumps;
}

TriangleMesh grid(int res, double size)
{
    TriangleMesh mesh;
    mesh.positions.resize(res * res, 3);
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            mesh.positions.row(j * res + i) << size * i / (res - 1), size * j / (res - 1), 0.0;
        }
    }
    mesh.triangles.resize(2 * (res - 1) * (res - 1), 3);
    int f = 0;
    for (int j = 0; j + 1 < res; ++j) {
        for (int i = 0; i + 1 < res; ++i) {
            const int v00 = j * res + i;
            const int v10 = v00 + 1;
            const int v01 = v00 + res;
            const int v11 = v01 + 1;
            mesh.triangles.row(f++) << v00, v10, v11;
            mesh.triangles.row(f++) << v00, v11, v01;
        }
    }
    return mesh;
}

TriangleMesh bumpy_plane(int res, const TestMeshParams& params)
{
    auto mesh = grid(res, params.size);
    const auto bumps = place_bumps(params, 0.1);
    const double sigma2 = params.bump_width * params.bump_width;
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        const double u = mesh.positions(v, 0) / params.size;
        const double w = mesh.positions(v, 1) / params.size;
        double z = 0.0;
        for (const auto& b : bumps) {
            const double d2 = (u - b.u) * (u - b.u) + (w - b.v) * (w - b.v);
            z += std::exp(-d2 / (2.0 * sigma2));
        }
        mesh.positions(v, 2) = params.size * params.bump_height * z;
    }
    return mesh;
}

TriangleMesh spiky_plane(int res, const TestMeshParams& params)
{
    if (params.spike_spacing < 1) {
        throw Error(ErrorCode::InvalidParam, "spike_spacing must be positive");
    }
    auto mesh = grid(res, params.size);
    const int s = params.spike_spacing;
    for (int j = s; j + s / 2 < res - 1; j += s) {
        for (int i = s; i + s / 2 < res - 1; i += s) {
            mesh.positions(j * res + i, 2) = params.size * params.spike_height;
        }
    }
    return mesh;
}

TriangleMesh bumpy_cylinder(int res, const TestMeshParams& params)
{
    if (res < 3) {
        throw Error(ErrorCode::InvalidParam, "bumpy_cylinder needs resolution >= 3");
    }
    const int around = res;
    const int rings = 2 * res;
    const double radius = 0.5 * params.size;
    const double height = 2.0 * params.size;
    const auto bumps = place_bumps(params, 0.1);
    const double sigma2 = params.bump_width * params.bump_width;

    TriangleMesh mesh;
    mesh.positions.resize(around * rings, 3);
    for (int r = 0; r < rings; ++r) {
        const double t = static_cast<double>(r) / (rings - 1);
        for (int a = 0; a < around; ++a) {
            const double s = static_cast<double>(a) / around;
            double bump = 0.0;
            for (const auto& b : bumps) {
                double ds = std::abs(s - b.u);
                ds = std::min(ds, 1.0 - ds);
                // Arc length and height measured in the same units (fractions of the height).
                const double du = ds * (2.0 * std::numbers::pi * radius) / height;
                const double dt = t - b.v;
                bump += std::exp(-(du * du + dt * dt) / (2.0 * sigma2));
            }
            const double rr = radius * (1.0 + params.bump_height * bump);
            const double phi = 2.0 * std::numbers::pi * s;
            mesh.positions.row(r * around + a) << rr * std::cos(phi), rr * std::sin(phi), height * t;
        }
    }
    mesh.triangles.resize(2 * around * (rings - 1), 3);
    int f = 0;
    for (int r = 0; r + 1 < rings; ++r) {
        for (int a = 0; a < around; ++a) {
            const int v00 = r * around + a;
            const int v10 = r * around + (a + 1) % around;
            const int v01 = v00 + around;
            const int v11 = v10 + around;
            mesh.triangles.row(f++) << v00, v10, v11;
            mesh.triangles.row(f++) << v00, v11, v01;
        }
    }
    return mesh;
}

TriangleMesh bar(int res, const TestMeshParams& params)
{
    const std::array<int, 3> cells{4 * res, res, res};
    const double h = params.size / res;
    auto on_boundary = [&](int i, int j, int k) {
        return i == 0 || j == 0 || k == 0 || i == cells[0] || j == cells[1] || k == cells[2];
    };
    auto lattice = [&](int i, int j, int k) {
        return (k * (cells[1] + 1) + j) * (cells[0] + 1) + i;
    };
    std::vector<int> index(static_cast<std::size_t>((cells[0] + 1) * (cells[1] + 1) * (cells[2] + 1)), -1);
    std::vector<Eigen::Vector3d> points;
    for (int k = 0; k <= cells[2]; ++k) {
        for (int j = 0; j <= cells[1]; ++j) {
            for (int i = 0; i <= cells[0]; ++i) {
                if (on_boundary(i, j, k)) {
                    index[static_cast<std::size_t>(lattice(i, j, k))] = static_cast<int>(points.size());
                    points.emplace_back(h * i, h * j, h * k);
                }
            }
        }
    }

    std::vector<std::array<int, 3>> faces;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        for (int side : {0, cells[static_cast<std::size_t>(a)]}) {
            for (int q = 0; q < cells[static_cast<std::size_t>(c)]; ++q) {
                for (int p = 0; p < cells[static_cast<std::size_t>(b)]; ++p) {
                    auto vid = [&](int dp, int dq) {
                        std::array<int, 3> ijk{};
                        ijk[static_cast<std::size_t>(a)] = side;
                        ijk[static_cast<std::size_t>(b)] = p + dp;
                        ijk[static_cast<std::size_t>(c)] = q + dq;
                        return index[static_cast<std::size_t>(lattice(ijk[0], ijk[1], ijk[2]))];
                    };
                    const int v00 = vid(0, 0);
                    const int v10 = vid(1, 0);
                    const int v11 = vid(1, 1);
                    const int v01 = vid(0, 1);
                    // e_b x e_c = e_a: counterclockwise in (b, c) faces outward on the max side.
                    if (side != 0) {
                        faces.push_back({v00, v10, v11});
                        faces.push_back({v00, v11, v01});
                    } else {
                        faces.push_back({v00, v11, v10});
                        faces.push_back({v00, v01, v11});
                    }
                }
            }
        }
    }

    TriangleMesh mesh;
    mesh.positions.resize(static_cast<Eigen::Index>(points.size()), 3);
    for (std::size_t i = 0; i < points.size(); ++i) {
        mesh.positions.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    }
    mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        mesh.triangles.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];
    }
    return mesh;
}

} // namespace

MeshKind parse_mesh_kind(std::string_view text)
{
    std::string name(text);
    std::replace(name.begin(), name.end(), '-', '_');
    if (name == "grid_plane") return MeshKind::GridPlane;
    if (name == "bumpy_plane") return MeshKind::BumpyPlane;
    if (name == "bumpy_cylinder") return MeshKind::BumpyCylinder;
    if (name == "bar") return MeshKind::Bar;
    if (name == "spiky_plane") return MeshKind::SpikyPlane;
    throw Error(ErrorCode::InvalidParam, "unknown mesh kind '" + std::string(name) + "'");
}

std::string_view to_string(MeshKind kind)
{
    switch (kind) {
    case MeshKind::GridPlane: return "grid_plane";
    case MeshKind::BumpyPlane: return "bumpy_plane";
    case MeshKind::BumpyCylinder: return "bumpy_cylinder";
    case MeshKind::Bar: return "bar";
    case MeshKind::SpikyPlane: return "spiky_plane";
    }
    return "unknown";
}

TriangleMesh make_test_mesh(MeshKind kind, int resolution, const TestMeshParams& params)
{
    if (resolution < 2) {
        throw Error(ErrorCode::InvalidParam, "resolution must be at least 2");
    }
    if (!(params.size > 0.0)) {
        throw Error(ErrorCode::InvalidParam, "size must be positive");
    }
    switch (kind) {
    case MeshKind::GridPlane: return grid(resolution, params.size);
    case MeshKind::BumpyPlane: return bumpy_plane(resolution, params);
    case MeshKind::BumpyCylinder: return bumpy_cylinder(resolution, params);
    case MeshKind::Bar: return bar(resolution, params);
    case MeshKind::SpikyPlane: return spiky_plane(resolution, params);
    }
    throw Error(ErrorCode::InvalidParam, "unknown mesh kind");
}

} // namespace sarap
