#pragma once

#include <sarap/mesh.hpp>

#include <cstdint>
#include <string>
#include <string_view>

namespace sarap {

enum class MeshKind { GridPlane, BumpyPlane, BumpyCylinder, Bar, SpikyPlane };

/// snake_case name; '-' is accepted in place of '_'.
MeshKind parse_mesh_kind(std::string_view name);
std::string_view to_string(MeshKind kind);

/// Shape parameters for the synthetic meshes. Lengths are in model units.
///
/// - grid_plane / bumpy_plane / spiky_plane: `resolution` x `resolution` vertices on a
///   `size` x `size` square in the z=0 plane, all cells split along the same diagonal.
/// - bumpy_cylinder: `resolution` vertices around, 2*`resolution` rings, radius size/2,
///   height 2*size, open at both caps.
/// - bar: closed box of size 4*size x size x size with `resolution` cells across.
struct TestMeshParams
{
    double size = 1.0;
    int bumps = 16;
    double bump_height = 0.05;
    double bump_width = 0.06;
    int spike_spacing = 4;
    double spike_height = 0.3;
    std::uint64_t seed = 7;
};

/// Deterministic for fixed arguments. Throws InvalidParam when resolution < 2
/// (bumpy_cylinder needs at least 3 vertices around).
TriangleMesh make_test_mesh(MeshKind kind, int resolution, const TestMeshParams& params = {});

} // namespace sarap
