#pragma once

#include <sarap/mesh.hpp>

#include <filesystem>
#include <iosfwd>
#include <string_view>

namespace sarap {

enum class MeshFormat { Obj, Off };

/// "obj" / "off", case-insensitive. Throws InvalidParam.
MeshFormat parse_mesh_format(std::string_view name);
MeshFormat mesh_format_from_path(const std::filesystem::path& path);

/// ASCII reader. Only triangle faces are accepted; normals, texture coordinates,
/// groups and materials are skipped. Throws ParseError with the offending line number.
TriangleMesh load_mesh(std::istream& in, MeshFormat format);
TriangleMesh load_mesh(const std::filesystem::path& path);

/// Writes coordinates in shortest round-trip form, so a reload is bit-exact.
void save_mesh(std::ostream& out, const TriangleMesh& mesh, MeshFormat format);
void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh);

} // namespace sarap
