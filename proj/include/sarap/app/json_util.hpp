#pragma once

#include <sarap/mesh.hpp>

#include <json.hpp>

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <string_view>

namespace sarap::app {

using nlohmann::json;

/// Throws InvalidParam when `value` is not an object or has a key outside `allowed`.
void require_object(const json& value, std::string_view context, std::initializer_list<std::string_view> allowed);

/// Typed field readers. All throw InvalidParam naming `context.key` on a type mismatch.
double get_number(const json& obj, std::string_view key, std::string_view context);
int get_int(const json& obj, std::string_view key, std::string_view context);
bool get_bool(const json& obj, std::string_view key, std::string_view context);
std::string get_string(const json& obj, std::string_view key, std::string_view context);
/// Array of three finite numbers.
Eigen::Vector3d get_vec3(const json& obj, std::string_view key, std::string_view context);

json to_json(const Eigen::Vector3d& v);

/// Little-endian float64 / uint32 buffers, base64 encoded (row-major, xyz per vertex).
std::string encode_positions(const Positions& positions);
Positions decode_positions(std::string_view text);
std::string encode_triangles(const Triangles& triangles);
Triangles decode_triangles(std::string_view text);

std::string base64_encode(std::string_view bytes);
/// Throws ParseError on malformed input.
std::string base64_decode(std::string_view text);

} // namespace sarap::app
