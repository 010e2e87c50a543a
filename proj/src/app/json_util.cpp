#include <sarap/app/json_util.hpp>
#include <sarap/error.hpp>

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace sarap::app {

static_assert(std::endian::native == std::endian::little, "vertex buffers assume a little-endian host");

namespace {

std::string field_name(std::string_view context, std::string_view key)
{
    return context.empty() ? std::string(key) : std::string(context) + "." + std::string(key);
}

[[noreturn]] void type_error(std::string_view context, std::string_view key, std::string_view expected)
{
    throw Error(ErrorCode::InvalidParam, "'" + field_name(context, key) + "' must be " + std::string(expected));
}

const json& field(const json& obj, std::string_view key, std::string_view context)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorCode::InvalidParam, "missing field '" + field_name(context, key) + "'");
    }
    return *it;
}

} // namespace

void require_object(const json& value, std::string_view context, std::initializer_list<std::string_view> allowed)
{
    if (!value.is_object()) {
        throw Error(ErrorCode::InvalidParam, "'" + std::string(context) + "' must be an object");
    }
    for (const auto& [key, _] : value.items()) {
        bool known = false;
        for (std::string_view a : allowed) {
            known = known || key == a;
        }
        if (!known) {
            throw Error(ErrorCode::InvalidParam, "unknown field '" + field_name(context, key) + "'");
        }
    }
}

double get_number(const json& obj, std::string_view key, std::string_view context)
{
    const json& v = field(obj, key, context);
    if (!v.is_number()) {
        type_error(context, key, "a number");
    }
    return v.get<double>();
}

int get_int(const json& obj, std::string_view key, std::string_view context)
{
    const json& v = field(obj, key, context);
    if (!v.is_number_integer()) {
        type_error(context, key, "an integer");
    }
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) {
        type_error(context, key, "a 32-bit integer");
    }
    return static_cast<int>(x);
}

bool get_bool(const json& obj, std::string_view key, std::string_view context)
{
    const json& v = field(obj, key, context);
    if (!v.is_boolean()) {
        type_error(context, key, "a boolean");
    }
    return v.get<bool>();
}

std::string get_string(const json& obj, std::string_view key, std::string_view context)
{
    const json& v = field(obj, key, context);
    if (!v.is_string()) {
        type_error(context, key, "a string");
    }
    return v.get<std::string>();
}

Eigen::Vector3d get_vec3(const json& obj, std::string_view key, std::string_view context)
{
    const json& v = field(obj, key, context);
    if (!v.is_array() || v.size() != 3) {
        type_error(context, key, "an array of 3 numbers");
    }
    Eigen::Vector3d out;
    for (int k = 0; k < 3; ++k) {
        if (!v[static_cast<std::size_t>(k)].is_number()) {
            type_error(context, key, "an array of 3 numbers");
        }
        out(k) = v[static_cast<std::size_t>(k)].get<double>();
    }
    if (!out.allFinite()) {
        throw Error(ErrorCode::NonFinite, "'" + field_name(context, key) + "' is not finite");
    }
    return out;
}

json to_json(const Eigen::Vector3d& v)
{
    return json::array({v.x(), v.y(), v.z()});
}

std::string base64_encode(std::string_view bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
        reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0) {
        throw Error(ErrorCode::ParseError, "base64 length is not a multiple of 4");
    }
    std::string out(3 * (text.size() / 4), '\0');
    const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
        reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) {
        throw Error(ErrorCode::ParseError, "malformed base64");
    }
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding
    std::size_t pad = 0;
    if (!text.empty() && text.back() == '=') {
        pad = text.size() >= 2 && text[text.size() - 2] == '=' ? 2 : 1;
    }
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string encode_positions(const Positions& positions)
{
    const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rows = positions;
    return base64_encode(std::string_view(reinterpret_cast<const char*>(rows.data()),
        static_cast<std::size_t>(rows.size()) * sizeof(double)));
}

Positions decode_positions(std::string_view text)
{
    const std::string bytes = base64_decode(text);
    if (bytes.size() % (3 * sizeof(double)) != 0) {
        throw Error(ErrorCode::ParseError, "position buffer size is not a multiple of 24 bytes");
    }
    Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rows(
        static_cast<Eigen::Index>(bytes.size() / (3 * sizeof(double))), 3);
    std::memcpy(rows.data(), bytes.data(), bytes.size());
    return rows;
}

std::string encode_triangles(const Triangles& triangles)
{
    std::vector<std::uint32_t> flat(static_cast<std::size_t>(triangles.size()));
    for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            flat[static_cast<std::size_t>(3 * f + k)] = static_cast<std::uint32_t>(triangles(f, k));
        }
    }
    return base64_encode(
        std::string_view(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(std::uint32_t)));
}

Triangles decode_triangles(std::string_view text)
{
    const std::string bytes = base64_decode(text);
    if (bytes.size() % (3 * sizeof(std::uint32_t)) != 0) {
        throw Error(ErrorCode::ParseError, "triangle buffer size is not a multiple of 12 bytes");
    }
    std::vector<std::uint32_t> flat(bytes.size() / sizeof(std::uint32_t));
    std::memcpy(flat.data(), bytes.data(), bytes.size());
    Triangles t(static_cast<Eigen::Index>(flat.size() / 3), 3);
    for (Eigen::Index f = 0; f < t.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            t(f, k) = static_cast<int>(flat[static_cast<std::size_t>(3 * f + k)]);
        }
    }
    return t;
}

} // namespace sarap::app
