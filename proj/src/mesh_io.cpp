#include <sarap/error.hpp>
#include <sarap/mesh_io.hpp>

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace sarap {

namespace {

[[noreturn]] void parse_error(std::size_t line, const std::string& what)
{
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

/// Splits on whitespace.
std::vector<std::string_view> tokens(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
        }
        if (i > start) {
            out.push_back(s.substr(start, i - start));
        }
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view token, T& value)
{
    if (!token.empty() && token.front() == '+') {
        token.remove_prefix(1);
    }
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    return ec == std::errc() && ptr == token.data() + token.size();
}

TriangleMesh to_mesh(const std::vector<std::array<double, 3>>& vertices, const std::vector<std::array<int, 3>>& faces)
{
    TriangleMesh mesh;
    mesh.positions.resize(static_cast<Eigen::Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            mesh.positions(static_cast<Eigen::Index>(i), k) = vertices[i][static_cast<std::size_t>(k)];
        }
    }
    mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            mesh.triangles(static_cast<Eigen::Index>(i), k) = faces[i][static_cast<std::size_t>(k)];
        }
    }
    return mesh;
}

TriangleMesh read_obj(std::istream& in)
{
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<std::size_t> face_lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(std::string_view(line).substr(0, line.find('#')));
        if (content.empty()) {
            continue;
        }
        const auto tok = tokens(content);
        if (tok[0] == "v") {
            if (tok.size() < 4 || tok.size() > 7) {
                parse_error(line_no, "vertex needs 3 coordinates");
            }
            std::array<double, 3> p{};
            for (std::size_t k = 0; k < 3; ++k) {
                if (!parse_number(tok[k + 1], p[k])) {
                    parse_error(line_no, "bad coordinate '" + std::string(tok[k + 1]) + "'");
                }
            }
            vertices.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() != 4) {
                parse_error(line_no, "only triangle faces are supported (got " + std::to_string(tok.size() - 1) + " corners)");
            }
            std::array<int, 3> f{};
            for (std::size_t k = 0; k < 3; ++k) {
                // v, v/vt, v//vn or v/vt/vn: position index is the first field.
                const auto field = tok[k + 1].substr(0, tok[k + 1].find('/'));
                long index = 0;
                if (!parse_number(field, index) || index == 0) {
                    parse_error(line_no, "bad face index '" + std::string(tok[k + 1]) + "'");
                }
                const long resolved = index > 0 ? index - 1 : static_cast<long>(vertices.size()) + index;
                if (resolved < 0) {
                    parse_error(line_no, "relative face index before first vertex");
                }
                f[k] = static_cast<int>(resolved);
            }
            faces.push_back(f);
            face_lines.push_back(line_no);
        } else if (tok[0] == "l" || tok[0] == "p") {
            parse_error(line_no, "line and point elements are not supported");
        }
        // vn, vt, g, o, s, usemtl, mtllib and friends are ignored.
    }
    if (in.bad()) {
        throw Error(ErrorCode::IoError, "read failure");
    }
    // OBJ allows faces before the vertices they use, so ranges are checked at the end.
    for (std::size_t i = 0; i < faces.size(); ++i) {
        for (int v : faces[i]) {
            if (static_cast<std::size_t>(v) >= vertices.size()) {
                parse_error(face_lines[i], "face index " + std::to_string(v + 1) + " exceeds vertex count");
            }
        }
    }
    return to_mesh(vertices, faces);
}

/// Next non-empty, comment-stripped line of an OFF file.
bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no, std::string_view& content)
{
    while (std::getline(in, line)) {
        ++line_no;
        content = trim(std::string_view(line).substr(0, line.find('#')));
        if (!content.empty()) {
            return true;
        }
    }
    return false;
}

TriangleMesh read_off(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    std::string_view content;
    if (!next_content_line(in, line, line_no, content)) {
        parse_error(line_no, "empty OFF file");
    }
    auto tok = tokens(content);
    if (tok[0] != "OFF") {
        parse_error(line_no, "missing OFF header");
    }
    tok.erase(tok.begin());
    if (tok.empty()) {
        if (!next_content_line(in, line, line_no, content)) {
            parse_error(line_no, "missing element counts");
        }
        tok = tokens(content);
    }
    long nv = 0;
    long nf = 0;
    if (tok.size() < 2 || !parse_number(tok[0], nv) || !parse_number(tok[1], nf) || nv < 0 || nf < 0) {
        parse_error(line_no, "bad element counts");
    }

    std::vector<std::array<double, 3>> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(in, line, line_no, content)) {
            parse_error(line_no, "unexpected end of file in vertex block");
        }
        const auto vt = tokens(content);
        std::array<double, 3> p{};
        if (vt.size() < 3) {
            parse_error(line_no, "vertex needs 3 coordinates");
        }
        for (std::size_t k = 0; k < 3; ++k) {
            if (!parse_number(vt[k], p[k])) {
                parse_error(line_no, "bad coordinate '" + std::string(vt[k]) + "'");
            }
        }
        vertices.push_back(p);
    }

    std::vector<std::array<int, 3>> faces;
    faces.reserve(static_cast<std::size_t>(nf));
    for (long i = 0; i < nf; ++i) {
        if (!next_content_line(in, line, line_no, content)) {
            parse_error(line_no, "unexpected end of file in face block");
        }
        const auto ft = tokens(content);
        long corners = 0;
        if (!parse_number(ft[0], corners)) {
            parse_error(line_no, "bad face corner count");
        }
        if (corners != 3) {
            parse_error(line_no, "only triangle faces are supported (got " + std::to_string(corners) + " corners)");
        }
        if (ft.size() < 4) {
            parse_error(line_no, "face lists fewer than 3 indices");
        }
        std::array<int, 3> f{};
        for (std::size_t k = 0; k < 3; ++k) {
            long index = 0;
            if (!parse_number(ft[k + 1], index) || index < 0 || index >= nv) {
                parse_error(line_no, "bad face index '" + std::string(ft[k + 1]) + "'");
            }
            f[k] = static_cast<int>(index);
        }
        faces.push_back(f);
    }
    return to_mesh(vertices, faces);
}

void write_number(std::ostream& out, double x)
{
    std::array<char, 32> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    out.write(buf.data(), ptr - buf.data());
}

} // namespace

MeshFormat parse_mesh_format(std::string_view name)
{
    std::string lower(name);
    for (auto& c : lower) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (lower == "obj") {
        return MeshFormat::Obj;
    }
    if (lower == "off") {
        return MeshFormat::Off;
    }
    throw Error(ErrorCode::InvalidParam, "unknown mesh format '" + std::string(name) + "'");
}

MeshFormat mesh_format_from_path(const std::filesystem::path& path)
{
    auto ext = path.extension().string();
    if (!ext.empty()) {
        ext.erase(0, 1);
    }
    return parse_mesh_format(ext);
}

TriangleMesh load_mesh(std::istream& in, MeshFormat format)
{
    return format == MeshFormat::Obj ? read_obj(in) : read_off(in);
}

TriangleMesh load_mesh(const std::filesystem::path& path)
{
    const auto format = mesh_format_from_path(path);
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    }
    return load_mesh(in, format);
}

void save_mesh(std::ostream& out, const TriangleMesh& mesh, MeshFormat format)
{
    if (format == MeshFormat::Off) {
        out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << " 0\n";
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (format == MeshFormat::Obj) {
            out << "v ";
        }
        for (int k = 0; k < 3; ++k) {
            write_number(out, mesh.positions(v, k));
            out << (k < 2 ? ' ' : '\n');
        }
    }
    const int base = format == MeshFormat::Obj ? 1 : 0;
    for (int f = 0; f < mesh.num_triangles(); ++f) {
        out << (format == MeshFormat::Obj ? "f " : "3 ") << mesh.triangles(f, 0) + base << ' '
            << mesh.triangles(f, 1) + base << ' ' << mesh.triangles(f, 2) + base << '\n';
    }
}

void save_mesh(const std::filesystem::path& path, const TriangleMesh& mesh)
{
    const auto format = mesh_format_from_path(path);
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    save_mesh(out, mesh, format);
    if (!out) {
        throw Error(ErrorCode::IoError, "write failure on '" + path.string() + "'");
    }
}

} // namespace sarap
