#include "support/support.hpp"

#include <sarap/error.hpp>
#include <sarap/generators.hpp>
#include <sarap/mesh_io.hpp>

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace sarap;

namespace {

ErrorCode code_of(const std::string& text, MeshFormat format)
{
    std::istringstream in(text);
    try {
        load_mesh(in, format);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::BadRequest;
}

} // namespace

TEST_CASE("single-triangle OFF")
{
    std::istringstream in("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    const auto m = load_mesh(in, MeshFormat::Off);
    CHECK(m.num_vertices() == 3);
    CHECK(m.num_triangles() == 1);
    CHECK(m.triangles.row(0) == Eigen::RowVector3i(0, 1, 2));
}

TEST_CASE("OFF with comments and an extra-whitespace header")
{
    std::istringstream in("# made by hand\nOFF\n\n3 1 3\n0 0 0\n  1 0 0\n0 1 0 # tip\n3 0 1 2\n");
    const auto m = load_mesh(in, MeshFormat::Off);
    CHECK(m.num_vertices() == 3);
    CHECK(m.positions(1, 0) == 1.0);
}

TEST_CASE("OBJ quad is rejected")
{
    CHECK(code_of("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n", MeshFormat::Obj) == ErrorCode::ParseError);
}

TEST_CASE("OBJ with texture and normal references, negative indices and other directives")
{
    std::istringstream in(
        "# test\nmtllib x.mtl\no thing\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\ng grp\nusemtl m\ns off\n"
        "f 1/1/1 2/1/1 3/1/1\nv 1 1 0\nf -3//1 -1//1 -2//1\n");
    const auto m = load_mesh(in, MeshFormat::Obj);
    CHECK(m.num_vertices() == 4);
    REQUIRE(m.num_triangles() == 2);
    CHECK(m.triangles.row(1) == Eigen::RowVector3i(1, 3, 2));
}

TEST_CASE("malformed input is a parse error")
{
    CHECK(code_of("v 0 0\n", MeshFormat::Obj) == ErrorCode::ParseError);
    CHECK(code_of("v 0 0 x\n", MeshFormat::Obj) == ErrorCode::ParseError);
    CHECK(code_of("v 0 0 0\nf 1 2 3\n", MeshFormat::Obj) == ErrorCode::ParseError);
    CHECK(code_of("OFF\n3 1 0\n0 0 0\n1 0 0\n", MeshFormat::Off) == ErrorCode::ParseError);
    CHECK(code_of("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", MeshFormat::Off) == ErrorCode::ParseError);
    CHECK(code_of("PLY\n", MeshFormat::Off) == ErrorCode::ParseError);
}

TEST_CASE("parse errors carry the line number")
{
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3 1\n");
    try {
        load_mesh(in, MeshFormat::Obj);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("round trip is bit-exact")
{
    auto grid = make_test_mesh(MeshKind::GridPlane, 10);
    // awkward values that need all 17 significant digits
    grid.positions.col(2) = Eigen::VectorXd::LinSpaced(grid.num_vertices(), 0.1, 1.0 / 3.0);
    for (auto format : {MeshFormat::Off, MeshFormat::Obj}) {
        std::stringstream buffer;
        save_mesh(buffer, grid, format);
        const auto back = load_mesh(buffer, format);
        CHECK(back.positions == grid.positions);
        CHECK(back.triangles == grid.triangles);
    }
    const auto random = testing::random_mesh(3, 6);
    std::stringstream buffer;
    save_mesh(buffer, random, MeshFormat::Off);
    CHECK(load_mesh(buffer, MeshFormat::Off).positions == random.positions);
}

TEST_CASE("file paths pick the format from the extension")
{
    const auto dir = std::filesystem::temp_directory_path() / "sarap_io_test";
    std::filesystem::create_directories(dir);
    const auto mesh = make_test_mesh(MeshKind::GridPlane, 4);
    for (const char* name : {"m.obj", "m.OFF"}) {
        save_mesh(dir / name, mesh);
        CHECK(load_mesh(dir / name).positions == mesh.positions);
    }
    CHECK_THROWS_AS(load_mesh(dir / "m.stl"), Error);
    CHECK_THROWS_AS(load_mesh(dir / "missing.obj"), Error);
    std::filesystem::remove_all(dir);
    CHECK(parse_mesh_format("OBJ") == MeshFormat::Obj);
    CHECK_THROWS_AS(parse_mesh_format("ply"), Error);
}
