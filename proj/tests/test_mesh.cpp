#include "support/support.hpp"

#include <sarap/error.hpp>
#include <sarap/generators.hpp>
#include <sarap/mesh.hpp>

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace sarap;

namespace {

TriangleMesh make(std::initializer_list<std::array<double, 3>> pts, std::initializer_list<std::array<int, 3>> tris)
{
    TriangleMesh m;
    m.positions.resize(static_cast<Eigen::Index>(pts.size()), 3);
    int i = 0;
    for (const auto& p : pts) {
        m.positions.row(i++) << p[0], p[1], p[2];
    }
    m.triangles.resize(static_cast<Eigen::Index>(tris.size()), 3);
    i = 0;
    for (const auto& t : tris) {
        m.triangles.row(i++) << t[0], t[1], t[2];
    }
    return m;
}

TriangleMesh tetrahedron()
{
    return make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}});
}

void check_invariants(const HalfEdgeMesh& he)
{
    for (int h = 0; h < he.num_halfedges(); ++h) {
        CHECK(he.next(he.next(he.next(h))) == h);
        CHECK(he.target(h) == he.origin(he.next(h)));
        if (!he.is_boundary(h)) {
            const int t = he.twin(h);
            CHECK(he.twin(t) == h);
            CHECK(he.origin(t) == he.target(h));
            CHECK(he.target(t) == he.origin(h));
        }
    }
    // circulation visits exactly the incident faces
    std::vector<std::set<int>> incident(static_cast<std::size_t>(he.num_vertices()));
    for (int f = 0; f < he.num_faces(); ++f) {
        for (int k = 0; k < 3; ++k) {
            incident[static_cast<std::size_t>(he.triangles()(f, k))].insert(f);
        }
    }
    for (int v = 0; v < he.num_vertices(); ++v) {
        const auto faces = he.faces_around(v);
        const std::set<int> got(faces.begin(), faces.end());
        CHECK(got.size() == faces.size());
        CHECK(got == incident[static_cast<std::size_t>(v)]);
    }
}

} // namespace

TEST_CASE("single triangle has three boundary half-edges")
{
    const HalfEdgeMesh he(make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}));
    CHECK(he.num_halfedges() == 3);
    CHECK(he.num_boundary_halfedges() == 3);
    for (int h = 0; h < 3; ++h) {
        CHECK(he.is_boundary(h));
    }
}

TEST_CASE("two triangles share one twinned edge")
{
    const HalfEdgeMesh he(make({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 2, 3}}));
    CHECK(he.num_halfedges() == 6);
    CHECK(he.num_boundary_halfedges() == 4);
    int twinned = 0;
    for (int h = 0; h < 6; ++h) {
        twinned += he.is_boundary(h) ? 0 : 1;
    }
    CHECK(twinned == 2);
    check_invariants(he);
}

TEST_CASE("closed tetrahedron satisfies the Euler count")
{
    const HalfEdgeMesh he(tetrahedron());
    CHECK(he.num_halfedges() == 12);
    CHECK(he.num_boundary_halfedges() == 0);
    const int edges = he.num_halfedges() / 2;
    CHECK(he.num_vertices() - edges + he.num_faces() == 2);
    check_invariants(he);
}

TEST_CASE("non-manifold and inconsistent inputs are rejected")
{
    SUBCASE("edge with three faces")
    {
        const auto m = make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}}, {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
        try {
            HalfEdgeMesh he(m);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK((e.code() == ErrorCode::NonManifold || e.code() == ErrorCode::InconsistentOrientation));
        }
    }
    SUBCASE("flipped neighbor")
    {
        const auto m = make({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}}, {{0, 1, 2}, {0, 3, 2}});
        try {
            HalfEdgeMesh he(m);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InconsistentOrientation);
        }
    }
    SUBCASE("repeated index")
    {
        const auto m = make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 1}});
        CHECK_THROWS_AS(validate(m), Error);
    }
    SUBCASE("index out of range")
    {
        const auto m = make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}});
        CHECK_THROWS_AS(HalfEdgeMesh{m}, Error);
    }
    SUBCASE("two fans meeting at a vertex")
    {
        const auto m = make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}}, {{0, 1, 2}, {0, 3, 4}});
        try {
            HalfEdgeMesh he(m);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NonManifold);
        }
    }
}

TEST_CASE("half-edge invariants hold on random and generated meshes")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        check_invariants(HalfEdgeMesh(testing::random_mesh(seed, 3 + static_cast<int>(seed % 5))));
    }
    for (auto kind : {MeshKind::GridPlane, MeshKind::BumpyPlane, MeshKind::BumpyCylinder, MeshKind::Bar, MeshKind::SpikyPlane}) {
        check_invariants(HalfEdgeMesh(make_test_mesh(kind, 6)));
    }
}

TEST_CASE("spokes and rims of an interior valence-6 vertex")
{
    const HalfEdgeMesh he(make_test_mesh(MeshKind::GridPlane, 5));
    const int v = 2 * 5 + 2;
    REQUIRE(he.faces_around(v).size() == 6);
    const auto hs = spokes_and_rims(he, v);
    CHECK(hs.size() == 18);
    const auto touching = std::count_if(hs.begin(), hs.end(), [&](int h) { return he.origin(h) == v || he.target(h) == v; });
    CHECK(touching == 12);
    // each spoke once per direction
    std::map<std::pair<int, int>, int> directed;
    for (int h : hs) {
        ++directed[{he.origin(h), he.target(h)}];
    }
    for (const auto& [edge, count] : directed) {
        CHECK(count == 1);
        if (edge.first == v) {
            CHECK(directed.count({edge.second, v}) == 1);
        }
    }
}

TEST_CASE("spokes and rims of a single triangle")
{
    const HalfEdgeMesh he(make({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}));
    for (int v = 0; v < 3; ++v) {
        CHECK(spokes_and_rims(he, v).size() == 3);
    }
}

TEST_CASE("spokes and rims match a brute-force scan")
{
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const HalfEdgeMesh he(testing::random_mesh(seed, 7));
        std::uniform_int_distribution<int> pick(0, he.num_vertices() - 1);
        for (int trial = 0; trial < 10; ++trial) {
            const int v = pick(rng);
            std::set<std::pair<int, int>> expected;
            for (int f = 0; f < he.num_faces(); ++f) {
                const auto t = he.triangles().row(f);
                if (t(0) == v || t(1) == v || t(2) == v) {
                    for (int k = 0; k < 3; ++k) {
                        expected.insert({t(k), t((k + 1) % 3)});
                    }
                }
            }
            std::set<std::pair<int, int>> got;
            const auto hs = spokes_and_rims(he, v);
            for (int h : hs) {
                got.insert({he.origin(h), he.target(h)});
            }
            CHECK(hs.size() == expected.size());
            CHECK(got == expected);
        }
    }
}

TEST_CASE("test mesh generators")
{
    SUBCASE("grid with resolution 2")
    {
        const auto m = make_test_mesh(MeshKind::GridPlane, 2);
        CHECK(m.num_vertices() == 4);
        CHECK(m.num_triangles() == 2);
    }
    SUBCASE("cylinder boundary only at the caps")
    {
        const auto m = make_test_mesh(MeshKind::BumpyCylinder, 8);
        const HalfEdgeMesh he(m);
        const double top = m.positions.col(2).maxCoeff();
        int boundary = 0;
        for (int v = 0; v < he.num_vertices(); ++v) {
            if (he.is_boundary_vertex(v)) {
                ++boundary;
                const double z = m.positions(v, 2);
                CHECK((std::abs(z) < 1e-12 || std::abs(z - top) < 1e-12));
            }
        }
        CHECK(boundary == 16);
    }
    SUBCASE("bar is closed")
    {
        const HalfEdgeMesh he(make_test_mesh(MeshKind::Bar, 3));
        CHECK(he.num_boundary_halfedges() == 0);
        CHECK(he.num_vertices() - he.num_halfedges() / 2 + he.num_faces() == 2);
    }
    SUBCASE("spiky plane has orthogonal spikes")
    {
        TestMeshParams p;
        const auto m = make_test_mesh(MeshKind::SpikyPlane, 13, p);
        int spikes = 0;
        for (int v = 0; v < m.num_vertices(); ++v) {
            if (m.positions(v, 2) > 0.0) {
                ++spikes;
                CHECK(m.positions(v, 2) == doctest::Approx(p.spike_height * p.size));
            }
        }
        CHECK(spikes > 0);
    }
    SUBCASE("deterministic")
    {
        for (auto kind : {MeshKind::BumpyPlane, MeshKind::BumpyCylinder, MeshKind::SpikyPlane}) {
            const auto a = make_test_mesh(kind, 9);
            const auto b = make_test_mesh(kind, 9);
            CHECK(a.positions == b.positions);
            CHECK(a.triangles == b.triangles);
        }
        TestMeshParams other;
        other.seed = 8;
        CHECK(make_test_mesh(MeshKind::BumpyPlane, 9).positions != make_test_mesh(MeshKind::BumpyPlane, 9, other).positions);
    }
    SUBCASE("resolution too small")
    {
        CHECK_THROWS_AS(make_test_mesh(MeshKind::GridPlane, 1), Error);
        CHECK_THROWS_AS(make_test_mesh(MeshKind::BumpyCylinder, 2), Error);
    }
    SUBCASE("kind names round trip")
    {
        for (auto kind : {MeshKind::GridPlane, MeshKind::BumpyPlane, MeshKind::BumpyCylinder, MeshKind::Bar, MeshKind::SpikyPlane}) {
            CHECK(parse_mesh_kind(to_string(kind)) == kind);
        }
        CHECK_THROWS_AS(parse_mesh_kind("teapot"), Error);
    }
}
