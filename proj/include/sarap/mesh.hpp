#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace sarap {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3>;

/// Indexed triangle mesh. Triangles are counterclockwise as seen from outside.
struct TriangleMesh
{
    Positions positions;
    Triangles triangles;

    int num_vertices() const { return static_cast<int>(positions.rows()); }
    int num_triangles() const { return static_cast<int>(triangles.rows()); }
};

/// Checks index range and repeated indices. Throws Error on failure.
void validate(const TriangleMesh& mesh);

/// Length of the diagonal of the axis-aligned bounding box.
double bbox_diagonal(const Positions& positions);

/// Half-edge h = 3*f + k runs from triangles(f, k) to triangles(f, (k+1)%3).
/// The opposite corner of h is triangles(f, (k+2)%3).
class HalfEdgeMesh
{
public:
    static constexpr int kBoundary = -1;

    /// Builds connectivity. Throws NonManifold or InconsistentOrientation.
    explicit HalfEdgeMesh(TriangleMesh mesh);

    const TriangleMesh& mesh() const { return m_mesh; }
    const Positions& positions() const { return m_mesh.positions; }
    const Triangles& triangles() const { return m_mesh.triangles; }

    int num_vertices() const { return m_mesh.num_vertices(); }
    int num_faces() const { return m_mesh.num_triangles(); }
    int num_halfedges() const { return 3 * num_faces(); }

    int origin(int h) const { return m_mesh.triangles(h / 3, h % 3); }
    int target(int h) const { return m_mesh.triangles(h / 3, (h + 1) % 3); }
    int opposite_corner(int h) const { return m_mesh.triangles(h / 3, (h + 2) % 3); }
    int face(int h) const { return h / 3; }
    int next(int h) const { return 3 * (h / 3) + (h + 1) % 3; }
    int prev(int h) const { return 3 * (h / 3) + (h + 2) % 3; }
    int twin(int h) const { return m_twin[static_cast<std::size_t>(h)]; }
    bool is_boundary(int h) const { return twin(h) == kBoundary; }

    /// Faces incident to v, in circulation order.
    std::span<const int> faces_around(int v) const;

    bool is_boundary_vertex(int v) const { return m_boundary_vertex[static_cast<std::size_t>(v)] != 0; }
    int num_boundary_halfedges() const { return m_num_boundary; }

    double bbox_diagonal() const { return m_bbox_diagonal; }

private:
    TriangleMesh m_mesh;
    std::vector<int> m_twin;
    std::vector<int> m_vertex_face_offsets;
    std::vector<int> m_vertex_faces;
    std::vector<std::uint8_t> m_boundary_vertex;
    int m_num_boundary = 0;
    double m_bbox_diagonal = 0.0;
};

HalfEdgeMesh build_halfedge(TriangleMesh mesh);

/// Spokes-and-rims neighborhood of v: all 3*|faces(v)| half-edges of the incident
/// triangles, grouped per face in circulation order. Spokes appear once per direction.
std::vector<int> spokes_and_rims(const HalfEdgeMesh& mesh, int v);

} // namespace sarap
