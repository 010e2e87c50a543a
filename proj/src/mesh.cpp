#include <sarap/error.hpp>
#include <sarap/mesh.hpp>

#include <algorithm>
#include <string>
#include <unordered_map>

namespace sarap {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonManifold: return "NonManifold";
    case ErrorCode::InconsistentOrientation: return "InconsistentOrientation";
    case ErrorCode::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DuplicateConstraint: return "DuplicateConstraint";
    case ErrorCode::NotConstrained: return "NotConstrained";
    case ErrorCode::SingularConstraintBlock: return "SingularConstraintBlock";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoMesh: return "NoMesh";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::BadRequest: return "BadRequest";
    }
    return "Unknown";
}

void validate(const TriangleMesh& mesh)
{
    const int n = mesh.num_vertices();
    for (int f = 0; f < mesh.num_triangles(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int v = mesh.triangles(f, k);
            if (v < 0 || v >= n) {
                throw Error(ErrorCode::OutOfRange,
                    "triangle " + std::to_string(f) + " references vertex " + std::to_string(v) +
                        " outside [0, " + std::to_string(n) + ")");
            }
        }
        const auto t = mesh.triangles.row(f);
        if (t(0) == t(1) || t(1) == t(2) || t(0) == t(2)) {
            throw Error(ErrorCode::DegenerateTriangle,
                "triangle " + std::to_string(f) + " repeats a vertex index");
        }
    }
    if (!mesh.positions.allFinite()) {
        throw Error(ErrorCode::NonFinite, "mesh positions contain NaN or Inf");
    }
}

double bbox_diagonal(const Positions& positions)
{
    if (positions.rows() == 0) {
        return 0.0;
    }
    return (positions.colwise().maxCoeff() - positions.colwise().minCoeff()).norm();
}

namespace {

std::uint64_t edge_key(int u, int v)
{
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
           static_cast<std::uint32_t>(v);
}

} // namespace

HalfEdgeMesh::HalfEdgeMesh(TriangleMesh mesh)
    : m_mesh(std::move(mesh))
{
    validate(m_mesh);
    const int n = num_vertices();
    const int nh = num_halfedges();

    std::unordered_map<std::uint64_t, int> directed;
    std::unordered_map<std::uint64_t, int> undirected_count;
    directed.reserve(static_cast<std::size_t>(nh));
    undirected_count.reserve(static_cast<std::size_t>(nh));
    for (int h = 0; h < nh; ++h) {
        const int u = origin(h);
        const int v = target(h);
        if (++undirected_count[edge_key(std::min(u, v), std::max(u, v))] > 2) {
            throw Error(ErrorCode::NonManifold,
                "edge (" + std::to_string(u) + ", " + std::to_string(v) + ") borders more than two triangles");
        }
    }
    for (int h = 0; h < nh; ++h) {
        const int u = origin(h);
        const int v = target(h);
        if (!directed.emplace(edge_key(u, v), h).second) {
            throw Error(ErrorCode::InconsistentOrientation,
                "half-edge (" + std::to_string(u) + ", " + std::to_string(v) +
                    ") appears twice; neighboring triangles disagree on winding");
        }
    }

    m_twin.assign(static_cast<std::size_t>(nh), kBoundary);
    for (int h = 0; h < nh; ++h) {
        const auto it = directed.find(edge_key(target(h), origin(h)));
        if (it != directed.end()) {
            m_twin[static_cast<std::size_t>(h)] = it->second;
        } else {
            ++m_num_boundary;
        }
    }

    // Outgoing half-edge of every (vertex, face) corner, bucketed per vertex.
    std::vector<int> count(static_cast<std::size_t>(n) + 1, 0);
    for (int h = 0; h < nh; ++h) {
        ++count[static_cast<std::size_t>(origin(h)) + 1];
    }
    for (int v = 0; v < n; ++v) {
        count[static_cast<std::size_t>(v) + 1] += count[static_cast<std::size_t>(v)];
    }
    std::vector<int> outgoing(static_cast<std::size_t>(nh));
    {
        std::vector<int> cursor(count.begin(), count.end() - 1);
        for (int h = 0; h < nh; ++h) {
            outgoing[static_cast<std::size_t>(cursor[static_cast<std::size_t>(origin(h))]++)] = h;
        }
    }

    m_vertex_face_offsets = count;
    m_vertex_faces.resize(static_cast<std::size_t>(nh));
    m_boundary_vertex.assign(static_cast<std::size_t>(n), 0);
    for (int v = 0; v < n; ++v) {
        const int begin = count[static_cast<std::size_t>(v)];
        const int end = count[static_cast<std::size_t>(v) + 1];
        if (begin == end) {
            throw Error(ErrorCode::NonManifold, "vertex " + std::to_string(v) + " is not referenced by any triangle");
        }
        // Start from the outgoing half-edge that cannot be rotated backwards, if any.
        int start = outgoing[static_cast<std::size_t>(begin)];
        int boundary_starts = 0;
        for (int i = begin; i < end; ++i) {
            const int h = outgoing[static_cast<std::size_t>(i)];
            if (is_boundary(h)) {
                start = h;
                ++boundary_starts;
            }
        }
        if (boundary_starts > 1) {
            throw Error(ErrorCode::NonManifold, "vertex " + std::to_string(v) + " has a non-manifold fan");
        }
        m_boundary_vertex[static_cast<std::size_t>(v)] = boundary_starts > 0 ? 1 : 0;

        int written = begin;
        int h = start;
        do {
            if (written == end) {
                break;
            }
            m_vertex_faces[static_cast<std::size_t>(written++)] = face(h);
            const int incoming = prev(h);
            if (is_boundary(incoming)) {
                break;
            }
            h = twin(incoming);
        } while (h != start);
        if (written != end) {
            throw Error(ErrorCode::NonManifold,
                "vertex " + std::to_string(v) + " has disconnected triangle fans");
        }
    }

    m_bbox_diagonal = sarap::bbox_diagonal(m_mesh.positions);
}

std::span<const int> HalfEdgeMesh::faces_around(int v) const
{
    const auto begin = static_cast<std::size_t>(m_vertex_face_offsets[static_cast<std::size_t>(v)]);
    const auto end = static_cast<std::size_t>(m_vertex_face_offsets[static_cast<std::size_t>(v) + 1]);
    return std::span<const int>(m_vertex_faces).subspan(begin, end - begin);
}

HalfEdgeMesh build_halfedge(TriangleMesh mesh)
{
    return HalfEdgeMesh(std::move(mesh));
}

std::vector<int> spokes_and_rims(const HalfEdgeMesh& mesh, int v)
{
    if (v < 0 || v >= mesh.num_vertices()) {
        throw Error(ErrorCode::OutOfRange, "vertex " + std::to_string(v) + " out of range");
    }
    std::vector<int> result;
    const auto faces = mesh.faces_around(v);
    result.reserve(faces.size() * 3);
    for (int f : faces) {
        result.push_back(3 * f);
        result.push_back(3 * f + 1);
        result.push_back(3 * f + 2);
    }
    return result;
}

} // namespace sarap
