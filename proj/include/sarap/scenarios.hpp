#pragma once

#include <sarap/deformer.hpp>
#include <sarap/generators.hpp>
#include <sarap/linear.hpp>
#include <sarap/mesh.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace sarap {

/// A generated mesh together with a handle layout.
struct Scenario
{
    std::string name;
    TriangleMesh mesh;
    ConstraintSet constraints;
    /// Vertex the experiment centers on (the dragged point handle), or -1.
    int focus_vertex = -1;
    /// Initialization the preset is meant to be run with.
    InitMode init = InitMode::BiLaplacian;
};

/// Presets used by the bench and trace commands and the acceptance suite.
///
/// - "bumpy_plane": boundary fixed, the vertex nearest the center raised by 0.3 bbox.
/// - "bumpy_cylinder": bottom ring fixed, top ring shifted sideways and lowered.
/// - "bar": one end fixed, the other end twisted by 90 degrees about the bar axis.
/// - "spiky_plane": one border row fixed, the opposite row twisted by 45 degrees about
///   the x axis; started from the undeformed mesh.
/// Names accept '-' in place of '_'.
Scenario make_scenario(std::string_view name, int resolution);

std::vector<std::string> scenario_names();

/// Default resolution of each preset (a few thousand vertices).
int default_resolution(std::string_view name);

/// Vertices whose coordinate `axis` is within `tol` of `value`.
std::vector<int> vertices_where(const Positions& positions, int axis, double value, double tol);

/// Vertex closest to `point`.
int nearest_vertex(const Positions& positions, const Eigen::Vector3d& point);

/// Vertices within `rings` edge hops of v (including v).
std::vector<int> k_ring(const HalfEdgeMesh& mesh, int v, int rings);

} // namespace sarap
