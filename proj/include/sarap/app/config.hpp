#pragma once

#include <sarap/app/json_util.hpp>
#include <sarap/deformer.hpp>
#include <sarap/generators.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sarap::app {

struct MeshSource
{
    enum class Kind { File, Generator, Scenario };
    Kind kind = Kind::File;
    std::filesystem::path path;
    /// Generator or scenario name.
    std::string name;
    /// 0 selects the preset default.
    int resolution = 0;
    TestMeshParams shape;
};

/// Target is `position` when given, else the rest position plus `offset`.
struct HandleSpec
{
    int vertex = -1;
    std::optional<Eigen::Vector3d> position;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

struct OutputSpec
{
    std::optional<std::filesystem::path> mesh;
    std::optional<std::filesystem::path> report;
    /// Per-iteration CSV (iteration, energy, arap, smooth, change).
    std::optional<std::filesystem::path> trace;
};

/// One batch deformation job. Relative paths are resolved against the config file's directory.
struct JobConfig
{
    MeshSource mesh;
    DeformParams params;
    /// params.init was given explicitly (otherwise a scenario may pick its own).
    bool init_given = false;
    std::vector<HandleSpec> handles;
    /// Vertices pinned at their rest positions.
    std::vector<int> fixed;
    bool fix_boundary = false;
    /// Starting pose for init "previous".
    std::optional<std::filesystem::path> initial;
    OutputSpec output;
};

/// Reads the keys of a params object into `params`. Unknown keys throw InvalidParam.
void parse_deform_params(const json& value, DeformParams& params, bool* init_given = nullptr);
json deform_params_to_json(const DeformParams& params);

/// Throws InvalidParam on schema violations.
JobConfig parse_job_config(const json& value, const std::filesystem::path& base_dir = {});
/// Throws IoError, ParseError (malformed JSON) or InvalidParam.
JobConfig read_job_config(const std::filesystem::path& file);

/// A config with its mesh loaded and handle targets resolved.
struct Job
{
    TriangleMesh mesh;
    ConstraintSet constraints;
    DeformParams params;
    std::optional<Positions> initial;
};

/// Loads or generates the mesh and builds the constraint set.
/// Throws OutOfRange / DuplicateConstraint for bad handles, plus mesh-loading errors.
Job prepare_job(const JobConfig& config);

TriangleMesh load_mesh_source(const MeshSource& source);

/// Reads the optional generator shape keys (size, bumps, bump_height, bump_width,
/// spike_spacing, spike_height, seed) of `value`.
TestMeshParams parse_mesh_shape(const json& value, std::string_view context);

} // namespace sarap::app
