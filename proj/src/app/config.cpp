#include <sarap/app/config.hpp>
#include <sarap/error.hpp>
#include <sarap/mesh_io.hpp>
#include <sarap/scenarios.hpp>

#include <fstream>
#include <sstream>

namespace sarap::app {

namespace fs = std::filesystem;

void parse_deform_params(const json& value, DeformParams& params, bool* init_given)
{
    require_object(value, "params",
        {"lambda", "epsilon", "max_iterations", "tolerance", "rotation_fit", "constraint_mode", "init", "backend"});
    if (value.contains("lambda")) params.lambda = get_number(value, "lambda", "params");
    if (value.contains("epsilon")) params.epsilon = get_number(value, "epsilon", "params");
    if (value.contains("max_iterations")) params.max_iterations = get_int(value, "max_iterations", "params");
    if (value.contains("tolerance")) params.tolerance = get_number(value, "tolerance", "params");
    if (value.contains("rotation_fit")) {
        params.rotation_fit = parse_rotation_fit(get_string(value, "rotation_fit", "params"));
    }
    if (value.contains("constraint_mode")) {
        params.constraint_mode = parse_constraint_mode(get_string(value, "constraint_mode", "params"));
    }
    if (value.contains("init")) {
        params.init = parse_init_mode(get_string(value, "init", "params"));
        if (init_given) {
            *init_given = true;
        }
    }
    if (value.contains("backend")) {
        const std::string name = get_string(value, "backend", "params");
        if (name == "default") params.backend = SolverBackend::Default;
        else if (name == "eigen") params.backend = SolverBackend::EigenLLT;
        else if (name == "cholmod") params.backend = SolverBackend::Cholmod;
        else if (name == "cholmod_supernodal") params.backend = SolverBackend::CholmodSupernodal;
        else throw Error(ErrorCode::InvalidParam, "unknown backend '" + name + "'");
    }
    params.validate();
}

json deform_params_to_json(const DeformParams& p)
{
    const char* backend = p.backend == SolverBackend::Cholmod             ? "cholmod"
                          : p.backend == SolverBackend::CholmodSupernodal ? "cholmod_supernodal"
                          : p.backend == SolverBackend::EigenLLT          ? "eigen"
                                                                          : "default";
    return {
        {"lambda", p.lambda},
        {"epsilon", p.epsilon},
        {"max_iterations", p.max_iterations},
        {"tolerance", p.tolerance},
        {"rotation_fit", to_string(p.rotation_fit)},
        {"constraint_mode", to_string(p.constraint_mode)},
        {"init", to_string(p.init)},
        {"backend", backend},
    };
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

MeshSource parse_mesh_source(const json& value, const fs::path& base)
{
    MeshSource src;
    if (value.is_string()) {
        src.path = resolve(base, value.get<std::string>());
        return src;
    }
    require_object(value, "mesh",
        {"path", "generator", "scenario", "resolution", "size", "bumps", "bump_height", "bump_width",
            "spike_spacing", "spike_height", "seed"});
    const int kinds = int(value.contains("path")) + int(value.contains("generator")) + int(value.contains("scenario"));
    if (kinds != 1) {
        throw Error(ErrorCode::InvalidParam, "'mesh' needs exactly one of 'path', 'generator', 'scenario'");
    }
    if (value.contains("path")) {
        if (value.size() != 1) {
            throw Error(ErrorCode::InvalidParam, "'mesh.path' takes no generator options");
        }
        src.path = resolve(base, get_string(value, "path", "mesh"));
        return src;
    }
    if (value.contains("generator")) {
        src.kind = MeshSource::Kind::Generator;
        src.name = get_string(value, "generator", "mesh");
        parse_mesh_kind(src.name);
    } else {
        src.kind = MeshSource::Kind::Scenario;
        src.name = get_string(value, "scenario", "mesh");
        default_resolution(src.name);
        for (const char* key : {"size", "bumps", "bump_height", "bump_width", "spike_spacing", "spike_height", "seed"}) {
            if (value.contains(key)) {
                throw Error(ErrorCode::InvalidParam, std::string("'mesh.") + key + "' is fixed by the scenario");
            }
        }
    }
    if (value.contains("resolution")) src.resolution = get_int(value, "resolution", "mesh");
    src.shape = parse_mesh_shape(value, "mesh");
    return src;
}

HandleSpec parse_handle(const json& value, std::size_t index)
{
    const std::string context = "handles[" + std::to_string(index) + "]";
    require_object(value, context, {"vertex", "position", "offset"});
    HandleSpec h;
    h.vertex = get_int(value, "vertex", context);
    if (value.contains("position") && value.contains("offset")) {
        throw Error(ErrorCode::InvalidParam, "'" + context + "' takes either 'position' or 'offset'");
    }
    if (value.contains("position")) h.position = get_vec3(value, "position", context);
    if (value.contains("offset")) h.offset = get_vec3(value, "offset", context);
    return h;
}

} // namespace

TestMeshParams parse_mesh_shape(const json& value, std::string_view context)
{
    TestMeshParams s;
    if (value.contains("size")) s.size = get_number(value, "size", context);
    if (value.contains("bumps")) s.bumps = get_int(value, "bumps", context);
    if (value.contains("bump_height")) s.bump_height = get_number(value, "bump_height", context);
    if (value.contains("bump_width")) s.bump_width = get_number(value, "bump_width", context);
    if (value.contains("spike_spacing")) s.spike_spacing = get_int(value, "spike_spacing", context);
    if (value.contains("spike_height")) s.spike_height = get_number(value, "spike_height", context);
    if (value.contains("seed")) {
        const json& seed = value.at("seed");
        if (!seed.is_number_unsigned()) {
            throw Error(ErrorCode::InvalidParam, "'" + std::string(context) + ".seed' must be a non-negative integer");
        }
        s.seed = seed.get<std::uint64_t>();
    }
    return s;
}

JobConfig parse_job_config(const json& value, const fs::path& base)
{
    require_object(value, "config", {"$schema", "mesh", "params", "handles", "fixed", "fix_boundary", "initial", "output"});
    if (!value.contains("mesh")) {
        throw Error(ErrorCode::InvalidParam, "missing field 'mesh'");
    }
    JobConfig cfg;
    cfg.mesh = parse_mesh_source(value.at("mesh"), base);
    if (value.contains("params")) {
        parse_deform_params(value.at("params"), cfg.params, &cfg.init_given);
    }
    if (value.contains("handles")) {
        const json& hs = value.at("handles");
        if (!hs.is_array()) {
            throw Error(ErrorCode::InvalidParam, "'handles' must be an array");
        }
        for (std::size_t i = 0; i < hs.size(); ++i) {
            cfg.handles.push_back(parse_handle(hs[i], i));
        }
    }
    if (value.contains("fixed")) {
        const json& fixed = value.at("fixed");
        if (!fixed.is_array()) {
            throw Error(ErrorCode::InvalidParam, "'fixed' must be an array of vertex indices");
        }
        for (const json& v : fixed) {
            if (!v.is_number_integer()) {
                throw Error(ErrorCode::InvalidParam, "'fixed' must be an array of vertex indices");
            }
            cfg.fixed.push_back(v.get<int>());
        }
    }
    if (value.contains("fix_boundary")) cfg.fix_boundary = get_bool(value, "fix_boundary", "");
    if (value.contains("initial")) cfg.initial = resolve(base, get_string(value, "initial", ""));
    if (cfg.params.init == InitMode::Previous && !cfg.initial) {
        throw Error(ErrorCode::InvalidParam, "init 'previous' needs an 'initial' mesh");
    }
    if (value.contains("output")) {
        const json& out = value.at("output");
        require_object(out, "output", {"mesh", "report", "trace"});
        if (out.contains("mesh")) {
            cfg.output.mesh = resolve(base, get_string(out, "mesh", "output"));
            mesh_format_from_path(*cfg.output.mesh);
        }
        if (out.contains("report")) cfg.output.report = resolve(base, get_string(out, "report", "output"));
        if (out.contains("trace")) cfg.output.trace = resolve(base, get_string(out, "trace", "output"));
    }
    return cfg;
}

JobConfig read_job_config(const fs::path& file)
{
    std::ifstream in(file);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open config '" + file.string() + "'");
    }
    json value;
    try {
        value = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
    }
    return parse_job_config(value, file.parent_path());
}

TriangleMesh load_mesh_source(const MeshSource& source)
{
    switch (source.kind) {
    case MeshSource::Kind::File:
        return load_mesh(source.path);
    case MeshSource::Kind::Generator: {
        const MeshKind kind = parse_mesh_kind(source.name);
        const int res = source.resolution > 0 ? source.resolution : 33;
        return make_test_mesh(kind, res, source.shape);
    }
    case MeshSource::Kind::Scenario:
        return make_scenario(source.name, source.resolution > 0 ? source.resolution : default_resolution(source.name)).mesh;
    }
    throw Error(ErrorCode::InvalidParam, "unknown mesh source");
}

Job prepare_job(const JobConfig& cfg)
{
    Job job;
    job.params = cfg.params;
    job.constraints.targets.resize(0, 3);
    if (cfg.mesh.kind == MeshSource::Kind::Scenario) {
        const int res = cfg.mesh.resolution > 0 ? cfg.mesh.resolution : default_resolution(cfg.mesh.name);
        Scenario s = make_scenario(cfg.mesh.name, res);
        job.mesh = std::move(s.mesh);
        job.constraints = std::move(s.constraints);
        if (!cfg.init_given) {
            job.params.init = s.init;
        }
    } else {
        job.mesh = load_mesh_source(cfg.mesh);
    }
    const Positions& x = job.mesh.positions;
    const int n = static_cast<int>(x.rows());
    auto check = [n](int v, const std::string& what) {
        if (v < 0 || v >= n) {
            throw Error(ErrorCode::OutOfRange,
                what + " vertex " + std::to_string(v) + " out of range (mesh has " + std::to_string(n) + " vertices)");
        }
    };
    if (cfg.fix_boundary) {
        const HalfEdgeMesh he(job.mesh);
        for (int v = 0; v < n; ++v) {
            if (he.is_boundary_vertex(v) && !job.constraints.contains(v)) {
                job.constraints.add(v, x.row(v).transpose());
            }
        }
    }
    for (int v : cfg.fixed) {
        check(v, "fixed");
        job.constraints.add(v, x.row(v).transpose());
    }
    for (const HandleSpec& h : cfg.handles) {
        check(h.vertex, "handle");
        job.constraints.add(h.vertex, h.position ? *h.position : Eigen::Vector3d(x.row(h.vertex).transpose() + h.offset));
    }
    if (cfg.initial) {
        TriangleMesh init = load_mesh(*cfg.initial);
        if (init.positions.rows() != n) {
            throw Error(ErrorCode::InvalidParam, "initial mesh has " + std::to_string(init.positions.rows()) +
                                                     " vertices, expected " + std::to_string(n));
        }
        job.initial = std::move(init.positions);
    }
    return job;
}

} // namespace sarap::app
