#include <sarap/app/config.hpp>
#include <sarap/app/session.hpp>
#include <sarap/error.hpp>
#include <sarap/generators.hpp>
#include <sarap/mesh_io.hpp>

#include <spdlog/spdlog.h>

#include <sstream>

namespace sarap::app {

namespace {

constexpr int kMaxResolution = 2048;
constexpr int kMaxFrameIterations = 1000;

json envelope(std::string_view type)
{
    return {{"v", kProtocolVersion}, {"type", type}};
}

json ack(std::int64_t id)
{
    json m = envelope("Ack");
    m["id"] = id;
    return m;
}

} // namespace

json error_message(const json& id, std::string_view code, std::string_view message)
{
    json m = envelope("Error");
    m["id"] = id;
    m["code"] = code;
    m["message"] = message;
    return m;
}

Session::Session(SessionOptions options)
    : m_options(std::move(options))
{
    m_options.params.validate();
    if (m_options.max_iter_per_frame < 1) {
        throw Error(ErrorCode::InvalidParam, "max_iter_per_frame must be at least 1");
    }
}

std::vector<json> Session::handle_text(std::string_view text)
{
    json msg;
    try {
        msg = json::parse(text);
    } catch (const json::parse_error& e) {
        return {error_message(nullptr, to_string(ErrorCode::ParseError), e.what())};
    }
    return handle(msg);
}

std::vector<json> Session::handle(const json& msg)
{
    json id = nullptr;
    if (msg.is_object() && msg.contains("id")) {
        id = msg.at("id");
    }
    try {
        if (!msg.is_object()) {
            throw Error(ErrorCode::BadRequest, "message must be a JSON object");
        }
        if (!msg.contains("v") || msg.at("v") != kProtocolVersion) {
            throw Error(ErrorCode::BadRequest, "unsupported or missing protocol version 'v' (expected 1)");
        }
        if (!id.is_number_integer()) {
            throw Error(ErrorCode::BadRequest, "'id' must be an integer");
        }
        const auto request = id.get<std::int64_t>();
        if (m_last_id && request <= *m_last_id) {
            throw Error(ErrorCode::BadRequest,
                "request id " + std::to_string(request) + " does not increase (last " + std::to_string(*m_last_id) + ")");
        }
        m_last_id = request;
        if (!msg.contains("type") || !msg.at("type").is_string()) {
            throw Error(ErrorCode::BadRequest, "'type' must be a string");
        }
        if (m_finished) {
            throw Error(ErrorCode::BadRequest, "session has shut down");
        }
        std::vector<json> out = dispatch(msg.at("type").get<std::string>(), msg);
        out.push_back(ack(request));
        return out;
    } catch (const Error& e) {
        spdlog::debug("request {} failed: {} {}", id.dump(), to_string(e.code()), e.what());
        return {error_message(id, to_string(e.code()), e.what())};
    } catch (const json::exception& e) {
        return {error_message(id, to_string(ErrorCode::BadRequest), e.what())};
    } catch (const std::exception& e) {
        spdlog::error("request {} failed: {}", id.dump(), e.what());
        return {error_message(id, "Internal", e.what())};
    }
}

Deformer& Session::require_mesh()
{
    if (!m_deformer) {
        throw Error(ErrorCode::NoMesh, "no mesh loaded");
    }
    return *m_deformer;
}

int Session::require_vertex(const json& msg)
{
    const Deformer& d = require_mesh();
    const int v = get_int(msg, "vertex", "");
    if (v < 0 || v >= d.model().num_vertices()) {
        throw Error(ErrorCode::OutOfRange, "vertex " + std::to_string(v) + " out of range (mesh has " +
                                               std::to_string(d.model().num_vertices()) + " vertices)");
    }
    return v;
}

std::vector<json> Session::dispatch(const std::string& type, const json& msg)
{
    std::vector<json> out;
    if (type == "LoadMesh") {
        require_object(msg, "LoadMesh", {"v", "id", "type", "format", "payload", "generator"});
        load_mesh(msg, out);
    } else if (type == "SetParams") {
        require_object(msg, "SetParams",
            {"v", "id", "type", "lambda", "tolerance", "max_iter_per_frame", "rotation_fit", "constraint_mode"});
        set_params(msg);
    } else if (type == "AddHandle") {
        require_object(msg, "AddHandle", {"v", "id", "type", "vertex", "position"});
        const int v = require_vertex(msg);
        const Eigen::Vector3d target = msg.contains("position")
                                           ? get_vec3(msg, "position", "")
                                           : Eigen::Vector3d(m_deformer->positions().row(v).transpose());
        if (m_deformer->constraints().contains(v)) {
            throw Error(ErrorCode::DuplicateConstraint, "vertex " + std::to_string(v) + " is already a handle");
        }
        m_deformer->add_constraint(v, target);
    } else if (type == "MoveHandle") {
        require_object(msg, "MoveHandle", {"v", "id", "type", "vertex", "position"});
        const int v = require_vertex(msg);
        const Eigen::Vector3d target = get_vec3(msg, "position", "");
        if (!m_deformer->constraints().contains(v)) {
            throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(v) + " is not a handle");
        }
        m_deformer->set_target(v, target);
        out.push_back(frame(m_options.max_iter_per_frame));
    } else if (type == "RemoveHandle") {
        require_object(msg, "RemoveHandle", {"v", "id", "type", "vertex"});
        const int v = require_vertex(msg);
        if (!m_deformer->constraints().contains(v)) {
            throw Error(ErrorCode::NotConstrained, "vertex " + std::to_string(v) + " is not a handle");
        }
        m_deformer->remove_constraint(v);
    } else if (type == "Step") {
        require_object(msg, "Step", {"v", "id", "type", "iterations"});
        require_mesh();
        int n = m_options.max_iter_per_frame;
        if (msg.contains("iterations")) {
            n = get_int(msg, "iterations", "");
            if (n < 1 || n > m_options.max_step_iterations) {
                throw Error(ErrorCode::InvalidParam,
                    "iterations must lie in [1, " + std::to_string(m_options.max_step_iterations) + "]");
            }
        }
        out.push_back(frame(n));
    } else if (type == "ResetPose") {
        require_object(msg, "ResetPose", {"v", "id", "type"});
        Deformer& d = require_mesh();
        ConstraintSet reset = d.constraints();
        for (int j = 0; j < reset.size(); ++j) {
            reset.targets.row(j) = d.model().rest().row(reset.indices[static_cast<std::size_t>(j)]);
        }
        for (int j = 0; j < reset.size(); ++j) {
            d.set_target(reset.indices[static_cast<std::size_t>(j)], reset.targets.row(j).transpose());
        }
        d.set_positions(d.model().rest());
        out.push_back(frame(m_options.max_iter_per_frame));
    } else if (type == "Shutdown") {
        require_object(msg, "Shutdown", {"v", "id", "type"});
        m_finished = true;
    } else {
        throw Error(ErrorCode::BadRequest, "unknown message type '" + type + "'");
    }
    return out;
}

void Session::load_mesh(const json& msg, std::vector<json>& out)
{
    TriangleMesh mesh;
    if (msg.contains("generator")) {
        if (msg.contains("payload") || msg.contains("format")) {
            throw Error(ErrorCode::BadRequest, "LoadMesh takes either 'generator' or 'format' + 'payload'");
        }
        const json& g = msg.at("generator");
        require_object(g, "generator",
            {"kind", "resolution", "size", "bumps", "bump_height", "bump_width", "spike_spacing", "spike_height", "seed"});
        const MeshKind kind = parse_mesh_kind(get_string(g, "kind", "generator"));
        const int res = get_int(g, "resolution", "generator");
        if (res > kMaxResolution) {
            throw Error(ErrorCode::InvalidParam, "resolution above " + std::to_string(kMaxResolution));
        }
        mesh = make_test_mesh(kind, res, parse_mesh_shape(g, "generator"));
    } else {
        const MeshFormat format = parse_mesh_format(get_string(msg, "format", ""));
        std::istringstream in(get_string(msg, "payload", ""));
        mesh = sarap::load_mesh(in, format);
    }
    auto model = DeformModel::build(std::move(mesh));
    DeformParams params = m_options.params;
    if (m_deformer) {
        params = m_deformer->params();
    }
    m_deformer = std::make_unique<Deformer>(model, params);
    m_model = model;
    spdlog::info("session mesh: {} vertices, {} triangles", model->num_vertices(), model->mesh.num_faces());

    json topo = envelope("MeshTopology");
    topo["vertices"] = model->num_vertices();
    topo["triangle_count"] = model->mesh.num_faces();
    topo["triangles"] = encode_triangles(model->mesh.triangles());
    topo["positions"] = encode_positions(model->rest());
    topo["bbox_diagonal"] = model->bbox_diagonal;
    out.push_back(std::move(topo));
}

void Session::set_params(const json& msg)
{
    // validate everything before touching the session
    DeformParams next = m_deformer ? m_deformer->params() : m_options.params;
    int per_frame = m_options.max_iter_per_frame;
    if (msg.contains("lambda")) next.lambda = get_number(msg, "lambda", "");
    if (msg.contains("tolerance")) next.tolerance = get_number(msg, "tolerance", "");
    if (msg.contains("rotation_fit")) next.rotation_fit = parse_rotation_fit(get_string(msg, "rotation_fit", ""));
    if (msg.contains("constraint_mode")) {
        next.constraint_mode = parse_constraint_mode(get_string(msg, "constraint_mode", ""));
    }
    if (msg.contains("max_iter_per_frame")) {
        per_frame = get_int(msg, "max_iter_per_frame", "");
        if (per_frame < 1 || per_frame > kMaxFrameIterations) {
            throw Error(ErrorCode::InvalidParam,
                "max_iter_per_frame must lie in [1, " + std::to_string(kMaxFrameIterations) + "]");
        }
    }
    next.validate();

    m_options.max_iter_per_frame = per_frame;
    if (!m_deformer) {
        m_options.params = next;
        return;
    }
    Deformer& d = *m_deformer;
    if (next.constraint_mode != d.params().constraint_mode) {
        // new solver layout: rebuild, keeping pose and handles
        auto rebuilt = std::make_unique<Deformer>(m_model, next);
        rebuilt->set_constraints(d.constraints());
        rebuilt->set_positions(d.positions());
        m_deformer = std::move(rebuilt);
        return;
    }
    if (next.lambda != d.params().lambda) {
        d.set_lambda(next.lambda);
    }
    d.set_tolerance(next.tolerance);
    d.set_rotation_fit(next.rotation_fit);
}

json Session::frame(int iterations)
{
    Deformer& d = *m_deformer;
    const int before = d.iterations();
    const bool converged = d.run(iterations);
    m_iterations += d.iterations() - before;
    const IterationRecord& last = d.trace().back();

    json f = envelope("Frame");
    f["frame"] = ++m_frame;
    f["iteration"] = m_iterations;
    f["positions"] = encode_positions(d.positions());
    f["energy"] = {{"total", last.energy.total}, {"arap", last.energy.arap}, {"smooth", last.energy.smooth}};
    f["change"] = last.change;
    f["converged"] = converged;
    f["handles"] = d.constraints().size();
    return f;
}

} // namespace sarap::app
