#pragma once

#include <sarap/app/json_util.hpp>
#include <sarap/deformer.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

namespace sarap::app {

inline constexpr int kProtocolVersion = 1;

struct SessionOptions
{
    /// Handle edits go through the updating solver by default, so they never refactorize.
    DeformParams params = [] {
        DeformParams p;
        p.constraint_mode = ConstraintMode::KktUpdating;
        p.init = InitMode::Previous;
        return p;
    }();
    int max_iter_per_frame = 4;
    /// Upper bound for Step{iterations}.
    int max_step_iterations = 10000;
};

/// Interactive editing state behind one client connection.
///
/// `handle` consumes one client message and returns the server messages it produces,
/// in order; the last one is always the Ack or Error for that request. It is a pure
/// function of the message sequence, so replaying a script gives identical output.
///
/// Client messages: {"v":1, "id":<int, strictly increasing>, "type":..., ...}
///   LoadMesh     {format:"obj"|"off", payload:<text>} or {generator:{kind, resolution, ...}}
///   SetParams    {lambda?, tolerance?, max_iter_per_frame?, rotation_fit?, constraint_mode?}
///   AddHandle    {vertex, position?}     target defaults to the vertex's current position
///   MoveHandle   {vertex, position}      -> Frame
///   RemoveHandle {vertex}
///   Step         {iterations?}           -> Frame
///   ResetPose    {}                      -> Frame
///   Shutdown     {}
/// Server messages: MeshTopology, Frame, Ack, Error.
class Session
{
public:
    explicit Session(SessionOptions options = {});

    std::vector<json> handle(const json& message);
    /// Parses `text` first; malformed JSON yields a single ParseError.
    std::vector<json> handle_text(std::string_view text);

    bool finished() const { return m_finished; }
    const Deformer* deformer() const { return m_deformer.get(); }
    std::int64_t frames() const { return m_frame; }
    const SessionOptions& options() const { return m_options; }

private:
    std::vector<json> dispatch(const std::string& type, const json& msg);
    void load_mesh(const json& msg, std::vector<json>& out);
    void set_params(const json& msg);
    json frame(int iterations);
    Deformer& require_mesh();
    int require_vertex(const json& msg);

    SessionOptions m_options;
    std::shared_ptr<const DeformModel> m_model;
    std::unique_ptr<Deformer> m_deformer;
    /// Local-global iterations over the whole session; Frames carry it.
    std::int64_t m_iterations = 0;
    std::optional<std::int64_t> m_last_id;
    std::int64_t m_frame = 0;
    bool m_finished = false;
};

json error_message(const json& id, std::string_view code, std::string_view message);

} // namespace sarap::app
