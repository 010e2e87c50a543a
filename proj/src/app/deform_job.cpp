#include <sarap/app/commands.hpp>
#include <sarap/error.hpp>
#include <sarap/mesh_io.hpp>
#include <sarap/scenarios.hpp>

#include <spdlog/spdlog.h>

#include <chrono>
#include <fstream>

namespace sarap::app {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    return out;
}

json energy_json(const EnergyBreakdown& e)
{
    return {{"total", e.total}, {"arap", e.arap}, {"smooth", e.smooth}};
}

} // namespace

void write_trace_csv(const fs::path& path, const std::vector<IterationRecord>& trace)
{
    std::ofstream out = open_output(path);
    out.precision(17);
    out << "iteration,energy,arap,smooth,change\n";
    for (const IterationRecord& r : trace) {
        out << r.iteration << ',' << r.energy.total << ',' << r.energy.arap << ',' << r.energy.smooth << ','
            << r.change << '\n';
    }
}

JobOutcome run_job(const JobConfig& config)
{
    JobOutcome o;
    o.job = prepare_job(config);
    const auto start = std::chrono::steady_clock::now();
    auto model = DeformModel::build(o.job.mesh);
    o.result = deform(model, o.job.constraints, o.job.params, o.job.initial ? &*o.job.initial : nullptr);
    spdlog::info("deformed {} vertices in {:.3f} s: {} iterations, converged={}", model->num_vertices(),
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), o.result.iterations,
        o.result.converged);

    if (!o.result.trace.empty()) {
        o.energy = o.result.trace.back().energy;
    } else {
        const RotationField r = local_step(*model, o.result.positions, o.job.params.rotation_fit, o.job.params.lambda);
        o.energy = evaluate_energy(*model, o.result.positions, r, o.job.params.lambda);
    }
    o.report = {
        {"vertices", model->num_vertices()},
        {"triangles", model->mesh.num_faces()},
        {"handles", o.job.constraints.size()},
        {"params", deform_params_to_json(o.job.params)},
        {"iterations", o.result.iterations},
        {"converged", o.result.converged},
        {"change", o.result.trace.empty() ? 0.0 : o.result.trace.back().change},
        {"energy", energy_json(o.energy)},
    };

    if (config.output.mesh) {
        TriangleMesh out{o.result.positions, o.job.mesh.triangles};
        if (config.output.mesh->has_parent_path()) {
            fs::create_directories(config.output.mesh->parent_path());
        }
        save_mesh(*config.output.mesh, out);
    }
    if (config.output.report) {
        open_output(*config.output.report) << o.report.dump(2) << '\n';
    }
    if (config.output.trace) {
        write_trace_csv(*config.output.trace, o.result.trace);
    }
    return o;
}

std::vector<TraceRun> run_trace(const TraceOptions& options, const fs::path& out_dir)
{
    const int res = options.resolution > 0 ? options.resolution : default_resolution(options.preset);
    const Scenario s = make_scenario(options.preset, res);
    auto model = DeformModel::build(s.mesh);
    std::vector<TraceRun> runs;
    for (RotationFit fit : {RotationFit::EdgeOnly, RotationFit::Full}) {
        DeformParams p;
        p.lambda = options.lambda;
        p.tolerance = options.tolerance;
        p.max_iterations = options.max_iterations;
        p.rotation_fit = fit;
        p.init = s.init;
        TraceRun run;
        run.fit = fit;
        if (options.no_stop) {
            Deformer d(model, p);
            d.set_constraints(s.constraints);
            d.initialize(p.init);
            for (int i = 0; i < p.max_iterations; ++i) {
                d.iterate();
            }
            run.result.positions = d.positions();
            run.result.iterations = d.iterations();
            run.result.trace = d.trace();
            run.result.converged = !d.trace().empty() && d.trace().back().change < p.tolerance;
        } else {
            run.result = deform(model, s.constraints, p);
        }
        run.file = out_dir / ("trace_" + std::string(to_string(fit)) + ".csv");
        write_trace_csv(run.file, run.result.trace);
        spdlog::info("{}: {} iterations, converged={}, wrote {}", to_string(fit), run.result.iterations,
            run.result.converged, run.file.string());
        runs.push_back(std::move(run));
    }
    return runs;
}

json trace_summary(const TraceOptions& options, const std::vector<TraceRun>& runs)
{
    json out = {{"preset", options.preset}, {"lambda", options.lambda}, {"tolerance", options.tolerance}, {"runs", json::array()}};
    for (const TraceRun& r : runs) {
        json row = {
            {"rotation_fit", to_string(r.fit)},
            {"file", r.file.string()},
            {"iterations", r.result.iterations},
            {"converged", r.result.converged},
        };
        if (!r.result.trace.empty()) {
            row["energy"] = energy_json(r.result.trace.back().energy);
        }
        out["runs"].push_back(row);
    }
    return out;
}

} // namespace sarap::app
