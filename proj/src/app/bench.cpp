#include <sarap/app/commands.hpp>
#include <sarap/app/session.hpp>
#include <sarap/error.hpp>
#include <sarap/scenarios.hpp>

#include <spdlog/spdlog.h>

#include <Eigen/Core>

#include <sys/utsname.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>

#ifndef SARAP_BUILD_TYPE
#define SARAP_BUILD_TYPE "unknown"
#endif

namespace sarap::app {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string cpu_model()
{
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                return line.substr(line.find_first_not_of(' ', colon + 1));
            }
        }
    }
    return "unknown";
}

json convergence_row(const BenchConfig& cfg, const BenchMesh& bm, double lambda)
{
    const int res = bm.resolution > 0 ? bm.resolution : default_resolution(bm.scenario);
    const Scenario s = make_scenario(bm.scenario, res);
    auto model = DeformModel::build(s.mesh);
    DeformParams p = cfg.params;
    p.lambda = lambda;
    if (!cfg.init_given) {
        p.init = s.init;
    }

    std::vector<double> factor_s, init_s, solve_s;
    int iterations = 0;
    bool converged = false;
    EnergyBreakdown energy;
    for (int r = 0; r < cfg.runs; ++r) {
        Deformer d(model, p);
        d.set_constraints(s.constraints);
        const auto t0 = Clock::now();
        d.initialize(p.init);
        init_s.push_back(seconds_since(t0));
        const double factor_before = d.factorization_seconds();
        const auto t1 = Clock::now();
        converged = d.run();
        const double run_s = seconds_since(t1);
        const double factor_in_run = d.factorization_seconds() - factor_before;
        factor_s.push_back(d.factorization_seconds());
        solve_s.push_back(run_s - factor_in_run);
        iterations = d.iterations();
        energy = d.trace().empty() ? EnergyBreakdown{} : d.trace().back().energy;
    }
    const double solve = median(solve_s);
    json row = {
        {"mesh", s.name},
        {"method", lambda == 0.0 ? "original" : "smooth"},
        {"lambda", lambda},
        {"vertices", model->num_vertices()},
        {"faces", model->mesh.num_faces()},
        {"init", to_string(p.init)},
        {"constraint_mode", to_string(p.constraint_mode)},
        {"iterations", iterations},
        {"converged", converged},
        {"factorization_s", median(factor_s)},
        {"init_s", median(init_s)},
        {"solve_s", solve},
        {"per_iteration_s", iterations > 0 ? solve / iterations : 0.0},
        {"energy", {{"total", energy.total}, {"arap", energy.arap}, {"smooth", energy.smooth}}},
    };
    spdlog::info("{} {}: {} iterations, solve {:.3f} s", s.name, row["method"].get<std::string>(), iterations, solve);
    return row;
}

json handle_add(const BenchConfig& cfg)
{
    const TriangleMesh mesh = make_test_mesh(MeshKind::BumpyPlane, cfg.handle_add_resolution);
    auto model = DeformModel::build(mesh);
    const Positions& x = model->rest();
    const SparseSym a = regularize(assemble_system_matrix(model->ops, cfg.params.lambda), cfg.params.epsilon);

    // base handles spread along the border, the new handle in the middle
    ConstraintSet base;
    base.targets.resize(0, 3);
    const int res = cfg.handle_add_resolution;
    for (int k = 0; k < cfg.handle_add_base_handles; ++k) {
        const int v = (k * (res * res - 1)) / std::max(1, cfg.handle_add_base_handles - 1);
        if (!base.contains(v)) base.add(v, x.row(v).transpose());
    }
    const int added = nearest_vertex(x, Eigen::Vector3d(0.5, 0.5, 0.0));
    const Eigen::Vector3d target = x.row(added).transpose() + Eigen::Vector3d(0.0, 0.0, 0.1);
    ConstraintSet grown = base;
    grown.add(added, target);

    std::vector<double> factor_s, refactor_s, subst_s, update_s;
    std::optional<UpdatingSolver> warm;
    for (int r = 0; r < cfg.runs; ++r) {
        auto t = Clock::now();
        Factorization f = factorize(a, cfg.params.backend);
        factor_s.push_back(seconds_since(t));

        t = Clock::now();
        Factorization f2 = factorize(a, cfg.params.backend);
        UpdatingSolver rebuilt = build_updating(f2, cfg.params.epsilon, grown);
        refactor_s.push_back(seconds_since(t));

        t = Clock::now();
        SubstitutionSolver subst(a, grown.indices, cfg.params.backend);
        subst_s.push_back(seconds_since(t));

        if (!warm) warm.emplace(build_updating(f, cfg.params.epsilon, base));
        UpdatingSolver u = *warm;
        t = Clock::now();
        u.add_constraint(added, target);
        update_s.push_back(seconds_since(t));
    }
    json out = {
        {"mesh", "bumpy_plane"},
        {"vertices", model->num_vertices()},
        {"faces", model->mesh.num_faces()},
        {"lambda", cfg.params.lambda},
        {"base_handles", base.size()},
        {"factorization_s", median(factor_s)},
        {"refactorize_s", median(refactor_s)},
        {"substitution_s", median(subst_s)},
        {"update_s", median(update_s)},
    };
    out["speedup"] = out["refactorize_s"].get<double>() / std::max(out["update_s"].get<double>(), 1e-12);
    spdlog::info("handle add on {} vertices: refactorize {:.4f} s, update {:.6f} s", model->num_vertices(),
        out["refactorize_s"].get<double>(), out["update_s"].get<double>());
    return out;
}

json frame_latency(const BenchConfig& cfg)
{
    SessionOptions options;
    options.params.lambda = cfg.params.lambda;
    options.params.backend = cfg.params.backend;
    options.max_iter_per_frame = cfg.latency_iterations_per_frame;
    Session session(options);
    std::int64_t id = 0;
    auto send = [&](json msg) {
        msg["v"] = kProtocolVersion;
        msg["id"] = ++id;
        auto replies = session.handle(msg);
        if (replies.back().at("type") == "Error") {
            throw Error(ErrorCode::BadRequest, "latency bench: " + replies.back().dump());
        }
        return replies;
    };
    const int res = cfg.latency_resolution;
    send({{"type", "LoadMesh"}, {"generator", {{"kind", "bumpy_plane"}, {"resolution", res}}}});
    const Positions& x = session.deformer()->model().rest();
    const int anchor = 0;
    const int drag = nearest_vertex(x, Eigen::Vector3d(0.5, 0.5, 0.0));
    send({{"type", "AddHandle"}, {"vertex", anchor}});
    send({{"type", "AddHandle"}, {"vertex", drag}});
    const int factorizations = session.deformer()->factorizations();

    std::vector<double> samples;
    Eigen::Vector3d p = x.row(drag).transpose();
    for (int m = 0; m <= cfg.latency_moves; ++m) {
        p.z() += 0.01;
        const auto t = Clock::now();
        send({{"type", "MoveHandle"}, {"vertex", drag}, {"position", to_json(p)}});
        if (m > 0) samples.push_back(seconds_since(t)); // first move is warm-up
    }
    json out = {
        {"mesh", "bumpy_plane"},
        {"vertices", x.rows()},
        {"handles", 2},
        {"iterations_per_frame", cfg.latency_iterations_per_frame},
        {"moves", cfg.latency_moves},
        {"median_s", median(samples)},
        {"max_s", *std::max_element(samples.begin(), samples.end())},
        {"refactorizations_during_drag", session.deformer()->factorizations() - factorizations},
    };
    spdlog::info("MoveHandle round trip on {} vertices: median {:.1f} ms", x.rows(), 1e3 * out["median_s"].get<double>());
    return out;
}

} // namespace

BenchConfig parse_bench_config(const json& value)
{
    require_object(value, "bench", {"$schema", "runs", "meshes", "lambdas", "params", "handle_add", "frame_latency"});
    BenchConfig cfg;
    cfg.params.max_iterations = 2000;
    if (value.contains("runs")) cfg.runs = get_int(value, "runs", "bench");
    if (cfg.runs < 5) {
        throw Error(ErrorCode::InvalidParam, "'runs' must be at least 5 (timings are medians)");
    }
    if (value.contains("meshes")) {
        const json& ms = value.at("meshes");
        if (!ms.is_array() || ms.empty()) {
            throw Error(ErrorCode::InvalidParam, "'meshes' must be a non-empty array");
        }
        cfg.meshes.clear();
        for (const json& m : ms) {
            require_object(m, "meshes[]", {"scenario", "resolution"});
            BenchMesh bm{get_string(m, "scenario", "meshes[]"), 0};
            default_resolution(bm.scenario);
            if (m.contains("resolution")) bm.resolution = get_int(m, "resolution", "meshes[]");
            cfg.meshes.push_back(bm);
        }
    }
    if (value.contains("lambdas")) {
        const json& ls = value.at("lambdas");
        if (!ls.is_array() || ls.empty()) {
            throw Error(ErrorCode::InvalidParam, "'lambdas' must be a non-empty array of numbers");
        }
        cfg.lambdas.clear();
        for (const json& l : ls) {
            if (!l.is_number() || !(l.get<double>() >= 0.0 && l.get<double>() < 1.0)) {
                throw Error(ErrorCode::InvalidParam, "'lambdas' entries must lie in [0, 1)");
            }
            cfg.lambdas.push_back(l.get<double>());
        }
    }
    if (value.contains("params")) parse_deform_params(value.at("params"), cfg.params, &cfg.init_given);
    if (value.contains("handle_add")) {
        const json& h = value.at("handle_add");
        if (h.is_null()) {
            cfg.handle_add_resolution = 0;
        } else {
            require_object(h, "handle_add", {"resolution", "base_handles"});
            if (h.contains("resolution")) cfg.handle_add_resolution = get_int(h, "resolution", "handle_add");
            if (h.contains("base_handles")) cfg.handle_add_base_handles = get_int(h, "base_handles", "handle_add");
            if (cfg.handle_add_resolution < 2 || cfg.handle_add_base_handles < 1) {
                throw Error(ErrorCode::InvalidParam, "'handle_add' needs resolution >= 2 and base_handles >= 1");
            }
        }
    }
    if (value.contains("frame_latency")) {
        const json& l = value.at("frame_latency");
        if (l.is_null()) {
            cfg.latency_resolution = 0;
        } else {
            require_object(l, "frame_latency", {"resolution", "iterations_per_frame", "moves"});
            if (l.contains("resolution")) cfg.latency_resolution = get_int(l, "resolution", "frame_latency");
            if (l.contains("iterations_per_frame")) {
                cfg.latency_iterations_per_frame = get_int(l, "iterations_per_frame", "frame_latency");
            }
            if (l.contains("moves")) cfg.latency_moves = get_int(l, "moves", "frame_latency");
            if (cfg.latency_resolution < 2 || cfg.latency_iterations_per_frame < 1 || cfg.latency_moves < 1) {
                throw Error(ErrorCode::InvalidParam,
                    "'frame_latency' needs resolution >= 2, iterations_per_frame >= 1 and moves >= 1");
            }
        }
    }
    return cfg;
}

BenchConfig read_bench_config(const fs::path& file)
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
    return parse_bench_config(value);
}

json machine_descriptor()
{
    char host[256] = {};
    ::gethostname(host, sizeof host - 1);
    utsname u{};
    ::uname(&u);
    return {
        {"hostname", host},
        {"os", std::string(u.sysname) + " " + u.release},
        {"arch", u.machine},
        {"cpu", cpu_model()},
        {"logical_cores", std::thread::hardware_concurrency()},
        {"compiler", __VERSION__},
        {"build_type", SARAP_BUILD_TYPE},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"cholmod_available", cholmod_available()},
    };
}

json run_bench(const BenchConfig& cfg)
{
    json report = {
        {"machine", machine_descriptor()},
        {"runs", cfg.runs},
        {"statistic", "median"},
        {"params", deform_params_to_json(cfg.params)},
        {"convergence", json::array()},
    };
    for (const BenchMesh& m : cfg.meshes) {
        for (double lambda : cfg.lambdas) {
            report["convergence"].push_back(convergence_row(cfg, m, lambda));
        }
    }
    if (cfg.handle_add_resolution > 0) report["handle_add"] = handle_add(cfg);
    if (cfg.latency_resolution > 0) report["frame_latency"] = frame_latency(cfg);
    return report;
}

void write_bench_csv(const fs::path& path, const json& report)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    }
    out.precision(9);
    out << "section,mesh,method,vertices,faces,lambda,iterations,converged,factorization_s,init_s,solve_s,"
           "per_iteration_s,handle_add_s,latency_s\n";
    for (const json& r : report.at("convergence")) {
        out << "convergence," << r["mesh"].get<std::string>() << ',' << r["method"].get<std::string>() << ','
            << r["vertices"] << ',' << r["faces"] << ',' << r["lambda"].get<double>() << ',' << r["iterations"] << ','
            << (r["converged"].get<bool>() ? 1 : 0) << ',' << r["factorization_s"].get<double>() << ','
            << r["init_s"].get<double>() << ',' << r["solve_s"].get<double>() << ','
            << r["per_iteration_s"].get<double>() << ",,\n";
    }
    if (report.contains("handle_add")) {
        const json& h = report["handle_add"];
        const auto prefix = [&](const char* method) {
            out << "handle_add," << h["mesh"].get<std::string>() << ',' << method << ',' << h["vertices"] << ','
                << h["faces"] << ',' << h["lambda"].get<double>() << ",,,";
        };
        prefix("refactorize");
        out << h["factorization_s"].get<double>() << ",,,," << h["refactorize_s"].get<double>() << ",\n";
        prefix("substitution");
        out << ",,,," << h["substitution_s"].get<double>() << ",\n";
        prefix("kkt_updating");
        out << ",,,," << h["update_s"].get<double>() << ",\n";
    }
    if (report.contains("frame_latency")) {
        const json& l = report["frame_latency"];
        out << "frame_latency," << l["mesh"].get<std::string>() << ",kkt_updating," << l["vertices"] << ",,,"
            << l["iterations_per_frame"] << ",,,,,,," << l["median_s"].get<double>() << '\n';
    }
}

} // namespace sarap::app
