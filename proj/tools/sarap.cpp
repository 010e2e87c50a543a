#include <sarap/app/commands.hpp>
#include <sarap/app/server.hpp>
#include <sarap/error.hpp>
#include <sarap/scenarios.hpp>

#include <CLI11.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

namespace fs = std::filesystem;
using sarap::app::json;

// 0 success, 1 failure while running, 2 invalid input (malformed or rejected config)
constexpr int kExitFailure = 1;
constexpr int kExitBadInput = 2;

int report_error(const sarap::Error& e, int code)
{
    std::cerr << json{{"error", {{"code", sarap::to_string(e.code())}, {"message", e.what()}}}}.dump() << std::endl;
    return code;
}

int report_error(const std::exception& e)
{
    std::cerr << json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump() << std::endl;
    return kExitFailure;
}

/// Runs `load` then `run`; errors while loading map to exit code 2.
template <class Load, class Run>
int guarded(Load&& load, Run&& run)
{
    try {
        auto input = load();
        try {
            return run(input);
        } catch (const sarap::Error& e) {
            return report_error(e, kExitFailure);
        }
    } catch (const sarap::Error& e) {
        return report_error(e, kExitBadInput);
    } catch (const std::exception& e) {
        return report_error(e);
    }
}

void configure_logging()
{
    auto logger = spdlog::stderr_color_mt("sarap");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* level = std::getenv("SARAP_LOG_LEVEL")) {
        spdlog::cfg::helpers::load_levels(level);
    }
}

sarap::app::SessionServer* g_server = nullptr;
std::atomic<bool> g_stop{false};

extern "C" void on_signal(int)
{
    g_stop = true;
    if (g_server) {
        g_server->stop();
    }
}

} // namespace

int main(int argc, char** argv)
{
    configure_logging();

    CLI::App app{"Smooth as-rigid-as-possible surface deformation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "sarap 0.1.0");

    fs::path deform_config;
    auto* deform = app.add_subcommand("deform", "Deform a mesh as described by a JSON job config");
    deform->add_option("--config", deform_config, "Job config (JSON)")->required();

    fs::path bench_config;
    fs::path bench_out;
    auto* bench = app.add_subcommand("bench", "Time factorization, handle insertion and convergence");
    bench->add_option("--config", bench_config, "Bench config (JSON); defaults apply to omitted fields");
    bench->add_option("--out", bench_out, "Report path; both <stem>.json and <stem>.csv are written")->required();

    sarap::app::TraceOptions trace_opts;
    fs::path trace_out;
    auto* trace = app.add_subcommand("trace", "Per-iteration energies for edge-only and full rotation fitting");
    trace->add_option("--preset", trace_opts.preset, "Scenario preset")->capture_default_str();
    trace->add_option("--out", trace_out, "Output directory")->required();
    trace->add_option("--resolution", trace_opts.resolution, "Mesh resolution (0: preset default)");
    trace->add_option("--lambda", trace_opts.lambda, "Smoothness lambda")->capture_default_str();
    trace->add_option("--tolerance", trace_opts.tolerance, "Convergence tolerance")->capture_default_str();
    trace->add_option("--max-iterations", trace_opts.max_iterations, "Iteration cap")->capture_default_str();
    trace->add_flag("--no-stop", trace_opts.no_stop, "Run all iterations even after convergence");

    sarap::app::ServerOptions server_opts;
    bool use_stdio = false;
    auto* serve = app.add_subcommand("serve", "Interactive editing session over TCP (NDJSON or WebSocket)");
    auto* port_opt = serve->add_option("--port", server_opts.port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", server_opts.host, "Bind address")->capture_default_str();
    serve->add_option("--max-iter-per-frame", server_opts.session.max_iter_per_frame, "Iterations per Frame")
        ->capture_default_str()
        ->check(CLI::Range(1, 1000));
    serve->add_flag("--stdio", use_stdio, "Serve one session on stdin/stdout instead of TCP")->excludes(port_opt);

    CLI11_PARSE(app, argc, argv);

    if (deform->parsed()) {
        return guarded([&] { return sarap::app::read_job_config(deform_config); },
            [&](const sarap::app::JobConfig& cfg) {
                const auto outcome = sarap::app::run_job(cfg);
                std::cout << outcome.report.dump(2) << std::endl;
                return 0;
            });
    }
    if (bench->parsed()) {
        return guarded(
            [&] { return bench_config.empty() ? sarap::app::parse_bench_config(json::object())
                                              : sarap::app::read_bench_config(bench_config); },
            [&](const sarap::app::BenchConfig& cfg) {
                const json report = sarap::app::run_bench(cfg);
                fs::path json_path = bench_out;
                json_path.replace_extension(".json");
                fs::path csv_path = bench_out;
                csv_path.replace_extension(".csv");
                if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
                std::ofstream(json_path) << report.dump(2) << '\n';
                sarap::app::write_bench_csv(csv_path, report);
                std::cout << json{{"json", json_path.string()}, {"csv", csv_path.string()}}.dump() << std::endl;
                return 0;
            });
    }
    if (trace->parsed()) {
        return guarded(
            [&] {
                sarap::make_scenario(trace_opts.preset, 2);
                if (trace_opts.max_iterations < 1 || !(trace_opts.tolerance > 0.0) ||
                    !(trace_opts.lambda >= 0.0 && trace_opts.lambda < 1.0)) {
                    throw sarap::Error(sarap::ErrorCode::InvalidParam,
                        "need max-iterations >= 1, tolerance > 0 and lambda in [0, 1)");
                }
                fs::create_directories(trace_out);
                return trace_opts;
            },
            [&](const sarap::app::TraceOptions& opts) {
                const auto runs = sarap::app::run_trace(opts, trace_out);
                std::cout << sarap::app::trace_summary(opts, runs).dump(2) << std::endl;
                return 0;
            });
    }
    if (serve->parsed()) {
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        if (use_stdio) {
            return guarded([&] { return server_opts.session; },
                [&](const sarap::app::SessionOptions& opts) {
                    sarap::app::serve_stream(0, 1, opts, &g_stop);
                    return 0;
                });
        }
        return guarded([&] { return std::make_unique<sarap::app::SessionServer>(server_opts); },
            [&](std::unique_ptr<sarap::app::SessionServer>& server) {
                g_server = server.get();
                std::cout << json{{"listening", server_opts.host}, {"port", server->port()}}.dump() << std::endl;
                server->run();
                g_server = nullptr;
                return 0;
            });
    }
    return 0;
}
