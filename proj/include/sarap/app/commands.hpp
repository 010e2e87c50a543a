#pragma once

#include <sarap/app/config.hpp>
#include <sarap/deformer.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace sarap::app {

struct JobOutcome
{
    Job job;
    DeformResult result;
    EnergyBreakdown energy;
    json report;
};

/// Runs a prepared job and writes the configured outputs.
/// The report holds iterations, convergence and final energies and is deterministic.
JobOutcome run_job(const JobConfig& config);

/// iteration,energy,arap,smooth,change
void write_trace_csv(const std::filesystem::path& path, const std::vector<IterationRecord>& trace);

struct TraceOptions
{
    std::string preset = "spiky_plane";
    int resolution = 0;
    double lambda = 0.95;
    double tolerance = 1e-4;
    int max_iterations = 2000;
    /// Run all max_iterations even after convergence.
    bool no_stop = false;
};

struct TraceRun
{
    RotationFit fit = RotationFit::EdgeOnly;
    std::filesystem::path file;
    DeformResult result;
};

/// Runs the preset with edge-only and full rotation fitting and writes
/// trace_edge_only.csv and trace_full.csv into `out_dir`.
std::vector<TraceRun> run_trace(const TraceOptions& options, const std::filesystem::path& out_dir);
json trace_summary(const TraceOptions& options, const std::vector<TraceRun>& runs);

struct BenchMesh
{
    std::string scenario;
    int resolution = 0;
};

struct BenchConfig
{
    int runs = 5;
    std::vector<BenchMesh> meshes{{"bumpy_plane", 0}, {"bumpy_cylinder", 0}, {"bar", 0}};
    std::vector<double> lambdas{0.0, 0.95};
    DeformParams params;
    bool init_given = false;
    /// Handle-add comparison on a large bumpy plane; resolution 0 skips it.
    int handle_add_resolution = 317;
    int handle_add_base_handles = 2;
    /// Session MoveHandle round trip on a bumpy plane; resolution 0 skips it.
    int latency_resolution = 201;
    int latency_iterations_per_frame = 1;
    int latency_moves = 10;
};

/// Throws InvalidParam. At least 5 runs are required.
BenchConfig parse_bench_config(const json& value);
BenchConfig read_bench_config(const std::filesystem::path& file);

json machine_descriptor();
json run_bench(const BenchConfig& config);
/// Flat table with one row per measurement.
void write_bench_csv(const std::filesystem::path& path, const json& report);

} // namespace sarap::app
