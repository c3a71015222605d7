#pragma once

// Glue between the launch configuration, command-line overrides, the
// generators and the executors.

#include <map>
#include <optional>
#include <string>

#include "stencilc/codegen.hpp"
#include "stencilc/dataflow.hpp"
#include "stencilc/executor.hpp"

namespace stencilc {

struct Request {
    BackendKind backend = BackendKind::seq;
    /// Launch parameters of the same backend, then overrides, last key wins.
    BackendParams params;
    std::string target;
    std::map<std::string, std::int64_t> bindings;
};

/// Backend of the file's launch, or seq. Launch parameters are kept only when
/// the backend matches.
Request default_request(const SourceUnit &unit, std::optional<BackendKind> backend = {});

/// Replaces or appends a parameter.
void set_param(BackendParams &params, const std::string &key, LaunchValue v);

struct Compiled {
    GeneratedArtifact artifact;
    std::string plan;                       // plan dump, empty for seq
    std::optional<DataflowProgram> dataflow;
};

Compiled compile_request(const SourceUnit &unit, const Request &req);

/// Executes with the backend's software model: run_target for seq,
/// run_omp_plan, run_tile_plan, or the dataflow simulator.
GridSet execute_request(const SourceUnit &unit, const Request &req, GridSet grids,
                        ExecStats *stats = nullptr);

} // namespace stencilc
