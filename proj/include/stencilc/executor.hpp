#pragma once

// Reference execution of targets plus software emulations of the OpenMP,
// Semi-stencil and GPU tile/streaming plans.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stencilc/frontend.hpp"
#include "stencilc/grid.hpp"
#include "stencilc/planning.hpp"

namespace stencilc {

/// Grids by top-level name. Swaps inside a target only rebind the target's
/// local names, so the buffer under a top-level name is whatever that grid
/// holds at the end.
using GridSet = std::map<std::string, GridBuffer>;

GridSet make_grids(const SourceUnit &unit);
/// Every grid filled log-uniform in [1e-4, 1e5]; grid `n` (declaration
/// order) uses seed + n.
GridSet random_grids(const SourceUnit &unit, std::uint64_t seed);

struct ExecOptions {
    std::string target; // launched target when empty
    std::map<std::string, std::int64_t> bindings;
    Decomposition decomposition = Decomposition::cross_product;
    /// run_target only: split each region's outer loop across OpenMP threads.
    bool parallel = false;
};

struct ExecStats {
    std::int64_t maps = 0;
    std::int64_t points = 0;
    std::int64_t nonfinite = 0; // non-finite values written
    std::vector<Diagnostic> warnings;
};

/// Sequential reference: regions in decomposition order, points
/// lexicographically, each point's expression in parse order.
GridSet run_target(const SourceUnit &unit, GridSet grids, const ExecOptions &opts = {},
                   ExecStats *stats = nullptr);

/// Forward pass gathers the negative-offset terms into a partial array,
/// backward pass adds the centre and positive-offset terms. Star-shaped,
/// linear kernels only.
GridSet run_semi(const SourceUnit &unit, GridSet grids, const ExecOptions &opts = {},
                 ExecStats *stats = nullptr);

/// Executes the plan's loop structure with OpenMP (loops, blocks, tasks or
/// taskloop). Conventional plans reproduce run_target bit-exactly; semi plans
/// reproduce run_semi bit-exactly.
GridSet run_omp_plan(const SourceUnit &unit, const OmpPlan &plan, GridSet grids,
                     const ExecOptions &opts = {}, ExecStats *stats = nullptr);

/// Emulates the GPU template's abstract machine: thread blocks, scratch tiles,
/// 4-wide lanes, and plane streaming with shift or unrolled rotation.
GridSet run_tile_plan(const SourceUnit &unit, const GpuPlan &plan, GridSet grids,
                      const ExecOptions &opts = {}, ExecStats *stats = nullptr);

struct ProfileReport {
    double frontend = 0;
    double codegen = 0;
    double execution = 0;

    std::string str() const;
};

} // namespace stencilc
