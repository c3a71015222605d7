#pragma once

// Text dumps of the analysis results, used by `stencilc inspect` and
// --save-temps. Output is deterministic.

#include <map>
#include <string>

#include "stencilc/analysis.hpp"
#include "stencilc/frontend.hpp"

namespace stencilc {

struct InspectOptions {
    std::string target; // launched target when empty
    std::map<std::string, std::int64_t> bindings;
    Decomposition decomposition = Decomposition::cross_product;
};

/// StencilInfo and symbol table of every kernel.
std::string describe_kernels(const SourceUnit &unit);

/// Every map of the target with its desugared bounds and regions. Maps whose
/// bounds cannot be bound are listed with their symbolic bounds only.
std::string describe_target(const SourceUnit &unit, const InspectOptions &opts = {});

/// The kernel of the first map in the target; throws CompileError if the
/// target has no map.
const KernelDecl &primary_kernel(const SourceUnit &unit, const std::string &target = {});

} // namespace stencilc
