#pragma once

// Source emitters: serial C, OpenMP C, GPU kernel source, and the neutral
// dataflow program format read by the simulator.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stencilc/dataflow.hpp"
#include "stencilc/grid.hpp"
#include "stencilc/planning.hpp"

namespace stencilc {

struct GeneratedFile {
    std::string path; // relative
    std::string text; // always ends with a newline
};

struct GeneratedArtifact {
    std::vector<GeneratedFile> files;
    std::string entry; // C symbol of the target function, or the program file
    BackendKind backend = BackendKind::seq;
    std::string fingerprint; // 16 hex digits over source, plan and options

    const GeneratedFile *find(std::string_view path) const;
    /// Every file preceded by a `// ---- <path>` banner, for --print-code.
    std::string joined() const;
};

/// Flattening used by every emitter: row-major, last dimension contiguous,
/// halo of width `order` on all sides, `lead_padding` elements before the
/// first one.
struct IndexScheme {
    std::vector<std::int64_t> extents;
    int order = 0;
    std::int64_t lead_padding = 0;

    static IndexScheme of(const GridDecl &g);
    std::int64_t stride(int d) const;
    std::int64_t padded_size() const;
    std::int64_t flat(const Index &i) const;
    /// C expression for the flat position of `vars`, e.g. `(i0 + 2) * 20 + (i1 + 2)`.
    std::string c_flat(const std::vector<std::string> &vars) const;
};

struct CodegenOptions {
    std::string target; // launched target when empty
    /// Integer parameter values; map bounds are specialised to them.
    std::map<std::string, std::int64_t> bindings;
    Decomposition decomposition = Decomposition::cross_product;
};

GeneratedArtifact gen_serial(const SourceUnit &unit, const CodegenOptions &opts = {});
GeneratedArtifact gen_openmp(const SourceUnit &unit, const OmpPlan &plan,
                             const CodegenOptions &opts = {});
GeneratedArtifact gen_gpu(const SourceUnit &unit, const GpuPlan &plan,
                          const CodegenOptions &opts = {});

/// `layout.df` and `program.df`.
GeneratedArtifact gen_dataflow_program(const DataflowProgram &p);

/// A C `main` for a serial or OpenMP artifact:
///   driver <in grid>... <out grid>...
/// one STGRID01 file per top-level grid in declaration order. Integer
/// parameters take their values from `opts.bindings` and the launch.
std::string gen_driver(const SourceUnit &unit, const GeneratedArtifact &artifact,
                       const CodegenOptions &opts = {});

} // namespace stencilc
