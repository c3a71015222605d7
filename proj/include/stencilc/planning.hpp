#pragma once

// Mid-level plans: symbol table, blocking strategy, and the resolved OpenMP
// and GPU template configurations consumed by the generators and executors.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stencilc/analysis.hpp"

namespace stencilc {

enum class SymbolKind { grid, scalar, temp };

struct SymbolEntry {
    SymbolKind kind = SymbolKind::grid;
    bool is_update_dest = false;
    bool is_top_level = false;
};

struct SymbolTable {
    std::map<std::string, SymbolEntry> entries;

    const SymbolEntry *find(const std::string &name) const;
    std::string str() const;
};

// blocking_1d covers 1D kernels, which have no blocking/streaming split.
enum class BlockingKind { blocking_1d, blocking_2d, blocking_3d, streaming_1_5d, streaming_2_5d };
std::string_view blocking_name(BlockingKind k);

struct BlockingPlan {
    BlockingKind kind = BlockingKind::blocking_2d;
    int stream_dim = -1; // 0 when streaming
};

struct MirResult {
    SymbolTable symbols;
    BlockingPlan blocking;
};

/// `template_name` is the launch template (gmem when empty). `unit` marks
/// kernel parameters that name top-level grids.
MirResult build_mir(const StencilInfo &info, const KernelDecl &k,
                    std::string_view template_name = {}, const SourceUnit *unit = nullptr);

using BackendParams = std::vector<std::pair<std::string, LaunchValue>>;

// ---- GPU -------------------------------------------------------------------

enum class GpuTemplate { gmem, smem, f4, shift, unroll, semi };
std::string_view gpu_template_name(GpuTemplate t);
std::optional<GpuTemplate> gpu_template_from_name(std::string_view s);
bool is_streaming(GpuTemplate t);

enum class MemType { registers, shared, automatic };
std::string_view mem_type_name(MemType m);

struct GpuPlan {
    GpuTemplate tmpl = GpuTemplate::gmem;
    /// threadsPerBlock (Dx, Dy, Dz); Dx runs along the contiguous dimension.
    std::array<int, 3> block{16, 8, 8};
    /// 2.5D plane (Dx, Dy); Dx runs along the contiguous dimension.
    std::array<int, 2> plane{32, 32};
    MemType mem_type = MemType::registers; // never automatic once resolved
    bool prefetch = false;
    bool async_memcpy = false;
    std::string compute_capability = "8.0";
    bool padding = false; // accepted, has no effect
    Decomposition decomposition = Decomposition::cross_product;
    BlockingPlan blocking;
    std::vector<Diagnostic> warnings;

    std::string str() const;
};

inline constexpr double kAsyncMemcpyMinCapability = 8.0;

/// `innermost_extent`, when known, is checked against the f4 width.
GpuPlan plan_gpu(const StencilInfo &info, const BackendParams &params,
                 std::optional<std::int64_t> innermost_extent = std::nullopt);

// ---- OpenMP ----------------------------------------------------------------

enum class OmpTemplate { loop, loop_blocking, loop_blocking_collapse, tasks_blocking, taskloop };
std::string_view omp_template_name(OmpTemplate t);
std::optional<OmpTemplate> omp_template_from_name(std::string_view s);
bool uses_blocking(OmpTemplate t);

enum class OmpAlgorithm { conventional, semi };
std::string_view omp_algorithm_name(OmpAlgorithm a);

struct OmpPlan {
    OmpTemplate tmpl = OmpTemplate::loop;
    OmpAlgorithm algorithm = OmpAlgorithm::conventional;
    /// (bx, by) over the two outermost dimensions; set iff the template blocks.
    std::optional<std::array<int, 2>> block;
    Decomposition decomposition = Decomposition::cross_product;
    BlockingPlan blocking;
    std::vector<Diagnostic> warnings;

    std::string str() const;
};

OmpPlan plan_omp(const StencilInfo &info, const BackendParams &params);

// ---- block enumeration -----------------------------------------------------

struct Block {
    std::array<std::int64_t, kMaxDims> lo{};
    std::array<std::int64_t, kMaxDims> hi{};
};

/// Tile extent per grid dimension; 0 means the whole region extent.
using TileShape = std::array<std::int64_t, kMaxDims>;

TileShape tile_shape(const GpuPlan &plan, int dims);
TileShape tile_shape(const OmpPlan &plan, int dims);

/// Row-major enumeration of the tiles covering `r`; edge tiles are clamped to
/// the region.
std::vector<Block> enumerate_blocks(const Region &r, const TileShape &tile);

/// Decomposition requested through the `decomposition` parameter, if any.
Decomposition decomposition_param(const BackendParams &params, int dims);

} // namespace stencilc
