#pragma once

// High-level analysis: stencil shape, map desugaring and region decomposition.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stencilc/ast.hpp"

namespace stencilc {

enum class StencilShape { star, box, other };
std::string_view shape_name(StencilShape s);

struct StencilInfo {
    int dims = 0;
    int radius = 0;
    StencilShape shape = StencilShape::other;
    /// Read offsets keyed by kernel parameter name.
    std::map<std::string, std::set<OffsetVector>> offsets;
    int flops_per_point = 0;

    std::set<OffsetVector> all_offsets() const;
};

/// Kernel must already be validated (all temporaries resolvable).
StencilInfo analyze_kernel(const KernelDecl &k);

StencilShape classify_shape(const std::set<OffsetVector> &offsets, int dims);

/// Per-dimension boundaries (a0, a1, a2, a3) of a map; intervals are
/// [a0,a1) [a1,a2) [a2,a3). Bounds may still be symbolic.
struct MapSpec {
    int dims = 0;
    std::array<std::array<Affine, 4>, kMaxDims> bounds;
};

/// Rewrites any shorthand `st.map(...)` form into explicit 4-tuples. `dims` is
/// the dimensionality of the mapped kernel; `g.shape` expands to
/// `g.shape[0] ... g.shape[dims-1]`. Throws CompileError on malformed forms.
MapSpec desugar_map(const MapSpecRaw &raw, int dims);

struct MapBounds {
    int dims = 0;
    std::array<std::array<std::int64_t, 4>, kMaxDims> b{};

    std::int64_t lo(int d) const { return b[static_cast<std::size_t>(d)][0]; }
    std::int64_t hi(int d) const { return b[static_cast<std::size_t>(d)][3]; }
    std::int64_t domain_size() const;
};

using SymbolLookup = std::function<std::optional<std::int64_t>(const std::string &)>;

/// Binds symbols. When an inner interval would be negative (edge width larger
/// than half the extent) the middle bounds are clamped so the intervals still
/// tile [a0, a3), and a warning is appended to `warnings`.
MapBounds concretize(const MapSpec &spec, const SymbolLookup &lookup, SourcePos pos,
                     std::vector<Diagnostic> *warnings = nullptr);

enum class Decomposition { unified, cross_product, slab7 };
std::string_view decomposition_name(Decomposition d);
std::optional<Decomposition> decomposition_from_name(std::string_view s);

struct Region {
    int dims = 0;
    std::array<std::int64_t, kMaxDims> lo{};
    std::array<std::int64_t, kMaxDims> hi{};
    bool inner = false;
    /// Per-dimension position: '0' low edge, '1' middle, '2' high edge, '*'
    /// full span. Empty for a unified region.
    std::string code;

    std::int64_t size() const;
    bool contains(const std::array<std::int64_t, kMaxDims> &p) const;
    std::string str() const;
};

/// Inner region first, then boundary regions ordered by position code.
/// Empty regions are dropped. slab7 requires a 3D map.
std::vector<Region> decompose_regions(const MapBounds &bounds, Decomposition scheme);

struct LoopNest {
    int dims = 0;
    std::array<std::int64_t, kMaxDims> begin{};
    std::array<std::int64_t, kMaxDims> end{};
    std::array<std::int64_t, kMaxDims> stride{1, 1, 1};

    static LoopNest from_region(const Region &r);
    std::int64_t iteration_count() const;
};

/// Affine-in-reads view of an expression: `constant + sum(coef * read)`.
/// Coefficients are folded in the element type's arithmetic; repeated reads of
/// one offset are merged in first-appearance order.
struct LinearTerm {
    std::string grid;
    OffsetVector offset;
    double coef = 0;
};

struct LinearForm {
    double constant = 0;
    std::vector<LinearTerm> terms;
};

/// nullopt when the expression multiplies or divides two reads.
std::optional<LinearForm> linearize(const Expr &e, DType dtype);

/// Parses a numeric literal in the given element type.
double literal_value(const std::string &text, DType dtype);

} // namespace stencilc
