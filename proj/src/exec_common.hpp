#pragma once

#include <functional>

#include "kernel_program.hpp"
#include "stencilc/executor.hpp"

namespace stencilc::detail {

/// One `st.map` invocation, ready to execute.
struct MapContext {
    const KernelDecl *kernel = nullptr;
    const KernelProgram *prog = nullptr;
    std::vector<double *> data; // per kernel parameter, flat padded values
    const GridBuffer *layout = nullptr;
    MapBounds bounds;
    std::vector<Region> regions;
};

using MapRunner = std::function<void(const MapContext &)>;

/// Walks the target's statements, resolving names, bounds and regions, and
/// hands every map to `run`.
GridSet interpret(const SourceUnit &unit, GridSet grids, const ExecOptions &opts,
                  Decomposition decomposition, ExecStats *stats, const MapRunner &run);

template <typename F> void for_each_point(int dims, const Index &lo, const Index &hi, F &&f) {
    Index p{0, 0, 0};
    Index l = lo, h = hi;
    for (int d = dims; d < kMaxDims; ++d) {
        l[static_cast<std::size_t>(d)] = 0;
        h[static_cast<std::size_t>(d)] = 1;
    }
    for (p[0] = l[0]; p[0] < h[0]; ++p[0])
        for (p[1] = l[1]; p[1] < h[1]; ++p[1])
            for (p[2] = l[2]; p[2] < h[2]; ++p[2])
                f(p);
}

/// Conventional update of one point reading straight from the grids.
template <typename T> inline void apply_point(const MapContext &c, std::int64_t f) {
    for (const UpdateProgram &u : c.prog->updates) {
        T v = eval_update<T>(u, [&](const KOp &op) {
            return static_cast<T>(c.data[static_cast<std::size_t>(op.slot)][f + op.delta]);
        });
        c.data[static_cast<std::size_t>(u.dest_slot)][f] = static_cast<double>(v);
    }
}

/// Conventional update of every point of a box, lexicographic order.
void apply_box(const MapContext &c, const Index &lo, const Index &hi);

// ---- Semi-stencil ----------------------------------------------------------

struct SemiTerm {
    int slot = 0;
    std::int64_t delta = 0;
    double coef = 0;
};

struct SemiUpdate {
    int dest_slot = 0;
    std::vector<SemiTerm> forward;  // negative offsets
    std::vector<SemiTerm> backward; // centre and positive offsets
    double constant = 0;
};

struct SemiProgram {
    std::vector<SemiUpdate> updates;
};

/// Throws CompileError for non-star or nonlinear kernels.
SemiProgram compile_semi(const MapContext &c);

/// Forward then backward pass over one box.
void semi_box(const MapContext &c, const SemiProgram &s, const Index &lo, const Index &hi);

} // namespace stencilc::detail
