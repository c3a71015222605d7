#pragma once

// Postfix form of a kernel's updates, evaluated per point by every execution
// strategy. Keeping one evaluator is what makes the plan emulations
// bit-identical to the serial executor: only where values are loaded from
// changes, never the arithmetic.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stencilc/analysis.hpp"
#include "stencilc/grid.hpp"

namespace stencilc::detail {

struct KOp {
    enum Code : std::uint8_t { konst, read, neg, add, sub, mul, div };
    Code code = konst;
    int slot = 0; // read: kernel parameter index
    OffsetVector offset;
    std::int64_t delta = 0; // read: flat displacement, filled by bind_layout
    double value = 0;       // konst: literal rounded to the element type
};

struct UpdateProgram {
    int dest_slot = 0;
    std::vector<KOp> ops;
    int max_stack = 0;
};

struct KernelProgram {
    std::string name;
    int dims = 0;
    int radius = 0;
    DType dtype = DType::f32;
    std::vector<std::string> params;
    std::vector<UpdateProgram> updates;
    std::vector<bool> is_read; // per slot
    StencilInfo info;
};

inline constexpr int kMaxStack = 128;

KernelProgram compile_kernel(const KernelDecl &k, DType dtype);

/// Fills KOp::delta for a grid layout.
void bind_layout(KernelProgram &p, const GridBuffer &layout);

template <typename V, typename Load> V eval_update(const UpdateProgram &u, Load &&load) {
    V stack[kMaxStack];
    int sp = 0;
    for (const KOp &op : u.ops) {
        switch (op.code) {
        case KOp::konst: stack[sp++] = V(op.value); break;
        case KOp::read: stack[sp++] = load(op); break;
        case KOp::neg: stack[sp - 1] = -stack[sp - 1]; break;
        case KOp::add:
            --sp;
            stack[sp - 1] = stack[sp - 1] + stack[sp];
            break;
        case KOp::sub:
            --sp;
            stack[sp - 1] = stack[sp - 1] - stack[sp];
            break;
        case KOp::mul:
            --sp;
            stack[sp - 1] = stack[sp - 1] * stack[sp];
            break;
        case KOp::div:
            --sp;
            stack[sp - 1] = stack[sp - 1] / stack[sp];
            break;
        }
    }
    return stack[0];
}

} // namespace stencilc::detail
