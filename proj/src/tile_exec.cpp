// Software emulation of the GPU templates. Each template moves data the way
// its generated kernel would (scratch tiles, 4-wide lanes, plane windows) but
// evaluates every point with the shared postfix evaluator.

#include <algorithm>

#include "exec_common.hpp"

namespace stencilc {

using namespace detail;

namespace {

// ---- smem ------------------------------------------------------------------

template <typename T> void smem_block(const MapContext &c, const Block &b) {
    const KernelProgram &prog = *c.prog;
    const int dims = prog.dims;
    const int r = prog.radius;
    const GridBuffer &L = *c.layout;

    // scratch tile = block + halo, row-major
    Index ext{1, 1, 1}, stride{0, 0, 0};
    std::int64_t size = 1;
    for (int d = dims - 1; d >= 0; --d) {
        auto i = static_cast<std::size_t>(d);
        ext[i] = b.hi[i] - b.lo[i] + 2 * r;
        stride[i] = size;
        size *= ext[i];
    }
    auto local = [&](const Index &p) {
        std::int64_t f = 0;
        for (int d = 0; d < dims; ++d)
            f += (p[static_cast<std::size_t>(d)] - b.lo[static_cast<std::size_t>(d)] + r) *
                 stride[static_cast<std::size_t>(d)];
        return f;
    };

    // cooperative load of every read grid, then barrier
    std::vector<std::vector<T>> scratch(prog.params.size());
    for (std::size_t s = 0; s < prog.params.size(); ++s) {
        if (!prog.is_read[s])
            continue;
        scratch[s].resize(static_cast<std::size_t>(size));
        Index lo = b.lo, hi = b.hi;
        for (int d = 0; d < dims; ++d) {
            lo[static_cast<std::size_t>(d)] -= r;
            hi[static_cast<std::size_t>(d)] += r;
        }
        for_each_point(dims, lo, hi, [&](const Index &p) {
            scratch[s][static_cast<std::size_t>(local(p))] = static_cast<T>(c.data[s][L.flat(p)]);
        });
    }
    // barrier

    std::vector<std::vector<std::int64_t>> ldelta(prog.updates.size());
    for (std::size_t u = 0; u < prog.updates.size(); ++u)
        for (const KOp &op : prog.updates[u].ops) {
            std::int64_t d = 0;
            if (op.code == KOp::read)
                for (int k = 0; k < dims; ++k)
                    d += op.offset[k] * stride[static_cast<std::size_t>(k)];
            ldelta[u].push_back(d);
        }

    for_each_point(dims, b.lo, b.hi, [&](const Index &p) {
        const std::int64_t lf = local(p);
        const std::int64_t gf = L.flat(p);
        for (std::size_t u = 0; u < prog.updates.size(); ++u) {
            const UpdateProgram &up = prog.updates[u];
            const KOp *base = up.ops.data();
            T v = eval_update<T>(up, [&](const KOp &op) {
                auto k = static_cast<std::size_t>(&op - base);
                return scratch[static_cast<std::size_t>(op.slot)]
                              [static_cast<std::size_t>(lf + ldelta[u][k])];
            });
            c.data[static_cast<std::size_t>(up.dest_slot)][gf] = static_cast<double>(v);
        }
    });
}

// ---- f4 --------------------------------------------------------------------

template <typename T> struct Lanes {
    T v[4];
    Lanes() = default;
    explicit Lanes(double c) {
        for (auto &x : v)
            x = static_cast<T>(c);
    }
    friend Lanes operator-(const Lanes &a) {
        Lanes r;
        for (int i = 0; i < 4; ++i)
            r.v[i] = -a.v[i];
        return r;
    }
#define STENCILC_LANE_OP(op)                                                                       \
    friend Lanes operator op(const Lanes &a, const Lanes &b) {                                     \
        Lanes r;                                                                                   \
        for (int i = 0; i < 4; ++i)                                                                \
            r.v[i] = a.v[i] op b.v[i];                                                             \
        return r;                                                                                  \
    }
    STENCILC_LANE_OP(+)
    STENCILC_LANE_OP(-)
    STENCILC_LANE_OP(*)
    STENCILC_LANE_OP(/)
#undef STENCILC_LANE_OP
};

template <typename T> void f4_block(const MapContext &c, const Block &b) {
    const int dims = c.prog->dims;
    const auto last = static_cast<std::size_t>(dims - 1);
    const GridBuffer &L = *c.layout;
    Index lo = b.lo, hi = b.hi;
    hi[last] = lo[last] + 1; // iterate over vector groups along the last dim separately
    for_each_point(dims, lo, hi, [&](const Index &row) {
        for (std::int64_t x = b.lo[last]; x < b.hi[last]; x += 4) {
            Index p = row;
            p[last] = x;
            const std::int64_t f = L.flat(p);
            const int lanes = static_cast<int>(std::min<std::int64_t>(4, b.hi[last] - x));
            for (const UpdateProgram &u : c.prog->updates) {
                Lanes<T> v = eval_update<Lanes<T>>(u, [&](const KOp &op) {
                    Lanes<T> in(0.0);
                    const double *src = c.data[static_cast<std::size_t>(op.slot)];
                    for (int i = 0; i < lanes; ++i) // masked tail lanes stay zero
                        in.v[i] = static_cast<T>(src[f + op.delta + i]);
                    return in;
                });
                double *dst = c.data[static_cast<std::size_t>(u.dest_slot)];
                for (int i = 0; i < lanes; ++i)
                    dst[f + i] = static_cast<double>(v.v[i]);
            }
        }
    });
}

// ---- 2.5D / 1.5D streaming -------------------------------------------------

/// Window of 2r+1 planes along the stream dimension. `shift` rotates plane
/// contents each step; otherwise planes stay put and are addressed modulo the
/// window length (the unrolled form).
template <typename T> class PlaneWindow {
public:
    PlaneWindow(int radius, std::int64_t plane_size, bool shift, std::int64_t z0)
        : r_(radius), w_(2 * radius + 1), size_(plane_size), shift_(shift), z0_(z0),
          data_(static_cast<std::size_t>(w_ * plane_size)) {}

    /// Storage for stream index z, valid for z in [cur-r, cur+r].
    T *plane(std::int64_t z) { return data_.data() + slot(z) * size_; }

    /// Moves the window centre to `z`; returns where plane z+r must be loaded.
    T *advance(std::int64_t z) {
        cur_ = z;
        if (shift_ && z > z0_) {
            // planes k+1 -> k; the oldest falls off the front
            std::copy(data_.begin() + size_, data_.end(), data_.begin());
        }
        return plane(z + r_);
    }

    /// Storage for the planes preceding the first step.
    T *preload(std::int64_t z) {
        cur_ = z0_;
        return plane(z);
    }

private:
    std::int64_t slot(std::int64_t z) const {
        if (shift_)
            return z - cur_ + r_;
        std::int64_t s = (z - z0_ + r_) % w_;
        return s < 0 ? s + w_ : s;
    }

    std::int64_t r_, w_, size_;
    bool shift_;
    std::int64_t z0_;
    std::int64_t cur_ = 0;
    std::vector<T> data_;
};

template <typename T> class Streamer {
public:
    Streamer(const MapContext &c, const GpuPlan &plan, const Block &b)
        : c_(c), plan_(plan), b_(b), dims_(c.prog->dims), r_(c.prog->radius),
          regs_(plan.mem_type == MemType::registers) {
        for (int d = 1; d < dims_; ++d) {
            auto i = static_cast<std::size_t>(d);
            core_ext_[i] = b.hi[i] - b.lo[i];
            halo_ext_[i] = core_ext_[i] + 2 * r_;
        }
        core_size_ = halo_size_ = 1;
        for (int d = 1; d < dims_; ++d) {
            core_size_ *= core_ext_[static_cast<std::size_t>(d)];
            halo_size_ *= halo_ext_[static_cast<std::size_t>(d)];
        }
    }

    void run() {
        const KernelProgram &prog = *c_.prog;
        const std::int64_t z0 = b_.lo[0], z1 = b_.hi[0];
        const bool shift = plan_.tmpl == GpuTemplate::shift;
        const std::int64_t wsize = regs_ ? core_size_ : halo_size_;
        for (std::size_t s = 0; s < prog.params.size(); ++s) {
            windows_.emplace_back(r_, wsize, shift, z0);
            current_.emplace_back(static_cast<std::size_t>(halo_size_));
            staged_.emplace_back(static_cast<std::size_t>(wsize));
        }
        for (std::size_t s = 0; s < prog.params.size(); ++s) {
            if (!prog.is_read[s])
                continue;
            for (std::int64_t z = z0 - r_; z < z0 + r_; ++z)
                load_plane(s, z, windows_[s].preload(z), !regs_);
            if (plan_.prefetch)
                load_plane(s, z0 + r_, staged_[s].data(), !regs_);
        }
        for (std::int64_t z = z0; z < z1; ++z) {
            for (std::size_t s = 0; s < prog.params.size(); ++s) {
                if (!prog.is_read[s])
                    continue;
                T *dst = windows_[s].advance(z);
                if (plan_.prefetch) {
                    // consume the staged plane, then start fetching the next one
                    // (async copy: commit now, wait before the next step)
                    std::copy(staged_[s].begin(), staged_[s].end(), dst);
                    if (z + 1 < z1)
                        load_plane(s, z + r_ + 1, staged_[s].data(), !regs_);
                } else {
                    load_plane(s, z + r_, dst, !regs_);
                }
                if (regs_)
                    load_plane(s, z, current_[s].data(), true);
            }
            compute_plane(z);
        }
    }

private:
    std::int64_t plane_index(const Index &p, bool halo) const {
        std::int64_t f = 0;
        for (int d = 1; d < dims_; ++d) {
            auto i = static_cast<std::size_t>(d);
            std::int64_t rel = p[i] - b_.lo[i] + (halo ? r_ : 0);
            f = f * (halo ? halo_ext_[i] : core_ext_[i]) + rel;
        }
        return f;
    }

    void load_plane(std::size_t s, std::int64_t z, T *dst, bool halo) {
        Index lo = b_.lo, hi = b_.hi;
        lo[0] = z;
        hi[0] = z + 1;
        if (halo)
            for (int d = 1; d < dims_; ++d) {
                lo[static_cast<std::size_t>(d)] -= r_;
                hi[static_cast<std::size_t>(d)] += r_;
            }
        const GridBuffer &L = *c_.layout;
        for_each_point(dims_, lo, hi, [&](const Index &p) {
            dst[plane_index(p, halo)] = static_cast<T>(c_.data[s][L.flat(p)]);
        });
    }

    void compute_plane(std::int64_t z) {
        const KernelProgram &prog = *c_.prog;
        Index lo = b_.lo, hi = b_.hi;
        lo[0] = z;
        hi[0] = z + 1;
        const GridBuffer &L = *c_.layout;
        for_each_point(dims_, lo, hi, [&](const Index &p) {
            for (const UpdateProgram &u : prog.updates) {
                T v = eval_update<T>(u, [&](const KOp &op) {
                    auto s = static_cast<std::size_t>(op.slot);
                    Index q = p;
                    for (int d = 0; d < dims_; ++d)
                        q[static_cast<std::size_t>(d)] += op.offset[d];
                    if (regs_) {
                        if (op.offset[0] != 0) // star: off-plane reads sit on the column
                            return windows_[s].plane(q[0])[plane_index(q, false)];
                        return current_[s][static_cast<std::size_t>(plane_index(q, true))];
                    }
                    return windows_[s].plane(q[0])[plane_index(q, true)];
                });
                c_.data[static_cast<std::size_t>(u.dest_slot)][L.flat(p)] = static_cast<double>(v);
            }
        });
    }

    const MapContext &c_;
    const GpuPlan &plan_;
    const Block &b_;
    int dims_, r_;
    bool regs_;
    Index core_ext_{1, 1, 1}, halo_ext_{1, 1, 1};
    std::int64_t core_size_ = 1, halo_size_ = 1;
    std::vector<PlaneWindow<T>> windows_;
    std::vector<std::vector<T>> current_;
    std::vector<std::vector<T>> staged_;
};

template <typename T>
void run_block(const MapContext &c, const GpuPlan &plan, const SemiProgram *semi,
               const Block &b) {
    switch (plan.tmpl) {
    case GpuTemplate::gmem: apply_box(c, b.lo, b.hi); break;
    case GpuTemplate::smem: smem_block<T>(c, b); break;
    case GpuTemplate::f4: f4_block<T>(c, b); break;
    case GpuTemplate::shift:
    case GpuTemplate::unroll: Streamer<T>(c, plan, b).run(); break;
    case GpuTemplate::semi: semi_box(c, *semi, b.lo, b.hi); break;
    }
}

} // namespace

GridSet run_tile_plan(const SourceUnit &unit, const GpuPlan &plan, GridSet grids,
                      const ExecOptions &opts, ExecStats *stats) {
    return interpret(
        unit, std::move(grids), opts, plan.decomposition, stats, [&](const MapContext &c) {
            const int dims = c.prog->dims;
            if (is_streaming(plan.tmpl) && dims < 2)
                throw CompileError(SourcePos{}, "template '" +
                                                    std::string(gpu_template_name(plan.tmpl)) +
                                                    "' needs a 2D or 3D kernel");
            if (plan.mem_type == MemType::registers && is_streaming(plan.tmpl) &&
                c.prog->info.shape != StencilShape::star)
                throw CompileError(SourcePos{}, "register streaming needs a star-shaped stencil");
            TileShape tile = tile_shape(plan, dims);
            if (plan.tmpl == GpuTemplate::f4) {
                const std::int64_t inner = c.bounds.hi(dims - 1) - c.bounds.lo(dims - 1);
                if (inner % 4 != 0)
                    throw CompileError(SourcePos{}, "f4 needs the innermost extent to be "
                                                    "divisible by 4, got " +
                                                        std::to_string(inner));
                tile[static_cast<std::size_t>(dims - 1)] *= 4; // each thread owns 4 elements
            }
            std::optional<SemiProgram> semi;
            if (plan.tmpl == GpuTemplate::semi)
                semi = compile_semi(c);
            for (const Region &r : c.regions) {
                const std::vector<Block> blocks = enumerate_blocks(r, tile);
                const auto nb = static_cast<std::int64_t>(blocks.size());
#pragma omp parallel for schedule(dynamic)
                for (std::int64_t i = 0; i < nb; ++i) {
                    const Block &b = blocks[static_cast<std::size_t>(i)];
                    if (c.prog->dtype == DType::f32)
                        run_block<float>(c, plan, semi ? &*semi : nullptr, b);
                    else
                        run_block<double>(c, plan, semi ? &*semi : nullptr, b);
                }
            }
        });
}

} // namespace stencilc
