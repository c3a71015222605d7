#include <chrono>
#include <cmath>
#include <sstream>

#include "exec_common.hpp"

namespace stencilc {

namespace detail {

namespace {

void emit_postfix(const Expr &e, const KernelDecl &k, DType dtype, UpdateProgram &u, int &depth) {
    auto push = [&](KOp op) {
        u.ops.push_back(op);
        if (op.code == KOp::konst || op.code == KOp::read)
            u.max_stack = std::max(u.max_stack, ++depth);
        else if (op.code != KOp::neg)
            --depth;
    };
    switch (e.kind) {
    case Expr::Kind::constant: {
        KOp op;
        op.code = KOp::konst;
        op.value = literal_value(e.text, dtype);
        push(op);
        return;
    }
    case Expr::Kind::read: {
        KOp op;
        op.code = KOp::read;
        op.offset = e.offset;
        for (std::size_t s = 0; s < k.params.size(); ++s)
            if (k.params[s].name == e.text)
                op.slot = static_cast<int>(s);
        push(op);
        return;
    }
    case Expr::Kind::local: throw CompileError(e.pos, "unexpanded temporary '" + e.text + "'");
    case Expr::Kind::unary:
        emit_postfix(*e.lhs, k, dtype, u, depth);
        {
            KOp op;
            op.code = KOp::neg;
            push(op);
        }
        return;
    case Expr::Kind::binary: {
        emit_postfix(*e.lhs, k, dtype, u, depth);
        emit_postfix(*e.rhs, k, dtype, u, depth);
        KOp op;
        switch (e.binop) {
        case BinOp::add: op.code = KOp::add; break;
        case BinOp::sub: op.code = KOp::sub; break;
        case BinOp::mul: op.code = KOp::mul; break;
        case BinOp::div: op.code = KOp::div; break;
        }
        push(op);
        return;
    }
    }
}

int slot_of(const KernelDecl &k, const std::string &name) {
    for (std::size_t s = 0; s < k.params.size(); ++s)
        if (k.params[s].name == name)
            return static_cast<int>(s);
    throw CompileError(k.pos, "unknown grid '" + name + "'");
}

} // namespace

KernelProgram compile_kernel(const KernelDecl &k, DType dtype) {
    KernelProgram p;
    p.name = k.name;
    p.dtype = dtype;
    p.info = analyze_kernel(k);
    p.dims = p.info.dims;
    p.radius = p.info.radius;
    for (const auto &param : k.params)
        p.params.push_back(param.name);
    p.is_read.assign(k.params.size(), false);
    for (const auto &[g, offs] : p.info.offsets)
        p.is_read[static_cast<std::size_t>(slot_of(k, g))] = true;
    for (const KernelStmt *s : k.updates()) {
        UpdateProgram u;
        u.dest_slot = slot_of(k, s->name);
        int depth = 0;
        emit_postfix(*k.expanded(*s), k, dtype, u, depth);
        if (u.max_stack > kMaxStack)
            throw CompileError(s->pos, "expression in kernel '" + k.name + "' nests too deeply");
        p.updates.push_back(std::move(u));
    }
    return p;
}

void bind_layout(KernelProgram &p, const GridBuffer &layout) {
    for (auto &u : p.updates)
        for (auto &op : u.ops)
            if (op.code == KOp::read) {
                std::int64_t d = 0;
                for (int i = 0; i < p.dims; ++i)
                    d += op.offset[i] * layout.stride(i);
                op.delta = d;
            }
}

void apply_box(const MapContext &c, const Index &lo, const Index &hi) {
    const int dims = c.prog->dims;
    if (c.prog->dtype == DType::f32)
        for_each_point(dims, lo, hi, [&](const Index &p) { apply_point<float>(c, c.layout->flat(p)); });
    else
        for_each_point(dims, lo, hi,
                       [&](const Index &p) { apply_point<double>(c, c.layout->flat(p)); });
}

// ---- interpreter -----------------------------------------------------------

namespace {

class Interpreter {
public:
    Interpreter(const SourceUnit &unit, GridSet grids, const ExecOptions &opts,
                Decomposition decomposition, ExecStats *stats, const MapRunner &run)
        : unit_(unit), grids_(std::move(grids)), decomposition_(decomposition), stats_(stats),
          run_(run) {
        require_valid(unit);
        binding_ = bind_target(unit, opts.target, opts.bindings);
        if (!binding_.target)
            throw CompileError(SourcePos{}, opts.target.empty()
                                                ? "no target to run: add st.launch or name one"
                                                : "unknown target '" + opts.target + "'");
        for (const auto &g : unit.grids) {
            auto it = grids_.find(g.name);
            if (it == grids_.end())
                throw CompileError(g.pos, "no data for grid '" + g.name + "'");
            const GridBuffer &b = it->second;
            if (b.dtype() != g.dtype || b.shape() != g.shape || b.order() != g.order)
                throw CompileError(g.pos, "data for grid '" + g.name +
                                              "' does not match its declaration");
            names_[g.name] = &it->second;
        }
        for (const auto &p : binding_.target->params) {
            if (p.type != "grid")
                continue;
            auto it = binding_.grids.find(p.name);
            if (it == binding_.grids.end())
                throw CompileError(p.pos, "grid parameter '" + p.name +
                                              "' is not bound to a declared grid");
            names_[p.name] = &grids_.at(it->second);
        }
    }

    GridSet run() {
        exec(binding_.target->body);
        if (stats_) {
            for (const auto &[name, g] : grids_)
                g.for_each_interior([&](const Index &i) {
                    if (!std::isfinite(g.at(i)))
                        ++stats_->nonfinite;
                });
            if (stats_->nonfinite)
                stats_->warnings.push_back({SourcePos{}, Severity::warning,
                                            std::to_string(stats_->nonfinite) +
                                                " non-finite values in the result"});
        }
        return std::move(grids_);
    }

private:
    std::optional<std::int64_t> lookup(const std::string &sym) const {
        auto dot = sym.find(".shape[");
        if (dot != std::string::npos) {
            auto it = names_.find(sym.substr(0, dot));
            if (it == names_.end())
                return std::nullopt;
            int d = std::stoi(sym.substr(dot + 7));
            if (d >= it->second->dims())
                return std::nullopt;
            return it->second->extent(d);
        }
        auto it = binding_.ints.find(sym);
        if (it == binding_.ints.end())
            return std::nullopt;
        return it->second;
    }

    void exec(const std::vector<Stmt> &body) {
        for (const Stmt &s : body) {
            switch (s.kind) {
            case Stmt::Kind::for_range: {
                auto n = s.count.evaluate([&](const std::string &x) { return lookup(x); });
                if (!n)
                    throw CompileError(s.pos, "iteration count '" + s.count.str() +
                                                  "' is unbound; pass a value for it");
                for (std::int64_t i = 0; i < *n; ++i)
                    exec(s.body);
                break;
            }
            case Stmt::Kind::swap: std::swap(names_.at(s.a), names_.at(s.b)); break;
            case Stmt::Kind::map: map(s); break;
            }
        }
    }

    void map(const Stmt &s) {
        const KernelDecl *k = unit_.find_kernel(s.kernel);
        std::vector<GridBuffer *> args;
        for (const auto &a : s.args)
            args.push_back(names_.at(a));
        const GridBuffer &layout = *args.front();
        for (const GridBuffer *g : args)
            if (!g->same_layout(layout))
                throw CompileError(s.pos, "grids passed to one map must share type, shape and "
                                          "order");
        auto [it, fresh] = programs_.try_emplace(k->name);
        if (fresh)
            it->second = compile_kernel(*k, layout.dtype());
        KernelProgram &prog = it->second;
        bind_layout(prog, layout);

        MapSpec spec = desugar_map(s.map, prog.dims);
        std::vector<Diagnostic> warnings;
        MapBounds bounds = concretize(
            spec, [&](const std::string &x) { return lookup(x); }, s.pos, &warnings);
        for (int d = 0; d < bounds.dims; ++d)
            if (bounds.lo(d) < 0 || bounds.hi(d) > layout.extent(d))
                throw CompileError(s.pos, "map domain [" + std::to_string(bounds.lo(d)) + ", " +
                                              std::to_string(bounds.hi(d)) +
                                              ") exceeds extent " +
                                              std::to_string(layout.extent(d)) + " of dimension " +
                                              std::to_string(d));

        MapContext c;
        c.kernel = k;
        c.prog = &prog;
        for (GridBuffer *g : args)
            c.data.push_back(g->values().data());
        c.layout = &layout;
        c.bounds = bounds;
        c.regions = decompose_regions(bounds, decomposition_);
        run_(c);
        if (stats_) {
            ++stats_->maps;
            stats_->points += bounds.domain_size();
            if (stats_->maps == 1)
                for (auto &w : warnings)
                    stats_->warnings.push_back(std::move(w));
        }
    }

    const SourceUnit &unit_;
    GridSet grids_;
    Decomposition decomposition_;
    ExecStats *stats_;
    const MapRunner &run_;
    TargetBinding binding_;
    std::map<std::string, GridBuffer *> names_;
    std::map<std::string, KernelProgram> programs_;
};

} // namespace

GridSet interpret(const SourceUnit &unit, GridSet grids, const ExecOptions &opts,
                  Decomposition decomposition, ExecStats *stats, const MapRunner &run) {
    return Interpreter(unit, std::move(grids), opts, decomposition, stats, run).run();
}

// ---- Semi-stencil ----------------------------------------------------------

SemiProgram compile_semi(const MapContext &c) {
    const KernelDecl &k = *c.kernel;
    if (c.prog->info.shape != StencilShape::star)
        throw CompileError(k.pos, "Semi-stencil needs a star-shaped stencil; kernel '" + k.name +
                                      "' is " + std::string(shape_name(c.prog->info.shape)));
    SemiProgram s;
    for (const KernelStmt *u : k.updates()) {
        auto form = linearize(*k.expanded(*u), c.prog->dtype);
        if (!form)
            throw CompileError(u->pos, "Semi-stencil needs an update that is linear in the "
                                       "grid reads");
        SemiUpdate su;
        su.dest_slot = slot_of(k, u->name);
        su.constant = form->constant;
        for (const LinearTerm &t : form->terms) {
            SemiTerm st;
            st.slot = slot_of(k, t.grid);
            st.coef = t.coef;
            bool negative = false;
            for (int d = 0; d < c.prog->dims; ++d) {
                st.delta += t.offset[d] * c.layout->stride(d);
                negative = negative || t.offset[d] < 0;
            }
            (negative ? su.forward : su.backward).push_back(st);
        }
        s.updates.push_back(std::move(su));
    }
    return s;
}

namespace {

template <typename T>
void semi_box_t(const MapContext &c, const SemiProgram &s, const Index &lo, const Index &hi) {
    const int dims = c.prog->dims;
    std::vector<std::int64_t> flats;
    for_each_point(dims, lo, hi, [&](const Index &p) { flats.push_back(c.layout->flat(p)); });
    std::vector<T> partial(flats.size());
    auto term = [&](const SemiTerm &t, std::int64_t f) {
        return static_cast<T>(t.coef) *
               static_cast<T>(c.data[static_cast<std::size_t>(t.slot)][f + t.delta]);
    };
    for (const SemiUpdate &u : s.updates) {
        // forward: ascending, partial sums of the trailing (negative) side
        for (std::size_t n = 0; n < flats.size(); ++n) {
            T acc = 0;
            for (std::size_t t = 0; t < u.forward.size(); ++t)
                acc = t == 0 ? term(u.forward[t], flats[n]) : acc + term(u.forward[t], flats[n]);
            partial[n] = acc;
        }
        // backward: descending, completes each point from its partial sum
        for (std::size_t n = flats.size(); n-- > 0;) {
            T acc = partial[n];
            for (const SemiTerm &t : u.backward)
                acc = acc + term(t, flats[n]);
            if (u.constant != 0)
                acc = acc + static_cast<T>(u.constant);
            c.data[static_cast<std::size_t>(u.dest_slot)][flats[n]] = static_cast<double>(acc);
        }
    }
}

} // namespace

void semi_box(const MapContext &c, const SemiProgram &s, const Index &lo, const Index &hi) {
    if (c.prog->dtype == DType::f32)
        semi_box_t<float>(c, s, lo, hi);
    else
        semi_box_t<double>(c, s, lo, hi);
}

} // namespace detail

using namespace detail;

// ---- public entry points ---------------------------------------------------

GridSet make_grids(const SourceUnit &unit) {
    GridSet out;
    for (const auto &g : unit.grids)
        out.emplace(g.name, GridBuffer::like(g));
    return out;
}

GridSet random_grids(const SourceUnit &unit, std::uint64_t seed) {
    GridSet out;
    std::uint64_t n = 0;
    for (const auto &g : unit.grids) {
        GridBuffer b = GridBuffer::like(g);
        fill_log_uniform(b, seed + n++);
        out.emplace(g.name, std::move(b));
    }
    return out;
}

GridSet run_target(const SourceUnit &unit, GridSet grids, const ExecOptions &opts,
                   ExecStats *stats) {
    return interpret(unit, std::move(grids), opts, opts.decomposition, stats,
                     [&](const MapContext &c) {
                         for (const Region &r : c.regions) {
                             if (!opts.parallel) {
                                 apply_box(c, r.lo, r.hi);
                                 continue;
                             }
                             const std::int64_t lo = r.lo[0], hi = r.hi[0];
#pragma omp parallel for schedule(static)
                             for (std::int64_t i = lo; i < hi; ++i) {
                                 Index a = r.lo, b = r.hi;
                                 a[0] = i;
                                 b[0] = i + 1;
                                 apply_box(c, a, b);
                             }
                         }
                     });
}

GridSet run_semi(const SourceUnit &unit, GridSet grids, const ExecOptions &opts,
                 ExecStats *stats) {
    return interpret(unit, std::move(grids), opts, opts.decomposition, stats,
                     [&](const MapContext &c) {
                         SemiProgram s = compile_semi(c);
                         for (const Region &r : c.regions)
                             semi_box(c, s, r.lo, r.hi);
                     });
}

GridSet run_omp_plan(const SourceUnit &unit, const OmpPlan &plan, GridSet grids,
                     const ExecOptions &opts, ExecStats *stats) {
    return interpret(
        unit, std::move(grids), opts, plan.decomposition, stats, [&](const MapContext &c) {
            std::optional<SemiProgram> semi;
            if (plan.algorithm == OmpAlgorithm::semi)
                semi = compile_semi(c);
            auto body = [&](const Index &lo, const Index &hi) {
                if (semi)
                    semi_box(c, *semi, lo, hi);
                else
                    apply_box(c, lo, hi);
            };
            const TileShape tile = tile_shape(plan, c.prog->dims);
            for (const Region &r : c.regions) {
                const std::vector<Block> blocks = enumerate_blocks(r, tile);
                const auto nb = static_cast<std::int64_t>(blocks.size());
                switch (plan.tmpl) {
                case OmpTemplate::loop:
                case OmpTemplate::loop_blocking:
                case OmpTemplate::loop_blocking_collapse:
                    // blocks are the outer rows for `loop`, 2D tiles otherwise
#pragma omp parallel for default(shared) schedule(runtime)
                    for (std::int64_t b = 0; b < nb; ++b)
                        body(blocks[static_cast<std::size_t>(b)].lo,
                             blocks[static_cast<std::size_t>(b)].hi);
                    break;
                case OmpTemplate::tasks_blocking:
#pragma omp parallel default(shared)
#pragma omp master
                    {
                        for (std::int64_t b = 0; b < nb; ++b) {
#pragma omp task firstprivate(b)
                            body(blocks[static_cast<std::size_t>(b)].lo,
                                 blocks[static_cast<std::size_t>(b)].hi);
                        }
#pragma omp taskwait
                    }
                    break;
                case OmpTemplate::taskloop:
#pragma omp parallel default(shared)
#pragma omp single
#pragma omp taskloop
                    for (std::int64_t b = 0; b < nb; ++b)
                        body(blocks[static_cast<std::size_t>(b)].lo,
                             blocks[static_cast<std::size_t>(b)].hi);
                    break;
                }
            }
        });
}

std::string ProfileReport::str() const {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(6);
    o << "frontend: " << frontend << " s\n";
    o << "codegen: " << codegen << " s\n";
    o << "execution: " << execution << " s\n";
    o << "total: " << frontend + codegen + execution << " s\n";
    return o.str();
}

} // namespace stencilc
