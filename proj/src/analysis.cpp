#include "stencilc/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

namespace stencilc {

std::string_view shape_name(StencilShape s) {
    switch (s) {
    case StencilShape::star: return "star";
    case StencilShape::box: return "box";
    case StencilShape::other: return "other";
    }
    return "other";
}

std::set<OffsetVector> StencilInfo::all_offsets() const {
    std::set<OffsetVector> all;
    for (const auto &[g, offs] : offsets)
        all.insert(offs.begin(), offs.end());
    return all;
}

StencilShape classify_shape(const std::set<OffsetVector> &offsets, int dims) {
    int radius = 0;
    bool star = true;
    for (const auto &o : offsets) {
        radius = std::max(radius, o.max_abs());
        if (o.nonzero_count() > 1)
            star = false;
    }
    if (star)
        return StencilShape::star;
    std::size_t cube = 1;
    for (int d = 0; d < dims; ++d)
        cube *= static_cast<std::size_t>(2 * radius + 1);
    // offsets are within the cube by definition of radius, so counting suffices
    return offsets.size() == cube ? StencilShape::box : StencilShape::other;
}

StencilInfo analyze_kernel(const KernelDecl &k) {
    StencilInfo info;
    auto collect = [&](auto &&self, const Expr &e) -> void {
        switch (e.kind) {
        case Expr::Kind::read:
            info.offsets[e.text].insert(e.offset);
            info.dims = e.offset.dims;
            info.radius = std::max(info.radius, e.offset.max_abs());
            break;
        case Expr::Kind::unary: self(self, *e.lhs); break;
        case Expr::Kind::binary:
            self(self, *e.lhs);
            self(self, *e.rhs);
            break;
        default: break;
        }
    };
    for (const KernelStmt *u : k.updates()) {
        ExprPtr e = k.expanded(*u);
        collect(collect, *e);
        info.flops_per_point += count_operators(*e);
        if (info.dims == 0)
            info.dims = u->offset.dims;
    }
    info.shape = classify_shape(info.all_offsets(), info.dims);
    return info;
}

// ---- map desugaring ------------------------------------------------------

namespace {

constexpr std::array<const char *, kMaxDims> kDimKeys{"i", "j", "k"};

std::vector<Affine> expand_extents(const MapArg &a, int dims) {
    if (a.kind == MapArg::Kind::shape_of) {
        std::vector<Affine> out;
        for (int d = 0; d < dims; ++d)
            out.push_back(Affine::symbol(a.grid + ".shape[" + std::to_string(d) + "]"));
        return out;
    }
    if (a.kind == MapArg::Kind::tuple)
        return a.tuple;
    throw CompileError(a.pos, "'e' must be an extent tuple or a grid shape here");
}

Affine expect_scalar(const MapArg &a, const char *key) {
    if (a.kind != MapArg::Kind::scalar)
        throw CompileError(a.pos, std::string("'") + key + "' must be a single integer bound");
    return a.scalar;
}

} // namespace

MapSpec desugar_map(const MapSpecRaw &raw, int dims) {
    if (dims < 1 || dims > kMaxDims)
        throw CompileError(raw.pos, "map needs a 1D to 3D kernel");
    MapSpec spec;
    spec.dims = dims;
    const MapArg *e = raw.find("e");
    const MapArg *w = raw.find("w");

    std::vector<const MapArg *> per_dim;
    for (int d = 0; d < kMaxDims; ++d) {
        const MapArg *a = raw.find(kDimKeys[static_cast<std::size_t>(d)]);
        if (a && d >= dims)
            throw CompileError(a->pos, "inconsistent arity: map keyword '" +
                                          std::string(kDimKeys[static_cast<std::size_t>(d)]) +
                                          "' on a " + std::to_string(dims) + "D kernel");
        if (d < dims)
            per_dim.push_back(a);
    }
    bool any_dim = std::any_of(per_dim.begin(), per_dim.end(), [](auto *p) { return p; });

    auto set = [&](int d, Affine a0, Affine a1, Affine a2, Affine a3) {
        spec.bounds[static_cast<std::size_t>(d)] = {std::move(a0), std::move(a1), std::move(a2),
                                                    std::move(a3)};
    };

    if (any_dim) {
        for (int d = 0; d < dims; ++d)
            if (!per_dim[static_cast<std::size_t>(d)])
                throw CompileError(raw.pos, "inconsistent arity: map keyword '" +
                                                std::string(kDimKeys[static_cast<std::size_t>(d)]) +
                                                "' is missing");
        auto width_of = [&](const MapArg &a) -> std::size_t {
            return a.kind == MapArg::Kind::tuple ? a.tuple.size() : 1;
        };
        std::size_t width = width_of(*per_dim[0]);
        for (const MapArg *a : per_dim) {
            if (a->kind == MapArg::Kind::shape_of)
                throw CompileError(a->pos, "a grid shape is only valid for 'e'");
            if (width_of(*a) != width)
                throw CompileError(a->pos, "inconsistent arity: every dimension must use the same "
                                           "bound form");
        }
        if (width == 1) {
            if (e)
                throw CompileError(e->pos, "'e' cannot be combined with scalar extents; use 'w'");
            Affine p = w ? expect_scalar(*w, "w") : Affine(0);
            for (int d = 0; d < dims; ++d) {
                Affine x = per_dim[static_cast<std::size_t>(d)]->scalar;
                set(d, Affine(0), p, x - p, x);
            }
        } else if (width == 2) {
            if (w)
                throw CompileError(w->pos, "'w' cannot be combined with interval bounds; use 'e'");
            Affine p = e ? expect_scalar(*e, "e") : Affine(0);
            for (int d = 0; d < dims; ++d) {
                const auto &t = per_dim[static_cast<std::size_t>(d)]->tuple;
                set(d, t[0], t[0] + p, t[1] - p, t[1]);
            }
        } else if (width == 4) {
            if (e || w)
                throw CompileError((e ? e : w)->pos,
                                   "explicit 4-tuple bounds take no 'e' or 'w' argument");
            for (int d = 0; d < dims; ++d) {
                const auto &t = per_dim[static_cast<std::size_t>(d)]->tuple;
                set(d, t[0], t[1], t[2], t[3]);
            }
        } else {
            throw CompileError(per_dim[0]->pos, "map bounds take 1, 2 or 4 values per dimension");
        }
        return spec;
    }

    if (!e)
        throw CompileError(raw.pos, "map needs per-dimension bounds (i, j, k) or extents 'e'");
    std::vector<Affine> ext = expand_extents(*e, dims);
    if (static_cast<int>(ext.size()) != dims)
        throw CompileError(e->pos, "inconsistent arity: " + std::to_string(ext.size()) +
                                       " extents for a " + std::to_string(dims) + "D kernel");
    Affine p = w ? expect_scalar(*w, "w") : Affine(0);
    for (int d = 0; d < dims; ++d) {
        const Affine &x = ext[static_cast<std::size_t>(d)];
        set(d, Affine(0), p, x - p, x);
    }
    return spec;
}

std::int64_t MapBounds::domain_size() const {
    std::int64_t n = 1;
    for (int d = 0; d < dims; ++d)
        n *= hi(d) - lo(d);
    return n;
}

MapBounds concretize(const MapSpec &spec, const SymbolLookup &lookup, SourcePos pos,
                     std::vector<Diagnostic> *warnings) {
    MapBounds out;
    out.dims = spec.dims;
    for (int d = 0; d < spec.dims; ++d) {
        auto &b = out.b[static_cast<std::size_t>(d)];
        for (int q = 0; q < 4; ++q) {
            const Affine &a = spec.bounds[static_cast<std::size_t>(d)][static_cast<std::size_t>(q)];
            auto v = a.evaluate(lookup);
            if (!v) {
                std::string missing;
                for (const auto &[name, k] : a.terms())
                    if (!lookup(name))
                        missing = name;
                throw CompileError(pos, "map bound refers to unknown value '" + missing + "'");
            }
            b[static_cast<std::size_t>(q)] = *v;
        }
        if (b[0] > b[3])
            throw CompileError(pos, "map interval [" + std::to_string(b[0]) + ", " +
                                        std::to_string(b[3]) + ") is reversed in dimension " +
                                        std::to_string(d));
        if (b[1] < b[0] || b[2] > b[3])
            throw CompileError(pos, "map edge bounds fall outside [a0, a3) in dimension " +
                                        std::to_string(d));
        if (b[1] > b[2]) {
            if (warnings)
                warnings->push_back({pos, Severity::warning,
                                     "edge width exceeds half the extent in dimension " +
                                         std::to_string(d) + "; inner interval is empty"});
            b[1] = std::min(b[1], b[3]);
            b[2] = b[1];
        }
    }
    return out;
}

// ---- regions -------------------------------------------------------------

std::string_view decomposition_name(Decomposition d) {
    switch (d) {
    case Decomposition::unified: return "unified";
    case Decomposition::cross_product: return "cross_product";
    case Decomposition::slab7: return "slab7";
    }
    return "unified";
}

std::optional<Decomposition> decomposition_from_name(std::string_view s) {
    if (s == "unified")
        return Decomposition::unified;
    if (s == "cross_product" || s == "two_region")
        return Decomposition::cross_product;
    if (s == "slab7" || s == "seven_region")
        return Decomposition::slab7;
    return std::nullopt;
}

std::int64_t Region::size() const {
    std::int64_t n = 1;
    for (int d = 0; d < dims; ++d)
        n *= hi[static_cast<std::size_t>(d)] - lo[static_cast<std::size_t>(d)];
    return n;
}

bool Region::contains(const std::array<std::int64_t, kMaxDims> &p) const {
    for (int d = 0; d < dims; ++d) {
        auto i = static_cast<std::size_t>(d);
        if (p[i] < lo[i] || p[i] >= hi[i])
            return false;
    }
    return true;
}

std::string Region::str() const {
    std::string s = inner ? "inner" : "boundary(" + code + ")";
    s += " ";
    for (int d = 0; d < dims; ++d) {
        auto i = static_cast<std::size_t>(d);
        if (d)
            s += "x";
        s += "[" + std::to_string(lo[i]) + "," + std::to_string(hi[i]) + ")";
    }
    return s;
}

std::vector<Region> decompose_regions(const MapBounds &bounds, Decomposition scheme) {
    std::vector<Region> out;
    const int dims = bounds.dims;
    auto interval = [&](int d, int which) {
        const auto &b = bounds.b[static_cast<std::size_t>(d)];
        auto w = static_cast<std::size_t>(which);
        return std::pair{b[w], b[w + 1]};
    };

    if (scheme == Decomposition::unified) {
        Region r;
        r.dims = dims;
        r.inner = true;
        for (int d = 0; d < dims; ++d) {
            r.lo[static_cast<std::size_t>(d)] = bounds.lo(d);
            r.hi[static_cast<std::size_t>(d)] = bounds.hi(d);
        }
        if (r.size() > 0)
            out.push_back(r);
        return out;
    }

    if (scheme == Decomposition::cross_product) {
        int total = 1;
        for (int d = 0; d < dims; ++d)
            total *= 3;
        for (int idx = 0; idx < total; ++idx) {
            Region r;
            r.dims = dims;
            int rem = idx;
            std::string code(static_cast<std::size_t>(dims), '0');
            for (int d = dims - 1; d >= 0; --d) {
                int which = rem % 3;
                rem /= 3;
                auto [lo, hi] = interval(d, which);
                r.lo[static_cast<std::size_t>(d)] = lo;
                r.hi[static_cast<std::size_t>(d)] = hi;
                code[static_cast<std::size_t>(d)] = static_cast<char>('0' + which);
            }
            r.code = code;
            r.inner = code == std::string(static_cast<std::size_t>(dims), '1');
            if (r.size() > 0)
                out.push_back(r);
        }
    } else {
        if (dims != 3)
            throw CompileError(SourcePos{}, "slab7 decomposition requires a 3D map");
        auto make = [&](std::array<int, 3> which, const char *code) {
            // which: 0/1/2 interval, -1 full span
            Region r;
            r.dims = 3;
            r.code = code;
            for (int d = 0; d < 3; ++d) {
                auto i = static_cast<std::size_t>(d);
                if (which[i] < 0) {
                    r.lo[i] = bounds.lo(d);
                    r.hi[i] = bounds.hi(d);
                } else {
                    std::tie(r.lo[i], r.hi[i]) = interval(d, which[i]);
                }
            }
            r.inner = std::string(code) == "111";
            if (r.size() > 0)
                out.push_back(r);
        };
        // z is the last (contiguous) dimension.
        make({1, 1, 1}, "111");
        make({-1, -1, 0}, "**0");
        make({-1, -1, 2}, "**2");
        make({-1, 0, 1}, "*01");
        make({-1, 2, 1}, "*21");
        make({0, 1, 1}, "011");
        make({2, 1, 1}, "211");
    }
    std::stable_sort(out.begin(), out.end(), [](const Region &a, const Region &b) {
        if (a.inner != b.inner)
            return a.inner;
        return a.code < b.code;
    });
    return out;
}

LoopNest LoopNest::from_region(const Region &r) {
    LoopNest n;
    n.dims = r.dims;
    n.begin = r.lo;
    n.end = r.hi;
    return n;
}

std::int64_t LoopNest::iteration_count() const {
    std::int64_t c = 1;
    for (int d = 0; d < dims; ++d) {
        auto i = static_cast<std::size_t>(d);
        c *= (end[i] - begin[i] + stride[i] - 1) / stride[i];
    }
    return c;
}

// ---- linear forms --------------------------------------------------------

double literal_value(const std::string &text, DType dtype) {
    const char *b = text.data();
    const char *e = b + text.size();
    if (dtype == DType::f32) {
        float v = 0;
        auto r = std::from_chars(b, e, v);
        if (r.ec != std::errc() || r.ptr != e)
            throw CompileError(SourcePos{}, "malformed numeric literal '" + text + "'");
        return v;
    }
    double v = 0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e)
        throw CompileError(SourcePos{}, "malformed numeric literal '" + text + "'");
    return v;
}

namespace {

template <typename T> struct Linearizer {
    static double rnd(double v) { return static_cast<double>(static_cast<T>(v)); }

    static LinearForm add(LinearForm a, const LinearForm &b, bool subtract) {
        a.constant = subtract ? rnd(static_cast<T>(a.constant) - static_cast<T>(b.constant))
                              : rnd(static_cast<T>(a.constant) + static_cast<T>(b.constant));
        for (const auto &t : b.terms) {
            auto it = std::find_if(a.terms.begin(), a.terms.end(), [&](const LinearTerm &x) {
                return x.grid == t.grid && x.offset == t.offset;
            });
            T c = subtract ? -static_cast<T>(t.coef) : static_cast<T>(t.coef);
            if (it == a.terms.end())
                a.terms.push_back({t.grid, t.offset, rnd(c)});
            else
                it->coef = rnd(static_cast<T>(it->coef) + c);
        }
        return a;
    }

    static LinearForm scale(LinearForm a, double k, bool divide) {
        auto op = [&](double v) {
            return divide ? rnd(static_cast<T>(v) / static_cast<T>(k))
                          : rnd(static_cast<T>(k) * static_cast<T>(v));
        };
        a.constant = op(a.constant);
        for (auto &t : a.terms)
            t.coef = op(t.coef);
        return a;
    }

    static std::optional<LinearForm> run(const Expr &e, DType dt) {
        switch (e.kind) {
        case Expr::Kind::constant: {
            LinearForm f;
            f.constant = literal_value(e.text, dt);
            return f;
        }
        case Expr::Kind::read: {
            LinearForm f;
            f.terms.push_back({e.text, e.offset, 1.0});
            return f;
        }
        case Expr::Kind::local: return std::nullopt;
        case Expr::Kind::unary: {
            auto c = run(*e.lhs, dt);
            if (!c)
                return std::nullopt;
            return scale(std::move(*c), -1.0, false);
        }
        case Expr::Kind::binary: {
            auto l = run(*e.lhs, dt);
            auto r = run(*e.rhs, dt);
            if (!l || !r)
                return std::nullopt;
            switch (e.binop) {
            case BinOp::add: return add(std::move(*l), *r, false);
            case BinOp::sub: return add(std::move(*l), *r, true);
            case BinOp::mul:
                if (l->terms.empty())
                    return scale(std::move(*r), l->constant, false);
                if (r->terms.empty())
                    return scale(std::move(*l), r->constant, false);
                return std::nullopt;
            case BinOp::div:
                if (r->terms.empty())
                    return scale(std::move(*l), r->constant, true);
                return std::nullopt;
            }
        }
        }
        return std::nullopt;
    }
};

} // namespace

std::optional<LinearForm> linearize(const Expr &e, DType dtype) {
    if (dtype == DType::f32)
        return Linearizer<float>::run(e, dtype);
    return Linearizer<double>::run(e, dtype);
}

} // namespace stencilc
