#include "stencilc/codegen.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "stencilc/frontend.hpp"

namespace stencilc {

const GeneratedFile *GeneratedArtifact::find(std::string_view path) const {
    for (const auto &f : files)
        if (f.path == path)
            return &f;
    return nullptr;
}

std::string GeneratedArtifact::joined() const {
    std::string s;
    for (const auto &f : files)
        s += "// ---- " + f.path + "\n" + f.text;
    return s;
}

IndexScheme IndexScheme::of(const GridDecl &g) { return {g.shape, g.order, 0}; }

std::int64_t IndexScheme::stride(int d) const {
    std::int64_t s = 1;
    for (std::size_t k = static_cast<std::size_t>(d) + 1; k < extents.size(); ++k)
        s *= extents[k] + 2 * order;
    return s;
}

std::int64_t IndexScheme::padded_size() const {
    std::int64_t s = lead_padding;
    std::int64_t n = 1;
    for (auto e : extents)
        n *= e + 2 * order;
    return s + n;
}

std::int64_t IndexScheme::flat(const Index &i) const {
    std::int64_t f = lead_padding;
    for (std::size_t d = 0; d < extents.size(); ++d)
        f += (i[d] + order) * stride(static_cast<int>(d));
    return f;
}

std::string IndexScheme::c_flat(const std::vector<std::string> &vars) const {
    std::string s = lead_padding ? std::to_string(lead_padding) + " + " : "";
    for (std::size_t d = 0; d < extents.size(); ++d) {
        if (d)
            s += " + ";
        std::string term = order ? "(" + vars[d] + " + " + std::to_string(order) + ")" : vars[d];
        const std::int64_t st = stride(static_cast<int>(d));
        s += st == 1 ? term : term + " * " + std::to_string(st);
    }
    return s;
}

namespace {

// ---- shared helpers --------------------------------------------------------

std::string cname(const std::string &n) {
    static const std::set<std::string> kw = {
        "auto",   "break",    "case",     "char",   "const",    "continue", "default",
        "do",     "double",   "else",     "enum",   "extern",   "float",    "for",
        "goto",   "if",       "inline",   "int",    "long",     "register", "restrict",
        "return", "short",    "signed",   "sizeof", "static",   "struct",   "switch",
        "typedef", "union",   "unsigned", "void",   "volatile", "while",    "main",
        "c",      "n",        "partial",  "tmp_"};
    return kw.contains(n) ? n + "_" : n;
}

std::string ctype(DType t) { return t == DType::f32 ? "float" : "double"; }

std::string c_literal(const std::string &text, DType t) {
    std::string s = text;
    if (s.find_first_of(".eE") == std::string::npos)
        s += ".0";
    if (t == DType::f32)
        s += "f";
    return s;
}

std::string c_real(double v, DType t) {
    std::string s = format_real(v, t) + (t == DType::f32 ? "f" : "");
    return v < 0 ? "(" + s + ")" : s;
}

std::string hex16(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string opts_key(const CodegenOptions &o) {
    std::string s = "target=" + o.target + ";decomposition=" +
                    std::string(decomposition_name(o.decomposition)) + ";";
    for (const auto &[k, v] : o.bindings)
        s += k + "=" + std::to_string(v) + ";";
    return s;
}

class Writer {
public:
    void line(const std::string &s) {
        if (s.empty()) {
            out_ += "\n";
            return;
        }
        // pragmas stay at the indentation of the statement they annotate
        out_ += std::string(static_cast<std::size_t>(indent_) * 4, ' ') + s + "\n";
    }
    void open(const std::string &head) {
        line(head + " {");
        ++indent_;
    }
    void close(const std::string &tail = "}") {
        --indent_;
        line(tail);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
    int indent_ = 0;
};

const char *kVars[kMaxDims] = {"i0", "i1", "i2"};

std::vector<std::string> var_list(int dims) {
    std::vector<std::string> v;
    for (int d = 0; d < dims; ++d)
        v.emplace_back(kVars[d]);
    return v;
}

// One `st.map` statement with everything resolved at generation time.
struct MapSite {
    const Stmt *stmt = nullptr;
    const KernelDecl *kernel = nullptr;
    StencilInfo info;
    const GridDecl *layout = nullptr;
    IndexScheme scheme;
    MapBounds bounds;
    std::vector<Region> regions;
    std::vector<std::string> args; // C names per kernel parameter
};

struct FnParam {
    std::string name; // C name
    bool is_grid = false;
    const GridDecl *grid = nullptr; // for grids: the declared layout
    std::string source;             // target-level name
};

// The launched target, its bindings and the C-visible parameters.
class TargetView {
public:
    TargetView(const SourceUnit &unit, const CodegenOptions &opts) : unit_(unit) {
        require_valid(unit);
        binding_ = bind_target(unit, opts.target, opts.bindings);
        if (!binding_.target)
            throw CompileError(SourcePos{}, opts.target.empty()
                                                ? "no target to compile: add st.launch"
                                                : "unknown target '" + opts.target + "'");
        decomposition_ = opts.decomposition;
        for (const auto &g : unit.grids)
            grid_of_[g.name] = &g;
        for (const auto &p : target().params) {
            FnParam f;
            f.name = cname(p.name);
            f.source = p.name;
            if (p.type == "grid") {
                auto it = binding_.grids.find(p.name);
                if (it == binding_.grids.end())
                    throw CompileError(p.pos, "grid parameter '" + p.name +
                                                  "' is not bound to a declared grid");
                f.is_grid = true;
                f.grid = unit.find_grid(it->second);
                grid_of_[p.name] = f.grid;
            }
            params_.push_back(f);
        }
        // top-level grids used directly by the body become extra parameters
        std::set<std::string> used;
        collect(target().body, used);
        for (const auto &g : unit.grids) {
            bool shadowed = std::any_of(target().params.begin(), target().params.end(),
                                        [&](const Param &p) { return p.name == g.name; });
            if (used.contains(g.name) && !shadowed)
                params_.push_back({cname(g.name), true, &g, g.name});
        }
    }

    const TargetDecl &target() const { return *binding_.target; }
    const TargetBinding &binding() const { return binding_; }
    const std::vector<FnParam> &params() const { return params_; }
    std::string entry() const { return "stencil_" + target().name; }

    std::string prototype() const {
        std::string s = "void " + entry() + "(";
        for (std::size_t k = 0; k < params_.size(); ++k) {
            if (k)
                s += ", ";
            const FnParam &p = params_[k];
            s += p.is_grid ? ctype(p.grid->dtype) + " *" + p.name : "long long " + p.name;
        }
        return s + (params_.empty() ? "void)" : ")");
    }

    /// Name of the first kernel mapped by the target, for file names.
    std::string first_kernel() const {
        std::function<const Stmt *(const std::vector<Stmt> &)> find =
            [&](const std::vector<Stmt> &b) -> const Stmt * {
            for (const Stmt &s : b) {
                if (s.kind == Stmt::Kind::map)
                    return &s;
                if (s.kind == Stmt::Kind::for_range)
                    if (const Stmt *m = find(s.body))
                        return m;
            }
            return nullptr;
        };
        const Stmt *m = find(target().body);
        return m ? m->kernel : target().name;
    }

    std::optional<std::int64_t> shape_symbol(const std::string &sym) const {
        auto dot = sym.find(".shape[");
        if (dot == std::string::npos)
            return std::nullopt;
        auto it = grid_of_.find(sym.substr(0, dot));
        if (it == grid_of_.end())
            return std::nullopt;
        auto d = static_cast<std::size_t>(std::stoi(sym.substr(dot + 7)));
        if (d >= it->second->shape.size())
            return std::nullopt;
        return it->second->shape[d];
    }

    /// Loop counts stay symbolic in integer parameters.
    std::string count_expr(const Affine &a) const {
        std::int64_t c = a.constant();
        std::string s;
        for (const auto &[sym, k] : a.terms()) {
            if (auto v = shape_symbol(sym)) {
                c += k * *v;
                continue;
            }
            std::string term = k == 1 ? cname(sym) : std::to_string(k) + " * " + cname(sym);
            s += s.empty() ? term : " + " + term;
        }
        if (s.empty())
            return std::to_string(c);
        if (c)
            s += c > 0 ? " + " + std::to_string(c) : " - " + std::to_string(-c);
        return s;
    }

    MapSite site(const Stmt &s) const {
        MapSite m;
        m.stmt = &s;
        m.kernel = unit_.find_kernel(s.kernel);
        m.info = analyze_kernel(*m.kernel);
        for (const auto &a : s.args) {
            auto it = grid_of_.find(a);
            if (it == grid_of_.end())
                throw CompileError(s.pos, "grid '" + a + "' is not bound to a declared grid");
            if (!m.layout)
                m.layout = it->second;
            else if (it->second->shape != m.layout->shape ||
                     it->second->dtype != m.layout->dtype ||
                     it->second->order != m.layout->order)
                throw CompileError(s.pos, "grids passed to one map must share type, shape and "
                                          "order");
            m.args.push_back(cname(a));
        }
        m.scheme = IndexScheme::of(*m.layout);
        MapSpec spec = desugar_map(s.map, m.info.dims);
        m.bounds = concretize(
            spec,
            [&](const std::string &sym) -> std::optional<std::int64_t> {
                if (auto v = shape_symbol(sym))
                    return v;
                auto it = binding_.ints.find(sym);
                if (it == binding_.ints.end())
                    return std::nullopt;
                return it->second;
            },
            s.pos);
        for (int d = 0; d < m.bounds.dims; ++d)
            if (m.bounds.lo(d) < 0 || m.bounds.hi(d) > m.layout->shape[static_cast<std::size_t>(d)])
                throw CompileError(s.pos, "map domain exceeds the grid extent in dimension " +
                                              std::to_string(d));
        m.regions = decompose_regions(m.bounds, decomposition_);
        return m;
    }

private:
    void collect(const std::vector<Stmt> &body, std::set<std::string> &used) const {
        for (const Stmt &s : body) {
            if (s.kind == Stmt::Kind::for_range)
                collect(s.body, used);
            else if (s.kind == Stmt::Kind::map)
                used.insert(s.args.begin(), s.args.end());
            else {
                used.insert(s.a);
                used.insert(s.b);
            }
        }
    }

    const SourceUnit &unit_;
    TargetBinding binding_;
    Decomposition decomposition_ = Decomposition::cross_product;
    std::map<std::string, const GridDecl *> grid_of_;
    std::vector<FnParam> params_;
};

int slot_of(const KernelDecl &k, const std::string &name) {
    for (std::size_t s = 0; s < k.params.size(); ++s)
        if (k.params[s].name == name)
            return static_cast<int>(s);
    return -1;
}

std::int64_t delta_of(const OffsetVector &o, const IndexScheme &scheme) {
    std::int64_t d = 0;
    for (int k = 0; k < o.dims; ++k)
        d += o[k] * scheme.stride(k);
    return d;
}

std::string plus_delta(const std::string &base, std::int64_t d) {
    if (d == 0)
        return base;
    return base + (d > 0 ? " + " + std::to_string(d) : " - " + std::to_string(-d));
}

/// Fully parenthesised C for an expanded expression. `read` renders one grid
/// access.
std::string expr_c(const Expr &e, DType dtype,
                   const std::function<std::string(const Expr &)> &read) {
    switch (e.kind) {
    case Expr::Kind::constant: return c_literal(e.text, dtype);
    case Expr::Kind::read: return read(e);
    case Expr::Kind::local: throw CompileError(e.pos, "unexpanded temporary '" + e.text + "'");
    case Expr::Kind::unary: return "(-" + expr_c(*e.lhs, dtype, read) + ")";
    case Expr::Kind::binary:
        return "(" + expr_c(*e.lhs, dtype, read) + " " + binop_symbol(e.binop) + " " +
               expr_c(*e.rhs, dtype, read) + ")";
    }
    return {};
}

std::string flat_read(const MapSite &m, const Expr &e, const std::string &idx) {
    return m.args[static_cast<std::size_t>(slot_of(*m.kernel, e.text))] + "[" +
           plus_delta(idx, delta_of(e.offset, m.scheme)) + "]";
}

/// `dst[c] = ...;` for every update of the kernel.
void emit_point(Writer &w, const MapSite &m) {
    w.line("const long long c = " + m.scheme.c_flat(var_list(m.info.dims)) + ";");
    for (const KernelStmt *u : m.kernel->updates()) {
        const std::string dst = m.args[static_cast<std::size_t>(slot_of(*m.kernel, u->name))];
        w.line(dst + "[c] = " +
               expr_c(*m.kernel->expanded(*u), m.layout->dtype,
                      [&](const Expr &r) { return flat_read(m, r, "c"); }) +
               ";");
    }
}

std::string region_comment(const MapSite &m, const Region &r) {
    return "/* " + m.kernel->name + ": " + (r.code.empty() ? "unified" : r.code) + " " +
           r.str() + " */";
}

// Box bounds as C expressions, per dimension.
struct Box {
    std::vector<std::string> lo, hi;
};

Box region_box(const Region &r) {
    Box b;
    for (int d = 0; d < r.dims; ++d) {
        b.lo.push_back(std::to_string(r.lo[static_cast<std::size_t>(d)]));
        b.hi.push_back(std::to_string(r.hi[static_cast<std::size_t>(d)]));
    }
    return b;
}

/// Nested ascending loops over a box; `inner` emits the innermost body.
void emit_nest(Writer &w, const Box &b, int from, const std::function<void()> &inner) {
    const int dims = static_cast<int>(b.lo.size());
    for (int d = from; d < dims; ++d)
        w.open("for (long long " + std::string(kVars[d]) + " = " + b.lo[static_cast<std::size_t>(d)] +
               "; " + kVars[d] + " < " + b.hi[static_cast<std::size_t>(d)] + "; ++" + kVars[d] +
               ")");
    inner();
    for (int d = from; d < dims; ++d)
        w.close();
}

// ---- Semi-stencil body -----------------------------------------------------

struct SemiSplit {
    std::string dst;
    std::vector<std::pair<double, std::string>> forward, backward; // coef, read
    double constant = 0;
};

std::vector<SemiSplit> semi_split(const MapSite &m) {
    if (m.info.shape != StencilShape::star)
        throw CompileError(m.kernel->pos, "Semi-stencil needs a star-shaped stencil; kernel '" +
                                              m.kernel->name + "' is " +
                                              std::string(shape_name(m.info.shape)));
    std::vector<SemiSplit> out;
    for (const KernelStmt *u : m.kernel->updates()) {
        auto form = linearize(*m.kernel->expanded(*u), m.layout->dtype);
        if (!form)
            throw CompileError(u->pos, "Semi-stencil needs an update that is linear in the grid "
                                       "reads");
        SemiSplit s;
        s.dst = m.args[static_cast<std::size_t>(slot_of(*m.kernel, u->name))];
        s.constant = form->constant;
        for (const LinearTerm &t : form->terms) {
            bool negative = false;
            for (int d = 0; d < t.offset.dims; ++d)
                negative = negative || t.offset[d] < 0;
            std::string rd = m.args[static_cast<std::size_t>(slot_of(*m.kernel, t.grid))] + "[" +
                             plus_delta("c", delta_of(t.offset, m.scheme)) + "]";
            (negative ? s.forward : s.backward).emplace_back(t.coef, rd);
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// Forward pass ascending into `partial`, backward pass descending.
void emit_semi_box(Writer &w, const MapSite &m, const std::vector<SemiSplit> &split,
                   const Box &b) {
    const DType dt = m.layout->dtype;
    const std::string T = ctype(dt);
    const int dims = m.info.dims;
    std::string count;
    for (int d = 0; d < dims; ++d)
        count += (d ? " * " : "") + std::string("(") + b.hi[static_cast<std::size_t>(d)] + " - " +
                 b.lo[static_cast<std::size_t>(d)] + ")";
    w.open("");
    w.line(T + " *partial = (" + T + " *)malloc(sizeof(" + T + ") * (size_t)(" + count + "));");
    w.line("long long n = 0;");
    for (const SemiSplit &s : split) {
        auto term = [&](const std::pair<double, std::string> &t) {
            return "(" + c_real(t.first, dt) + " * " + t.second + ")";
        };
        std::string fwd = s.forward.empty() ? c_literal("0", dt) : term(s.forward[0]);
        for (std::size_t k = 1; k < s.forward.size(); ++k)
            fwd = "(" + fwd + " + " + term(s.forward[k]) + ")";
        std::string bwd = "partial[n]";
        for (const auto &t : s.backward)
            bwd = "(" + bwd + " + " + term(t) + ")";
        if (s.constant != 0)
            bwd = "(" + bwd + " + " + c_real(s.constant, dt) + ")";

        w.line("/* forward update */");
        emit_nest(w, b, 0, [&] {
            w.line("const long long c = " + m.scheme.c_flat(var_list(dims)) + ";");
            w.line("partial[n++] = " + fwd + ";");
        });
        w.line("/* backward update */");
        for (int d = 0; d < dims; ++d) {
            auto i = static_cast<std::size_t>(d);
            w.open("for (long long " + std::string(kVars[d]) + " = " + b.hi[i] + " - 1; " +
                   kVars[d] + " >= " + b.lo[i] + "; --" + kVars[d] + ")");
        }
        w.line("const long long c = " + m.scheme.c_flat(var_list(dims)) + ";");
        w.line("--n;");
        w.line(s.dst + "[c] = " + bwd + ";");
        for (int d = 0; d < dims; ++d)
            w.close();
    }
    w.line("free(partial);");
    w.close();
}

// ---- CPU emission ----------------------------------------------------------

enum class CpuMode { serial, omp };

struct CpuConfig {
    CpuMode mode = CpuMode::serial;
    OmpPlan plan;
};

class CpuEmitter {
public:
    CpuEmitter(const TargetView &view, const CpuConfig &cfg) : view_(view), cfg_(cfg) {}

    std::string function() {
        Writer &w = w_;
        w.open(view_.prototype());
        const bool tasks = cfg_.mode == CpuMode::omp && cfg_.plan.tmpl == OmpTemplate::tasks_blocking;
        const bool taskloop = cfg_.mode == CpuMode::omp && cfg_.plan.tmpl == OmpTemplate::taskloop;
        if (tasks || taskloop) {
            w.line("#pragma omp parallel default(shared)");
            w.line(tasks ? "#pragma omp master" : "#pragma omp single");
            w.open("");
        }
        body(view_.target().body);
        if (tasks || taskloop)
            w.close();
        w.close();
        return w.take();
    }

private:
    void body(const std::vector<Stmt> &stmts) {
        for (const Stmt &s : stmts) {
            switch (s.kind) {
            case Stmt::Kind::for_range: {
                const std::string v = "it_" + s.var;
                w_.open("for (long long " + v + " = 0; " + v + " < " + view_.count_expr(s.count) +
                        "; ++" + v + ")");
                body(s.body);
                w_.close();
                break;
            }
            case Stmt::Kind::swap: {
                const std::string a = cname(s.a), b = cname(s.b);
                std::string T = "float";
                for (const auto &p : view_.params())
                    if (p.name == a && p.is_grid)
                        T = ctype(p.grid->dtype);
                w_.line("{ " + T + " *tmp_ = " + a + "; " + a + " = " + b + "; " + b +
                        " = tmp_; }");
                break;
            }
            case Stmt::Kind::map: map(view_.site(s)); break;
            }
        }
    }

    void map(const MapSite &m) {
        const bool omp = cfg_.mode == CpuMode::omp;
        const bool semi = omp && cfg_.plan.algorithm == OmpAlgorithm::semi;
        std::vector<SemiSplit> split;
        if (semi)
            split = semi_split(m);
        auto box_body = [&](const Box &b, int from) {
            if (semi)
                emit_semi_box(w_, m, split, b);
            else
                emit_nest(w_, b, from, [&] { emit_point(w_, m); });
        };
        for (const Region &r : m.regions) {
            w_.line(region_comment(m, r));
            const Box rb = region_box(r);
            if (!omp) {
                box_body(rb, 0);
                continue;
            }
            switch (cfg_.plan.tmpl) {
            case OmpTemplate::loop:
            case OmpTemplate::taskloop:
                w_.line(cfg_.plan.tmpl == OmpTemplate::loop
                            ? "#pragma omp parallel for default(shared) schedule(runtime)"
                            : "#pragma omp taskloop");
                if (!semi) {
                    emit_nest(w_, rb, 0, [&] { emit_point(w_, m); });
                } else {
                    // one outer row per iteration, processed as a box
                    w_.open("for (long long i0 = " + rb.lo[0] + "; i0 < " + rb.hi[0] + "; ++i0)");
                    Box row = rb;
                    row.lo[0] = "r0";
                    row.hi[0] = "r0 + 1";
                    w_.line("const long long r0 = i0;");
                    box_body(row, 0);
                    w_.close();
                }
                break;
            case OmpTemplate::loop_blocking:
            case OmpTemplate::loop_blocking_collapse:
            case OmpTemplate::tasks_blocking: blocked(m, rb, box_body); break;
            }
        }
        if (omp && cfg_.plan.tmpl == OmpTemplate::tasks_blocking)
            w_.line("#pragma omp taskwait");
    }

    void blocked(const MapSite &m, const Box &rb,
                 const std::function<void(const Box &, int)> &box_body) {
        const auto &bs = *cfg_.plan.block;
        const int bdims = std::min(m.info.dims, 2);
        if (cfg_.plan.tmpl == OmpTemplate::loop_blocking)
            w_.line("#pragma omp parallel for default(shared) schedule(runtime)");
        else if (cfg_.plan.tmpl == OmpTemplate::loop_blocking_collapse)
            w_.line(bdims == 2
                        ? "#pragma omp parallel for default(shared) schedule(runtime) collapse(2)"
                        : "#pragma omp parallel for default(shared) schedule(runtime)");
        Box inner = rb;
        for (int d = 0; d < bdims; ++d) {
            auto i = static_cast<std::size_t>(d);
            const std::string bv = "b" + std::to_string(d);
            const std::string step = std::to_string(bs[i]);
            w_.open("for (long long " + bv + " = " + rb.lo[i] + "; " + bv + " < " + rb.hi[i] +
                    "; " + bv + " += " + step + ")");
            inner.lo[i] = bv;
            inner.hi[i] = "STENCILC_MIN(" + bv + " + " + step + ", " + rb.hi[i] + ")";
        }
        if (cfg_.plan.tmpl == OmpTemplate::tasks_blocking) {
            w_.line("#pragma omp task");
            w_.open("");
            box_body(inner, 0);
            w_.close();
        } else {
            box_body(inner, 0);
        }
        for (int d = 0; d < bdims; ++d)
            w_.close();
    }

    const TargetView &view_;
    const CpuConfig &cfg_;
    Writer w_;
};

std::string file_header(const TargetView &v, std::string_view backend, std::string_view tmpl,
                        const std::string &fingerprint) {
    return "/* stencilc: target " + v.target().name + ", backend " + std::string(backend) +
           ", template " + std::string(tmpl) + " */\n/* plan " + fingerprint + " */\n";
}

std::string cpu_source(const TargetView &view, const CpuConfig &cfg, std::string_view backend,
                       std::string_view tmpl, const std::string &fingerprint) {
    std::string s = file_header(view, backend, tmpl, fingerprint);
    s += "\n#include <stddef.h>\n#include <stdlib.h>\n";
    if (cfg.mode == CpuMode::omp)
        s += "#include <omp.h>\n";
    s += "\n#define STENCILC_MIN(a, b) ((a) < (b) ? (a) : (b))\n\n";
    s += CpuEmitter(view, cfg).function();
    return s;
}

} // namespace

GeneratedArtifact gen_serial(const SourceUnit &unit, const CodegenOptions &opts) {
    TargetView view(unit, opts);
    GeneratedArtifact a;
    a.backend = BackendKind::seq;
    a.entry = view.entry();
    a.fingerprint = hex16(fnv1a(print_source(unit) + "|seq|" + opts_key(opts)));
    a.files.push_back({"kernel_" + view.first_kernel() + "_seq_serial.c",
                       cpu_source(view, CpuConfig{}, "seq", "serial", a.fingerprint)});
    return a;
}

GeneratedArtifact gen_openmp(const SourceUnit &unit, const OmpPlan &plan,
                             const CodegenOptions &opts) {
    TargetView view(unit, opts);
    if (uses_blocking(plan.tmpl) && !plan.block)
        throw CompileError(SourcePos{}, "template '" + std::string(omp_template_name(plan.tmpl)) +
                                            "' needs blockDims");
    CodegenOptions o = opts;
    o.decomposition = plan.decomposition;
    TargetView planned(unit, o);
    GeneratedArtifact a;
    a.backend = BackendKind::omp;
    a.entry = planned.entry();
    a.fingerprint = hex16(fnv1a(print_source(unit) + "|omp|" + plan.str() + "|" + opts_key(o)));
    std::string tmpl(omp_template_name(plan.tmpl));
    if (plan.algorithm == OmpAlgorithm::semi)
        tmpl += "_semi";
    CpuConfig cfg{CpuMode::omp, plan};
    a.files.push_back({"kernel_" + planned.first_kernel() + "_omp_" + tmpl + ".c",
                       cpu_source(planned, cfg, "omp", tmpl, a.fingerprint)});
    return a;
}

// ---- GPU -------------------------------------------------------------------

namespace {

// Thread axis per grid dimension: x along the last (contiguous) dimension.
const char *thread_axis(int d, int dims) {
    static const char *axes[] = {"x", "y", "z"};
    return axes[dims - 1 - d];
}

class GpuEmitter {
public:
    GpuEmitter(const TargetView &view, const GpuPlan &plan) : view_(view), plan_(plan) {}

    std::string source(const std::string &fingerprint) {
        collect(view_.target().body);
        std::string s = file_header(view_, "gpu", gpu_template_name(plan_.tmpl), fingerprint);
        s += "\n#include <cuda_runtime.h>\n";
        if (plan_.async_memcpy)
            s += "#include <cuda_pipeline.h>\n";
        s += "\n#define STENCILC_MIN(a, b) ((a) < (b) ? (a) : (b))\n";
        for (const auto &[key, m] : kernels_) {
            if (is_streaming(plan_.tmpl))
                s += "\n" + plane_helper(key, m);
            s += "\n";
            s += kernel(key, m);
        }
        s += "\n";
        s += host();
        return s;
    }

private:
    static std::string key_of(const MapSite &m) {
        std::string k = m.kernel->name;
        for (auto e : m.layout->shape)
            k += "_" + std::to_string(e);
        return k + "_o" + std::to_string(m.layout->order);
    }

    void collect(const std::vector<Stmt> &stmts) {
        for (const Stmt &s : stmts) {
            if (s.kind == Stmt::Kind::for_range)
                collect(s.body);
            else if (s.kind == Stmt::Kind::map) {
                MapSite m = view_.site(s);
                kernels_.try_emplace(key_of(m), m);
            }
        }
    }

    std::string kernel_name(const std::string &key) const {
        std::size_t n = 0;
        for (const auto &[k, m] : kernels_) {
            if (k == key)
                break;
            ++n;
        }
        return "k" + std::to_string(n) + "_" + kernels_.at(key).kernel->name;
    }

    std::string signature(const std::string &key, const MapSite &m) const {
        const std::string T = ctype(m.layout->dtype);
        std::string s = "__global__ void " + kernel_name(key) + "(";
        const auto updates = m.kernel->updates();
        for (std::size_t p = 0; p < m.kernel->params.size(); ++p) {
            const std::string &pn = m.kernel->params[p].name;
            const bool written = std::any_of(updates.begin(), updates.end(),
                                             [&](const KernelStmt *u) { return u->name == pn; });
            s += (written ? T + " *__restrict__ " : "const " + T + " *__restrict__ ") + cname(pn) +
                 ", ";
        }
        for (int d = 0; d < m.info.dims; ++d)
            s += "long long lo" + std::to_string(d) + ", long long hi" + std::to_string(d) +
                 (d + 1 < m.info.dims ? ", " : "");
        return s + ")";
    }

    // Kernel bodies read through the kernel's own parameter names.
    MapSite local_site(const MapSite &m) const {
        MapSite l = m;
        for (std::size_t p = 0; p < m.kernel->params.size(); ++p)
            l.args[p] = cname(m.kernel->params[p].name);
        return l;
    }

    std::string update_lines(Writer &w, const MapSite &m,
                             const std::function<std::string(const Expr &)> &read,
                             const std::string &store_idx) const {
        std::string last;
        for (const KernelStmt *u : m.kernel->updates()) {
            const std::string dst = m.args[static_cast<std::size_t>(slot_of(*m.kernel, u->name))];
            w.line(dst + "[" + store_idx + "] = " +
                   expr_c(*m.kernel->expanded(*u), m.layout->dtype, read) + ";");
            last = dst;
        }
        return last;
    }

    void thread_index(Writer &w, const MapSite &m, int d, const std::string &scale = "") const {
        const std::string ax = thread_axis(d, m.info.dims);
        const std::string v = kVars[d];
        w.line("const long long " + v + " = lo" + std::to_string(d) + " + ((long long)blockIdx." +
               ax + " * blockDim." + ax + " + threadIdx." + ax + ")" + scale + ";");
    }

    std::string guard(const MapSite &, int from, int to) const {
        std::string g;
        for (int d = from; d < to; ++d)
            g += (g.empty() ? "" : " || ") + std::string(kVars[d]) + " >= hi" + std::to_string(d);
        return g;
    }

    std::string kernel(const std::string &key, const MapSite &site) {
        const MapSite m = local_site(site);
        Writer w;
        w.open(signature(key, m));
        switch (plan_.tmpl) {
        case GpuTemplate::gmem: gmem(w, m); break;
        case GpuTemplate::smem: smem(w, m); break;
        case GpuTemplate::f4: f4(w, m); break;
        case GpuTemplate::shift:
        case GpuTemplate::unroll:
        case GpuTemplate::semi: streaming(w, m); break;
        }
        w.close();
        return w.take();
    }

    void gmem(Writer &w, const MapSite &m) {
        const int dims = m.info.dims;
        for (int d = dims - 1; d >= 0; --d)
            thread_index(w, m, d);
        w.line("if (" + guard(m, 0, dims) + ")");
        w.line("    return;");
        emit_point(w, m);
    }

    std::array<int, kMaxDims> block_extent(int dims) const {
        std::array<int, kMaxDims> b{1, 1, 1};
        for (int d = 0; d < dims; ++d)
            b[static_cast<std::size_t>(d)] = plan_.block[static_cast<std::size_t>(dims - 1 - d)];
        return b;
    }

    std::vector<std::string> read_params(const MapSite &m) const {
        std::vector<std::string> out;
        for (const auto &[g, offs] : m.info.offsets)
            out.push_back(g);
        return out;
    }

    void smem(Writer &w, const MapSite &m) {
        const int dims = m.info.dims, R = m.info.radius;
        const std::string T = ctype(m.layout->dtype);
        auto be = block_extent(dims);
        std::string tdims, tcount = "1", threads = "1";
        std::vector<std::string> textent;
        for (int d = 0; d < dims; ++d) {
            textent.push_back(std::to_string(be[static_cast<std::size_t>(d)] + 2 * R));
            tdims += "[" + textent.back() + "]";
            tcount += " * " + textent.back();
            threads += " * " + std::to_string(be[static_cast<std::size_t>(d)]);
        }
        for (const auto &g : read_params(m))
            w.line("__shared__ " + T + " tile_" + cname(g) + tdims + ";");
        for (int d = 0; d < dims; ++d)
            w.line("const long long base" + std::to_string(d) + " = lo" + std::to_string(d) +
                   " + (long long)blockIdx." + thread_axis(d, dims) + " * " +
                   std::to_string(be[static_cast<std::size_t>(d)]) + ";");
        std::string tid = "threadIdx.x";
        if (dims >= 2)
            tid = "threadIdx.y * blockDim.x + threadIdx.x";
        if (dims == 3)
            tid = "(threadIdx.z * blockDim.y + threadIdx.y) * blockDim.x + threadIdx.x";
        w.line("/* cooperative load of the tile and its halo */");
        w.open("for (int s = " + tid + "; s < " + tcount + "; s += " + threads + ")");
        std::string div = "1";
        std::vector<std::string> tvars;
        for (int d = dims - 1; d >= 0; --d) {
            const std::string tv = "t" + std::to_string(d);
            w.line("const int " + tv + " = (s / (" + div + ")) % " +
                   textent[static_cast<std::size_t>(d)] + ";");
            div += " * " + textent[static_cast<std::size_t>(d)];
        }
        std::vector<std::string> gv;
        std::string inside;
        for (int d = 0; d < dims; ++d) {
            const std::string g = "g" + std::to_string(d);
            w.line("const long long " + g + " = base" + std::to_string(d) + " + t" +
                   std::to_string(d) + " - " + std::to_string(R) + ";");
            gv.push_back(g);
            inside += (inside.empty() ? "" : " && ") + g + " < hi" + std::to_string(d) + " + " +
                      std::to_string(R);
        }
        std::string tidx;
        for (int d = 0; d < dims; ++d)
            tidx += "[t" + std::to_string(d) + "]";
        for (const auto &g : read_params(m)) {
            const std::string src = cname(g) + "[" + m.scheme.c_flat(gv) + "]";
            if (plan_.async_memcpy) {
                w.line("if (" + inside + ")");
                w.line("    __pipeline_memcpy_async(&tile_" + cname(g) + tidx + ", &" + src +
                       ", sizeof(" + T + "));");
                w.line("else");
                w.line("    tile_" + cname(g) + tidx + " = " + c_literal("0", m.layout->dtype) +
                       ";");
            } else {
                w.line("tile_" + cname(g) + tidx + " = (" + inside + ") ? " + src + " : " +
                       c_literal("0", m.layout->dtype) + ";");
            }
        }
        w.close();
        if (plan_.async_memcpy) {
            w.line("__pipeline_commit();");
            w.line("__pipeline_wait_prior(0);");
        }
        w.line("__syncthreads();");
        for (int d = dims - 1; d >= 0; --d)
            w.line("const long long " + std::string(kVars[d]) + " = base" + std::to_string(d) +
                   " + threadIdx." + thread_axis(d, dims) + ";");
        w.line("if (" + guard(m, 0, dims) + ")");
        w.line("    return;");
        w.line("const long long c = " + m.scheme.c_flat(var_list(dims)) + ";");
        update_lines(
            w, m,
            [&](const Expr &r) {
                std::string s = "tile_" + cname(r.text);
                for (int d = 0; d < dims; ++d)
                    s += "[threadIdx." + std::string(thread_axis(d, dims)) + " + " +
                         std::to_string(R + r.offset[d]) + "]";
                return s;
            },
            "c");
    }

    void f4(Writer &w, const MapSite &m) {
        const int dims = m.info.dims, last = dims - 1;
        const DType dt = m.layout->dtype;
        const std::string V = dt == DType::f32 ? "float4" : "double4";
        for (int d = last; d >= 0; --d)
            thread_index(w, m, d, d == last ? " * 4" : "");
        if (last > 0) {
            w.line("if (" + guard(m, 0, last) + ")");
            w.line("    return;");
        }
        w.line("if (" + std::string(kVars[last]) + " >= hi" + std::to_string(last) + ")");
        w.line("    return;");
        w.line("const long long c = " + m.scheme.c_flat(var_list(dims)) + ";");
        static const char *comp[] = {"x", "y", "z", "w"};
        for (const KernelStmt *u : m.kernel->updates()) {
            const std::string dst = m.args[static_cast<std::size_t>(slot_of(*m.kernel, u->name))];
            const ExprPtr e = m.kernel->expanded(*u);
            w.line(V + " out_" + dst + ";");
            for (int l = 0; l < 4; ++l) {
                // component l is the point l steps along the contiguous dimension
                const std::string cl = plus_delta("c", l);
                w.line("out_" + dst + "." + comp[l] + " = " +
                       expr_c(*e, dt, [&](const Expr &r) { return flat_read(m, r, cl); }) + ";");
            }
            w.open("if (" + std::string(kVars[last]) + " + 4 <= hi" + std::to_string(last) +
                   " && (c & 3) == 0)");
            w.line("*reinterpret_cast<" + V + " *>(&" + dst + "[c]) = out_" + dst + ";");
            w.close();
            w.open("else");
            for (int l = 0; l < 4; ++l)
                w.line("if (" + std::string(kVars[last]) + " + " + std::to_string(l) + " < hi" +
                       std::to_string(last) + ") " + dst + "[" + plus_delta("c", l) + "] = out_" +
                       dst + "." + comp[l] + ";");
            w.close();
        }
    }

    void streaming(Writer &w, const MapSite &m) {
        const int dims = m.info.dims, R = m.info.radius, W = 2 * R + 1;
        const DType dt = m.layout->dtype;
        const std::string T = ctype(dt);
        const bool regs = plan_.mem_type == MemType::registers;
        const std::string zero = c_literal("0", dt);
        const std::string pw = std::to_string(plane_w(m)), ph = std::to_string(plane_h(m));
        const int ry = dims == 3 ? R : 0;
        const std::string helper = "plane_" + kernel_name(key_of(m));

        // in-plane coordinates: x along the last dimension, y along dim 1 in 3D
        const int last = dims - 1;
        w.line("const long long b" + std::to_string(last) + " = lo" + std::to_string(last) +
               " + (long long)blockIdx.x * " + std::to_string(plan_.plane[0]) + ";");
        w.line("const long long " + std::string(kVars[last]) + " = b" + std::to_string(last) +
               " + threadIdx.x;");
        if (dims == 3) {
            w.line("const long long b1 = lo1 + (long long)blockIdx.y * " +
                   std::to_string(plan_.plane[1]) + ";");
            w.line("const long long i1 = b1 + threadIdx.y;");
        }
        w.line("const bool active = !(" + guard(m, 1, dims) + ");");
        const std::string hargs = dims == 3 ? "b1, b2, hi1, hi2" : "0, b1, 0, hi1";
        std::vector<std::string> reads = read_params(m);
        for (const auto &g : reads) {
            const std::string n = cname(g);
            if (regs) {
                w.line(T + " r_" + n + "[" + std::to_string(W) + "];");
                w.line("__shared__ " + T + " plane_" + n + "[" + ph + "][" + pw + "];");
            } else {
                w.line("__shared__ " + T + " win_" + n + "[" + std::to_string(W) + "][" + ph +
                       "][" + pw + "];");
            }
            if (plan_.prefetch)
                w.line(T + " next_" + n + " = " + zero + ";");
        }
        std::vector<std::string> at{"z"};
        for (int d = 1; d < dims; ++d)
            at.emplace_back(kVars[d]);
        auto own = [&](const std::string &z) {
            std::vector<std::string> v = at;
            v[0] = z;
            return m.scheme.c_flat(v);
        };
        auto fill = [&](const std::string &n, const std::string &slot, const std::string &z) {
            if (regs)
                w.line("r_" + n + "[" + slot + "] = active ? " + n + "[" + own(z) + "] : " + zero +
                       ";");
            else
                w.line(helper + "(win_" + n + "[" + slot + "], " + n + ", " + z + ", " + hargs +
                       ");");
        };

        w.line("/* fill the window with the planes before the first output plane */");
        w.open("for (int k = 0; k < " + std::to_string(W - 1) + "; ++k)");
        w.line("const long long z = lo0 - " + std::to_string(R) + " + k;");
        for (const auto &g : reads)
            fill(cname(g), "k", "z");
        w.close();

        const bool shift = plan_.tmpl == GpuTemplate::shift;
        const int phases = shift ? 1 : W;
        w.open("for (long long i0 = lo0; i0 < hi0; i0 += " + std::to_string(phases) + ")");
        for (int p = 0; p < phases; ++p) {
            if (!shift) {
                w.line("/* phase " + std::to_string(p) + " */");
                w.open("if (i0 + " + std::to_string(p) + " < hi0)");
                w.line("const long long zc = i0 + " + std::to_string(p) + ";");
            } else {
                w.open("");
                w.line("const long long zc = i0;");
            }
            // the slot receiving the leading plane zc + R
            const int lead = shift ? W - 1 : (p + W - 1) % W;
            const int centre = shift ? R : (p + R) % W;
            const std::string zl = "zc + " + std::to_string(R);
            for (const auto &g : reads) {
                const std::string n = cname(g);
                if (plan_.prefetch && regs)
                    w.line("r_" + n + "[" + std::to_string(lead) + "] = next_" + n + ";");
                else
                    fill(n, std::to_string(lead), zl);
                if (regs)
                    w.line(helper + "(plane_" + n + ", " + n + ", zc, " + hargs + ");");
            }
            if (plan_.async_memcpy) {
                w.line("__pipeline_commit();");
                w.line("__pipeline_wait_prior(0);");
            }
            w.line("__syncthreads();");
            if (plan_.prefetch && regs) {
                w.line("/* prefetch the next leading plane while this one is computed */");
                for (const auto &g : reads)
                    w.line("next_" + cname(g) + " = active ? " + cname(g) + "[" +
                           own("zc + " + std::to_string(R + 1)) + "] : " + zero + ";");
            }
            w.open("if (active)");
            w.line("const long long c = " + own("zc") + ";");
            auto read = [&, centre](const Expr &r) {
                const std::string n = cname(r.text);
                const int dz = r.offset[0];
                const int slot = ((centre + dz) % W + W) % W;
                std::string in = dims == 3 ? "[threadIdx.y + " + std::to_string(ry + r.offset[1]) +
                                                 "][threadIdx.x + " +
                                                 std::to_string(R + r.offset[2]) + "]"
                                           : "[0][threadIdx.x + " +
                                                 std::to_string(R + r.offset[1]) + "]";
                if (regs)
                    return dz != 0 ? "r_" + n + "[" + std::to_string(slot) + "]" : "plane_" + n + in;
                return "win_" + n + "[" + std::to_string(slot) + "]" + in;
            };
            if (plan_.tmpl == GpuTemplate::semi)
                semi_phase(w, m, read);
            else
                update_lines(w, m, read, "c");
            w.close();
            w.line("__syncthreads();");
            if (shift) {
                w.line("/* shift the window down by one plane */");
                for (const auto &g : reads) {
                    const std::string n = cname(g);
                    if (regs) {
                        for (int k = 0; k + 1 < W; ++k)
                            w.line("r_" + n + "[" + std::to_string(k) + "] = r_" + n + "[" +
                                   std::to_string(k + 1) + "];");
                        continue;
                    }
                    w.open("for (int s = threadIdx.y * blockDim.x + threadIdx.x; s < " + ph +
                           " * " + pw + "; s += blockDim.x * blockDim.y)");
                    for (int k = 0; k + 1 < W; ++k)
                        w.line("win_" + n + "[" + std::to_string(k) + "][s / " + pw + "][s % " +
                               pw + "] = win_" + n + "[" + std::to_string(k + 1) + "][s / " + pw +
                               "][s % " + pw + "];");
                    w.close();
                }
                if (!regs)
                    w.line("__syncthreads();");
            }
            w.close();
        }
        w.close();
    }

    int plane_w(const MapSite &m) const { return plan_.plane[0] + 2 * m.info.radius; }
    int plane_h(const MapSite &m) const {
        return m.info.dims == 3 ? plan_.plane[1] + 2 * m.info.radius : 1;
    }

    /// Cooperative load of one plane (with halo) into scratch memory; points
    /// past the padded grid read as zero.
    std::string plane_helper(const std::string &key, const MapSite &m) const {
        const int dims = m.info.dims, R = m.info.radius, ry = dims == 3 ? R : 0;
        const std::string T = ctype(m.layout->dtype);
        const std::string pw = std::to_string(plane_w(m)), ph = std::to_string(plane_h(m));
        Writer w;
        w.open("__device__ void plane_" + kernel_name(key) + "(" + T + " (*dst)[" + pw +
               "], const " + T + " *g, long long z, long long b1, long long b2, long long hi1, "
               "long long hi2)");
        w.open("for (int s = threadIdx.y * blockDim.x + threadIdx.x; s < " + ph + " * " + pw +
               "; s += blockDim.x * blockDim.y)");
        w.line("const int y = s / " + pw + ", x = s % " + pw + ";");
        w.line("const long long g1 = b1 - " + std::to_string(ry) + " + y, g2 = b2 - " +
               std::to_string(R) + " + x;");
        std::vector<std::string> v = dims == 3 ? std::vector<std::string>{"z", "g1", "g2"}
                                               : std::vector<std::string>{"z", "g2"};
        const std::string src = "g[" + m.scheme.c_flat(v) + "]";
        const std::string inside = dims == 3 ? "g1 < hi1 + " + std::to_string(ry) +
                                                   " && g2 < hi2 + " + std::to_string(R)
                                             : "g2 < hi2 + " + std::to_string(R);
        if (plan_.async_memcpy) {
            w.line("if (" + inside + ")");
            w.line("    __pipeline_memcpy_async(&dst[y][x], &" + src + ", sizeof(" + T + "));");
            w.line("else");
            w.line("    dst[y][x] = " + c_literal("0", m.layout->dtype) + ";");
        } else {
            w.line("dst[y][x] = (" + inside + ") ? " + src + " : " +
                   c_literal("0", m.layout->dtype) + ";");
        }
        w.close();
        w.close();
        return w.take();
    }

    void semi_phase(Writer &w, const MapSite &m,
                    const std::function<std::string(const Expr &)> &read) {
        const DType dt = m.layout->dtype;
        for (const KernelStmt *u : m.kernel->updates()) {
            auto form = linearize(*m.kernel->expanded(*u), dt);
            if (!form || m.info.shape != StencilShape::star)
                throw CompileError(u->pos, "the semi template needs a linear, star-shaped update");
            const std::string dst = m.args[static_cast<std::size_t>(slot_of(*m.kernel, u->name))];
            std::string fwd, bwd = "partial";
            auto term = [&](const LinearTerm &t) {
                auto e = Expr::read(t.grid, t.offset);
                return "(" + c_real(t.coef, dt) + " * " + read(*e) + ")";
            };
            for (const LinearTerm &t : form->terms) {
                bool negative = false;
                for (int d = 0; d < t.offset.dims; ++d)
                    negative = negative || t.offset[d] < 0;
                if (negative)
                    fwd = fwd.empty() ? term(t) : "(" + fwd + " + " + term(t) + ")";
                else
                    bwd = "(" + bwd + " + " + term(t) + ")";
            }
            if (form->constant != 0)
                bwd = "(" + bwd + " + " + c_real(form->constant, dt) + ")";
            w.line("/* forward update */");
            w.line(ctype(dt) + " partial = " + (fwd.empty() ? c_literal("0", dt) : fwd) + ";");
            w.line("/* backward update */");
            w.line(dst + "[c] = " + bwd + ";");
        }
    }

    std::string host() {
        Writer w;
        w.line("/* host stub: device pointers in, one launch per region */");
        w.open(view_.prototype());
        body(w, view_.target().body);
        w.line("cudaDeviceSynchronize();");
        w.close();
        return w.take();
    }

    void body(Writer &w, const std::vector<Stmt> &stmts) {
        for (const Stmt &s : stmts) {
            switch (s.kind) {
            case Stmt::Kind::for_range: {
                const std::string v = "it_" + s.var;
                w.open("for (long long " + v + " = 0; " + v + " < " + view_.count_expr(s.count) +
                       "; ++" + v + ")");
                body(w, s.body);
                w.close();
                break;
            }
            case Stmt::Kind::swap: {
                std::string T = "float";
                for (const auto &p : view_.params())
                    if (p.name == cname(s.a) && p.is_grid)
                        T = ctype(p.grid->dtype);
                w.line("{ " + T + " *tmp_ = " + cname(s.a) + "; " + cname(s.a) + " = " +
                       cname(s.b) + "; " + cname(s.b) + " = tmp_; }");
                break;
            }
            case Stmt::Kind::map: launch(w, view_.site(s)); break;
            }
        }
    }

    void launch(Writer &w, const MapSite &m) {
        const std::string name = kernel_name(key_of(m));
        const int dims = m.info.dims;
        const bool stream = is_streaming(plan_.tmpl);
        std::array<int, 3> threads{1, 1, 1};
        if (stream) {
            threads[0] = plan_.plane[0];
            threads[1] = dims == 3 ? plan_.plane[1] : 1;
        } else {
            for (int k = 0; k < dims; ++k)
                threads[static_cast<std::size_t>(k)] = plan_.block[static_cast<std::size_t>(k)];
        }
        for (const Region &r : m.regions) {
            w.line(region_comment(m, r));
            std::array<std::int64_t, 3> grid{1, 1, 1};
            for (int d = 0; d < dims; ++d) {
                if (stream && d == 0)
                    continue; // streamed inside the kernel
                const int k = dims - 1 - d;
                std::int64_t ext = r.hi[static_cast<std::size_t>(d)] - r.lo[static_cast<std::size_t>(d)];
                std::int64_t per = threads[static_cast<std::size_t>(k)];
                if (plan_.tmpl == GpuTemplate::f4 && d == dims - 1)
                    per *= 4;
                grid[static_cast<std::size_t>(k)] = (ext + per - 1) / per;
            }
            std::string args;
            for (const auto &a : m.args)
                args += a + ", ";
            for (int d = 0; d < dims; ++d)
                args += std::to_string(r.lo[static_cast<std::size_t>(d)]) + ", " +
                        std::to_string(r.hi[static_cast<std::size_t>(d)]) +
                        (d + 1 < dims ? ", " : "");
            w.line(name + "<<<dim3(" + std::to_string(grid[0]) + ", " + std::to_string(grid[1]) +
                   ", " + std::to_string(grid[2]) + "), dim3(" + std::to_string(threads[0]) +
                   ", " + std::to_string(threads[1]) + ", " + std::to_string(threads[2]) +
                   ")>>>(" + args + ");");
        }
    }

    const TargetView &view_;
    const GpuPlan &plan_;
    std::map<std::string, MapSite> kernels_;
};

} // namespace

GeneratedArtifact gen_gpu(const SourceUnit &unit, const GpuPlan &plan,
                          const CodegenOptions &opts) {
    CodegenOptions o = opts;
    o.decomposition = plan.decomposition;
    TargetView view(unit, o);
    GeneratedArtifact a;
    a.backend = BackendKind::gpu;
    a.entry = view.entry();
    a.fingerprint = hex16(fnv1a(print_source(unit) + "|gpu|" + plan.str() + "|" + opts_key(o)));
    GpuEmitter e(view, plan);
    std::string text = e.source(a.fingerprint);
    a.files.push_back({"kernel_" + view.first_kernel() + "_gpu_" +
                           std::string(gpu_template_name(plan.tmpl)) + ".cu",
                       std::move(text)});
    return a;
}

// ---- dataflow --------------------------------------------------------------

GeneratedArtifact gen_dataflow_program(const DataflowProgram &p) {
    std::ostringstream fp;
    fp << p.dump();
    GeneratedArtifact a;
    a.backend = BackendKind::dataflow;
    a.entry = "program.df";
    a.fingerprint = hex16(fnv1a(fp.str()));

    const PeLayout &l = p.layout;
    std::ostringstream lay;
    lay << "# stencilc dataflow layout\n";
    lay << "plan " << a.fingerprint << "\n";
    lay << "fabric " << l.fabric_x << " " << l.fabric_y << "\n";
    lay << "margins " << l.margins.north << " " << l.margins.east << " " << l.margins.south << " "
        << l.margins.west << "\n";
    // the active rectangle starts after the north and west buffer PEs
    lay << "active " << l.margins.north << " " << l.margins.west << " " << l.active_x << " "
        << l.active_y << "\n";
    lay << "nz " << l.nz << "\n";
    lay << "column_budget " << l.column_budget << "\n";
    lay << "dtype " << dtype_name(p.dtype) << "\n";
    lay << "program program.df\n";
    lay << "symbols";
    for (const auto &g : p.grids)
        lay << " " << g;
    lay << "\n";
    a.files.push_back({"layout.df", lay.str()});

    std::ostringstream o;
    o << "# stencilc dataflow program\n";
    o << "plan " << a.fingerprint << "\n";
    o << "kernel " << p.kernel << "\n";
    o << "target " << p.target << "\n";
    o << "dtype " << dtype_name(p.dtype) << "\n";
    o << "dims " << p.dims << "\n";
    o << "iterations " << p.machine.iterations << "\n";
    o << "read " << p.read_name << "\n";
    o << "write " << p.write_name << "\n";
    if (p.swap)
        o << "swap " << p.swap_a << " " << p.swap_b << "\n";
    for (const auto &[n, g] : p.bindings)
        o << "bind " << n << " " << g << "\n";
    o << "grids";
    for (const auto &g : p.grids)
        o << " " << g;
    o << "\n";
    o << "patterns";
    for (const auto &pat : p.order)
        o << " " << pat.str();
    o << "\n";
    o << "zmax";
    for (const auto &[pat, z] : p.patterns.zmax)
        o << " " << pat.str() << "=" << z;
    o << "\n";
    o << "\nroutes\n";
    for (const CommStep &s : p.schedule)
        for (const CommAction &c : s.actions)
            o << "  route " << s.key() << " " << dir_letter(c.quadrant) << " tx="
              << dir_letter(c.send_to) << " rx=" << dir_letter(c.recv_from) << "\n";
    o << "end\n";
    o << "\nschedule\n";
    for (const CommStep &s : p.schedule)
        for (const CommAction &c : s.actions)
            o << "  step " << s.key() << " " << dir_letter(c.quadrant) << " send " << c.send.str()
              << " " << dir_letter(c.send_to) << " recv " << dir_letter(c.recv_from) << " "
              << c.recv_into.str() << "\n";
    o << "end\n";
    o << "\nstates\n";
    for (const auto &s : p.machine.states) {
        o << "  " << s << " ->";
        const auto &next = p.machine.transitions.at(s);
        for (std::size_t k = 0; k < next.size(); ++k)
            o << (k ? " | " : " ") << next[k];
        o << "\n";
    }
    o << "end\n";
    o << "\nssa\n";
    for (const SsaOp &op : p.ssa.ops)
        o << "  " << op.str() << "\n";
    o << "  out t" << p.ssa.output << "\n";
    o << "end\n";
    a.files.push_back({"program.df", o.str()});
    return a;
}

// ---- host driver -----------------------------------------------------------

std::string gen_driver(const SourceUnit &unit, const GeneratedArtifact &artifact,
                       const CodegenOptions &opts) {
    if (artifact.backend != BackendKind::seq && artifact.backend != BackendKind::omp)
        throw CompileError(SourcePos{}, "a host driver needs a serial or OpenMP artifact");
    TargetView view(unit, opts);
    const std::size_t n = unit.grids.size();
    Writer w;
    w.line("/* stencilc host driver for " + artifact.entry + " */");
    w.line("#include <stdio.h>");
    w.line("#include <stdlib.h>");
    w.line("#include <string.h>");
    w.line("");
    w.line(view.prototype() + ";");
    w.line("");
    w.open("static void *load(const char *path, const unsigned char *header, size_t hlen, "
           "size_t bytes)");
    w.line("FILE *f = fopen(path, \"rb\");");
    w.line("unsigned char h[256];");
    w.line("void *data = malloc(bytes);");
    w.open("if (!f || fread(h, 1, hlen, f) != hlen || memcmp(h, header, hlen) != 0 || "
           "fread(data, 1, bytes, f) != bytes)");
    w.line("fprintf(stderr, \"%s: not a grid of the declared type and shape\\n\", path);");
    w.line("exit(1);");
    w.close();
    w.line("fclose(f);");
    w.line("return data;");
    w.close();
    w.line("");
    w.open("static void store(const char *path, const unsigned char *header, size_t hlen, "
           "const void *data, size_t bytes)");
    w.line("FILE *f = fopen(path, \"wb\");");
    w.open("if (!f || fwrite(header, 1, hlen, f) != hlen || fwrite(data, 1, bytes, f) != bytes)");
    w.line("fprintf(stderr, \"%s: write failed\\n\", path);");
    w.line("exit(1);");
    w.close();
    w.line("fclose(f);");
    w.close();
    w.line("");
    w.open("int main(int argc, char **argv)");
    w.open("if (argc != " + std::to_string(1 + 2 * n) + ")");
    std::string usage = "usage: %s";
    for (const auto &g : unit.grids)
        usage += " in_" + g.name;
    for (const auto &g : unit.grids)
        usage += " out_" + g.name;
    w.line("fprintf(stderr, \"" + usage + "\\n\", argv[0]);");
    w.line("return 2;");
    w.close();
    for (std::size_t k = 0; k < n; ++k) {
        const GridDecl &g = unit.grids[k];
        GridBuffer empty = GridBuffer::like(g);
        const std::string enc = encode_grid(empty);
        const std::size_t hlen = 8 + 16 + 8 * g.shape.size();
        std::string bytes;
        for (std::size_t b = 0; b < hlen; ++b)
            bytes += (b ? ", " : "") +
                     std::to_string(static_cast<unsigned>(static_cast<unsigned char>(enc[b])));
        const std::string T = ctype(g.dtype);
        const std::size_t count = static_cast<std::size_t>(IndexScheme::of(g).padded_size());
        w.line("static const unsigned char h_" + g.name + "[] = {" + bytes + "};");
        w.line(T + " *g_" + g.name + " = (" + T + " *)load(argv[" + std::to_string(1 + k) +
               "], h_" + g.name + ", sizeof h_" + g.name + ", sizeof(" + T + ") * " +
               std::to_string(count) + "u);");
    }
    std::string call = artifact.entry + "(";
    for (std::size_t k = 0; k < view.params().size(); ++k) {
        const FnParam &p = view.params()[k];
        if (k)
            call += ", ";
        if (p.is_grid) {
            call += "g_" + p.grid->name;
        } else {
            auto it = view.binding().ints.find(p.source);
            if (it == view.binding().ints.end())
                throw CompileError(SourcePos{}, "no value for integer parameter '" + p.source +
                                                    "'; pass one with --bind");
            call += std::to_string(it->second) + "LL";
        }
    }
    w.line(call + ");");
    for (std::size_t k = 0; k < n; ++k) {
        const GridDecl &g = unit.grids[k];
        const std::size_t count = static_cast<std::size_t>(IndexScheme::of(g).padded_size());
        w.line("store(argv[" + std::to_string(1 + n + k) + "], h_" + g.name + ", sizeof h_" +
               g.name + ", g_" + g.name + ", sizeof(" + ctype(g.dtype) + ") * " +
               std::to_string(count) + "u);");
    }
    w.line("return 0;");
    w.close();
    return w.take();
}

} // namespace stencilc
