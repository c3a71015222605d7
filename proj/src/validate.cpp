#include <algorithm>
#include <functional>
#include <set>

#include "stencilc/analysis.hpp"
#include "stencilc/frontend.hpp"

namespace stencilc {

const std::vector<std::string> &backend_param_keys(BackendKind k) {
    static const std::vector<std::string> seq{"decomposition"};
    static const std::vector<std::string> omp{"template", "algorithm", "blockDims",
                                              "decomposition"};
    static const std::vector<std::string> gpu{
        "computeCapability", "threadsPerBlock", "planeDims", "template", "memType",
        "prefetch",          "asyncMemcpy",     "padding",   "decomposition"};
    static const std::vector<std::string> dataflow{"fabricDims", "margins", "peMemory"};
    switch (k) {
    case BackendKind::seq: return seq;
    case BackendKind::omp: return omp;
    case BackendKind::gpu: return gpu;
    case BackendKind::dataflow: return dataflow;
    }
    return seq;
}

TargetBinding bind_target(const SourceUnit &unit, const std::string &target_name,
                          const std::map<std::string, std::int64_t> &overrides) {
    TargetBinding b;
    std::string name = target_name;
    if (name.empty() && unit.launch)
        name = unit.launch->target;
    if (name.empty() && unit.targets.size() == 1)
        name = unit.targets.front().name;
    b.target = unit.find_target(name);
    if (!b.target)
        return b;
    const bool launched = unit.launch && unit.launch->target == name;
    for (std::size_t i = 0; i < b.target->params.size(); ++i) {
        const Param &p = b.target->params[i];
        const LaunchArg *arg =
            launched && i < unit.launch->args.size() ? &unit.launch->args[i] : nullptr;
        if (p.type == "grid") {
            if (arg && arg->is_grid)
                b.grids[p.name] = arg->grid;
            else if (unit.find_grid(p.name))
                b.grids[p.name] = p.name;
        } else if (arg && !arg->is_grid) {
            b.ints[p.name] = arg->value;
        }
    }
    for (const auto &[k, v] : overrides)
        b.ints[k] = v;
    return b;
}

namespace {

class Validator {
public:
    explicit Validator(const SourceUnit &u) : u_(u) {}

    std::vector<Diagnostic> run() {
        check_names();
        for (const auto &k : u_.kernels)
            check_kernel(k);
        for (const auto &t : u_.targets)
            check_target(t);
        if (u_.launch)
            check_launch(*u_.launch);
        std::stable_sort(out_.begin(), out_.end(),
                         [](const Diagnostic &a, const Diagnostic &b) { return a.pos < b.pos; });
        return std::move(out_);
    }

private:
    void error(SourcePos pos, std::string msg) {
        out_.push_back({pos, Severity::error, std::move(msg)});
    }

    void check_names() {
        std::set<std::string> seen;
        auto note = [&](const std::string &n, SourcePos pos) {
            if (!seen.insert(n).second)
                error(pos, "duplicate definition of '" + n + "'");
        };
        for (const auto &g : u_.grids)
            note(g.name, g.pos);
        for (const auto &k : u_.kernels)
            note(k.name, k.pos);
        for (const auto &t : u_.targets)
            note(t.name, t.pos);
    }

    static int kernel_dims(const KernelDecl &k) {
        for (const auto &s : k.body)
            if (s.is_update)
                return s.offset.dims;
        return 0;
    }

    void check_kernel(const KernelDecl &k) {
        std::set<std::string> params;
        for (const auto &p : k.params) {
            if (p.type != "grid")
                error(p.pos, "kernel parameter '" + p.name + "' must be an st.grid");
            if (!params.insert(p.name).second)
                error(p.pos, "duplicate parameter '" + p.name + "'");
        }
        std::set<std::string> locals;
        std::set<std::string> dests;
        std::set<std::string> read_grids;
        std::function<void(const Expr &)> walk = [&](const Expr &e) {
            switch (e.kind) {
            case Expr::Kind::read:
                if (!params.contains(e.text))
                    error(e.pos, "'" + e.text + "' is not a grid parameter of kernel '" + k.name +
                                     "'");
                read_grids.insert(e.text);
                break;
            case Expr::Kind::local:
                if (!locals.contains(e.text))
                    error(e.pos, "unknown name '" + e.text + "'");
                break;
            case Expr::Kind::unary: walk(*e.lhs); break;
            case Expr::Kind::binary:
                walk(*e.lhs);
                walk(*e.rhs);
                break;
            case Expr::Kind::constant: break;
            }
        };
        bool any_update = false;
        for (const auto &s : k.body) {
            walk(*s.value);
            if (s.is_update) {
                any_update = true;
                if (!params.contains(s.name))
                    error(s.pos, "'" + s.name + "' is not a grid parameter of kernel '" + k.name +
                                     "'");
                if (!s.offset.is_zero())
                    error(s.pos, "update destination offset must be zero, found " +
                                     s.offset.str());
                if (!dests.insert(s.name).second)
                    error(s.pos, "grid '" + s.name + "' is updated more than once");
            } else {
                if (params.contains(s.name))
                    error(s.pos, "cannot assign to grid parameter '" + s.name + "'");
                else if (!locals.insert(s.name).second)
                    error(s.pos, "temporary '" + s.name + "' is assigned more than once");
            }
        }
        if (!any_update)
            error(k.pos, "kernel '" + k.name + "' has no grid update");
        for (const auto &d : dests)
            if (read_grids.contains(d))
                error(k.pos, "kernel '" + k.name + "' reads grid '" + d +
                                 "' which it also updates");
    }

    // ---- targets -------------------------------------------------------

    struct Scope {
        const TargetDecl *t = nullptr;
        TargetBinding binding;
        std::set<std::string> ints;
        std::set<std::string> grid_params;
    };

    const GridDecl *resolve(const Scope &s, const std::string &name) const {
        if (s.grid_params.contains(name)) {
            auto it = s.binding.grids.find(name);
            return it == s.binding.grids.end() ? nullptr : u_.find_grid(it->second);
        }
        return u_.find_grid(name);
    }

    bool is_grid(const Scope &s, const std::string &name) const {
        return s.grid_params.contains(name) || (!s.ints.contains(name) && u_.find_grid(name));
    }

    void check_symbols(const Scope &s, const Affine &a, SourcePos pos, bool allow_shape) {
        for (const auto &[sym, k] : a.terms()) {
            auto dot = sym.find(".shape[");
            if (dot != std::string::npos) {
                std::string g = sym.substr(0, dot);
                int d = std::stoi(sym.substr(dot + 7));
                if (!allow_shape)
                    error(pos, "iteration counts cannot refer to grid shapes");
                else if (!is_grid(s, g))
                    error(pos, "unknown grid '" + g + "'");
                else if (const GridDecl *gd = resolve(s, g); gd && d >= gd->dims())
                    error(pos, "'" + sym + "' is out of range for a " +
                                   std::to_string(gd->dims()) + "D grid");
            } else if (!s.ints.contains(sym)) {
                error(pos, "unknown integer '" + sym + "'");
            }
        }
    }

    void check_target(const TargetDecl &t) {
        Scope s;
        s.t = &t;
        s.binding = bind_target(u_, t.name);
        std::set<std::string> names;
        for (const auto &p : t.params) {
            if (!names.insert(p.name).second)
                error(p.pos, "duplicate parameter '" + p.name + "'");
            if (p.type == "grid")
                s.grid_params.insert(p.name);
            else if (p.type == "i32" || p.type == "i64")
                s.ints.insert(p.name);
            else
                error(p.pos, "target parameter '" + p.name + "' has unsupported type 'st." +
                                 p.type + "'");
        }
        check_body(s, t.body);
    }

    void check_body(Scope &s, const std::vector<Stmt> &body) {
        for (const auto &st : body) {
            switch (st.kind) {
            case Stmt::Kind::for_range:
                check_symbols(s, st.count, st.pos, false);
                if (st.count.is_constant() && st.count.constant() < 0)
                    error(st.pos, "iteration count must be non-negative");
                check_body(s, st.body);
                break;
            case Stmt::Kind::swap: check_swap(s, st); break;
            case Stmt::Kind::map: check_map(s, st); break;
            }
        }
    }

    void check_swap(const Scope &s, const Stmt &st) {
        const GridDecl *ga = nullptr;
        const GridDecl *gb = nullptr;
        for (const auto *n : {&st.a, &st.b}) {
            if (!is_grid(s, *n)) {
                error(st.pos, "unknown grid '" + *n + "'");
                return;
            }
        }
        ga = resolve(s, st.a);
        gb = resolve(s, st.b);
        if (ga && gb &&
            (ga->dtype != gb->dtype || ga->shape != gb->shape || ga->order != gb->order))
            error(st.pos, "cannot swap grids '" + st.a + "' and '" + st.b +
                              "' of different type, shape or order");
    }

    void check_map(const Scope &s, const Stmt &st) {
        const KernelDecl *k = u_.find_kernel(st.kernel);
        if (!k) {
            error(st.kernel_pos, "unknown kernel '" + st.kernel + "'");
            return;
        }
        if (st.args.size() != k->params.size()) {
            error(st.kernel_pos, "kernel '" + k->name + "' takes " +
                                     std::to_string(k->params.size()) + " grids, map passes " +
                                     std::to_string(st.args.size()));
            return;
        }
        const int dims = kernel_dims(*k);
        for (const auto &[key, arg] : st.map.args) {
            if (arg.kind == MapArg::Kind::shape_of) {
                if (!is_grid(s, arg.grid))
                    error(arg.pos, "unknown grid '" + arg.grid + "'");
            } else if (arg.kind == MapArg::Kind::scalar) {
                check_symbols(s, arg.scalar, arg.pos, true);
            } else {
                for (const auto &a : arg.tuple)
                    check_symbols(s, a, arg.pos, true);
            }
        }
        if (dims > 0) {
            try {
                desugar_map(st.map, dims);
            } catch (const CompileError &e) {
                for (const auto &d : e.diagnostics())
                    out_.push_back(d);
            }
        }

        StencilInfo info;
        try {
            info = analyze_kernel(*k);
        } catch (const CompileError &) {
            return; // reported by the kernel checks
        }
        const GridDecl *first = nullptr;
        for (std::size_t i = 0; i < st.args.size(); ++i) {
            const std::string &a = st.args[i];
            const std::string &param = k->params[i].name;
            if (!is_grid(s, a)) {
                error(st.pos, "unknown grid '" + a + "'");
                continue;
            }
            const GridDecl *g = resolve(s, a);
            if (!g)
                continue;
            if (dims > 0 && g->dims() != dims)
                error(st.pos, "kernel '" + k->name + "' is " + std::to_string(dims) +
                                  "D but grid '" + a + "' is " + std::to_string(g->dims()) + "D");
            auto it = info.offsets.find(param);
            if (it != info.offsets.end()) {
                for (const auto &off : it->second) {
                    if (off.max_abs() > g->order) {
                        error(st.pos, "offset exceeds halo: " + param + ".at" + off.str() +
                                          " reads beyond order " + std::to_string(g->order) +
                                          " of grid '" + a + "'");
                        break;
                    }
                }
            }
            if (!first) {
                first = g;
            } else if (g->dtype != first->dtype) {
                error(st.pos, "mixed element types: grid '" + a + "' is " +
                                  std::string(dtype_name(g->dtype)) + ", grid '" + first->name +
                                  "' is " + std::string(dtype_name(first->dtype)));
            } else if (g->shape != first->shape) {
                error(st.pos, "grids '" + first->name + "' and '" + a +
                                  "' passed to one map have different shapes");
            }
        }
    }

    // ---- launch --------------------------------------------------------

    void check_launch(const LaunchDecl &l) {
        const auto &keys = backend_param_keys(l.backend);
        for (const auto &[key, v] : l.params)
            if (std::find(keys.begin(), keys.end(), key) == keys.end())
                error(v.pos, "unknown parameter '" + key + "' for backend '" + l.backend_call +
                                 "'");
        const TargetDecl *t = u_.find_target(l.target);
        if (!t) {
            error(l.pos, "unknown target '" + l.target + "'");
            return;
        }
        if (l.args.size() != t->params.size()) {
            error(l.pos, "target '" + t->name + "' takes " + std::to_string(t->params.size()) +
                             " arguments, launch passes " + std::to_string(l.args.size()));
            return;
        }
        for (std::size_t i = 0; i < l.args.size(); ++i) {
            const LaunchArg &a = l.args[i];
            const Param &p = t->params[i];
            if (p.type == "grid") {
                if (!a.is_grid)
                    error(a.pos, "parameter '" + p.name + "' expects a grid");
                else if (!u_.find_grid(a.grid))
                    error(a.pos, "unknown grid '" + a.grid + "'");
            } else if (a.is_grid) {
                error(a.pos, "parameter '" + p.name + "' expects an integer");
            } else if (a.value < 0) {
                error(a.pos, "parameter '" + p.name + "' must be non-negative");
            }
        }
    }

    const SourceUnit &u_;
    std::vector<Diagnostic> out_;
};

} // namespace

std::vector<Diagnostic> validate(const SourceUnit &unit) { return Validator(unit).run(); }

void require_valid(const SourceUnit &unit) {
    auto diags = validate(unit);
    if (has_errors(diags))
        throw CompileError(std::move(diags));
}

} // namespace stencilc
