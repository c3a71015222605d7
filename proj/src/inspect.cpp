#include "stencilc/inspect.hpp"

#include <sstream>

#include "stencilc/planning.hpp"

namespace stencilc {

std::string describe_kernels(const SourceUnit &unit) {
    std::ostringstream o;
    for (const KernelDecl &k : unit.kernels) {
        StencilInfo info = analyze_kernel(k);
        o << "kernel " << k.name << "\n";
        o << "  dims: " << info.dims << "\n";
        o << "  radius: " << info.radius << "\n";
        o << "  shape: " << shape_name(info.shape) << "\n";
        o << "  flops: " << info.flops_per_point << "\n";
        for (const auto &[grid, offs] : info.offsets) {
            o << "  reads " << grid << " (" << offs.size() << "):";
            for (const auto &off : offs)
                o << " " << off.str();
            o << "\n";
        }
        MirResult mir = build_mir(info, k, {}, &unit);
        std::istringstream sym(mir.symbols.str());
        for (std::string line; std::getline(sym, line);)
            o << "  " << line << "\n";
    }
    return o.str();
}

namespace {

const Stmt *first_map(const std::vector<Stmt> &body) {
    for (const Stmt &s : body) {
        if (s.kind == Stmt::Kind::map)
            return &s;
        if (s.kind == Stmt::Kind::for_range)
            if (const Stmt *m = first_map(s.body))
                return m;
    }
    return nullptr;
}

struct Describer {
    const SourceUnit &unit;
    TargetBinding binding;
    Decomposition scheme;
    std::ostringstream o;

    std::optional<std::int64_t> lookup(const std::string &sym) const {
        auto dot = sym.find(".shape[");
        if (dot != std::string::npos) {
            std::string name = sym.substr(0, dot);
            auto it = binding.grids.find(name);
            const GridDecl *g = unit.find_grid(it == binding.grids.end() ? name : it->second);
            int d = std::stoi(sym.substr(dot + 7));
            if (!g || d >= g->dims())
                return std::nullopt;
            return g->shape[static_cast<std::size_t>(d)];
        }
        auto it = binding.ints.find(sym);
        if (it == binding.ints.end())
            return std::nullopt;
        return it->second;
    }

    void walk(const std::vector<Stmt> &body, int depth) {
        const std::string pad(static_cast<std::size_t>(2 * depth), ' ');
        for (const Stmt &s : body) {
            switch (s.kind) {
            case Stmt::Kind::for_range:
                o << pad << "for " << s.var << " in range(" << s.count.str() << ")\n";
                walk(s.body, depth + 1);
                break;
            case Stmt::Kind::swap: o << pad << "swap " << s.a << " " << s.b << "\n"; break;
            case Stmt::Kind::map: map(s, pad); break;
            }
        }
    }

    void map(const Stmt &s, const std::string &pad) {
        const KernelDecl *k = unit.find_kernel(s.kernel);
        o << pad << "map " << s.kernel << "(";
        for (std::size_t i = 0; i < s.args.size(); ++i)
            o << (i ? ", " : "") << s.args[i];
        o << ")\n";
        if (!k)
            return;
        const int dims = analyze_kernel(*k).dims;
        MapSpec spec = desugar_map(s.map, dims);
        for (int d = 0; d < dims; ++d) {
            const auto &b = spec.bounds[static_cast<std::size_t>(d)];
            o << pad << "  bounds " << d << ": " << b[0].str() << ", " << b[1].str() << ", "
              << b[2].str() << ", " << b[3].str() << "\n";
        }
        std::vector<Diagnostic> warnings;
        MapBounds mb;
        try {
            mb = concretize(
                spec, [&](const std::string &x) { return lookup(x); }, s.pos, &warnings);
        } catch (const CompileError &) {
            o << pad << "  unbound\n";
            return;
        }
        for (const auto &w : warnings)
            o << pad << "  warning: " << w.message << "\n";
        auto regions = decompose_regions(mb, scheme);
        o << pad << "  domain: " << mb.domain_size() << " points\n";
        o << pad << "  regions " << decomposition_name(scheme) << " (" << regions.size()
          << "):\n";
        for (const Region &r : regions)
            o << pad << "    " << r.str() << "\n";
    }
};

} // namespace

std::string describe_target(const SourceUnit &unit, const InspectOptions &opts) {
    Describer d{unit, bind_target(unit, opts.target, opts.bindings), opts.decomposition, {}};
    if (!d.binding.target)
        throw CompileError(SourcePos{}, "no target named '" + opts.target + "'");
    d.o << "target " << d.binding.target->name << "\n";
    for (const auto &[p, g] : d.binding.grids)
        d.o << "  grid " << p << " -> " << g << "\n";
    for (const auto &[p, v] : d.binding.ints)
        d.o << "  int " << p << " = " << v << "\n";
    d.walk(d.binding.target->body, 1);
    return d.o.str();
}

const KernelDecl &primary_kernel(const SourceUnit &unit, const std::string &target) {
    TargetBinding b = bind_target(unit, target);
    if (!b.target)
        throw CompileError(SourcePos{}, "no target to compile");
    const Stmt *m = first_map(b.target->body);
    if (!m)
        throw CompileError(b.target->pos, "target '" + b.target->name + "' contains no map");
    const KernelDecl *k = unit.find_kernel(m->kernel);
    if (!k)
        throw CompileError(m->kernel_pos, "unknown kernel '" + m->kernel + "'");
    return *k;
}

} // namespace stencilc
