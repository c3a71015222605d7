#include "stencilc/planning.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace stencilc {

const SymbolEntry *SymbolTable::find(const std::string &name) const {
    auto it = entries.find(name);
    return it == entries.end() ? nullptr : &it->second;
}

std::string SymbolTable::str() const {
    std::string s;
    for (const auto &[name, e] : entries) {
        s += name + ": ";
        s += e.kind == SymbolKind::grid ? "grid" : e.kind == SymbolKind::temp ? "temp" : "scalar";
        if (e.is_update_dest)
            s += " dest";
        if (e.is_top_level)
            s += " top-level";
        s += "\n";
    }
    return s;
}

std::string_view blocking_name(BlockingKind k) {
    switch (k) {
    case BlockingKind::blocking_1d: return "blocking_1d";
    case BlockingKind::blocking_2d: return "blocking_2d";
    case BlockingKind::blocking_3d: return "blocking_3d";
    case BlockingKind::streaming_1_5d: return "streaming_1_5d";
    case BlockingKind::streaming_2_5d: return "streaming_2_5d";
    }
    return "blocking_2d";
}

namespace {

BlockingPlan blocking_for(int dims, bool streaming) {
    BlockingPlan b;
    if (dims <= 1) {
        b.kind = BlockingKind::blocking_1d;
    } else if (streaming) {
        b.kind = dims == 3 ? BlockingKind::streaming_2_5d : BlockingKind::streaming_1_5d;
        b.stream_dim = 0;
    } else {
        b.kind = dims == 3 ? BlockingKind::blocking_3d : BlockingKind::blocking_2d;
    }
    return b;
}

std::string key_of(const std::string &k) { return "'" + k + "'"; }

SourcePos pos_of(const BackendParams &params, const std::string &key) {
    for (const auto &[k, v] : params)
        if (k == key)
            return v.pos;
    return {};
}

const LaunchValue *find_param(const BackendParams &params, const std::string &key) {
    const LaunchValue *found = nullptr;
    for (const auto &[k, v] : params)
        if (k == key)
            found = &v; // last one wins, so CLI overrides appended later take effect
    return found;
}

bool as_bool(const LaunchValue &v, const std::string &key) {
    if (v.kind == LaunchValue::Kind::boolean)
        return v.boolean;
    if (v.kind == LaunchValue::Kind::integer && (v.integer == 0 || v.integer == 1))
        return v.integer == 1;
    std::string s = v.symbol();
    if (s == "true" || s == "True" || s == "on")
        return true;
    if (s == "false" || s == "False" || s == "off")
        return false;
    throw CompileError(v.pos, key_of(key) + " expects a boolean");
}

std::vector<std::int64_t> as_ints(const LaunchValue &v, const std::string &key, std::size_t min,
                                  std::size_t max) {
    std::vector<std::int64_t> out;
    if (v.kind == LaunchValue::Kind::tuple)
        out = v.ints;
    else if (v.kind == LaunchValue::Kind::integer)
        out = {v.integer};
    else
        throw CompileError(v.pos, key_of(key) + " expects a tuple of integers");
    if (out.size() < min || out.size() > max)
        throw CompileError(v.pos, key_of(key) + " expects " + std::to_string(min) +
                                      (min == max ? "" : " to " + std::to_string(max)) +
                                      " values");
    for (auto x : out)
        if (x < 1)
            throw CompileError(v.pos, key_of(key) + " values must be at least 1");
    return out;
}

double capability_value(const std::string &s, SourcePos pos) {
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v <= 0)
        throw CompileError(pos, "malformed compute capability '" + s + "'");
    return v;
}

} // namespace

MirResult build_mir(const StencilInfo &info, const KernelDecl &k, std::string_view template_name,
                    const SourceUnit *unit) {
    MirResult r;
    for (const auto &p : k.params) {
        SymbolEntry e;
        e.kind = p.type == "grid" ? SymbolKind::grid : SymbolKind::scalar;
        e.is_top_level = unit && unit->find_grid(p.name);
        r.symbols.entries[p.name] = e;
    }
    for (const auto &s : k.body) {
        if (s.is_update)
            r.symbols.entries[s.name].is_update_dest = true;
        else
            r.symbols.entries[s.name] = SymbolEntry{SymbolKind::temp, false, false};
    }
    bool streaming = false;
    if (auto t = gpu_template_from_name(template_name.empty() ? "gmem" : template_name))
        streaming = is_streaming(*t);
    r.blocking = blocking_for(info.dims, streaming);
    return r;
}

Decomposition decomposition_param(const BackendParams &params, int dims) {
    const LaunchValue *v = find_param(params, "decomposition");
    if (!v)
        return Decomposition::cross_product;
    auto d = decomposition_from_name(v->symbol());
    if (!d)
        throw CompileError(v->pos, "unknown decomposition '" + v->symbol() + "'");
    if (*d == Decomposition::slab7 && dims != 3)
        throw CompileError(v->pos, "slab7 decomposition requires a 3D kernel");
    return *d;
}

// ---- GPU -------------------------------------------------------------------

std::string_view gpu_template_name(GpuTemplate t) {
    switch (t) {
    case GpuTemplate::gmem: return "gmem";
    case GpuTemplate::smem: return "smem";
    case GpuTemplate::f4: return "f4";
    case GpuTemplate::shift: return "shift";
    case GpuTemplate::unroll: return "unroll";
    case GpuTemplate::semi: return "semi";
    }
    return "gmem";
}

std::optional<GpuTemplate> gpu_template_from_name(std::string_view s) {
    for (auto t : {GpuTemplate::gmem, GpuTemplate::smem, GpuTemplate::f4, GpuTemplate::shift,
                   GpuTemplate::unroll, GpuTemplate::semi})
        if (gpu_template_name(t) == s)
            return t;
    return std::nullopt;
}

bool is_streaming(GpuTemplate t) {
    return t == GpuTemplate::shift || t == GpuTemplate::unroll || t == GpuTemplate::semi;
}

std::string_view mem_type_name(MemType m) {
    switch (m) {
    case MemType::registers: return "registers";
    case MemType::shared: return "shared";
    case MemType::automatic: return "auto";
    }
    return "auto";
}

GpuPlan plan_gpu(const StencilInfo &info, const BackendParams &params,
                 std::optional<std::int64_t> innermost_extent) {
    GpuPlan p;
    if (const LaunchValue *v = find_param(params, "template")) {
        auto t = gpu_template_from_name(v->symbol());
        if (!t)
            throw CompileError(v->pos, "unknown GPU template '" + v->symbol() +
                                           "' (expected gmem, smem, f4, shift, unroll or semi)");
        p.tmpl = *t;
    }
    if (is_streaming(p.tmpl) && info.dims < 2)
        throw CompileError(pos_of(params, "template"),
                           "template '" + std::string(gpu_template_name(p.tmpl)) +
                               "' streams along a dimension and needs a 2D or 3D kernel");
    if (p.tmpl == GpuTemplate::semi && info.shape != StencilShape::star)
        throw CompileError(pos_of(params, "template"),
                           "the semi template requires a star-shaped stencil");

    if (const LaunchValue *v = find_param(params, "threadsPerBlock")) {
        auto d = as_ints(*v, "threadsPerBlock", 1, 3);
        p.block = {1, 1, 1};
        for (std::size_t i = 0; i < d.size(); ++i)
            p.block[i] = static_cast<int>(d[i]);
    }
    if (const LaunchValue *v = find_param(params, "planeDims")) {
        auto d = as_ints(*v, "planeDims", 2, 2);
        p.plane = {static_cast<int>(d[0]), static_cast<int>(d[1])};
    }

    MemType mem = MemType::automatic;
    if (const LaunchValue *v = find_param(params, "memType")) {
        std::string s = v->symbol();
        if (s == "registers")
            mem = MemType::registers;
        else if (s == "shared")
            mem = MemType::shared;
        else if (s != "auto")
            throw CompileError(v->pos, "unknown memory type '" + s + "'");
        if (mem == MemType::registers && info.shape != StencilShape::star)
            throw CompileError(v->pos, "register streaming needs a star-shaped stencil; use "
                                       "memType=shared");
    }
    p.mem_type = mem != MemType::automatic
                     ? mem
                     : (info.shape == StencilShape::star ? MemType::registers : MemType::shared);

    if (const LaunchValue *v = find_param(params, "computeCapability")) {
        p.compute_capability = v->kind == LaunchValue::Kind::real ? format_real(v->real, DType::f64)
                                                                  : v->symbol();
        capability_value(p.compute_capability, v->pos);
    }
    if (const LaunchValue *v = find_param(params, "prefetch"))
        p.prefetch = as_bool(*v, "prefetch");
    if (const LaunchValue *v = find_param(params, "asyncMemcpy")) {
        p.async_memcpy = as_bool(*v, "asyncMemcpy");
        double cc = capability_value(p.compute_capability, pos_of(params, "computeCapability"));
        if (p.async_memcpy && cc < kAsyncMemcpyMinCapability)
            throw CompileError(v->pos, "asyncMemcpy requires compute capability 8.0 or newer "
                                       "(A100/H100 feature), got " +
                                           p.compute_capability);
    }
    if (const LaunchValue *v = find_param(params, "padding")) {
        p.padding = v->kind == LaunchValue::Kind::boolean ? v->boolean : true;
        p.warnings.push_back({v->pos, Severity::warning, "padding is accepted but has no effect"});
    }
    p.decomposition = decomposition_param(params, info.dims);
    p.blocking = blocking_for(info.dims, is_streaming(p.tmpl));

    if (p.tmpl == GpuTemplate::f4 && innermost_extent && *innermost_extent % 4 != 0)
        throw CompileError(pos_of(params, "template"),
                           "f4 needs the innermost extent to be divisible by 4, got " +
                               std::to_string(*innermost_extent));
    return p;
}

std::string GpuPlan::str() const {
    std::ostringstream o;
    o << "backend: gpu\n";
    o << "template: " << gpu_template_name(tmpl) << "\n";
    o << "blocking: " << blocking_name(blocking.kind);
    if (blocking.stream_dim >= 0)
        o << " (stream dim " << blocking.stream_dim << ")";
    o << "\n";
    if (is_streaming(tmpl))
        o << "plane: " << plane[0] << "x" << plane[1] << "\n";
    else
        o << "block: " << block[0] << "x" << block[1] << "x" << block[2] << "\n";
    o << "mem_type: " << mem_type_name(mem_type) << "\n";
    o << "prefetch: " << (prefetch ? "on" : "off") << "\n";
    o << "async_memcpy: " << (async_memcpy ? "on" : "off") << "\n";
    o << "compute_capability: " << compute_capability << "\n";
    o << "padding: " << (padding ? "on (inert)" : "off") << "\n";
    o << "decomposition: " << decomposition_name(decomposition) << "\n";
    return o.str();
}

// ---- OpenMP ----------------------------------------------------------------

std::string_view omp_template_name(OmpTemplate t) {
    switch (t) {
    case OmpTemplate::loop: return "loop";
    case OmpTemplate::loop_blocking: return "loop_blocking";
    case OmpTemplate::loop_blocking_collapse: return "loop_blocking_collapse";
    case OmpTemplate::tasks_blocking: return "tasks_blocking";
    case OmpTemplate::taskloop: return "taskloop";
    }
    return "loop";
}

std::optional<OmpTemplate> omp_template_from_name(std::string_view s) {
    for (auto t : {OmpTemplate::loop, OmpTemplate::loop_blocking,
                   OmpTemplate::loop_blocking_collapse, OmpTemplate::tasks_blocking,
                   OmpTemplate::taskloop})
        if (omp_template_name(t) == s)
            return t;
    return std::nullopt;
}

bool uses_blocking(OmpTemplate t) {
    return t == OmpTemplate::loop_blocking || t == OmpTemplate::loop_blocking_collapse ||
           t == OmpTemplate::tasks_blocking;
}

std::string_view omp_algorithm_name(OmpAlgorithm a) {
    return a == OmpAlgorithm::semi ? "semi" : "conventional";
}

OmpPlan plan_omp(const StencilInfo &info, const BackendParams &params) {
    OmpPlan p;
    if (const LaunchValue *v = find_param(params, "template")) {
        auto t = omp_template_from_name(v->symbol());
        if (!t)
            throw CompileError(v->pos, "unknown OpenMP template '" + v->symbol() +
                                           "' (expected loop, loop_blocking, "
                                           "loop_blocking_collapse, tasks_blocking or taskloop)");
        p.tmpl = *t;
    }
    if (const LaunchValue *v = find_param(params, "algorithm")) {
        std::string s = v->symbol();
        if (s == "semi")
            p.algorithm = OmpAlgorithm::semi;
        else if (s != "conventional")
            throw CompileError(v->pos, "unknown algorithm '" + s + "'");
        if (p.algorithm == OmpAlgorithm::semi && info.shape != StencilShape::star)
            throw CompileError(v->pos, "the semi algorithm requires a star-shaped stencil");
    }
    const LaunchValue *dims = find_param(params, "blockDims");
    if (uses_blocking(p.tmpl)) {
        if (!dims)
            throw CompileError(pos_of(params, "template"),
                               "template '" + std::string(omp_template_name(p.tmpl)) +
                                   "' requires blockDims=(bx, by)");
        auto d = as_ints(*dims, "blockDims", 2, 2);
        p.block = std::array<int, 2>{static_cast<int>(d[0]), static_cast<int>(d[1])};
    } else if (dims) {
        p.warnings.push_back({dims->pos, Severity::warning,
                              "blockDims ignored by template '" +
                                  std::string(omp_template_name(p.tmpl)) + "'"});
    }
    p.decomposition = decomposition_param(params, info.dims);
    p.blocking = blocking_for(info.dims, false);
    return p;
}

std::string OmpPlan::str() const {
    std::ostringstream o;
    o << "backend: omp\n";
    o << "template: " << omp_template_name(tmpl) << "\n";
    o << "algorithm: " << omp_algorithm_name(algorithm) << "\n";
    o << "blocking: " << blocking_name(blocking.kind) << "\n";
    if (block)
        o << "block: " << (*block)[0] << "x" << (*block)[1] << "\n";
    o << "decomposition: " << decomposition_name(decomposition) << "\n";
    return o.str();
}

// ---- block enumeration -----------------------------------------------------

TileShape tile_shape(const GpuPlan &plan, int dims) {
    TileShape t{0, 0, 0};
    auto last = [&](int k) { return static_cast<std::size_t>(dims - 1 - k); };
    if (is_streaming(plan.tmpl)) {
        // dim 0 is streamed in full; the plane covers the remaining dims.
        for (int k = 0; k < dims - 1 && k < 2; ++k)
            t[last(k)] = plan.plane[static_cast<std::size_t>(k)];
    } else {
        for (int k = 0; k < dims; ++k)
            t[last(k)] = plan.block[static_cast<std::size_t>(k)];
    }
    return t;
}

TileShape tile_shape(const OmpPlan &plan, int dims) {
    TileShape t{0, 0, 0};
    if (plan.block) {
        for (int d = 0; d < std::min(dims, 2); ++d)
            t[static_cast<std::size_t>(d)] = (*plan.block)[static_cast<std::size_t>(d)];
    } else {
        t[0] = 1; // one chunk per outermost index
    }
    return t;
}

std::vector<Block> enumerate_blocks(const Region &r, const TileShape &tile) {
    std::vector<Block> out;
    if (r.size() <= 0)
        return out;
    std::array<std::int64_t, kMaxDims> step{1, 1, 1};
    std::array<std::int64_t, kMaxDims> count{1, 1, 1};
    for (int d = 0; d < r.dims; ++d) {
        auto i = static_cast<std::size_t>(d);
        std::int64_t ext = r.hi[i] - r.lo[i];
        step[i] = tile[i] > 0 ? tile[i] : ext;
        count[i] = (ext + step[i] - 1) / step[i];
    }
    for (std::int64_t a = 0; a < count[0]; ++a)
        for (std::int64_t b = 0; b < count[1]; ++b)
            for (std::int64_t c = 0; c < count[2]; ++c) {
                Block blk;
                std::array<std::int64_t, kMaxDims> idx{a, b, c};
                for (int d = 0; d < r.dims; ++d) {
                    auto i = static_cast<std::size_t>(d);
                    blk.lo[i] = r.lo[i] + idx[i] * step[i];
                    blk.hi[i] = std::min(r.hi[i], blk.lo[i] + step[i]);
                }
                out.push_back(blk);
            }
    return out;
}

} // namespace stencilc
