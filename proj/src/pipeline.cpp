#include "stencilc/pipeline.hpp"

#include "stencilc/inspect.hpp"
#include "stencilc/simulator.hpp"

namespace stencilc {

Request default_request(const SourceUnit &unit, std::optional<BackendKind> backend) {
    Request r;
    r.backend = backend.value_or(unit.launch ? unit.launch->backend : BackendKind::seq);
    if (unit.launch && unit.launch->backend == r.backend)
        r.params = unit.launch->params;
    return r;
}

void set_param(BackendParams &params, const std::string &key, LaunchValue v) {
    for (auto &[k, old] : params)
        if (k == key) {
            old = std::move(v);
            return;
        }
    params.emplace_back(key, std::move(v));
}

namespace {

// f4 checks the contiguous extent; every grid of a map shares it.
std::optional<std::int64_t> innermost_extent(const SourceUnit &unit, const std::string &target) {
    TargetBinding b = bind_target(unit, target);
    for (const auto &[param, grid] : b.grids)
        if (const GridDecl *d = unit.find_grid(grid))
            return d->shape.back();
    if (!unit.grids.empty())
        return unit.grids.front().shape.back();
    return std::nullopt;
}

} // namespace

Compiled compile_request(const SourceUnit &unit, const Request &req) {
    require_valid(unit);
    Compiled c;
    CodegenOptions opts;
    opts.target = req.target;
    opts.bindings = req.bindings;
    switch (req.backend) {
    case BackendKind::seq: {
        const KernelDecl &k = primary_kernel(unit, req.target);
        opts.decomposition = decomposition_param(req.params, analyze_kernel(k).dims);
        c.artifact = gen_serial(unit, opts);
        break;
    }
    case BackendKind::omp: {
        OmpPlan plan = plan_omp(analyze_kernel(primary_kernel(unit, req.target)), req.params);
        c.plan = plan.str();
        c.artifact = gen_openmp(unit, plan, opts);
        break;
    }
    case BackendKind::gpu: {
        const KernelDecl &k = primary_kernel(unit, req.target);
        GpuPlan plan =
            plan_gpu(analyze_kernel(k), req.params, innermost_extent(unit, req.target));
        c.plan = plan.str();
        c.artifact = gen_gpu(unit, plan, opts);
        break;
    }
    case BackendKind::dataflow: {
        c.dataflow = build_dataflow(unit, req.params, req.target, req.bindings);
        c.plan = c.dataflow->layout.str();
        c.artifact = gen_dataflow_program(*c.dataflow);
        break;
    }
    }
    return c;
}

GridSet execute_request(const SourceUnit &unit, const Request &req, GridSet grids,
                        ExecStats *stats) {
    require_valid(unit);
    ExecOptions opts;
    opts.target = req.target;
    opts.bindings = req.bindings;
    switch (req.backend) {
    case BackendKind::seq: {
        const KernelDecl &k = primary_kernel(unit, req.target);
        opts.decomposition = decomposition_param(req.params, analyze_kernel(k).dims);
        return run_target(unit, std::move(grids), opts, stats);
    }
    case BackendKind::omp: {
        OmpPlan plan = plan_omp(analyze_kernel(primary_kernel(unit, req.target)), req.params);
        opts.decomposition = plan.decomposition;
        return run_omp_plan(unit, plan, std::move(grids), opts, stats);
    }
    case BackendKind::gpu: {
        const KernelDecl &k = primary_kernel(unit, req.target);
        GpuPlan plan =
            plan_gpu(analyze_kernel(k), req.params, innermost_extent(unit, req.target));
        opts.decomposition = plan.decomposition;
        return run_tile_plan(unit, plan, std::move(grids), opts, stats);
    }
    case BackendKind::dataflow: {
        Simulator sim(build_dataflow(unit, req.params, req.target, req.bindings), grids);
        return sim.run_to_exit();
    }
    }
    return grids;
}

} // namespace stencilc
