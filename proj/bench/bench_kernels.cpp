// Serial reference vs OpenMP execution of a few corpus kernels.
//
//   bench_kernels --benchmark_filter=star3d

#include <benchmark/benchmark.h>

#include "stencilc/corpus.hpp"
#include "stencilc/executor.hpp"
#include "stencilc/frontend.hpp"

using namespace stencilc;

namespace {

struct Case {
    SourceUnit unit;
    GridSet grids;
    StencilInfo info;
};

Case make_case(const std::string &name, std::int64_t n) {
    CorpusOptions o;
    const int dims = find_corpus_kernel(name)->dims;
    o.shape = dims == 3 ? std::vector<std::int64_t>{n, n, n} : std::vector<std::int64_t>{n, n};
    o.launch_iterations = 2;
    Case c{parse_source(corpus_source(name, o)), {}, {}};
    require_valid(c.unit);
    c.grids = random_grids(c.unit, 1);
    c.info = analyze_kernel(c.unit.kernels[0]);
    return c;
}

void set_points(benchmark::State &state, const Case &c) {
    std::int64_t pts = 2;
    for (auto e : c.unit.grids[0].shape)
        pts *= e;
    state.SetItemsProcessed(state.iterations() * pts);
}

void serial(benchmark::State &state, const std::string &name, std::int64_t n) {
    Case c = make_case(name, n);
    for (auto _ : state)
        benchmark::DoNotOptimize(run_target(c.unit, c.grids));
    set_points(state, c);
}

void parallel_reference(benchmark::State &state, const std::string &name, std::int64_t n) {
    Case c = make_case(name, n);
    ExecOptions o;
    o.parallel = true;
    for (auto _ : state)
        benchmark::DoNotOptimize(run_target(c.unit, c.grids, o));
    set_points(state, c);
}

void omp_plan(benchmark::State &state, const std::string &name, std::int64_t n, OmpTemplate t,
              OmpAlgorithm a) {
    Case c = make_case(name, n);
    OmpPlan p;
    p.tmpl = t;
    p.algorithm = a;
    if (uses_blocking(t))
        p.block = std::array<int, 2>{16, 16};
    for (auto _ : state)
        benchmark::DoNotOptimize(run_omp_plan(c.unit, p, c.grids));
    set_points(state, c);
}

void register_all() {
    const std::vector<std::pair<std::string, std::int64_t>> kernels = {
        {"star2d1r", 512}, {"star2d4r", 512}, {"star3d2r", 64}, {"box3d2r", 48}};
    for (const auto &[name, n] : kernels) {
        const std::string tag = name + "/" + std::to_string(n);
        benchmark::RegisterBenchmark(("serial/" + tag).c_str(), serial, name, n)
            ->Unit(benchmark::kMillisecond);
        benchmark::RegisterBenchmark(("parallel_reference/" + tag).c_str(), parallel_reference,
                                     name, n)
            ->Unit(benchmark::kMillisecond)
            ->UseRealTime();
        for (OmpTemplate t : {OmpTemplate::loop, OmpTemplate::loop_blocking_collapse,
                              OmpTemplate::tasks_blocking, OmpTemplate::taskloop})
            benchmark::RegisterBenchmark(
                ("omp_" + std::string(omp_template_name(t)) + "/" + tag).c_str(), omp_plan, name, n,
                t, OmpAlgorithm::conventional)
                ->Unit(benchmark::kMillisecond)
                ->UseRealTime();
        if (find_corpus_kernel(name)->shape == StencilShape::star)
            benchmark::RegisterBenchmark(("omp_semi/" + tag).c_str(), omp_plan, name, n,
                                         OmpTemplate::loop, OmpAlgorithm::semi)
                ->Unit(benchmark::kMillisecond)
                ->UseRealTime();
    }
}

} // namespace

int main(int argc, char **argv) {
    register_all();
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv))
        return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
