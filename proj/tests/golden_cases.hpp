#pragma once

// Artifacts pinned by the snapshot files in tests/golden.

#include <functional>
#include <string>
#include <vector>

#include "stencilc/codegen.hpp"
#include "test_util.hpp"

namespace testutil {

using namespace stencilc;

inline BackendParams params_of(const std::string &backend) {
    CorpusOptions o;
    o.backend = backend;
    return parse_source(corpus_source("star2d1r", o)).launch->params;
}

inline GeneratedArtifact omp_for(const SourceUnit &u, const std::string &backend) {
    return gen_openmp(u, plan_omp(analyze_kernel(u.kernels[0]), params_of(backend)));
}

struct GoldenCase {
    const char *name;
    std::function<GeneratedArtifact()> make;
};

inline std::vector<GoldenCase> golden_cases() {
    return {
        {"star2d1r_seq", [] { return gen_serial(testutil::corpus_unit("star2d1r")); }},
        {"star2d4r_omp_loop",
         [] { return omp_for(testutil::corpus_unit("star2d4r"), "st.omp(template=\"loop\")"); }},
        {"star3d2r_omp_tasks",
         [] {
             return omp_for(testutil::corpus_unit("star3d2r"),
                            "st.omp(template=\"tasks_blocking\", blockDims=(8, 8))");
         }},
        {"star2d1r_omp_semi",
         [] {
             return omp_for(testutil::corpus_unit("star2d1r"), "st.omp(algorithm=\"semi\")");
         }},
        {"pml3d_omp_slab7",
         [] {
             SourceUnit u = testutil::parse_valid(corpus_fixture_source("pml3d"));
             OmpPlan p = plan_omp(analyze_kernel(u.kernels[0]), u.launch->params);
             CodegenOptions o;
             o.decomposition = p.decomposition;
             return gen_openmp(u, p, o);
         }},
        {"star3d2r_gpu_shift",
         [] {
             SourceUnit u = testutil::corpus_unit("star3d2r");
             return gen_gpu(u, plan_gpu(analyze_kernel(u.kernels[0]),
                                        params_of("st.cuda(template=\"shift\")")));
         }},
        {"box2d1r_gpu_f4",
         [] {
             SourceUnit u = testutil::corpus_unit("box2d1r");
             return gen_gpu(u, plan_gpu(analyze_kernel(u.kernels[0]),
                                        params_of("st.cuda(template=\"f4\")"), 96));
         }},
        {"box3d2r_dataflow",
         [] {
             CorpusOptions o;
             o.shape = {8, 8, 4};
             o.literal_iterations = 3;
             o.backend = "st.dataflow()";
             return gen_dataflow_program(build_dataflow(testutil::corpus_unit("box3d2r", o), {}));
         }},
    };
}


} // namespace testutil
