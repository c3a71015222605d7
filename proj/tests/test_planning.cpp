#include <doctest.h>

#include <functional>
#include <set>

#include "stencilc/planning.hpp"
#include "test_util.hpp"

using namespace stencilc;

namespace {

StencilInfo info_of(const std::string &name) {
    return analyze_kernel(testutil::corpus_unit(name).kernels.at(0));
}

// Launch parameters exactly as the frontend produces them.
BackendParams params_of(const std::string &backend) {
    CorpusOptions o;
    o.backend = backend;
    SourceUnit u = parse_source(corpus_source("star2d1r", o));
    return u.launch->params;
}

std::string error_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const CompileError &e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("automatic memory type follows the stencil shape") {
    const BackendParams p = params_of("st.cuda(template=\"shift\", memType=\"auto\")");
    CHECK(plan_gpu(info_of("star3d2r"), p).mem_type == MemType::registers);
    CHECK(plan_gpu(info_of("box3d2r"), p).mem_type == MemType::shared);
    CHECK(plan_gpu(info_of("box3d2r"), params_of("st.cuda(template=\"shift\")")).mem_type ==
          MemType::shared);
    CHECK(error_of([&] {
              plan_gpu(info_of("box2d1r"), params_of("st.cuda(memType=\"registers\")"));
          }).find("star") != std::string::npos);
}

TEST_CASE("asyncMemcpy needs compute capability 8.0") {
    auto old = params_of("st.cuda(computeCapability=\"7.0\", asyncMemcpy=True)");
    CHECK(error_of([&] { plan_gpu(info_of("star2d1r"), old); }).find("8.0") !=
          std::string::npos);
    auto ok = params_of("st.cuda(computeCapability=\"9.0\", asyncMemcpy=True)");
    CHECK(plan_gpu(info_of("star2d1r"), ok).async_memcpy);
}

TEST_CASE("f4 requires the innermost extent to be a multiple of four") {
    auto p = params_of("st.cuda(template=\"f4\")");
    CHECK_NOTHROW(plan_gpu(info_of("star2d1r"), p, 96));
    CHECK_THROWS_AS(plan_gpu(info_of("star2d1r"), p, 98), CompileError);
}

TEST_CASE("semi and register plans reject box stencils") {
    CHECK_THROWS_AS(plan_gpu(info_of("box2d1r"), params_of("st.cuda(template=\"semi\")")),
                    CompileError);
    CHECK_THROWS_AS(plan_omp(info_of("box2d1r"), params_of("st.omp(algorithm=\"semi\")")),
                    CompileError);
    CHECK(plan_omp(info_of("star2d1r"), params_of("st.omp(algorithm=\"semi\")")).algorithm ==
          OmpAlgorithm::semi);
}

TEST_CASE("OpenMP block dimensions") {
    SUBCASE("loop ignores blockDims with a warning") {
        OmpPlan p = plan_omp(info_of("star2d1r"),
                             params_of("st.omp(template=\"loop\", blockDims=(8, 8))"));
        CHECK_FALSE(p.block);
        REQUIRE(p.warnings.size() == 1);
        CHECK(p.warnings[0].severity == Severity::warning);
    }
    SUBCASE("blocking templates require them") {
        CHECK_THROWS_AS(
            plan_omp(info_of("star2d1r"), params_of("st.omp(template=\"loop_blocking\")")),
            CompileError);
        OmpPlan p = plan_omp(info_of("star2d1r"),
                             params_of("st.omp(template=\"tasks_blocking\", blockDims=(8, 4))"));
        REQUIRE(p.block);
        CHECK((*p.block)[0] == 8);
        CHECK((*p.block)[1] == 4);
    }
    SUBCASE("unknown template names are listed") {
        CHECK(error_of([] {
                  plan_omp(info_of("star2d1r"), params_of("st.omp(template=\"tiles\")"));
              }).find("taskloop") != std::string::npos);
    }
}

TEST_CASE("decomposition parameter") {
    CHECK(decomposition_param({}, 2) == Decomposition::cross_product);
    CHECK(decomposition_param(params_of("st.omp(decomposition=\"unified\")"), 2) ==
          Decomposition::unified);
    CHECK_THROWS_AS(decomposition_param(params_of("st.omp(decomposition=\"slab7\")"), 2),
                    CompileError);
    CHECK(decomposition_param(params_of("st.omp(decomposition=\"slab7\")"), 3) ==
          Decomposition::slab7);
}

TEST_CASE("block enumeration tiles a region exactly") {
    Region r;
    r.dims = 3;
    r.lo = {1, 2, 3};
    r.hi = {10, 17, 12};
    for (TileShape t : {TileShape{4, 4, 4}, TileShape{1, 0, 0}, TileShape{0, 5, 3},
                        TileShape{100, 100, 100}}) {
        auto blocks = enumerate_blocks(r, t);
        std::map<std::array<std::int64_t, 3>, int> hits;
        for (const Block &b : blocks) {
            for (int d = 0; d < 3; ++d) {
                auto i = static_cast<std::size_t>(d);
                CHECK(b.lo[i] >= r.lo[i]);
                CHECK(b.hi[i] <= r.hi[i]);
                CHECK(b.lo[i] < b.hi[i]);
                if (t[i] > 0)
                    CHECK(b.hi[i] - b.lo[i] <= t[i]);
            }
            for (auto x = b.lo[0]; x < b.hi[0]; ++x)
                for (auto y = b.lo[1]; y < b.hi[1]; ++y)
                    for (auto z = b.lo[2]; z < b.hi[2]; ++z)
                        ++hits[{x, y, z}];
        }
        CHECK(static_cast<std::int64_t>(hits.size()) == r.size());
        bool once = true;
        for (const auto &[p, n] : hits)
            once = once && n == 1;
        CHECK(once);
        // row-major: block origins strictly increase
        for (std::size_t i = 1; i < blocks.size(); ++i)
            CHECK(blocks[i - 1].lo < blocks[i].lo);
    }
}

TEST_CASE("GPU tile shapes put Dx on the contiguous dimension") {
    GpuPlan g;
    g.block = {32, 4, 2};
    CHECK(tile_shape(g, 3) == TileShape{2, 4, 32});
    CHECK(tile_shape(g, 2) == TileShape{4, 32, 0});
    g.tmpl = GpuTemplate::shift;
    g.plane = {32, 8};
    CHECK(tile_shape(g, 3) == TileShape{0, 8, 32});
}

TEST_CASE("mid-level symbol table and blocking choice") {
    SourceUnit u = testutil::parse_valid(testutil::wrap_kernel(
        "    a = u.at(1, 0) + u.at(-1, 0)\n    v.at(0, 0).set(0.5 * a)\n", "(8, 8)", 1, 1));
    const KernelDecl &k = u.kernels[0];
    StencilInfo info = analyze_kernel(k);
    MirResult m = build_mir(info, k, "gmem", &u);
    REQUIRE(m.symbols.find("u"));
    CHECK(m.symbols.find("u")->kind == SymbolKind::grid);
    CHECK(m.symbols.find("u")->is_top_level);
    CHECK_FALSE(m.symbols.find("u")->is_update_dest);
    CHECK(m.symbols.find("v")->is_update_dest);
    CHECK(m.symbols.find("a")->kind == SymbolKind::temp);
    CHECK(m.blocking.kind == BlockingKind::blocking_2d);
    CHECK(m.blocking.stream_dim == -1);

    StencilInfo i3 = info_of("star3d1r");
    const SourceUnit u3 = testutil::corpus_unit("star3d1r");
    CHECK(build_mir(i3, u3.kernels[0], "gmem").blocking.kind == BlockingKind::blocking_3d);
    MirResult s = build_mir(i3, u3.kernels[0], "shift");
    CHECK(s.blocking.kind == BlockingKind::streaming_2_5d);
    CHECK(s.blocking.stream_dim == 0);
    CHECK(build_mir(info, k, "semi").blocking.kind == BlockingKind::streaming_1_5d);
}

TEST_CASE("plans print every resolved field") {
    GpuPlan g = plan_gpu(info_of("star2d1r"), params_of("st.cuda(template=\"shift\")"));
    const std::string s = g.str();
    for (const char *needle : {"template: shift", "registers", "backend: gpu"})
        CHECK(s.find(needle) != std::string::npos);
    CHECK(plan_gpu(info_of("star2d1r"), params_of("st.cuda(padding=True)")).warnings.size() == 1);
}
