#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stencilc/executor.hpp"
#include "test_util.hpp"

using namespace stencilc;

namespace {

SourceUnit star2d4r_cuda_small(std::int64_t n) {
    std::string src = star2d4r_cuda_source();
    const std::string from = "shape=(1000,1000)";
    for (std::size_t p; (p = src.find(from)) != std::string::npos;)
        src.replace(p, from.size(), "shape=(" + std::to_string(n) + "," + std::to_string(n) + ")");
    return testutil::parse_valid(src);
}

// star2d4r_cuda evaluated directly in single precision, halo reads as zero.
std::vector<float> star2d4r_oracle(std::vector<float> u, int n, int steps) {
    auto at = [&](const std::vector<float> &g, int i, int j) -> float {
        if (i < 0 || j < 0 || i >= n || j >= n)
            return 0.0f;
        return g[static_cast<std::size_t>(i * n + j)];
    };
    std::vector<float> v(u.size());
    for (int t = 0; t < steps; ++t) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                auto x = [&](int d) { return at(u, i + d, j); };
                auto y = [&](int d) { return at(u, i, j + d); };
                float s = 0.25005f * x(0);
                s = s + 0.11111f * (x(-4) + x(4));
                s = s + 0.06251f * (x(-3) + x(3));
                s = s + 0.06255f * (x(-2) + x(2));
                s = s + 0.06245f * (x(-1) + x(1));
                s = s + 0.06248f * (y(-1) + y(1));
                s = s + 0.06243f * (y(-2) + y(2));
                s = s + 0.06253f * (y(-3) + y(3));
                s = s - 0.22220f * (y(-4) + y(4));
                v[static_cast<std::size_t>(i * n + j)] = s;
            }
        std::swap(u, v);
    }
    return u;
}

CorpusOptions sized(std::vector<std::int64_t> shape, DType dtype = DType::f32) {
    CorpusOptions o;
    o.shape = std::move(shape);
    o.dtype = dtype;
    return o;
}

double max_abs_diff(const GridBuffer &a, const GridBuffer &b) {
    return compare(a, b).max_error;
}

} // namespace

TEST_CASE("reference executor matches a hand-written single-precision oracle bitwise") {
    const int n = 12, steps = 3;
    SourceUnit u = star2d4r_cuda_small(n);
    ExecOptions o;
    o.bindings["iter"] = steps;
    GridSet in = random_grids(u, 11);
    std::vector<float> flat;
    in.at("u").for_each_interior([&](const Index &i) { flat.push_back(static_cast<float>(in.at("u").at(i))); });
    GridSet out = run_target(u, in, o);
    // an odd number of swaps leaves the newest values under v
    std::vector<float> want = star2d4r_oracle(flat, n, steps);
    std::size_t k = 0, mismatches = 0;
    out.at("v").for_each_interior([&](const Index &i) {
        mismatches += static_cast<float>(out.at("v").at(i)) == want[k++] ? 0 : 1;
    });
    CHECK(k == want.size());
    CHECK(mismatches == 0);
}

TEST_CASE("zero input stays zero and the identity kernel copies") {
    SourceUnit z = testutil::corpus_unit("box3d2r", sized({8, 8, 6}));
    GridSet zero = make_grids(z);
    GridSet out = run_target(z, zero);
    for (const auto &[name, g] : out)
        for (double x : g.values())
            CHECK(x == 0.0);

    SourceUnit id = testutil::parse_valid(
        testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0))\n", "(9, 7)", 1, 2));
    GridSet in = random_grids(id, 3);
    GridSet r = run_target(id, in);
    // two steps, two swaps: u holds the second copy
    CHECK(r.at("u") == in.at("u"));
}

TEST_CASE("linear kernels are linear up to rounding") {
    SourceUnit u = testutil::corpus_unit("star2d2r", sized({20, 20}, DType::f64));
    GridSet a = random_grids(u, 1), b = random_grids(u, 2), c = a;
    const double alpha = 0.75, beta = -1.5;
    for (std::size_t i = 0; i < c.at("u").values().size(); ++i)
        c.at("u").values()[i] = alpha * a.at("u").values()[i] + beta * b.at("u").values()[i];
    for (auto *g : {&a, &b, &c})
        g->at("v").values().assign(g->at("v").values().size(), 0.0);
    GridSet ra = run_target(u, a), rb = run_target(u, b), rc = run_target(u, c);
    GridBuffer combo = ra.at("v");
    for (std::size_t i = 0; i < combo.values().size(); ++i)
        combo.values()[i] = alpha * ra.at("v").values()[i] + beta * rb.at("v").values()[i];
    CHECK(compare(combo, rc.at("v")).rel_max() < 1e-12);
}

TEST_CASE("halo cells are never written") {
    SourceUnit u = testutil::corpus_unit("star2d3r", sized({10, 10}));
    GridSet in = random_grids(u, 5);
    GridSet out = run_target(u, in);
    for (const auto &[name, g] : out) {
        const GridBuffer &before = in.at(name);
        std::int64_t changed = 0;
        const int r = g.order();
        for (std::int64_t i = -r; i < g.extent(0) + r; ++i)
            for (std::int64_t j = -r; j < g.extent(1) + r; ++j) {
                const bool interior = i >= 0 && j >= 0 && i < g.extent(0) && j < g.extent(1);
                if (!interior && g.at({i, j, 0}) != before.at({i, j, 0}))
                    ++changed;
            }
        CHECK(changed == 0);
    }
}

TEST_CASE("semi-stencil and tile plans reproduce the reference") {
    for (const char *name : {"star2d1r", "star2d4r", "star3d2r", "j2d5pt", "j2d9pt"}) {
        INFO(name);
        CorpusOptions o;
        if (find_corpus_kernel(name)->dims == 3)
            o.shape = {10, 12, 16};
        else
            o.shape = {24, 32};
        SourceUnit u = testutil::corpus_unit(name, o);
        GridSet in = random_grids(u, 9);
        GridSet ref = run_target(u, in);
        GridSet semi = run_semi(u, in);
        // lexicographic term order keeps the split sums in source order
        const double semi_tol = find_corpus_kernel(name)->j_kernel ? 1e-6 : 0.0;
        for (const auto &[g, buf] : ref)
            CHECK(compare(buf, semi.at(g)).rel_max() <= semi_tol);

        StencilInfo info = analyze_kernel(u.kernels[0]);
        for (GpuTemplate t : {GpuTemplate::gmem, GpuTemplate::smem, GpuTemplate::f4,
                              GpuTemplate::shift, GpuTemplate::unroll}) {
            GpuPlan p;
            p.tmpl = t;
            p.block = {8, 4, 2};
            p.plane = {8, 4};
            p.blocking = build_mir(info, u.kernels[0], gpu_template_name(t)).blocking;
            GridSet tiled = run_tile_plan(u, p, in);
            for (const auto &[g, buf] : ref)
                CHECK(max_abs_diff(buf, tiled.at(g)) == 0.0);
        }
    }
}

TEST_CASE("comparison metrics match their closed forms") {
    GridBuffer ref(DType::f64, {10, 10}, 1), other(DType::f64, {10, 10}, 1);
    ref.for_each_interior([&](const Index &i) { ref.set(i, 2.0); });
    other = ref;
    other.set({3, 4, 0}, 2.0 + 1e-6);
    ComparisonReport r = compare(ref, other);
    CHECK(r.max_error == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK(r.rmsd == doctest::Approx(1e-6 / std::sqrt(100.0)).epsilon(1e-9));
    CHECK(r.scale == 2.0);
    CHECK(r.rel_max() == doctest::Approx(5e-7).epsilon(1e-9));
    CHECK(r.worst[0] == 3);
    CHECK(r.worst[1] == 4);

    other.for_each_interior([&](const Index &i) { other.set(i, 2.0 + 1e-6); });
    r = compare(ref, other);
    CHECK(r.rmsd == doctest::Approx(1e-6).epsilon(1e-9));
    CHECK_THROWS_AS(compare(ref, GridBuffer(DType::f64, {10, 9}, 1)), std::invalid_argument);
}

TEST_CASE("grid files round-trip") {
    GridBuffer g(DType::f32, {5, 3, 4}, 2);
    fill_log_uniform(g, 42);
    CHECK(decode_grid(encode_grid(g)) == g);
    const auto path = std::filesystem::temp_directory_path() / "stencilc_roundtrip.grid";
    save_grid(path.string(), g);
    CHECK(load_grid(path.string()) == g);
    std::filesystem::remove(path);

    GridBuffer t = parse_grid_text("dtype=f64 shape=2,3 order=1\n1 2 3\n4 5 6.5\n");
    CHECK(t.dtype() == DType::f64);
    CHECK(t.at({1, 2, 0}) == 6.5);
    CHECK(t.at({-1, -1, 0}) == 0.0);
    CHECK_THROWS(decode_grid("STGRID01"));
}

TEST_CASE("log-uniform fill stays in range and rounds to the element type") {
    GridBuffer g(DType::f32, {40, 40}, 1);
    fill_log_uniform(g, 7);
    double lo = 1e300, hi = 0;
    g.for_each_interior([&](const Index &i) {
        lo = std::min(lo, g.at(i));
        hi = std::max(hi, g.at(i));
        CHECK(static_cast<double>(static_cast<float>(g.at(i))) == g.at(i));
    });
    CHECK(lo >= 1e-4 * (1 - 1e-6));
    CHECK(hi <= 1e5 * (1 + 1e-6));
    CHECK(hi / lo > 1e6); // spans most of the decades
}
