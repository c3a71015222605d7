#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stencilc/grid.hpp"
#include "test_util.hpp"

using namespace stencilc;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out; // stdout and stderr
};

Result run(const std::string &args) {
    Result r;
    const std::string cmd = std::string(STENCILC_BIN) + " " + args + " 2>&1";
    FILE *p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::array<char, 4096> buf;
    while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p))
        r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string corpus(const std::string &name) { return testutil::corpus_path(name); }
std::string fixture(const std::string &name) {
    return std::string(STENCILC_CORPUS_DIR) + "/fixtures/" + name + ".stpy";
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("stencilc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int &counter() {
        static int n = 0;
        return n;
    }
    std::string operator/(const std::string &f) const { return (path / f).string(); }
};

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help").code == 0);
    CHECK(run("").code == 1);
    CHECK(run("frobnicate").code == 1);
    CHECK(run("compile").code == 1);
}

TEST_CASE("compile writes files and reports diagnostics with exit 1") {
    TempDir d;
    Result ok = run("compile " + corpus("star2d1r") + " --backend omp --template loop -o " + d.path.string());
    CHECK(ok.code == 0);
    CHECK(fs::exists(d / "kernel_kernel_star2d1r_omp_loop.c"));

    const std::string bad = d / "bad.stpy";
    std::ofstream(bad) << "@st.kernel\ndef k(u, v: st.grid):\n    v.at(0).set(u.at(0))\n";
    Result r = run("compile " + bad);
    CHECK(r.code == 1);
    CHECK(r.out.find(":2:7") != std::string::npos);

    CHECK(run("compile " + corpus("box2d1r") + " --backend omp --algorithm semi").code == 1);
    CHECK(run("compile " + corpus("star2d1r") + " --backend omp --template loop_blocking").code == 1);
    CHECK(run("compile " + corpus("star2d1r") + " --backend omp --set tempalte=loop").code == 1);
    CHECK(run("compile " + d / "missing.stpy").code == 1);
}

TEST_CASE("print-code is deterministic") {
    const std::string args = "compile " + corpus("star3d2r") + " --backend gpu --template shift --print-code";
    Result a = run(args), b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out.find("__global__") != std::string::npos);
}

TEST_CASE("the identity kernel copies its input file") {
    TempDir d;
    GridBuffer g(DType::f32, {16, 16}, 1);
    fill_log_uniform(g, 77);
    save_grid(d / "in.grid", g);
    Result r = run("run " + fixture("identity2d") + " --input u=" + d / "in.grid" + " --output v=" +
                   d / "out.grid");
    REQUIRE(r.code == 0);
    GridBuffer out = load_grid(d / "out.grid");
    CHECK(compare(g, out).max_error == 0.0);
}

TEST_CASE("input grids must match the declared layout") {
    TempDir d;
    save_grid(d / "small.grid", GridBuffer(DType::f32, {8, 8}, 1));
    Result r = run("run " + fixture("identity2d") + " --input u=" + d / "small.grid");
    CHECK(r.code == 1);
    std::ofstream(d / "junk.grid") << "not a grid";
    CHECK(run("run " + fixture("identity2d") + " --input u=" + d / "junk.grid").code == 1);
}

TEST_CASE("oracle runs agree with the reference") {
    for (const char *extra : {"--backend omp --algorithm semi", "--backend gpu --template unroll",
                              "--backend omp --template tasks_blocking --block 8,8"}) {
        Result r = run("run " + corpus("star2d4r") + " --oracle " + extra);
        INFO(extra << "\n" << r.out);
        CHECK(r.code == 0);
        CHECK(r.out.find("FAIL") == std::string::npos);
    }
}

TEST_CASE("diff reports the closed-form metrics and exits 2 over threshold") {
    TempDir d;
    GridBuffer a(DType::f64, {4, 5}, 0), b(DType::f64, {4, 5}, 0);
    a.for_each_interior([&](const Index &i) { a.set(i, 1.0); });
    b = a;
    b.set({1, 1, 0}, 1.5);
    save_grid(d / "a.grid", a);
    save_grid(d / "b.grid", b);
    Result same = run("diff " + d / "a.grid" + " " + d / "a.grid");
    CHECK(same.code == 0);
    Result r = run("diff " + d / "a.grid" + " " + d / "b.grid");
    CHECK(r.code == 2); // default thresholds are the relative 1e-7 / 1e-8
    // max 0.5, rmsd 0.5/sqrt(20)
    CHECK(r.out.find("max=5.000e-01") != std::string::npos);
    CHECK(r.out.find("rmsd=1.118e-01") != std::string::npos);
    CHECK(run("diff " + d / "a.grid" + " " + d / "b.grid" + " --max-error 1 --max-rmsd 1").code == 0);
}

TEST_CASE("dataflow needs a compile-time step count") {
    Result r = run("compile " + corpus("star3d1r") + " --backend dataflow");
    CHECK(r.code == 1);
    CHECK(r.out.find("'iter' is a runtime value") != std::string::npos);
}

TEST_CASE("compile, simulate and diff a dataflow program") {
    TempDir d;
    REQUIRE(run("compile " + fixture("heat2d_dataflow") + " -o " + d / "prog").code == 0);
    CHECK(fs::exists(d / "prog/program.df"));
    CHECK(fs::exists(d / "prog/layout.df"));
    Result sim = run("simulate " + d / "prog" + " --source " + fixture("heat2d_dataflow") +
                     " --trace " + d / "trace.txt" + " -o " + d / "sim");
    INFO(sim.out);
    REQUIRE(sim.code == 0);
    CHECK(sim.out.find("simulated 32x32 PEs") != std::string::npos);
    CHECK(testutil::read_file(d / "trace.txt").find("STATE_UPDATE_STENCIL") != std::string::npos);
    REQUIRE(run("run " + fixture("heat2d_dataflow") + " --backend seq -o " + d / "ref").code == 0);
    CHECK(run("diff " + d / "ref/u.grid " + d / "sim/u.grid").code == 0);
}

TEST_CASE("inspect prints analysis and plans") {
    Result r = run("inspect " + corpus("box3d2r"));
    CHECK(r.code == 0);
    CHECK(r.out.find("flops: 249") != std::string::npos);
    Result d = run("inspect " + fixture("center3d") + " --dfir");
    CHECK(d.code == 0);
    CHECK(d.out.find("iterations: 3") != std::string::npos);
    Result p = run("inspect " + fixture("pml3d") + " --plan");
    CHECK(p.code == 0);
    CHECK(p.out.find("slab7") != std::string::npos);
}
