// One line per acceptance criterion; exit status 1 if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "golden_cases.hpp"
#include "stencilc/simulator.hpp"

using namespace stencilc;
namespace fs = std::filesystem;

namespace {

constexpr double kMaxError = 1e-7; // relative to the reference's value scale
constexpr double kMaxRmsd = 1e-8;

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::pass;
    std::string detail;
};

Outcome pass(std::string d) { return {Verdict::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::fail, std::move(d)}; }

struct Worst {
    double max = 0, rmsd = 0;
    std::string where;
    std::int64_t combos = 0, failures = 0;

    void add(const std::string &what, const GridSet &ref, const GridSet &got) {
        ++combos;
        bool bad = false;
        for (const auto &[g, buf] : ref) {
            ComparisonReport r = compare(buf, got.at(g));
            if (r.rel_max() > max) {
                max = r.rel_max();
                where = what;
            }
            rmsd = std::max(rmsd, r.rel_rmsd());
            bad = bad || r.rel_max() > kMaxError || r.rel_rmsd() > kMaxRmsd;
        }
        failures += bad ? 1 : 0;
    }
    Outcome outcome() const {
        std::ostringstream o;
        o << combos << " combinations, worst rel max " << max;
        if (!where.empty())
            o << " (" << where << ")";
        o << ", worst rel rmsd " << rmsd;
        if (failures)
            o << ", " << failures << " over tolerance";
        return {failures ? Verdict::fail : Verdict::pass, o.str()};
    }
};

const std::vector<std::string> &table6() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto &k : corpus_kernels())
            if (!k.j_kernel)
                v.push_back(k.name);
        return v;
    }();
    return names;
}

// ---- 1 ---------------------------------------------------------------------

Outcome flop_counts() {
    const std::map<std::string, int> expected = {
        {"star2d1r", 9},   {"star2d2r", 17},  {"star2d3r", 25},  {"star2d4r", 33},
        {"star3d1r", 13},  {"star3d2r", 25},  {"star3d3r", 37},  {"star3d4r", 49},
        {"box2d1r", 17},   {"box2d2r", 49},   {"box2d3r", 97},   {"box2d4r", 161},
        {"box3d1r", 53},   {"box3d2r", 249},  {"box3d3r", 685},  {"box3d4r", 1457},
    };
    int ok = 0;
    std::string bad;
    for (const auto &[name, want] : expected) {
        SourceUnit u = testutil::parse_valid(testutil::read_file(testutil::corpus_path(name)));
        const int got = analyze_kernel(u.kernels.at(0)).flops_per_point;
        if (got == want)
            ++ok;
        else
            bad += " " + name + "=" + std::to_string(got);
    }
    return ok == 16 ? pass("16/16 rows exact") : fail(std::to_string(ok) + "/16 exact;" + bad);
}

// ---- 2 ---------------------------------------------------------------------

Outcome pattern_bijection() {
    auto rotated = [](Dir d) {
        switch (d) {
        case Dir::N: return Dir::W;
        case Dir::W: return Dir::S;
        case Dir::S: return Dir::E;
        case Dir::E: return Dir::N;
        }
        return d;
    };
    for (int r = 1; r <= 4; ++r) {
        std::set<PatternId> seen;
        for (int x = -r; x <= r; ++x)
            for (int y = -r; y <= r; ++y) {
                if (x == 0 && y == 0) {
                    if (!pattern_id_of(0, 0).center)
                        return fail("origin is not CENTER");
                    continue;
                }
                PatternId p = pattern_id_of(x, y);
                if (p.center || p.i < 1 || p.i > r || p.j < 0 || p.j > r || !seen.insert(p).second)
                    return fail("offset (" + std::to_string(x) + "," + std::to_string(y) +
                                ") maps badly at r=" + std::to_string(r));
                PatternId q = pattern_id_of(-y, x);
                if (q.i != p.i || q.j != p.j || q.quadrant != rotated(p.quadrant))
                    return fail("rotation breaks at (" + std::to_string(x) + "," +
                                std::to_string(y) + ")");
            }
        if (static_cast<int>(seen.size()) != 4 * r * (r + 1))
            return fail("r=" + std::to_string(r) + " covers " + std::to_string(seen.size()));
    }
    return pass("bijective onto 4r(r+1) patterns for r=1..4, rotation holds");
}

// ---- 3 ---------------------------------------------------------------------

std::vector<PatternId> box3d2r_order() {
    auto offs = stencil_offsets(StencilShape::box, 3, 2);
    return sort_dependencies(annotate_zmax({offs.begin(), offs.end()}));
}

Outcome box3d2r_schedule() {
    const char *table[6][4][4] = {
        {{"0", "South", "North", "N10"}, {"0", "West", "East", "E10"},
         {"0", "North", "South", "S10"}, {"0", "East", "West", "W10"}},
        {{"N10", "South", "North", "N20"}, {"E10", "West", "East", "E20"},
         {"S10", "North", "South", "S20"}, {"W10", "East", "West", "W20"}},
        {{"N10", "East", "North", "N11"}, {"E10", "South", "East", "E11"},
         {"S10", "West", "South", "S11"}, {"W10", "North", "West", "W11"}},
        {{"N11", "South", "North", "N21"}, {"E11", "West", "East", "E21"},
         {"S11", "North", "South", "S21"}, {"W11", "East", "West", "W21"}},
        {{"N20", "East", "North", "N12"}, {"E20", "South", "East", "E12"},
         {"S20", "West", "South", "S12"}, {"W20", "North", "West", "W12"}},
        {{"N12", "South", "North", "N22"}, {"E12", "West", "East", "E22"},
         {"S12", "North", "South", "S22"}, {"W12", "East", "West", "W22"}},
    };
    auto steps = build_comm_schedule(box3d2r_order());
    if (steps.size() != 6)
        return fail(std::to_string(steps.size()) + " steps");
    int cells = 0;
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t q = 0; q < 4; ++q) {
            const CommAction &a = steps[s].actions[q];
            const bool same = a.send.str() == table[s][q][0] && dir_name(a.send_to) == table[s][q][1] &&
                              dir_name(a.recv_from) == table[s][q][2] &&
                              a.recv_into.str() == table[s][q][3];
            if (!same)
                return fail("step " + std::to_string(s + 1) + " quadrant " + std::to_string(q) +
                            " differs");
            ++cells;
        }
    return pass(std::to_string(cells) + "/24 cells match");
}

// ---- 4 ---------------------------------------------------------------------

Outcome dependency_chains() {
    auto order = [](std::initializer_list<const char *> names) {
        PatternSet s;
        for (const char *n : names)
            s.patterns.insert(*parse_pattern(n));
        std::string out;
        for (const auto &p : sort_dependencies(s))
            out += p.str() + " ";
        return out;
    };
    if (order({"N20", "N10"}) != "N10 N20 ")
        return fail("N chain");
    if (order({"E30", "E20", "E10"}) != "E10 E20 E30 ")
        return fail("E chain");
    if (order({"W22", "W21", "W20", "W10"}) != "W10 W20 W21 W22 ")
        return fail("W chain");
    for (Dir q : kDirs) {
        std::string keys;
        for (const auto &p : box3d2r_order())
            if (p.quadrant == q)
                keys += std::to_string(p.i) + std::to_string(p.j) + " ";
        if (keys != "10 20 11 21 12 22 ")
            return fail(std::string(1, dir_letter(q)) + " quadrant order " + keys);
    }
    return pass("N10<N20, E10<E20<E30, W10<W20<W21<W22, box3d2r 10,20,11,21,12,22");
}

// ---- 5 ---------------------------------------------------------------------

SourceUnit dataflow_unit(const std::string &name, std::int64_t steps,
                         std::vector<std::int64_t> shape) {
    CorpusOptions o;
    o.shape = std::move(shape);
    o.literal_iterations = steps;
    o.backend = "st.dataflow()";
    return testutil::corpus_unit(name, o);
}

Outcome state_machine() {
    DataflowProgram p = build_dataflow(dataflow_unit("box3d2r", 1000, {8, 8, 4}), {});
    const StateMachine &m = p.machine;
    if (m.states.size() != 17)
        return fail(std::to_string(m.states.size()) + " states");
    if (m.after_check(999) != "STATE_PREP_TRANS_10" || m.after_check(1000) != "STATE_TEARDOWN" ||
        m.transitions.at("STATE_SETUP").front() != "STATE_PREP_TRANS_10" ||
        m.transitions.at("STATE_TEARDOWN").front() != "STATE_EXIT")
        return fail("branch semantics");
    for (std::int64_t t = 1; t <= 5; ++t) {
        SourceUnit u = dataflow_unit("box3d2r", t, {6, 6, 4});
        SimulationTrace trace;
        Simulator(build_dataflow(u, {}), random_grids(u, 1)).run_to_exit(&trace);
        if (trace.count("STATE_UPDATE_STENCIL") != t)
            return fail("T=" + std::to_string(t) + " entered UPDATE_STENCIL " +
                        std::to_string(trace.count("STATE_UPDATE_STENCIL")) + " times");
    }
    return pass("17 states, ITERATION_CHECK loops until 1000, UPDATE_STENCIL entered T times for T=1..5");
}

// ---- 6 ---------------------------------------------------------------------

Outcome numerical_suite() {
    Worst w;
    for (const std::string &name : table6()) {
        const CorpusKernel &k = *find_corpus_kernel(name);
        SourceUnit u = testutil::corpus_unit(name); // 96^2 or 24^3, T = 5
        const StencilInfo info = analyze_kernel(u.kernels[0]);
        GridSet in = random_grids(u, 1000 + static_cast<std::uint64_t>(w.combos));
        GridSet ref = run_target(u, in);

        std::vector<GpuTemplate> gpu = {GpuTemplate::gmem, GpuTemplate::smem, GpuTemplate::f4,
                                        GpuTemplate::shift, GpuTemplate::unroll};
        if (k.shape == StencilShape::star)
            gpu.push_back(GpuTemplate::semi);
        for (GpuTemplate t : gpu) {
            GpuPlan p;
            p.tmpl = t;
            p.block = k.dims == 3 ? std::array<int, 3>{16, 8, 8} : std::array<int, 3>{32, 8, 1};
            p.plane = {32, 8};
            p.mem_type = k.shape == StencilShape::star ? MemType::registers : MemType::shared;
            p.blocking = build_mir(info, u.kernels[0], gpu_template_name(t)).blocking;
            w.add(name + "/gpu-" + std::string(gpu_template_name(t)), ref, run_tile_plan(u, p, in));
        }
        OmpPlan tasks;
        tasks.tmpl = OmpTemplate::tasks_blocking;
        tasks.block = std::array<int, 2>{8, 8};
        w.add(name + "/omp-tasks_blocking", ref, run_omp_plan(u, tasks, in));
        if (k.shape == StencilShape::star) {
            w.add(name + "/semi", ref, run_semi(u, in));
            OmpPlan semi;
            semi.algorithm = OmpAlgorithm::semi;
            w.add(name + "/omp-semi", ref, run_omp_plan(u, semi, in));
        }
    }
    Outcome o = w.outcome();
    if (w.combos < 60) {
        o.verdict = Verdict::fail;
        o.detail += ", fewer than 60 combinations";
    }
    return o;
}

// ---- 7 ---------------------------------------------------------------------

Outcome dataflow_end_to_end() {
    Worst w;
    for (const std::string &name : table6()) {
        if (find_corpus_kernel(name)->dims != 3)
            continue;
        SourceUnit u = dataflow_unit(name, 5, {9, 9, 6});
        GridSet in = random_grids(u, 77);
        w.add(name, run_target(u, in), Simulator(build_dataflow(u, {}), in).run_to_exit());
    }
    return w.outcome();
}

// ---- 8 ---------------------------------------------------------------------

MapSpecRaw raw_map(const std::string &args) {
    std::string src = "@st.kernel\ndef k(u: st.grid, v: st.grid):\n    v.at(0, 0).set(u.at(0, 0))\n\n";
    src += "@st.target\ndef t(u: st.grid, v: st.grid, x: st.i32, y: st.i32, p: st.i32, x1: st.i32, "
           "x2: st.i32, y1: st.i32, y2: st.i32):\n";
    src += "    st.map(" + args + ")(k)(u, v)\n\n";
    src += "u = st.grid(dtype=st.f32, shape=(12, 12), order=1)\n";
    src += "v = st.grid(dtype=st.f32, shape=(12, 12), order=1)\n";
    return parse_source(src).targets.at(0).body.at(0).map;
}

Outcome desugar_and_cover() {
    const Affine x = Affine::symbol("x"), y = Affine::symbol("y"), p = Affine::symbol("p"),
                 x1 = Affine::symbol("x1"), x2 = Affine::symbol("x2"), y1 = Affine::symbol("y1"),
                 y2 = Affine::symbol("y2");
    using Q = std::array<Affine, 4>;
    struct Rule {
        const char *args;
        Q d0, d1;
    };
    const std::vector<Rule> rules = {
        {"i=x, j=y", {0, 0, x, x}, {0, 0, y, y}},
        {"i=x, j=y, w=p", {0, p, x - p, x}, {0, p, y - p, y}},
        {"i=(x1, x2), j=(y1, y2)", {x1, x1, x2, x2}, {y1, y1, y2, y2}},
        {"i=(x1, x2), j=(y1, y2), e=p", {x1, x1 + p, x2 - p, x2}, {y1, y1 + p, y2 - p, y2}},
        {"e=(x, y)", {0, 0, x, x}, {0, 0, y, y}},
        {"e=(x, y), w=p", {0, p, x - p, x}, {0, p, y - p, y}},
    };
    for (const Rule &r : rules) {
        MapSpec m = desugar_map(raw_map(r.args), 2);
        if (m.bounds[0] != r.d0 || m.bounds[1] != r.d1)
            return fail(std::string("rule map(") + r.args + ")");
    }
    std::int64_t domains = 0;
    for (auto b : std::vector<std::array<std::int64_t, 4>>{
             {0, 3, 9, 12}, {0, 0, 12, 12}, {0, 1, 11, 12}, {0, 6, 6, 12}, {2, 4, 5, 12}})
        for (auto s : {Decomposition::unified, Decomposition::cross_product, Decomposition::slab7}) {
            MapBounds m;
            m.dims = 3;
            m.b = {b, std::array<std::int64_t, 4>{0, 2, 10, 12}, b};
            auto regions = decompose_regions(m, s);
            std::array<std::int64_t, kMaxDims> q{};
            for (q[0] = m.lo(0); q[0] < m.hi(0); ++q[0])
                for (q[1] = m.lo(1); q[1] < m.hi(1); ++q[1])
                    for (q[2] = m.lo(2); q[2] < m.hi(2); ++q[2]) {
                        int hits = 0;
                        for (const Region &r : regions)
                            hits += r.contains(q) ? 1 : 0;
                        if (hits != 1)
                            return fail(std::string(decomposition_name(s)) + " covers a point " +
                                        std::to_string(hits) + " times");
                    }
            ++domains;
        }
    return pass("6/6 rules exact, " + std::to_string(domains) +
                " decompositions cover 12^3 domains exactly once");
}

// ---- 9 ---------------------------------------------------------------------

Outcome codegen_determinism() {
    int snapshots = 0;
    for (const auto &c : testutil::golden_cases()) {
        const std::string a = c.make().joined();
        if (a != c.make().joined())
            return fail(std::string(c.name) + " differs between runs");
        const fs::path path = fs::path(STENCILC_GOLDEN_DIR) / (std::string(c.name) + ".txt");
        if (testutil::read_file(path.string()) != a)
            return fail(std::string(c.name) + " differs from its snapshot");
        ++snapshots;
    }
    SourceUnit u = testutil::corpus_unit("star3d2r");
    const std::string pf = "#pragma omp parallel for default(shared) schedule(runtime)";
    const std::vector<std::pair<std::string, std::multiset<std::string>>> expected = {
        {"st.omp(template=\"loop\")", {pf}},
        {"st.omp(template=\"loop_blocking\", blockDims=(8, 8))", {pf}},
        {"st.omp(template=\"loop_blocking_collapse\", blockDims=(8, 8))", {pf + " collapse(2)"}},
        {"st.omp(template=\"tasks_blocking\", blockDims=(8, 8))",
         {"#pragma omp parallel default(shared)", "#pragma omp master", "#pragma omp task",
          "#pragma omp taskwait"}},
        {"st.omp(template=\"taskloop\")",
         {"#pragma omp parallel default(shared)", "#pragma omp single", "#pragma omp taskloop"}},
    };
    for (const auto &[backend, want] : expected) {
        std::multiset<std::string> got;
        std::istringstream in(testutil::omp_for(u, backend).joined());
        for (std::string line; std::getline(in, line);)
            if (auto p = line.find("#pragma"); p != std::string::npos)
                got.insert(line.substr(p));
        if (got != want)
            return fail("pragmas of " + backend);
    }
    const StencilInfo info = analyze_kernel(u.kernels[0]);
    auto gpu = [&](const std::string &b) {
        return gen_gpu(u, plan_gpu(info, testutil::params_of(b))).joined();
    };
    const bool on = gpu("st.cuda(template=\"unroll\", computeCapability=\"9.0\", asyncMemcpy=True)")
                        .find("__pipeline_memcpy_async") != std::string::npos;
    const bool off = gpu("st.cuda(template=\"unroll\", computeCapability=\"9.0\")")
                         .find("__pipeline") != std::string::npos;
    if (!on || off)
        return fail("async copy sequence not gated on asyncMemcpy");
    return pass(std::to_string(snapshots) + " snapshots stable, 5 pragma multisets exact, async gated");
}

// ---- 10 --------------------------------------------------------------------

Outcome host_toolchain() {
    const char *cc = std::getenv("CC");
    const std::string compiler = cc && *cc ? cc : "cc";
    const fs::path dir = fs::temp_directory_path() / ("stencilc_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string probe = (dir / "probe.c").string();
    {
        std::ofstream(probe) << "#include <omp.h>\nint main(void) { return omp_get_max_threads() > 0 ? 0 : 1; }\n";
    }
    if (std::system((compiler + " -fopenmp " + probe + " -o " + (dir / "probe").string() +
                     " >/dev/null 2>&1")
                        .c_str()) != 0) {
        fs::remove_all(dir);
        return {Verdict::skip, "no C compiler with OpenMP (" + compiler + ")"};
    }
    Worst w;
    for (const char *name : {"star2d4r", "star3d2r"}) {
        SourceUnit u = testutil::corpus_unit(name);
        GridSet in = random_grids(u, 4242);
        GridSet ref = run_target(u, in);
        std::vector<std::pair<std::string, GeneratedArtifact>> artifacts = {
            {"serial", gen_serial(u)},
            {"omp-loop", testutil::omp_for(u, "st.omp(template=\"loop\")")},
            {"omp-tasks", testutil::omp_for(u, "st.omp(template=\"tasks_blocking\", blockDims=(8, 8))")},
            {"omp-taskloop", testutil::omp_for(u, "st.omp(template=\"taskloop\")")},
        };
        for (auto &[label, art] : artifacts) {
            const fs::path work = dir / (std::string(name) + "_" + label);
            fs::create_directories(work);
            std::string sources;
            for (const auto &f : art.files) {
                std::ofstream((work / f.path).string()) << f.text;
                sources += " " + (work / f.path).string();
            }
            std::ofstream((work / "driver.c").string()) << gen_driver(u, art);
            sources += " " + (work / "driver.c").string();
            const std::string exe = (work / "driver").string();
            if (std::system((compiler + " -O2 -ffp-contract=off -fopenmp" + sources + " -o " + exe +
                             " >/dev/null 2>&1")
                                .c_str()) != 0) {
                fs::remove_all(dir);
                return fail(std::string(name) + "/" + label + " does not compile");
            }
            std::string args;
            for (const auto &g : u.grids) {
                save_grid((work / ("in_" + g.name)).string(), in.at(g.name));
                args += " " + (work / ("in_" + g.name)).string();
            }
            for (const auto &g : u.grids)
                args += " " + (work / ("out_" + g.name)).string();
            if (std::system((exe + args).c_str()) != 0) {
                fs::remove_all(dir);
                return fail(std::string(name) + "/" + label + " driver failed");
            }
            GridSet got;
            for (const auto &g : u.grids)
                got[g.name] = load_grid((work / ("out_" + g.name)).string());
            w.add(std::string(name) + "/" + label, ref, got);
        }
    }
    fs::remove_all(dir);
    return w.outcome();
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"FLOP counts of the star/box kernels", flop_counts},
        {"pattern identifiers form a bijection", pattern_bijection},
        {"box3d2r communication schedule", box3d2r_schedule},
        {"dependency chains", dependency_chains},
        {"state machine and iteration count", state_machine},
        {"numerical accuracy of plans vs reference", numerical_suite},
        {"dataflow simulation vs reference", dataflow_end_to_end},
        {"map desugaring and region cover", desugar_and_cover},
        {"codegen determinism and pragma placement", codegen_determinism},
        {"compiled serial/OpenMP artifacts vs reference", host_toolchain},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception &e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char *tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
        failed += o.verdict == Verdict::fail ? 1 : 0;
        std::printf("criterion %2zu %s: %s; %s (%.2fs)\n", i + 1, tag, criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
    }
    std::printf("tolerances: relative max error %.0e, relative rmsd %.0e\n", kMaxError, kMaxRmsd);
    return failed ? 1 : 0;
}
