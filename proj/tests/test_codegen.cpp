#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include "golden_cases.hpp"
#include "test_util.hpp"

using namespace stencilc;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

std::multiset<std::string> pragmas(const std::string &text) {
    std::multiset<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        auto p = line.find("#pragma");
        if (p != std::string::npos)
            out.insert(line.substr(p));
    }
    return out;
}

std::size_t count_of(const std::string &text, const std::string &needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1))
        ++n;
    return n;
}

// Evaluates `+`, `*` and parentheses over integers and one-letter variables.
struct MiniEval {
    std::string s;
    std::size_t p = 0;
    std::map<std::string, std::int64_t> vars;

    void ws() {
        while (p < s.size() && s[p] == ' ')
            ++p;
    }
    std::int64_t atom() {
        ws();
        if (s[p] == '(') {
            ++p;
            auto v = sum();
            ws();
            ++p; // ')'
            return v;
        }
        std::size_t b = p;
        while (p < s.size() && std::isalnum(static_cast<unsigned char>(s[p])))
            ++p;
        std::string tok = s.substr(b, p - b);
        return std::isdigit(static_cast<unsigned char>(tok[0])) ? std::stoll(tok) : vars.at(tok);
    }
    std::int64_t product() {
        auto v = atom();
        for (ws(); p < s.size() && s[p] == '*'; ws()) {
            ++p;
            v *= atom();
        }
        return v;
    }
    std::int64_t sum() {
        auto v = product();
        for (ws(); p < s.size() && s[p] == '+'; ws()) {
            ++p;
            v += product();
        }
        return v;
    }
};

} // namespace

TEST_CASE("generated code matches the golden snapshots") {
    const bool update = std::getenv("STENCILC_UPDATE_GOLDEN") != nullptr;
    for (const GoldenCase &c : golden_cases()) {
        INFO(c.name);
        const std::string text = c.make().joined();
        CHECK(text == c.make().joined());
        const fs::path path = fs::path(STENCILC_GOLDEN_DIR) / (std::string(c.name) + ".txt");
        if (update) {
            fs::create_directories(path.parent_path());
            std::ofstream(path, std::ios::binary) << text;
            continue;
        }
        REQUIRE_MESSAGE(fs::exists(path), "missing snapshot; rerun with STENCILC_UPDATE_GOLDEN=1");
        CHECK(testutil::read_file(path.string()) == text);
    }
}

TEST_CASE("OpenMP templates place exactly their pragmas") {
    SourceUnit u = testutil::corpus_unit("star3d2r");
    const std::string pf = "#pragma omp parallel for default(shared) schedule(runtime)";
    using M = std::multiset<std::string>;
    CHECK(pragmas(omp_for(u, "st.omp(template=\"loop\")").joined()) == M{pf});
    CHECK(pragmas(omp_for(u, "st.omp(template=\"loop_blocking\", blockDims=(8, 8))").joined()) ==
          M{pf});
    CHECK(pragmas(omp_for(u, "st.omp(template=\"loop_blocking_collapse\", blockDims=(8, 8))")
                      .joined()) == M{pf + " collapse(2)"});
    CHECK(pragmas(omp_for(u, "st.omp(template=\"tasks_blocking\", blockDims=(8, 8))").joined()) ==
          M{"#pragma omp parallel default(shared)", "#pragma omp master", "#pragma omp task",
            "#pragma omp taskwait"});
    CHECK(pragmas(omp_for(u, "st.omp(template=\"taskloop\")").joined()) ==
          M{"#pragma omp parallel default(shared)", "#pragma omp single",
            "#pragma omp taskloop"});
    CHECK(pragmas(gen_serial(u).joined()).empty());
}

TEST_CASE("slab7 emits one loop nest per region") {
    SourceUnit u = testutil::parse_valid(corpus_fixture_source("pml3d"));
    OmpPlan p = plan_omp(analyze_kernel(u.kernels[0]), u.launch->params);
    CHECK(p.decomposition == Decomposition::slab7);
    CodegenOptions o;
    o.decomposition = p.decomposition;
    const std::string text = gen_openmp(u, p, o).joined();
    CHECK(count_of(text, "#pragma omp parallel for") == 7);
    for (const char *code : {"111", "**0", "**2", "*01", "*21", "011", "211"})
        CHECK(text.find(std::string(": ") + code + " ") != std::string::npos);
}

TEST_CASE("GPU templates emit their distinguishing constructs") {
    SourceUnit u = testutil::corpus_unit("star3d2r");
    const StencilInfo info = analyze_kernel(u.kernels[0]);
    auto gpu = [&](const std::string &b) { return gen_gpu(u, plan_gpu(info, params_of(b))).joined(); };

    const std::string f4 = gpu("st.cuda(template=\"f4\")");
    CHECK(f4.find("float4") != std::string::npos);
    CHECK(gpu("st.cuda(template=\"smem\")").find("__shared__") != std::string::npos);
    CHECK(gpu("st.cuda(template=\"smem\")").find("__syncthreads()") != std::string::npos);
    CHECK(gpu("st.cuda(template=\"gmem\")").find("__shared__") == std::string::npos);

    const std::string async =
        gpu("st.cuda(template=\"unroll\", computeCapability=\"9.0\", asyncMemcpy=True)");
    CHECK(async.find("__pipeline_memcpy_async") != std::string::npos);
    CHECK(async.find("__pipeline_commit()") != std::string::npos);
    CHECK(async.find("__pipeline_wait_prior(0)") != std::string::npos);
    const std::string sync = gpu("st.cuda(template=\"unroll\", computeCapability=\"9.0\")");
    CHECK(sync.find("__pipeline") == std::string::npos);

    // written grids are mutable, read-only grids const
    CHECK(std::regex_search(async, std::regex(R"(const float \*__restrict__ u, float \*__restrict__ v)")));
}

TEST_CASE("the flattening scheme is a bijection over the padded grid") {
    for (auto ext : std::vector<std::vector<std::int64_t>>{{7}, {5, 3}, {4, 6, 3}})
        for (int order = 0; order <= 2; ++order) {
            IndexScheme s;
            s.extents = ext;
            s.order = order;
            std::set<std::int64_t> seen;
            const int dims = static_cast<int>(ext.size());
            Index i{0, 0, 0};
            auto lo = [&](int d) { return d < dims ? -order : 0; };
            auto hi = [&](int d) { return d < dims ? ext[static_cast<std::size_t>(d)] + order : 1; };
            MiniEval ev;
            ev.s = s.c_flat({"a", "b", "c"});
            for (i[0] = lo(0); i[0] < hi(0); ++i[0])
                for (i[1] = lo(1); i[1] < hi(1); ++i[1])
                    for (i[2] = lo(2); i[2] < hi(2); ++i[2]) {
                        const auto f = s.flat(i);
                        CHECK(f >= 0);
                        CHECK(f < s.padded_size());
                        seen.insert(f);
                        ev.p = 0;
                        ev.vars = {{"a", i[0]}, {"b", i[1]}, {"c", i[2]}};
                        CHECK(ev.sum() == f);
                    }
            CHECK(static_cast<std::int64_t>(seen.size()) == s.padded_size());
            GridBuffer g(DType::f32, ext, order);
            CHECK(s.flat({0, 0, 0}) == g.flat({0, 0, 0}));
        }
}

TEST_CASE("dataflow programs list states and schedule") {
    CorpusOptions o;
    o.shape = {8, 8, 4};
    o.literal_iterations = 1000;
    o.backend = "st.dataflow()";
    DataflowProgram p = build_dataflow(testutil::corpus_unit("box3d2r", o), {});
    GeneratedArtifact a = gen_dataflow_program(p);
    REQUIRE(a.find("program.df"));
    REQUIRE(a.find("layout.df"));
    const std::string &prog = a.find("program.df")->text;
    CHECK(count_of(prog, "STATE_PREP_TRANS_") >= 6);
    for (const auto &s : p.machine.states)
        CHECK(prog.find(s) != std::string::npos);
    for (const CommStep &st : p.schedule)
        for (const CommAction &a : st.actions)
            CHECK(prog.find("step " + st.key() + " " + dir_letter(a.quadrant) + " send " +
                            a.send.str() + " " + dir_letter(a.send_to) + " recv " +
                            dir_letter(a.recv_from) + " " + a.recv_into.str()) !=
                  std::string::npos);

    DataflowProgram c = build_dataflow(testutil::parse_valid(corpus_fixture_source("center3d")), {});
    CHECK(c.schedule.empty());
    CHECK(gen_dataflow_program(c).find("program.df")->text.find("STATE_TRANS_") == std::string::npos);
}

TEST_CASE("fingerprints depend on the plan") {
    SourceUnit u = testutil::corpus_unit("star2d1r");
    auto a = omp_for(u, "st.omp(template=\"loop\")");
    auto b = omp_for(u, "st.omp(template=\"taskloop\")");
    CHECK(a.fingerprint.size() == 16);
    CHECK(a.fingerprint != b.fingerprint);
    CHECK(a.fingerprint == omp_for(u, "st.omp(template=\"loop\")").fingerprint);
}

TEST_CASE("drivers name every grid") {
    SourceUnit u = testutil::corpus_unit("star2d1r");
    GeneratedArtifact a = gen_serial(u);
    const std::string d = gen_driver(u, a);
    CHECK(d.find("int main") != std::string::npos);
    CHECK(d.find(a.entry) != std::string::npos);
    CHECK(d.find("fopen") != std::string::npos);
    CHECK(d.find("argc") != std::string::npos);
}
