#include <doctest.h>

#include <functional>

#include "stencilc/corpus.hpp"
#include "stencilc/frontend.hpp"
#include "test_util.hpp"

using namespace stencilc;

namespace {

int count_reads(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::read: return 1;
    case Expr::Kind::unary: return count_reads(*e.lhs);
    case Expr::Kind::binary: return count_reads(*e.lhs) + count_reads(*e.rhs);
    default: return 0;
    }
}

bool mentions(const std::vector<Diagnostic> &ds, const std::string &needle) {
    for (const auto &d : ds)
        if (d.message.find(needle) != std::string::npos)
            return true;
    return false;
}

std::vector<Diagnostic> parse_errors(const std::string &text) {
    try {
        parse_source(text);
    } catch (const CompileError &e) {
        return e.diagnostics();
    }
    return {};
}

} // namespace

TEST_CASE("the star2d4r CUDA fixture parses into one kernel, one target and two grids") {
    SourceUnit u = parse_source(star2d4r_cuda_source());
    CHECK(u.has_import);
    REQUIRE(u.kernels.size() == 1);
    const KernelDecl &k = u.kernels[0];
    CHECK(k.name == "kernel_star2d4r");
    REQUIRE(k.updates().size() == 1);
    CHECK(count_reads(*k.updates()[0]->value) == 17);
    CHECK(k.updates()[0]->name == "v");

    REQUIRE(u.targets.size() == 1);
    const TargetDecl &t = u.targets[0];
    REQUIRE(t.body.size() == 1);
    CHECK(t.body[0].kind == Stmt::Kind::for_range);
    CHECK(t.body[0].count == Affine::symbol("iter"));
    REQUIRE(t.body[0].body.size() == 2);
    CHECK(t.body[0].body[0].kind == Stmt::Kind::map);
    CHECK(t.body[0].body[1].kind == Stmt::Kind::swap);

    REQUIRE(u.grids.size() == 2);
    for (const GridDecl &g : u.grids) {
        CHECK(g.shape == std::vector<std::int64_t>{1000, 1000});
        CHECK(g.order == 4);
        CHECK(g.dtype == DType::f32);
    }
    REQUIRE(u.launch);
    CHECK(u.launch->backend == BackendKind::gpu);
    CHECK(u.launch->find("threadsPerBlock")->ints == std::vector<std::int64_t>{16, 8, 8});
    CHECK(u.launch->find("template")->symbol() == "gmem");
    CHECK(u.launch->args.back().value == 1000);
    CHECK(validate(u).empty());
}

TEST_CASE("identity kernel is a single zero-offset read") {
    SourceUnit u = testutil::parse_valid(
        testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0))\n", "(4, 4)", 0, 1));
    const KernelStmt *s = u.kernels[0].updates().at(0);
    REQUIRE(s->value->kind == Expr::Kind::read);
    CHECK(s->value->text == "u");
    CHECK(s->value->offset.is_zero());
    CHECK(s->value->offset.dims == 2);
}

TEST_CASE("missing type hint is rejected with the parameter's position") {
    auto ds = parse_errors("@st.kernel\ndef k(u, v: st.grid):\n    v.at(0).set(u.at(0))\n");
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].message.find("'u'") != std::string::npos);
    CHECK(ds[0].message.find("type hint") != std::string::npos);
    CHECK(ds[0].pos.line == 2);
    CHECK(ds[0].pos.col == 7);
}

TEST_CASE("syntax errors and unknown constructs carry positions") {
    SUBCASE("stray token") {
        auto ds = parse_errors("u = st.grid(dtype=st.f32, shape=(4,), order=1) )\n");
        REQUIRE_FALSE(ds.empty());
        CHECK(ds[0].pos.line == 1);
    }
    SUBCASE("host code in a target") {
        auto ds = parse_errors("@st.target\ndef t(u: st.grid):\n    print(u)\n");
        REQUIRE_FALSE(ds.empty());
        CHECK(ds[0].pos.line == 3);
    }
    SUBCASE("offset arity") {
        auto ds = parse_errors(testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0, 1))\n",
                                                     "(4, 4)", 1, 1));
        if (ds.empty()) {
            // arity can only be checked once grids are known
            SourceUnit u = parse_source(testutil::wrap_kernel(
                "    v.at(0, 0).set(u.at(0, 0, 1))\n", "(4, 4)", 1, 1));
            ds = validate(u);
        }
        REQUIRE_FALSE(ds.empty());
        CHECK(ds[0].pos.line > 0);
    }
    SUBCASE("unterminated bracket") {
        auto ds = parse_errors("u = st.grid(dtype=st.f32, shape=(4,\n");
        REQUIRE_FALSE(ds.empty());
        CHECK(ds[0].pos.line >= 1);
    }
}

TEST_CASE("validate reports unknown kernels and offsets beyond the halo") {
    SUBCASE("unknown kernel") {
        std::string src = testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0))\n", "(4, 4)", 1, 1);
        src.replace(src.find("(k)(u, v)"), 9, "(nope)(u, v)");
        auto ds = validate(parse_source(src));
        REQUIRE(ds.size() == 1);
        CHECK(mentions(ds, "unknown kernel 'nope'"));
    }
    SUBCASE("offset exceeds halo") {
        SourceUnit u = parse_source(
            testutil::wrap_kernel("    v.at(0, 0).set(u.at(5, 0))\n", "(16, 16)", 4, 1));
        auto ds = validate(u);
        REQUIRE(ds.size() == 1);
        CHECK(mentions(ds, "offset exceeds halo"));
    }
    SUBCASE("unknown backend parameter") {
        std::string src = testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0))\n", "(4, 4)", 1, 1);
        src.replace(src.find("st.seq()"), 8, "st.omp(tempalte=\"loop\")");
        auto ds = validate(parse_source(src));
        REQUIRE(ds.size() == 1);
        CHECK(mentions(ds, "unknown parameter 'tempalte'"));
    }
    SUBCASE("mixed element types") {
        std::string src = testutil::wrap_kernel("    v.at(0, 0).set(u.at(0, 0))\n", "(4, 4)", 1, 1);
        src.replace(src.rfind("st.f32"), 6, "st.f64");
        CHECK(mentions(validate(parse_source(src)), "mixed element types"));
    }
}

TEST_CASE("diagnostics are sorted by position and deterministic") {
    std::string src = testutil::wrap_kernel("    v.at(0, 0).set(u.at(5, 0) + w.at(0, 0))\n",
                                            "(16, 16)", 4, 1);
    src.replace(src.find("(k)(u, v)"), 9, "(nope)(u, v)");
    SourceUnit u = parse_source(src);
    auto a = validate(u), b = validate(u);
    REQUIRE(a.size() >= 2);
    for (std::size_t i = 1; i < a.size(); ++i)
        CHECK(a[i - 1].pos <= a[i].pos);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].message == b[i].message);
}

TEST_CASE("print/parse round trip is a fixed point on the corpus") {
    std::vector<std::string> texts;
    for (const auto &k : corpus_kernels())
        texts.push_back(testutil::read_file(testutil::corpus_path(k.name)));
    for (const auto &f : corpus_fixture_names())
        texts.push_back(corpus_fixture_source(f));
    for (const auto &text : texts) {
        REQUIRE_FALSE(text.empty());
        SourceUnit a = parse_source(text);
        CHECK(validate(a).empty());
        const std::string once = print_source(a);
        const std::string twice = print_source(parse_source(once));
        CHECK(once == twice);
        // the printed form keeps every expression intact
        SourceUnit b = parse_source(once);
        REQUIRE(a.kernels.size() == b.kernels.size());
        for (std::size_t i = 0; i < a.kernels.size(); ++i)
            for (std::size_t s = 0; s < a.kernels[i].body.size(); ++s)
                CHECK(same_expr(*a.kernels[i].body[s].value, *b.kernels[i].body[s].value));
    }
}

TEST_CASE("parsing is deterministic") {
    const std::string text = corpus_source("box3d2r");
    CHECK(print_source(parse_source(text)) == print_source(parse_source(text)));
}

TEST_CASE("the corpus files on disk match the generator") {
    for (const auto &k : corpus_kernels())
        CHECK(testutil::read_file(testutil::corpus_path(k.name)) == corpus_source(k.name));
}

TEST_CASE("bind_target takes grids from the launch and ints from overrides") {
    SourceUnit u = testutil::corpus_unit("star2d1r");
    TargetBinding b = bind_target(u);
    REQUIRE(b.target);
    CHECK(b.grids.at("u") == "u");
    CHECK(b.ints.at("iter") == 5);
    CHECK(bind_target(u, {}, {{"iter", 2}}).ints.at("iter") == 2);
}
