#include <doctest.h>

#include <set>

#include "stencilc/dataflow.hpp"
#include "test_util.hpp"

using namespace stencilc;

namespace {

PatternId P(const char *s) { return *parse_pattern(s); }

std::set<OffsetVector> offsets_of(StencilShape shape, int dims, int r) {
    auto v = stencil_offsets(shape, dims, r);
    return {v.begin(), v.end()};
}

std::vector<CommStep> schedule_for(StencilShape shape, int dims, int r) {
    return build_comm_schedule(sort_dependencies(annotate_zmax(offsets_of(shape, dims, r))));
}

SourceUnit dataflow_unit(const std::string &name, std::int64_t steps,
                         std::vector<std::int64_t> shape = {}) {
    CorpusOptions o;
    o.shape = std::move(shape);
    o.literal_iterations = steps;
    o.backend = "st.dataflow()";
    return testutil::corpus_unit(name, o);
}

} // namespace

TEST_CASE("pattern identifiers follow the quadrant case table") {
    CHECK(pattern_id_of(0, 0).center);
    CHECK(pattern_id_of(0, 1) == P("N10"));
    CHECK(pattern_id_of(1, 0) == P("E10"));
    CHECK(pattern_id_of(0, -1) == P("S10"));
    CHECK(pattern_id_of(-1, 0) == P("W10"));
    CHECK(pattern_id_of(2, 1) == P("N12"));
    // i is the distance along the quadrant's axis, j the distance off it
    CHECK(pattern_id_of(1, -2) == P("E12"));
    CHECK(pattern_id_of(2, -1) == P("E21"));
    CHECK(pattern_id_of(-2, -1) == P("S12"));
    CHECK(pattern_id_of(-1, 2) == P("W12"));
    CHECK(P("N12").str() == "N12");
    CHECK_FALSE(parse_pattern("X10"));
    CHECK_FALSE(parse_pattern("N01"));
}

TEST_CASE("pattern_id_of is a bijection onto the quadrant patterns") {
    for (int r = 1; r <= 4; ++r) {
        std::set<PatternId> seen;
        for (int x = -r; x <= r; ++x)
            for (int y = -r; y <= r; ++y) {
                if (x == 0 && y == 0)
                    continue;
                PatternId p = pattern_id_of(x, y);
                CHECK_FALSE(p.center);
                CHECK(p.i >= 1);
                CHECK(p.i <= r);
                CHECK(p.j >= 0);
                CHECK(p.j <= r);
                CHECK(seen.insert(p).second);
                CHECK(pattern_offset(p) == std::array<int, 2>{x, y});
            }
        CHECK(static_cast<int>(seen.size()) == 4 * r * (r + 1));
    }
}

TEST_CASE("rotating an offset counterclockwise rotates its quadrant") {
    auto next = [](Dir d) {
        switch (d) {
        case Dir::N: return Dir::W;
        case Dir::W: return Dir::S;
        case Dir::S: return Dir::E;
        case Dir::E: return Dir::N;
        }
        return d;
    };
    for (int x = -4; x <= 4; ++x)
        for (int y = -4; y <= 4; ++y) {
            if (x == 0 && y == 0)
                continue;
            PatternId a = pattern_id_of(x, y), b = pattern_id_of(-y, x);
            CHECK(a.i == b.i);
            CHECK(a.j == b.j);
            CHECK(b.quadrant == next(a.quadrant));
        }
}

TEST_CASE("zmax annotation") {
    PatternSet box = annotate_zmax(offsets_of(StencilShape::box, 3, 2));
    CHECK(box.patterns.size() == 24);
    for (const PatternId &p : box.patterns)
        CHECK(box.zmax.at(p) == 2);

    PatternSet star = annotate_zmax(offsets_of(StencilShape::star, 3, 4));
    CHECK(star.patterns.size() == 16);
    for (const PatternId &p : star.patterns) {
        CHECK(p.j == 0);
        CHECK(star.zmax.at(p) == 0);
    }
    CHECK(star.zmax.at(PatternId{}) == 4);

    PatternSet single = annotate_zmax({OffsetVector{0, 0, -3}});
    CHECK(single.patterns.empty());
    CHECK(single.zmax.at(PatternId{}) == 3);
}

TEST_CASE("dependency order within each quadrant is ascending (j, i)") {
    auto order = [](std::initializer_list<const char *> names) {
        PatternSet s;
        for (const char *n : names)
            s.patterns.insert(P(n));
        std::vector<std::string> out;
        for (const auto &p : sort_dependencies(s))
            out.push_back(p.str());
        return out;
    };
    CHECK(order({"N20", "N10"}) == std::vector<std::string>{"N10", "N20"});
    CHECK(order({"E30", "E10", "E20"}) == std::vector<std::string>{"E10", "E20", "E30"});
    CHECK(order({"W22", "W21", "W10", "W20"}) ==
          std::vector<std::string>{"W10", "W20", "W21", "W22"});

    auto box = sort_dependencies(annotate_zmax(offsets_of(StencilShape::box, 3, 2)));
    for (Dir q : kDirs) {
        std::vector<std::string> keys;
        for (const auto &p : box)
            if (p.quadrant == q)
                keys.push_back(std::to_string(p.i) + std::to_string(p.j));
        CHECK(keys == std::vector<std::string>{"10", "20", "11", "21", "12", "22"});
    }
}

TEST_CASE("box3d2r schedule matches the reference table cell for cell") {
    // (send, to, from, into) per quadrant N, E, S, W for each of the six steps
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
    auto steps = schedule_for(StencilShape::box, 3, 2);
    REQUIRE(steps.size() == 6);
    for (int s = 0; s < 6; ++s)
        for (int q = 0; q < 4; ++q) {
            const CommAction &a = steps[static_cast<std::size_t>(s)].actions[static_cast<std::size_t>(q)];
            INFO("step " << s + 1 << " quadrant " << q);
            CHECK(a.send.str() == table[s][q][0]);
            CHECK(dir_name(a.send_to) == table[s][q][1]);
            CHECK(dir_name(a.recv_from) == table[s][q][2]);
            CHECK(a.recv_into.str() == table[s][q][3]);
        }
    const std::string text = render_schedule(steps);
    CHECK(text.find("Send N20 to East; Receive from North into N12") != std::string::npos);
}

TEST_CASE("scalar simulation of the schedule delivers every neighbour") {
    // One value per PE; each step every quadrant sends, and a receive from
    // direction d takes what that neighbour sent towards us in the same step.
    const int n = 9;
    auto value = [](int x, int y) { return 1000.0 * x + y + 1.0; };
    for (int dims = 2; dims <= 3; ++dims)
        for (int r = 1; r <= 4; ++r)
            for (StencilShape shape : {StencilShape::star, StencilShape::box}) {
                INFO(shape_name(shape) << dims << "d" << r << "r");
                PatternSet ps = annotate_zmax(offsets_of(shape, dims, r));
                auto steps = build_comm_schedule(sort_dependencies(ps));
                std::vector<std::map<PatternId, double>> buf(n * n);
                auto held = [&](int x, int y, const PatternId &p) {
                    return p.center ? value(x, y) : buf[static_cast<std::size_t>(x * n + y)].at(p);
                };
                for (const CommStep &s : steps) {
                    // outgoing[pe][dir] for this step
                    std::vector<std::map<Dir, double>> out(n * n);
                    for (int x = 0; x < n; ++x)
                        for (int y = 0; y < n; ++y)
                            for (const CommAction &a : s.actions) {
                                auto &slot = out[static_cast<std::size_t>(x * n + y)];
                                REQUIRE(slot.count(a.send_to) == 0); // one payload per link
                                slot[a.send_to] = held(x, y, a.send);
                            }
                    for (int x = 0; x < n; ++x)
                        for (int y = 0; y < n; ++y)
                            for (const CommAction &a : s.actions) {
                                auto st = dir_step(a.recv_from);
                                int sx = x + st[0], sy = y + st[1];
                                double v = 0;
                                if (sx >= 0 && sy >= 0 && sx < n && sy < n)
                                    v = out[static_cast<std::size_t>(sx * n + sy)].at(
                                        opposite(a.recv_from));
                                buf[static_cast<std::size_t>(x * n + y)][a.recv_into] = v;
                            }
                }
                std::int64_t wrong = 0;
                for (int x = 0; x < n; ++x)
                    for (int y = 0; y < n; ++y)
                        for (const PatternId &p : ps.patterns) {
                            auto o = pattern_offset(p);
                            const int ox = x + o[0], oy = y + o[1];
                            const double want =
                                ox >= 0 && oy >= 0 && ox < n && oy < n ? value(ox, oy) : 0.0;
                            wrong += buf[static_cast<std::size_t>(x * n + y)].at(p) == want ? 0 : 1;
                        }
                CHECK(wrong == 0);
            }
}

TEST_CASE("state machines") {
    SUBCASE("box3d2r with 1000 iterations") {
        auto m = build_state_machine(schedule_for(StencilShape::box, 3, 2), 1000);
        CHECK(m.states.size() == 17);
        CHECK(m.first_comm_or_update() == "STATE_PREP_TRANS_10");
        CHECK(m.transitions.at("STATE_TRANS_10") == std::vector<std::string>{"STATE_PREP_TRANS_20"});
        CHECK(m.transitions.at("STATE_TRANS_22") ==
              std::vector<std::string>{"STATE_UPDATE_STENCIL"});
        CHECK(m.after_check(1) == "STATE_PREP_TRANS_10");
        CHECK(m.after_check(999) == "STATE_PREP_TRANS_10");
        CHECK(m.after_check(1000) == "STATE_TEARDOWN");
        for (const char *s : {"STATE_SETUP", "STATE_TEARDOWN", "STATE_EXIT", "STATE_UPDATE_STENCIL",
                              "STATE_ITERATION_CHECK"})
            CHECK(std::find(m.states.begin(), m.states.end(), s) != m.states.end());
    }
    SUBCASE("star2d1r projection, one iteration") {
        auto m = build_state_machine(schedule_for(StencilShape::star, 2, 1), 1);
        CHECK(m.states.size() == 7);
        CHECK(m.after_check(1) == "STATE_TEARDOWN");
    }
    SUBCASE("pure centre kernel") {
        auto m = build_state_machine({}, 2);
        CHECK(m.states.size() == 5);
        CHECK(m.first_comm_or_update() == "STATE_UPDATE_STENCIL");
        CHECK(m.after_check(1) == "STATE_UPDATE_STENCIL");
    }
    SUBCASE("one pair of states per communication key") {
        // star3d4r has keys 10..40, so 8 comm states rather than 32
        auto m = build_state_machine(schedule_for(StencilShape::star, 3, 4), 5);
        CHECK(m.states.size() == 13);
    }
    SUBCASE("zero iterations is rejected") {
        CHECK_THROWS_AS(build_state_machine({}, 0), CompileError);
    }
}

TEST_CASE("relay keys are added when a pattern's feeders are missing") {
    // (2, 1) relays through (1, 1), which is fed from (1, 0)
    auto steps = build_comm_schedule({P("N21")});
    std::vector<std::string> keys;
    for (const auto &s : steps)
        keys.push_back(s.key());
    CHECK(keys == std::vector<std::string>{"10", "11", "21"});
}

TEST_CASE("SSA lowering re-expands to the kernel expression") {
    for (const char *name : {"star2d4r", "box3d2r", "star3d3r", "j2d5pt", "j3d27pt"}) {
        INFO(name);
        SourceUnit u = testutil::corpus_unit(name);
        const KernelDecl &k = u.kernels[0];
        SsaProgram ssa = lower_to_ssa(k, DType::f32);
        const int dims = find_corpus_kernel(name)->dims;
        CHECK(same_expr(*reexpand(ssa, "u", dims), *k.expanded(*k.updates()[0])));
        std::set<int> defined;
        for (const SsaOp &op : ssa.ops) {
            CHECK(defined.insert(op.dest).second); // single assignment
            for (const SsaOperand &a : op.args)
                if (a.kind == SsaOperand::Kind::temp)
                    CHECK(defined.count(a.temp) == 1); // defined before use
        }
    }
    SourceUnit b = testutil::corpus_unit("box3d2r");
    PatternSet ps = annotate_zmax(analyze_kernel(b.kernels[0]).offsets.at("u"));
    for (const SsaOp &op : lower_to_ssa(b.kernels[0], DType::f32).ops)
        for (const SsaOperand &a : op.args)
            if (a.kind == SsaOperand::Kind::pattern)
                CHECK(std::abs(a.zshift) <= ps.zmax.at(a.pattern));

    SourceUnit c = testutil::parse_valid(testutil::wrap_kernel(
        "    v.at(0, 0, 0).set(0.25 * u.at(0, 0, 0))\n", "(4, 4, 4)", 1, 1));
    SsaProgram one = lower_to_ssa(c.kernels[0], DType::f32);
    REQUIRE(one.ops.size() == 1);
    CHECK(one.ops[0].op == SsaOpcode::mul_const);
}

TEST_CASE("grid to fabric layout") {
    PeLayout ok = map_grid_to_fabric({750, 994, 300}, 757, 996, Margins{});
    CHECK(ok.active_x == 750);
    CHECK(ok.active_y == 994);
    CHECK(ok.nz == 300);
    PeLayout small = map_grid_to_fabric({10, 10, 4}, 20, 20, Margins{});
    CHECK(small.active_x == 10);
    CHECK_THROWS_AS(map_grid_to_fabric({1000, 1000, 300}, 757, 996, Margins{}), CompileError);
    CHECK_THROWS_AS(map_grid_to_fabric({751, 994, 300}, 757, 996, Margins{}), CompileError);
    CHECK_THROWS_AS(map_grid_to_fabric({8, 8, 5000}, 757, 996, Margins{}), CompileError);
}

TEST_CASE("whole dataflow programs") {
    DataflowProgram p = build_dataflow(dataflow_unit("box3d2r", 1000, {8, 8, 4}), {});
    CHECK(p.machine.states.size() == 17);
    CHECK(p.schedule.size() == 6);
    CHECK(p.swap);
    CHECK(p.layout.active_x == 8);
    CHECK(p.dump() == build_dataflow(dataflow_unit("box3d2r", 1000, {8, 8, 4}), {}).dump());

    CHECK(build_dataflow(testutil::parse_valid(corpus_fixture_source("center3d")), {})
              .machine.states.size() == 5);

    // runtime iteration counts cannot be unrolled into a state machine
    CorpusOptions o;
    o.backend = "st.dataflow()";
    try {
        build_dataflow(testutil::corpus_unit("star3d1r", o), {});
        FAIL("expected a compile error");
    } catch (const CompileError &e) {
        CHECK(std::string(e.what()).find("runtime value") != std::string::npos);
    }
}
