#include "stencilc/dataflow.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace stencilc {

char dir_letter(Dir d) {
    switch (d) {
    case Dir::N: return 'N';
    case Dir::E: return 'E';
    case Dir::S: return 'S';
    case Dir::W: return 'W';
    }
    return '?';
}

std::string_view dir_name(Dir d) {
    switch (d) {
    case Dir::N: return "North";
    case Dir::E: return "East";
    case Dir::S: return "South";
    case Dir::W: return "West";
    }
    return "?";
}

Dir opposite(Dir d) {
    switch (d) {
    case Dir::N: return Dir::S;
    case Dir::E: return Dir::W;
    case Dir::S: return Dir::N;
    case Dir::W: return Dir::E;
    }
    return d;
}

std::array<int, 2> dir_step(Dir d) {
    switch (d) {
    case Dir::N: return {0, 1};
    case Dir::E: return {1, 0};
    case Dir::S: return {0, -1};
    case Dir::W: return {-1, 0};
    }
    return {0, 0};
}

namespace {

// Direction of the (1, j != 0) relay send; 90 degrees clockwise of the quadrant.
Dir perpendicular(Dir d) {
    switch (d) {
    case Dir::N: return Dir::E;
    case Dir::E: return Dir::S;
    case Dir::S: return Dir::W;
    case Dir::W: return Dir::N;
    }
    return d;
}

} // namespace

std::string PatternId::str() const {
    if (center)
        return "0";
    return std::string(1, dir_letter(quadrant)) + std::to_string(i) + std::to_string(j);
}

PatternId pattern_id_of(int x, int y) {
    if (x == 0 && y == 0)
        return PatternId{};
    if (x >= 0 && y > 0)
        return PatternId::make(Dir::N, y, x);
    if (x > 0 && y <= 0)
        return PatternId::make(Dir::E, x, -y);
    if (x <= 0 && y < 0)
        return PatternId::make(Dir::S, -y, -x);
    return PatternId::make(Dir::W, -x, y);
}

std::array<int, 2> pattern_offset(const PatternId &p) {
    if (p.center)
        return {0, 0};
    switch (p.quadrant) {
    case Dir::N: return {p.j, p.i};
    case Dir::E: return {p.i, -p.j};
    case Dir::S: return {-p.j, -p.i};
    case Dir::W: return {-p.i, p.j};
    }
    return {0, 0};
}

std::optional<PatternId> parse_pattern(std::string_view s) {
    if (s == "0")
        return PatternId{};
    if (s.size() < 3)
        return std::nullopt;
    Dir q;
    switch (s[0]) {
    case 'N': q = Dir::N; break;
    case 'E': q = Dir::E; break;
    case 'S': q = Dir::S; break;
    case 'W': q = Dir::W; break;
    default: return std::nullopt;
    }
    // radius is at most 9 in this notation: one digit each for i and j
    if (s.size() != 3 || !std::isdigit(static_cast<unsigned char>(s[1])) ||
        !std::isdigit(static_cast<unsigned char>(s[2])))
        return std::nullopt;
    int i = s[1] - '0', j = s[2] - '0';
    if (i < 1)
        return std::nullopt;
    return PatternId::make(q, i, j);
}

PatternSet annotate_zmax(const std::set<OffsetVector> &offsets) {
    PatternSet ps;
    for (const OffsetVector &o : offsets) {
        int z = o.dims >= 3 ? std::abs(o[2]) : 0;
        PatternId p = pattern_id_of(o[0], o.dims >= 2 ? o[1] : 0);
        auto [it, fresh] = ps.zmax.try_emplace(p, z);
        if (!fresh)
            it->second = std::max(it->second, z);
        if (!p.center)
            ps.patterns.insert(p);
    }
    return ps;
}

std::vector<PatternId> sort_dependencies(const PatternSet &patterns) {
    std::array<std::vector<PatternId>, 4> per;
    for (const PatternId &p : patterns.patterns)
        per[static_cast<std::size_t>(p.quadrant)].push_back(p);
    std::size_t rank = 0;
    for (auto &v : per) {
        std::sort(v.begin(), v.end(), [](const PatternId &a, const PatternId &b) {
            return std::pair{a.j, a.i} < std::pair{b.j, b.i};
        });
        rank = std::max(rank, v.size());
    }
    std::vector<PatternId> out;
    for (std::size_t k = 0; k < rank; ++k)
        for (const auto &v : per)
            if (k < v.size())
                out.push_back(v[k]);
    return out;
}

std::vector<CommStep> build_comm_schedule(const std::vector<PatternId> &ordered) {
    std::set<std::pair<int, int>> keys; // (j, i) so the set iterates in schedule order
    for (const PatternId &p : ordered)
        if (!p.center)
            keys.insert({p.j, p.i});
    // relay closure: (1, j) is fed from (j, 0); (i, j) from (i-1, j)
    for (bool grew = true; grew;) {
        grew = false;
        for (auto [j, i] : std::set<std::pair<int, int>>(keys)) {
            std::pair<int, int> need = i == 1 ? std::pair{0, j} : std::pair{j, i - 1};
            if (i == 1 && j == 0)
                continue;
            grew = keys.insert(need).second || grew;
        }
    }
    std::vector<CommStep> out;
    for (auto [j, i] : keys) {
        CommStep step;
        step.i = i;
        step.j = j;
        for (Dir q : kDirs) {
            CommAction &a = step.actions[static_cast<std::size_t>(q)];
            a.quadrant = q;
            a.recv_from = q;
            a.recv_into = PatternId::make(q, i, j);
            if (i == 1 && j == 0) {
                a.send = PatternId{};
                a.send_to = opposite(q);
            } else if (i == 1) {
                a.send = PatternId::make(q, j, 0);
                a.send_to = perpendicular(q);
            } else {
                a.send = PatternId::make(q, i - 1, j);
                a.send_to = opposite(q);
            }
        }
        out.push_back(step);
    }
    return out;
}

std::string render_schedule(const std::vector<CommStep> &steps) {
    std::ostringstream o;
    auto cell = [](std::string s) {
        s.resize(std::max<std::size_t>(s.size(), 38), ' ');
        return s;
    };
    o << "step  ";
    for (Dir q : kDirs)
        o << cell(std::string(1, dir_letter(q)));
    o << "\n";
    for (std::size_t k = 0; k < steps.size(); ++k) {
        std::string label = std::to_string(k + 1);
        label.resize(6, ' ');
        o << label;
        for (const CommAction &a : steps[k].actions)
            o << cell("Send " + a.send.str() + " to " + std::string(dir_name(a.send_to)) +
                      "; Receive from " + std::string(dir_name(a.recv_from)) + " into " +
                      a.recv_into.str());
        o << "\n";
    }
    std::string s = o.str();
    // trim trailing padding on each line
    std::string out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) {
        line.erase(line.find_last_not_of(' ') + 1);
        out += line + "\n";
    }
    return out;
}

// ---- state machine ---------------------------------------------------------

StateMachine build_state_machine(const std::vector<CommStep> &schedule, std::int64_t iterations) {
    if (iterations < 1)
        throw CompileError(SourcePos{}, "the dataflow state machine needs at least one iteration");
    StateMachine m;
    m.iterations = iterations;
    m.states.push_back("STATE_SETUP");
    for (const CommStep &s : schedule) {
        m.states.push_back("STATE_PREP_TRANS_" + s.key());
        m.states.push_back("STATE_TRANS_" + s.key());
    }
    m.states.push_back("STATE_UPDATE_STENCIL");
    m.states.push_back("STATE_ITERATION_CHECK");
    m.states.push_back("STATE_TEARDOWN");
    m.states.push_back("STATE_EXIT");

    const std::string first = schedule.empty() ? "STATE_UPDATE_STENCIL"
                                               : "STATE_PREP_TRANS_" + schedule.front().key();
    m.transitions["STATE_SETUP"] = {first};
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        const std::string key = schedule[k].key();
        m.transitions["STATE_PREP_TRANS_" + key] = {"STATE_TRANS_" + key};
        m.transitions["STATE_TRANS_" + key] = {k + 1 < schedule.size()
                                                   ? "STATE_PREP_TRANS_" + schedule[k + 1].key()
                                                   : "STATE_UPDATE_STENCIL"};
    }
    m.transitions["STATE_UPDATE_STENCIL"] = {"STATE_ITERATION_CHECK"};
    m.transitions["STATE_ITERATION_CHECK"] = {first, "STATE_TEARDOWN"};
    m.transitions["STATE_TEARDOWN"] = {"STATE_EXIT"};
    m.transitions["STATE_EXIT"] = {};
    return m;
}

std::string StateMachine::first_comm_or_update() const {
    return transitions.at("STATE_SETUP").front();
}

std::string StateMachine::after_check(std::int64_t done) const {
    const auto &t = transitions.at("STATE_ITERATION_CHECK");
    return done < iterations ? t[0] : t[1];
}

// ---- SSA -------------------------------------------------------------------

std::string_view ssa_opcode_name(SsaOpcode op) {
    switch (op) {
    case SsaOpcode::mov: return "mov";
    case SsaOpcode::neg: return "neg";
    case SsaOpcode::add: return "add";
    case SsaOpcode::sub: return "sub";
    case SsaOpcode::mul: return "mul";
    case SsaOpcode::div: return "div";
    case SsaOpcode::mul_const: return "mul_const";
    case SsaOpcode::fma: return "fma";
    }
    return "?";
}

std::string SsaOperand::str() const {
    switch (kind) {
    case Kind::pattern:
        return "P" + pattern.str() + (zshift ? (zshift > 0 ? "+" : "") + std::to_string(zshift)
                                             : std::string());
    case Kind::temp: return "t" + std::to_string(temp);
    case Kind::constant: return "#" + text;
    }
    return "?";
}

std::string SsaOp::str() const {
    std::string s = "t" + std::to_string(dest) + " = " + std::string(ssa_opcode_name(op));
    if (op == SsaOpcode::mul_const)
        s += const_first ? "" : ".r";
    if (op == SsaOpcode::fma)
        s += product_first ? "" : ".r";
    for (std::size_t k = 0; k < args.size(); ++k)
        s += (k ? ", " : " ") + args[k].str();
    return s;
}

std::string SsaProgram::str() const {
    std::string s;
    for (const auto &op : ops)
        s += op.str() + "\n";
    s += "out = t" + std::to_string(output) + "\n";
    return s;
}

namespace {

class SsaBuilder {
public:
    SsaBuilder(DType dtype, int dims) : dtype_(dtype), dims_(dims) {}

    // A lowered subexpression: a plain operand, or a product not emitted yet
    // so that an enclosing add can absorb it as an fma.
    struct Value {
        SsaOperand operand;
        bool pending = false;
        SsaOperand a, b; // pending product a*b
    };

    Value lower(const Expr &e) {
        switch (e.kind) {
        case Expr::Kind::constant: {
            Value v;
            v.operand.kind = SsaOperand::Kind::constant;
            v.operand.text = e.text;
            v.operand.value = literal_value(e.text, dtype_);
            return v;
        }
        case Expr::Kind::read: {
            Value v;
            v.operand.kind = SsaOperand::Kind::pattern;
            v.operand.pattern = pattern_id_of(e.offset[0], dims_ >= 2 ? e.offset[1] : 0);
            v.operand.zshift = dims_ >= 3 ? e.offset[2] : 0;
            return v;
        }
        case Expr::Kind::local: throw CompileError(e.pos, "unexpanded temporary");
        case Expr::Kind::unary: {
            SsaOp op;
            op.op = SsaOpcode::neg;
            op.args = {materialize(lower(*e.lhs))};
            return emit(std::move(op));
        }
        case Expr::Kind::binary: {
            Value l = lower(*e.lhs);
            Value r = lower(*e.rhs);
            if (e.binop == BinOp::mul) {
                Value v;
                v.pending = true;
                v.a = materialize(std::move(l));
                v.b = materialize(std::move(r));
                return v;
            }
            if (e.binop == BinOp::add && (l.pending || r.pending)) {
                SsaOp op;
                op.op = SsaOpcode::fma;
                if (r.pending) { // prefer the right product: the usual left-leaning chain
                    SsaOperand c = materialize(std::move(l));
                    op.args = {r.a, r.b, c};
                    op.product_first = false;
                } else {
                    SsaOperand c = materialize(std::move(r));
                    op.args = {l.a, l.b, c};
                    op.product_first = true;
                }
                return emit(std::move(op));
            }
            SsaOp op;
            op.op = e.binop == BinOp::add   ? SsaOpcode::add
                    : e.binop == BinOp::sub ? SsaOpcode::sub
                                            : SsaOpcode::div;
            SsaOperand a = materialize(std::move(l));
            SsaOperand b = materialize(std::move(r));
            op.args = {a, b};
            return emit(std::move(op));
        }
        }
        return {};
    }

    SsaOperand materialize(Value v) {
        if (!v.pending)
            return v.operand;
        SsaOp op;
        const bool ca = v.a.kind == SsaOperand::Kind::constant;
        const bool cb = v.b.kind == SsaOperand::Kind::constant;
        if (ca != cb) {
            op.op = SsaOpcode::mul_const;
            op.const_first = ca;
        } else {
            op.op = SsaOpcode::mul;
        }
        op.args = {v.a, v.b};
        return emit(std::move(op)).operand;
    }

    SsaProgram finish(Value root) {
        SsaOperand out = materialize(std::move(root));
        if (out.kind != SsaOperand::Kind::temp) {
            SsaOp op;
            op.op = SsaOpcode::mov;
            op.args = {out};
            out = emit(std::move(op)).operand;
        }
        p_.output = out.temp;
        return std::move(p_);
    }

private:
    Value emit(SsaOp op) {
        op.dest = p_.temps++;
        Value v;
        v.operand.kind = SsaOperand::Kind::temp;
        v.operand.temp = op.dest;
        p_.ops.push_back(std::move(op));
        return v;
    }

    DType dtype_;
    int dims_;
    SsaProgram p_;
};

} // namespace

SsaProgram lower_to_ssa(const KernelDecl &k, DType dtype) {
    auto updates = k.updates();
    if (updates.size() != 1)
        throw CompileError(k.pos, "dataflow lowering needs exactly one update in kernel '" +
                                      k.name + "'");
    const int dims = updates.front()->offset.dims;
    SsaBuilder b(dtype, dims);
    ExprPtr e = k.expanded(*updates.front());
    return b.finish(b.lower(*e));
}

ExprPtr reexpand(const SsaProgram &p, const std::string &grid, int dims) {
    std::map<int, ExprPtr> temps;
    auto operand = [&](const SsaOperand &o) -> ExprPtr {
        switch (o.kind) {
        case SsaOperand::Kind::constant: return Expr::constant(o.text);
        case SsaOperand::Kind::temp: return temps.at(o.temp);
        case SsaOperand::Kind::pattern: {
            auto xy = pattern_offset(o.pattern);
            OffsetVector off;
            if (dims == 3)
                off = OffsetVector{xy[0], xy[1], o.zshift};
            else if (dims == 2)
                off = OffsetVector{xy[0], xy[1]};
            else
                off = OffsetVector{xy[0]};
            return Expr::read(grid, off);
        }
        }
        return nullptr;
    };
    for (const SsaOp &op : p.ops) {
        ExprPtr r;
        switch (op.op) {
        case SsaOpcode::mov: r = operand(op.args[0]); break;
        case SsaOpcode::neg: r = Expr::unary(UnOp::neg, operand(op.args[0])); break;
        case SsaOpcode::add: r = Expr::binary(BinOp::add, operand(op.args[0]), operand(op.args[1])); break;
        case SsaOpcode::sub: r = Expr::binary(BinOp::sub, operand(op.args[0]), operand(op.args[1])); break;
        case SsaOpcode::mul:
        case SsaOpcode::mul_const:
            r = Expr::binary(BinOp::mul, operand(op.args[0]), operand(op.args[1]));
            break;
        case SsaOpcode::div: r = Expr::binary(BinOp::div, operand(op.args[0]), operand(op.args[1])); break;
        case SsaOpcode::fma: {
            ExprPtr prod = Expr::binary(BinOp::mul, operand(op.args[0]), operand(op.args[1]));
            ExprPtr c = operand(op.args[2]);
            r = op.product_first ? Expr::binary(BinOp::add, prod, c)
                                 : Expr::binary(BinOp::add, c, prod);
            break;
        }
        }
        temps[op.dest] = r;
    }
    return temps.at(p.output);
}

// ---- layout ----------------------------------------------------------------

std::string PeLayout::str() const {
    std::ostringstream o;
    o << "fabric: " << fabric_x << "x" << fabric_y << "\n";
    o << "margins: north=" << margins.north << " east=" << margins.east
      << " south=" << margins.south << " west=" << margins.west << "\n";
    o << "active: " << active_x << "x" << active_y << "\n";
    o << "nz: " << nz << "\n";
    o << "column_budget: " << column_budget << "\n";
    return o.str();
}

PeLayout map_grid_to_fabric(const std::vector<std::int64_t> &shape, std::int64_t fabric_x,
                            std::int64_t fabric_y, Margins margins, std::int64_t column_budget) {
    if (shape.size() < 2 || shape.size() > 3)
        throw CompileError(SourcePos{}, "the dataflow layout needs a 2D or 3D grid");
    PeLayout l;
    l.fabric_x = fabric_x;
    l.fabric_y = fabric_y;
    l.margins = margins;
    l.active_x = shape[0];
    l.active_y = shape[1];
    l.nz = shape.size() == 3 ? shape[2] : 1;
    l.column_budget = column_budget;
    const std::int64_t need_x = l.active_x + margins.north + margins.south;
    const std::int64_t need_y = l.active_y + margins.east + margins.west;
    if (need_x > fabric_x)
        throw CompileError(SourcePos{}, "grid X extent " + std::to_string(l.active_x) +
                                            " plus north/south margins needs " +
                                            std::to_string(need_x) + " PEs, fabric has " +
                                            std::to_string(fabric_x));
    if (need_y > fabric_y)
        throw CompileError(SourcePos{}, "grid Y extent " + std::to_string(l.active_y) +
                                            " plus east/west margins needs " +
                                            std::to_string(need_y) + " PEs, fabric has " +
                                            std::to_string(fabric_y));
    if (l.nz > column_budget)
        throw CompileError(SourcePos{}, "Z-column of " + std::to_string(l.nz) +
                                            " elements exceeds the per-PE budget of " +
                                            std::to_string(column_budget));
    return l;
}

// ---- whole program ---------------------------------------------------------

namespace {

const LaunchValue *last_param(const BackendParams &params, const std::string &key) {
    const LaunchValue *v = nullptr;
    for (const auto &[k, x] : params)
        if (k == key)
            v = &x;
    return v;
}

std::vector<std::int64_t> tuple_param(const LaunchValue &v, const std::string &key,
                                      std::size_t n) {
    if (v.kind != LaunchValue::Kind::tuple || v.ints.size() != n)
        throw CompileError(v.pos, "'" + key + "' expects a tuple of " + std::to_string(n) +
                                      " integers");
    for (auto x : v.ints)
        if (x < 0)
            throw CompileError(v.pos, "'" + key + "' values must be non-negative");
    return v.ints;
}

} // namespace

DataflowProgram build_dataflow(const SourceUnit &unit, const BackendParams &params,
                               const std::string &target,
                               const std::map<std::string, std::int64_t> &bindings) {
    require_valid(unit);
    TargetBinding tb = bind_target(unit, target, bindings);
    if (!tb.target)
        throw CompileError(SourcePos{}, "no target to compile");
    const TargetDecl &t = *tb.target;
    DataflowProgram p;
    p.target = t.name;

    const char *shape_msg = "the dataflow backend needs a target of the form "
                            "'for t in range(N): st.map(...)(kernel)(a, b)' with an optional "
                            "swap";
    if (t.body.size() != 1 || t.body[0].kind != Stmt::Kind::for_range)
        throw CompileError(t.pos, shape_msg);
    const Stmt &loop = t.body[0];
    if (!loop.count.is_constant())
        throw CompileError(loop.pos, "the dataflow backend requires the total number of time "
                                     "steps at compile time; '" +
                                         loop.count.str() + "' is a runtime value");
    const std::int64_t iterations = loop.count.constant();
    if (iterations < 1)
        throw CompileError(loop.pos, "the dataflow backend needs at least one time step");
    if (loop.body.empty() || loop.body.size() > 2 || loop.body[0].kind != Stmt::Kind::map ||
        (loop.body.size() == 2 && loop.body[1].kind != Stmt::Kind::swap))
        throw CompileError(loop.pos, shape_msg);
    const Stmt &map = loop.body[0];
    const KernelDecl &k = *unit.find_kernel(map.kernel);
    p.kernel = k.name;

    StencilInfo info = analyze_kernel(k);
    if (info.dims < 2)
        throw CompileError(k.pos, "the dataflow backend maps X and Y onto PEs and needs a 2D or "
                                  "3D kernel");
    if (info.offsets.size() != 1)
        throw CompileError(k.pos, "the dataflow backend needs a kernel that reads exactly one "
                                  "grid");
    auto updates = k.updates();
    if (updates.size() != 1)
        throw CompileError(k.pos, "the dataflow backend needs a kernel with exactly one update");
    p.dims = info.dims;
    p.read_param = info.offsets.begin()->first;
    p.write_param = updates.front()->name;
    for (std::size_t s = 0; s < k.params.size(); ++s) {
        if (k.params[s].name == p.read_param)
            p.read_name = map.args[s];
        if (k.params[s].name == p.write_param)
            p.write_name = map.args[s];
    }
    if (loop.body.size() == 2) {
        p.swap = true;
        p.swap_a = loop.body[1].a;
        p.swap_b = loop.body[1].b;
    }

    // target-level names -> top-level grids
    for (const auto &g : unit.grids)
        p.bindings[g.name] = g.name;
    for (const auto &[param, grid] : tb.grids)
        p.bindings[param] = grid;
    for (const auto *n : {&p.read_name, &p.write_name, &p.swap_a, &p.swap_b})
        if (!n->empty() && !p.bindings.contains(*n))
            throw CompileError(map.pos, "grid '" + *n + "' is not bound to a declared grid");
    const GridDecl &g = *unit.find_grid(p.bindings.at(p.read_name));
    p.dtype = g.dtype;
    for (const auto &decl : unit.grids)
        if (decl.shape == g.shape && decl.dtype == g.dtype && decl.order == g.order)
            p.grids.push_back(decl.name);

    // the map must cover the whole grid: each PE updates its full column
    MapSpec spec = desugar_map(map.map, info.dims);
    MapBounds bounds = concretize(
        spec,
        [&](const std::string &sym) -> std::optional<std::int64_t> {
            auto dot = sym.find(".shape[");
            if (dot != std::string::npos) {
                auto it = p.bindings.find(sym.substr(0, dot));
                if (it == p.bindings.end())
                    return std::nullopt;
                const GridDecl *gd = unit.find_grid(it->second);
                auto d = static_cast<std::size_t>(std::stoi(sym.substr(dot + 7)));
                if (!gd || d >= gd->shape.size())
                    return std::nullopt;
                return gd->shape[d];
            }
            auto it = tb.ints.find(sym);
            if (it == tb.ints.end())
                return std::nullopt;
            return it->second;
        },
        map.pos);
    for (int d = 0; d < info.dims; ++d)
        if (bounds.lo(d) != 0 || bounds.hi(d) != g.shape[static_cast<std::size_t>(d)])
            throw CompileError(map.pos, "the dataflow backend needs the map to cover the whole "
                                        "grid");

    std::int64_t fx = 757, fy = 996, budget = 2048;
    Margins margins;
    if (const LaunchValue *v = last_param(params, "fabricDims")) {
        auto d = tuple_param(*v, "fabricDims", 2);
        fx = d[0];
        fy = d[1];
    }
    if (const LaunchValue *v = last_param(params, "margins")) {
        auto m = tuple_param(*v, "margins", 4);
        margins = {static_cast<int>(m[0]), static_cast<int>(m[1]), static_cast<int>(m[2]),
                   static_cast<int>(m[3])};
    }
    if (const LaunchValue *v = last_param(params, "peMemory")) {
        if (v->kind != LaunchValue::Kind::integer || v->integer < 1)
            throw CompileError(v->pos, "'peMemory' expects a positive element count");
        budget = v->integer;
    }
    p.layout = map_grid_to_fabric(g.shape, fx, fy, margins, budget);

    p.patterns = annotate_zmax(info.offsets.begin()->second);
    for (const auto &[pat, z] : p.patterns.zmax)
        if (z > p.layout.nz)
            throw CompileError(k.pos, "Z offset " + std::to_string(z) +
                                          " reaches past the whole column of " +
                                          std::to_string(p.layout.nz));
    p.order = sort_dependencies(p.patterns);
    p.schedule = build_comm_schedule(p.order);
    p.machine = build_state_machine(p.schedule, iterations);
    p.ssa = lower_to_ssa(k, p.dtype);
    return p;
}

std::string DataflowProgram::dump() const {
    std::ostringstream o;
    o << "kernel: " << kernel << "\n";
    o << "target: " << target << "\n";
    o << "dtype: " << dtype_name(dtype) << "\n";
    o << "iterations: " << machine.iterations << "\n";
    o << "\npatterns:";
    for (const auto &p : patterns.patterns)
        o << " " << p.str();
    o << "\nzmax:";
    for (const auto &[p, z] : patterns.zmax)
        o << " " << p.str() << "=" << z;
    o << "\norder:";
    for (const auto &p : order)
        o << " " << p.str();
    o << "\n\nschedule:\n" << render_schedule(schedule);
    o << "\nstates:\n";
    for (const auto &s : machine.states) {
        o << "  " << s << " ->";
        for (const auto &n : machine.transitions.at(s))
            o << " " << n;
        o << "\n";
    }
    o << "\nssa:\n" << ssa.str();
    o << "\nlayout:\n" << layout.str();
    return o.str();
}

} // namespace stencilc
