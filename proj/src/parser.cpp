#include "lexer.hpp"
#include "stencilc/frontend.hpp"

#include <charconv>
#include <set>

namespace stencilc {

using detail::Tok;
using detail::Token;

namespace {

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    SourceUnit run() {
        SourceUnit unit;
        while (!at(Tok::eof)) {
            if (accept(Tok::newline))
                continue;
            top_level(unit);
        }
        if (!diags_.empty())
            throw CompileError(std::move(diags_));
        return unit;
    }

private:
    // ---- token helpers -------------------------------------------------

    const Token &cur() const { return toks_[i_]; }
    const Token &peek(std::size_t k = 1) const {
        return toks_[std::min(i_ + k, toks_.size() - 1)];
    }
    bool at(Tok k) const { return cur().kind == k; }
    bool at_op(std::string_view s) const { return cur().kind == Tok::op && cur().text == s; }
    bool at_name(std::string_view s) const { return cur().kind == Tok::name && cur().text == s; }

    bool accept(Tok k) {
        if (!at(k))
            return false;
        ++i_;
        return true;
    }
    bool accept_op(std::string_view s) {
        if (!at_op(s))
            return false;
        ++i_;
        return true;
    }

    [[noreturn]] void fail(const std::string &msg) const { throw CompileError(cur().pos, msg); }

    std::string describe(const Token &t) const {
        switch (t.kind) {
        case Tok::newline: return "end of line";
        case Tok::indent: return "indent";
        case Tok::dedent: return "dedent";
        case Tok::eof: return "end of file";
        default: return "'" + t.text + "'";
        }
    }

    const Token &expect_op(std::string_view s) {
        if (!at_op(s))
            fail("expected '" + std::string(s) + "', found " + describe(cur()));
        return toks_[i_++];
    }
    const Token &expect_name(std::string_view what = "identifier") {
        if (!at(Tok::name))
            fail("expected " + std::string(what) + ", found " + describe(cur()));
        return toks_[i_++];
    }
    void expect_keyword(std::string_view kw) {
        if (!at_name(kw))
            fail("expected '" + std::string(kw) + "', found " + describe(cur()));
        ++i_;
    }
    void expect_newline() {
        if (!accept(Tok::newline) && !at(Tok::eof))
            fail("expected end of line, found " + describe(cur()));
    }

    // `st.<member>`; returns the member token.
    const Token &expect_st_member() {
        const Token &st = expect_name("'st'");
        if (st.text != "st")
            throw CompileError(st.pos, "unknown construct '" + st.text + "'");
        expect_op(".");
        return expect_name("construct name");
    }

    std::int64_t parse_int_literal() {
        bool neg = false;
        if (accept_op("-"))
            neg = true;
        else
            accept_op("+");
        if (!at(Tok::number))
            fail("expected integer, found " + describe(cur()));
        const Token &t = toks_[i_++];
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (ec != std::errc() || p != t.text.data() + t.text.size())
            throw CompileError(t.pos, "expected integer literal, found '" + t.text + "'");
        return neg ? -v : v;
    }

    // ---- top level -----------------------------------------------------

    void top_level(SourceUnit &unit) {
        if (at_name("import")) {
            parse_import(unit);
        } else if (at_op("@")) {
            parse_decorated(unit);
        } else if (at(Tok::name) && peek().kind == Tok::op && peek().text == "=") {
            unit.grids.push_back(parse_grid());
        } else if (at_name("st") && peek(2).kind == Tok::name && peek(2).text == "launch") {
            if (unit.launch)
                fail("multiple launch statements");
            unit.launch = parse_launch();
        } else if (at_name("def")) {
            fail("function '" + peek().text + "' needs an @st.kernel or @st.target decorator");
        } else {
            fail("unknown construct " + describe(cur()));
        }
    }

    void parse_import(SourceUnit &unit) {
        SourcePos pos = cur().pos;
        ++i_;
        const Token &mod = expect_name("module name");
        if (mod.text != "stencilpy")
            throw CompileError(mod.pos, "only 'import stencilpy as st' is supported");
        expect_keyword("as");
        const Token &alias = expect_name("alias");
        if (alias.text != "st")
            throw CompileError(alias.pos, "the stencilpy module must be imported as 'st'");
        expect_newline();
        if (unit.has_import)
            throw CompileError(pos, "duplicate import");
        unit.has_import = true;
    }

    void parse_decorated(SourceUnit &unit) {
        expect_op("@");
        const Token &kind = expect_st_member();
        expect_newline();
        if (kind.text == "kernel")
            unit.kernels.push_back(parse_kernel());
        else if (kind.text == "target")
            unit.targets.push_back(parse_target());
        else
            throw CompileError(kind.pos, "unknown decorator '@st." + kind.text + "'");
    }

    std::vector<Param> parse_params() {
        std::vector<Param> params;
        expect_op("(");
        while (!at_op(")")) {
            Param p;
            const Token &n = expect_name("parameter name");
            p.name = n.text;
            p.pos = n.pos;
            if (accept_op(":")) {
                const Token &ty = expect_st_member();
                p.type = ty.text;
            } else {
                diags_.push_back(
                    {n.pos, Severity::error, "parameter '" + n.text + "' is missing a type hint"});
            }
            params.push_back(std::move(p));
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        if (accept_op("->")) {
            // Return annotations are accepted and ignored (`-> None`).
            expect_name("return type");
        }
        expect_op(":");
        expect_newline();
        return params;
    }

    void begin_block() {
        if (!accept(Tok::indent))
            fail("expected an indented block");
    }

    KernelDecl parse_kernel() {
        KernelDecl k;
        k.pos = cur().pos;
        expect_keyword("def");
        k.name = expect_name("kernel name").text;
        k.params = parse_params();
        begin_block();
        arity_ = -1;
        while (!accept(Tok::dedent)) {
            if (accept(Tok::newline))
                continue;
            k.body.push_back(parse_kernel_stmt());
        }
        return k;
    }

    void check_arity(const OffsetVector &off, SourcePos pos) {
        if (arity_ < 0)
            arity_ = off.dims;
        else if (off.dims != arity_)
            diags_.push_back({pos, Severity::error,
                              "offset arity mismatch: expected " + std::to_string(arity_) +
                                  " components, found " + std::to_string(off.dims)});
    }

    OffsetVector parse_offset_args() {
        SourcePos pos = cur().pos;
        expect_op("(");
        OffsetVector off;
        while (!at_op(")")) {
            if (off.dims == kMaxDims)
                throw CompileError(pos, "offsets have at most 3 components");
            off[off.dims++] = static_cast<int>(parse_int_literal());
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        if (off.dims == 0)
            throw CompileError(pos, "offset needs at least one component");
        check_arity(off, pos);
        return off;
    }

    KernelStmt parse_kernel_stmt() {
        KernelStmt s;
        s.pos = cur().pos;
        const Token &name = expect_name("statement");
        if (accept_op("=")) {
            s.is_update = false;
            s.name = name.text;
            s.value = parse_expr();
            expect_newline();
            return s;
        }
        if (at_op(".")) {
            expect_op(".");
            const Token &at_tok = expect_name("'at'");
            if (at_tok.text != "at")
                throw CompileError(at_tok.pos, "unknown construct '" + at_tok.text + "'");
            s.offset = parse_offset_args();
            expect_op(".");
            const Token &set = expect_name("'set'");
            if (set.text != "set")
                throw CompileError(set.pos, "expected '.set(...)' after an 'at' destination");
            expect_op("(");
            s.value = parse_expr();
            expect_op(")");
            expect_newline();
            s.is_update = true;
            s.name = name.text;
            return s;
        }
        throw CompileError(name.pos, "unknown construct '" + name.text + "' in kernel body");
    }

    // ---- expressions ---------------------------------------------------

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        while (at_op("+") || at_op("-")) {
            SourcePos pos = cur().pos;
            BinOp op = cur().text == "+" ? BinOp::add : BinOp::sub;
            ++i_;
            lhs = Expr::binary(op, lhs, parse_term(), pos);
        }
        return lhs;
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_unary();
        while (at_op("*") || at_op("/")) {
            SourcePos pos = cur().pos;
            BinOp op = cur().text == "*" ? BinOp::mul : BinOp::div;
            ++i_;
            lhs = Expr::binary(op, lhs, parse_unary(), pos);
        }
        return lhs;
    }

    ExprPtr parse_unary() {
        SourcePos pos = cur().pos;
        if (accept_op("-"))
            return Expr::unary(UnOp::neg, parse_unary(), pos);
        if (accept_op("+"))
            return parse_unary();
        return parse_primary();
    }

    ExprPtr parse_primary() {
        SourcePos pos = cur().pos;
        if (at(Tok::number)) {
            std::string text = cur().text;
            ++i_;
            return Expr::constant(std::move(text), pos);
        }
        if (accept_op("(")) {
            ExprPtr e = parse_expr();
            expect_op(")");
            return e;
        }
        if (at(Tok::name)) {
            std::string name = cur().text;
            ++i_;
            if (accept_op(".")) {
                const Token &m = expect_name("'at'");
                if (m.text != "at")
                    throw CompileError(m.pos, "unknown construct '" + name + "." + m.text + "'");
                OffsetVector off = parse_offset_args();
                return Expr::read(std::move(name), off, pos);
            }
            if (at_op("("))
                throw CompileError(pos, "function calls are not supported in kernels");
            return Expr::local(std::move(name), pos);
        }
        fail("expected expression, found " + describe(cur()));
    }

    // ---- targets -------------------------------------------------------

    TargetDecl parse_target() {
        TargetDecl t;
        t.pos = cur().pos;
        expect_keyword("def");
        t.name = expect_name("target name").text;
        t.params = parse_params();
        t.body = parse_target_block();
        return t;
    }

    std::vector<Stmt> parse_target_block() {
        begin_block();
        std::vector<Stmt> body;
        while (!accept(Tok::dedent)) {
            if (accept(Tok::newline))
                continue;
            body.push_back(parse_target_stmt());
        }
        return body;
    }

    Stmt parse_target_stmt() {
        Stmt s;
        s.pos = cur().pos;
        if (at_name("for")) {
            ++i_;
            s.kind = Stmt::Kind::for_range;
            s.var = expect_name("loop variable").text;
            expect_keyword("in");
            const Token &r = expect_name("'range'");
            if (r.text != "range")
                throw CompileError(r.pos, "only 'for ... in range(n)' loops are supported");
            expect_op("(");
            s.count = parse_affine();
            if (at_op(","))
                fail("range() takes a single iteration count");
            expect_op(")");
            expect_op(":");
            expect_newline();
            s.body = parse_target_block();
            return s;
        }
        if (at_name("st") && peek(2).kind == Tok::name && peek(2).text == "map") {
            s.kind = Stmt::Kind::map;
            expect_st_member();
            s.map = parse_map_args();
            expect_op("(");
            const Token &k = expect_name("kernel name");
            s.kernel = k.text;
            s.kernel_pos = k.pos;
            expect_op(")");
            expect_op("(");
            while (!at_op(")")) {
                s.args.push_back(expect_name("grid argument").text);
                if (!accept_op(","))
                    break;
            }
            expect_op(")");
            expect_newline();
            return s;
        }
        if (at_op("(") || (at(Tok::name) && peek().kind == Tok::op && peek().text == ",")) {
            s.kind = Stmt::Kind::swap;
            auto pair = [&]() {
                bool paren = accept_op("(");
                std::string a = expect_name().text;
                expect_op(",");
                std::string b = expect_name().text;
                if (paren)
                    expect_op(")");
                return std::pair{a, b};
            };
            auto [l0, l1] = pair();
            expect_op("=");
            auto [r0, r1] = pair();
            if (!(l0 == r1 && l1 == r0) || l0 == l1)
                throw CompileError(s.pos, "tuple assignment must swap two distinct grids");
            s.a = l0;
            s.b = l1;
            expect_newline();
            return s;
        }
        if (at(Tok::name))
            fail("unsupported statement in target: only for-range, st.map and swaps are allowed");
        fail("unexpected " + describe(cur()) + " in target body");
    }

    // Integer bound: `1000`, `x`, `u.shape[0]`, `x - p`, `2*p`.
    Affine parse_affine() {
        Affine v = parse_affine_term();
        while (at_op("+") || at_op("-")) {
            bool add = cur().text == "+";
            ++i_;
            Affine t = parse_affine_term();
            v = add ? v + t : v - t;
        }
        return v;
    }

    Affine parse_affine_term() {
        if (accept_op("-"))
            return -parse_affine_term();
        if (at(Tok::number)) {
            std::int64_t k = parse_int_literal();
            if (accept_op("*"))
                return parse_affine_atom().scaled(k);
            return Affine(k);
        }
        return parse_affine_atom();
    }

    Affine parse_affine_atom() {
        if (at(Tok::number))
            return Affine(parse_int_literal());
        if (accept_op("(")) {
            Affine v = parse_affine();
            expect_op(")");
            return v;
        }
        const Token &n = expect_name("integer bound");
        if (accept_op(".")) {
            const Token &m = expect_name("'shape'");
            if (m.text != "shape")
                throw CompileError(m.pos, "unknown attribute '" + m.text + "'");
            expect_op("[");
            std::int64_t d = parse_int_literal();
            expect_op("]");
            return Affine::symbol(n.text + ".shape[" + std::to_string(d) + "]");
        }
        return Affine::symbol(n.text);
    }

    MapSpecRaw parse_map_args() {
        MapSpecRaw raw;
        raw.pos = cur().pos;
        expect_op("(");
        std::set<std::string> seen;
        while (!at_op(")")) {
            const Token &key = expect_name("map keyword");
            static const std::set<std::string> allowed{"i", "j", "k", "e", "w"};
            if (!allowed.contains(key.text))
                throw CompileError(key.pos, "unknown map keyword '" + key.text + "'");
            if (!seen.insert(key.text).second)
                throw CompileError(key.pos, "duplicate map keyword '" + key.text + "'");
            expect_op("=");
            MapArg arg;
            arg.pos = cur().pos;
            if (at(Tok::name) && peek().kind == Tok::op && peek().text == "." &&
                peek(2).kind == Tok::name && peek(2).text == "shape" &&
                !(peek(3).kind == Tok::op && peek(3).text == "[")) {
                arg.kind = MapArg::Kind::shape_of;
                arg.grid = cur().text;
                i_ += 3;
            } else if (at_op("(") && looks_like_tuple()) {
                arg.kind = MapArg::Kind::tuple;
                expect_op("(");
                while (!at_op(")")) {
                    arg.tuple.push_back(parse_affine());
                    if (!accept_op(","))
                        break;
                }
                expect_op(")");
            } else {
                arg.kind = MapArg::Kind::scalar;
                arg.scalar = parse_affine();
            }
            raw.args.emplace_back(key.text, std::move(arg));
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        return raw;
    }

    // At '(' : is there a top-level comma before the matching ')'?
    bool looks_like_tuple() const {
        int depth = 0;
        for (std::size_t j = i_; j < toks_.size(); ++j) {
            const Token &t = toks_[j];
            if (t.kind != Tok::op)
                continue;
            if (t.text == "(" || t.text == "[")
                ++depth;
            else if (t.text == ")" || t.text == "]") {
                if (--depth == 0)
                    return false;
            } else if (t.text == "," && depth == 1)
                return true;
        }
        return false;
    }

    // ---- grids & launch ------------------------------------------------

    GridDecl parse_grid() {
        GridDecl g;
        const Token &name = expect_name();
        g.name = name.text;
        g.pos = name.pos;
        expect_op("=");
        const Token &ctor = expect_st_member();
        if (ctor.text != "grid")
            throw CompileError(ctor.pos, "unknown construct 'st." + ctor.text + "'");
        expect_op("(");
        bool have_dtype = false, have_shape = false, have_order = false;
        while (!at_op(")")) {
            const Token &key = expect_name("grid keyword");
            expect_op("=");
            if (key.text == "dtype") {
                const Token &t = expect_st_member();
                if (t.text == "f32")
                    g.dtype = DType::f32;
                else if (t.text == "f64")
                    g.dtype = DType::f64;
                else
                    throw CompileError(t.pos, "unsupported element type 'st." + t.text + "'");
                have_dtype = true;
            } else if (key.text == "shape") {
                SourcePos pos = cur().pos;
                expect_op("(");
                while (!at_op(")")) {
                    g.shape.push_back(parse_int_literal());
                    if (!accept_op(","))
                        break;
                }
                expect_op(")");
                if (g.shape.empty() || g.shape.size() > kMaxDims)
                    throw CompileError(pos, "grid shape must have 1 to 3 extents");
                for (auto e : g.shape)
                    if (e < 1)
                        throw CompileError(pos, "grid extents must be positive");
                have_shape = true;
            } else if (key.text == "order") {
                SourcePos pos = cur().pos;
                std::int64_t o = parse_int_literal();
                if (o < 0 || o > 64)
                    throw CompileError(pos, "grid order must be between 0 and 64");
                g.order = static_cast<int>(o);
                have_order = true;
            } else {
                throw CompileError(key.pos, "unknown grid keyword '" + key.text + "'");
            }
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        expect_newline();
        if (!have_dtype || !have_shape || !have_order)
            throw CompileError(g.pos, "st.grid requires dtype, shape and order");
        return g;
    }

    LaunchValue parse_launch_value() {
        LaunchValue v;
        v.pos = cur().pos;
        if (at(Tok::string)) {
            v.kind = LaunchValue::Kind::string;
            v.text = cur().text;
            ++i_;
        } else if (at_name("True") || at_name("False")) {
            v.kind = LaunchValue::Kind::boolean;
            v.boolean = cur().text == "True";
            ++i_;
        } else if (at(Tok::name)) {
            v.kind = LaunchValue::Kind::name;
            v.text = expect_name().text;
            while (accept_op("."))
                v.text += "." + expect_name().text;
        } else if (at_op("(")) {
            v.kind = LaunchValue::Kind::tuple;
            expect_op("(");
            while (!at_op(")")) {
                v.ints.push_back(parse_int_literal());
                if (!accept_op(","))
                    break;
            }
            expect_op(")");
        } else {
            bool neg = accept_op("-");
            if (!at(Tok::number))
                fail("expected a launch parameter value, found " + describe(cur()));
            const std::string &t = cur().text;
            if (t.find_first_of(".eE") == std::string::npos) {
                v.kind = LaunchValue::Kind::integer;
                std::from_chars(t.data(), t.data() + t.size(), v.integer);
                if (neg)
                    v.integer = -v.integer;
            } else {
                v.kind = LaunchValue::Kind::real;
                std::from_chars(t.data(), t.data() + t.size(), v.real);
                if (neg)
                    v.real = -v.real;
            }
            ++i_;
        }
        return v;
    }

    LaunchDecl parse_launch() {
        LaunchDecl l;
        l.pos = cur().pos;
        expect_st_member(); // launch
        expect_op("(");
        const Token &key = expect_name("'backend'");
        if (key.text != "backend")
            throw CompileError(key.pos, "st.launch takes a single 'backend=' argument");
        expect_op("=");
        const Token &be = expect_st_member();
        auto kind = backend_from_name(be.text);
        if (!kind)
            throw CompileError(be.pos, "unsupported backend 'st." + be.text + "'");
        l.backend = *kind;
        l.backend_call = be.text;
        expect_op("(");
        while (!at_op(")")) {
            const Token &pk = expect_name("backend parameter");
            expect_op("=");
            l.params.emplace_back(pk.text, parse_launch_value());
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        expect_op(")");
        expect_op("(");
        l.target = expect_name("target name").text;
        expect_op(")");
        expect_op("(");
        while (!at_op(")")) {
            LaunchArg a;
            a.pos = cur().pos;
            if (at(Tok::name)) {
                a.is_grid = true;
                a.grid = expect_name().text;
            } else {
                a.value = parse_int_literal();
            }
            l.args.push_back(std::move(a));
            if (!accept_op(","))
                break;
        }
        expect_op(")");
        expect_newline();
        return l;
    }

    std::vector<Token> toks_;
    std::size_t i_ = 0;
    int arity_ = -1;
    std::vector<Diagnostic> diags_;
};

} // namespace

SourceUnit parse_source(std::string_view text) {
    return Parser(detail::tokenize(text)).run();
}

} // namespace stencilc
