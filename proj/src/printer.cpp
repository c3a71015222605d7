#include "stencilc/frontend.hpp"

namespace stencilc {

namespace {

int precedence(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::binary:
        return (e.binop == BinOp::add || e.binop == BinOp::sub) ? 1 : 2;
    case Expr::Kind::unary: return 3;
    default: return 4;
    }
}

void print_to(const Expr &e, std::string &out) {
    switch (e.kind) {
    case Expr::Kind::constant:
    case Expr::Kind::local: out += e.text; return;
    case Expr::Kind::read: out += e.text + ".at" + e.offset.str(); return;
    case Expr::Kind::unary: {
        out += '-';
        bool paren = precedence(*e.lhs) < 3;
        if (paren)
            out += '(';
        print_to(*e.lhs, out);
        if (paren)
            out += ')';
        return;
    }
    case Expr::Kind::binary: {
        int p = precedence(e);
        bool lp = precedence(*e.lhs) < p;
        bool rp = precedence(*e.rhs) <= p;
        if (lp)
            out += '(';
        print_to(*e.lhs, out);
        if (lp)
            out += ')';
        out += ' ';
        out += binop_symbol(e.binop);
        out += ' ';
        if (rp)
            out += '(';
        print_to(*e.rhs, out);
        if (rp)
            out += ')';
        return;
    }
    }
}

std::string print_params(const std::vector<Param> &params) {
    std::string s;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i)
            s += ", ";
        s += params[i].name + ": st." + params[i].type;
    }
    return s;
}

std::string print_map_arg(const MapArg &a) {
    switch (a.kind) {
    case MapArg::Kind::scalar: return a.scalar.str();
    case MapArg::Kind::shape_of: return a.grid + ".shape";
    case MapArg::Kind::tuple: {
        std::string s = "(";
        for (std::size_t i = 0; i < a.tuple.size(); ++i) {
            if (i)
                s += ", ";
            s += a.tuple[i].str();
        }
        if (a.tuple.size() == 1)
            s += ",";
        return s + ")";
    }
    }
    return {};
}

void print_stmts(const std::vector<Stmt> &body, int indent, std::string &out) {
    std::string pad(static_cast<std::size_t>(indent), ' ');
    for (const auto &s : body) {
        switch (s.kind) {
        case Stmt::Kind::for_range:
            out += pad + "for " + s.var + " in range(" + s.count.str() + "):\n";
            print_stmts(s.body, indent + 4, out);
            break;
        case Stmt::Kind::map: {
            out += pad + "st.map(";
            for (std::size_t i = 0; i < s.map.args.size(); ++i) {
                if (i)
                    out += ", ";
                out += s.map.args[i].first + "=" + print_map_arg(s.map.args[i].second);
            }
            out += ")(" + s.kernel + ")(";
            for (std::size_t i = 0; i < s.args.size(); ++i) {
                if (i)
                    out += ", ";
                out += s.args[i];
            }
            out += ")\n";
            break;
        }
        case Stmt::Kind::swap:
            out += pad + "(" + s.a + ", " + s.b + ") = (" + s.b + ", " + s.a + ")\n";
            break;
        }
    }
}

} // namespace

std::string print_expr(const Expr &e) {
    std::string out;
    print_to(e, out);
    return out;
}

std::string print_source(const SourceUnit &unit) {
    std::string out;
    if (unit.has_import)
        out += "import stencilpy as st\n";
    for (const auto &k : unit.kernels) {
        out += "\n@st.kernel\n";
        out += "def " + k.name + "(" + print_params(k.params) + "):\n";
        for (const auto &s : k.body) {
            if (s.is_update)
                out += "    " + s.name + ".at" + s.offset.str() + ".set(" + print_expr(*s.value) +
                       ")\n";
            else
                out += "    " + s.name + " = " + print_expr(*s.value) + "\n";
        }
    }
    for (const auto &t : unit.targets) {
        out += "\n@st.target\n";
        out += "def " + t.name + "(" + print_params(t.params) + "):\n";
        print_stmts(t.body, 4, out);
    }
    if (!unit.grids.empty())
        out += "\n";
    for (const auto &g : unit.grids) {
        out += g.name + " = st.grid(dtype=st." + std::string(dtype_name(g.dtype)) + ", shape=(";
        for (std::size_t i = 0; i < g.shape.size(); ++i) {
            if (i)
                out += ", ";
            out += std::to_string(g.shape[i]);
        }
        if (g.shape.size() == 1)
            out += ",";
        out += "), order=" + std::to_string(g.order) + ")\n";
    }
    if (unit.launch) {
        const auto &l = *unit.launch;
        out += "\nst.launch(backend=st." + l.backend_call + "(";
        for (std::size_t i = 0; i < l.params.size(); ++i) {
            if (i)
                out += ", ";
            out += l.params[i].first + "=" + l.params[i].second.str();
        }
        out += "))(" + l.target + ")(";
        for (std::size_t i = 0; i < l.args.size(); ++i) {
            if (i)
                out += ", ";
            out += l.args[i].is_grid ? l.args[i].grid : std::to_string(l.args[i].value);
        }
        out += ")\n";
    }
    return out;
}

} // namespace stencilc
