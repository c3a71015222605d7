#include "stencilc/ast.hpp"

#include <cstdlib>
#include <functional>

namespace stencilc {

OffsetVector::OffsetVector(std::initializer_list<int> comps) {
    for (int v : comps)
        c[static_cast<std::size_t>(dims++)] = v;
}

bool OffsetVector::is_zero() const { return nonzero_count() == 0; }

int OffsetVector::max_abs() const {
    int m = 0;
    for (int d = 0; d < dims; ++d)
        m = std::max(m, std::abs((*this)[d]));
    return m;
}

int OffsetVector::nonzero_count() const {
    int n = 0;
    for (int d = 0; d < dims; ++d)
        n += (*this)[d] != 0;
    return n;
}

std::string OffsetVector::str() const {
    std::string s = "(";
    for (int d = 0; d < dims; ++d) {
        if (d)
            s += ", ";
        s += std::to_string((*this)[d]);
    }
    return s + ")";
}

char binop_symbol(BinOp op) {
    switch (op) {
    case BinOp::add: return '+';
    case BinOp::sub: return '-';
    case BinOp::mul: return '*';
    case BinOp::div: return '/';
    }
    return '?';
}

ExprPtr Expr::constant(std::string literal, SourcePos pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::constant;
    e->text = std::move(literal);
    e->pos = pos;
    return e;
}

ExprPtr Expr::read(std::string grid, OffsetVector off, SourcePos pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::read;
    e->text = std::move(grid);
    e->offset = off;
    e->pos = pos;
    return e;
}

ExprPtr Expr::local(std::string name, SourcePos pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::local;
    e->text = std::move(name);
    e->pos = pos;
    return e;
}

ExprPtr Expr::unary(UnOp op, ExprPtr child, SourcePos pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::unary;
    e->unop = op;
    e->lhs = std::move(child);
    e->pos = pos;
    return e;
}

ExprPtr Expr::binary(BinOp op, ExprPtr l, ExprPtr r, SourcePos pos) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::binary;
    e->binop = op;
    e->lhs = std::move(l);
    e->rhs = std::move(r);
    e->pos = pos;
    return e;
}

bool same_expr(const Expr &a, const Expr &b) {
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case Expr::Kind::constant:
    case Expr::Kind::local: return a.text == b.text;
    case Expr::Kind::read: return a.text == b.text && a.offset == b.offset;
    case Expr::Kind::unary: return a.unop == b.unop && same_expr(*a.lhs, *b.lhs);
    case Expr::Kind::binary:
        return a.binop == b.binop && same_expr(*a.lhs, *b.lhs) && same_expr(*a.rhs, *b.rhs);
    }
    return false;
}

int count_operators(const Expr &e) {
    switch (e.kind) {
    case Expr::Kind::unary: return 1 + count_operators(*e.lhs);
    case Expr::Kind::binary: return 1 + count_operators(*e.lhs) + count_operators(*e.rhs);
    default: return 0;
    }
}

std::vector<const KernelStmt *> KernelDecl::updates() const {
    std::vector<const KernelStmt *> out;
    for (const auto &s : body)
        if (s.is_update)
            out.push_back(&s);
    return out;
}

const KernelStmt *KernelDecl::find_local(const std::string &n) const {
    const KernelStmt *found = nullptr;
    for (const auto &s : body)
        if (!s.is_update && s.name == n)
            found = &s;
    return found;
}

ExprPtr KernelDecl::expanded(const KernelStmt &update) const {
    // Temporaries are single-assignment and defined before use (checked by
    // validate), so a plain name lookup gives the right definition.
    std::function<ExprPtr(const ExprPtr &)> go = [&](const ExprPtr &e) -> ExprPtr {
        switch (e->kind) {
        case Expr::Kind::local: {
            const KernelStmt *def = find_local(e->text);
            if (!def)
                throw CompileError(e->pos, "unknown name '" + e->text + "'");
            return go(def->value);
        }
        case Expr::Kind::unary: return Expr::unary(e->unop, go(e->lhs), e->pos);
        case Expr::Kind::binary: return Expr::binary(e->binop, go(e->lhs), go(e->rhs), e->pos);
        default: return e;
        }
    };
    return go(update.value);
}

const MapArg *MapSpecRaw::find(const std::string &key) const {
    for (const auto &[k, v] : args)
        if (k == key)
            return &v;
    return nullptr;
}

std::string_view backend_name(BackendKind k) {
    switch (k) {
    case BackendKind::seq: return "seq";
    case BackendKind::omp: return "omp";
    case BackendKind::gpu: return "gpu";
    case BackendKind::dataflow: return "dataflow";
    }
    return "seq";
}

std::optional<BackendKind> backend_from_name(std::string_view s) {
    if (s == "seq")
        return BackendKind::seq;
    if (s == "omp")
        return BackendKind::omp;
    if (s == "gpu" || s == "cuda")
        return BackendKind::gpu;
    if (s == "dataflow" || s == "csl")
        return BackendKind::dataflow;
    return std::nullopt;
}

std::string LaunchValue::symbol() const {
    if (kind == Kind::name) {
        auto dot = text.rfind('.');
        return dot == std::string::npos ? text : text.substr(dot + 1);
    }
    if (kind == Kind::string)
        return text;
    if (kind == Kind::integer)
        return std::to_string(integer);
    if (kind == Kind::boolean)
        return boolean ? "true" : "false";
    return str();
}

std::string LaunchValue::str() const {
    switch (kind) {
    case Kind::integer: return std::to_string(integer);
    case Kind::real: return format_real(real, DType::f64);
    case Kind::string: return "\"" + text + "\"";
    case Kind::boolean: return boolean ? "True" : "False";
    case Kind::name: return text;
    case Kind::tuple: {
        std::string s = "(";
        for (std::size_t i = 0; i < ints.size(); ++i) {
            if (i)
                s += ", ";
            s += std::to_string(ints[i]);
        }
        if (ints.size() == 1)
            s += ",";
        return s + ")";
    }
    }
    return {};
}

const LaunchValue *LaunchDecl::find(const std::string &key) const {
    for (const auto &[k, v] : params)
        if (k == key)
            return &v;
    return nullptr;
}

const GridDecl *SourceUnit::find_grid(const std::string &n) const {
    for (const auto &g : grids)
        if (g.name == n)
            return &g;
    return nullptr;
}

const KernelDecl *SourceUnit::find_kernel(const std::string &n) const {
    for (const auto &k : kernels)
        if (k.name == n)
            return &k;
    return nullptr;
}

const TargetDecl *SourceUnit::find_target(const std::string &n) const {
    for (const auto &t : targets)
        if (t.name == n)
            return &t;
    return nullptr;
}

} // namespace stencilc
