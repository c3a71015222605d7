#pragma once

// Program model produced by the DSL frontend (`.stpy` files).

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stencilc/affine.hpp"
#include "stencilc/common.hpp"

namespace stencilc {

inline constexpr int kMaxDims = 3;

/// Relative grid position, one signed component per grid dimension.
struct OffsetVector {
    std::array<int, kMaxDims> c{0, 0, 0};
    int dims = 0;

    OffsetVector() = default;
    OffsetVector(std::initializer_list<int> comps);

    int operator[](int d) const { return c[static_cast<std::size_t>(d)]; }
    int &operator[](int d) { return c[static_cast<std::size_t>(d)]; }
    bool is_zero() const;
    int max_abs() const;
    int nonzero_count() const;
    std::string str() const; // "(-1, 0, 2)"

    friend bool operator==(const OffsetVector &, const OffsetVector &) = default;
    friend auto operator<=>(const OffsetVector &, const OffsetVector &) = default;
};

enum class BinOp { add, sub, mul, div };
enum class UnOp { neg };

char binop_symbol(BinOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Immutable expression node. Children are shared, never mutated.
struct Expr {
    enum class Kind { constant, read, local, unary, binary };

    Kind kind = Kind::constant;
    SourcePos pos;
    std::string text;    // constant: literal as written; read: grid; local: name
    OffsetVector offset; // read
    UnOp unop = UnOp::neg;
    BinOp binop = BinOp::add;
    ExprPtr lhs; // unary operand or binary left
    ExprPtr rhs;

    static ExprPtr constant(std::string literal, SourcePos pos = {});
    static ExprPtr read(std::string grid, OffsetVector off, SourcePos pos = {});
    static ExprPtr local(std::string name, SourcePos pos = {});
    static ExprPtr unary(UnOp op, ExprPtr child, SourcePos pos = {});
    static ExprPtr binary(BinOp op, ExprPtr l, ExprPtr r, SourcePos pos = {});
};

/// Structural equality ignoring source positions.
bool same_expr(const Expr &a, const Expr &b);

/// Number of arithmetic operators (+ - * / and unary negate).
int count_operators(const Expr &e);

struct Param {
    std::string name;
    std::string type; // "grid", "i32", "i64"
    SourcePos pos;
};

struct GridDecl {
    std::string name;
    DType dtype = DType::f32;
    std::vector<std::int64_t> shape;
    int order = 0;
    SourcePos pos;

    int dims() const { return static_cast<int>(shape.size()); }
};

/// `name = expr` (temporary) or `grid.at(off).set(expr)` (update).
struct KernelStmt {
    bool is_update = false;
    std::string name; // temp name, or destination grid
    OffsetVector offset;
    ExprPtr value;
    SourcePos pos;
};

struct KernelDecl {
    std::string name;
    std::vector<Param> params;
    std::vector<KernelStmt> body;
    SourcePos pos;

    std::vector<const KernelStmt *> updates() const;
    const KernelStmt *find_local(const std::string &n) const;
    /// Expression of an update with every temporary inlined.
    ExprPtr expanded(const KernelStmt &update) const;
};

/// One keyword argument of `st.map(...)`: a scalar bound, a tuple of bounds,
/// or `g.shape`.
struct MapArg {
    enum class Kind { scalar, tuple, shape_of };
    Kind kind = Kind::scalar;
    Affine scalar;
    std::vector<Affine> tuple;
    std::string grid;
    SourcePos pos;
};

struct MapSpecRaw {
    std::vector<std::pair<std::string, MapArg>> args; // in source order
    SourcePos pos;

    const MapArg *find(const std::string &key) const;
};

struct Stmt {
    enum class Kind { for_range, map, swap };
    Kind kind = Kind::map;
    SourcePos pos;

    // for_range
    std::string var;
    Affine count;
    std::vector<Stmt> body;

    // map
    MapSpecRaw map;
    std::string kernel;
    std::vector<std::string> args;
    SourcePos kernel_pos;

    // swap: `(a, b) = (b, a)`
    std::string a, b;
};

struct TargetDecl {
    std::string name;
    std::vector<Param> params;
    std::vector<Stmt> body;
    SourcePos pos;
};

enum class BackendKind { seq, omp, gpu, dataflow };
std::string_view backend_name(BackendKind k);
std::optional<BackendKind> backend_from_name(std::string_view s);

struct LaunchValue {
    enum class Kind { integer, real, string, boolean, tuple, name };
    Kind kind = Kind::integer;
    std::int64_t integer = 0;
    double real = 0;
    bool boolean = false;
    std::string text; // string contents, or dotted name as written
    std::vector<std::int64_t> ints;
    SourcePos pos;

    /// Last component of a dotted name, or the string contents.
    std::string symbol() const;
    std::string str() const; // DSL spelling
};

struct LaunchArg {
    bool is_grid = false;
    std::string grid;
    std::int64_t value = 0;
    SourcePos pos;
};

struct LaunchDecl {
    BackendKind backend = BackendKind::seq;
    std::string backend_call; // as written: cuda, omp, ...
    std::vector<std::pair<std::string, LaunchValue>> params;
    std::string target;
    std::vector<LaunchArg> args;
    SourcePos pos;

    const LaunchValue *find(const std::string &key) const;
};

struct SourceUnit {
    bool has_import = false;
    std::vector<GridDecl> grids;
    std::vector<KernelDecl> kernels;
    std::vector<TargetDecl> targets;
    std::optional<LaunchDecl> launch;

    const GridDecl *find_grid(const std::string &n) const;
    const KernelDecl *find_kernel(const std::string &n) const;
    const TargetDecl *find_target(const std::string &n) const;
};

} // namespace stencilc
