#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stencilc/ast.hpp"

namespace stencilc {

/// Parses a `.stpy` source. Throws CompileError carrying positioned
/// diagnostics on syntax errors, unknown constructs, missing type hints and
/// offset arity mismatches.
SourceUnit parse_source(std::string_view text);

/// Canonical DSL text for a unit. `parse_source(print_source(u))` yields a
/// unit that prints identically.
std::string print_source(const SourceUnit &unit);

std::string print_expr(const Expr &e);

/// Semantic checks. Empty result iff the unit is well formed; diagnostics are
/// sorted by source position.
std::vector<Diagnostic> validate(const SourceUnit &unit);

/// Throws CompileError if `validate` reports any error.
void require_valid(const SourceUnit &unit);

/// Target parameters bound to top-level grids and integer values.
struct TargetBinding {
    const TargetDecl *target = nullptr;
    std::map<std::string, std::string> grids; // parameter -> top-level grid
    std::map<std::string, std::int64_t> ints;
};

/// Binds `target_name` (the launched target when empty). Grid parameters come
/// from the launch arguments when the launch names this target, otherwise
/// from the top-level grid with the same name. Integer parameters come from
/// the launch, then `overrides`; unbound integers are simply absent.
TargetBinding bind_target(const SourceUnit &unit, const std::string &target_name = {},
                          const std::map<std::string, std::int64_t> &overrides = {});

/// Parameter keys accepted by each backend in `st.launch`.
const std::vector<std::string> &backend_param_keys(BackendKind k);

} // namespace stencilc
