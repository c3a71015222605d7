#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stencilc {

enum class DType { f32, f64 };

std::string_view dtype_name(DType t);
std::size_t dtype_size(DType t);

/// 1-based line/column into a source file. Line 0 means "no position".
struct SourcePos {
    int line = 0;
    int col = 0;

    friend bool operator==(const SourcePos &, const SourcePos &) = default;
    friend auto operator<=>(const SourcePos &, const SourcePos &) = default;
};

enum class Severity { error, warning, note };

struct Diagnostic {
    SourcePos pos;
    Severity severity = Severity::error;
    std::string message;

    /// `file:line:col: severity: message`
    std::string render(std::string_view file) const;
};

bool has_errors(const std::vector<Diagnostic> &diags);

/// Thrown by the frontend, planners and loaders when input is rejected.
/// Always carries at least one diagnostic.
class CompileError : public std::runtime_error {
public:
    explicit CompileError(std::vector<Diagnostic> diags);
    CompileError(SourcePos pos, std::string message);

    const std::vector<Diagnostic> &diagnostics() const { return diags_; }

private:
    std::vector<Diagnostic> diags_;
};

/// Shortest decimal text that round-trips to the same value of the given type.
std::string format_real(double value, DType t);

} // namespace stencilc
