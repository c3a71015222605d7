#include "stencilc/common.hpp"

#include <charconv>
#include <cmath>

namespace stencilc {

std::string_view dtype_name(DType t) { return t == DType::f32 ? "f32" : "f64"; }

std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }

static std::string_view severity_name(Severity s) {
    switch (s) {
    case Severity::error: return "error";
    case Severity::warning: return "warning";
    case Severity::note: return "note";
    }
    return "error";
}

std::string Diagnostic::render(std::string_view file) const {
    std::string out(file);
    out += ':' + std::to_string(pos.line) + ':' + std::to_string(pos.col) + ": ";
    out += severity_name(severity);
    out += ": ";
    out += message;
    return out;
}

bool has_errors(const std::vector<Diagnostic> &diags) {
    for (const auto &d : diags)
        if (d.severity == Severity::error)
            return true;
    return false;
}

static std::string first_message(const std::vector<Diagnostic> &diags) {
    return diags.empty() ? std::string("compile error") : diags.front().message;
}

CompileError::CompileError(std::vector<Diagnostic> diags)
    : std::runtime_error(first_message(diags)), diags_(std::move(diags)) {
    if (diags_.empty())
        diags_.push_back({{}, Severity::error, "compile error"});
}

CompileError::CompileError(SourcePos pos, std::string message)
    : CompileError(std::vector<Diagnostic>{{pos, Severity::error, std::move(message)}}) {}

std::string format_real(double value, DType t) {
    char buf[64];
    std::to_chars_result r;
    if (t == DType::f32)
        r = std::to_chars(buf, buf + sizeof buf, static_cast<float>(value));
    else
        r = std::to_chars(buf, buf + sizeof buf, value);
    std::string s(buf, r.ptr);
    if (std::isfinite(value) && s.find_first_of(".eEn") == std::string::npos)
        s += ".0";
    return s;
}

} // namespace stencilc
