#pragma once

// Python-flavoured tokenizer for `.stpy` sources: INDENT/DEDENT tracking,
// implicit line joining inside brackets, `#` comments.

#include <string>
#include <string_view>
#include <vector>

#include "stencilc/common.hpp"

namespace stencilc::detail {

enum class Tok { name, number, string, op, newline, indent, dedent, eof };

struct Token {
    Tok kind = Tok::eof;
    std::string text;
    SourcePos pos;
};

/// Throws CompileError on malformed input (bad indentation, stray characters,
/// unterminated strings, unbalanced brackets).
std::vector<Token> tokenize(std::string_view src);

} // namespace stencilc::detail
