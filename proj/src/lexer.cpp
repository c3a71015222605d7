#include "lexer.hpp"

#include <cctype>

namespace stencilc::detail {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        indents_.push_back(0);
        while (i_ < src_.size()) {
            if (at_line_start_ && depth_ == 0) {
                if (handle_line_start())
                    continue;
            }
            char c = src_[i_];
            if (c == '\n') {
                if (depth_ == 0 && !last_is_newline())
                    push(Tok::newline, "\n", here());
                advance();
                at_line_start_ = depth_ == 0;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r') {
                advance();
                continue;
            }
            if (c == '#') {
                skip_comment();
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                advance();
                advance();
                continue;
            }
            if (is_ident_start(c)) {
                lex_name();
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                lex_number();
                continue;
            }
            if (c == '"' || c == '\'') {
                lex_string(c);
                continue;
            }
            lex_op();
        }
        if (depth_ != 0)
            throw CompileError(here(), "unexpected end of file inside brackets");
        if (!tokens_.empty() && !last_is_newline())
            push(Tok::newline, "\n", here());
        while (indents_.size() > 1) {
            indents_.pop_back();
            push(Tok::dedent, "", here());
        }
        push(Tok::eof, "", here());
        return std::move(tokens_);
    }

private:
    SourcePos here() const { return {line_, col_}; }

    char peek(std::size_t k) const { return i_ + k < src_.size() ? src_[i_ + k] : '\0'; }

    void advance() {
        if (src_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }

    bool last_is_newline() const {
        return tokens_.empty() || tokens_.back().kind == Tok::newline ||
               tokens_.back().kind == Tok::indent || tokens_.back().kind == Tok::dedent;
    }

    void push(Tok k, std::string text, SourcePos pos) {
        tokens_.push_back({k, std::move(text), pos});
    }

    void skip_comment() {
        while (i_ < src_.size() && src_[i_] != '\n')
            advance();
    }

    // Measures indentation of a logical line; blank and comment-only lines are
    // skipped entirely. Returns true if it consumed a blank line.
    bool handle_line_start() {
        int width = 0;
        std::size_t j = i_;
        while (j < src_.size() && (src_[j] == ' ' || src_[j] == '\t')) {
            width += src_[j] == '\t' ? 8 - (width % 8) : 1;
            ++j;
        }
        if (j >= src_.size() || src_[j] == '\n' || src_[j] == '#' || src_[j] == '\r') {
            while (i_ < j)
                advance();
            if (i_ < src_.size() && src_[i_] == '#')
                skip_comment();
            if (i_ < src_.size() && src_[i_] == '\r')
                advance();
            if (i_ < src_.size() && src_[i_] == '\n')
                advance();
            return true;
        }
        while (i_ < j)
            advance();
        at_line_start_ = false;
        SourcePos pos = here();
        if (width > indents_.back()) {
            indents_.push_back(width);
            push(Tok::indent, "", pos);
        } else {
            while (width < indents_.back()) {
                indents_.pop_back();
                push(Tok::dedent, "", pos);
            }
            if (width != indents_.back())
                throw CompileError(pos, "inconsistent indentation");
        }
        return false;
    }

    void lex_name() {
        SourcePos pos = here();
        std::size_t b = i_;
        while (i_ < src_.size() && is_ident_char(src_[i_]))
            advance();
        push(Tok::name, std::string(src_.substr(b, i_ - b)), pos);
    }

    void lex_number() {
        SourcePos pos = here();
        std::size_t b = i_;
        while (std::isdigit(static_cast<unsigned char>(peek(0))) || peek(0) == '_')
            advance();
        if (peek(0) == '.' && !is_ident_start(peek(1))) {
            advance();
            while (std::isdigit(static_cast<unsigned char>(peek(0))))
                advance();
        }
        if (peek(0) == 'e' || peek(0) == 'E') {
            std::size_t save = i_;
            int sl = line_, sc = col_;
            advance();
            if (peek(0) == '+' || peek(0) == '-')
                advance();
            if (!std::isdigit(static_cast<unsigned char>(peek(0)))) {
                i_ = save;
                line_ = sl;
                col_ = sc;
            } else {
                while (std::isdigit(static_cast<unsigned char>(peek(0))))
                    advance();
            }
        }
        if (is_ident_start(peek(0)))
            throw CompileError(here(), "malformed number literal");
        std::string text(src_.substr(b, i_ - b));
        std::erase(text, '_');
        push(Tok::number, std::move(text), pos);
    }

    void lex_string(char quote) {
        SourcePos pos = here();
        advance();
        std::string value;
        while (i_ < src_.size() && src_[i_] != quote) {
            if (src_[i_] == '\n')
                throw CompileError(pos, "unterminated string literal");
            value += src_[i_];
            advance();
        }
        if (i_ >= src_.size())
            throw CompileError(pos, "unterminated string literal");
        advance();
        push(Tok::string, std::move(value), pos);
    }

    void lex_op() {
        SourcePos pos = here();
        char c = src_[i_];
        if (c == '-' && peek(1) == '>') {
            advance();
            advance();
            push(Tok::op, "->", pos);
            return;
        }
        static constexpr std::string_view singles = "()[],:.=+-*/@";
        if (singles.find(c) == std::string_view::npos)
            throw CompileError(pos, std::string("unexpected character '") + c + "'");
        if (c == '(' || c == '[')
            ++depth_;
        if (c == ')' || c == ']') {
            if (depth_ == 0)
                throw CompileError(pos, std::string("unbalanced '") + c + "'");
            --depth_;
        }
        advance();
        push(Tok::op, std::string(1, c), pos);
    }

    std::string_view src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
    int depth_ = 0;
    bool at_line_start_ = true;
    std::vector<int> indents_;
    std::vector<Token> tokens_;
};

} // namespace

std::vector<Token> tokenize(std::string_view src) { return Lexer(src).run(); }

} // namespace stencilc::detail
