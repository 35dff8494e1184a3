#include "sage/dsl/lexer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace sage::dsl {

namespace {

const std::vector<std::string> kKeywords = {
    "activity", "add_param", "add_schedule", "add_state", "and", "bernoulli", "bool",
    "conditional_do", "count", "count_all", "count_neighbors", "distance", "do", "else",
    "false", "for_neighbor", "grid", "if", "init", "int", "layout", "not", "object", "or",
    "other", "param", "pos", "position", "randint", "random_conditional_do", "random_do",
    "real", "record", "record_event", "remove_activity", "remove_schedule", "remove_state",
    "rowmajor", "schedule", "seed", "self", "set", "set_activity", "set_param", "solution",
    "state", "sum_all", "todo", "true", "uniform", "when",
};

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

bool is_dsl_keyword(std::string_view word) {
    return std::binary_search(kKeywords.begin(), kKeywords.end(), word);
}

const std::vector<std::string>& dsl_keywords() { return kKeywords; }

TokenizeResult tokenize(std::string_view source) {
    TokenizeResult result;
    std::size_t i = 0;
    int line = 1;
    int column = 1;

    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (source[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
            ++i;
        }
    };

    auto push = [&](TokenKind kind, std::size_t start, std::size_t len, int tline, int tcol) {
        Token t;
        t.kind = kind;
        t.text = std::string(source.substr(start, len));
        t.line = tline;
        t.column = tcol;
        result.tokens.push_back(std::move(t));
    };

    while (i < source.size()) {
        char c = source[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < source.size() && source[i] != '\n') advance(1);
            continue;
        }

        int tline = line, tcol = column;
        std::size_t start = i;

        if (ident_start(c)) {
            while (i < source.size() && ident_char(source[i])) advance(1);
            std::string_view word = source.substr(start, i - start);
            push(is_dsl_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, start,
                 i - start, tline, tcol);
            continue;
        }

        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < source.size() && std::isdigit(static_cast<unsigned char>(source[i])))
                advance(1);
            bool real = false;
            if (i + 1 < source.size() && source[i] == '.' &&
                std::isdigit(static_cast<unsigned char>(source[i + 1]))) {
                real = true;
                advance(1);
                while (i < source.size() && std::isdigit(static_cast<unsigned char>(source[i])))
                    advance(1);
            }
            if (i < source.size() && (source[i] == 'e' || source[i] == 'E')) {
                std::size_t save = i;
                int sline = line, scol = column;
                advance(1);
                if (i < source.size() && (source[i] == '+' || source[i] == '-')) advance(1);
                if (i < source.size() && std::isdigit(static_cast<unsigned char>(source[i]))) {
                    real = true;
                    while (i < source.size() &&
                           std::isdigit(static_cast<unsigned char>(source[i])))
                        advance(1);
                } else {
                    i = save;
                    line = sline;
                    column = scol;
                }
            }
            Token t;
            t.kind = real ? TokenKind::RealLiteral : TokenKind::IntLiteral;
            t.text = std::string(source.substr(start, i - start));
            t.line = tline;
            t.column = tcol;
            if (real) {
                t.real_value = std::stod(t.text);
            } else {
                auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(),
                                               t.int_value);
                if (ec != std::errc()) {
                    result.defects.push_back(Defect::compilation(
                        tline, t.text, "integer literal out of range"));
                    t.int_value = 0;
                }
            }
            result.tokens.push_back(std::move(t));
            continue;
        }

        if (c == '"') {
            advance(1);
            std::string value;
            bool closed = false;
            while (i < source.size()) {
                char d = source[i];
                if (d == '"') {
                    advance(1);
                    closed = true;
                    break;
                }
                if (d == '\n') break;
                if (d == '\\' && i + 1 < source.size()) {
                    char e = source[i + 1];
                    if (e == '"' || e == '\\') {
                        value.push_back(e);
                        advance(2);
                        continue;
                    }
                    if (e == 'n') {
                        value.push_back('\n');
                        advance(2);
                        continue;
                    }
                }
                value.push_back(d);
                advance(1);
            }
            if (!closed) {
                result.defects.push_back(
                    Defect::compilation(tline, std::string(source.substr(start, i - start)),
                                        "unterminated string literal"));
            }
            Token t;
            t.kind = TokenKind::StringLiteral;
            t.text = std::move(value);
            t.line = tline;
            t.column = tcol;
            result.tokens.push_back(std::move(t));
            continue;
        }

        auto two = source.substr(i, 2);
        TokenKind kind;
        std::size_t len = 0;
        if (two == ":=") { kind = TokenKind::Assign; len = 2; }
        else if (two == "<=") { kind = TokenKind::Le; len = 2; }
        else if (two == ">=") { kind = TokenKind::Ge; len = 2; }
        else if (two == "==") { kind = TokenKind::EqEq; len = 2; }
        else if (two == "!=") { kind = TokenKind::Ne; len = 2; }
        else {
            len = 1;
            switch (c) {
                case ':': kind = TokenKind::Colon; break;
                case ',': kind = TokenKind::Comma; break;
                case '.': kind = TokenKind::Dot; break;
                case '=': kind = TokenKind::Equal; break;
                case '(': kind = TokenKind::LParen; break;
                case ')': kind = TokenKind::RParen; break;
                case '{': kind = TokenKind::LBrace; break;
                case '}': kind = TokenKind::RBrace; break;
                case '+': kind = TokenKind::Plus; break;
                case '-': kind = TokenKind::Minus; break;
                case '*': kind = TokenKind::Star; break;
                case '/': kind = TokenKind::Slash; break;
                case '<': kind = TokenKind::Lt; break;
                case '>': kind = TokenKind::Gt; break;
                default:
                    result.defects.push_back(Defect::compilation(
                        tline, std::string(1, c),
                        "illegal character '" + std::string(1, c) + "'"));
                    advance(1);
                    continue;
            }
        }
        advance(len);
        push(kind, start, len, tline, tcol);
    }

    Token eof;
    eof.kind = TokenKind::EndOfFile;
    eof.line = line;
    eof.column = column;
    result.tokens.push_back(std::move(eof));
    return result;
}

}  // namespace sage::dsl
