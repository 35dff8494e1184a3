#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sage/defect.hpp"

namespace sage::dsl {

enum class TokenKind {
    Identifier,
    Keyword,
    IntLiteral,
    RealLiteral,
    StringLiteral,
    Assign,     // :=
    Colon,      // :
    Comma,      // ,
    Dot,        // .
    Equal,      // =
    LParen,
    RParen,
    LBrace,
    RBrace,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    EqEq,
    Ne,
    Ge,
    Gt,
    EndOfFile,
};

struct Token {
    TokenKind kind = TokenKind::EndOfFile;
    std::string text;
    int line = 1;
    int column = 1;

    std::int64_t int_value = 0;  // IntLiteral
    double real_value = 0;       // RealLiteral

    bool is(TokenKind k) const { return kind == k; }
    bool is_keyword(std::string_view kw) const {
        return kind == TokenKind::Keyword && text == kw;
    }
};

struct TokenizeResult {
    std::vector<Token> tokens;  // always ends with EndOfFile
    std::vector<Defect> defects;
};

// Longest-match lexing; `#` comments stripped; positions retained.
// Illegal characters become compilation defects and lexing continues.
TokenizeResult tokenize(std::string_view source);

bool is_dsl_keyword(std::string_view word);

// Keyword set exposed for the lexical-similarity metric.
const std::vector<std::string>& dsl_keywords();

}  // namespace sage::dsl
