#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/source.hpp"

namespace chor {

struct Token {
  enum class Kind { Ident, Int, Str, Punct, Eof };
  Kind kind = Kind::Eof;
  std::string text;
  std::int64_t int_val = 0;
  std::string str_val;
  Span span;

  bool is(const char* punct) const { return kind == Kind::Punct && text == punct; }
  bool is_ident(const char* word) const { return kind == Kind::Ident && text == word; }
};

/// Tokenizes chor and scenario sources. Lexical problems become E001
/// diagnostics; lexing continues so later errors are still reported.
class Lexer {
 public:
  Lexer(const SourceFile& src, std::vector<Diagnostic>& diags)
      : src_(src), diags_(diags) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_trivia();
      if (at_end()) break;
      Token t = next_token();
      if (t.kind != Token::Kind::Eof) out.push_back(std::move(t));
    }
    Token eof;
    eof.kind = Token::Kind::Eof;
    eof.span = here(1);
    out.push_back(eof);
    return out;
  }

 private:
  const SourceFile& src_;
  std::vector<Diagnostic>& diags_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  bool at_end() const { return pos_ >= src_.text.size(); }
  char peek(size_t ahead = 0) const {
    return pos_ + ahead < src_.text.size() ? src_.text[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = src_.text[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  Span here(int len) const { return Span{line_, col_, len}; }

  void error(const std::string& msg, Span span) {
    diags_.push_back({Severity::Error, "E001", msg, src_.path, span});
  }

  void skip_trivia() {
    for (;;) {
      if (at_end()) return;
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        while (!at_end() && peek() != '\n') advance();
      } else if (c == '/' && peek(1) == '*') {
        Span open = here(2);
        advance();
        advance();
        bool closed = false;
        while (!at_end()) {
          if (peek() == '*' && peek(1) == '/') {
            advance();
            advance();
            closed = true;
            break;
          }
          advance();
        }
        if (!closed) error("unterminated block comment", open);
      } else {
        return;
      }
    }
  }

  Token next_token() {
    Span start = here(1);
    char c = peek();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return lex_ident();
    if (std::isdigit(static_cast<unsigned char>(c))) return lex_int(false);
    if (c == '-' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      advance();
      return lex_int(true, start);
    }
    if (c == '"') return lex_string();
    return lex_punct();
  }

  Token lex_ident() {
    Span start = here(0);
    std::string text;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
      text += advance();
    Token t;
    t.kind = Token::Kind::Ident;
    start.len = static_cast<int>(text.size());
    t.span = start;
    t.text = std::move(text);
    return t;
  }

  Token lex_int(bool negative, Span start = {}) {
    if (start.line == 0) start = here(0);
    std::string digits;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(peek()))) digits += advance();
    Token t;
    t.kind = Token::Kind::Int;
    t.text = (negative ? "-" : "") + digits;
    start.len = static_cast<int>(t.text.size());
    t.span = start;
    try {
      t.int_val = std::stoll(t.text);
    } catch (const std::exception&) {
      error("integer literal out of range", start);
      t.int_val = 0;
    }
    return t;
  }

  Token lex_string() {
    Span start = here(1);
    advance();  // opening quote
    std::string value;
    bool closed = false;
    while (!at_end()) {
      char c = advance();
      if (c == '"') {
        closed = true;
        break;
      }
      if (c == '\n') break;
      if (c == '\\') {
        if (at_end()) break;
        char esc = advance();
        switch (esc) {
          case 'n': value += '\n'; break;
          case 't': value += '\t'; break;
          case '"': value += '"'; break;
          case '\\': value += '\\'; break;
          default:
            error(std::string("unknown escape '\\") + esc + "'", here(2));
            value += esc;
        }
      } else {
        value += c;
      }
    }
    if (!closed) error("unterminated string literal", start);
    Token t;
    t.kind = Token::Kind::Str;
    t.str_val = std::move(value);
    start.len = static_cast<int>(t.str_val.size()) + 2;
    t.span = start;
    t.text = "\"" + t.str_val + "\"";
    return t;
  }

  Token lex_punct() {
    Span start = here(1);
    static const char* two_char[] = {"->", "==", "!=", "<=", "++", "&&", "||"};
    for (const char* op : two_char) {
      if (peek() == op[0] && peek(1) == op[1]) {
        advance();
        advance();
        Token t;
        t.kind = Token::Kind::Punct;
        t.text = op;
        start.len = 2;
        t.span = start;
        return t;
      }
    }
    char c = advance();
    switch (c) {
      case '{': case '}': case '(': case ')': case '[': case ']':
      case ';': case ',': case '.': case ':': case '@': case '=':
      case '<': case '+': case '!': {
        Token t;
        t.kind = Token::Kind::Punct;
        t.text = std::string(1, c);
        t.span = start;
        return t;
      }
      default: {
        error(std::string("unexpected character '") + c + "'", start);
        Token t;
        t.kind = Token::Kind::Eof;  // skipped; caller loops
        t.span = start;
        return t;
      }
    }
  }
};

inline std::vector<Token> tokenize(const SourceFile& src, std::vector<Diagnostic>& diags) {
  return Lexer(src, diags).run();
}

}  // namespace chor
