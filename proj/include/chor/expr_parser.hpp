#pragma once

#include <functional>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/lexer.hpp"

namespace chor {
namespace detail {

/// Precedence-climbing expression parser over a token stream. The owner
/// supplies the cursor and the error sink, so parsing resumes exactly where
/// the expression ends. Returns null after reporting an error.
class ExprParser {
 public:
  using ErrorFn = std::function<void(const std::string&, Span)>;

  ExprParser(const std::vector<Token>& tokens, size_t& pos, ErrorFn error)
      : tokens_(tokens), pos_(pos), error_(std::move(error)) {}

  ExprPtr parse() { return parse_or(); }

 private:
  const std::vector<Token>& tokens_;
  size_t& pos_;
  ErrorFn error_;

  const Token& peek() const {
    return tokens_[pos_ < tokens_.size() ? pos_ : tokens_.size() - 1];
  }
  const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  ExprPtr parse_or() {
    ExprPtr lhs = parse_and();
    while (lhs && peek().is("||")) {
      Span s = advance().span;
      ExprPtr rhs = parse_and();
      if (!rhs) return nullptr;
      lhs = make_expr(BinaryExpr{BinOp::Or, lhs, rhs}, s);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    ExprPtr lhs = parse_cmp();
    while (lhs && peek().is("&&")) {
      Span s = advance().span;
      ExprPtr rhs = parse_cmp();
      if (!rhs) return nullptr;
      lhs = make_expr(BinaryExpr{BinOp::And, lhs, rhs}, s);
    }
    return lhs;
  }

  // Comparisons do not chain: `a == b == c` is a syntax error upstream.
  ExprPtr parse_cmp() {
    ExprPtr lhs = parse_add();
    if (!lhs) return nullptr;
    BinOp op;
    if (peek().is("==")) op = BinOp::Eq;
    else if (peek().is("!=")) op = BinOp::Ne;
    else if (peek().is("<")) op = BinOp::Lt;
    else if (peek().is("<=")) op = BinOp::Le;
    else return lhs;
    Span s = advance().span;
    ExprPtr rhs = parse_add();
    if (!rhs) return nullptr;
    return make_expr(BinaryExpr{op, lhs, rhs}, s);
  }

  ExprPtr parse_add() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (!lhs) return nullptr;
      BinOp op;
      if (peek().is("+")) op = BinOp::Add;
      else if (peek().is("++")) op = BinOp::Concat;
      else return lhs;
      Span s = advance().span;
      ExprPtr rhs = parse_unary();
      if (!rhs) return nullptr;
      lhs = make_expr(BinaryExpr{op, lhs, rhs}, s);
    }
  }

  ExprPtr parse_unary() {
    if (peek().is("!")) {
      Span s = advance().span;
      ExprPtr operand = parse_unary();
      if (!operand) return nullptr;
      return make_expr(UnaryExpr{UnOp::Not, operand}, s);
    }
    return parse_primary();
  }

  ExprPtr parse_primary() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Int) {
      advance();
      return make_expr(Value{t.int_val}, t.span);
    }
    if (t.kind == Token::Kind::Str) {
      advance();
      return make_expr(Value{t.str_val}, t.span);
    }
    if (t.is_ident("true")) { advance(); return make_expr(Value{true}, t.span); }
    if (t.is_ident("false")) { advance(); return make_expr(Value{false}, t.span); }
    if (t.is_ident("unit")) { advance(); return make_expr(Value{Unit{}}, t.span); }
    if (t.kind == Token::Kind::Ident) {
      Ident name{t.text, t.span};
      advance();
      if (peek().is("(")) {
        advance();
        BuiltinCall call{name.name, {}};
        if (!peek().is(")")) {
          do {
            ExprPtr arg = parse_or();
            if (!arg) return nullptr;
            call.args.push_back(arg);
          } while (peek().is(",") && (advance(), true));
        }
        if (!peek().is(")")) {
          error_("expected ')'", peek().span);
          return nullptr;
        }
        advance();
        return make_expr(std::move(call), name.span);
      }
      return make_expr(VarRef{name.name}, name.span);
    }
    if (t.is("(")) {
      advance();
      ExprPtr e = parse_or();
      if (!e) return nullptr;
      if (!peek().is(")")) {
        error_("expected ')'", peek().span);
        return nullptr;
      }
      advance();
      return e;
    }
    error_("expected an expression", t.span);
    return nullptr;
  }
};

}  // namespace detail
}  // namespace chor
