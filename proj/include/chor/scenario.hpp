#pragma once

#include <map>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/eval.hpp"
#include "chor/expr_parser.hpp"
#include "chor/lexer.hpp"
#include "chor/source.hpp"

namespace chor {

/// Runtime inputs: initial stores per process and builtin definitions.
///
///   process c { data = "d"; sync = true; }
///   builtin blocks(x: string): string = x
///
/// Unannotated builtin parameters default to string; an omitted return type
/// is inferred from the parameter types where the body allows it.
struct Scenario {
  std::map<std::string, Store> stores;
  Builtins builtins = Builtins::defaults();
};

namespace detail {

class ScenarioParser {
 public:
  ScenarioParser(const SourceFile& src, std::vector<Diagnostic>& diags)
      : src_(src), diags_(diags), tokens_(tokenize(src, diags)) {}

  Scenario run() {
    Scenario out;
    while (!at_eof()) {
      if (peek().is_ident("process")) {
        parse_process(out);
      } else if (peek().is_ident("builtin")) {
        parse_builtin(out);
      } else {
        error("expected 'process' or 'builtin'");
        advance();
      }
    }
    return out;
  }

 private:
  const SourceFile& src_;
  std::vector<Diagnostic>& diags_;
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  const Token& peek() const { return tokens_[pos_ < tokens_.size() ? pos_ : tokens_.size() - 1]; }
  const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool at_eof() const { return peek().kind == Token::Kind::Eof; }

  void error(const std::string& msg) {
    diags_.push_back({Severity::Error, "E002", msg, src_.path, peek().span});
  }

  bool expect(const char* p) {
    if (peek().is(p)) {
      advance();
      return true;
    }
    error(std::string("expected '") + p + "'");
    return false;
  }

  std::optional<Ident> expect_ident(const char* what) {
    if (peek().kind != Token::Kind::Ident) {
      error(std::string("expected ") + what);
      return std::nullopt;
    }
    const Token& t = advance();
    return Ident{t.text, t.span};
  }

  void skip_to_toplevel() {
    while (!at_eof() && !peek().is_ident("process") && !peek().is_ident("builtin")) advance();
  }

  std::optional<Value> parse_literal() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Int) { advance(); return Value{t.int_val}; }
    if (t.kind == Token::Kind::Str) { advance(); return Value{t.str_val}; }
    if (t.is_ident("true")) { advance(); return Value{true}; }
    if (t.is_ident("false")) { advance(); return Value{false}; }
    if (t.is_ident("unit")) { advance(); return Value{Unit{}}; }
    error("expected a literal (string, integer, true, false, unit)");
    return std::nullopt;
  }

  void parse_process(Scenario& out) {
    advance();  // process
    auto name = expect_ident("process name");
    if (!name || !expect("{")) return skip_to_toplevel();
    Store& store = out.stores[name->name];
    while (!peek().is("}") && !at_eof()) {
      auto var = expect_ident("variable name");
      if (!var || !expect("=")) return skip_to_toplevel();
      auto value = parse_literal();
      if (!value) return skip_to_toplevel();
      store[var->name] = *value;
      if (!peek().is("}") && !expect(";")) return skip_to_toplevel();
    }
    expect("}");
  }

  std::optional<PayloadType> parse_type_name() {
    if (peek().is_ident("string")) { advance(); return PayloadType::String; }
    if (peek().is_ident("int")) { advance(); return PayloadType::Int; }
    if (peek().is_ident("bool")) { advance(); return PayloadType::Bool; }
    if (peek().is_ident("void")) { advance(); return PayloadType::Unit; }
    error("expected a type (string, int, bool, void)");
    return std::nullopt;
  }

  void parse_builtin(Scenario& out) {
    advance();  // builtin
    auto name = expect_ident("builtin name");
    if (!name || !expect("(")) return skip_to_toplevel();
    BuiltinDef def;
    if (!peek().is(")")) {
      do {
        auto param = expect_ident("parameter name");
        if (!param) return skip_to_toplevel();
        PayloadType t = PayloadType::String;
        if (peek().is(":")) {
          advance();
          auto pt = parse_type_name();
          if (!pt) return skip_to_toplevel();
          t = *pt;
        }
        def.params.emplace_back(param->name, t);
      } while (peek().is(",") && (advance(), true));
    }
    if (!expect(")")) return skip_to_toplevel();
    std::optional<PayloadType> declared_ret;
    if (peek().is(":")) {
      advance();
      declared_ret = parse_type_name();
      if (!declared_ret) return skip_to_toplevel();
    }
    if (!expect("=")) return skip_to_toplevel();
    def.body = parse_body_expr();
    if (!def.body) return skip_to_toplevel();
    def.ret = declared_ret ? *declared_ret : infer_return(def);
    out.builtins.defs[name->name] = std::move(def);
  }

  ExprPtr parse_body_expr() {
    ExprParser sub(tokens_, pos_, [this](const std::string& msg, Span span) {
      diags_.push_back({Severity::Error, "E002", msg, src_.path, span});
    });
    return sub.parse();
  }

  /// Best-effort return type: evaluate the body over placeholder values of
  /// the declared parameter types. Falls back to string.
  PayloadType infer_return(const BuiltinDef& def) {
    Store frame;
    for (const auto& [p, t] : def.params) {
      switch (t) {
        case PayloadType::String: frame[p] = std::string{}; break;
        case PayloadType::Int: frame[p] = std::int64_t{0}; break;
        case PayloadType::Bool: frame[p] = false; break;
        case PayloadType::Unit: frame[p] = Unit{}; break;
      }
    }
    try {
      return type_of_value(eval_expr(*def.body, frame, Builtins::defaults()));
    } catch (const EvalError&) {
      return PayloadType::String;
    }
  }
};

}  // namespace detail

inline Scenario parse_scenario(const SourceFile& src, std::vector<Diagnostic>& diags) {
  Scenario s = detail::ScenarioParser(src, diags).run();
  sort_diagnostics(diags);
  return s;
}

}  // namespace chor
