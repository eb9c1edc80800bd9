#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "chor/ast.hpp"

namespace chor {

using Store = std::map<std::string, Value>;

struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& msg, Span span = {})
      : std::runtime_error(msg), span(span) {}
  Span span;
};

struct BuiltinSig {
  std::vector<PayloadType> params;
  PayloadType ret = PayloadType::String;
};

/// A pure function definable in a scenario file: parameter list with payload
/// types and an expression body over those parameters.
struct BuiltinDef {
  std::vector<std::pair<std::string, PayloadType>> params;
  PayloadType ret = PayloadType::String;
  ExprPtr body;

  BuiltinSig sig() const {
    BuiltinSig s;
    for (const auto& [name, t] : params) s.params.push_back(t);
    s.ret = ret;
    return s;
  }
};

struct Builtins {
  std::map<std::string, BuiltinDef> defs;

  const BuiltinDef* find(const std::string& name) const {
    auto it = defs.find(name);
    return it == defs.end() ? nullptr : &it->second;
  }

  /// `blocks` is predefined as the identity on strings; scenarios may
  /// override it or add further definitions.
  static Builtins defaults() {
    Builtins b;
    BuiltinDef blocks;
    blocks.params = {{"x", PayloadType::String}};
    blocks.ret = PayloadType::String;
    blocks.body = var("x");
    b.defs["blocks"] = std::move(blocks);
    return b;
  }
};

namespace detail {
constexpr int kMaxBuiltinDepth = 100;
}

inline Value eval_expr(const Expr& e, const Store& store, const Builtins& builtins,
                       int depth = 0);

inline bool value_as_bool(const Value& v, Span span) {
  if (const bool* b = std::get_if<bool>(&v)) return *b;
  throw EvalError("expected a bool, got " + std::string(payload_name(type_of_value(v))), span);
}

inline std::int64_t value_as_int(const Value& v, Span span) {
  if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return *i;
  throw EvalError("expected an int, got " + std::string(payload_name(type_of_value(v))), span);
}

inline const std::string& value_as_string(const Value& v, Span span) {
  if (const std::string* s = std::get_if<std::string>(&v)) return *s;
  throw EvalError("expected a string, got " + std::string(payload_name(type_of_value(v))),
                  span);
}

inline Value eval_expr(const Expr& e, const Store& store, const Builtins& builtins,
                       int depth) {
  if (const Value* v = std::get_if<Value>(&e.node)) return *v;
  if (const VarRef* r = std::get_if<VarRef>(&e.node)) {
    auto it = store.find(r->name);
    if (it == store.end())
      throw EvalError("variable '" + r->name + "' has no value", e.span);
    return it->second;
  }
  if (const UnaryExpr* u = std::get_if<UnaryExpr>(&e.node)) {
    return Value{!value_as_bool(eval_expr(*u->operand, store, builtins, depth), e.span)};
  }
  if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e.node)) {
    Value l = eval_expr(*b->lhs, store, builtins, depth);
    Value r = eval_expr(*b->rhs, store, builtins, depth);
    switch (b->op) {
      case BinOp::Eq:
      case BinOp::Ne: {
        if (l.index() != r.index())
          throw EvalError("comparing values of different types", e.span);
        bool eq = l == r;
        return Value{b->op == BinOp::Eq ? eq : !eq};
      }
      case BinOp::Lt: return Value{value_as_int(l, e.span) < value_as_int(r, e.span)};
      case BinOp::Le: return Value{value_as_int(l, e.span) <= value_as_int(r, e.span)};
      case BinOp::Add:
        return Value{std::int64_t(value_as_int(l, e.span) + value_as_int(r, e.span))};
      case BinOp::Concat:
        return Value{value_as_string(l, e.span) + value_as_string(r, e.span)};
      case BinOp::And:
        return Value{value_as_bool(l, e.span) && value_as_bool(r, e.span)};
      case BinOp::Or:
        return Value{value_as_bool(l, e.span) || value_as_bool(r, e.span)};
    }
    throw EvalError("bad operator", e.span);
  }
  const auto& call = std::get<BuiltinCall>(e.node);
  const BuiltinDef* def = builtins.find(call.name);
  if (!def) throw EvalError("unknown builtin '" + call.name + "'", e.span);
  if (def->params.size() != call.args.size())
    throw EvalError("builtin '" + call.name + "' expects " +
                        std::to_string(def->params.size()) + " argument(s), got " +
                        std::to_string(call.args.size()),
                    e.span);
  if (depth >= detail::kMaxBuiltinDepth)
    throw EvalError("builtin call depth limit exceeded", e.span);
  Store frame;
  for (size_t i = 0; i < call.args.size(); ++i) {
    Value v = eval_expr(*call.args[i], store, builtins, depth);
    if (type_of_value(v) != def->params[i].second)
      throw EvalError("builtin '" + call.name + "' argument " + std::to_string(i + 1) +
                          ": expected " + payload_name(def->params[i].second) + ", got " +
                          payload_name(type_of_value(v)),
                      e.span);
    frame[def->params[i].first] = std::move(v);
  }
  return eval_expr(*def->body, frame, builtins, depth + 1);
}

}  // namespace chor
