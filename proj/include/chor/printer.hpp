#pragma once

#include <string>

#include "chor/ast.hpp"

namespace chor {

namespace detail {

// Precedence levels, loosest first: || < && < comparisons < + / ++ < ! < atoms.
inline int expr_level(const Expr& e) {
  if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e.node)) {
    switch (b->op) {
      case BinOp::Or: return 1;
      case BinOp::And: return 2;
      case BinOp::Eq:
      case BinOp::Ne:
      case BinOp::Lt:
      case BinOp::Le: return 3;
      case BinOp::Add:
      case BinOp::Concat: return 4;
    }
  }
  if (std::holds_alternative<UnaryExpr>(e.node)) return 5;
  return 6;
}

inline void print_expr(const Expr& e, int min_level, std::string& out) {
  int level = expr_level(e);
  bool parens = level < min_level;
  if (parens) out += '(';
  if (const Value* v = std::get_if<Value>(&e.node)) {
    if (std::holds_alternative<Unit>(*v))
      out += "unit";
    else
      out += render_value(*v);
  } else if (const VarRef* r = std::get_if<VarRef>(&e.node)) {
    out += r->name;
  } else if (const UnaryExpr* u = std::get_if<UnaryExpr>(&e.node)) {
    out += '!';
    print_expr(*u->operand, 5, out);
  } else if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e.node)) {
    // Comparisons are non-associative; both sides need the tighter level.
    int lhs_level = level == 3 ? 4 : level;
    int rhs_level = level == 3 ? 4 : level + 1;
    print_expr(*b->lhs, lhs_level, out);
    out += ' ';
    out += binop_name(b->op);
    out += ' ';
    print_expr(*b->rhs, rhs_level, out);
  } else {
    const auto& c = std::get<BuiltinCall>(e.node);
    out += c.name;
    out += '(';
    for (size_t i = 0; i < c.args.size(); ++i) {
      if (i) out += ", ";
      print_expr(*c.args[i], 1, out);
    }
    out += ')';
  }
  if (parens) out += ')';
}

inline void indent(int depth, std::string& out) {
  for (int i = 0; i < depth; ++i) out += "    ";
}

inline void print_gtype(const GlobalTypePtr& g, int depth, std::string& out) {
  if (!g || g->is_end()) {
    out += "end";
    return;
  }
  out += g->from.name;
  out += " -> ";
  out += g->to.name;
  out += ": ";
  auto print_branch = [&](const std::string& label, const GlobalBranch& br) {
    out += label;
    out += '(';
    out += payload_name(br.payload);
    out += ')';
    if (br.cont && !br.cont->is_end()) {
      out += ";\n";
      indent(depth + 1, out);
      print_gtype(br.cont, depth + 1, out);
    }
  };
  if (g->branches.size() == 1) {
    const auto& [label, br] = *g->branches.begin();
    print_branch(label, br);
  } else {
    out += "{\n";
    bool first = true;
    for (const auto& [label, br] : g->branches) {
      if (!first) out += ",\n";
      first = false;
      indent(depth + 1, out);
      print_branch(label, br);
    }
    out += '\n';
    indent(depth, out);
    out += '}';
  }
}

inline void print_chor(const Choreography& body, int depth, std::string& out);

inline void print_stmt(const Stmt& s, int depth, std::string& out) {
  indent(depth, out);
  if (const ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
    out += vc->sender.name;
    if (vc->expr) {
      out += '.';
      print_expr(*vc->expr, 1, out);
    }
    out += " -> ";
    out += vc->receiver.name;
    if (vc->var) {
      out += '.';
      out += vc->var->name;
    }
    out += " : ";
    out += vc->op.name;
    out += '(';
    out += vc->session.name;
    out += ')';
  } else if (const Selection* sel = std::get_if<Selection>(&s.node)) {
    out += sel->sender.name;
    out += " -> ";
    out += sel->receiver.name;
    out += " : ";
    out += sel->op.name;
    out += '(';
    out += sel->session.name;
    out += ')';
  } else if (const Cond* c = std::get_if<Cond>(&s.node)) {
    out += "if (";
    print_expr(*c->guard, 1, out);
    out += ")@";
    out += c->at.name;
    out += " {\n";
    print_chor(c->then_branch, depth + 1, out);
    indent(depth, out);
    out += '}';
    if (!c->else_branch.empty()) {
      out += " else {\n";
      print_chor(c->else_branch, depth + 1, out);
      indent(depth, out);
      out += '}';
    }
  } else if (const LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
    out += a->at.name;
    out += '.';
    out += a->var.name;
    out += " = ";
    print_expr(*a->expr, 1, out);
  } else {
    const auto& call = std::get<CallStmt>(s.node);
    out += call.proc.name;
    out += '(';
    for (size_t i = 0; i < call.process_args.size(); ++i) {
      if (i) out += ", ";
      out += call.process_args[i].name;
    }
    out += ')';
  }
}

inline void print_chor(const Choreography& body, int depth, std::string& out) {
  for (size_t i = 0; i < body.size(); ++i) {
    print_stmt(body[i], depth, out);
    if (i + 1 < body.size()) out += ';';
    out += '\n';
  }
}

}  // namespace detail

inline std::string pretty_print_expr(const Expr& e) {
  std::string out;
  detail::print_expr(e, 1, out);
  return out;
}

/// Renders a module as parseable source. Parsing the result yields a module
/// equal to the input up to source spans.
inline std::string pretty_print(const Module& m) {
  std::string out;
  bool first = true;
  for (const auto& [name, g] : m.protocols) {
    if (!first) out += '\n';
    first = false;
    out += "protocol ";
    out += name;
    out += " {\n";
    detail::indent(1, out);
    detail::print_gtype(g, 1, out);
    out += "\n}\n";
  }
  for (const auto& [name, proc] : m.procedures) {
    if (!first) out += '\n';
    first = false;
    out += "define ";
    out += name;
    out += '(';
    for (size_t i = 0; i < proc.params.size(); ++i) {
      if (i) out += ", ";
      out += proc.params[i].name;
    }
    out += ')';
    if (!proc.sessions.empty()) {
      out += "\n(";
      for (size_t i = 0; i < proc.sessions.size(); ++i) {
        const SessionDecl& sd = proc.sessions[i];
        if (i) out += ",\n ";
        out += sd.session.name;
        out += "[ ";
        out += sd.protocol.name;
        out += ": ";
        for (size_t j = 0; j < sd.roles.size(); ++j) {
          if (j) out += ", ";
          out += sd.roles[j].member.name;
          out += '[';
          out += sd.roles[j].role.name;
          out += ']';
        }
        out += " ]";
      }
      out += ')';
    }
    out += " {\n";
    detail::print_chor(proc.body, 1, out);
    out += "}\n";
  }
  return out;
}

}  // namespace chor
