#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "chor/source.hpp"

namespace chor {

// ---------------------------------------------------------------------------
// Identifiers and participants
// ---------------------------------------------------------------------------

/// A named entity with its defining occurrence. Equality ignores the span:
/// two identifiers are the same identifier iff they have the same name.
struct Ident {
  std::string name;
  Span span;

  Ident() = default;
  Ident(std::string n) : name(std::move(n)) {}
  Ident(std::string n, Span s) : name(std::move(n)), span(s) {}

  friend bool operator==(const Ident& a, const Ident& b) { return a.name == b.name; }
  friend bool operator!=(const Ident& a, const Ident& b) { return a.name != b.name; }
  friend bool operator<(const Ident& a, const Ident& b) { return a.name < b.name; }
};

using SessionId = Ident;
using OpName = Ident;
using VarName = Ident;
using ProcName = Ident;
using RoleName = Ident;

/// Statements mention either a process of this module or a reference to an
/// external process, introduced by a session's role bindings. The two kinds
/// share one namespace-per-procedure, so the name alone identifies the entity.
enum class PartKind { Process, Role };

struct Participant {
  std::string name;
  PartKind kind = PartKind::Process;
  Span span;

  bool is_process() const { return kind == PartKind::Process; }
  bool is_role() const { return kind == PartKind::Role; }

  friend bool operator==(const Participant& a, const Participant& b) {
    return a.name == b.name && a.kind == b.kind;
  }
  friend bool operator!=(const Participant& a, const Participant& b) { return !(a == b); }
};

// ---------------------------------------------------------------------------
// Values and payload types
// ---------------------------------------------------------------------------

struct Unit {
  friend bool operator==(Unit, Unit) { return true; }
  friend bool operator!=(Unit, Unit) { return false; }
  friend bool operator<(Unit, Unit) { return false; }
};

/// The literal domain shared by expressions, stores and traces.
using Value = std::variant<Unit, bool, std::int64_t, std::string>;

enum class PayloadType { String, Int, Bool, Unit };

inline const char* payload_name(PayloadType t) {
  switch (t) {
    case PayloadType::String: return "string";
    case PayloadType::Int: return "int";
    case PayloadType::Bool: return "bool";
    case PayloadType::Unit: return "void";
  }
  return "?";
}

inline PayloadType type_of_value(const Value& v) {
  if (std::holds_alternative<Unit>(v)) return PayloadType::Unit;
  if (std::holds_alternative<bool>(v)) return PayloadType::Bool;
  if (std::holds_alternative<std::int64_t>(v)) return PayloadType::Int;
  return PayloadType::String;
}

inline std::string escape_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

/// Renders a value the way traces and scenarios spell it; unit renders empty.
inline std::string render_value(const Value& v) {
  if (std::holds_alternative<Unit>(v)) return "";
  if (const bool* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  if (const std::int64_t* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return escape_string(std::get<std::string>(v));
}

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class BinOp { Eq, Ne, Lt, Le, Add, Concat, And, Or };
enum class UnOp { Not };

inline const char* binop_name(BinOp op) {
  switch (op) {
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Add: return "+";
    case BinOp::Concat: return "++";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct VarRef {
  std::string name;
};

struct UnaryExpr {
  UnOp op;
  ExprPtr operand;
};

struct BinaryExpr {
  BinOp op;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct BuiltinCall {
  std::string name;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<Value, VarRef, UnaryExpr, BinaryExpr, BuiltinCall> node;
  Span span;
};

inline ExprPtr make_expr(std::variant<Value, VarRef, UnaryExpr, BinaryExpr, BuiltinCall> node,
                         Span span = {}) {
  auto e = std::make_shared<Expr>();
  e->node = std::move(node);
  e->span = span;
  return e;
}

inline ExprPtr lit(Value v) { return make_expr(std::move(v)); }
inline ExprPtr var(std::string name) { return make_expr(VarRef{std::move(name)}); }

bool equal_exprs(const Expr& a, const Expr& b);

inline bool equal_expr_ptrs(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return equal_exprs(*a, *b);
}

inline bool equal_exprs(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const Value* v = std::get_if<Value>(&a.node)) return *v == std::get<Value>(b.node);
  if (const VarRef* r = std::get_if<VarRef>(&a.node))
    return r->name == std::get<VarRef>(b.node).name;
  if (const UnaryExpr* u = std::get_if<UnaryExpr>(&a.node)) {
    const auto& bu = std::get<UnaryExpr>(b.node);
    return u->op == bu.op && equal_expr_ptrs(u->operand, bu.operand);
  }
  if (const BinaryExpr* x = std::get_if<BinaryExpr>(&a.node)) {
    const auto& bx = std::get<BinaryExpr>(b.node);
    return x->op == bx.op && equal_expr_ptrs(x->lhs, bx.lhs) && equal_expr_ptrs(x->rhs, bx.rhs);
  }
  const auto& c = std::get<BuiltinCall>(a.node);
  const auto& bc = std::get<BuiltinCall>(b.node);
  if (c.name != bc.name || c.args.size() != bc.args.size()) return false;
  for (size_t i = 0; i < c.args.size(); ++i)
    if (!equal_expr_ptrs(c.args[i], bc.args[i])) return false;
  return true;
}

/// Collects every variable read by the expression.
inline void free_vars(const Expr& e, std::set<std::string>& out) {
  if (const VarRef* r = std::get_if<VarRef>(&e.node)) {
    out.insert(r->name);
  } else if (const UnaryExpr* u = std::get_if<UnaryExpr>(&e.node)) {
    free_vars(*u->operand, out);
  } else if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e.node)) {
    free_vars(*b->lhs, out);
    free_vars(*b->rhs, out);
  } else if (const BuiltinCall* c = std::get_if<BuiltinCall>(&e.node)) {
    for (const auto& a : c->args) free_vars(*a, out);
  }
}

// ---------------------------------------------------------------------------
// Choreographies
// ---------------------------------------------------------------------------

struct Stmt;
using Choreography = std::vector<Stmt>;

/// `p.e -> q.x : op(k)`. The expression is absent when the sender is an
/// external role (its module evaluates it); the variable is absent when the
/// receiver is external (its module binds it).
struct ValueComm {
  Participant sender;
  ExprPtr expr;  // null iff sender is a role
  Participant receiver;
  std::optional<VarName> var;  // nullopt iff receiver is a role
  OpName op;
  SessionId session;
};

/// `p -> q : op(k)` — payload-free, used as completion signal and branch selector.
struct Selection {
  Participant sender;
  Participant receiver;
  OpName op;
  SessionId session;
};

struct Cond {
  ExprPtr guard;
  Ident at;  // deciding process
  Choreography then_branch;
  Choreography else_branch;
};

struct LocalAssign {
  Ident at;
  VarName var;
  ExprPtr expr;
};

struct CallStmt {
  ProcName proc;
  std::vector<Ident> process_args;
  std::vector<SessionId> session_args;  // resolved from the callee's signature
};

struct Stmt {
  std::variant<ValueComm, Selection, Cond, LocalAssign, CallStmt> node;
  Span span;
};

bool equal_stmts(const Stmt& a, const Stmt& b);

inline bool equal_choreographies(const Choreography& a, const Choreography& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!equal_stmts(a[i], b[i])) return false;
  return true;
}

inline bool equal_stmts(const Stmt& a, const Stmt& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const ValueComm* v = std::get_if<ValueComm>(&a.node)) {
    const auto& w = std::get<ValueComm>(b.node);
    return v->sender == w.sender && equal_expr_ptrs(v->expr, w.expr) &&
           v->receiver == w.receiver && v->var == w.var && v->op == w.op &&
           v->session == w.session;
  }
  if (const Selection* s = std::get_if<Selection>(&a.node)) {
    const auto& t = std::get<Selection>(b.node);
    return s->sender == t.sender && s->receiver == t.receiver && s->op == t.op &&
           s->session == t.session;
  }
  if (const Cond* c = std::get_if<Cond>(&a.node)) {
    const auto& d = std::get<Cond>(b.node);
    return equal_expr_ptrs(c->guard, d.guard) && c->at == d.at &&
           equal_choreographies(c->then_branch, d.then_branch) &&
           equal_choreographies(c->else_branch, d.else_branch);
  }
  if (const LocalAssign* l = std::get_if<LocalAssign>(&a.node)) {
    const auto& m = std::get<LocalAssign>(b.node);
    return l->at == m.at && l->var == m.var && equal_expr_ptrs(l->expr, m.expr);
  }
  const auto& x = std::get<CallStmt>(a.node);
  const auto& y = std::get<CallStmt>(b.node);
  return x.proc == y.proc && x.process_args == y.process_args &&
         x.session_args == y.session_args;
}

/// Structural equality of choreographies, spans disregarded. (All equality in
/// this module already ignores spans; the name states the contract.)
inline bool equal_modulo_spans(const Choreography& a, const Choreography& b) {
  return equal_choreographies(a, b);
}

/// The process/role names a statement head touches. Two statements may swap
/// iff these sets are disjoint. A conditional counts only its deciding
/// process; a call counts its process arguments.
inline std::set<std::string> free_processes(const Stmt& s) {
  std::set<std::string> out;
  if (const ValueComm* v = std::get_if<ValueComm>(&s.node)) {
    out.insert(v->sender.name);
    out.insert(v->receiver.name);
  } else if (const Selection* sel = std::get_if<Selection>(&s.node)) {
    out.insert(sel->sender.name);
    out.insert(sel->receiver.name);
  } else if (const Cond* c = std::get_if<Cond>(&s.node)) {
    out.insert(c->at.name);
  } else if (const LocalAssign* l = std::get_if<LocalAssign>(&s.node)) {
    out.insert(l->at.name);
  } else if (const CallStmt* call = std::get_if<CallStmt>(&s.node)) {
    for (const auto& p : call->process_args) out.insert(p.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Protocols: global and local types
// ---------------------------------------------------------------------------

struct GlobalType;
using GlobalTypePtr = std::shared_ptr<const GlobalType>;

struct GlobalBranch {
  PayloadType payload = PayloadType::Unit;
  GlobalTypePtr cont;
  Span span;
};

/// A multiparty protocol: either the terminated protocol (no branches) or a
/// labeled interaction `from -> to` with at least one branch.
struct GlobalType {
  RoleName from;
  RoleName to;
  std::map<std::string, GlobalBranch> branches;  // empty map = end
  Span span;

  bool is_end() const { return branches.empty(); }
};

inline const GlobalTypePtr& global_end() {
  static const GlobalTypePtr end = std::make_shared<GlobalType>();
  return end;
}

inline GlobalTypePtr make_interaction(RoleName from, RoleName to,
                                      std::map<std::string, GlobalBranch> branches,
                                      Span span = {}) {
  auto g = std::make_shared<GlobalType>();
  g->from = std::move(from);
  g->to = std::move(to);
  g->branches = std::move(branches);
  g->span = span;
  return g;
}

inline bool equal_global_types(const GlobalTypePtr& a, const GlobalTypePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->is_end() != b->is_end()) return false;
  if (a->is_end()) return true;
  if (a->from != b->from || a->to != b->to) return false;
  if (a->branches.size() != b->branches.size()) return false;
  auto it = a->branches.begin();
  auto jt = b->branches.begin();
  for (; it != a->branches.end(); ++it, ++jt) {
    if (it->first != jt->first) return false;
    if (it->second.payload != jt->second.payload) return false;
    if (!equal_global_types(it->second.cont, jt->second.cont)) return false;
  }
  return true;
}

/// Every role mentioned anywhere in the protocol.
inline void collect_roles(const GlobalTypePtr& g, std::set<std::string>& out) {
  if (!g || g->is_end()) return;
  out.insert(g->from.name);
  out.insert(g->to.name);
  for (const auto& [label, br] : g->branches) collect_roles(br.cont, out);
}

/// Every (label, payload) pair occurring in the protocol.
inline void collect_labels(const GlobalTypePtr& g,
                           std::set<std::pair<std::string, PayloadType>>& out) {
  if (!g || g->is_end()) return;
  for (const auto& [label, br] : g->branches) {
    out.insert({label, br.payload});
    collect_labels(br.cont, out);
  }
}

enum class LocalKind { Send, Recv, End };

struct LocalType;
using LocalTypePtr = std::shared_ptr<const LocalType>;

struct LocalBranch {
  PayloadType payload = PayloadType::Unit;
  LocalTypePtr cont;
};

/// One role's view of a protocol. A Send with several branches is an internal
/// choice, a Recv with several branches an offer.
struct LocalType {
  LocalKind kind = LocalKind::End;
  RoleName peer;
  std::map<std::string, LocalBranch> branches;

  bool is_end() const { return kind == LocalKind::End; }
};

inline const LocalTypePtr& local_end() {
  static const LocalTypePtr end = std::make_shared<LocalType>();
  return end;
}

inline LocalTypePtr make_local(LocalKind kind, RoleName peer,
                               std::map<std::string, LocalBranch> branches) {
  auto l = std::make_shared<LocalType>();
  l->kind = kind;
  l->peer = std::move(peer);
  l->branches = std::move(branches);
  return l;
}

inline bool equal_local_types(const LocalTypePtr& a, const LocalTypePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  if (a->is_end()) return true;
  if (a->peer != b->peer || a->branches.size() != b->branches.size()) return false;
  auto it = a->branches.begin();
  auto jt = b->branches.begin();
  for (; it != a->branches.end(); ++it, ++jt) {
    if (it->first != jt->first || it->second.payload != jt->second.payload) return false;
    if (!equal_local_types(it->second.cont, jt->second.cont)) return false;
  }
  return true;
}

inline std::string show_local_type(const LocalTypePtr& l) {
  if (!l || l->is_end()) return "end";
  std::string out = l->kind == LocalKind::Send ? "!" : "?";
  out += l->peer.name;
  out += "{";
  bool first = true;
  for (const auto& [label, br] : l->branches) {
    if (!first) out += ", ";
    first = false;
    out += label;
    out += '(';
    out += payload_name(br.payload);
    out += ").";
    out += show_local_type(br.cont);
  }
  out += "}";
  return out;
}

inline std::string show_global_type(const GlobalTypePtr& g) {
  if (!g || g->is_end()) return "end";
  std::string out = g->from.name + "->" + g->to.name + "{";
  bool first = true;
  for (const auto& [label, br] : g->branches) {
    if (!first) out += ", ";
    first = false;
    out += label;
    out += '(';
    out += payload_name(br.payload);
    out += ").";
    out += show_global_type(br.cont);
  }
  out += "}";
  return out;
}

// ---------------------------------------------------------------------------
// Endpoint programs
// ---------------------------------------------------------------------------

struct EndpointProgram;
using EpPtr = std::shared_ptr<const EndpointProgram>;

/// Sends and receives address protocol roles, not processes; the session
/// table resolves roles to processes at run/link time. That keeps projected
/// code reusable and lets modules leave roles unresolved until linking.
struct EpSend {
  SessionId session;
  RoleName to;
  OpName op;
  ExprPtr payload;  // null for selections
  EpPtr cont;
};

struct EpRecvBranch {
  std::optional<VarName> var;
  EpPtr cont;
};

struct EpRecv {
  SessionId session;
  RoleName from;
  std::map<std::string, EpRecvBranch> branches;
};

struct EpCond {
  ExprPtr guard;
  EpPtr then_branch;
  EpPtr else_branch;
};

struct EpAssign {
  VarName var;
  ExprPtr expr;
  EpPtr cont;
};

struct EpCall {
  std::string target;  // "<procedure>.<formal process>"
  std::vector<SessionId> session_args;
  EpPtr cont;
};

struct EpEnd {};

struct EndpointProgram {
  std::variant<EpSend, EpRecv, EpCond, EpAssign, EpCall, EpEnd> node;
};

inline const EpPtr& ep_end() {
  static const EpPtr end = std::make_shared<EndpointProgram>(EndpointProgram{EpEnd{}});
  return end;
}

inline EpPtr make_ep(std::variant<EpSend, EpRecv, EpCond, EpAssign, EpCall, EpEnd> node) {
  auto e = std::make_shared<EndpointProgram>();
  e->node = std::move(node);
  return e;
}

bool equal_endpoints(const EpPtr& a, const EpPtr& b);

inline bool equal_endpoints(const EpPtr& a, const EpPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->node.index() != b->node.index()) return false;
  if (const EpSend* s = std::get_if<EpSend>(&a->node)) {
    const auto& t = std::get<EpSend>(b->node);
    return s->session == t.session && s->to == t.to && s->op == t.op &&
           equal_expr_ptrs(s->payload, t.payload) && equal_endpoints(s->cont, t.cont);
  }
  if (const EpRecv* r = std::get_if<EpRecv>(&a->node)) {
    const auto& q = std::get<EpRecv>(b->node);
    if (r->session != q.session || r->from != q.from) return false;
    if (r->branches.size() != q.branches.size()) return false;
    auto it = r->branches.begin();
    auto jt = q.branches.begin();
    for (; it != r->branches.end(); ++it, ++jt) {
      if (it->first != jt->first || it->second.var != jt->second.var) return false;
      if (!equal_endpoints(it->second.cont, jt->second.cont)) return false;
    }
    return true;
  }
  if (const EpCond* c = std::get_if<EpCond>(&a->node)) {
    const auto& d = std::get<EpCond>(b->node);
    return equal_expr_ptrs(c->guard, d.guard) &&
           equal_endpoints(c->then_branch, d.then_branch) &&
           equal_endpoints(c->else_branch, d.else_branch);
  }
  if (const EpAssign* l = std::get_if<EpAssign>(&a->node)) {
    const auto& m = std::get<EpAssign>(b->node);
    return l->var == m.var && equal_expr_ptrs(l->expr, m.expr) &&
           equal_endpoints(l->cont, m.cont);
  }
  if (const EpCall* x = std::get_if<EpCall>(&a->node)) {
    const auto& y = std::get<EpCall>(b->node);
    return x->target == y.target && x->session_args == y.session_args &&
           equal_endpoints(x->cont, y.cont);
  }
  return true;  // EpEnd
}

// ---------------------------------------------------------------------------
// Modules
// ---------------------------------------------------------------------------

/// `c[C]` inside a session declaration: local member (process parameter or
/// external reference) playing protocol role C.
struct RoleBinding {
  Participant member;
  RoleName role;

  friend bool operator==(const RoleBinding& a, const RoleBinding& b) {
    return a.member == b.member && a.role == b.role;
  }
};

struct SessionDecl {
  SessionId session;
  Ident protocol;
  std::vector<RoleBinding> roles;
  Span span;

  const RoleBinding* binding_of_member(const std::string& member) const {
    for (const auto& rb : roles)
      if (rb.member.name == member) return &rb;
    return nullptr;
  }
  const RoleBinding* binding_of_role(const std::string& role) const {
    for (const auto& rb : roles)
      if (rb.role.name == role) return &rb;
    return nullptr;
  }

  friend bool operator==(const SessionDecl& a, const SessionDecl& b) {
    return a.session == b.session && a.protocol == b.protocol && a.roles == b.roles;
  }
};

struct Procedure {
  ProcName name;
  std::vector<Ident> params;
  std::vector<SessionDecl> sessions;
  Choreography body;
  Span span;

  const SessionDecl* session(const std::string& name) const {
    for (const auto& s : sessions)
      if (s.session.name == name) return &s;
    return nullptr;
  }
  bool is_param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return true;
    return false;
  }
  /// Protocol role played by `member` in session `k`, if any.
  std::optional<RoleName> role_of(const std::string& k, const std::string& member) const {
    const SessionDecl* sd = session(k);
    if (!sd) return std::nullopt;
    const RoleBinding* rb = sd->binding_of_member(member);
    if (!rb) return std::nullopt;
    return rb->role;
  }

  friend bool operator==(const Procedure& a, const Procedure& b) {
    return a.name == b.name && a.params == b.params && a.sessions == b.sessions &&
           equal_choreographies(a.body, b.body);
  }
};

struct Module {
  std::string source_path;
  std::map<std::string, GlobalTypePtr> protocols;
  std::map<std::string, Procedure> procedures;
  std::optional<std::string> entry;

  const Procedure* procedure(const std::string& name) const {
    auto it = procedures.find(name);
    return it == procedures.end() ? nullptr : &it->second;
  }
  const GlobalTypePtr* protocol(const std::string& name) const {
    auto it = protocols.find(name);
    return it == protocols.end() ? nullptr : &it->second;
  }
};

/// Structural module equality; source paths and spans do not participate.
inline bool equal_modulo_spans(const Module& a, const Module& b) {
  if (a.entry != b.entry) return false;
  if (a.protocols.size() != b.protocols.size()) return false;
  {
    auto it = a.protocols.begin();
    auto jt = b.protocols.begin();
    for (; it != a.protocols.end(); ++it, ++jt) {
      if (it->first != jt->first) return false;
      if (!equal_global_types(it->second, jt->second)) return false;
    }
  }
  if (a.procedures.size() != b.procedures.size()) return false;
  auto it = a.procedures.begin();
  auto jt = b.procedures.begin();
  for (; it != a.procedures.end(); ++it, ++jt) {
    if (it->first != jt->first) return false;
    if (!(it->second == jt->second)) return false;
  }
  return true;
}

}  // namespace chor
