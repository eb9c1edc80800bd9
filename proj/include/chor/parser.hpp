#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/expr_parser.hpp"
#include "chor/lexer.hpp"
#include "chor/source.hpp"

namespace chor {

// Error codes:
//   E001  lexical            E002  syntax
//   E003  duplicate protocol/procedure name
//   E004  resolution / well-formedness (unbound names, sender==receiver, ...)

namespace detail {

struct ParseAbort {};  // statement-level bail-out; recovery resumes at ; or }

class Parser {
 public:
  Parser(const SourceFile& src, std::vector<Diagnostic>& diags)
      : src_(src), diags_(diags), tokens_(tokenize(src, diags)) {}

  Module run() {
    Module m;
    m.source_path = src_.path;
    while (!at_eof()) {
      if (peek().is_ident("protocol")) {
        parse_protocol(m);
      } else if (peek().is_ident("define")) {
        parse_procedure(m);
      } else {
        error_here("E002", "expected 'protocol' or 'define'");
        recover_toplevel();
      }
    }
    resolve(m);
    return m;
  }

 private:
  const SourceFile& src_;
  std::vector<Diagnostic>& diags_;
  std::vector<Token> tokens_;
  size_t pos_ = 0;

  // -- token plumbing --------------------------------------------------------

  const Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < tokens_.size() ? tokens_[i] : tokens_.back();
  }
  const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
  bool at_eof() const { return peek().kind == Token::Kind::Eof; }

  void error(const std::string& code, const std::string& msg, Span span) {
    diags_.push_back({Severity::Error, code, msg, src_.path, span});
  }
  void error_here(const std::string& code, const std::string& msg) {
    error(code, msg, peek().span);
  }

  [[noreturn]] void fail(const std::string& msg) {
    std::string found = at_eof() ? "end of file" : "'" + peek().text + "'";
    error_here("E002", msg + ", found " + found);
    throw ParseAbort{};
  }

  Token expect_punct(const char* p) {
    if (!peek().is(p)) fail(std::string("expected '") + p + "'");
    return advance();
  }

  Ident expect_ident(const char* what) {
    if (peek().kind != Token::Kind::Ident) fail(std::string("expected ") + what);
    const Token& t = advance();
    return Ident{t.text, t.span};
  }

  bool accept_punct(const char* p) {
    if (peek().is(p)) {
      advance();
      return true;
    }
    return false;
  }

  void recover_toplevel() {
    while (!at_eof() && !peek().is_ident("protocol") && !peek().is_ident("define")) advance();
  }

  // Skips to the next statement boundary so one bad statement yields one
  // diagnostic and parsing continues.
  void recover_statement() {
    int depth = 0;
    while (!at_eof()) {
      if (peek().is("{")) ++depth;
      if (peek().is("}")) {
        if (depth == 0) return;
        --depth;
      }
      if (peek().is(";") && depth == 0) return;
      advance();
    }
  }

  // -- protocols -------------------------------------------------------------

  void parse_protocol(Module& m) {
    advance();  // protocol
    try {
      Ident name = expect_ident("protocol name");
      expect_punct("{");
      GlobalTypePtr g = parse_gtype();
      expect_punct("}");
      if (m.protocols.count(name.name)) {
        error("E003", "duplicate protocol name '" + name.name + "'", name.span);
      } else {
        m.protocols[name.name] = std::move(g);
      }
    } catch (ParseAbort&) {
      recover_toplevel();
    }
  }

  GlobalTypePtr parse_gtype() {
    if (peek().is_ident("end")) {
      advance();
      return global_end();
    }
    Ident from = expect_ident("role name");
    expect_punct("->");
    Ident to = expect_ident("role name");
    if (from.name == to.name)
      error("E004", "interaction cannot have the same role on both sides", to.span);
    expect_punct(":");
    std::map<std::string, GlobalBranch> branches;
    auto add_branch = [&](Ident label, GlobalBranch br) {
      if (branches.count(label.name))
        error("E004", "duplicate branch label '" + label.name + "'", label.span);
      else
        branches[label.name] = std::move(br);
    };
    if (accept_punct("{")) {
      do {
        auto [label, br] = parse_branch();
        add_branch(std::move(label), std::move(br));
      } while (accept_punct(","));
      expect_punct("}");
    } else {
      auto [label, br] = parse_branch();
      add_branch(std::move(label), std::move(br));
    }
    Span span = from.span;
    return make_interaction(std::move(from), std::move(to), std::move(branches), span);
  }

  std::pair<Ident, GlobalBranch> parse_branch() {
    Ident label = expect_ident("branch label");
    expect_punct("(");
    GlobalBranch br;
    br.span = label.span;
    br.payload = parse_ptype();
    expect_punct(")");
    if (accept_punct(";"))
      br.cont = parse_gtype();
    else
      br.cont = global_end();
    return {std::move(label), std::move(br)};
  }

  PayloadType parse_ptype() {
    if (peek().is_ident("string")) { advance(); return PayloadType::String; }
    if (peek().is_ident("int")) { advance(); return PayloadType::Int; }
    if (peek().is_ident("bool")) { advance(); return PayloadType::Bool; }
    if (peek().is_ident("void")) { advance(); return PayloadType::Unit; }
    fail("expected a payload type (string, int, bool, void)");
  }

  // -- procedures ------------------------------------------------------------

  void parse_procedure(Module& m) {
    advance();  // define
    try {
      Procedure proc;
      proc.name = expect_ident("procedure name");
      proc.span = proc.name.span;
      expect_punct("(");
      if (!peek().is(")")) {
        do {
          proc.params.push_back(expect_ident("process parameter"));
        } while (accept_punct(","));
      }
      expect_punct(")");
      if (peek().is("(")) {
        advance();
        do {
          proc.sessions.push_back(parse_session_decl());
        } while (accept_punct(","));
        expect_punct(")");
      }
      expect_punct("{");
      proc.body = parse_chor();
      expect_punct("}");
      if (m.procedures.count(proc.name.name)) {
        error("E003", "duplicate procedure name '" + proc.name.name + "'", proc.name.span);
      } else {
        m.procedures[proc.name.name] = std::move(proc);
      }
    } catch (ParseAbort&) {
      recover_toplevel();
    }
  }

  SessionDecl parse_session_decl() {
    SessionDecl sd;
    sd.session = expect_ident("session name");
    sd.span = sd.session.span;
    expect_punct("[");
    sd.protocol = expect_ident("protocol name");
    expect_punct(":");
    do {
      RoleBinding rb;
      Ident member = expect_ident("session member");
      rb.member = Participant{member.name, PartKind::Process, member.span};
      expect_punct("[");
      rb.role = expect_ident("role name");
      expect_punct("]");
      sd.roles.push_back(std::move(rb));
    } while (accept_punct(","));
    expect_punct("]");
    return sd;
  }

  // -- choreographies --------------------------------------------------------

  Choreography parse_chor() {
    Choreography body;
    for (;;) {
      while (accept_punct(";")) {
      }
      if (peek().is("}") || at_eof()) break;
      try {
        body.push_back(parse_stmt());
      } catch (ParseAbort&) {
        recover_statement();
      }
      if (!peek().is(";") && !peek().is("}")) {
        if (at_eof()) break;
        error_here("E002", "expected ';' or '}' after statement");
        recover_statement();
      }
    }
    return body;
  }

  Stmt parse_stmt() {
    Span start = peek().span;
    if (peek().is_ident("if")) return parse_cond();
    Ident first = expect_ident("statement");
    if (peek().is("(")) return parse_call(std::move(first), start);
    if (peek().is(".")) {
      advance();
      ExprPtr e = parse_expr();
      if (peek().is("=")) {
        advance();
        const VarRef* v = std::get_if<VarRef>(&e->node);
        if (!v) fail("assignment target must be a variable");
        LocalAssign a;
        a.at = std::move(first);
        a.var = VarName{v->name, e->span};
        a.expr = parse_expr();
        return Stmt{std::move(a), start};
      }
      expect_punct("->");
      return parse_comm_tail(std::move(first), std::move(e), start);
    }
    if (peek().is("->")) {
      advance();
      return parse_comm_tail(std::move(first), nullptr, start);
    }
    fail("expected '.', '->' or '(' in statement");
  }

  // After `sender[.expr] ->`: either `recv.var : op(k)`, `recv : op(k)`
  // (receiver is external or this is a selection).
  Stmt parse_comm_tail(Ident sender, ExprPtr expr, Span start) {
    Ident receiver = expect_ident("receiver");
    std::optional<VarName> var;
    if (accept_punct(".")) var = expect_ident("receive variable");
    expect_punct(":");
    Ident op = expect_ident("operation name");
    expect_punct("(");
    Ident session = expect_ident("session name");
    expect_punct(")");
    Participant snd{sender.name, PartKind::Process, sender.span};
    Participant rcv{receiver.name, PartKind::Process, receiver.span};
    if (!expr && !var) {
      Selection sel;
      sel.sender = std::move(snd);
      sel.receiver = std::move(rcv);
      sel.op = std::move(op);
      sel.session = std::move(session);
      return Stmt{std::move(sel), start};
    }
    ValueComm vc;
    vc.sender = std::move(snd);
    vc.expr = std::move(expr);
    vc.receiver = std::move(rcv);
    vc.var = std::move(var);
    vc.op = std::move(op);
    vc.session = std::move(session);
    return Stmt{std::move(vc), start};
  }

  Stmt parse_cond() {
    Span start = peek().span;
    advance();  // if
    expect_punct("(");
    Cond c;
    c.guard = parse_expr();
    expect_punct(")");
    expect_punct("@");
    c.at = expect_ident("deciding process");
    expect_punct("{");
    c.then_branch = parse_chor();
    expect_punct("}");
    if (peek().is_ident("else")) {
      advance();
      expect_punct("{");
      c.else_branch = parse_chor();
      expect_punct("}");
    }
    return Stmt{std::move(c), start};
  }

  Stmt parse_call(Ident name, Span start) {
    expect_punct("(");
    CallStmt call;
    call.proc = std::move(name);
    if (!peek().is(")")) {
      do {
        call.process_args.push_back(expect_ident("process argument"));
      } while (accept_punct(","));
    }
    expect_punct(")");
    return Stmt{std::move(call), start};
  }

  // -- expressions -----------------------------------------------------------

 public:
  ExprPtr parse_expr() {
    ExprParser sub(tokens_, pos_, [this](const std::string& msg, Span span) {
      error("E002", msg, span);
    });
    ExprPtr e = sub.parse();
    if (!e) throw ParseAbort{};
    return e;
  }

 private:

  // -- resolution ------------------------------------------------------------
  //
  // Fixes every participant's kind (process parameter vs external role
  // reference) and enforces static well-formedness. All findings are E004
  // except duplicate top-level names (E003, handled during parsing).

  void resolve(Module& m) {
    for (auto& [name, proc] : m.procedures) resolve_procedure(m, proc);
  }

  void resolve_procedure(Module& m, Procedure& proc) {
    std::set<std::string> params;
    for (const auto& p : proc.params) {
      if (!params.insert(p.name).second)
        error("E004", "duplicate process parameter '" + p.name + "'", p.span);
    }

    std::set<std::string> externals;
    std::set<std::string> session_names;
    for (auto& sd : proc.sessions) {
      if (!session_names.insert(sd.session.name).second)
        error("E004", "duplicate session name '" + sd.session.name + "'", sd.session.span);
      const GlobalTypePtr* proto = m.protocol(sd.protocol.name);
      if (!proto) {
        error("E004", "unknown protocol '" + sd.protocol.name + "'", sd.protocol.span);
        continue;
      }
      std::set<std::string> proto_roles;
      collect_roles(*proto, proto_roles);
      std::set<std::string> members;
      std::set<std::string> bound_roles;
      for (auto& rb : sd.roles) {
        if (params.count(rb.member.name)) {
          rb.member.kind = PartKind::Process;
        } else {
          rb.member.kind = PartKind::Role;
          externals.insert(rb.member.name);
        }
        if (!members.insert(rb.member.name).second)
          error("E004",
                "member '" + rb.member.name + "' bound twice in session '" +
                    sd.session.name + "'",
                rb.member.span);
        if (!proto_roles.count(rb.role.name))
          error("E004",
                "protocol '" + sd.protocol.name + "' has no role '" + rb.role.name + "'",
                rb.role.span);
        else if (!bound_roles.insert(rb.role.name).second)
          error("E004",
                "role '" + rb.role.name + "' bound twice in session '" + sd.session.name +
                    "'",
                rb.role.span);
      }
      for (const auto& r : proto_roles) {
        if (!bound_roles.count(r))
          error("E004",
                "session '" + sd.session.name + "' does not bind role '" + r +
                    "' of protocol '" + sd.protocol.name + "'",
                sd.span);
      }
    }

    resolve_body(m, proc, params, externals, proc.body);
  }

  void resolve_body(Module& m, Procedure& proc, const std::set<std::string>& params,
                    const std::set<std::string>& externals, Choreography& body) {
    for (Stmt& s : body) resolve_stmt(m, proc, params, externals, s);
  }

  // Returns false when the name is unbound.
  bool resolve_participant(const std::set<std::string>& params,
                           const std::set<std::string>& externals, Participant& p) {
    if (params.count(p.name)) {
      p.kind = PartKind::Process;
      return true;
    }
    if (externals.count(p.name)) {
      p.kind = PartKind::Role;
      return true;
    }
    error("E004", "unbound process or external reference '" + p.name + "'", p.span);
    return false;
  }

  void check_session_name(const Procedure& proc, const SessionId& k) {
    if (!proc.session(k.name))
      error("E004", "unknown session '" + k.name + "'", k.span);
  }

  void resolve_stmt(Module& m, Procedure& proc, const std::set<std::string>& params,
                    const std::set<std::string>& externals, Stmt& s) {
    if (ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
      bool ok = resolve_participant(params, externals, vc->sender);
      ok &= resolve_participant(params, externals, vc->receiver);
      if (!ok) return;
      if (vc->sender.name == vc->receiver.name) {
        error("E004", "sender equals receiver ('" + vc->sender.name + "')", s.span);
        return;
      }
      if (vc->sender.is_role() && vc->receiver.is_role()) {
        error("E004", "a communication between two external references belongs to neither module",
              s.span);
        return;
      }
      if (vc->sender.is_process() && !vc->expr)
        error("E004",
              "sender '" + vc->sender.name + "' is a process and must supply an expression",
              vc->sender.span);
      if (vc->sender.is_role() && vc->expr)
        error("E004",
              "external sender '" + vc->sender.name + "' cannot supply an expression",
              vc->sender.span);
      if (vc->receiver.is_process() && !vc->var)
        error("E004",
              "receiver '" + vc->receiver.name + "' is a process and must bind a variable",
              vc->receiver.span);
      if (vc->receiver.is_role() && vc->var)
        error("E004",
              "external receiver '" + vc->receiver.name + "' cannot bind a variable",
              vc->receiver.span);
      check_session_name(proc, vc->session);
    } else if (Selection* sel = std::get_if<Selection>(&s.node)) {
      bool ok = resolve_participant(params, externals, sel->sender);
      ok &= resolve_participant(params, externals, sel->receiver);
      if (!ok) return;
      if (sel->sender.name == sel->receiver.name) {
        error("E004", "sender equals receiver ('" + sel->sender.name + "')", s.span);
        return;
      }
      if (sel->sender.is_role() && sel->receiver.is_role()) {
        error("E004", "a communication between two external references belongs to neither module",
              s.span);
        return;
      }
      check_session_name(proc, sel->session);
    } else if (Cond* c = std::get_if<Cond>(&s.node)) {
      if (!params.count(c->at.name))
        error("E004", "conditional must be decided by a process parameter, '" + c->at.name +
                          "' is not one",
              c->at.span);
      resolve_body(m, proc, params, externals, c->then_branch);
      resolve_body(m, proc, params, externals, c->else_branch);
    } else if (LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
      if (!params.count(a->at.name))
        error("E004",
              "assignment must happen at a process parameter, '" + a->at.name + "' is not one",
              a->at.span);
    } else if (CallStmt* call = std::get_if<CallStmt>(&s.node)) {
      const Procedure* callee = m.procedure(call->proc.name);
      if (!callee) {
        error("E004", "unknown procedure '" + call->proc.name + "'", call->proc.span);
        return;
      }
      if (callee->params.size() != call->process_args.size()) {
        error("E004",
              "procedure '" + call->proc.name + "' expects " +
                  std::to_string(callee->params.size()) + " process argument(s), got " +
                  std::to_string(call->process_args.size()),
              call->proc.span);
        return;
      }
      std::set<std::string> seen;
      for (const auto& arg : call->process_args) {
        if (!params.count(arg.name))
          error("E004", "call argument '" + arg.name + "' is not a process parameter",
                arg.span);
        if (!seen.insert(arg.name).second)
          error("E004", "process '" + arg.name + "' passed twice to '" + call->proc.name + "'",
                arg.span);
      }
      // Sessions used by the callee are picked up from the caller's scope by
      // name; the signature records them in the callee's declaration order.
      call->session_args.clear();
      for (const auto& sd : callee->sessions) {
        if (!proc.session(sd.session.name))
          error("E004",
                "call to '" + call->proc.name + "' needs session '" + sd.session.name +
                    "', which is not in scope here",
                call->proc.span);
        call->session_args.push_back(sd.session);
      }
    }
  }
};

}  // namespace detail

/// Parses and resolves a module. On failure at least one error diagnostic is
/// appended; the returned module is whatever was recovered and should only be
/// used when no errors were reported.
inline Module parse_module(const SourceFile& src, std::vector<Diagnostic>& diags) {
  Module m = detail::Parser(src, diags).run();
  sort_diagnostics(diags);
  return m;
}

inline ExprPtr parse_expression(const std::string& text, std::vector<Diagnostic>& diags) {
  SourceFile src{"<expr>", text};
  detail::Parser p(src, diags);
  try {
    return p.parse_expr();
  } catch (detail::ParseAbort&) {
    return lit(Value{Unit{}});
  }
}

}  // namespace chor
