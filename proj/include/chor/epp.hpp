#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/printer.hpp"

namespace chor {

struct MergeFailure : std::runtime_error {
  explicit MergeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct LinkError : std::runtime_error {
  explicit LinkError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Per-session bookkeeping of a projected module: which process implements
/// each protocol role. An unset owner is a reference to an external process,
/// to be supplied by `link`.
struct SessionInfo {
  std::string protocol_name;
  std::map<std::string, std::optional<std::string>> role_owner;

  std::optional<std::string> owner(const std::string& role) const {
    auto it = role_owner.find(role);
    return it == role_owner.end() ? std::nullopt : it->second;
  }
};

struct ProjectedSystem {
  std::map<std::string, EpPtr> endpoints;
  std::map<std::string, EpPtr> procedures;  // "<procedure>.<formal>"
  std::map<std::string, SessionInfo> sessions;
  std::map<std::string, GlobalTypePtr> protocols;

  /// Roles not yet bound to a process, per session.
  std::map<std::string, std::set<std::string>> externals() const {
    std::map<std::string, std::set<std::string>> out;
    for (const auto& [k, info] : sessions)
      for (const auto& [role, owner] : info.role_owner)
        if (!owner) out[k].insert(role);
    return out;
  }

  bool closed() const { return externals().empty(); }
};

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

namespace detail {

inline bool ep_mentions_var(const EpPtr& p, const std::string& name) {
  if (!p) return false;
  auto expr_mentions = [&](const ExprPtr& e) {
    if (!e) return false;
    std::set<std::string> vs;
    free_vars(*e, vs);
    return vs.count(name) > 0;
  };
  if (const EpSend* s = std::get_if<EpSend>(&p->node))
    return expr_mentions(s->payload) || ep_mentions_var(s->cont, name);
  if (const EpRecv* r = std::get_if<EpRecv>(&p->node)) {
    for (const auto& [label, br] : r->branches) {
      if (br.var && br.var->name == name) return true;
      if (ep_mentions_var(br.cont, name)) return true;
    }
    return false;
  }
  if (const EpCond* c = std::get_if<EpCond>(&p->node))
    return expr_mentions(c->guard) || ep_mentions_var(c->then_branch, name) ||
           ep_mentions_var(c->else_branch, name);
  if (const EpAssign* a = std::get_if<EpAssign>(&p->node))
    return a->var.name == name || expr_mentions(a->expr) || ep_mentions_var(a->cont, name);
  if (const EpCall* call = std::get_if<EpCall>(&p->node))
    return ep_mentions_var(call->cont, name);
  return false;
}

inline ExprPtr expr_rename_var(const ExprPtr& e, const std::string& from,
                               const std::string& to) {
  if (!e) return e;
  if (const VarRef* r = std::get_if<VarRef>(&e->node))
    return r->name == from ? make_expr(VarRef{to}, e->span) : e;
  if (const UnaryExpr* u = std::get_if<UnaryExpr>(&e->node))
    return make_expr(UnaryExpr{u->op, expr_rename_var(u->operand, from, to)}, e->span);
  if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e->node))
    return make_expr(BinaryExpr{b->op, expr_rename_var(b->lhs, from, to),
                                expr_rename_var(b->rhs, from, to)},
                     e->span);
  if (const BuiltinCall* c = std::get_if<BuiltinCall>(&e->node)) {
    BuiltinCall out{c->name, {}};
    for (const auto& a : c->args) out.args.push_back(expr_rename_var(a, from, to));
    return make_expr(std::move(out), e->span);
  }
  return e;
}

// Store variables are process-wide, so a rename applies to every occurrence:
// reads, assignment targets and receive binders alike.
inline EpPtr ep_rename_var(const EpPtr& p, const std::string& from, const std::string& to) {
  if (!p || from == to) return p;
  if (const EpSend* s = std::get_if<EpSend>(&p->node))
    return make_ep(EpSend{s->session, s->to, s->op, expr_rename_var(s->payload, from, to),
                          ep_rename_var(s->cont, from, to)});
  if (const EpRecv* r = std::get_if<EpRecv>(&p->node)) {
    EpRecv out{r->session, r->from, {}};
    for (const auto& [label, br] : r->branches) {
      EpRecvBranch nb;
      nb.var = br.var && br.var->name == from ? std::optional<VarName>(VarName{to}) : br.var;
      nb.cont = ep_rename_var(br.cont, from, to);
      out.branches[label] = std::move(nb);
    }
    return make_ep(std::move(out));
  }
  if (const EpCond* c = std::get_if<EpCond>(&p->node))
    return make_ep(EpCond{expr_rename_var(c->guard, from, to),
                          ep_rename_var(c->then_branch, from, to),
                          ep_rename_var(c->else_branch, from, to)});
  if (const EpAssign* a = std::get_if<EpAssign>(&p->node))
    return make_ep(EpAssign{a->var.name == from ? VarName{to} : a->var,
                            expr_rename_var(a->expr, from, to),
                            ep_rename_var(a->cont, from, to)});
  if (const EpCall* call = std::get_if<EpCall>(&p->node))
    return make_ep(EpCall{call->target, call->session_args,
                          ep_rename_var(call->cont, from, to)});
  return p;
}

inline const char* ep_kind_name(const EpPtr& p) {
  if (!p) return "end";
  if (std::holds_alternative<EpSend>(p->node)) return "send";
  if (std::holds_alternative<EpRecv>(p->node)) return "receive";
  if (std::holds_alternative<EpCond>(p->node)) return "conditional";
  if (std::holds_alternative<EpAssign>(p->node)) return "assignment";
  if (std::holds_alternative<EpCall>(p->node)) return "call";
  return "end";
}

}  // namespace detail

/// Outcome of a merge attempt; `failure` explains the divergence when
/// `program` is null.
struct MergeResult {
  EpPtr program;
  std::string failure;

  bool ok() const { return program != nullptr; }
  static MergeResult fail(std::string why) { return MergeResult{nullptr, std::move(why)}; }
};

/// Combines the behaviours a process shows in the two branches of a
/// conditional it does not decide. Offers are unioned; everything else must
/// coincide. Receive binders are reconciled by renaming when safe.
inline MergeResult merge(const EpPtr& a, const EpPtr& b) {
  if (equal_endpoints(a, b)) return MergeResult{a ? a : ep_end(), {}};
  if (!a || !b || a->node.index() != b->node.index())
    return MergeResult::fail(std::string("branches act differently: ") +
                             detail::ep_kind_name(a) + " vs " + detail::ep_kind_name(b));
  if (const EpSend* s = std::get_if<EpSend>(&a->node)) {
    const auto& t = std::get<EpSend>(b->node);
    if (s->session != t.session || s->to != t.to || s->op != t.op ||
        !equal_expr_ptrs(s->payload, t.payload))
      return MergeResult::fail("branches send different messages on session '" +
                               s->session.name + "'");
    MergeResult cont = merge(s->cont, t.cont);
    if (!cont.ok()) return cont;
    return MergeResult{make_ep(EpSend{s->session, s->to, s->op, s->payload, cont.program}),
                       {}};
  }
  if (const EpRecv* r = std::get_if<EpRecv>(&a->node)) {
    const auto& q = std::get<EpRecv>(b->node);
    if (r->session != q.session || r->from != q.from)
      return MergeResult::fail("branches receive from different peers");
    EpRecv out{r->session, r->from, r->branches};
    for (const auto& [label, bbr] : q.branches) {
      auto it = out.branches.find(label);
      if (it == out.branches.end()) {
        out.branches[label] = bbr;
        continue;
      }
      EpRecvBranch& abr = it->second;
      if (abr.var.has_value() != bbr.var.has_value())
        return MergeResult::fail("offer '" + label +
                                 "' binds a variable in one branch but not the other");
      EpPtr bcont = bbr.cont;
      if (abr.var && bbr.var && abr.var->name != bbr.var->name) {
        if (detail::ep_mentions_var(bbr.cont, abr.var->name))
          return MergeResult::fail("offer '" + label + "' cannot rename variable '" +
                                   bbr.var->name + "' to '" + abr.var->name +
                                   "' without a clash");
        bcont = detail::ep_rename_var(bbr.cont, bbr.var->name, abr.var->name);
      }
      MergeResult cont = merge(abr.cont, bcont);
      if (!cont.ok())
        return MergeResult::fail("offer '" + label + "': " + cont.failure);
      abr.cont = cont.program;
    }
    return MergeResult{make_ep(std::move(out)), {}};
  }
  if (const EpCond* c = std::get_if<EpCond>(&a->node)) {
    const auto& d = std::get<EpCond>(b->node);
    if (!equal_expr_ptrs(c->guard, d.guard))
      return MergeResult::fail("branches test different conditions");
    MergeResult tb = merge(c->then_branch, d.then_branch);
    if (!tb.ok()) return tb;
    MergeResult eb = merge(c->else_branch, d.else_branch);
    if (!eb.ok()) return eb;
    return MergeResult{make_ep(EpCond{c->guard, tb.program, eb.program}), {}};
  }
  if (const EpAssign* x = std::get_if<EpAssign>(&a->node)) {
    const auto& y = std::get<EpAssign>(b->node);
    if (x->var != y.var || !equal_expr_ptrs(x->expr, y.expr))
      return MergeResult::fail("branches assign differently to '" + x->var.name + "'");
    MergeResult cont = merge(x->cont, y.cont);
    if (!cont.ok()) return cont;
    return MergeResult{make_ep(EpAssign{x->var, x->expr, cont.program}), {}};
  }
  if (const EpCall* x = std::get_if<EpCall>(&a->node)) {
    const auto& y = std::get<EpCall>(b->node);
    if (x->target != y.target || x->session_args != y.session_args)
      return MergeResult::fail("branches call different procedures");
    MergeResult cont = merge(x->cont, y.cont);
    if (!cont.ok()) return cont;
    return MergeResult{make_ep(EpCall{x->target, x->session_args, cont.program}), {}};
  }
  return MergeResult{ep_end(), {}};
}

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

namespace detail {

struct ProjectionOutcome {
  EpPtr program;
  std::string merge_failure;  // set when a merge conflict stopped projection
  bool context_error = false;  // role/session lookups failed (ill-formed input)

  bool ok() const { return program != nullptr; }
};

/// Projects a statement sequence onto one process. `needed` accumulates the
/// (procedure, formal) pairs whose projections the result calls into.
class Projector {
 public:
  Projector(const Module& m, const Procedure& proc,
            std::set<std::pair<std::string, std::string>>* needed)
      : module_(m), proc_(proc), needed_(needed) {}

  ProjectionOutcome project(const std::vector<const Stmt*>& stmts, size_t i,
                            const std::string& p) {
    if (i >= stmts.size()) return {ep_end(), {}, false};
    const Stmt& s = *stmts[i];
    if (const ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
      if (vc->sender.name == p) {
        auto role = proc_.role_of(vc->session.name, vc->receiver.name);
        if (!role) return context_fail();
        auto cont = project(stmts, i + 1, p);
        if (!cont.ok()) return cont;
        return wrap(EpSend{vc->session, *role, vc->op, vc->expr, cont.program});
      }
      if (vc->receiver.name == p) {
        auto role = proc_.role_of(vc->session.name, vc->sender.name);
        if (!role) return context_fail();
        auto cont = project(stmts, i + 1, p);
        if (!cont.ok()) return cont;
        EpRecv recv{vc->session, *role, {}};
        recv.branches[vc->op.name] = EpRecvBranch{vc->var, cont.program};
        return wrap(std::move(recv));
      }
      return project(stmts, i + 1, p);
    }
    if (const Selection* sel = std::get_if<Selection>(&s.node)) {
      if (sel->sender.name == p) {
        auto role = proc_.role_of(sel->session.name, sel->receiver.name);
        if (!role) return context_fail();
        auto cont = project(stmts, i + 1, p);
        if (!cont.ok()) return cont;
        return wrap(EpSend{sel->session, *role, sel->op, nullptr, cont.program});
      }
      if (sel->receiver.name == p) {
        auto role = proc_.role_of(sel->session.name, sel->sender.name);
        if (!role) return context_fail();
        auto cont = project(stmts, i + 1, p);
        if (!cont.ok()) return cont;
        EpRecv recv{sel->session, *role, {}};
        recv.branches[sel->op.name] = EpRecvBranch{std::nullopt, cont.program};
        return wrap(std::move(recv));
      }
      return project(stmts, i + 1, p);
    }
    if (const Cond* c = std::get_if<Cond>(&s.node)) {
      std::vector<const Stmt*> then_stmts = splice(c->then_branch, stmts, i + 1);
      std::vector<const Stmt*> else_stmts = splice(c->else_branch, stmts, i + 1);
      ProjectionOutcome tb = project(then_stmts, 0, p);
      if (!tb.ok()) return tb;
      ProjectionOutcome eb = project(else_stmts, 0, p);
      if (!eb.ok()) return eb;
      if (c->at.name == p) return wrap(EpCond{c->guard, tb.program, eb.program});
      MergeResult merged = merge(tb.program, eb.program);
      if (!merged.ok()) return {nullptr, merged.failure, false};
      return {merged.program, {}, false};
    }
    if (const LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
      if (a->at.name != p) return project(stmts, i + 1, p);
      auto cont = project(stmts, i + 1, p);
      if (!cont.ok()) return cont;
      return wrap(EpAssign{a->var, a->expr, cont.program});
    }
    if (const CallStmt* call = std::get_if<CallStmt>(&s.node)) {
      const Procedure* callee = module_.procedure(call->proc.name);
      if (!callee || callee->params.size() != call->process_args.size())
        return context_fail();
      std::optional<std::string> formal;
      for (size_t j = 0; j < call->process_args.size(); ++j)
        if (call->process_args[j].name == p) formal = callee->params[j].name;
      if (!formal) return project(stmts, i + 1, p);
      auto cont = project(stmts, i + 1, p);
      if (!cont.ok()) return cont;
      if (needed_) needed_->insert({call->proc.name, *formal});
      return wrap(
          EpCall{call->proc.name + "." + *formal, call->session_args, cont.program});
    }
    return project(stmts, i + 1, p);
  }

  static std::vector<const Stmt*> refs(const Choreography& body) {
    std::vector<const Stmt*> out;
    out.reserve(body.size());
    for (const Stmt& s : body) out.push_back(&s);
    return out;
  }

 private:
  const Module& module_;
  const Procedure& proc_;
  std::set<std::pair<std::string, std::string>>* needed_;

  static std::vector<const Stmt*> splice(const Choreography& branch,
                                         const std::vector<const Stmt*>& rest,
                                         size_t from) {
    std::vector<const Stmt*> out;
    out.reserve(branch.size() + rest.size() - from);
    for (const Stmt& s : branch) out.push_back(&s);
    for (size_t i = from; i < rest.size(); ++i) out.push_back(rest[i]);
    return out;
  }

  ProjectionOutcome wrap(std::variant<EpSend, EpRecv, EpCond, EpAssign, EpCall, EpEnd> n) {
    return {make_ep(std::move(n)), {}, false};
  }
  ProjectionOutcome context_fail() { return {nullptr, {}, true}; }
};

}  // namespace detail

/// Projects one procedure's body onto one process. Used directly by the
/// typechecker to validate that every bystander can reconcile conditional
/// branches; merge conflicts come back as a message instead of throwing.
inline detail::ProjectionOutcome project_body(const Module& m, const Procedure& proc,
                                              const Choreography& body,
                                              const std::string& process,
                                              std::set<std::pair<std::string, std::string>>*
                                                  needed = nullptr) {
  detail::Projector pr(m, proc, needed);
  return pr.project(detail::Projector::refs(body), 0, process);
}

/// Endpoint projection of a checked procedure: one endpoint program per
/// process parameter plus the projections of every procedure it calls.
/// Merge conflicts indicate the module was not checked and throw.
inline ProjectedSystem project(const Module& m, const std::string& proc_name) {
  const Procedure* proc = m.procedure(proc_name);
  if (!proc) throw LinkError("no procedure named '" + proc_name + "'");

  ProjectedSystem sys;
  sys.protocols = m.protocols;
  for (const auto& sd : proc->sessions) {
    SessionInfo info;
    info.protocol_name = sd.protocol.name;
    for (const auto& rb : sd.roles)
      info.role_owner[rb.role.name] =
          rb.member.is_process() ? std::optional<std::string>(rb.member.name) : std::nullopt;
    sys.sessions[sd.session.name] = std::move(info);
  }

  std::set<std::pair<std::string, std::string>> needed;
  for (const auto& p : proc->params) {
    auto out = project_body(m, *proc, proc->body, p.name, &needed);
    if (!out.ok())
      throw MergeFailure("projection of '" + proc_name + "' at '" + p.name +
                         "' failed: " + (out.merge_failure.empty() ? "ill-formed input"
                                                                   : out.merge_failure));
    sys.endpoints[p.name] = out.program;
  }

  std::set<std::pair<std::string, std::string>> done;
  while (!needed.empty()) {
    auto item = *needed.begin();
    needed.erase(needed.begin());
    if (!done.insert(item).second) continue;
    const Procedure* callee = m.procedure(item.first);
    if (!callee) throw LinkError("no procedure named '" + item.first + "'");
    auto out = project_body(m, *callee, callee->body, item.second, &needed);
    if (!out.ok())
      throw MergeFailure("projection of '" + item.first + "' at '" + item.second +
                         "' failed: " + (out.merge_failure.empty() ? "ill-formed input"
                                                                   : out.merge_failure));
    sys.procedures[item.first + "." + item.second] = out.program;
  }
  return sys;
}

// ---------------------------------------------------------------------------
// Linking
// ---------------------------------------------------------------------------

/// Composes two separately projected modules. For every session both sides
/// declare, each role must be implemented by exactly one side; the other
/// side's references to it are thereby resolved.
inline ProjectedSystem link(const ProjectedSystem& a, const ProjectedSystem& b) {
  ProjectedSystem out = a;

  for (const auto& [name, g] : b.protocols) {
    auto it = out.protocols.find(name);
    if (it == out.protocols.end())
      out.protocols[name] = g;
    else if (!equal_global_types(it->second, g))
      throw LinkError("protocol '" + name + "' differs between the two modules");
  }
  for (const auto& [p, prog] : b.endpoints) {
    if (out.endpoints.count(p))
      throw LinkError("process '" + p + "' is implemented by both modules");
    out.endpoints[p] = prog;
  }
  for (const auto& [name, prog] : b.procedures) {
    auto it = out.procedures.find(name);
    if (it == out.procedures.end())
      out.procedures[name] = prog;
    else if (!equal_endpoints(it->second, prog))
      throw LinkError("endpoint procedure '" + name + "' differs between the two modules");
  }
  for (const auto& [k, binfo] : b.sessions) {
    auto it = out.sessions.find(k);
    if (it == out.sessions.end()) {
      out.sessions[k] = binfo;
      continue;
    }
    SessionInfo& merged = it->second;
    if (merged.protocol_name != binfo.protocol_name)
      throw LinkError("session '" + k + "' is typed by protocol '" + merged.protocol_name +
                      "' on one side and '" + binfo.protocol_name + "' on the other");
    for (const auto& [role, bowner] : binfo.role_owner) {
      auto rit = merged.role_owner.find(role);
      if (rit == merged.role_owner.end()) {
        merged.role_owner[role] = bowner;
        continue;
      }
      if (rit->second && bowner)
        throw LinkError("role '" + role + "' of session '" + k +
                        "' is implemented by both modules ('" + *rit->second + "' and '" +
                        *bowner + "')");
      if (!rit->second && !bowner)
        throw LinkError("role '" + role + "' of session '" + k +
                        "' is unresolved on both sides");
      if (bowner) rit->second = bowner;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Textual endpoint programs
// ---------------------------------------------------------------------------

namespace detail {

inline void render_ep(const EpPtr& p, int depth, std::string& out) {
  indent(depth, out);
  if (!p || std::holds_alternative<EpEnd>(p->node)) {
    out += "end\n";
    return;
  }
  if (const EpSend* s = std::get_if<EpSend>(&p->node)) {
    out += "send[" + s->session.name + "] " + s->to.name + " " + s->op.name + "(";
    if (s->payload) print_expr(*s->payload, 1, out);
    out += ");\n";
    render_ep(s->cont, depth, out);
    return;
  }
  if (const EpRecv* r = std::get_if<EpRecv>(&p->node)) {
    out += "recv[" + r->session.name + "] " + r->from.name + " {\n";
    size_t i = 0;
    for (const auto& [label, br] : r->branches) {
      indent(depth + 1, out);
      out += label + "(" + (br.var ? br.var->name : "") + ") ->\n";
      std::string body;
      render_ep(br.cont, depth + 2, body);
      if (++i < r->branches.size() && !body.empty()) body.insert(body.size() - 1, ",");
      out += body;
    }
    indent(depth, out);
    out += "}\n";
    return;
  }
  if (const EpCond* c = std::get_if<EpCond>(&p->node)) {
    out += "if (";
    print_expr(*c->guard, 1, out);
    out += ") {\n";
    render_ep(c->then_branch, depth + 1, out);
    indent(depth, out);
    out += "} else {\n";
    render_ep(c->else_branch, depth + 1, out);
    indent(depth, out);
    out += "}\n";
    return;
  }
  if (const EpAssign* a = std::get_if<EpAssign>(&p->node)) {
    out += a->var.name + " = ";
    print_expr(*a->expr, 1, out);
    out += ";\n";
    render_ep(a->cont, depth, out);
    return;
  }
  const auto& call = std::get<EpCall>(p->node);
  out += "call " + call.target + "(";
  for (size_t i = 0; i < call.session_args.size(); ++i) {
    if (i) out += ", ";
    out += call.session_args[i].name;
  }
  out += ");\n";
  render_ep(call.cont, depth, out);
}

inline void collect_call_targets(const EpPtr& p, std::set<std::string>& out) {
  if (!p) return;
  if (const EpSend* s = std::get_if<EpSend>(&p->node)) collect_call_targets(s->cont, out);
  if (const EpRecv* r = std::get_if<EpRecv>(&p->node))
    for (const auto& [label, br] : r->branches) collect_call_targets(br.cont, out);
  if (const EpCond* c = std::get_if<EpCond>(&p->node)) {
    collect_call_targets(c->then_branch, out);
    collect_call_targets(c->else_branch, out);
  }
  if (const EpAssign* a = std::get_if<EpAssign>(&p->node)) collect_call_targets(a->cont, out);
  if (const EpCall* call = std::get_if<EpCall>(&p->node)) {
    out.insert(call->target);
    collect_call_targets(call->cont, out);
  }
}

}  // namespace detail

/// Renders one process's endpoint program, including every endpoint
/// procedure it can reach. Output is deterministic: sessions, offers and
/// procedures all appear in name order.
inline std::string render_endpoint_file(const ProjectedSystem& sys,
                                        const std::string& process,
                                        const std::string& entry) {
  std::string out;
  out += "// endpoint program for process " + process + " (entry: " + entry + ")\n";
  for (const auto& [k, info] : sys.sessions) {
    out += "// session " + k + " : " + info.protocol_name + " with";
    bool first = true;
    for (const auto& [role, owner] : info.role_owner) {
      out += first ? " " : ", ";
      first = false;
      out += role + " = " + (owner ? *owner : "?");
    }
    out += "\n";
  }
  out += "\n";

  auto it = sys.endpoints.find(process);
  EpPtr program = it == sys.endpoints.end() ? ep_end() : it->second;

  std::set<std::string> reachable;
  detail::collect_call_targets(program, reachable);
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& t : std::set<std::string>(reachable)) {
      auto pit = sys.procedures.find(t);
      if (pit == sys.procedures.end()) continue;
      size_t before = reachable.size();
      detail::collect_call_targets(pit->second, reachable);
      grew |= reachable.size() != before;
    }
  }
  for (const auto& t : reachable) {
    auto pit = sys.procedures.find(t);
    if (pit == sys.procedures.end()) continue;
    out += "proc " + t + " {\n";
    detail::render_ep(pit->second, 1, out);
    out += "}\n\n";
  }

  out += "endpoint " + process + " {\n";
  detail::render_ep(program, 1, out);
  out += "}\n";
  return out;
}

}  // namespace chor
