#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/epp.hpp"
#include "chor/eval.hpp"
#include "chor/source.hpp"

namespace chor {

// Error codes:
//   E101 role mismatch / interaction not available
//   E102 label not offered by the protocol at this point
//   E103 payload or expression type mismatch
//   E104 protocol not fully consumed (or consumed too early for a call)
//   E105 knowledge-of-choice violation (incl. unprojectable protocols)
//   E106 unbound variable / unknown builtin
//   E107 guard is not a bool

struct UnprojectableProtocol : std::runtime_error {
  explicit UnprojectableProtocol(const std::string& msg) : std::runtime_error(msg) {}
};

// ---------------------------------------------------------------------------
// Local type merging
// ---------------------------------------------------------------------------

namespace detail {

/// Merge seen by a process that does not know which branch was taken:
/// offers widen, everything else must agree.
inline LocalTypePtr merge_local_external(const LocalTypePtr& a, const LocalTypePtr& b,
                                         std::string& why) {
  if (equal_local_types(a, b)) return a ? a : local_end();
  if (!a || !b || a->kind != b->kind) {
    why = "behaviours diverge";
    return nullptr;
  }
  if (a->peer != b->peer) {
    why = "different peers '" + a->peer.name + "' and '" + b->peer.name + "'";
    return nullptr;
  }
  if (a->kind == LocalKind::Recv) {
    auto branches = a->branches;
    for (const auto& [label, bbr] : b->branches) {
      auto it = branches.find(label);
      if (it == branches.end()) {
        branches[label] = bbr;
        continue;
      }
      if (it->second.payload != bbr.payload) {
        why = "offer '" + label + "' carries different payloads";
        return nullptr;
      }
      LocalTypePtr cont = merge_local_external(it->second.cont, bbr.cont, why);
      if (!cont) return nullptr;
      it->second.cont = cont;
    }
    return make_local(LocalKind::Recv, a->peer, std::move(branches));
  }
  // Sends must select the same label set with mergeable continuations.
  if (a->branches.size() != b->branches.size()) {
    why = "selects different labels";
    return nullptr;
  }
  std::map<std::string, LocalBranch> branches;
  auto it = a->branches.begin();
  auto jt = b->branches.begin();
  for (; it != a->branches.end(); ++it, ++jt) {
    if (it->first != jt->first || it->second.payload != jt->second.payload) {
      why = "selects different labels";
      return nullptr;
    }
    LocalTypePtr cont = merge_local_external(it->second.cont, jt->second.cont, why);
    if (!cont) return nullptr;
    branches[it->first] = LocalBranch{it->second.payload, cont};
  }
  return make_local(LocalKind::Send, a->peer, std::move(branches));
}

/// Merge seen by the decider itself: its selections form an internal choice,
/// so send labels may differ and are unioned.
inline LocalTypePtr merge_local_internal(const LocalTypePtr& a, const LocalTypePtr& b,
                                         std::string& why) {
  if (equal_local_types(a, b)) return a ? a : local_end();
  if (!a || !b || a->kind != b->kind || a->peer != b->peer) {
    why = "decider behaviours diverge";
    return nullptr;
  }
  if (a->kind == LocalKind::Send) {
    auto branches = a->branches;
    for (const auto& [label, bbr] : b->branches) {
      auto it = branches.find(label);
      if (it == branches.end()) {
        branches[label] = bbr;
        continue;
      }
      if (it->second.payload != bbr.payload) {
        why = "label '" + label + "' carries different payloads";
        return nullptr;
      }
      LocalTypePtr cont = merge_local_internal(it->second.cont, bbr.cont, why);
      if (!cont) return nullptr;
      it->second.cont = cont;
    }
    return make_local(LocalKind::Send, a->peer, std::move(branches));
  }
  if (a->branches.size() != b->branches.size()) {
    why = "decider offers differ";
    return nullptr;
  }
  std::map<std::string, LocalBranch> branches;
  auto it = a->branches.begin();
  auto jt = b->branches.begin();
  for (; it != a->branches.end(); ++it, ++jt) {
    if (it->first != jt->first || it->second.payload != jt->second.payload) {
      why = "decider offers differ";
      return nullptr;
    }
    LocalTypePtr cont = merge_local_internal(it->second.cont, jt->second.cont, why);
    if (!cont) return nullptr;
    branches[it->first] = LocalBranch{it->second.payload, cont};
  }
  return make_local(LocalKind::Recv, a->peer, std::move(branches));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Global-to-local projection
// ---------------------------------------------------------------------------

/// Projects a protocol onto one role. Non-participants of an interaction see
/// the merge of all branch projections; when that merge is undefined the
/// protocol cannot inform them of the choice and is rejected.
inline LocalTypePtr project_global(const GlobalTypePtr& g, const std::string& role) {
  if (!g || g->is_end()) return local_end();
  if (g->from.name == role) {
    std::map<std::string, LocalBranch> branches;
    for (const auto& [label, br] : g->branches)
      branches[label] = LocalBranch{br.payload, project_global(br.cont, role)};
    return make_local(LocalKind::Send, g->to, std::move(branches));
  }
  if (g->to.name == role) {
    std::map<std::string, LocalBranch> branches;
    for (const auto& [label, br] : g->branches)
      branches[label] = LocalBranch{br.payload, project_global(br.cont, role)};
    return make_local(LocalKind::Recv, g->from, std::move(branches));
  }
  LocalTypePtr merged;
  for (const auto& [label, br] : g->branches) {
    LocalTypePtr proj = project_global(br.cont, role);
    if (!merged) {
      merged = proj;
      continue;
    }
    std::string why;
    LocalTypePtr next = detail::merge_local_external(merged, proj, why);
    if (!next)
      throw UnprojectableProtocol("role '" + role + "' cannot follow the choice between '" +
                                  g->from.name + " -> " + g->to.name + "' branches: " + why);
    merged = next;
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Module checking
// ---------------------------------------------------------------------------

namespace detail {

struct ConsumeOutcome {
  bool ok = false;
  PayloadType payload = PayloadType::Unit;
  std::string code;     // E101 / E102 when !ok
  std::string message;
};

/// Removes the interaction `from -> to : label` from the residual. Earlier
/// interactions that do not touch either role may be skipped over (they stay
/// in the residual); an earlier interaction sharing a role, or an unresolved
/// choice, blocks consumption.
inline ConsumeOutcome consume_interaction(GlobalTypePtr& residual, const std::string& from,
                                          const std::string& to, const std::string& label) {
  std::vector<const GlobalType*> skipped;
  GlobalTypePtr cur = residual;
  for (;;) {
    if (!cur || cur->is_end()) {
      return {false, PayloadType::Unit, "E101",
              "the protocol provides no interaction '" + from + " -> " + to + " : " + label +
                  "' at this point"};
    }
    bool involves_from = cur->from.name == from || cur->to.name == from;
    bool involves_to = cur->from.name == to || cur->to.name == to;
    if (cur->from.name == from && cur->to.name == to) {
      auto it = cur->branches.find(label);
      if (it == cur->branches.end()) {
        std::string labels;
        for (const auto& [l, br] : cur->branches) {
          if (!labels.empty()) labels += ", ";
          labels += l;
        }
        return {false, PayloadType::Unit, "E102",
                "label '" + label + "' is not offered here; the protocol expects one of {" +
                    labels + "}"};
      }
      PayloadType payload = it->second.payload;
      GlobalTypePtr rebuilt = it->second.cont;
      for (auto rit = skipped.rbegin(); rit != skipped.rend(); ++rit) {
        const GlobalType* node = *rit;
        const auto& [l, br] = *node->branches.begin();
        std::map<std::string, GlobalBranch> one;
        one[l] = GlobalBranch{br.payload, rebuilt, br.span};
        rebuilt = make_interaction(node->from, node->to, std::move(one), node->span);
      }
      residual = rebuilt;
      return {true, payload, {}, {}};
    }
    if (involves_from || involves_to) {
      return {false, PayloadType::Unit, "E101",
              "the next interaction involving these roles is '" + cur->from.name + " -> " +
                  cur->to.name + "', not '" + from + " -> " + to + " : " + label + "'"};
    }
    if (cur->branches.size() > 1) {
      return {false, PayloadType::Unit, "E101",
              "cannot reorder past the unresolved choice at '" + cur->from.name + " -> " +
                  cur->to.name + "' to reach '" + from + " -> " + to + "'"};
    }
    skipped.push_back(cur.get());
    cur = cur->branches.begin()->second.cont;
  }
}

/// One communication or call as seen by the knowledge-of-choice rule.
struct LogEntry {
  bool is_call = false;
  std::string session;  // comms
  std::string from, to, label;
  std::string callee;  // calls
  std::vector<std::string> args;
  std::set<std::string> touched_sessions;

  bool touches(const std::string& k) const {
    return is_call ? touched_sessions.count(k) > 0 : session == k;
  }
  friend bool operator==(const LogEntry& a, const LogEntry& b) {
    return a.is_call == b.is_call && a.session == b.session && a.from == b.from &&
           a.to == b.to && a.label == b.label && a.callee == b.callee && a.args == b.args;
  }
};

using VarTypes = std::map<std::string, std::map<std::string, PayloadType>>;

struct CheckEnv {
  std::map<std::string, GlobalTypePtr> residual;
  VarTypes vars;
  std::set<std::pair<std::string, std::string>> conflicted;
};

struct ProcSummary {
  bool done = false;
  VarTypes initial_reqs;  // per formal: variables the caller must provide
  VarTypes final_vars;    // per formal: variables defined on exit
};

class Checker {
 public:
  Checker(const Module& m, const Builtins& builtins) : m_(m), builtins_(builtins) {}

  std::vector<Diagnostic> run() {
    for (const auto& [name, g] : m_.protocols) {
      std::set<std::string> roles;
      collect_roles(g, roles);
      for (const auto& r : roles) {
        try {
          project_global(g, r);
        } catch (const UnprojectableProtocol& e) {
          error("E105", "protocol '" + name + "' is not projectable: " + e.what(),
                g ? g->span : Span{});
        }
      }
    }
    for (const auto& [name, proc] : m_.procedures) check_procedure(name);
    sort_diagnostics(diags_);
    return diags_;
  }

 private:
  const Module& m_;
  const Builtins& builtins_;
  std::vector<Diagnostic> diags_;
  std::map<std::string, ProcSummary> summaries_;
  std::set<std::string> in_progress_;

  // Context of the procedure currently being walked.
  const Procedure* proc_ = nullptr;
  VarTypes* initial_reqs_ = nullptr;

  void error(const std::string& code, const std::string& msg, Span span) {
    diags_.push_back({Severity::Error, code, msg, m_.source_path, span});
  }

  const ProcSummary& check_procedure(const std::string& name) {
    ProcSummary& summary = summaries_[name];
    if (summary.done) return summary;
    if (in_progress_.count(name)) return summary;  // recursive cycle; see call rule
    in_progress_.insert(name);

    const Procedure& proc = m_.procedures.at(name);
    const Procedure* outer_proc = proc_;
    VarTypes* outer_reqs = initial_reqs_;
    proc_ = &proc;
    initial_reqs_ = &summary.initial_reqs;

    CheckEnv env;
    for (const auto& sd : proc.sessions) {
      const GlobalTypePtr* g = m_.protocol(sd.protocol.name);
      env.residual[sd.session.name] = g ? *g : global_end();
    }
    std::vector<LogEntry> log;
    walk_body(env, proc.body, log);
    for (const auto& sd : proc.sessions) {
      const GlobalTypePtr& r = env.residual[sd.session.name];
      if (r && !r->is_end())
        error("E104",
              "session '" + sd.session.name + "' is not fully consumed; remaining: " +
                  show_global_type(r),
              proc.span);
    }
    // Safety net behind the per-conditional rule: every process must admit a
    // single merged behaviour, exactly as endpoint projection will compute it.
    for (const auto& p : proc.params) {
      auto out = project_body(m_, proc, proc.body, p.name);
      if (!out.ok() && !out.merge_failure.empty())
        error("E105",
              "process '" + p.name + "' cannot reconcile the branches of a conditional: " +
                  out.merge_failure,
              proc.span);
    }
    summary.final_vars = env.vars;
    summary.done = true;

    proc_ = outer_proc;
    initial_reqs_ = outer_reqs;
    in_progress_.erase(name);
    return summary;
  }

  void walk_body(CheckEnv& env, const Choreography& body, std::vector<LogEntry>& log) {
    for (const Stmt& s : body) walk_stmt(env, s, log);
  }

  void walk_stmt(CheckEnv& env, const Stmt& s, std::vector<LogEntry>& log) {
    if (const ValueComm* vc = std::get_if<ValueComm>(&s.node))
      walk_comm(env, s.span, vc->sender, vc->receiver, vc->op, vc->session, vc->expr,
                vc->var, log);
    else if (const Selection* sel = std::get_if<Selection>(&s.node))
      walk_comm(env, s.span, sel->sender, sel->receiver, sel->op, sel->session, nullptr,
                std::nullopt, log);
    else if (const Cond* c = std::get_if<Cond>(&s.node))
      walk_cond(env, s.span, *c, log);
    else if (const LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
      std::optional<PayloadType> t = synth_expr(env, a->at.name, *a->expr, true);
      if (t) {
        env.vars[a->at.name][a->var.name] = *t;
        env.conflicted.erase({a->at.name, a->var.name});
      }
    } else if (const CallStmt* call = std::get_if<CallStmt>(&s.node)) {
      walk_call(env, s.span, *call, log);
    }
  }

  void walk_comm(CheckEnv& env, Span span, const Participant& sender,
                 const Participant& receiver, const OpName& op, const SessionId& session,
                 const ExprPtr& expr, const std::optional<VarName>& var,
                 std::vector<LogEntry>& log) {
    auto a = proc_->role_of(session.name, sender.name);
    auto b = proc_->role_of(session.name, receiver.name);
    if (!a || !b) {
      const Participant& missing = !a ? sender : receiver;
      error("E101",
            "'" + missing.name + "' is not a member of session '" + session.name + "'",
            span);
      return;
    }
    GlobalTypePtr& residual = env.residual[session.name];
    ConsumeOutcome out = consume_interaction(residual, a->name, b->name, op.name);
    if (!out.ok) {
      error(out.code, "session '" + session.name + "': " + out.message, span);
      return;
    }
    if (!expr && !var && out.payload != PayloadType::Unit) {
      // Selection against a payload-carrying label.
      error("E103",
            "operation '" + op.name + "' carries a " + payload_name(out.payload) +
                " payload; a selection sends none",
            span);
      return;
    }
    if ((expr || var) && out.payload == PayloadType::Unit) {
      error("E103",
            "operation '" + op.name + "' carries no payload; use a selection '" +
                sender.name + " -> " + receiver.name + " : " + op.name + "(" + session.name +
                ")'",
            span);
      return;
    }
    if (expr) check_expr(env, sender.name, *expr, out.payload, "E103");
    if (var) {
      env.vars[receiver.name][var->name] = out.payload;
      env.conflicted.erase({receiver.name, var->name});
    }
    LogEntry entry;
    entry.session = session.name;
    entry.from = a->name;
    entry.to = b->name;
    entry.label = op.name;
    log.push_back(std::move(entry));
  }

  void walk_cond(CheckEnv& env, Span span, const Cond& c, std::vector<LogEntry>& log) {
    check_expr(env, c.at.name, *c.guard, PayloadType::Bool, "E107");

    CheckEnv then_env = env;
    CheckEnv else_env = env;
    std::vector<LogEntry> then_log, else_log;
    walk_body(then_env, c.then_branch, then_log);
    walk_body(else_env, c.else_branch, else_log);

    // Knowledge of choice, per session: if the branches use a session
    // differently, each must open it with a communication from the decider's
    // role, and the two opening labels must differ.
    for (const auto& sd : proc_->sessions) {
      const std::string& k = sd.session.name;
      std::vector<const LogEntry*> ts = filter_log(then_log, k);
      std::vector<const LogEntry*> es = filter_log(else_log, k);
      if (equal_logs(ts, es)) continue;
      auto decider_role = proc_->role_of(k, c.at.name);
      if (!decider_role) {
        error("E105",
              "the branches use session '" + k + "' differently, but '" + c.at.name +
                  "' is not a member of it and cannot announce the choice",
              span);
        continue;
      }
      if (ts.empty() || es.empty()) {
        error("E105",
              "the branches use session '" + k +
                  "' differently, but one branch performs no communication on it",
              span);
        continue;
      }
      const LogEntry* ft = ts.front();
      const LogEntry* fe = es.front();
      if (ft->is_call || fe->is_call) {
        error("E105",
              "the branches use session '" + k +
                  "' differently through procedure calls; the choice cannot be announced",
              span);
        continue;
      }
      if (ft->from != decider_role->name || fe->from != decider_role->name) {
        error("E105",
              "the branches use session '" + k +
                  "' differently, so each must begin with a message from '" + c.at.name +
                  "' (role " + decider_role->name + ") announcing the choice",
              span);
        continue;
      }
      if (ft->label == fe->label) {
        error("E105",
              "both branches open session '" + k + "' with the same label '" + ft->label +
                  "'; the receiver cannot tell the branches apart",
              span);
        continue;
      }
    }

    for (const auto& sd : proc_->sessions) {
      const std::string& k = sd.session.name;
      if (!equal_global_types(then_env.residual[k], else_env.residual[k]))
        error("E105",
              "the branches leave session '" + k + "' at different points of the protocol",
              span);
    }

    env.residual = then_env.residual;
    env.conflicted = then_env.conflicted;
    env.conflicted.insert(else_env.conflicted.begin(), else_env.conflicted.end());
    env.vars = merge_vars(then_env.vars, else_env.vars, env.conflicted);

    log.insert(log.end(), then_log.begin(), then_log.end());
  }

  static std::vector<const LogEntry*> filter_log(const std::vector<LogEntry>& log,
                                                 const std::string& k) {
    std::vector<const LogEntry*> out;
    for (const auto& e : log)
      if (e.touches(k)) out.push_back(&e);
    return out;
  }

  static bool equal_logs(const std::vector<const LogEntry*>& a,
                         const std::vector<const LogEntry*>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
      if (!(*a[i] == *b[i])) return false;
    return true;
  }

  static VarTypes merge_vars(const VarTypes& a, const VarTypes& b,
                             std::set<std::pair<std::string, std::string>>& conflicted) {
    VarTypes out;
    for (const auto& [p, vars] : a) {
      auto bit = b.find(p);
      for (const auto& [x, t] : vars) {
        if (bit != b.end()) {
          auto vit = bit->second.find(x);
          if (vit != bit->second.end()) {
            if (vit->second == t)
              out[p][x] = t;
            else
              conflicted.insert({p, x});
            continue;
          }
        }
        conflicted.insert({p, x});  // defined on one side only
      }
    }
    for (const auto& [p, vars] : b) {
      auto ait = a.find(p);
      for (const auto& [x, t] : vars) {
        if (ait == a.end() || !ait->second.count(x)) conflicted.insert({p, x});
      }
    }
    return out;
  }

  void walk_call(CheckEnv& env, Span span, const CallStmt& call,
                 std::vector<LogEntry>& log) {
    const Procedure* callee = m_.procedure(call.proc.name);
    if (!callee || callee->params.size() != call.process_args.size()) return;

    for (const auto& sd : callee->sessions) {
      const std::string& k = sd.session.name;
      const GlobalTypePtr* declared = m_.protocol(sd.protocol.name);
      auto it = env.residual.find(k);
      if (!declared || it == env.residual.end()) continue;
      if (!equal_global_types(it->second, *declared)) {
        error("E104",
              "call to '" + call.proc.name + "' needs session '" + k +
                  "' at the start of protocol '" + sd.protocol.name +
                  "', but it has already progressed",
              span);
      }
      for (size_t i = 0; i < callee->params.size(); ++i) {
        auto formal_role = callee->role_of(k, callee->params[i].name);
        auto actual_role = proc_->role_of(k, call.process_args[i].name);
        if (formal_role.has_value() != actual_role.has_value() ||
            (formal_role && formal_role->name != actual_role->name)) {
          error("E101",
                "in the call to '" + call.proc.name + "', process '" +
                    call.process_args[i].name + "' does not play the role that parameter '" +
                    callee->params[i].name + "' plays in session '" + k + "'",
                span);
        }
      }
      // A role the callee leaves external must be external here as well: the
      // call consumes the whole session, so a local process bound to that
      // role would have nothing left to enact it.
      const SessionDecl* caller_decl = proc_->session(k);
      if (caller_decl) {
        for (const auto& rb : sd.roles) {
          if (!rb.member.is_role()) continue;
          const RoleBinding* here = caller_decl->binding_of_role(rb.role.name);
          if (here && here->member.is_process()) {
            error("E101",
                  "in the call to '" + call.proc.name + "', role '" + rb.role.name +
                      "' of session '" + k + "' is external to the procedure but bound to "
                      "process '" + here->member.name + "' here; the call would leave it "
                      "with nothing to do",
                  span);
          }
        }
      }
      it->second = global_end();
    }

    // Compose the callee's store assumptions and effects with this site.
    const Procedure* self = proc_;
    VarTypes* self_reqs = initial_reqs_;
    const ProcSummary& summary = check_procedure(call.proc.name);
    proc_ = self;
    initial_reqs_ = self_reqs;
    if (!summary.done) return;  // recursive cycle: no propagation across the back edge

    std::map<std::string, std::string> formal_to_actual;
    for (size_t i = 0; i < callee->params.size(); ++i)
      formal_to_actual[callee->params[i].name] = call.process_args[i].name;

    for (const auto& [formal, vars] : summary.initial_reqs) {
      auto fit = formal_to_actual.find(formal);
      if (fit == formal_to_actual.end()) continue;
      const std::string& actual = fit->second;
      for (const auto& [x, t] : vars) {
        auto pit = env.vars.find(actual);
        if (pit != env.vars.end()) {
          auto vit = pit->second.find(x);
          if (vit != pit->second.end()) {
            if (vit->second != t)
              error("E103",
                    "call to '" + call.proc.name + "': variable '" + x + "' at '" + actual +
                        "' has type " + payload_name(vit->second) + " but the procedure needs " +
                        payload_name(t),
                    span);
            continue;
          }
        }
        require_initial(actual, x, t, span);
      }
    }
    for (const auto& [formal, vars] : summary.final_vars) {
      auto fit = formal_to_actual.find(formal);
      if (fit == formal_to_actual.end()) continue;
      for (const auto& [x, t] : vars) {
        env.vars[fit->second][x] = t;
        env.conflicted.erase({fit->second, x});
      }
    }

    LogEntry entry;
    entry.is_call = true;
    entry.callee = call.proc.name;
    for (const auto& a : call.process_args) entry.args.push_back(a.name);
    for (const auto& sd : callee->sessions) entry.touched_sessions.insert(sd.session.name);
    log.push_back(std::move(entry));
  }

  // -- expressions -----------------------------------------------------------

  void require_initial(const std::string& process, const std::string& x, PayloadType t,
                       Span span) {
    auto& reqs = (*initial_reqs_)[process];
    auto it = reqs.find(x);
    if (it == reqs.end()) {
      reqs[x] = t;
    } else if (it->second != t) {
      error("E103",
            "variable '" + x + "' at '" + process + "' was first used as " +
                payload_name(it->second) + ", here as " + payload_name(t),
            span);
    }
  }

  std::optional<PayloadType> lookup_var(CheckEnv& env, const std::string& process,
                                        const std::string& x) {
    auto pit = env.vars.find(process);
    if (pit != env.vars.end()) {
      auto vit = pit->second.find(x);
      if (vit != pit->second.end()) return vit->second;
    }
    auto rit = initial_reqs_->find(process);
    if (rit != initial_reqs_->end()) {
      auto vit = rit->second.find(x);
      if (vit != rit->second.end()) return vit->second;
    }
    return std::nullopt;
  }

  /// Checks `e` at `process` against an expected type. A variable read before
  /// any binding adopts the expected type as a required initial value.
  void check_expr(CheckEnv& env, const std::string& process, const Expr& e,
                  PayloadType expected, const char* mismatch_code) {
    if (const VarRef* r = std::get_if<VarRef>(&e.node)) {
      if (env.conflicted.count({process, r->name})) {
        error("E103",
              "variable '" + r->name + "' at '" + process +
                  "' has incompatible types across conditional branches",
              e.span);
        return;
      }
      std::optional<PayloadType> t = lookup_var(env, process, r->name);
      if (!t) {
        require_initial(process, r->name, expected, e.span);
        return;
      }
      if (*t != expected)
        error(mismatch_code,
              "expected " + std::string(payload_name(expected)) + ", but variable '" +
                  r->name + "' at '" + process + "' is " + payload_name(*t),
              e.span);
      return;
    }
    std::optional<PayloadType> t = synth_expr(env, process, e, true);
    if (t && *t != expected)
      error(mismatch_code,
            "expected " + std::string(payload_name(expected)) + ", got " + payload_name(*t),
            e.span);
  }

  /// Infers the type of `e` at `process`. When `report` is set, an
  /// un-inferable variable is an E106 error; otherwise the result is empty.
  std::optional<PayloadType> synth_expr(CheckEnv& env, const std::string& process,
                                        const Expr& e, bool report) {
    if (const Value* v = std::get_if<Value>(&e.node)) return type_of_value(*v);
    if (const VarRef* r = std::get_if<VarRef>(&e.node)) {
      if (env.conflicted.count({process, r->name})) {
        if (report)
          error("E103",
                "variable '" + r->name + "' at '" + process +
                    "' has incompatible types across conditional branches",
                e.span);
        return std::nullopt;
      }
      std::optional<PayloadType> t = lookup_var(env, process, r->name);
      if (!t && report)
        error("E106", "cannot infer the type of variable '" + r->name + "' at '" + process + "'",
              e.span);
      return t;
    }
    if (const UnaryExpr* u = std::get_if<UnaryExpr>(&e.node)) {
      check_expr(env, process, *u->operand, PayloadType::Bool, "E103");
      return PayloadType::Bool;
    }
    if (const BinaryExpr* b = std::get_if<BinaryExpr>(&e.node)) {
      switch (b->op) {
        case BinOp::Eq:
        case BinOp::Ne: {
          std::optional<PayloadType> lt = synth_expr(env, process, *b->lhs, false);
          std::optional<PayloadType> rt = synth_expr(env, process, *b->rhs, false);
          if (lt && !rt) {
            check_expr(env, process, *b->rhs, *lt, "E103");
          } else if (rt && !lt) {
            check_expr(env, process, *b->lhs, *rt, "E103");
          } else if (!lt && !rt) {
            if (report)
              error("E106", "cannot infer the types in this comparison", e.span);
          } else if (*lt != *rt) {
            error("E103",
                  "cannot compare " + std::string(payload_name(*lt)) + " with " +
                      payload_name(*rt),
                  e.span);
          }
          return PayloadType::Bool;
        }
        case BinOp::Lt:
        case BinOp::Le:
          check_expr(env, process, *b->lhs, PayloadType::Int, "E103");
          check_expr(env, process, *b->rhs, PayloadType::Int, "E103");
          return PayloadType::Bool;
        case BinOp::Add:
          check_expr(env, process, *b->lhs, PayloadType::Int, "E103");
          check_expr(env, process, *b->rhs, PayloadType::Int, "E103");
          return PayloadType::Int;
        case BinOp::Concat:
          check_expr(env, process, *b->lhs, PayloadType::String, "E103");
          check_expr(env, process, *b->rhs, PayloadType::String, "E103");
          return PayloadType::String;
        case BinOp::And:
        case BinOp::Or:
          check_expr(env, process, *b->lhs, PayloadType::Bool, "E103");
          check_expr(env, process, *b->rhs, PayloadType::Bool, "E103");
          return PayloadType::Bool;
      }
      return std::nullopt;
    }
    const auto& call = std::get<BuiltinCall>(e.node);
    const BuiltinDef* def = builtins_.find(call.name);
    if (!def) {
      error("E106", "unknown builtin '" + call.name + "'", e.span);
      return std::nullopt;
    }
    if (def->params.size() != call.args.size()) {
      error("E103",
            "builtin '" + call.name + "' expects " + std::to_string(def->params.size()) +
                " argument(s), got " + std::to_string(call.args.size()),
            e.span);
      return def->ret;
    }
    for (size_t i = 0; i < call.args.size(); ++i)
      check_expr(env, process, *call.args[i], def->params[i].second, "E103");
    return def->ret;
  }
};

}  // namespace detail

/// Typechecks every procedure of a parsed, resolved module. An empty result
/// means the module is well-typed.
inline std::vector<Diagnostic> check_module(const Module& m,
                                            const Builtins& builtins = Builtins::defaults()) {
  return detail::Checker(m, builtins).run();
}

// ---------------------------------------------------------------------------
// Local behaviour inference
// ---------------------------------------------------------------------------

namespace detail {

class LocalInference {
 public:
  explicit LocalInference(const Module& m) : m_(m) {}

  LocalTypePtr infer(const Procedure& proc, const std::string& process,
                     const std::string& session) {
    const SessionDecl* sd = proc.session(session);
    if (!sd) return local_end();
    const GlobalTypePtr* g = m_.protocol(sd->protocol.name);
    std::vector<const Stmt*> stmts = Projector::refs(proc.body);
    return walk(proc, stmts, 0, process, session, g ? *g : global_end());
  }

 private:
  const Module& m_;
  std::set<std::string> active_;  // recursion guard

  [[noreturn]] static void bad(const std::string& msg) {
    throw std::logic_error("local behaviour inference on unchecked module: " + msg);
  }

  LocalTypePtr walk(const Procedure& proc, const std::vector<const Stmt*>& stmts, size_t i,
                    const std::string& p, const std::string& k, GlobalTypePtr residual) {
    if (i >= stmts.size()) return local_end();
    const Stmt& s = *stmts[i];

    const Participant* sender = nullptr;
    const Participant* receiver = nullptr;
    const OpName* op = nullptr;
    const SessionId* session = nullptr;
    if (const ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
      sender = &vc->sender;
      receiver = &vc->receiver;
      op = &vc->op;
      session = &vc->session;
    } else if (const Selection* sel = std::get_if<Selection>(&s.node)) {
      sender = &sel->sender;
      receiver = &sel->receiver;
      op = &sel->op;
      session = &sel->session;
    }
    if (sender) {
      if (session->name != k) return walk(proc, stmts, i + 1, p, k, residual);
      auto a = proc.role_of(k, sender->name);
      auto b = proc.role_of(k, receiver->name);
      if (!a || !b) bad("role lookup failed");
      ConsumeOutcome out = consume_interaction(residual, a->name, b->name, op->name);
      if (!out.ok) bad(out.message);
      LocalTypePtr cont = walk(proc, stmts, i + 1, p, k, residual);
      if (sender->name == p) {
        std::map<std::string, LocalBranch> branches;
        branches[op->name] = LocalBranch{out.payload, cont};
        return make_local(LocalKind::Send, *b, std::move(branches));
      }
      if (receiver->name == p) {
        std::map<std::string, LocalBranch> branches;
        branches[op->name] = LocalBranch{out.payload, cont};
        return make_local(LocalKind::Recv, *a, std::move(branches));
      }
      return cont;
    }
    if (const Cond* c = std::get_if<Cond>(&s.node)) {
      std::vector<const Stmt*> then_stmts, else_stmts;
      for (const Stmt& t : c->then_branch) then_stmts.push_back(&t);
      for (size_t j = i + 1; j < stmts.size(); ++j) then_stmts.push_back(stmts[j]);
      for (const Stmt& t : c->else_branch) else_stmts.push_back(&t);
      for (size_t j = i + 1; j < stmts.size(); ++j) else_stmts.push_back(stmts[j]);
      LocalTypePtr lt = walk(proc, then_stmts, 0, p, k, residual);
      LocalTypePtr le = walk(proc, else_stmts, 0, p, k, residual);
      std::string why;
      LocalTypePtr merged = c->at.name == p ? merge_local_internal(lt, le, why)
                                            : merge_local_external(lt, le, why);
      if (!merged) bad(why);
      return merged;
    }
    if (const CallStmt* call = std::get_if<CallStmt>(&s.node)) {
      const Procedure* callee = m_.procedure(call->proc.name);
      if (callee && callee->session(k)) {
        LocalTypePtr sub = local_end();
        if (!active_.count(call->proc.name)) {
          active_.insert(call->proc.name);
          std::optional<std::string> formal;
          for (size_t j = 0; j < call->process_args.size(); ++j)
            if (call->process_args[j].name == p) formal = callee->params[j].name;
          if (formal) sub = infer(*callee, *formal, k);
          active_.erase(call->proc.name);
        }
        LocalTypePtr rest = walk(proc, stmts, i + 1, p, k, global_end());
        if (rest && !rest->is_end()) bad("session used after a consuming call");
        return sub;
      }
      return walk(proc, stmts, i + 1, p, k, residual);
    }
    return walk(proc, stmts, i + 1, p, k, residual);
  }
};

}  // namespace detail

/// The local type describing `process`'s actions on `session` as written in
/// the choreography. For checked modules it coincides with the projection of
/// the session's protocol onto the process's role.
inline LocalTypePtr infer_local_behaviour(const Module& m, const Procedure& proc,
                                          const std::string& process,
                                          const std::string& session) {
  return detail::LocalInference(m).infer(proc, process, session);
}

}  // namespace chor
