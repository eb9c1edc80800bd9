#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chor/ast.hpp"
#include "chor/eval.hpp"
#include "chor/trace.hpp"

namespace chor {

/// A running choreography: the statements still to execute plus one store per
/// process. Procedure calls are resolved against `module`.
struct ChorConfig {
  Choreography remaining;
  std::map<std::string, Store> stores;
  const Module* module = nullptr;
  const Builtins* builtins = nullptr;

  const Builtins& builtin_table() const {
    static const Builtins defaults = Builtins::defaults();
    return builtins ? *builtins : defaults;
  }
};

// ---------------------------------------------------------------------------
// Enabledness — the swapping relation realized as reachability of the head
// ---------------------------------------------------------------------------

/// A statement is enabled when no earlier statement shares a process with it,
/// i.e. it can be swapped all the way to the front. A call is special: its
/// unfolding is pure syntax and acts on no process, so it is enabled at any
/// position — while its arguments still block later statements until the call
/// is unfolded into per-statement process sets.
inline std::vector<size_t> enabled_indices(const Choreography& body) {
  std::vector<size_t> out;
  std::set<std::string> blocked;
  for (size_t i = 0; i < body.size(); ++i) {
    std::set<std::string> procs = free_processes(body[i]);
    bool free = std::holds_alternative<CallStmt>(body[i].node);
    if (!free) {
      free = true;
      for (const auto& p : procs)
        if (blocked.count(p)) {
          free = false;
          break;
        }
    }
    if (free) out.push_back(i);
    blocked.insert(procs.begin(), procs.end());
  }
  return out;
}

inline std::vector<const Stmt*> enabled_statements(const ChorConfig& c) {
  std::vector<const Stmt*> out;
  for (size_t i : enabled_indices(c.remaining)) out.push_back(&c.remaining[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Small-step execution
// ---------------------------------------------------------------------------

namespace detail {

inline void subst_processes(Choreography& body,
                            const std::map<std::string, std::string>& sub);

inline void subst_participant(Participant& p,
                              const std::map<std::string, std::string>& sub) {
  auto it = sub.find(p.name);
  if (it != sub.end()) p.name = it->second;
}

inline void subst_ident(Ident& id, const std::map<std::string, std::string>& sub) {
  auto it = sub.find(id.name);
  if (it != sub.end()) id.name = it->second;
}

inline void subst_stmt(Stmt& s, const std::map<std::string, std::string>& sub) {
  if (ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
    subst_participant(vc->sender, sub);
    subst_participant(vc->receiver, sub);
  } else if (Selection* sel = std::get_if<Selection>(&s.node)) {
    subst_participant(sel->sender, sub);
    subst_participant(sel->receiver, sub);
  } else if (Cond* c = std::get_if<Cond>(&s.node)) {
    subst_ident(c->at, sub);
    subst_processes(c->then_branch, sub);
    subst_processes(c->else_branch, sub);
  } else if (LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
    subst_ident(a->at, sub);
  } else if (CallStmt* call = std::get_if<CallStmt>(&s.node)) {
    for (Ident& arg : call->process_args) subst_ident(arg, sub);
  }
}

inline void subst_processes(Choreography& body,
                            const std::map<std::string, std::string>& sub) {
  for (Stmt& s : body) subst_stmt(s, sub);
}

}  // namespace detail

/// Executes the enabled statement at `index`. Communications return the
/// emitted event; assignments, conditionals and calls are internal.
inline std::optional<Event> step(ChorConfig& c, size_t index) {
  if (index >= c.remaining.size()) throw EvalError("no such statement");
  Stmt s = c.remaining[index];
  const Builtins& builtins = c.builtin_table();

  if (const ValueComm* vc = std::get_if<ValueComm>(&s.node)) {
    if (!vc->expr || !vc->var)
      throw EvalError("cannot execute a communication with an external reference",
                      s.span);
    Value v = eval_expr(*vc->expr, c.stores[vc->sender.name], builtins);
    c.stores[vc->receiver.name][vc->var->name] = v;
    c.remaining.erase(c.remaining.begin() + static_cast<long>(index));
    return Event{vc->session.name, vc->sender.name, vc->receiver.name, vc->op.name, v};
  }
  if (const Selection* sel = std::get_if<Selection>(&s.node)) {
    if (sel->sender.is_role() || sel->receiver.is_role())
      throw EvalError("cannot execute a communication with an external reference",
                      s.span);
    c.remaining.erase(c.remaining.begin() + static_cast<long>(index));
    return Event{sel->session.name, sel->sender.name, sel->receiver.name, sel->op.name,
                 Unit{}};
  }
  if (const Cond* cond = std::get_if<Cond>(&s.node)) {
    bool taken = value_as_bool(
        eval_expr(*cond->guard, c.stores[cond->at.name], builtins), s.span);
    const Choreography& branch = taken ? cond->then_branch : cond->else_branch;
    c.remaining.erase(c.remaining.begin() + static_cast<long>(index));
    c.remaining.insert(c.remaining.begin() + static_cast<long>(index), branch.begin(),
                       branch.end());
    return std::nullopt;
  }
  if (const LocalAssign* a = std::get_if<LocalAssign>(&s.node)) {
    c.stores[a->at.name][a->var.name] =
        eval_expr(*a->expr, c.stores[a->at.name], builtins);
    c.remaining.erase(c.remaining.begin() + static_cast<long>(index));
    return std::nullopt;
  }
  const auto& call = std::get<CallStmt>(s.node);
  if (!c.module) throw EvalError("no procedure table for call", s.span);
  const Procedure* callee = c.module->procedure(call.proc.name);
  if (!callee || callee->params.size() != call.process_args.size())
    throw EvalError("bad call to '" + call.proc.name + "'", s.span);
  Choreography body = callee->body;
  std::map<std::string, std::string> sub;
  for (size_t i = 0; i < callee->params.size(); ++i)
    sub[callee->params[i].name] = call.process_args[i].name;
  detail::subst_processes(body, sub);
  c.remaining.erase(c.remaining.begin() + static_cast<long>(index));
  c.remaining.insert(c.remaining.begin() + static_cast<long>(index), body.begin(),
                     body.end());
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Exhaustive trace enumeration
// ---------------------------------------------------------------------------

struct TraceEnumeration {
  TraceSet traces;
  bool bound_exceeded = false;
};

namespace detail {

class ChorExplorer {
 public:
  explicit ChorExplorer(int bound) : bound_(bound) {}

  void explore(ChorConfig config, Trace& trace, int depth) {
    if (result.bound_exceeded) return;
    if (depth > bound_) {
      result.bound_exceeded = true;
      return;
    }
    std::vector<size_t> enabled = enabled_indices(config.remaining);
    if (enabled.empty()) {
      result.traces.insert(trace);
      return;
    }
    // Assignments and calls are silent and commute with every other enabled
    // statement, and inlining a call can only unblock later statements; one
    // canonical position for them is enough. Conditionals splice new
    // statements that may conflict with later ones, so they stay choice points.
    for (size_t i : enabled) {
      const Stmt& s = config.remaining[i];
      if (std::holds_alternative<LocalAssign>(s.node) ||
          std::holds_alternative<CallStmt>(s.node)) {
        step(config, i);
        explore(std::move(config), trace, depth + 1);
        return;
      }
    }
    for (size_t i : enabled) {
      ChorConfig next = config;
      std::optional<Event> ev = step(next, i);
      if (ev) {
        trace.push_back(*ev);
        explore(std::move(next), trace, depth + 1);
        trace.pop_back();
      } else {
        explore(std::move(next), trace, depth + 1);
      }
      if (result.bound_exceeded) return;
    }
  }

  TraceEnumeration result;

 private:
  int bound_;
};

}  // namespace detail

/// All communication traces reachable by executing enabled statements in
/// every order. Fails with `bound_exceeded` when a path runs longer than
/// `depth_bound` steps (the recursion guard).
inline TraceEnumeration enumerate_traces(const ChorConfig& config, int depth_bound = 10000) {
  detail::ChorExplorer explorer(depth_bound);
  Trace trace;
  explorer.explore(config, trace, 0);
  return std::move(explorer.result);
}

}  // namespace chor
