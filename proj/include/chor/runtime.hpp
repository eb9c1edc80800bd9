#pragma once

#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chor/epp.hpp"
#include "chor/eval.hpp"
#include "chor/scenario.hpp"
#include "chor/semantics.hpp"
#include "chor/trace.hpp"

namespace chor {

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Mode { Sync, Async };

// ---------------------------------------------------------------------------
// Network configurations
// ---------------------------------------------------------------------------

struct EndpointState {
  EpPtr program;
  std::vector<EpPtr> stack;  // continuations of entered procedure calls
  Store store;
};

/// The executable form of a closed projected system: one state machine per
/// process and, in async mode, a FIFO queue per (session, sender, receiver).
struct NetworkConfig {
  const ProjectedSystem* sys = nullptr;
  const Builtins* builtins = nullptr;
  Mode mode = Mode::Sync;
  std::map<std::string, EndpointState> endpoints;
  std::map<std::tuple<std::string, std::string, std::string>,
           std::deque<std::pair<std::string, Value>>>
      queues;
  // (label, payload) pairs allowed per session; used to sanity-check enqueues.
  std::map<std::string, std::set<std::pair<std::string, PayloadType>>> session_alphabet;
};

inline NetworkConfig make_network(const ProjectedSystem& sys, const Scenario& scenario,
                                  Mode mode) {
  auto ext = sys.externals();
  if (!ext.empty()) {
    std::string who;
    for (const auto& [k, roles] : ext)
      for (const auto& r : roles) who += (who.empty() ? "" : ", ") + (r + " of " + k);
    throw ScenarioError("system has unresolved external roles (" + who +
                        "); link it before running");
  }
  NetworkConfig net;
  net.sys = &sys;
  net.builtins = &scenario.builtins;
  net.mode = mode;
  for (const auto& [p, prog] : sys.endpoints) {
    EndpointState st;
    st.program = prog;
    auto it = scenario.stores.find(p);
    if (it != scenario.stores.end()) st.store = it->second;
    net.endpoints[p] = std::move(st);
  }
  for (const auto& [k, info] : sys.sessions) {
    auto pit = sys.protocols.find(info.protocol_name);
    if (pit != sys.protocols.end()) collect_labels(pit->second, net.session_alphabet[k]);
  }
  return net;
}

// ---------------------------------------------------------------------------
// Enabled actions
// ---------------------------------------------------------------------------

struct NetAction {
  enum class Kind { Internal, SyncComm, AsyncSend, AsyncRecv };
  Kind kind = Kind::Internal;
  std::string process;  // acting endpoint (the sender for SyncComm)
  std::string peer;     // receiver for SyncComm, sender for AsyncRecv

  friend bool operator<(const NetAction& a, const NetAction& b) {
    return std::tie(a.process, a.kind, a.peer) < std::tie(b.process, b.kind, b.peer);
  }
};

struct StuckEndpoint {
  std::string process;
  std::string waiting;
};

namespace detail {

inline const EpPtr& head_of(const EndpointState& st) { return st.program; }

inline std::optional<std::string> resolve_role(const NetworkConfig& net,
                                               const std::string& session,
                                               const std::string& role) {
  auto it = net.sys->sessions.find(session);
  if (it == net.sys->sessions.end()) return std::nullopt;
  return it->second.owner(role);
}

inline bool endpoint_done(const EndpointState& st) {
  return std::holds_alternative<EpEnd>(st.program->node) && st.stack.empty();
}

inline std::string describe_head(const NetworkConfig& net, const EndpointState& st) {
  const EpPtr& p = st.program;
  if (const EpSend* s = std::get_if<EpSend>(&p->node)) {
    auto owner = resolve_role(net, s->session.name, s->to.name);
    return "send " + s->op.name + "(" + s->session.name + ") to " +
           (owner ? *owner : ("role " + s->to.name));
  }
  if (const EpRecv* r = std::get_if<EpRecv>(&p->node)) {
    auto owner = resolve_role(net, r->session.name, r->from.name);
    std::string labels;
    for (const auto& [l, br] : r->branches) labels += (labels.empty() ? "" : "|") + l;
    return "receive {" + labels + "}(" + r->session.name + ") from " +
           (owner ? *owner : ("role " + r->from.name));
  }
  return "internal";
}

}  // namespace detail

/// Every action that may fire now, in canonical order (process name, kind,
/// peer). In sync mode a communication is one rendezvous action, enumerated
/// at the sender.
inline std::vector<NetAction> enabled_actions(const NetworkConfig& net) {
  std::vector<NetAction> out;
  for (const auto& [p, st] : net.endpoints) {
    const EpPtr& head = st.program;
    if (std::holds_alternative<EpAssign>(head->node) ||
        std::holds_alternative<EpCond>(head->node) ||
        std::holds_alternative<EpCall>(head->node)) {
      out.push_back({NetAction::Kind::Internal, p, {}});
      continue;
    }
    if (std::holds_alternative<EpEnd>(head->node)) {
      if (!st.stack.empty()) out.push_back({NetAction::Kind::Internal, p, {}});
      continue;
    }
    if (const EpSend* s = std::get_if<EpSend>(&head->node)) {
      auto q = detail::resolve_role(net, s->session.name, s->to.name);
      if (!q) continue;
      if (net.mode == Mode::Async) {
        out.push_back({NetAction::Kind::AsyncSend, p, *q});
        continue;
      }
      auto qit = net.endpoints.find(*q);
      if (qit == net.endpoints.end()) continue;
      const EpRecv* r = std::get_if<EpRecv>(&qit->second.program->node);
      if (!r || r->session != s->session) continue;
      auto sender_of_recv = detail::resolve_role(net, r->session.name, r->from.name);
      if (!sender_of_recv || *sender_of_recv != p) continue;
      if (!r->branches.count(s->op.name)) continue;
      out.push_back({NetAction::Kind::SyncComm, p, *q});
      continue;
    }
    if (const EpRecv* r = std::get_if<EpRecv>(&head->node)) {
      if (net.mode != Mode::Async) continue;  // rendezvous is driven by the sender
      auto q = detail::resolve_role(net, r->session.name, r->from.name);
      if (!q) continue;
      auto qit = net.queues.find({r->session.name, *q, p});
      if (qit == net.queues.end() || qit->second.empty()) continue;
      if (!r->branches.count(qit->second.front().first)) continue;
      out.push_back({NetAction::Kind::AsyncRecv, p, *q});
    }
  }
  return out;  // map iteration already yields canonical order
}

/// Fires one enabled action. Returns the completed communication, if any;
/// async sends complete at delivery. `local` (when given) receives the
/// acting endpoints' own view, used for cross-mode comparisons.
inline std::optional<Event> fire(NetworkConfig& net, const NetAction& a,
                                 std::map<std::string, Trace>* local = nullptr) {
  EndpointState& st = net.endpoints.at(a.process);
  const Builtins& builtins = *net.builtins;
  if (a.kind == NetAction::Kind::Internal) {
    if (const EpAssign* as = std::get_if<EpAssign>(&st.program->node)) {
      st.store[as->var.name] = eval_expr(*as->expr, st.store, builtins);
      st.program = as->cont;
      return std::nullopt;
    }
    if (const EpCond* c = std::get_if<EpCond>(&st.program->node)) {
      bool taken = value_as_bool(eval_expr(*c->guard, st.store, builtins), Span{});
      st.program = taken ? c->then_branch : c->else_branch;
      return std::nullopt;
    }
    if (const EpCall* call = std::get_if<EpCall>(&st.program->node)) {
      auto it = net.sys->procedures.find(call->target);
      if (it == net.sys->procedures.end())
        throw ScenarioError("no endpoint procedure '" + call->target + "'");
      st.stack.push_back(call->cont);
      st.program = it->second;
      return std::nullopt;
    }
    // EpEnd with pending continuation.
    st.program = st.stack.back();
    st.stack.pop_back();
    return std::nullopt;
  }
  if (a.kind == NetAction::Kind::SyncComm) {
    const EpSend& s = std::get<EpSend>(st.program->node);
    EndpointState& peer = net.endpoints.at(a.peer);
    const EpRecv& r = std::get<EpRecv>(peer.program->node);
    Value v = s.payload ? eval_expr(*s.payload, st.store, builtins) : Value{Unit{}};
    const EpRecvBranch& br = r.branches.at(s.op.name);
    if (br.var) peer.store[br.var->name] = v;
    Event ev{s.session.name, a.process, a.peer, s.op.name, v};
    st.program = s.cont;
    peer.program = br.cont;
    if (local) {
      (*local)[a.process].push_back(ev);
      (*local)[a.peer].push_back(ev);
    }
    return ev;
  }
  if (a.kind == NetAction::Kind::AsyncSend) {
    const EpSend& s = std::get<EpSend>(st.program->node);
    Value v = s.payload ? eval_expr(*s.payload, st.store, builtins) : Value{Unit{}};
    auto alph = net.session_alphabet.find(s.session.name);
    if (alph != net.session_alphabet.end() &&
        !alph->second.count({s.op.name, type_of_value(v)}))
      throw ScenarioError("message " + s.op.name + "(" +
                          payload_name(type_of_value(v)) + ") does not belong to session '" +
                          s.session.name + "'");
    net.queues[{s.session.name, a.process, a.peer}].emplace_back(s.op.name, v);
    if (local) (*local)[a.process].push_back(
        Event{s.session.name, a.process, a.peer, s.op.name, v});
    st.program = s.cont;
    return std::nullopt;
  }
  // AsyncRecv
  const EpRecv& r = std::get<EpRecv>(st.program->node);
  auto& queue = net.queues.at({r.session.name, a.peer, a.process});
  auto [op, v] = queue.front();
  queue.pop_front();
  const EpRecvBranch& br = r.branches.at(op);
  if (br.var) st.store[br.var->name] = v;
  Event ev{r.session.name, a.peer, a.process, op, v};
  st.program = br.cont;  // releases the node `r` points into
  if (local) (*local)[a.process].push_back(ev);
  return ev;
}

inline bool network_terminated(const NetworkConfig& net) {
  for (const auto& [p, st] : net.endpoints)
    if (!detail::endpoint_done(st)) return false;
  for (const auto& [key, q] : net.queues)
    if (!q.empty()) return false;
  return true;
}

inline std::vector<StuckEndpoint> stuck_endpoints(const NetworkConfig& net) {
  std::vector<StuckEndpoint> out;
  for (const auto& [p, st] : net.endpoints)
    if (!detail::endpoint_done(st)) out.push_back({p, detail::describe_head(net, st)});
  return out;
}

// ---------------------------------------------------------------------------
// Seeded execution
// ---------------------------------------------------------------------------

enum class RunOutcome { Terminated, Deadlock, BoundExceeded };

struct RunResult {
  RunOutcome outcome = RunOutcome::Terminated;
  Trace trace;
  std::vector<StuckEndpoint> stuck;
  std::map<std::string, Trace> per_process;  // each endpoint's local view
};

/// Executes the system with a uniformly random scheduler. The result is a
/// pure function of (system, scenario, mode, seed, bound).
inline RunResult run(const ProjectedSystem& sys, const Scenario& scenario, Mode mode,
                     std::uint64_t seed, int bound = 10000) {
  NetworkConfig net = make_network(sys, scenario, mode);
  std::mt19937_64 rng(seed);
  RunResult result;
  for (int steps = 0;; ++steps) {
    std::vector<NetAction> actions = enabled_actions(net);
    if (actions.empty()) {
      if (network_terminated(net)) {
        result.outcome = RunOutcome::Terminated;
      } else {
        result.outcome = RunOutcome::Deadlock;
        result.stuck = stuck_endpoints(net);
      }
      return result;
    }
    if (steps >= bound) {
      result.outcome = RunOutcome::BoundExceeded;
      return result;
    }
    const NetAction& pick = actions[rng() % actions.size()];
    if (auto ev = fire(net, pick, &result.per_process)) result.trace.push_back(*ev);
  }
}

// ---------------------------------------------------------------------------
// Exhaustive exploration
// ---------------------------------------------------------------------------

struct NetworkEnumeration {
  TraceSet traces;
  bool bound_exceeded = false;
  std::optional<Trace> deadlock_trace;
  std::vector<StuckEndpoint> deadlock_stuck;

  bool deadlock_found() const { return deadlock_trace.has_value(); }
};

namespace detail {

class NetworkExplorer {
 public:
  explicit NetworkExplorer(int bound) : bound_(bound) {}

  void explore(NetworkConfig net, Trace& trace, int depth) {
    if (result.bound_exceeded) return;
    if (depth > bound_) {
      result.bound_exceeded = true;
      return;
    }
    std::vector<NetAction> actions = enabled_actions(net);
    if (actions.empty()) {
      if (network_terminated(net)) {
        result.traces.insert(trace);
      } else if (!result.deadlock_trace) {
        result.deadlock_trace = trace;
        result.deadlock_stuck = stuck_endpoints(net);
      }
      return;
    }
    // Endpoint-internal actions touch no other endpoint and no queue; firing
    // the first one in place explores the same trace set.
    for (const NetAction& a : actions) {
      if (a.kind == NetAction::Kind::Internal) {
        fire(net, a);
        explore(std::move(net), trace, depth + 1);
        return;
      }
    }
    for (const NetAction& a : actions) {
      NetworkConfig next = net;
      std::optional<Event> ev = fire(next, a);
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

  NetworkEnumeration result;

 private:
  int bound_;
};

}  // namespace detail

/// DFS over every scheduler choice, collecting all maximal completed traces
/// and flagging any reachable deadlock.
inline NetworkEnumeration enumerate_network_traces(const ProjectedSystem& sys,
                                                   const Scenario& scenario, Mode mode,
                                                   int bound = 10000) {
  detail::NetworkExplorer explorer(bound);
  Trace trace;
  explorer.explore(make_network(sys, scenario, mode), trace, 0);
  return std::move(explorer.result);
}

// ---------------------------------------------------------------------------
// Choreography/network correspondence
// ---------------------------------------------------------------------------

enum class EquivStatus { Equivalent, Counterexample, DeadlockFound, BoundExceeded };

struct EquivResult {
  EquivStatus status = EquivStatus::Equivalent;
  size_t trace_count = 0;
  Trace witness;
  std::string witness_side;  // "choreography" or "network"
  std::vector<StuckEndpoint> stuck;
};

inline ChorConfig make_chor_config(const Module& m, const Procedure& proc,
                                   const Scenario& scenario) {
  ChorConfig config;
  config.remaining = proc.body;
  config.stores = scenario.stores;
  config.module = &m;
  config.builtins = &scenario.builtins;
  return config;
}

/// Set comparison between choreography traces and network traces.
inline EquivResult compare_trace_sets(const TraceEnumeration& chor_side,
                                      const NetworkEnumeration& net_side) {
  EquivResult out;
  if (chor_side.bound_exceeded || net_side.bound_exceeded) {
    out.status = EquivStatus::BoundExceeded;
    return out;
  }
  if (net_side.deadlock_found()) {
    out.status = EquivStatus::DeadlockFound;
    out.witness = *net_side.deadlock_trace;
    out.witness_side = "network";
    out.stuck = net_side.deadlock_stuck;
    return out;
  }
  if (chor_side.traces == net_side.traces) {
    out.status = EquivStatus::Equivalent;
    out.trace_count = chor_side.traces.size();
    return out;
  }
  out.status = EquivStatus::Counterexample;
  for (const Trace& t : chor_side.traces) {
    if (!net_side.traces.count(t)) {
      out.witness = t;
      out.witness_side = "choreography";
      return out;
    }
  }
  for (const Trace& t : net_side.traces) {
    if (!chor_side.traces.count(t)) {
      out.witness = t;
      out.witness_side = "network";
      return out;
    }
  }
  return out;
}

/// The pipeline's correctness statement, mechanized: the projected system's
/// trace set must equal the choreography's.
inline EquivResult check_equivalence(const Module& m, const std::string& proc_name,
                                     const Scenario& scenario, Mode mode,
                                     int bound = 10000) {
  const Procedure* proc = m.procedure(proc_name);
  if (!proc) throw ScenarioError("no procedure named '" + proc_name + "'");
  TraceEnumeration chor_side =
      enumerate_traces(make_chor_config(m, *proc, scenario), bound);
  NetworkEnumeration net_side =
      enumerate_network_traces(project(m, proc_name), scenario, mode, bound);
  return compare_trace_sets(chor_side, net_side);
}

}  // namespace chor
