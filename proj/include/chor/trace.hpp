#pragma once

#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "chor/ast.hpp"

namespace chor {

/// One completed communication: `session sender->receiver op(value)`.
struct Event {
  std::string session;
  std::string sender;
  std::string receiver;
  std::string op;
  Value value = Unit{};

  friend bool operator==(const Event& a, const Event& b) {
    return a.session == b.session && a.sender == b.sender && a.receiver == b.receiver &&
           a.op == b.op && a.value == b.value;
  }
  friend bool operator!=(const Event& a, const Event& b) { return !(a == b); }
  friend bool operator<(const Event& a, const Event& b) {
    return std::tie(a.session, a.sender, a.receiver, a.op, a.value) <
           std::tie(b.session, b.sender, b.receiver, b.op, b.value);
  }
};

using Trace = std::vector<Event>;
using TraceSet = std::set<Trace>;

inline std::string render_event(const Event& e) {
  return e.session + " " + e.sender + "->" + e.receiver + " " + e.op + "(" +
         render_value(e.value) + ")";
}

inline std::string render_trace(const Trace& t, const char* sep = "\n") {
  std::string out;
  for (size_t i = 0; i < t.size(); ++i) {
    if (i) out += sep;
    out += render_event(t[i]);
  }
  return out;
}

/// The events of `t` in which `process` takes part, in trace order.
inline Trace project_trace(const Trace& t, const std::string& process) {
  Trace out;
  for (const Event& e : t)
    if (e.sender == process || e.receiver == process) out.push_back(e);
  return out;
}

}  // namespace chor
