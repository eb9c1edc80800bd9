#include "chor/typecheck.hpp"

#include <gtest/gtest.h>

#include "chor/printer.hpp"
#include "test_support.hpp"

using namespace chor;

namespace {

LocalTypePtr send1(const std::string& to, const std::string& label, PayloadType t,
                   LocalTypePtr cont) {
  return make_local(LocalKind::Send, Ident{to}, {{label, LocalBranch{t, cont}}});
}
LocalTypePtr recv1(const std::string& from, const std::string& label, PayloadType t,
                   LocalTypePtr cont) {
  return make_local(LocalKind::Recv, Ident{from}, {{label, LocalBranch{t, cont}}});
}

std::vector<Diagnostic> check_text(const std::string& text) {
  Module m = support::parse_ok(text);
  return check_module(m);
}

// The sample listing with one piece of its text swapped out.
std::string listing_with(const std::string& needle, const std::string& replacement) {
  std::string text = support::read_file(support::sample_path("writefs.chor"));
  size_t at = text.find(needle);
  EXPECT_NE(at, std::string::npos) << needle;
  return text.substr(0, at) + replacement + text.substr(at + needle.size());
}

}  // namespace

TEST(ProjectGlobal, StoreOntoS1) {
  Module m = support::load_sample("jfs.chor");
  LocalTypePtr got = project_global(m.protocols.at("Store"), "S1");
  // S1 receives one write from J1 and is done; J2's interaction is invisible.
  LocalTypePtr expected = recv1("J1", "write", PayloadType::String, local_end());
  EXPECT_TRUE(equal_local_types(got, expected)) << show_local_type(got);
}

TEST(ProjectGlobal, EndProjectsToEnd) {
  EXPECT_TRUE(equal_local_types(project_global(global_end(), "A"), local_end()));
}

TEST(ProjectGlobal, ListingWriteOntoJ2) {
  Module m = support::load_sample("writefs.chor");
  const GlobalTypePtr& write = m.protocols.at("Write");

  // Hand-derived: J2 is a bystander of the opening choice, so its view is the
  // merge of the two branch projections — one offer carrying both labels.
  LocalTypePtr expected = make_local(
      LocalKind::Recv, Ident{"C"},
      {{"write", LocalBranch{PayloadType::String,
                             send1("C", "ok", PayloadType::Unit, local_end())}},
       {"writeAsync", LocalBranch{PayloadType::String, local_end()}}});

  LocalTypePtr got = project_global(write, "J2");
  EXPECT_TRUE(equal_local_types(got, expected)) << show_local_type(got);

  // The independent oracle agrees.
  LocalTypePtr oracle = support::oracle_project(write, "J2");
  EXPECT_TRUE(equal_local_types(got, oracle)) << show_local_type(oracle);
}

TEST(ProjectGlobal, AgreesWithOracleOnRandomProtocols) {
  support::Rng rng(31);
  int compared = 0;
  for (int i = 0; i < 300; ++i) {
    support::GeneratedModule gen = support::gen_typed_module(rng);
    for (const auto& [name, g] : gen.module.protocols) {
      std::set<std::string> roles;
      collect_roles(g, roles);
      for (const auto& r : roles) {
        LocalTypePtr got = project_global(g, r);
        LocalTypePtr expected = support::oracle_project(g, r);
        ASSERT_TRUE(equal_local_types(got, expected))
            << show_global_type(g) << " @ " << r;
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 500);
}

TEST(ProjectGlobal, UnprojectableChoiceThrows) {
  // A and B decide; C acts differently per branch but is never told.
  std::map<std::string, GlobalBranch> branches;
  branches["l"] = GlobalBranch{
      PayloadType::Unit,
      make_interaction(Ident{"C"}, Ident{"D"},
                       {{"x", GlobalBranch{PayloadType::Unit, global_end(), {}}}}),
      {}};
  branches["r"] = GlobalBranch{
      PayloadType::Unit,
      make_interaction(Ident{"C"}, Ident{"D"},
                       {{"y", GlobalBranch{PayloadType::Unit, global_end(), {}}}}),
      {}};
  GlobalTypePtr g = make_interaction(Ident{"A"}, Ident{"B"}, std::move(branches));
  EXPECT_THROW(project_global(g, "C"), UnprojectableProtocol);
  // D merely offers {x, y}; that side projects fine.
  EXPECT_NO_THROW(project_global(g, "D"));
}

TEST(CheckModule, CorpusIsWellTyped) {
  for (const char* name : {"writefs.chor", "jfs.chor", "jfs_cli.chor", "jfs_srv.chor"}) {
    Module m = support::load_sample(name);
    std::vector<Diagnostic> diags = check_module(m);
    EXPECT_TRUE(diags.empty()) << name << ": "
                               << (diags.empty() ? "" : render_diagnostic(diags[0]));
  }
}

TEST(CheckModule, EmptyProcedureIsOk) {
  EXPECT_TRUE(check_text("define f() { }").empty());
  EXPECT_TRUE(check_text("define f(p, q) { }").empty());
}

TEST(CheckModule, MissingReplyIsE104) {
  std::string text = listing_with("j1 -> c : ok( k );", "");
  Module m = support::parse_ok(text);
  auto diags = check_module(m);
  EXPECT_TRUE(support::codes(diags).count("E104")) << pretty_print(m);
  bool mentions_k = false;
  for (const auto& d : diags)
    if (d.code == "E104" && d.message.find("'k'") != std::string::npos) mentions_k = true;
  EXPECT_TRUE(mentions_k);
}

TEST(CheckModule, ReorderingAcrossSharedRolesIsE101) {
  // Both confirmations involve role C, so their protocol order is rigid.
  std::string text = support::read_file(support::sample_path("jfs.chor"));
  size_t a = text.find("j1 -> c : ok(k);");
  size_t b = text.find("j2 -> c : ok(k)");
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  text.replace(b, 15, "j1 -> c : ok(k)");
  text.replace(a, 16, "j2 -> c : ok(k);");
  auto diags = check_module(support::parse_ok(text));
  EXPECT_TRUE(support::codes(diags).count("E101"));
}

TEST(CheckModule, IndependentInteractionsMayReorder) {
  // The two Store forwards serve disjoint role pairs; the choreography may
  // serialize them in either order.
  std::string text = support::read_file(support::sample_path("jfs.chor"));
  const std::string line3 = "j1.blocks(data1) -> s1.blocks1 : write(k2);";
  const std::string line4 = "j2.blocks(data2) -> s2.blocks2 : write(k2);";
  size_t a = text.find(line3);
  size_t b = text.find(line4);
  ASSERT_NE(a, std::string::npos);
  ASSERT_NE(b, std::string::npos);
  text.replace(b, line4.size(), line3);
  text.replace(a, line3.size(), line4);
  EXPECT_TRUE(check_module(support::parse_ok(text)).empty());
}

TEST(CheckModule, ChoiceBehindAnIndependentInteractionIsReachable) {
  // The conditional resolves the protocol's choice while an earlier,
  // role-disjoint interaction is still pending; the residual keeps it.
  const char* text =
      "protocol P { A -> B: m(void); C -> D: { l(void), r(void) } }\n"
      "define f(a, b, c, d)(k[ P: a[A], b[B], c[C], d[D] ]) {\n"
      "    if (go)@c { c -> d : l(k) } else { c -> d : r(k) };\n"
      "    a -> b : m(k)\n"
      "}\n";
  Module m = support::parse_ok(text);
  EXPECT_TRUE(check_module(m).empty());
  // Dropping the trailing interaction leaves it unconsumed.
  Module broken = support::parse_ok(
      "protocol P { A -> B: m(void); C -> D: { l(void), r(void) } }\n"
      "define f(a, b, c, d)(k[ P: a[A], b[B], c[C], d[D] ]) {\n"
      "    if (go)@c { c -> d : l(k) } else { c -> d : r(k) }\n"
      "}\n");
  EXPECT_TRUE(support::codes(check_module(broken)).count("E104"));
}

TEST(CheckModule, NonMemberProcessIsE101) {
  std::string text = listing_with("j1 -> c : ok( k );", "s1 -> c : ok( k );");
  auto diags = check_module(support::parse_ok(text));
  EXPECT_TRUE(support::codes(diags).count("E101"));
}

TEST(CheckModule, WrongLabelIsE102) {
  std::string text =
      listing_with("c.data -> j1.data : write(k);", "c.data -> j1.data : store(k);");
  auto diags = check_module(support::parse_ok(text));
  EXPECT_TRUE(support::codes(diags).count("E102"));
}

TEST(CheckModule, PayloadMismatchIsE103) {
  std::string text =
      listing_with("c.data -> j1.data : write(k);", "c.5 -> j1.data : write(k);");
  auto diags = check_module(support::parse_ok(text));
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, SelectionOnPayloadLabelIsE103) {
  auto diags = check_text(
      "protocol P { A -> B: op(string) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { p -> q : op(k) }\n");
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, ValueOnVoidLabelIsE103) {
  auto diags = check_text(
      "protocol P { A -> B: op(void) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { p.1 -> q.x : op(k) }\n");
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, KnowledgeOfChoiceSameLabelIsE105) {
  // Both branches open session k with `write`; receivers cannot tell them apart.
  std::string text = listing_with("c.data -> j1.data : writeAsync( k );",
                                  "c.data -> j1.data : write( k );");
  auto diags = check_module(support::parse_ok(text));
  EXPECT_TRUE(support::codes(diags).count("E105"));
}

TEST(CheckModule, BranchesMustAgreeOnResidualsE105) {
  auto diags = check_text(
      "protocol P { A -> B: { l(void); A -> B: m(void), r(void) } }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) {\n"
      "    if (true)@p { p -> q : l(k) } else { p -> q : r(k) }\n"
      "}\n");
  EXPECT_TRUE(support::codes(diags).count("E105"));
}

TEST(CheckModule, FirstMessageNotFromDeciderIsE105) {
  auto diags = check_text(
      "protocol P { B -> A: { l(void), r(void) } }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) {\n"
      "    if (true)@p { q -> p : l(k) } else { q -> p : r(k) }\n"
      "}\n");
  EXPECT_TRUE(support::codes(diags).count("E105"));
}

TEST(CheckModule, SilentLocalDivergenceIsE105) {
  // q's behaviour depends on the branch but no message tells it which.
  auto diags = check_text(
      "define f(p, q) {\n"
      "    if (true)@p { q.x = 1 } else { q.x = 2 }\n"
      "}\n");
  EXPECT_TRUE(support::codes(diags).count("E105"));
}

TEST(CheckModule, DeciderOnlyDifferencesAreFine) {
  EXPECT_TRUE(check_text("define f(p, q) {\n"
                         "    if (true)@p { p.x = 1 } else { p.x = 2 }\n"
                         "}\n")
                  .empty());
}

TEST(CheckModule, UnprojectableProtocolIsE105) {
  auto diags = check_text(
      "protocol Bad { A -> B: { l(void); C -> D: x(void), r(void); C -> D: y(void) } }\n");
  EXPECT_TRUE(support::codes(diags).count("E105"));
}

TEST(CheckModule, UnknownBuiltinIsE106) {
  auto diags = check_text(
      "protocol P { A -> B: op(string) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { p.nosuch(1) -> q.x : op(k) }\n");
  EXPECT_TRUE(support::codes(diags).count("E106"));
}

TEST(CheckModule, UninferableVariableIsE106) {
  auto diags = check_text("define f(p) { p.x = y }");
  EXPECT_TRUE(support::codes(diags).count("E106"));
}

TEST(CheckModule, NonBoolGuardIsE107) {
  auto diags = check_text("define f(p) { if (5)@p { } }");
  EXPECT_TRUE(support::codes(diags).count("E107"));
}

TEST(CheckModule, GuardVariableIsInferredBool) {
  EXPECT_TRUE(check_text("define f(p) { if (flag)@p { } }").empty());
  auto diags = check_text("define f(p) { if (flag)@p { }; p.y = flag ++ \"!\" }");
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, FreeVariablesAdoptPayloadTypes) {
  EXPECT_TRUE(check_module(support::load_sample("jfs_cli.chor")).empty());
  auto diags = check_text(
      "protocol P { A -> B: op(string); B -> A: back(int) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) {\n"
      "    p.data -> q.x : op(k);\n"
      "    q.data -> p.y : back(k)\n"
      "}\n");
  EXPECT_TRUE(diags.empty());
}

TEST(CheckModule, ReceivedVariablesAreTyped) {
  auto diags = check_text(
      "protocol P { A -> B: op(int); B -> A: back(string) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) {\n"
      "    p.1 -> q.x : op(k);\n"
      "    q.x -> p.y : back(k)\n"
      "}\n");
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, BranchDependentTypesPoisonTheVariable) {
  auto diags = check_text(
      "protocol P { A -> B: { l(int); B -> A: z(void), r(string); B -> A: z(void) } }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) {\n"
      "    if (true)@p { p.1 -> q.x : l(k); q -> p : z(k) }\n"
      "    else { p.\"s\" -> q.x : r(k); q -> p : z(k) };\n"
      "    q.y = x + 1\n"
      "}\n");
  EXPECT_TRUE(support::codes(diags).count("E103"));
}

TEST(CheckModule, CallResidualRules) {
  // A call needs its sessions untouched.
  auto diags = check_text(
      "protocol P { A -> B: a(void); A -> B: b(void) }\n"
      "define g(x, y)(k[ P: x[A], y[B] ]) { x -> y : a(k); x -> y : b(k) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { p -> q : a(k); g(p, q) }\n");
  EXPECT_TRUE(support::codes(diags).count("E104"));

  // Role-consistent call is fine and consumes the session.
  EXPECT_TRUE(check_text("protocol P { A -> B: a(void) }\n"
                         "define g(x, y)(k[ P: x[A], y[B] ]) { x -> y : a(k) }\n"
                         "define f(p, q)(k[ P: p[A], q[B] ]) { g(p, q) }\n")
                  .empty());

  // Swapped roles at the call site.
  auto diags2 = check_text(
      "protocol P { A -> B: a(void) }\n"
      "define g(x, y)(k[ P: x[A], y[B] ]) { x -> y : a(k) }\n"
      "define f(p, q)(k[ P: q[A], p[B] ]) { g(p, q) }\n");
  EXPECT_TRUE(support::codes(diags2).count("E101"));
}

TEST(CheckModule, CalleeExternalRolesMustStayExternal) {
  // lib speaks to an external peer; binding that role to a local process
  // would leave the process with no way to enact it.
  auto diags = check_text(
      "protocol P { A -> B: m(int) }\n"
      "define lib(x)(k[ P: x[A], Peer[B] ]) { x.7 -> Peer : m(k) }\n"
      "define main(p, q)(k[ P: p[A], q[B] ]) { lib(p) }\n");
  EXPECT_TRUE(support::codes(diags).count("E101"));

  // Passing the role through as the caller's own external is fine.
  EXPECT_TRUE(check_text("protocol P { A -> B: m(int) }\n"
                         "define lib(x)(k[ P: x[A], Peer[B] ]) { x.7 -> Peer : m(k) }\n"
                         "define outer(p)(k[ P: p[A], Remote[B] ]) { lib(p) }\n")
                  .empty());
}

TEST(CheckModule, CalleeStoreRequirementsPropagate) {
  auto diags = check_text(
      "define helper(h) { h.y = x + 1 }\n"
      "define f(p) { p.x = \"s\"; helper(p) }\n");
  EXPECT_TRUE(support::codes(diags).count("E103"));
  EXPECT_TRUE(check_text("define helper(h) { h.y = x + 1 }\n"
                         "define f(p) { p.x = 2; helper(p) }\n")
                  .empty());
}

TEST(CheckModule, RecursionIsAccepted) {
  EXPECT_TRUE(check_text("define loop(p) { loop(p) }").empty());
}

TEST(CheckModule, DiagnosticsAreDeterministic) {
  std::string text =
      listing_with("c.data -> j1.data : write(k);", "c.5 -> j1.data : store(k);");
  Module m = support::parse_ok(text);
  auto a = check_module(m);
  auto b = check_module(m);
  ASSERT_EQ(a.size(), b.size());
  ASSERT_FALSE(a.empty());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].code, b[i].code);
    EXPECT_EQ(a[i].message, b[i].message);
    EXPECT_EQ(a[i].span.line, b[i].span.line);
  }
}

TEST(InferLocal, S1OnStoreSession) {
  Module m = support::load_sample("writefs.chor");
  const Procedure& write = m.procedures.at("write");
  LocalTypePtr got = infer_local_behaviour(m, write, "s1", "k2");
  LocalTypePtr expected = recv1("J1", "write", PayloadType::String, local_end());
  EXPECT_TRUE(equal_local_types(got, expected)) << show_local_type(got);
}

TEST(InferLocal, ProcessOutsideSessionIsEnd) {
  Module m = support::load_sample("writefs.chor");
  const Procedure& write = m.procedures.at("write");
  EXPECT_TRUE(equal_local_types(infer_local_behaviour(m, write, "c", "k2"), local_end()));
  EXPECT_TRUE(equal_local_types(infer_local_behaviour(m, write, "s1", "k"), local_end()));
}

TEST(InferLocal, MatchesProjectionOnTheCorpus) {
  for (const char* name : {"writefs.chor", "jfs.chor", "jfs_cli.chor", "jfs_srv.chor"}) {
    Module m = support::load_sample(name);
    ASSERT_TRUE(check_module(m).empty());
    for (const auto& [pname, proc] : m.procedures) {
      for (const auto& sd : proc.sessions) {
        for (const auto& rb : sd.roles) {
          if (!rb.member.is_process()) continue;
          LocalTypePtr inferred =
              infer_local_behaviour(m, proc, rb.member.name, sd.session.name);
          LocalTypePtr projected =
              project_global(m.protocols.at(sd.protocol.name), rb.role.name);
          EXPECT_TRUE(equal_local_types(inferred, projected))
              << name << " " << pname << " " << rb.member.name << "@" << sd.session.name
              << "\n inferred: " << show_local_type(inferred)
              << "\nprojected: " << show_local_type(projected);
        }
      }
    }
  }
}

TEST(InferLocal, MatchesProjectionOnGeneratedModules) {
  support::Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    support::GeneratedModule gen = support::gen_typed_module(rng);
    const Module& m = gen.module;
    ASSERT_TRUE(check_module(m).empty()) << pretty_print(m);
    const Procedure& proc = m.procedures.at(gen.entry);
    for (const auto& sd : proc.sessions) {
      for (const auto& rb : sd.roles) {
        if (!rb.member.is_process()) continue;
        LocalTypePtr inferred =
            infer_local_behaviour(m, proc, rb.member.name, sd.session.name);
        LocalTypePtr projected =
            project_global(m.protocols.at(sd.protocol.name), rb.role.name);
        ASSERT_TRUE(equal_local_types(inferred, projected))
            << pretty_print(m) << "\nprocess " << rb.member.name << " session "
            << sd.session.name << "\n inferred: " << show_local_type(inferred)
            << "\nprojected: " << show_local_type(projected);
      }
    }
  }
}

TEST(InferLocal, ListingDeciderGetsInternalChoice) {
  Module m = support::load_sample("writefs.chor");
  const Procedure& write = m.procedures.at("write");
  LocalTypePtr c_view = infer_local_behaviour(m, write, "c", "k");
  LocalTypePtr projected = project_global(m.protocols.at("Write"), "C");
  EXPECT_TRUE(equal_local_types(c_view, projected)) << show_local_type(c_view);
  ASSERT_EQ(c_view->kind, LocalKind::Send);
  EXPECT_EQ(c_view->branches.size(), 2u);
}
