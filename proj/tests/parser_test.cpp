#include "chor/parser.hpp"

#include <gtest/gtest.h>

#include "chor/printer.hpp"
#include "test_support.hpp"

using namespace chor;

TEST(Parser, ListingParses) {
  Module m = support::load_sample("writefs.chor");
  ASSERT_EQ(m.protocols.size(), 2u);
  EXPECT_TRUE(m.protocols.count("Write"));
  EXPECT_TRUE(m.protocols.count("Store"));
  ASSERT_EQ(m.procedures.size(), 2u);
  EXPECT_TRUE(m.procedures.count("computeBlocks"));
  EXPECT_TRUE(m.procedures.count("write"));

  const Procedure& write = m.procedures.at("write");
  ASSERT_EQ(write.params.size(), 5u);
  ASSERT_EQ(write.sessions.size(), 2u);
  EXPECT_EQ(write.sessions[0].session.name, "k");
  EXPECT_EQ(write.sessions[0].protocol.name, "Write");
  ASSERT_EQ(write.body.size(), 1u);
  const Cond& cond = std::get<Cond>(write.body[0].node);
  EXPECT_EQ(cond.at.name, "c");
  EXPECT_EQ(cond.then_branch.size(), 7u);
  EXPECT_EQ(cond.else_branch.size(), 5u);

  // The Write protocol is a two-way choice at its head.
  const GlobalTypePtr& w = m.protocols.at("Write");
  ASSERT_FALSE(w->is_end());
  EXPECT_EQ(w->from.name, "C");
  EXPECT_EQ(w->to.name, "J1");
  ASSERT_EQ(w->branches.size(), 2u);
  EXPECT_TRUE(w->branches.count("write"));
  EXPECT_TRUE(w->branches.count("writeAsync"));
  EXPECT_EQ(w->branches.at("write").payload, PayloadType::String);
}

TEST(Parser, EmptyFileIsEmptyModule) {
  Module m = support::parse_ok("");
  EXPECT_TRUE(m.protocols.empty());
  EXPECT_TRUE(m.procedures.empty());
}

TEST(Parser, SenderEqualsReceiverIsE004) {
  auto diags = support::parse_errors(
      "protocol P { A -> B: op(string) }\n"
      "define f(c)(k[ P: c[A], X[B] ]) { c.data -> c.x : op(k) }\n");
  ASSERT_TRUE(has_errors(diags));
  EXPECT_TRUE(support::codes(diags).count("E004"));
}

TEST(Parser, JfsBodyIsSixStatementsInSourceOrder) {
  Module m = support::load_sample("jfs.chor");
  const Choreography& body = m.procedures.at("jfs").body;
  ASSERT_EQ(body.size(), 6u);
  EXPECT_TRUE(std::holds_alternative<ValueComm>(body[0].node));
  EXPECT_TRUE(std::holds_alternative<ValueComm>(body[3].node));
  EXPECT_TRUE(std::holds_alternative<Selection>(body[4].node));
  EXPECT_TRUE(std::holds_alternative<Selection>(body[5].node));
  EXPECT_EQ(std::get<ValueComm>(body[0].node).receiver.name, "j1");
  EXPECT_EQ(std::get<ValueComm>(body[1].node).receiver.name, "j2");
  EXPECT_EQ(std::get<Selection>(body[4].node).sender.name, "j1");
  // The sender expression of line 3 is a builtin call.
  const ValueComm& line3 = std::get<ValueComm>(body[2].node);
  EXPECT_TRUE(std::holds_alternative<BuiltinCall>(line3.expr->node));
}

TEST(Parser, ExternalsResolveToRoles) {
  Module m = support::load_sample("jfs_cli.chor");
  const Choreography& body = m.procedures.at("write").body;
  const ValueComm& first = std::get<ValueComm>(body[0].node);
  EXPECT_TRUE(first.sender.is_process());
  EXPECT_TRUE(first.receiver.is_role());
  EXPECT_FALSE(first.var.has_value());
  ASSERT_TRUE(first.expr != nullptr);
  const Selection& third = std::get<Selection>(body[2].node);
  EXPECT_TRUE(third.sender.is_role());
  EXPECT_TRUE(third.receiver.is_process());
}

TEST(Parser, ExternalSenderBindsReceiverVariable) {
  Module m = support::load_sample("jfs_srv.chor");
  const Choreography& body = m.procedures.at("write").body;
  const ValueComm& first = std::get<ValueComm>(body[0].node);
  EXPECT_TRUE(first.sender.is_role());
  EXPECT_EQ(first.expr, nullptr);
  ASSERT_TRUE(first.var.has_value());
  EXPECT_EQ(first.var->name, "data1");
}

TEST(Parser, LexicalErrorsAreE001) {
  EXPECT_TRUE(support::codes(support::parse_errors("protocol $ { end }")).count("E001"));
  EXPECT_TRUE(
      support::codes(support::parse_errors("define f(p) { p.x = \"unterminated }"))
          .count("E001"));
  EXPECT_TRUE(support::codes(support::parse_errors("/* never closed")).count("E001"));
}

TEST(Parser, SyntaxErrorsAreE002) {
  EXPECT_TRUE(support::codes(support::parse_errors("protocol P { A -> }")).count("E002"));
  EXPECT_TRUE(support::codes(support::parse_errors("define f( { }")).count("E002"));
}

TEST(Parser, DuplicateTopLevelNamesAreE003) {
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { end } protocol P { end }"))
                  .count("E003"));
  EXPECT_TRUE(support::codes(support::parse_errors("define f() { } define f() { }"))
                  .count("E003"));
}

TEST(Parser, ResolutionErrorsAreE004) {
  // Unbound participant.
  EXPECT_TRUE(
      support::codes(support::parse_errors("define f(p) { p.x -> q.y : op(k) }"))
          .count("E004"));
  // Two external references in one statement.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: op(void) }\n"
                                 "define f(p)(k[ P: X[A], Y[B] ]) { X -> Y : op(k) }"))
                  .count("E004"));
  // Variable bound on an external receiver.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: op(string) }\n"
                                 "define f(p)(k[ P: p[A], X[B] ]) "
                                 "{ p.d -> X.y : op(k) }"))
                  .count("E004"));
  // Missing variable on a process receiver.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: op(string) }\n"
                                 "define f(p, q)(k[ P: p[A], q[B] ]) "
                                 "{ p.d -> q : op(k) }"))
                  .count("E004"));
  // Unknown session.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "define f(p, q) { p.d -> q.x : op(nosuch) }"))
                  .count("E004"));
  // Unknown protocol in a session declaration.
  EXPECT_TRUE(
      support::codes(support::parse_errors("define f(p)(k[ Nope: p[A] ]) { }"))
          .count("E004"));
  // Role assignment must cover every protocol role.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: op(void) }\n"
                                 "define f(p)(k[ P: p[A] ]) { }"))
                  .count("E004"));
  // Conditional decided by an external reference.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: op(void) }\n"
                                 "define f(p)(k[ P: p[A], X[B] ]) "
                                 "{ if (true)@X { } }"))
                  .count("E004"));
  // Call arity mismatch and duplicate argument.
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "define g(a, b) { }\ndefine f(p) { g(p) }"))
                  .count("E004"));
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "define g(a, b) { }\ndefine f(p, q) { g(p, p) }"))
                  .count("E004"));
  // Unknown procedure.
  EXPECT_TRUE(support::codes(support::parse_errors("define f(p) { nothere(p) }"))
                  .count("E004"));
}

TEST(Parser, ProtocolWellFormedness) {
  EXPECT_TRUE(
      support::codes(support::parse_errors("protocol P { A -> A: op(void) }"))
          .count("E004"));
  EXPECT_TRUE(support::codes(support::parse_errors(
                                 "protocol P { A -> B: { op(void), op(int) } }"))
                  .count("E004"));
}

TEST(Parser, RecoversAtStatementBoundaries) {
  auto diags = support::parse_errors(
      "define f(p, q) {\n"
      "    p.x = ;\n"
      "    p.d -> q.y : op();\n"
      "    p.z = 1\n"
      "}\n");
  int errors = 0;
  for (const auto& d : diags)
    if (d.is_error()) ++errors;
  EXPECT_GE(errors, 2);
}

TEST(Parser, DiagnosticSpansPointAtTheOffendingToken) {
  auto diags = support::parse_errors("define f(p) {\n    p.x = 5 +\n}\n");
  ASSERT_FALSE(diags.empty());
  EXPECT_EQ(diags[0].span.line, 3);  // the '}' where an operand was expected
  auto diags2 = support::parse_errors("protocol P { end }\nprotocol P { end }\n");
  ASSERT_FALSE(diags2.empty());
  EXPECT_EQ(diags2[0].span.line, 2);
  EXPECT_EQ(diags2[0].span.col, 10);
}

TEST(Parser, CommentsAndSeparators) {
  Module m = support::parse_ok(
      "// line comment\n"
      "/* block\n   comment */\n"
      "protocol Q { A -> B: op(int) }\n"
      "define f(p, q)(k[ Q: p[A], q[B] ]) "
      "{ p.x = 1; /* inline */ p.x -> q.y : op(k) /* tail */ }\n");
  ASSERT_EQ(m.procedures.at("f").body.size(), 2u);
}

TEST(Parser, CallSessionArgsAreResolvedFromTheCallee) {
  Module m = support::parse_ok(
      "protocol P { A -> B: op(int) }\n"
      "define g(a, b)(k[ P: a[A], b[B] ]) { a.5 -> b.x : op(k) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { g(p, q) }\n");
  const CallStmt& call = std::get<CallStmt>(m.procedures.at("f").body[0].node);
  ASSERT_EQ(call.session_args.size(), 1u);
  EXPECT_EQ(call.session_args[0].name, "k");
}

TEST(Parser, PrettyPrintRoundTripsTheCorpus) {
  for (const char* name : {"writefs.chor", "jfs.chor", "jfs_cli.chor", "jfs_srv.chor"}) {
    Module m = support::load_sample(name);
    std::string printed = pretty_print(m);
    Module again = support::parse_ok(printed);
    EXPECT_TRUE(equal_modulo_spans(m, again)) << name << ":\n" << printed;
  }
}

TEST(Parser, PrettyPrintOfEmptyModuleIsEmpty) {
  EXPECT_EQ(pretty_print(Module{}), "");
}

TEST(Parser, GeneratedModulesRoundTrip) {
  support::Rng rng(2024);
  support::GenOptions opt;
  opt.allow_calls = true;
  opt.allow_externals = true;
  for (int i = 0; i < 200; ++i) {
    support::GeneratedModule gen = support::gen_typed_module(rng, opt);
    std::string printed = pretty_print(gen.module);
    std::vector<Diagnostic> diags;
    Module again = parse_module(support::src(printed), diags);
    ASSERT_FALSE(has_errors(diags)) << printed;
    EXPECT_TRUE(equal_modulo_spans(gen.module, again)) << printed;
  }
}

TEST(Parser, RandomExpressionsRoundTrip) {
  support::Rng rng(7);
  std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
    if (depth >= 3 || rng.coin(0.3)) {
      switch (rng.below(4)) {
        case 0: return lit(Value{std::int64_t{rng.below(100)}});
        case 1: return lit(Value{std::string("s") + std::to_string(rng.below(10))});
        case 2: return lit(Value{rng.coin()});
        default: return var("x" + std::to_string(rng.below(3)));
      }
    }
    switch (rng.below(6)) {
      case 0: return make_expr(UnaryExpr{UnOp::Not, gen(depth + 1)});
      case 1:
        return make_expr(BuiltinCall{"f", {gen(depth + 1), gen(depth + 1)}});
      default: {
        static const BinOp ops[] = {BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le,
                                    BinOp::Add, BinOp::Concat, BinOp::And, BinOp::Or};
        return make_expr(BinaryExpr{ops[rng.below(8)], gen(depth + 1), gen(depth + 1)});
      }
    }
  };
  for (int i = 0; i < 500; ++i) {
    ExprPtr e = gen(0);
    std::string printed = pretty_print_expr(*e);
    std::vector<Diagnostic> diags;
    ExprPtr back = parse_expression(printed, diags);
    ASSERT_FALSE(has_errors(diags)) << printed;
    EXPECT_TRUE(equal_expr_ptrs(e, back)) << printed;
  }
}

TEST(Scenario, ParsesStoresAndBuiltins) {
  std::vector<Diagnostic> diags;
  Scenario s = parse_scenario(
      support::src("process c { data = \"d\"; sync = true; n = -4; u = unit; }\n"
                   "builtin shout(x: string): string = x ++ \"!\"\n"
                   "builtin incr(n: int): int = n + 1\n"),
      diags);
  ASSERT_FALSE(has_errors(diags));
  EXPECT_EQ(std::get<std::string>(s.stores.at("c").at("data")), "d");
  EXPECT_EQ(std::get<bool>(s.stores.at("c").at("sync")), true);
  EXPECT_EQ(std::get<std::int64_t>(s.stores.at("c").at("n")), -4);
  EXPECT_TRUE(std::holds_alternative<Unit>(s.stores.at("c").at("u")));
  ASSERT_TRUE(s.builtins.find("shout"));
  EXPECT_EQ(s.builtins.find("incr")->ret, PayloadType::Int);
  // The default stays available.
  ASSERT_TRUE(s.builtins.find("blocks"));
  Store store;
  EXPECT_EQ(std::get<std::string>(
                eval_expr(*make_expr(BuiltinCall{"shout", {lit(Value{std::string("hi")})}}),
                          store, s.builtins)),
            "hi!");
}

TEST(Scenario, ReturnTypeInferredFromBody) {
  std::vector<Diagnostic> diags;
  Scenario s = parse_scenario(
      support::src("builtin both(a: int, b: int) = a <= b\n"), diags);
  ASSERT_FALSE(has_errors(diags));
  EXPECT_EQ(s.builtins.find("both")->ret, PayloadType::Bool);
}

TEST(Scenario, ErrorsAreReported) {
  std::vector<Diagnostic> diags;
  parse_scenario(support::src("process { }"), diags);
  EXPECT_TRUE(has_errors(diags));
}
