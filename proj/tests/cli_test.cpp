// End-to-end tests of the chor binary: exit codes, stream discipline and
// artifact determinism.

#include <gtest/gtest.h>

#include <filesystem>

#include "test_support.hpp"

using support::run_cli;
using support::sample_path;

namespace {

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST(Cli, CheckCleanModuleIsSilent) {
  support::CliResult r = run_cli("check " + sample_path("writefs.chor"));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(r.err, "");
}

TEST(Cli, CheckReportsOneDiagnosticLine) {
  std::string bad = support::write_temp(
      "broken.chor",
      "protocol P { A -> B: op(string) }\n"
      "define f(c, d)(k[ P: c[A], d[B] ]) { c.data -> c.x : op(k) }\n");
  support::CliResult r = run_cli("check " + bad);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(count_lines(r.err), 1);
  EXPECT_NE(r.err.find("error[E004]"), std::string::npos);
  EXPECT_NE(r.err.find("broken.chor:2:"), std::string::npos);
}

TEST(Cli, CheckTypecheckFailuresExitOne) {
  std::string bad = support::write_temp(
      "badtype.chor",
      "protocol P { A -> B: op(string) }\n"
      "define f(c, d)(k[ P: c[A], d[B] ]) { c.5 -> d.x : op(k) }\n");
  support::CliResult r = run_cli("check " + bad);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("error[E103]"), std::string::npos);
}

TEST(Cli, EquivReportsTheTraceCount) {
  support::CliResult r = run_cli("equiv " + sample_path("jfs.chor") +
                                 " --entry jfs --scenario " + sample_path("jfs.scn"));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "EQUIVALENT (5 traces)\n");
}

TEST(Cli, EquivSingleJob) {
  support::CliResult r =
      run_cli("equiv " + sample_path("jfs.chor") + " --entry jfs --scenario " +
              sample_path("jfs.scn") + " --jobs 1");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "EQUIVALENT (5 traces)\n");
}

TEST(Cli, RunIsDeterministicPerSeed) {
  std::string args = "run " + sample_path("jfs.chor") + " --entry jfs --scenario " +
                     sample_path("jfs.scn") + " --seed 7";
  support::CliResult a = run_cli(args);
  support::CliResult b = run_cli(args);
  EXPECT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(count_lines(a.out), 6);
  EXPECT_EQ(a.out.substr(0, a.out.find('\n')), "k c->j1 write(\"d\")");
}

TEST(Cli, RunAsyncMode) {
  support::CliResult r =
      run_cli("run " + sample_path("jfs.chor") + " --entry jfs --scenario " +
              sample_path("jfs.scn") + " --mode async --seed 3");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(count_lines(r.out), 6);
}

TEST(Cli, ProjectWritesOneFilePerProcess) {
  std::string out_dir = std::string(CHOR_BIN_DIR) + "/epp_out";
  std::filesystem::remove_all(out_dir);
  support::CliResult r =
      run_cli("project " + sample_path("writefs.chor") + " --entry write -o " + out_dir);
  EXPECT_EQ(r.exit_code, 0);
  for (const char* p : {"c", "j1", "j2", "s1", "s2"}) {
    std::string path = out_dir + "/write." + std::string(p) + ".ep";
    EXPECT_TRUE(std::filesystem::exists(path)) << path;
  }
  std::string j2 = support::read_file(out_dir + "/write.j2.ep");
  EXPECT_NE(j2.find("endpoint j2 {"), std::string::npos);
  EXPECT_NE(j2.find("writeAsync(data) ->"), std::string::npos);

  // Bit-identical on a second run.
  support::CliResult again =
      run_cli("project " + sample_path("writefs.chor") + " --entry write -o " + out_dir);
  EXPECT_EQ(again.exit_code, 0);
  EXPECT_EQ(support::read_file(out_dir + "/write.j2.ep"), j2);
}

TEST(Cli, EquivOnTheListingBothScenarios) {
  support::CliResult s =
      run_cli("equiv " + sample_path("writefs.chor") + " --entry write --scenario " +
              sample_path("writefs_sync.scn"));
  EXPECT_EQ(s.exit_code, 0);
  EXPECT_EQ(s.out, "EQUIVALENT (5 traces)\n");
  support::CliResult a =
      run_cli("equiv " + sample_path("writefs.chor") + " --entry write --scenario " +
              sample_path("writefs_async.scn"));
  EXPECT_EQ(a.exit_code, 0);
  EXPECT_EQ(a.out, "EQUIVALENT (3 traces)\n");
}

TEST(Cli, LinkAgainstReference) {
  support::CliResult r = run_cli(
      "link " + sample_path("jfs_cli.chor") + " " + sample_path("jfs_srv.chor") +
      " --entry write --reference " + sample_path("jfs.chor") +
      " --reference-entry jfs --scenario " + sample_path("jfs.scn"));
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.out, "EQUIVALENT (5 traces)\n");
}

TEST(Cli, LinkedRunWithoutReference) {
  support::CliResult r = run_cli(
      "link " + sample_path("jfs_cli.chor") + " " + sample_path("jfs_srv.chor") +
      " --entry write --scenario " + sample_path("jfs.scn") + " --seed 5");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(count_lines(r.out), 6);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("").exit_code, 2);
  EXPECT_EQ(run_cli("frobnicate x.chor").exit_code, 2);
  EXPECT_EQ(run_cli("check").exit_code, 2);
  EXPECT_EQ(run_cli("equiv " + sample_path("writefs.chor") + " --scenario " +
                    sample_path("writefs_sync.scn"))
                .exit_code,
            2);  // two procedures, no --entry
  EXPECT_EQ(run_cli("run " + sample_path("jfs.chor") + " --mode sideways").exit_code, 2);
}

TEST(Cli, MissingFileExitsOne) {
  EXPECT_EQ(run_cli("check /nonexistent/nope.chor").exit_code, 1);
}

TEST(Cli, MissingScenarioVariableExitsOne) {
  std::string empty_scn = support::write_temp("empty.scn", "");
  support::CliResult r = run_cli("run " + sample_path("jfs.chor") +
                                 " --entry jfs --scenario " + empty_scn + " --seed 0");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("data"), std::string::npos);
}

TEST(Cli, BoundExceededExitsFive) {
  std::string loop = support::write_temp("loop.chor", "define loop(p) { loop(p) }\n");
  support::CliResult r = run_cli("run " + loop + " --entry loop --bound 50 --seed 1");
  EXPECT_EQ(r.exit_code, 5);
  support::CliResult e = run_cli("equiv " + loop + " --entry loop --bound 50");
  EXPECT_EQ(e.exit_code, 5);
}

TEST(Cli, InequivalentReferenceExitsFour) {
  // A reference that forwards the raw data instead of the block computation.
  std::string ref = support::write_temp(
      "jfs_short.chor",
      "protocol Write {\n"
      "    C -> J1: write(string);\n"
      "    C -> J2: write(string);\n"
      "    J1 -> C: ok(void);\n"
      "    J2 -> C: ok(void)\n"
      "}\n"
      "protocol Store { J1 -> S1: write(string); J2 -> S2: write(string) }\n"
      "define jfs(c, j1, j2, s1, s2)\n"
      "(k[ Write: c[C], j1[J1], j2[J2] ],\n"
      " k2[ Store: j1[J1], j2[J2], s1[S1], s2[S2] ]) {\n"
      "    c.data -> j1.data1 : write(k);\n"
      "    c.data -> j2.data2 : write(k);\n"
      "    j1.data1 -> s1.blocks1 : write(k2);\n"
      "    j2.data2 -> s2.blocks2 : write(k2);\n"
      "    j1 -> c : ok(k);\n"
      "    j2 -> c : ok(k)\n"
      "}\n");
  support::CliResult r = run_cli(
      "link " + sample_path("jfs_cli.chor") + " " + sample_path("jfs_srv.chor") +
      " --entry write --reference " + ref + " --reference-entry jfs --scenario " +
      sample_path("jfs.scn"));
  // Identical structure but different payload expressions on k2 would still
  // agree under the identity builtin; force a difference via the scenario.
  EXPECT_EQ(r.exit_code, 0);

  std::string scn = support::write_temp(
      "shout.scn", "process c { data = \"d\"; }\nbuiltin blocks(x: string): string = x ++ \"!\"\n");
  support::CliResult r2 = run_cli(
      "link " + sample_path("jfs_cli.chor") + " " + sample_path("jfs_srv.chor") +
      " --entry write --reference " + ref + " --reference-entry jfs --scenario " + scn);
  EXPECT_EQ(r2.exit_code, 4);
  EXPECT_NE(r2.err.find("NOT EQUIVALENT"), std::string::npos);
  EXPECT_FALSE(r2.out.empty());  // the witness trace goes to stdout
}

TEST(Cli, LinkErrorsExitOne) {
  support::CliResult r = run_cli("link " + sample_path("jfs_cli.chor") + " " +
                                 sample_path("jfs_cli.chor") + " --entry write " +
                                 "--scenario " + sample_path("jfs.scn"));
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("link error"), std::string::npos);
}

TEST(Cli, CheckUsesScenarioBuiltinSignatures) {
  std::string mod = support::write_temp(
      "shoutmod.chor",
      "protocol P { A -> B: op(string) }\n"
      "define f(p, q)(k[ P: p[A], q[B] ]) { p.shout(data) -> q.x : op(k) }\n");
  std::string scn = support::write_temp(
      "shout_only.scn", "builtin shout(x: string): string = x ++ \"!\"\n");
  EXPECT_EQ(run_cli("check " + mod + " --scenario " + scn).exit_code, 0);
  support::CliResult bare = run_cli("check " + mod);
  EXPECT_EQ(bare.exit_code, 1);
  EXPECT_NE(bare.err.find("error[E106]"), std::string::npos);
}

TEST(Cli, NoColorFlagIsAccepted) {
  support::CliResult r =
      run_cli("check " + sample_path("jfs.chor") + " --no-color");
  EXPECT_EQ(r.exit_code, 0);
}

TEST(Cli, AuthSampleBothOutcomes) {
  support::CliResult granted =
      run_cli("run " + sample_path("auth.chor") + " --entry auth --scenario " +
              sample_path("auth.scn") + " --seed 1");
  EXPECT_EQ(granted.exit_code, 0);
  EXPECT_NE(granted.out.find("granted(\"tok:hunter2\")"), std::string::npos);
  EXPECT_NE(granted.out.find("note(\"ok\")"), std::string::npos);

  support::CliResult denied =
      run_cli("run " + sample_path("auth.chor") + " --entry auth --scenario " +
              sample_path("auth_denied.scn") + " --seed 1");
  EXPECT_EQ(denied.exit_code, 0);
  EXPECT_NE(denied.out.find("denied()"), std::string::npos);
  EXPECT_NE(denied.out.find("note(\"fail\")"), std::string::npos);

  for (const char* scn : {"auth.scn", "auth_denied.scn"}) {
    support::CliResult eq = run_cli("equiv " + sample_path("auth.chor") +
                                    " --entry auth --scenario " + sample_path(scn));
    EXPECT_EQ(eq.exit_code, 0);
    EXPECT_EQ(eq.out, "EQUIVALENT (1 trace)\n");
  }
}

TEST(Cli, HelpPrintsUsage) {
  support::CliResult r = run_cli("help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("usage: chor"), std::string::npos);
}
