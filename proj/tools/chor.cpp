// chor — choreography compiler and verification toolkit.
//
// Subcommands:
//   check    parse and typecheck a module
//   project  compile a module to per-process endpoint programs
//   run      execute a projected module on the simulated network
//   equiv    compare choreography and network trace sets
//   link     compose two projected modules; run or verify the result

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "chor/chor.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDeadlock = 3;
constexpr int kExitInequivalent = 4;
constexpr int kExitBound = 5;

struct Options {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::optional<std::string> entry;
  std::optional<std::string> entry_b;
  std::optional<std::string> reference;
  std::optional<std::string> reference_entry;
  std::optional<std::string> scenario;
  std::string out_dir = ".";
  chor::Mode mode = chor::Mode::Sync;
  std::uint64_t seed = 0;
  int bound = 10000;
  unsigned jobs = std::thread::hardware_concurrency();
  bool no_color = false;
};

void print_usage(std::ostream& os) {
  os << "usage: chor <subcommand> [options]\n"
        "\n"
        "  chor check   <file.chor> [--scenario s.scn]\n"
        "  chor project <file.chor> --entry <proc> [-o DIR]\n"
        "  chor run     <file.chor> --entry <proc> --scenario s.scn\n"
        "               [--mode sync|async] [--seed N] [--bound N]\n"
        "  chor equiv   <file.chor> --entry <proc> --scenario s.scn\n"
        "               [--mode sync|async] [--bound N] [--jobs N]\n"
        "  chor link    <a.chor> <b.chor> --entry <proc> [--entry-b <proc>]\n"
        "               [--reference c.chor [--reference-entry <proc>]]\n"
        "               --scenario s.scn [--mode sync|async] [--seed N] [--bound N]\n"
        "\n"
        "  --no-color   plain diagnostics even on a terminal\n"
        "\n"
        "exit codes: 0 ok, 1 input errors, 2 usage, 3 deadlock,\n"
        "            4 inequivalence, 5 bound exceeded\n";
}

bool use_color(const Options& opt) { return !opt.no_color && isatty(fileno(stderr)); }

void report(const Options& opt, const std::vector<chor::Diagnostic>& diags) {
  for (const auto& d : diags)
    std::cerr << chor::render_diagnostic(d, use_color(opt)) << "\n";
}

std::optional<chor::SourceFile> load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "chor: cannot open '" << path << "'\n";
    return std::nullopt;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return chor::SourceFile{path, buf.str()};
}

std::optional<Options> parse_args(int argc, char** argv) {
  Options opt;
  if (argc < 2) return std::nullopt;
  opt.subcommand = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    auto value = [&]() -> std::optional<std::string> {
      if (i + 1 >= argc) {
        std::cerr << "chor: flag '" << arg << "' needs a value\n";
        return std::nullopt;
      }
      return std::string(argv[++i]);
    };
    if (arg == "--entry") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.entry = *v;
    } else if (arg == "--entry-b") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.entry_b = *v;
    } else if (arg == "--reference") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.reference = *v;
    } else if (arg == "--reference-entry") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.reference_entry = *v;
    } else if (arg == "--scenario") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.scenario = *v;
    } else if (arg == "-o" || arg == "--out") {
      auto v = value();
      if (!v) return std::nullopt;
      opt.out_dir = *v;
    } else if (arg == "--mode") {
      auto v = value();
      if (!v) return std::nullopt;
      if (*v == "sync") {
        opt.mode = chor::Mode::Sync;
      } else if (*v == "async") {
        opt.mode = chor::Mode::Async;
      } else {
        std::cerr << "chor: --mode must be 'sync' or 'async'\n";
        return std::nullopt;
      }
    } else if (arg == "--seed" || arg == "--bound" || arg == "--jobs") {
      auto v = value();
      if (!v) return std::nullopt;
      try {
        if (arg == "--seed")
          opt.seed = std::stoull(*v);
        else if (arg == "--bound")
          opt.bound = std::stoi(*v);
        else
          opt.jobs = static_cast<unsigned>(std::stoul(*v));
      } catch (const std::exception&) {
        std::cerr << "chor: '" << arg << "' needs a number, got '" << *v << "'\n";
        return std::nullopt;
      }
    } else if (arg == "--no-color") {
      opt.no_color = true;
    } else if (!arg.empty() && arg[0] == '-') {
      std::cerr << "chor: unknown flag '" << arg << "'\n";
      return std::nullopt;
    } else {
      opt.inputs.push_back(arg);
    }
  }
  return opt;
}

struct LoadedModule {
  chor::Module module;
  bool ok = false;
};

/// Parses, resolves and typechecks one file, reporting diagnostics.
LoadedModule load_and_check(const Options& opt, const std::string& path,
                            const chor::Builtins& builtins) {
  LoadedModule out;
  auto src = load_file(path);
  if (!src) return out;
  std::vector<chor::Diagnostic> diags;
  out.module = chor::parse_module(*src, diags);
  if (chor::has_errors(diags)) {
    report(opt, diags);
    return out;
  }
  std::vector<chor::Diagnostic> type_diags = chor::check_module(out.module, builtins);
  diags.insert(diags.end(), type_diags.begin(), type_diags.end());
  report(opt, diags);
  out.ok = !chor::has_errors(diags);
  return out;
}

std::optional<chor::Scenario> load_scenario(const Options& opt) {
  chor::Scenario scenario;
  if (!opt.scenario) return scenario;
  auto src = load_file(*opt.scenario);
  if (!src) return std::nullopt;
  std::vector<chor::Diagnostic> diags;
  scenario = chor::parse_scenario(*src, diags);
  if (chor::has_errors(diags)) {
    report(opt, diags);
    return std::nullopt;
  }
  return scenario;
}

std::optional<std::string> pick_entry(const chor::Module& m,
                                      const std::optional<std::string>& flag) {
  if (flag) {
    if (!m.procedure(*flag)) {
      std::cerr << "chor: module '" << m.source_path << "' has no procedure '" << *flag
                << "'\n";
      return std::nullopt;
    }
    return flag;
  }
  if (m.procedures.size() == 1) return m.procedures.begin()->first;
  std::cerr << "chor: --entry is required when a module defines several procedures\n";
  return std::nullopt;
}

int cmd_check(const Options& opt) {
  if (opt.inputs.size() != 1) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  auto scenario = load_scenario(opt);
  if (!scenario) return kExitInputError;
  LoadedModule loaded = load_and_check(opt, opt.inputs[0], scenario->builtins);
  return loaded.ok ? kExitOk : kExitInputError;
}

int cmd_project(const Options& opt) {
  if (opt.inputs.size() != 1) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  auto scenario = load_scenario(opt);
  if (!scenario) return kExitInputError;
  LoadedModule loaded = load_and_check(opt, opt.inputs[0], scenario->builtins);
  if (!loaded.ok) return kExitInputError;
  auto entry = pick_entry(loaded.module, opt.entry);
  if (!entry) return kExitUsage;
  chor::ProjectedSystem sys = chor::project(loaded.module, *entry);
  std::filesystem::create_directories(opt.out_dir);
  for (const auto& [process, program] : sys.endpoints) {
    std::string path = opt.out_dir + "/" + *entry + "." + process + ".ep";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
      std::cerr << "chor: cannot write '" << path << "'\n";
      return kExitInputError;
    }
    out << chor::render_endpoint_file(sys, process, *entry);
  }
  return kExitOk;
}

int cmd_run(const Options& opt) {
  if (opt.inputs.size() != 1) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  auto scenario = load_scenario(opt);
  if (!scenario) return kExitInputError;
  LoadedModule loaded = load_and_check(opt, opt.inputs[0], scenario->builtins);
  if (!loaded.ok) return kExitInputError;
  auto entry = pick_entry(loaded.module, opt.entry);
  if (!entry) return kExitUsage;
  chor::ProjectedSystem sys = chor::project(loaded.module, *entry);
  chor::RunResult result = chor::run(sys, *scenario, opt.mode, opt.seed, opt.bound);
  std::cout << chor::render_trace(result.trace);
  if (!result.trace.empty()) std::cout << "\n";
  if (result.outcome == chor::RunOutcome::Deadlock) {
    std::cerr << "deadlock: " << result.stuck.size() << " endpoint(s) stuck\n";
    for (const auto& s : result.stuck)
      std::cerr << "  " << s.process << ": waiting to " << s.waiting << "\n";
    return kExitDeadlock;
  }
  if (result.outcome == chor::RunOutcome::BoundExceeded) {
    std::cerr << "bound of " << opt.bound << " steps exceeded\n";
    return kExitBound;
  }
  return kExitOk;
}

int report_equivalence(const chor::EquivResult& result, int bound) {
  switch (result.status) {
    case chor::EquivStatus::Equivalent:
      std::cout << "EQUIVALENT (" << result.trace_count << " trace"
                << (result.trace_count == 1 ? "" : "s") << ")\n";
      return kExitOk;
    case chor::EquivStatus::Counterexample:
      std::cerr << "NOT EQUIVALENT: trace produced only by the " << result.witness_side
                << "\n";
      std::cout << chor::render_trace(result.witness);
      if (!result.witness.empty()) std::cout << "\n";
      return kExitInequivalent;
    case chor::EquivStatus::DeadlockFound:
      std::cerr << "DEADLOCK on the network side\n";
      for (const auto& s : result.stuck)
        std::cerr << "  " << s.process << ": waiting to " << s.waiting << "\n";
      std::cout << chor::render_trace(result.witness);
      if (!result.witness.empty()) std::cout << "\n";
      return kExitDeadlock;
    case chor::EquivStatus::BoundExceeded:
      std::cerr << "bound of " << bound << " steps exceeded\n";
      return kExitBound;
  }
  return kExitInputError;
}

int cmd_equiv(const Options& opt) {
  if (opt.inputs.size() != 1) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  auto scenario = load_scenario(opt);
  if (!scenario) return kExitInputError;
  LoadedModule loaded = load_and_check(opt, opt.inputs[0], scenario->builtins);
  if (!loaded.ok) return kExitInputError;
  auto entry = pick_entry(loaded.module, opt.entry);
  if (!entry) return kExitUsage;

  const chor::Procedure* proc = loaded.module.procedure(*entry);
  chor::EquivResult result;
  if (opt.jobs >= 2) {
    auto chor_future = std::async(std::launch::async, [&] {
      return chor::enumerate_traces(
          chor::make_chor_config(loaded.module, *proc, *scenario), opt.bound);
    });
    chor::NetworkEnumeration net_side = chor::enumerate_network_traces(
        chor::project(loaded.module, *entry), *scenario, opt.mode, opt.bound);
    result = chor::compare_trace_sets(chor_future.get(), net_side);
  } else {
    result = chor::check_equivalence(loaded.module, *entry, *scenario, opt.mode, opt.bound);
  }
  return report_equivalence(result, opt.bound);
}

int cmd_link(const Options& opt) {
  if (opt.inputs.size() != 2) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  auto scenario = load_scenario(opt);
  if (!scenario) return kExitInputError;
  LoadedModule a = load_and_check(opt, opt.inputs[0], scenario->builtins);
  if (!a.ok) return kExitInputError;
  LoadedModule b = load_and_check(opt, opt.inputs[1], scenario->builtins);
  if (!b.ok) return kExitInputError;
  auto entry_a = pick_entry(a.module, opt.entry);
  if (!entry_a) return kExitUsage;
  auto entry_b = pick_entry(b.module, opt.entry_b ? opt.entry_b : opt.entry);
  if (!entry_b) return kExitUsage;

  chor::ProjectedSystem linked =
      chor::link(chor::project(a.module, *entry_a), chor::project(b.module, *entry_b));

  if (!opt.reference) {
    chor::RunResult result = chor::run(linked, *scenario, opt.mode, opt.seed, opt.bound);
    std::cout << chor::render_trace(result.trace);
    if (!result.trace.empty()) std::cout << "\n";
    if (result.outcome == chor::RunOutcome::Deadlock) {
      std::cerr << "deadlock: " << result.stuck.size() << " endpoint(s) stuck\n";
      return kExitDeadlock;
    }
    if (result.outcome == chor::RunOutcome::BoundExceeded) {
      std::cerr << "bound of " << opt.bound << " steps exceeded\n";
      return kExitBound;
    }
    return kExitOk;
  }

  LoadedModule ref = load_and_check(opt, *opt.reference, scenario->builtins);
  if (!ref.ok) return kExitInputError;
  auto ref_entry =
      pick_entry(ref.module, opt.reference_entry ? opt.reference_entry : opt.entry);
  if (!ref_entry) return kExitUsage;
  const chor::Procedure* ref_proc = ref.module.procedure(*ref_entry);

  chor::TraceEnumeration chor_side = chor::enumerate_traces(
      chor::make_chor_config(ref.module, *ref_proc, *scenario), opt.bound);
  chor::NetworkEnumeration net_side =
      chor::enumerate_network_traces(linked, *scenario, opt.mode, opt.bound);
  return report_equivalence(chor::compare_trace_sets(chor_side, net_side), opt.bound);
}

}  // namespace

int main(int argc, char** argv) {
  auto opt = parse_args(argc, argv);
  if (!opt) {
    print_usage(std::cerr);
    return kExitUsage;
  }
  try {
    if (opt->subcommand == "check") return cmd_check(*opt);
    if (opt->subcommand == "project") return cmd_project(*opt);
    if (opt->subcommand == "run") return cmd_run(*opt);
    if (opt->subcommand == "equiv") return cmd_equiv(*opt);
    if (opt->subcommand == "link") return cmd_link(*opt);
    if (opt->subcommand == "--help" || opt->subcommand == "help") {
      print_usage(std::cout);
      return kExitOk;
    }
    std::cerr << "chor: unknown subcommand '" << opt->subcommand << "'\n";
    print_usage(std::cerr);
    return kExitUsage;
  } catch (const chor::LinkError& e) {
    std::cerr << "chor: link error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const chor::MergeFailure& e) {
    std::cerr << "chor: " << e.what() << "\n";
    return kExitInputError;
  } catch (const chor::ScenarioError& e) {
    std::cerr << "chor: scenario error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const chor::EvalError& e) {
    std::cerr << "chor: evaluation error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "chor: " << e.what() << "\n";
    return kExitInputError;
  }
}
