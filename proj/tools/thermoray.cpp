#include "thermoray/app.hpp"
#include "thermoray/error.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>

namespace {

namespace tr = thermoray;

constexpr int kPass = 0;
constexpr int kValidationFailure = 2;
constexpr int kNumerical = 3;
constexpr int kBadScenario = 4;

int exit_code(tr::ErrorKind k) {
  switch (k) {
    case tr::ErrorKind::DegenerateSpectrum:
    case tr::ErrorKind::NumericalBreakdown:
    case tr::ErrorKind::SolverDiverged:
    case tr::ErrorKind::LeftDomain:
    case tr::ErrorKind::LeftPatch:
    case tr::ErrorKind::NotHyperbolic:
      return kNumerical;
    default:
      return kBadScenario;
  }
}

int report(const tr::Report& r) {
  for (const tr::Check& c : r.checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << "  " << c.detail;
    std::cout << '\n';
  }
  std::cout << r.command << ": " << (r.pass() ? "pass" : "fail") << "  (" << r.out_dir.string() << ")\n";
  return r.pass() ? kPass : kValidationFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermoelastic energy decay: rays, measures and a grid solver"};
  app.require_subcommand(1);

  std::string scenario_path, out_dir;
  std::uint64_t seed = 0;
  bool force = false;

  using Runner = std::function<tr::Report(const tr::Scenario&, const tr::RunOptions&)>;
  std::vector<std::pair<CLI::App*, Runner>> commands;
  auto add = [&](const char* name, const char* help, Runner run) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario_path, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the scenario seed");
    sub->add_flag("--force", force, "run even if the model does not match the declared regime");
    commands.emplace_back(sub, std::move(run));
  };
  add("spectrum", "symbol roots, dense oracle and asymptotic fits", [](auto& s, auto& o) { return tr::run_spectrum(s, o); });
  add("rays", "damped rays with boundary reflections", [](auto& s, auto& o) { return tr::run_rays(s, o); });
  add("transport", "push the initial measures forward", [](auto& s, auto& o) { return tr::run_transport(s, o); });
  add("direct", "grid solver energy balance and mode split", [](auto& s, auto& o) { return tr::run_direct(s, o); });
  add("compare", "grid solver against the transported measure",
      [](auto& s, auto& o) { return tr::run_compare(s, o).report; });
  add("validate", "invariant suite", [](auto& s, auto& o) { return tr::validate(s, o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadScenario;
  }

  try {
    for (auto& [sub, run] : commands) {
      if (!sub->parsed()) continue;
      tr::RunOptions opts;
      opts.out = out_dir;
      opts.force = force;
      if (sub->count("--seed") > 0) opts.seed = seed;
      return report(run(tr::load_scenario(scenario_path), opts));
    }
  } catch (const tr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadScenario;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
  return kBadScenario;
}
