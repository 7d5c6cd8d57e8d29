#pragma once

#include "thermoray/scenario.hpp"
#include "thermoray/spectrum.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace thermoray {

struct RunOptions {
  std::filesystem::path out;           ///< empty: scenario "output", else thermoray_out/<name>
  bool force = false;                  ///< run despite a regime mismatch
  std::optional<std::uint64_t> seed;   ///< overrides the scenario seed
};

struct Check {
  std::string name;
  bool pass = true;
  std::string detail;
};

/// Outcome of one subcommand; also written as <command>_summary.json.
struct Report {
  std::string command;
  std::filesystem::path out_dir;
  std::vector<Check> checks;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> notes;

  bool pass() const;
  void check(std::string name, bool ok, std::string detail = {});
};

Report run_spectrum(const Scenario& s, const RunOptions& opts = {});
Report run_rays(const Scenario& s, const RunOptions& opts = {});
Report run_transport(const Scenario& s, const RunOptions& opts = {});
Report run_direct(const Scenario& s, const RunOptions& opts = {});

struct WindowRow {
  int level = 0;
  double eps = 0.0;
  int nx = 0;
  std::string window;
  double t = 0.0;
  double pde = 0.0;
  double prediction = 0.0;
  double deviation = 0.0;
};

struct LevelRow {
  int level = 0;
  double eps = 0.0;
  int nx = 0;
  double pde_loss = 0.0;        ///< 1 - E+(T)/E+(0)
  double predicted_loss = 0.0;  ///< 1 - mu+(T)/mu+(0)
  double loss_deviation = 0.0;
  double hf_fraction = 0.0;
  double theta_energy = 0.0;
};

struct ComparisonReport {
  Report report;
  std::vector<WindowRow> windows;
  std::vector<LevelRow> levels;
};

/// Direct solver on the eps-family against the transported atomic measure.
ComparisonReport run_compare(const Scenario& s, const RunOptions& opts = {});

/// Invariant suite: structure of B, regime, R0, cubic oracle, asymptotic fits and,
/// for patch regimes, distorted-flow conservation.
Report validate(const Scenario& s, const RunOptions& opts = {});

/// Dense eigen-solver check of the spectrum at one point: relative root error and
/// the dimension of the numerical kernel of Q.
struct OracleCheck {
  double relative_error = 0.0;
  int kernel_dimension = 0;
  double residual = 0.0;
};
OracleCheck spectrum_oracle(const CoefficientModel& model, const Vec& x, const Vec& xi,
                            const SpectrumOptions& opts = {});

void write_summary(const Report& r, const std::string& scenario_name);

}  // namespace thermoray
