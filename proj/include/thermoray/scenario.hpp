#pragma once

#include "thermoray/coefficients.hpp"
#include "thermoray/direct.hpp"
#include "thermoray/presets.hpp"
#include "thermoray/transport.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace thermoray {

enum class RegimeKind { WeaklyDegenerate, DegeneratePatch, TotalDamping, Elliptic };

std::string_view to_string(RegimeKind r);

/// Either a named preset or constant coefficients on a box.
struct ModelSpec {
  std::string preset;
  PresetParams params;
  std::optional<Mat> custom_B;
  std::optional<Vec> custom_gamma;
  std::optional<Box> custom_domain;
};

struct FitPoint {
  Vec x;
  Vec omega;
};

struct SpectrumSection {
  int samples = 200;
  double radius_max = 1e4;
  std::vector<FitPoint> fits;
  double fit_radius_min = 1e2;
  double fit_radius_max = 1e5;
  int fit_count = 13;
};

struct RayStart {
  Vec x;
  Vec omega;
  WaveMode mode = WaveMode::Plus;
};

struct RaySection {
  std::optional<Domain> domain;  ///< defaults to the model box
  std::vector<RayStart> starts;
  double duration = 1.0;
  double record_step = 0.0;
};

struct TransportSection {
  std::vector<double> lambda_radii;
  double dt = 1e-3;
};

struct DirectSection {
  std::vector<int> nx;      ///< one per level (a single entry applies to all)
  std::vector<double> eps;  ///< one per level
  double cfl = 0.4;
  double t_end = 1.0;
  HeatScheme heat = HeatScheme::CrankNicolson;
  int sample_every = 10;
  std::vector<double> snapshot_times;
  int cell = 8;
  std::optional<Vec> split_direction;  ///< defaults to the first packet direction
  double hf_cutoff = 0.0;              ///< <= 0 disables the column

  int levels() const { return static_cast<int>(eps.size()); }
  int nx_at(int level) const { return nx.size() == 1 ? nx.front() : nx.at(level); }
};

struct WindowSpec {
  std::string name;
  Box box;
  double margin = 0.05;
  double t = 0.0;
};

struct CompareSection {
  std::vector<WindowSpec> windows;
  bool mode_loss = false;
  double max_deviation = 0.10;       ///< windows, at the finest level
  double max_loss_deviation = 0.15;  ///< mode-+ loss, at the finest level
  double trend_slack = 0.0;          ///< allowed relative growth between levels
};

struct Tolerances {
  double transversality = 1e-6;
  double lambda = 1e-10;
  double cg = 1e-10;
  double residual = 1e-9;
  double oracle = 1e-9;
};

struct Scenario {
  int schema = 1;
  std::string name;
  ModelSpec model;
  RegimeKind regime = RegimeKind::WeaklyDegenerate;
  InitialMeasureSpec initial;
  SamplingOptions sampling;
  std::vector<double> times;
  std::optional<SpectrumSection> spectrum;
  std::optional<RaySection> rays;
  std::optional<TransportSection> transport;
  std::optional<DirectSection> direct;
  std::optional<CompareSection> compare;
  Tolerances tolerances;
  std::string output;
  std::uint64_t seed = 0;
};

/// Strict parser: unknown keys, wrong types and a schema other than 1 raise BadScenario.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Model with the regime's singular policy and the scenario tolerances applied.
CoefficientModel build_model(const Scenario& s);

/// Empty when the model fits the declared regime, otherwise the reason.
std::string regime_mismatch(const Scenario& s, const CoefficientModel& model);

}  // namespace thermoray
