#pragma once

#include "thermoray/rays.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace thermoray {

struct Atom {
  std::int64_t id = 0;
  Vec x;
  Vec omega;
  double weight = 0.0;
  WaveMode mode = WaveMode::Plus;
};

/// Weighted phase-space atoms, kept sorted by id so reductions are reproducible.
struct ParticleMeasure {
  std::vector<Atom> atoms;
  double t = 0.0;

  double total_mass() const;
  double mass(WaveMode mode) const;
  std::size_t size() const { return atoms.size(); }
};

enum class Envelope { Gaussian, FlatBox };

/// Share of the packet energy carried by the + mode.
struct ModeBalance {
  double plus_fraction = 1.0;

  static ModeBalance pure_plus() { return {1.0}; }
  static ModeBalance pure_minus() { return {0.0}; }
  static ModeBalance mixed(double lambda);
  /// Accepts "pure+", "pure-", "mixed(<lambda>)".
  static ModeBalance parse(const std::string& text);
};

/// Real WKB packet u0 = eps a(x) sin((x - center).omega0 / eps). Its energy
/// concentrates on (x, omega0) with total mass int a^2.
struct WavePacket {
  Vec center;
  Vec omega0;
  double width = 0.25;  ///< Gaussian sigma, or half side of the flat box
  Envelope envelope = Envelope::Gaussian;
  double mass = 1.0;    ///< int a^2
  ModeBalance balance;

  /// Envelope amplitude with int a^2 = mass.
  double amplitude(const Vec& x) const;
  /// Half side of the box outside which a is negligible (4 sigma) or zero.
  double support_radius() const;
};

struct InitialMeasureSpec {
  std::vector<WavePacket> packets;
  std::vector<Atom> atoms;  ///< explicit atoms, copied verbatim (mode decides the measure)
};

struct SamplingOptions {
  int per_axis = 41;          ///< midpoint grid per axis
  bool random = false;        ///< seeded uniform sampling instead of the grid
  std::uint64_t seed = 0;
  int random_count = 4096;
};

/// Atoms at (x_j, omega0) with weights a(x_j)^2 dV, rescaled so each packet's
/// total equals its mass, split between the modes by the packet balance.
std::pair<ParticleMeasure, ParticleMeasure> init_plus_minus(const InitialMeasureSpec& spec,
                                                            const SamplingOptions& opts = {});

struct TildeMeasures {
  double nu0 = 0.0;
  double m_plus = 0.0;
  double m_minus = 0.0;
};

/// Gram formulas: nu0 = (M v0|v0)/c^2, m_pm = (M v_pm|v_pm)/(2c^2) with
/// v0 = (0, (gamma.w) w, 1) and v_pm = (pm c, -w, gamma.w). Throws NotPSD.
TildeMeasures tilde_initial_measures(const CMat& M, const Vec& x, const Vec& omega,
                                     const CoefficientModel& model, double psd_tol = 1e-12);

struct PushOptions {
  std::optional<Domain> domain;  ///< reflect on this boundary; otherwise segments must stay inside
  QuadratureOptions quadrature;
  double dt = 1e-3;              ///< distorted-flow step
};

/// Straight transport with multiplicative damping weights. Temperature atoms are
/// rejected: outside the degenerate patch their measure vanishes.
ParticleMeasure push_forward_damped(const ParticleMeasure& mu, double t, const CoefficientModel& model,
                                    const PushOptions& opts = {});

/// Hamiltonian transport inside {B = 0}; + and - atoms move, weights and the
/// temperature measure stay frozen.
std::pair<ParticleMeasure, ParticleMeasure> push_forward_distorted(const ParticleMeasure& mu,
                                                                   const ParticleMeasure& nu0, double t,
                                                                   const CoefficientModel& model,
                                                                   const PushOptions& opts = {});

struct Observable {
  std::string name = "energy";
  std::function<double(const Vec&, const Vec&)> a;  ///< defaults to 1
  std::function<double(double)> chi;                ///< time window (used by time integration)
  std::function<double(const Vec&)> phi;            ///< spatial cutoff, defaults to 1
  std::optional<Box> phi_support;                   ///< closed box containing supp phi
};

enum class Regime { Damped, Distorted };

/// sum_atoms weight a(x, w) phi(x), in id order.
double pair(const ParticleMeasure& mu, const Observable& obs);

/// Same, after checking supp phi avoids {det B = 0} (damped) or lies in the patch (distorted).
double pair(const ParticleMeasure& mu, const Observable& obs, const CoefficientModel& model, Regime regime);

/// Smooth bump equal to 1 on `inner` and 0 outside `inner` grown by `margin`.
std::function<double(const Vec&)> smooth_box_cutoff(const Box& inner, double margin);

/// Mass of atoms within |f(x)| <= tube_radius whose direction lies in Lambda at the
/// foot point on Sigma: ||B(x_Sigma) w|| <= lambda_tol. Throws MissingSigma.
double lambda_mass(const ParticleMeasure& mu, const CoefficientModel& model, double tube_radius,
                   double lambda_tol = -1.0);

/// Closest point on {f = 0} by Newton projection along grad f.
Vec project_to_sigma(const CoefficientModel& model, const Vec& x);

}  // namespace thermoray
