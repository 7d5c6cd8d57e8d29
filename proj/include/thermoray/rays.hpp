#pragma once

#include "thermoray/coefficients.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace thermoray {

enum class WaveMode { Plus, Minus, Temp };

std::string_view to_string(WaveMode m);
WaveMode wave_mode_from_string(std::string_view s);

/// +1 for Plus, -1 for Minus; Temp atoms do not move.
double mode_sign(WaveMode m);

/// Straight unit-speed ray x(s) = x0 + sign(mode) * s * omega on the current segment.
struct DampedRay {
  WaveMode mode = WaveMode::Plus;
  Vec x0;
  Vec omega;
  double s = 0.0;
  double log_weight = 0.0;

  Vec position() const { return x0 + (mode_sign(mode) * s) * omega; }
  double weight() const;
};

struct QuadratureOptions {
  double abs_tol = 1e-13;
  double rel_tol = 1e-12;
  int max_depth = 60;
  /// A local panel integral above this is treated as divergence (weight < e^-cap).
  double divergence_cap = 50.0;
  int fallback_panels = 16;  ///< equal adaptive panels when the model has no level function
  int crossing_samples = 64;
};

/// F(x, w) = (gamma.w)^2 / (w.B w); on w.B w <= tol_Lambda returns 0 under the
/// continuous-extension policy and +inf otherwise.
double damping_integrand(const CoefficientModel& model, const Vec& x, const Vec& omega);

/// Integral of F(x0 + sigma v, omega) over sigma in [a, b]; +inf when divergence is detected.
double damping_integral(const CoefficientModel& model, const Vec& x0, const Vec& v, const Vec& omega,
                        double a, double b, const QuadratureOptions& opts = {});

/// Advances the ray by t along its segment, subtracting the damping integral.
/// Throws LeftDomain when the segment leaves the model box.
DampedRay accumulate_damping(const CoefficientModel& model, const DampedRay& ray, double t,
                             const QuadratureOptions& opts = {});

struct InducedField {
  Vec dx;
  Vec domega;
};

/// c(x, xi) = sqrt((gamma.xi)^2 + |xi|^2).
double hamiltonian_c(const CoefficientModel& model, const Vec& x, const Vec& xi);

/// Field induced by H_c on the unit cosphere bundle.
InducedField hamiltonian_induced_field(const CoefficientModel& model, const Vec& x, const Vec& omega);

/// Hamiltonian-time trajectory on the cosphere bundle. `log_scale` tracks log|xi|
/// so that c(x, xi) = exp(log_scale) * c(x, omega) is the conserved quantity.
struct DistortedRay {
  WaveMode mode = WaveMode::Plus;
  Vec x;
  Vec omega;
  double s = 0.0;
  double log_scale = 0.0;
  double c_start = 0.0;       ///< set on first advance when zero
  double c_drift_max = 0.0;   ///< max relative drift of c(x, xi) seen so far

  double c_current(const CoefficientModel& model) const;
};

/// RK4 with uniform steps no longer than dt, omega renormalized each step. The Minus
/// mode runs the field backwards. Throws LeftPatch when leaving the distorted region.
DistortedRay advance_distorted(const CoefficientModel& model, const DistortedRay& ray, double t,
                               double dt = 1e-3);

enum class BoundaryClass { Elliptic, Hyperbolic, Glancing, Diffractive };

std::string_view to_string(BoundaryClass c);

struct BoundaryEvent {
  Vec hit;
  Vec xi_in;
  Vec normal;  ///< outward unit normal (normalized sum at box corners)
  std::vector<Vec> wall_normals;
  BoundaryClass classification = BoundaryClass::Hyperbolic;
  double normal_component = 0.0;  ///< xi.n / |xi|
  double dr_normal = 0.0;         ///< d r / d y_d at the hit point
  bool corner = false;
  std::optional<Vec> xi_out;
};

/// Hyperbolic iff |xi.n| > tol_g |xi|, else glancing; glancing points with
/// d r / d y_d > 0 are diffractive. r(y_d) = |xi|^2 - eta^2 / (1 - kappa y_d)^2 in
/// boundary normal coordinates, kappa the boundary curvature (0 on flat walls).
BoundaryEvent classify_boundary(const Domain& domain, const Vec& hit, const Vec& xi,
                                double tol_g = 1e-9);

struct Reflection {
  Vec x;
  Vec xi;
};

/// xi_out = xi - 2 (xi.n) n for every wall met (one wall, or two at a box corner).
/// Throws NotHyperbolic for glancing events.
Reflection reflect_hyperbolic(const BoundaryEvent& event);

enum RayFlag : unsigned {
  kFlagNone = 0,
  kFlagReflection = 1u << 0,
  kFlagCorner = 1u << 1,
  kFlagGlancing = 1u << 2,
  kFlagDiffractive = 1u << 3,
  kFlagDamped = 1u << 4,  ///< weight fell to zero
  kFlagEnd = 1u << 5,
};

struct TracePoint {
  double s = 0.0;  ///< total elapsed time
  Vec x;
  Vec omega;
  double log_weight = 0.0;
  unsigned flags = kFlagNone;
};

struct TraceOptions {
  double record_step = 0.0;  ///< additional samples every record_step (0: events only)
  int max_reflections = 100000;
  double tol_g = 1e-9;
  QuadratureOptions quadrature;
};

struct RayTrace {
  std::vector<TracePoint> points;
  std::vector<BoundaryEvent> events;
  DampedRay final_ray;
  double elapsed = 0.0;
  bool halted = false;
  std::string diagnostic;
};

/// Straight damped ray with specular reflections on `domain`; glancing impacts halt
/// the trace with a diagnostic. Hitting the boundary where det B ~ 0 is an error.
RayTrace trace_damped(const CoefficientModel& model, const Domain& domain, const DampedRay& start,
                      double duration, const TraceOptions& opts = {});

}  // namespace thermoray
