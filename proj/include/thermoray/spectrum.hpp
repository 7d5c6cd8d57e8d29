#pragma once

#include "thermoray/coefficients.hpp"

#include <complex>
#include <string_view>
#include <vector>

namespace thermoray {

/// Scalar ingredients of the symbol at one phase-space point.
struct SymbolPoint {
  Vec x;
  Vec xi;
  double b2 = 0.0;   ///< -xi.B xi
  double b0 = 0.0;
  double b = 0.0;    ///< b2 + b0
  double k1 = 0.0;   ///< -gamma.xi
  double k0 = 0.0;   ///< div(gamma) / 2
  cdouble k;         ///< i k1 + k0
  double xi2 = 0.0;  ///< |xi|^2
  double c = 0.0;    ///< sqrt((gamma.xi)^2 + |xi|^2)

  int dim() const { return static_cast<int>(xi.size()); }
  double k_abs2() const { return k1 * k1 + k0 * k0; }
};

SymbolPoint make_symbol_point(const CoefficientModel& model, const Vec& x, const Vec& xi);

/// Q(x, xi) with row/column blocks of sizes (1, d, 1); P = iQ.
CMat assemble_Q(const SymbolPoint& pt);
CMat assemble_Q(const CoefficientModel& model, const Vec& x, const Vec& xi);
CMat assemble_P(const SymbolPoint& pt);

/// f(X) = c3 X^3 + c2 X^2 + c1 X + c0.
struct Cubic {
  double c3 = 0.0, c2 = 0.0, c1 = 0.0, c0 = 0.0;
  cdouble operator()(cdouble z) const { return ((c3 * z + c2) * z + c1) * z + c0; }
};

Cubic characteristic_cubic(const SymbolPoint& pt);

struct SpectrumResult {
  double nu0 = 0.0;
  double delta = 0.0;  ///< nu0 - b, computed without cancellation
  cdouble nu_plus, nu_minus;
  double alpha = 0.0, beta = 0.0;  ///< nu_pm = alpha -/+ i beta
  cdouble lambda0, lambda_plus, lambda_minus;
  CVec V0, Vplus, Vminus;
  std::vector<CVec> kernel_basis;
  double max_residual = 0.0;  ///< max ||Q V - nu V|| over the returned eigenvectors
};

struct SpectrumOptions {
  /// Residual bound relative to (1 + |xi|^2).
  double residual_tol = 1e-9;
  /// beta^2 <= pattern_tol * (|xi|^2 + |k|^2) counts as three real roots.
  double pattern_tol = 1e-12;
};

/// Roots via a safeguarded Newton solve for delta = nu0 - b, then Vieta for the pair.
/// Throws DegenerateSpectrum when the root pattern is not one real + conjugate pair.
SpectrumResult solve_spectrum(const SymbolPoint& pt, const SpectrumOptions& opts = {});

/// Smooth orthonormal basis of xi-perp (d = 2: rotated xi; d = 3: Gram-Schmidt from
/// e1, switching to e2 when |omega.e1| > 0.9).
std::vector<Vec> orthogonal_basis(const Vec& xi);

/// Multiplies v by a unit phase so its first largest-magnitude entry is real positive.
void normalize_phase(CVec& v);

struct R0Estimate {
  double R0 = 0.0;
  bool stabilized = true;
  double worst_radius = 0.0;  ///< largest sampled radius where the pattern failed
};

struct R0Options {
  int samples_per_axis = 9;
  int directions = 16;
  double r_min = 1e-2;
  double r_max = 1e6;
  int per_decade = 8;
  double safety = 2.0;
};

/// Smallest log-grid radius beyond which every sample keeps one real root and a
/// conjugate pair, times a safety factor.
R0Estimate estimate_R0(const CoefficientModel& model, const R0Options& opts = {});

enum class Branch { Lambda0Off, AlphaOff, BetaOff, Lambda0On, AlphaOn, BetaOn, V0, Vpm };

std::string_view to_string(Branch b);

struct AsymptoticFit {
  Branch branch = Branch::Lambda0Off;
  std::vector<double> radii;
  std::vector<double> residuals;
  double slope = 0.0;           ///< least-squares log-log slope over positive residuals
  bool exact = false;           ///< fewer than two positive residuals, no slope
  int predicted_order = -1;     ///< -1 for O(|xi|^-1) claims, 0 for bounded claims

  /// Decay branches need slope <= max_slope; bounded branches need slope <= 0.1.
  bool passes(double max_slope = -0.9) const;
};

/// Residuals between exact spectral data and the leading large-|xi| expansions on
/// the ray xi = R omega. Selects on- or off-Lambda formulas from (x, omega).
std::vector<AsymptoticFit> asymptotic_residuals(const CoefficientModel& model, const Vec& x,
                                                const Vec& omega, const std::vector<double>& radii);

double loglog_slope(const std::vector<double>& r, const std::vector<double>& y);

enum class Mode { Zero, Plus, Minus };

/// V_k (x) conj(V_k) with unit V_k.
CMat projector(Mode mode, const SymbolPoint& pt);
CMat projector(Mode mode, const SpectrumResult& spec);

}  // namespace thermoray
