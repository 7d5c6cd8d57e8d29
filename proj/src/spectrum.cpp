#include "thermoray/spectrum.hpp"

#include "thermoray/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thermoray {

namespace {

constexpr cdouble I{0.0, 1.0};

/// Real root of g(d) = d^3 + 2b d^2 + (b^2 + s) d + b|k|^2, bracketed by 0 and -b|k|^2/s.
double solve_delta(double b, double s, double k2) {
  if (b == 0.0 || k2 == 0.0) return 0.0;
  const double c1 = b * b + s;
  const double c0 = b * k2;
  auto g = [&](double d) { return ((d + 2.0 * b) * d + c1) * d + c0; };
  auto dg = [&](double d) { return (3.0 * d + 4.0 * b) * d + c1; };

  double lo = 0.0, hi = -c0 / s;
  if (lo > hi) std::swap(lo, hi);
  double glo = g(lo);
  double d = -c0 / c1;
  for (int it = 0; it < 200; ++it) {
    const double gd = g(d);
    if (gd == 0.0) return d;
    if ((gd < 0.0) == (glo < 0.0)) {
      lo = d;
      glo = gd;
    } else {
      hi = d;
    }
    const double slope = dg(d);
    double next = slope != 0.0 ? d - gd / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - d);
    d = next;
    if (step <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(d) ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi))) {
      break;
    }
  }
  return d;
}

CVec pm_vector(const SymbolPoint& pt, cdouble nu) {
  const int d = pt.dim();
  CVec v(d + 2);
  const cdouble shifted = nu - pt.b;
  v[0] = nu * shifted;
  v.segment(1, d) = (I * shifted) * pt.xi.cast<cdouble>();
  v[d + 1] = pt.k * nu;
  return v;
}

CVec zero_vector(const SymbolPoint& pt, double nu0) {
  const int d = pt.dim();
  const cdouble kbar = std::conj(pt.k);
  CVec v(d + 2);
  v[0] = -nu0 * kbar;
  v.segment(1, d) = (-I * kbar) * pt.xi.cast<cdouble>();
  v[d + 1] = nu0 * nu0 + pt.xi2;
  return v;
}

CVec unit(CVec v) {
  v.normalize();
  normalize_phase(v);
  return v;
}

}  // namespace

SymbolPoint make_symbol_point(const CoefficientModel& model, const Vec& x, const Vec& xi) {
  SymbolPoint pt;
  pt.x = x;
  pt.xi = xi;
  pt.b2 = -xi.dot(model.B(x) * xi);
  pt.b0 = compute_b0(model, x);
  pt.b = pt.b2 + pt.b0;
  const double gxi = model.gamma(x).dot(xi);
  pt.k1 = -gxi;
  pt.k0 = 0.5 * model.div_gamma(x);
  pt.k = cdouble(pt.k0, pt.k1);
  pt.xi2 = xi.squaredNorm();
  pt.c = std::sqrt(gxi * gxi + pt.xi2);
  return pt;
}

CMat assemble_Q(const SymbolPoint& pt) {
  const int d = pt.dim();
  CMat Q = CMat::Zero(d + 2, d + 2);
  const CVec ixi = I * pt.xi.cast<cdouble>();
  Q.block(0, 1, 1, d) = ixi.transpose();
  Q(0, d + 1) = -std::conj(pt.k);
  Q.block(1, 0, d, 1) = ixi;
  Q(d + 1, 0) = pt.k;
  Q(d + 1, d + 1) = pt.b;
  return Q;
}

CMat assemble_Q(const CoefficientModel& model, const Vec& x, const Vec& xi) {
  return assemble_Q(make_symbol_point(model, x, xi));
}

CMat assemble_P(const SymbolPoint& pt) { return I * assemble_Q(pt); }

Cubic characteristic_cubic(const SymbolPoint& pt) {
  return Cubic{-1.0, pt.b, -(pt.xi2 + pt.k_abs2()), pt.b * pt.xi2};
}

void normalize_phase(CVec& v) {
  const double peak = v.cwiseAbs().maxCoeff();
  if (peak == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m >= (1.0 - 1e-9) * peak) {
      v *= std::conj(v[i]) / m;
      v[i] = m;
      return;
    }
  }
}

std::vector<Vec> orthogonal_basis(const Vec& xi) {
  const int d = static_cast<int>(xi.size());
  const Vec w = xi.normalized();
  std::vector<Vec> basis;
  if (d == 2) {
    Vec e(2);
    e << -w[1], w[0];
    basis.push_back(e);
    return basis;
  }
  Vec seed = Vec::Zero(3);
  seed[std::abs(w[0]) > 0.9 ? 1 : 0] = 1.0;
  Vec e1 = (seed - seed.dot(w) * w).normalized();
  Eigen::Vector3d e2 = Eigen::Vector3d(w).cross(Eigen::Vector3d(e1));
  basis.push_back(e1);
  basis.push_back(Vec(e2));
  return basis;
}

SpectrumResult solve_spectrum(const SymbolPoint& pt, const SpectrumOptions& opts) {
  if (pt.xi2 == 0.0) throw Error(ErrorKind::DegenerateSpectrum, "xi = 0");
  const double s = pt.xi2 + pt.k_abs2();
  SpectrumResult r;
  r.delta = solve_delta(pt.b, s, pt.k_abs2());
  r.nu0 = pt.b + r.delta;
  const double beta2 = s + r.nu0 * r.delta - 0.25 * r.delta * r.delta;
  if (!(beta2 > opts.pattern_tol * s)) {
    throw Error(ErrorKind::DegenerateSpectrum,
                "characteristic cubic has three real roots at |xi| = " + std::to_string(std::sqrt(pt.xi2)));
  }
  r.alpha = -0.5 * r.delta;
  r.beta = std::sqrt(beta2);
  r.nu_plus = cdouble(r.alpha, -r.beta);
  r.nu_minus = std::conj(r.nu_plus);
  r.lambda0 = I * r.nu0;
  r.lambda_plus = I * r.nu_plus;
  r.lambda_minus = I * r.nu_minus;

  r.V0 = unit(zero_vector(pt, r.nu0));
  r.Vplus = unit(pm_vector(pt, r.nu_plus));
  r.Vminus = unit(pm_vector(pt, r.nu_minus));
  const int d = pt.dim();
  for (const Vec& e : orthogonal_basis(pt.xi)) {
    CVec v = CVec::Zero(d + 2);
    v.segment(1, d) = e.cast<cdouble>();
    r.kernel_basis.push_back(std::move(v));
  }

  const CMat Q = assemble_Q(pt);
  r.max_residual = std::max({(Q * r.V0 - r.nu0 * r.V0).norm(),
                             (Q * r.Vplus - r.nu_plus * r.Vplus).norm(),
                             (Q * r.Vminus - r.nu_minus * r.Vminus).norm()});
  if (!(r.max_residual <= opts.residual_tol * (1.0 + pt.xi2))) {
    throw Error(ErrorKind::NumericalBreakdown,
                "eigen-residual " + std::to_string(r.max_residual) + " exceeds tolerance");
  }
  return r;
}

R0Estimate estimate_R0(const CoefficientModel& model, const R0Options& opts) {
  const int d = model.dim();
  std::vector<Vec> dirs;
  if (d == 2) {
    for (int j = 0; j < opts.directions; ++j) {
      const double a = M_PI * j / opts.directions;
      Vec w(2);
      w << std::cos(a), std::sin(a);
      dirs.push_back(w);
    }
  } else {
    // Fibonacci sphere, upper hemisphere suffices since the cubic is even in xi.
    const int n = 2 * opts.directions;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < n; ++j) {
      const double z = 1.0 - (j + 0.5) / n;
      const double rho = std::sqrt(1.0 - z * z);
      Vec w(3);
      w << rho * std::cos(golden * j), rho * std::sin(golden * j), z;
      dirs.push_back(w);
    }
  }
  const int n_r = static_cast<int>(std::ceil(std::log10(opts.r_max / opts.r_min) * opts.per_decade)) + 1;
  std::vector<double> radii(n_r);
  for (int i = 0; i < n_r; ++i) {
    radii[i] = opts.r_min * std::pow(10.0, static_cast<double>(i) / opts.per_decade);
  }

  R0Estimate est;
  int last_bad = -1;
  for (const Vec& x : sample_grid(model.domain(), opts.samples_per_axis)) {
    for (const Vec& w : dirs) {
      // Radii at or below the current worst failure are already condemned.
      for (int i = n_r - 1; i > last_bad; --i) {
        const SymbolPoint pt = make_symbol_point(model, x, radii[i] * w);
        const double s = pt.xi2 + pt.k_abs2();
        const double delta = solve_delta(pt.b, s, pt.k_abs2());
        const double beta2 = s + (pt.b + delta) * delta - 0.25 * delta * delta;
        if (!(beta2 > SpectrumOptions{}.pattern_tol * s)) {
          last_bad = i;
          break;
        }
      }
    }
  }
  if (last_bad == n_r - 1) {
    est.stabilized = false;
    est.R0 = radii.back();
    est.worst_radius = radii.back();
    return est;
  }
  est.worst_radius = last_bad >= 0 ? radii[last_bad] : 0.0;
  est.R0 = opts.safety * radii[last_bad + 1];
  return est;
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::Lambda0Off: return "lambda0_off";
    case Branch::AlphaOff: return "alpha_off";
    case Branch::BetaOff: return "beta_off";
    case Branch::Lambda0On: return "lambda0_on";
    case Branch::AlphaOn: return "alpha_on";
    case Branch::BetaOn: return "beta_on";
    case Branch::V0: return "V0";
    case Branch::Vpm: return "Vpm";
  }
  return "unknown";
}

double loglog_slope(const std::vector<double>& r, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) continue;
    const double lx = std::log(r[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

bool AsymptoticFit::passes(double max_slope) const {
  for (double v : residuals) {
    if (!std::isfinite(v)) return false;
  }
  if (exact) return true;
  return predicted_order < 0 ? slope <= max_slope : slope <= 0.1;
}

std::vector<AsymptoticFit> asymptotic_residuals(const CoefficientModel& model, const Vec& x,
                                                const Vec& omega, const std::vector<double>& radii) {
  if (radii.size() < 2) throw Error(ErrorKind::BadSpec, "asymptotic fits need at least two radii");
  for (std::size_t i = 1; i < radii.size(); ++i) {
    if (!(radii[i] > radii[i - 1])) throw Error(ErrorKind::BadSpec, "radii must increase strictly");
  }
  const Vec w = omega.normalized();
  const bool on = lambda_membership(model, x, w).member;
  const int d = model.dim();

  std::vector<Branch> branches;
  if (on) {
    branches = {Branch::Lambda0On, Branch::AlphaOn, Branch::BetaOn, Branch::V0, Branch::Vpm};
  } else {
    branches = {Branch::Lambda0Off, Branch::AlphaOff, Branch::BetaOff, Branch::V0, Branch::Vpm};
  }
  std::vector<AsymptoticFit> fits(branches.size());
  for (std::size_t j = 0; j < branches.size(); ++j) {
    fits[j].branch = branches[j];
    fits[j].radii = radii;
    fits[j].predicted_order = (branches[j] == Branch::BetaOn || branches[j] == Branch::BetaOff) ? 0 : -1;
  }

  auto overlap_defect = [](const CVec& a, const CVec& b) {
    return std::max(0.0, 1.0 - std::abs(a.dot(b)) / (a.norm() * b.norm()));
  };

  for (double R : radii) {
    const SymbolPoint pt = make_symbol_point(model, x, R * w);
    const SpectrumResult sp = solve_spectrum(pt);
    const double gxi = -pt.k1;
    const double xi_norm = std::sqrt(pt.xi2);
    const Vec xhat = pt.xi / xi_norm;
    CVec a0 = CVec::Zero(d + 2), ap = CVec::Zero(d + 2), am = CVec::Zero(d + 2);
    std::vector<double> res(branches.size());
    if (on) {
      const double c2 = pt.c * pt.c;
      res[0] = std::abs(sp.nu0 - pt.b0 * pt.xi2 / c2);
      res[1] = std::abs(sp.alpha - 0.5 * pt.b0 * gxi * gxi / c2);
      res[2] = std::abs(sp.beta - pt.c);
      a0.segment(1, d) = ((gxi / pt.c) * xhat).cast<cdouble>();
      a0[d + 1] = xi_norm / pt.c;
      ap[0] = am[0] = -1.0 / std::sqrt(2.0);
      ap.segment(1, d) = (pt.xi / (pt.c * std::sqrt(2.0))).cast<cdouble>();
      am.segment(1, d) = -ap.segment(1, d);
      ap[d + 1] = -gxi / (pt.c * std::sqrt(2.0));
      am[d + 1] = -ap[d + 1];
    } else {
      const double xbx = -pt.b2;
      // nu0 - b = delta, so the lambda0 expansion reduces to delta ~ k1^2 / (xi.B xi).
      res[0] = std::abs(sp.delta - pt.k1 * pt.k1 / xbx);
      res[1] = std::abs(sp.alpha + 0.5 * gxi * gxi / xbx);
      res[2] = std::abs(sp.beta - xi_norm);
      a0[d + 1] = 1.0;
      const cdouble f = I / std::sqrt(2.0);
      ap[0] = -f;
      am[0] = f;
      ap.segment(1, d) = f * xhat.cast<cdouble>();
      am.segment(1, d) = ap.segment(1, d);
    }
    res[3] = overlap_defect(sp.V0, a0);
    res[4] = std::max(overlap_defect(sp.Vplus, ap), overlap_defect(sp.Vminus, am));
    for (std::size_t j = 0; j < branches.size(); ++j) fits[j].residuals.push_back(res[j]);
  }
  for (auto& fit : fits) {
    fit.slope = loglog_slope(fit.radii, fit.residuals);
    fit.exact = std::isnan(fit.slope);
  }
  return fits;
}

CMat projector(Mode mode, const SpectrumResult& spec) {
  const CVec& v = mode == Mode::Zero ? spec.V0 : (mode == Mode::Plus ? spec.Vplus : spec.Vminus);
  return v * v.adjoint();
}

CMat projector(Mode mode, const SymbolPoint& pt) { return projector(mode, solve_spectrum(pt)); }

}  // namespace thermoray
