#include "thermoray/transport.hpp"

#include "thermoray/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace thermoray {

double ParticleMeasure::total_mass() const {
  double s = 0.0;
  for (const Atom& a : atoms) s += a.weight;
  return s;
}

double ParticleMeasure::mass(WaveMode mode) const {
  double s = 0.0;
  for (const Atom& a : atoms) {
    if (a.mode == mode) s += a.weight;
  }
  return s;
}

ModeBalance ModeBalance::mixed(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorKind::BadSpec, "mixed balance must lie in [0, 1]");
  }
  return {lambda};
}

ModeBalance ModeBalance::parse(const std::string& text) {
  if (text == "pure+") return pure_plus();
  if (text == "pure-") return pure_minus();
  if (text.rfind("mixed(", 0) == 0 && text.back() == ')') {
    const std::string inner = text.substr(6, text.size() - 7);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(inner, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == inner.size() && !inner.empty()) return mixed(v);
  }
  throw Error(ErrorKind::BadSpec, "mode balance '" + text + "' is not pure+, pure- or mixed(lambda)");
}

double WavePacket::amplitude(const Vec& x) const {
  const int d = static_cast<int>(x.size());
  if (envelope == Envelope::Gaussian) {
    // int A^2 exp(-|y|^2 / sigma^2) dy = A^2 (pi sigma^2)^{d/2}
    const double A = std::sqrt(mass / std::pow(M_PI * width * width, 0.5 * d));
    return A * std::exp(-(x - center).squaredNorm() / (2.0 * width * width));
  }
  if ((x - center).cwiseAbs().maxCoeff() > width) return 0.0;
  return std::sqrt(mass / std::pow(2.0 * width, d));
}

double WavePacket::support_radius() const { return envelope == Envelope::Gaussian ? 4.0 * width : width; }

std::pair<ParticleMeasure, ParticleMeasure> init_plus_minus(const InitialMeasureSpec& spec,
                                                            const SamplingOptions& opts) {
  ParticleMeasure plus, minus;
  std::int64_t next_id = 0;
  std::mt19937_64 rng(opts.seed);
  for (const WavePacket& p : spec.packets) {
    if (!(p.width > 0.0) || !(p.mass >= 0.0)) throw Error(ErrorKind::BadSpec, "packet width/mass invalid");
    const int d = static_cast<int>(p.center.size());
    if (p.omega0.size() != d || p.omega0.norm() == 0.0) throw Error(ErrorKind::BadSpec, "packet direction invalid");
    const Vec w = p.omega0.normalized();
    const double R = p.support_radius();

    std::vector<Vec> pts;
    if (opts.random) {
      std::uniform_real_distribution<double> u(-R, R);
      for (int i = 0; i < opts.random_count; ++i) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = p.center[j] + u(rng);
        pts.push_back(std::move(x));
      }
    } else {
      const int n = opts.per_axis;
      int total = 1;
      for (int j = 0; j < d; ++j) total *= n;
      for (int flat = 0; flat < total; ++flat) {
        Vec x(d);
        int rest = flat;
        for (int j = 0; j < d; ++j) {
          const int i = rest % n;
          rest /= n;
          x[j] = p.center[j] - R + (2.0 * R) * (i + 0.5) / n;
        }
        pts.push_back(std::move(x));
      }
    }
    std::vector<double> raw(pts.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double a = p.amplitude(pts[i]);
      raw[i] = a * a;
      sum += raw[i];
    }
    if (sum <= 0.0) throw Error(ErrorKind::BadSpec, "packet sampling found no support");
    const double scale = p.mass / sum;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double wgt = raw[i] * scale;
      plus.atoms.push_back(Atom{next_id, pts[i], w, wgt * p.balance.plus_fraction, WaveMode::Plus});
      minus.atoms.push_back(Atom{next_id, pts[i], w, wgt * (1.0 - p.balance.plus_fraction), WaveMode::Minus});
      ++next_id;
    }
  }
  for (Atom a : spec.atoms) {
    if (a.weight < 0.0) throw Error(ErrorKind::BadSpec, "explicit atom with negative weight");
    a.omega.normalize();
    a.id = next_id++;
    if (a.mode == WaveMode::Minus) {
      minus.atoms.push_back(std::move(a));
    } else if (a.mode == WaveMode::Plus) {
      plus.atoms.push_back(std::move(a));
    } else {
      throw Error(ErrorKind::BadSpec, "temperature atoms belong to the degenerate-patch measure");
    }
  }
  return {std::move(plus), std::move(minus)};
}

TildeMeasures tilde_initial_measures(const CMat& M, const Vec& x, const Vec& omega,
                                     const CoefficientModel& model, double psd_tol) {
  const int d = model.dim();
  if (M.rows() != d + 2 || M.cols() != d + 2) throw Error(ErrorKind::BadSpec, "M must be (d+2)x(d+2)");
  const CMat H = 0.5 * (M + M.adjoint());
  Eigen::SelfAdjointEigenSolver<CMat> eig(H, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if ((M - M.adjoint()).norm() > psd_tol * scale || eig.eigenvalues().minCoeff() < -psd_tol * scale) {
    throw Error(ErrorKind::NotPSD, "M is not hermitian positive semidefinite");
  }
  const Vec w = omega.normalized();
  const double g = model.gamma(x).dot(w);
  const double c2 = g * g + 1.0;
  const double c = std::sqrt(c2);
  CVec v0 = CVec::Zero(d + 2), vp(d + 2), vm(d + 2);
  v0.segment(1, d) = (g * w).cast<cdouble>();
  v0[d + 1] = 1.0;
  vp[0] = c;
  vm[0] = -c;
  vp.segment(1, d) = (-w).cast<cdouble>();
  vm.segment(1, d) = (-w).cast<cdouble>();
  vp[d + 1] = vm[d + 1] = g;
  auto q = [&](const CVec& v) { return v.dot(H * v).real(); };
  return TildeMeasures{q(v0) / c2, q(vp) / (2.0 * c2), q(vm) / (2.0 * c2)};
}

ParticleMeasure push_forward_damped(const ParticleMeasure& mu, double t, const CoefficientModel& model,
                                    const PushOptions& opts) {
  ParticleMeasure out;
  out.t = mu.t + t;
  out.atoms.reserve(mu.atoms.size());
  TraceOptions topts;
  topts.quadrature = opts.quadrature;
  for (const Atom& a : mu.atoms) {
    if (a.mode == WaveMode::Temp) {
      throw Error(ErrorKind::BadSpec, "temperature atoms have no damped transport law");
    }
    DampedRay ray{a.mode, a.x, a.omega, 0.0, 0.0};
    DampedRay end;
    if (opts.domain) {
      const RayTrace tr = trace_damped(model, *opts.domain, ray, t, topts);
      if (tr.halted) {
        throw Error(ErrorKind::NotHyperbolic, "atom " + std::to_string(a.id) + ": " + tr.diagnostic);
      }
      end = tr.final_ray;
    } else {
      end = accumulate_damping(model, ray, t, opts.quadrature);
    }
    Atom moved = a;
    moved.x = end.position();
    moved.omega = end.omega;
    moved.weight = a.weight == 0.0 ? 0.0 : a.weight * end.weight();
    out.atoms.push_back(std::move(moved));
  }
  return out;
}

std::pair<ParticleMeasure, ParticleMeasure> push_forward_distorted(const ParticleMeasure& mu,
                                                                   const ParticleMeasure& nu0, double t,
                                                                   const CoefficientModel& model,
                                                                   const PushOptions& opts) {
  ParticleMeasure out;
  out.t = mu.t + t;
  out.atoms.reserve(mu.atoms.size());
  for (const Atom& a : mu.atoms) {
    if (a.mode == WaveMode::Temp) throw Error(ErrorKind::BadSpec, "temperature atoms belong to nu0");
    const DistortedRay r = advance_distorted(model, DistortedRay{a.mode, a.x, a.omega}, t, opts.dt);
    Atom moved = a;
    moved.x = r.x;
    moved.omega = r.omega;
    out.atoms.push_back(std::move(moved));
  }
  ParticleMeasure frozen = nu0;
  frozen.t = out.t;
  return {std::move(out), std::move(frozen)};
}

double pair(const ParticleMeasure& mu, const Observable& obs) {
  double s = 0.0;
  for (const Atom& a : mu.atoms) {
    if (a.weight == 0.0) continue;
    const double av = obs.a ? obs.a(a.x, a.omega) : 1.0;
    const double pv = obs.phi ? obs.phi(a.x) : 1.0;
    s += a.weight * av * pv;
  }
  return s;
}

double pair(const ParticleMeasure& mu, const Observable& obs, const CoefficientModel& model, Regime regime) {
  if (obs.phi && !obs.phi_support) {
    throw Error(ErrorKind::SupportViolation, "observable '" + obs.name + "' has a cutoff without a declared support");
  }
  const Box support = obs.phi_support.value_or(model.domain());
  const auto samples = sample_grid(support, 65);
  if (regime == Regime::Damped) {
    const bool use_sigma = model.has_sigma();
    double sign = 0.0;
    for (const Vec& x : samples) {
      bool bad = false;
      if (use_sigma) {
        const double f = model.sigma(x);
        bad = f == 0.0 || (sign != 0.0 && (f > 0.0) != (sign > 0.0));
        if (sign == 0.0) sign = f;
      } else {
        bad = std::abs(model.B(x).determinant()) <= model.tol_lambda();
      }
      if (bad) {
        throw Error(ErrorKind::SupportViolation,
                    "support of '" + obs.name + "' meets {det B = 0}");
      }
    }
  } else {
    for (const Vec& x : samples) {
      const bool inside = model.zero_patch() ? model.zero_patch()->contains(x)
                                             : model.B(x).cwiseAbs().maxCoeff() <= model.tol_lambda();
      if (!inside) {
        throw Error(ErrorKind::SupportViolation, "support of '" + obs.name + "' leaves the degenerate patch");
      }
    }
  }
  return pair(mu, obs);
}

std::function<double(const Vec&)> smooth_box_cutoff(const Box& inner, double margin) {
  auto ramp = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  auto step = [ramp](double t) {  // 0 for t <= 0, 1 for t >= 1, smooth in between
    const double a = ramp(t), b = ramp(1.0 - t);
    return a / (a + b);
  };
  return [inner, margin, step](const Vec& x) {
    double v = 1.0;
    for (int j = 0; j < inner.dim(); ++j) {
      const double out = std::max(inner.lo[j] - x[j], x[j] - inner.hi[j]);
      if (out <= 0.0) continue;
      if (margin <= 0.0 || out >= margin) return 0.0;
      v *= step(1.0 - out / margin);
    }
    return v;
  };
}

Vec project_to_sigma(const CoefficientModel& model, const Vec& x) {
  Vec y = x;
  for (int it = 0; it < 20; ++it) {
    const double f = model.sigma(y);
    const Vec g = model.sigma_gradient(y);
    const double g2 = g.squaredNorm();
    if (g2 == 0.0) break;
    const Vec step = (f / g2) * g;
    y -= step;
    if (step.norm() <= 1e-15 * std::max(1.0, y.norm())) break;
  }
  return y;
}

double lambda_mass(const ParticleMeasure& mu, const CoefficientModel& model, double tube_radius,
                   double lambda_tol) {
  if (!model.has_sigma()) throw Error(ErrorKind::MissingSigma, "lambda_mass needs a level function");
  const double tol = lambda_tol > 0.0 ? lambda_tol : model.tol_lambda();
  double s = 0.0;
  for (const Atom& a : mu.atoms) {
    if (a.weight == 0.0 || std::abs(model.sigma(a.x)) > tube_radius) continue;
    const Vec foot = project_to_sigma(model, a.x);
    if ((model.B(foot) * a.omega).norm() <= tol) s += a.weight;
  }
  return s;
}

}  // namespace thermoray
