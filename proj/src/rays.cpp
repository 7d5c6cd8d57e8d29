#include "thermoray/rays.hpp"

#include "thermoray/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace thermoray {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

class SegmentIntegrator {
 public:
  SegmentIntegrator(const CoefficientModel& model, const Vec& x0, const Vec& v, const Vec& omega,
                    const QuadratureOptions& opts, double total_length)
      : model_(model), x0_(x0), v_(v), omega_(omega), opts_(opts), total_(total_length),
        clamp_(model.singular_policy() == SingularPolicy::Divergent) {}

  double F(double s) const { return damping_integrand(model_, x0_ + s * v_, omega_); }

  double adaptive(double a, double b) {
    if (divergent_) return kInf;
    return refine(a, b, 0);
  }

  bool divergent() const { return divergent_; }

 private:
  double refine(double a, double b, int depth) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double fc = F(c);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
      const double dx = h * kXgk[j];
      const double f1 = F(c - dx), f2 = F(c + dx);
      kronrod += kWgk[j] * (f1 + f2);
      if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
    }
    kronrod *= h;
    gauss *= h;
    if (!std::isfinite(kronrod) || (clamp_ && kronrod > opts_.divergence_cap)) {
      divergent_ = true;
      return kInf;
    }
    const double err = std::abs(kronrod - gauss);
    const double tol = std::max(opts_.abs_tol * (b - a) / total_, opts_.rel_tol * std::abs(kronrod));
    if (err <= tol || depth >= opts_.max_depth || b - a <= 1e-15 * total_) return kronrod;
    const double left = refine(a, c, depth + 1);
    if (divergent_) return kInf;
    const double right = refine(c, b, depth + 1);
    if (divergent_) return kInf;
    return left + right;
  }

  const CoefficientModel& model_;
  Vec x0_, v_, omega_;
  const QuadratureOptions& opts_;
  double total_;
  bool clamp_;
  bool divergent_ = false;
};

/// Zeros of the level function along x0 + s v for s in [a, b].
std::vector<double> sigma_breakpoints(const CoefficientModel& model, const Vec& x0, const Vec& v,
                                      double a, double b, int samples) {
  std::vector<double> out;
  auto f = [&](double s) { return model.sigma(x0 + s * v); };
  double sa = a, fa = f(a);
  for (int i = 1; i <= samples; ++i) {
    const double sb = a + (b - a) * i / samples;
    const double fb = f(sb);
    if (fa == 0.0) {
      out.push_back(sa);
    } else if (fa * fb < 0.0) {
      double lo = sa, hi = sb, flo = fa;
      for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    sa = sb;
    fa = fb;
  }
  if (fa == 0.0) out.push_back(b);
  return out;
}

std::vector<Vec> box_wall_normals(const Box& box, const Vec& x) {
  const double tol = 1e-9 * box.max_extent();
  std::vector<Vec> walls;
  for (int j = 0; j < box.dim(); ++j) {
    Vec n = Vec::Zero(box.dim());
    if (std::abs(x[j] - box.hi[j]) <= tol) {
      n[j] = 1.0;
      walls.push_back(n);
    } else if (std::abs(x[j] - box.lo[j]) <= tol) {
      n[j] = -1.0;
      walls.push_back(n);
    }
  }
  return walls;
}

}  // namespace

std::string_view to_string(WaveMode m) {
  switch (m) {
    case WaveMode::Plus: return "+";
    case WaveMode::Minus: return "-";
    case WaveMode::Temp: return "temp";
  }
  return "?";
}

WaveMode wave_mode_from_string(std::string_view s) {
  if (s == "+" || s == "plus") return WaveMode::Plus;
  if (s == "-" || s == "minus") return WaveMode::Minus;
  if (s == "temp" || s == "0") return WaveMode::Temp;
  throw Error(ErrorKind::BadSpec, "unknown mode '" + std::string(s) + "'");
}

double mode_sign(WaveMode m) {
  switch (m) {
    case WaveMode::Plus: return 1.0;
    case WaveMode::Minus: return -1.0;
    case WaveMode::Temp: return 0.0;
  }
  return 0.0;
}

double DampedRay::weight() const { return std::exp(log_weight); }

double damping_integrand(const CoefficientModel& model, const Vec& x, const Vec& omega) {
  const double den = omega.dot(model.B(x) * omega);
  const double g = model.gamma(x).dot(omega);
  if (den <= model.tol_lambda()) {
    if (model.singular_policy() == SingularPolicy::ContinuousExtension || g == 0.0) return 0.0;
    return kInf;
  }
  return g * g / den;
}

double damping_integral(const CoefficientModel& model, const Vec& x0, const Vec& v, const Vec& omega,
                        double a, double b, const QuadratureOptions& opts) {
  if (b < a) throw Error(ErrorKind::BadSpec, "damping interval reversed");
  if (b == a) return 0.0;
  SegmentIntegrator integ(model, x0, v, omega, opts, b - a);
  std::vector<double> cuts{a};
  if (model.has_sigma()) {
    for (double s : sigma_breakpoints(model, x0, v, a, b, opts.crossing_samples)) {
      if (s > cuts.back()) cuts.push_back(s);
    }
  } else {
    for (int i = 1; i < opts.fallback_panels; ++i) cuts.push_back(a + (b - a) * i / opts.fallback_panels);
  }
  if (b > cuts.back()) cuts.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += integ.adaptive(cuts[i], cuts[i + 1]);
    if (integ.divergent()) return kInf;
  }
  return total;
}

DampedRay accumulate_damping(const CoefficientModel& model, const DampedRay& ray, double t,
                             const QuadratureOptions& opts) {
  if (t < 0.0) throw Error(ErrorKind::BadSpec, "negative duration");
  DampedRay out = ray;
  out.s = ray.s + t;
  const double slack = 1e-9 * model.domain().max_extent();
  if (!model.domain().contains(ray.position(), slack) || !model.domain().contains(out.position(), slack)) {
    throw Error(ErrorKind::LeftDomain, "straight segment leaves the domain");
  }
  if (ray.mode == WaveMode::Temp) throw Error(ErrorKind::BadSpec, "temperature atoms do not travel");
  if (std::isinf(ray.log_weight) && ray.log_weight < 0) return out;
  const Vec v = mode_sign(ray.mode) * ray.omega;
  const double integral = damping_integral(model, ray.x0, v, ray.omega, ray.s, out.s, opts);
  out.log_weight = std::isinf(integral) ? -kInf : ray.log_weight - integral;
  return out;
}

double hamiltonian_c(const CoefficientModel& model, const Vec& x, const Vec& xi) {
  const double g = model.gamma(x).dot(xi);
  return std::sqrt(g * g + xi.squaredNorm());
}

InducedField hamiltonian_induced_field(const CoefficientModel& model, const Vec& x, const Vec& omega) {
  const Vec gamma = model.gamma(x);
  const double g = gamma.dot(omega);
  const double c = std::sqrt(g * g + omega.squaredNorm());
  const Vec grad_x = (g / c) * (model.gamma_jacobian(x).transpose() * omega);
  InducedField f;
  f.dx = (g * gamma + omega) / c;
  f.domega = -grad_x + omega.dot(grad_x) * omega;
  return f;
}

double DistortedRay::c_current(const CoefficientModel& model) const {
  return std::exp(log_scale) * hamiltonian_c(model, x, omega);
}

DistortedRay advance_distorted(const CoefficientModel& model, const DistortedRay& ray, double t,
                               double dt) {
  if (t < 0.0 || !(dt > 0.0)) throw Error(ErrorKind::BadSpec, "advance_distorted needs t >= 0, dt > 0");
  if (ray.mode == WaveMode::Temp) throw Error(ErrorKind::BadSpec, "temperature atoms do not travel");
  DistortedRay r = ray;
  r.omega = ray.omega.normalized();
  if (r.c_start == 0.0) r.c_start = r.c_current(model);
  if (!model.in_distorted_region(r.x, r.omega)) {
    throw Error(ErrorKind::LeftPatch, "distorted ray starts outside the degenerate patch");
  }
  if (t == 0.0) return r;
  const double sign = mode_sign(ray.mode);
  const int d = model.dim();

  // State y = (x, omega, log|xi|).
  auto rhs = [&](const Vec& y) {
    const Vec x = y.head(d), w = y.segment(d, d);
    const InducedField f = hamiltonian_induced_field(model, x, w);
    const Vec gamma = model.gamma(x);
    const double g = gamma.dot(w);
    const double c = std::sqrt(g * g + w.squaredNorm());
    const Vec grad_x = (g / c) * (model.gamma_jacobian(x).transpose() * w);
    Vec out(2 * d + 1);
    out.head(d) = sign * f.dx;
    out.segment(d, d) = sign * f.domega;
    out[2 * d] = -sign * w.dot(grad_x);
    return out;
  };

  const int steps = std::max(1, static_cast<int>(std::ceil(t / dt * (1.0 - 1e-12))));
  const double h = t / steps;
  Vec y(2 * d + 1);
  y << r.x, r.omega, r.log_scale;
  for (int i = 0; i < steps; ++i) {
    const Vec k1 = rhs(y);
    const Vec k2 = rhs(y + 0.5 * h * k1);
    const Vec k3 = rhs(y + 0.5 * h * k2);
    const Vec k4 = rhs(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    y.segment(d, d).normalize();
    r.x = y.head(d);
    r.omega = y.segment(d, d);
    r.log_scale = y[2 * d];
    r.s += h;
    if (!model.in_distorted_region(r.x, r.omega)) {
      throw Error(ErrorKind::LeftPatch, "distorted ray left the degenerate patch at s = " + std::to_string(r.s));
    }
    r.c_drift_max = std::max(r.c_drift_max, std::abs(r.c_current(model) - r.c_start) / r.c_start);
  }
  return r;
}

std::string_view to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::Elliptic: return "elliptic";
    case BoundaryClass::Hyperbolic: return "hyperbolic";
    case BoundaryClass::Glancing: return "glancing";
    case BoundaryClass::Diffractive: return "diffractive";
  }
  return "?";
}

BoundaryEvent classify_boundary(const Domain& domain, const Vec& hit, const Vec& xi, double tol_g) {
  BoundaryEvent ev;
  ev.hit = hit;
  ev.xi_in = xi;
  ev.normal = outward_normal(domain, hit, &ev.corner);
  if (const auto* box = std::get_if<Box>(&domain)) {
    ev.wall_normals = box_wall_normals(*box, hit);
    if (ev.wall_normals.empty()) ev.wall_normals.push_back(ev.normal);
  } else {
    ev.wall_normals.push_back(ev.normal);
  }
  const double xi_norm = xi.norm();
  ev.normal_component = xi.dot(ev.normal) / xi_norm;

  // r(y) = tau^2 - eta^2 / (1 - kappa y)^2 along the inward normal, tau = |xi|.
  const double kappa = boundary_curvature(domain, hit);
  const double eta2 = std::max(0.0, xi.squaredNorm() - std::pow(xi.dot(ev.normal), 2));
  auto r = [&](double y) { return xi.squaredNorm() - eta2 / std::pow(1.0 - kappa * y, 2); };
  const double hy = 1e-6 / std::max(1.0, std::abs(kappa));
  ev.dr_normal = (r(hy) - r(-hy)) / (2.0 * hy);

  Vec out = xi;
  bool reflected = false;
  for (const Vec& n : ev.wall_normals) {
    const double xn = xi.dot(n);
    if (std::abs(xn) > tol_g * xi_norm) {
      out -= 2.0 * xn * n;
      reflected = true;
    }
  }
  if (reflected) {
    ev.classification = BoundaryClass::Hyperbolic;
    ev.xi_out = out;
  } else {
    ev.classification = ev.dr_normal > 0.0 ? BoundaryClass::Diffractive : BoundaryClass::Glancing;
  }
  return ev;
}

Reflection reflect_hyperbolic(const BoundaryEvent& event) {
  if (event.classification != BoundaryClass::Hyperbolic || !event.xi_out) {
    throw Error(ErrorKind::NotHyperbolic,
                "cannot reflect a " + std::string(to_string(event.classification)) + " boundary point");
  }
  return Reflection{event.hit, *event.xi_out};
}

RayTrace trace_damped(const CoefficientModel& model, const Domain& domain, const DampedRay& start,
                      double duration, const TraceOptions& opts) {
  RayTrace tr;
  DampedRay ray = start;
  ray.omega = start.omega.normalized();
  double elapsed = 0.0;
  const double sign = mode_sign(ray.mode);
  if (sign == 0.0) throw Error(ErrorKind::BadSpec, "temperature atoms do not travel");
  double scale = 1.0;
  if (const auto* box = std::get_if<Box>(&domain)) scale = box->max_extent();
  if (const auto* disk = std::get_if<Disk>(&domain)) scale = 2.0 * disk->radius;

  auto record = [&](unsigned flags) {
    if (std::isinf(ray.log_weight)) flags |= kFlagDamped;
    tr.points.push_back(TracePoint{elapsed, ray.position(), ray.omega, ray.log_weight, flags});
  };
  auto halt_glancing = [&](const BoundaryEvent& ev) {
    tr.halted = true;
    tr.diagnostic = std::string(to_string(ev.classification)) + " boundary point at s = " +
                    std::to_string(elapsed) + "; continuation along the boundary is not modelled";
    unsigned flags = kFlagGlancing;
    if (ev.classification == BoundaryClass::Diffractive) flags |= kFlagDiffractive;
    record(flags | kFlagEnd);
  };

  record(kFlagNone);
  if (distance_to_boundary(domain, ray.position()) <= 1e-12 * scale) {
    BoundaryEvent ev = classify_boundary(domain, ray.position(), ray.omega, opts.tol_g);
    if (ev.classification != BoundaryClass::Hyperbolic) {
      tr.events.push_back(ev);
      halt_glancing(ev);
      tr.final_ray = ray;
      tr.elapsed = elapsed;
      return tr;
    }
  }

  // Advances along the current segment by dt, recording samples every record_step.
  auto advance = [&](double dt) {
    double done = 0.0;
    while (done < dt) {
      double piece = dt - done;
      if (opts.record_step > 0.0) piece = std::min(piece, opts.record_step);
      ray = accumulate_damping(model, ray, piece, opts.quadrature);
      done += piece;
      elapsed += piece;
      if (opts.record_step > 0.0 && done < dt) record(kFlagNone);
    }
  };

  int reflections = 0;
  while (elapsed < duration) {
    const double remaining = duration - elapsed;
    const auto ex = exit_time(domain, ray.position(), sign * ray.omega);
    if (!ex || *ex >= remaining) {
      advance(remaining);
      break;
    }
    advance(*ex);
    const Vec hit = ray.position();
    BoundaryEvent ev = classify_boundary(domain, hit, ray.omega, opts.tol_g);
    tr.events.push_back(ev);
    if (std::abs(model.B(hit).determinant()) <= model.tol_lambda()) {
      throw Error(ErrorKind::BadSpec, "straight ray meets the boundary inside {det B = 0}");
    }
    if (ev.classification != BoundaryClass::Hyperbolic) {
      halt_glancing(ev);
      tr.final_ray = ray;
      tr.elapsed = elapsed;
      return tr;
    }
    const Reflection out = reflect_hyperbolic(ev);
    ray = DampedRay{ray.mode, out.x, out.xi.normalized(), 0.0, ray.log_weight};
    record(kFlagReflection | (ev.corner ? kFlagCorner : 0u));
    if (++reflections > opts.max_reflections) {
      tr.halted = true;
      tr.diagnostic = "reflection limit reached";
      break;
    }
  }
  record(kFlagEnd);
  tr.final_ray = ray;
  tr.elapsed = elapsed;
  return tr;
}

}  // namespace thermoray
