#include "thermoray/presets.hpp"

#include "thermoray/error.hpp"

#include <cmath>

namespace thermoray {

namespace {

Box default_box(int d, double half = 2.0) {
  return Box{Vec::Constant(d, -half), Vec::Constant(d, half)};
}

struct Power {
  int p;
  double value(double s) const { return std::pow(s, p); }
  double second(double s) const { return p * (p - 1) * std::pow(s, p - 2); }
};

Vec unit(int d, int axis) {
  Vec e = Vec::Zero(d);
  e[axis] = 1.0;
  return e;
}

/// B = diag(b(x_a), 1) with b(s) = s^p; shared by example21/example22/total_damping.
ModelFunctions diagonal_degenerate(int axis, int gamma_axis, const Power& b) {
  ModelFunctions f;
  f.B = [axis, b](const Vec& x) {
    Mat B = Mat::Identity(2, 2);
    B(0, 0) = b.value(x[axis]);
    return B;
  };
  f.gamma = [gamma_axis](const Vec&) { return unit(2, gamma_axis); };
  f.gamma_jacobian = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  // Only d^2 B_11 / dx_1^2 can be non-zero.
  f.b0 = [axis, b](const Vec& x) { return axis == 0 ? -0.25 * b.second(x[0]) : 0.0; };
  f.sigma = [axis](const Vec& x) { return x[axis]; };
  f.sigma_gradient = [axis](const Vec&) { return unit(2, axis); };
  return f;
}

/// Smooth, flat-at-zero ramp: s(t) = exp(-1/t) for t > 0.
struct FlatRamp {
  static double value(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
  static double second(double t) {
    if (t <= 0.0) return 0.0;
    const double e = std::exp(-1.0 / t);
    return e * (1.0 / std::pow(t, 4) - 2.0 / std::pow(t, 3));
  }
};

CoefficientModel make_zero_patch(const PresetParams& params) {
  const Box domain = params.domain.value_or(default_box(2));
  const Box patch = params.patch.value_or(Box{Vec::Constant(2, -1.5), Vec::Constant(2, 1.5)});
  if (patch.dim() != 2 || !domain.contains(patch.lo) || !domain.contains(patch.hi)) {
    throw Error(ErrorKind::BadSpec, "zero_patch: patch must be a 2-D sub-box of the domain");
  }
  auto beta = [patch](const Vec& x) {
    double s = 0.0;
    for (int j = 0; j < 2; ++j) s += FlatRamp::value(x[j] - patch.hi[j]) + FlatRamp::value(patch.lo[j] - x[j]);
    return s;
  };
  auto laplace_beta = [patch](const Vec& x) {
    double s = 0.0;
    for (int j = 0; j < 2; ++j) s += FlatRamp::second(x[j] - patch.hi[j]) + FlatRamp::second(patch.lo[j] - x[j]);
    return s;
  };

  ModelFunctions f;
  f.B = [beta](const Vec& x) { return Mat(beta(x) * Mat::Identity(2, 2)); };
  f.gamma = [](const Vec& x) {
    Vec g(2);
    g << 0.5 + 0.3 * std::sin(x[1]) + 0.1 * x[0], 0.2 + 0.3 * std::cos(x[0]);
    return g;
  };
  f.gamma_jacobian = [](const Vec& x) {
    Mat J(2, 2);
    J << 0.1, 0.3 * std::cos(x[1]), -0.3 * std::sin(x[0]), 0.0;
    return J;
  };
  f.b0 = [laplace_beta](const Vec& x) { return -0.25 * laplace_beta(x); };
  f.distorted_region = [patch](const Vec& x, const Vec&) { return patch.contains(x); };

  ModelOptions opts;
  opts.singular_policy = SingularPolicy::Divergent;
  opts.zero_patch = patch;
  return CoefficientModel("zero_patch", domain, std::move(f), opts);
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"example21", "example22", "elliptic_iso",
                                              "zero_patch", "total_damping"};
  return names;
}

CoefficientModel make_preset(std::string_view name, const PresetParams& params) {
  if (params.b_exponent < 2 || params.b_exponent % 2 != 0) {
    throw Error(ErrorKind::BadSpec, "b_exponent must be even and >= 2");
  }
  const Power b{params.b_exponent};

  if (name == "example21" || name == "example22" || name == "total_damping") {
    const Box domain = params.domain.value_or(default_box(2));
    if (domain.dim() != 2) throw Error(ErrorKind::BadSpec, std::string(name) + " is two-dimensional");
    ModelOptions opts;
    ModelFunctions f;
    if (name == "example21") {
      f = diagonal_degenerate(0, 1, b);
      opts.singular_policy = SingularPolicy::ContinuousExtension;
    } else if (name == "example22") {
      f = diagonal_degenerate(1, 0, b);
      opts.singular_policy = SingularPolicy::Divergent;
      // Distorted transport is exercised on the invariant set Lambda itself.
      const double tol = opts.tol_lambda;
      f.distorted_region = [b, tol](const Vec& x, const Vec& w) {
        return std::abs(b.value(x[1]) * w[0]) + std::abs(w[1]) <= tol;
      };
    } else {
      f = diagonal_degenerate(0, 0, b);
      opts.singular_policy = SingularPolicy::Divergent;
    }
    return CoefficientModel(std::string(name), domain, std::move(f), opts);
  }

  if (name == "elliptic_iso") {
    const int d = params.domain ? params.domain->dim() : params.dim;
    const Box domain = params.domain.value_or(default_box(d));
    const double kappa = params.diffusivity;
    if (kappa <= 0.0) throw Error(ErrorKind::BadSpec, "elliptic_iso needs a positive diffusivity");
    const Vec g = params.gamma.value_or(Vec::Zero(d));
    if (g.size() != d) throw Error(ErrorKind::BadSpec, "elliptic_iso: gamma has wrong dimension");
    ModelFunctions f;
    f.B = [d, kappa](const Vec&) { return Mat(kappa * Mat::Identity(d, d)); };
    f.gamma = [g](const Vec&) { return g; };
    f.gamma_jacobian = [d](const Vec&) { return Mat(Mat::Zero(d, d)); };
    f.b0 = [](const Vec&) { return 0.0; };
    return CoefficientModel("elliptic_iso", domain, std::move(f));
  }

  if (name == "zero_patch") return make_zero_patch(params);

  throw Error(ErrorKind::BadSpec, "unknown preset '" + std::string(name) + "'");
}

}  // namespace thermoray
