#include "thermoray/coefficients.hpp"

#include "thermoray/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace thermoray {

CoefficientModel::CoefficientModel(std::string name, Box domain, ModelFunctions fns,
                                   ModelOptions opts)
    : name_(std::move(name)), domain_(std::move(domain)), fns_(std::move(fns)),
      opts_(std::move(opts)) {
  if (!fns_.B || !fns_.gamma) {
    throw Error(ErrorKind::BadSpec, "model '" + name_ + "' needs both B and gamma");
  }
  if (domain_.lo.size() != domain_.hi.size() || (dim() != 2 && dim() != 3)) {
    throw Error(ErrorKind::BadSpec, "model dimension must be 2 or 3");
  }
  fd_step_ = opts_.fd_step > 0.0 ? opts_.fd_step : 1e-4 * domain_.max_extent();
}

Mat CoefficientModel::gamma_jacobian(const Vec& x) const {
  if (fns_.gamma_jacobian) return fns_.gamma_jacobian(x);
  const int d = dim();
  const double h = fd_step_;
  if (!domain_.contains(x, -h)) {
    throw Error(ErrorKind::OutOfDomain, "finite-difference stencil for grad gamma leaves the box");
  }
  Mat J(d, d);
  for (int j = 0; j < d; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (fns_.gamma(xp) - fns_.gamma(xm)) / (2.0 * h);
  }
  return J;
}

double CoefficientModel::sigma(const Vec& x) const {
  if (!fns_.sigma) throw Error(ErrorKind::MissingSigma, "model '" + name_ + "' has no level function");
  return fns_.sigma(x);
}

Vec CoefficientModel::sigma_gradient(const Vec& x) const {
  if (!fns_.sigma) throw Error(ErrorKind::MissingSigma, "model '" + name_ + "' has no level function");
  if (fns_.sigma_gradient) return fns_.sigma_gradient(x);
  const double h = fd_step_;
  Vec g(dim());
  for (int j = 0; j < dim(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (fns_.sigma(xp) - fns_.sigma(xm)) / (2.0 * h);
  }
  return g;
}

bool CoefficientModel::in_distorted_region(const Vec& x, const Vec& omega) const {
  if (!domain_.contains(x)) return false;
  if (fns_.distorted_region) return fns_.distorted_region(x, omega);
  return B(x).cwiseAbs().maxCoeff() <= opts_.tol_lambda;
}

CoefficientModel CoefficientModel::with_policy(SingularPolicy policy) const {
  CoefficientModel copy = *this;
  copy.opts_.singular_policy = policy;
  return copy;
}

CoefficientModel CoefficientModel::with_tol_lambda(double tol) const {
  if (!(tol > 0.0)) throw Error(ErrorKind::BadSpec, "tol_lambda must be positive");
  CoefficientModel copy = *this;
  copy.opts_.tol_lambda = tol;
  return copy;
}

double compute_b0(const CoefficientModel& model, const Vec& x) {
  if (model.has_analytic_b0()) return model.analytic_b0(x);
  return compute_b0_fd(model, x, model.fd_step());
}

double compute_b0_fd(const CoefficientModel& model, const Vec& x, double h) {
  const int d = model.dim();
  if (!model.domain().contains(x, -h)) {
    throw Error(ErrorKind::OutOfDomain, "finite-difference stencil for b0 leaves the box");
  }
  auto shifted = [&](int j, double sj, int k, double sk) {
    Vec y = x;
    y[j] += sj * h;
    y[k] += sk * h;
    return model.B(y);
  };
  const Mat centre = model.B(x);
  double sum = 0.0;
  for (int j = 0; j < d; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    sum += (model.B(xp)(j, j) - 2.0 * centre(j, j) + model.B(xm)(j, j)) / (h * h);
    for (int k = 0; k < d; ++k) {
      if (k == j) continue;
      const double mixed = shifted(j, 1, k, 1)(j, k) - shifted(j, 1, k, -1)(j, k) -
                           shifted(j, -1, k, 1)(j, k) + shifted(j, -1, k, -1)(j, k);
      sum += mixed / (4.0 * h * h);
    }
  }
  return -0.25 * sum;
}

LambdaQuery lambda_membership(const CoefficientModel& model, const Vec& x, const Vec& omega) {
  LambdaQuery q{x, omega, (model.B(x) * omega).norm(), false};
  q.member = q.residual <= model.tol_lambda();
  return q;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::WeaklyDegenerate: return "weakly_degenerate";
    case Verdict::Condition1Fails: return "condition1_fails";
    case Verdict::Condition2Fails: return "condition2_fails";
    case Verdict::BothFail: return "both_fail";
  }
  return "unknown";
}

std::vector<Vec> sample_grid(const Box& box, int per_axis) {
  const int d = box.dim();
  std::vector<Vec> pts;
  int total = 1;
  for (int j = 0; j < d; ++j) total *= per_axis;
  pts.reserve(total);
  for (int flat = 0; flat < total; ++flat) {
    Vec x(d);
    int rest = flat;
    for (int j = 0; j < d; ++j) {
      const int i = rest % per_axis;
      rest /= per_axis;
      const double s = per_axis > 1 ? static_cast<double>(i) / (per_axis - 1) : 0.5;
      x[j] = box.lo[j] + s * (box.hi[j] - box.lo[j]);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

namespace {

/// Points where the Sigma level function vanishes on the grid lines.
std::vector<Vec> sigma_crossings(const CoefficientModel& model, int per_axis) {
  std::vector<Vec> roots;
  if (!model.has_sigma()) return roots;
  const Box& box = model.domain();
  const int d = box.dim();
  const auto nodes = sample_grid(box, per_axis);
  const double step_tol = 1e-15 * box.max_extent();
  for (int axis = 0; axis < d; ++axis) {
    int stride = 1;
    for (int j = 0; j < axis; ++j) stride *= per_axis;
    for (std::size_t flat = 0; flat < nodes.size(); ++flat) {
      const int i = static_cast<int>(flat / stride) % per_axis;
      if (i + 1 >= per_axis) continue;
      Vec a = nodes[flat];
      Vec b = nodes[flat + stride];
      double fa = model.sigma(a);
      double fb = model.sigma(b);
      if (fa == 0.0) {
        roots.push_back(a);
        continue;
      }
      if (fa * fb > 0.0) continue;
      for (int it = 0; it < 200 && (b - a).norm() > step_tol; ++it) {
        Vec m = 0.5 * (a + b);
        const double fm = model.sigma(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
  }
  return roots;
}

}  // namespace

DegeneracyReport weak_degeneracy_report(const CoefficientModel& model,
                                        const DegeneracyOptions& opts) {
  auto points = sample_grid(model.domain(), opts.samples_per_axis);
  auto roots = sigma_crossings(model, opts.samples_per_axis);
  points.insert(points.end(), roots.begin(), roots.end());

  DegeneracyReport report;
  report.transversality_min = std::numeric_limits<double>::infinity();
  const double tol = model.tol_lambda();
  for (const Vec& x : points) {
    const Mat B = model.B(x);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (B + B.transpose()));
    const Vec& lam = eig.eigenvalues();
    const Mat& Q = eig.eigenvectors();
    const double rank_tol = std::max(tol, 1e-12 * std::abs(lam.maxCoeff()));

    const Vec g = model.gamma(x);
    double res2 = 0.0;
    int kernel_dim = 0;
    int kernel_index = -1;
    for (int i = 0; i < lam.size(); ++i) {
      if (lam[i] <= rank_tol) {
        const double c = Q.col(i).dot(g);
        res2 += c * c;
      }
      if (lam[i] <= tol) {
        ++kernel_dim;
        kernel_index = i;
      }
    }
    report.range_residual_max = std::max(report.range_residual_max, std::sqrt(res2));

    if (kernel_dim == 0) continue;
    ++report.lambda_samples;
    if (!model.has_sigma()) {
      throw Error(ErrorKind::MissingSigma,
                  "det B vanishes on the sample grid but model '" + model.name() +
                      "' has no level function");
    }
    if (std::abs(model.sigma(x)) > opts.sigma_tol) report.sigma_containment = false;
    double transversality = 0.0;
    if (kernel_dim == 1) {
      const Vec n = model.sigma_gradient(x).normalized();
      transversality = std::abs(Q.col(kernel_index).dot(n));
    }
    report.transversality_min = std::min(report.transversality_min, transversality);
  }

  const bool cond1 = report.sigma_containment &&
                     report.transversality_min > opts.transversality_threshold;
  const bool cond2 = report.range_residual_max <= opts.tol_range;
  report.condition1 = cond1;
  report.condition2 = cond2;
  if (cond1 && cond2) {
    report.verdict = Verdict::WeaklyDegenerate;
  } else if (cond2) {
    report.verdict = Verdict::Condition1Fails;
  } else if (cond1) {
    report.verdict = Verdict::Condition2Fails;
  } else {
    report.verdict = Verdict::BothFail;
  }
  return report;
}

StructureReport check_structure(const CoefficientModel& model, int samples_per_axis,
                                double symmetry_tol, double psd_tol) {
  StructureReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const Vec& x : sample_grid(model.domain(), samples_per_axis)) {
    const Mat B = model.B(x);
    rep.symmetry_defect_max =
        std::max(rep.symmetry_defect_max, (B - B.transpose()).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (B + B.transpose()), Eigen::EigenvaluesOnly);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, eig.eigenvalues().minCoeff());
  }
  rep.symmetric = rep.symmetry_defect_max <= symmetry_tol;
  rep.psd = rep.min_eigenvalue >= -psd_tol;
  return rep;
}

}  // namespace thermoray
