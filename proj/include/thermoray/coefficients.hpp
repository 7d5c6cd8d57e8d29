#pragma once

#include "thermoray/geometry.hpp"

#include <functional>
#include <optional>
#include <string>

namespace thermoray {

/// How the damping integrand treats directions with w.B(x)w ~ 0.
enum class SingularPolicy {
  ContinuousExtension,  ///< integrand extends by 0 on Lambda (weakly degenerate pairs)
  Divergent,            ///< integrand is +inf there (total damping regime)
};

/// Coefficient fields of the thermoelastic system. Optional members are
/// analytic derivatives; when absent, central finite differences are used.
struct ModelFunctions {
  std::function<Mat(const Vec&)> B;
  std::function<Vec(const Vec&)> gamma;
  std::function<double(const Vec&)> b0;
  std::function<Mat(const Vec&)> gamma_jacobian;  // J(i, j) = d gamma_i / d x_j
  std::function<double(const Vec&)> sigma;        // level function of Sigma
  std::function<Vec(const Vec&)> sigma_gradient;
  /// Region where distorted (Hamiltonian) transport applies; default {B = 0}.
  std::function<bool(const Vec&, const Vec&)> distorted_region;
};

struct ModelOptions {
  SingularPolicy singular_policy = SingularPolicy::ContinuousExtension;
  double tol_lambda = 1e-10;
  /// Finite-difference step for b0 / div gamma; <= 0 means 1e-4 * domain size.
  double fd_step = 0.0;
  std::optional<Box> zero_patch;
};

class CoefficientModel {
 public:
  CoefficientModel(std::string name, Box domain, ModelFunctions fns, ModelOptions opts = {});

  const std::string& name() const { return name_; }
  int dim() const { return domain_.dim(); }
  const Box& domain() const { return domain_; }
  SingularPolicy singular_policy() const { return opts_.singular_policy; }
  double tol_lambda() const { return opts_.tol_lambda; }
  double fd_step() const { return fd_step_; }
  const std::optional<Box>& zero_patch() const { return opts_.zero_patch; }

  Mat B(const Vec& x) const { return fns_.B(x); }
  Vec gamma(const Vec& x) const { return fns_.gamma(x); }

  bool has_analytic_b0() const { return static_cast<bool>(fns_.b0); }
  double analytic_b0(const Vec& x) const { return fns_.b0(x); }

  Mat gamma_jacobian(const Vec& x) const;
  double div_gamma(const Vec& x) const { return gamma_jacobian(x).trace(); }

  bool has_sigma() const { return static_cast<bool>(fns_.sigma); }
  double sigma(const Vec& x) const;
  Vec sigma_gradient(const Vec& x) const;

  bool in_distorted_region(const Vec& x, const Vec& omega) const;

  /// Copy with a different singular policy (used once the degeneracy verdict is known).
  CoefficientModel with_policy(SingularPolicy policy) const;
  CoefficientModel with_tol_lambda(double tol) const;

 private:
  std::string name_;
  Box domain_;
  ModelFunctions fns_;
  ModelOptions opts_;
  double fd_step_;
};

/// b0(x) = -1/4 sum_{j,k} d^2 B_jk / dx_j dx_k. Analytic when available.
double compute_b0(const CoefficientModel& model, const Vec& x);

/// Finite-difference b0 with an explicit step. Throws OutOfDomain when the
/// stencil leaves the box.
double compute_b0_fd(const CoefficientModel& model, const Vec& x, double h);

struct LambdaQuery {
  Vec x;
  Vec omega;
  double residual = 0.0;
  bool member = false;
};

LambdaQuery lambda_membership(const CoefficientModel& model, const Vec& x, const Vec& omega);

enum class Verdict { WeaklyDegenerate, Condition1Fails, Condition2Fails, BothFail };

std::string_view to_string(Verdict v);

struct DegeneracyOptions {
  int samples_per_axis = 64;
  double tol_range = 1e-8;
  double transversality_threshold = 1e-6;
  double sigma_tol = 1e-8;
};

struct DegeneracyReport {
  bool sigma_containment = true;
  /// Smallest |w . grad f / |grad f|| over detected Lambda samples; +inf when none.
  double transversality_min = 0.0;
  double range_residual_max = 0.0;
  int lambda_samples = 0;
  bool condition1 = true;  ///< Sigma containment and transversality
  bool condition2 = true;  ///< gamma in Range B
  Verdict verdict = Verdict::WeaklyDegenerate;
};

/// Checks both weak-degeneracy conditions on a tensor grid augmented by the
/// Sigma crossings of every grid line.
DegeneracyReport weak_degeneracy_report(const CoefficientModel& model,
                                        const DegeneracyOptions& opts = {});

struct StructureReport {
  double symmetry_defect_max = 0.0;
  double min_eigenvalue = 0.0;
  bool symmetric = true;
  bool psd = true;
};

/// Symmetry and positive semidefiniteness of B over the sample grid.
StructureReport check_structure(const CoefficientModel& model, int samples_per_axis = 64,
                                double symmetry_tol = 1e-12, double psd_tol = 1e-12);

/// Tensor grid of nodes spanning the box.
std::vector<Vec> sample_grid(const Box& box, int per_axis);

}  // namespace thermoray
