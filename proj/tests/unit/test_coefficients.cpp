#include "thermoray/coefficients.hpp"
#include "thermoray/error.hpp"
#include "thermoray/presets.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace thermoray;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

CoefficientModel quartic_model() {
  ModelFunctions f;
  f.B = [](const Vec& x) {
    Mat B = Mat::Zero(2, 2);
    B(0, 0) = std::pow(x[0], 4);
    B(1, 1) = 1.0 + std::pow(x[1], 3);
    return B;
  };
  f.gamma = [](const Vec&) { return v2(0.0, 1.0); };
  return CoefficientModel("quartic", Box{v2(-0.5, -0.5), v2(0.5, 0.5)}, f);
}

}  // namespace

TEST(Coefficients, B0FiniteDifferenceMatchesLeadingOrder) {
  const auto m = quartic_model();
  ASSERT_FALSE(m.has_analytic_b0());
  EXPECT_NEAR(compute_b0(m, v2(0.0, 0.01)), -0.015, 1e-5);
}

TEST(Coefficients, B0ConstantMatrixIsZero) {
  const auto m = make_preset("elliptic_iso");
  EXPECT_DOUBLE_EQ(compute_b0(m, v2(0.3, -0.7)), 0.0);
  EXPECT_NEAR(compute_b0_fd(m, v2(0.3, -0.7), 1e-3), 0.0, 1e-12);
}

TEST(Coefficients, B0Example21IsMinusHalf) {
  const auto m = make_preset("example21");
  for (double x1 : {-1.5, 0.0, 0.7}) {
    EXPECT_DOUBLE_EQ(compute_b0(m, v2(x1, 0.2)), -0.5);
    EXPECT_NEAR(compute_b0_fd(m, v2(x1, 0.2), 1e-3), -0.5, 1e-7);
  }
}

TEST(Coefficients, B0FiniteDifferenceStencilOutsideBoxThrows) {
  const auto m = make_preset("example21");
  try {
    compute_b0_fd(m, v2(2.0, 0.0), 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
  }
}

TEST(Coefficients, B0FiniteDifferenceIsSecondOrderOnPresets) {
  // p = 4 makes the analytic b0 non-constant so the stencil error is visible.
  PresetParams quartic;
  quartic.b_exponent = 4;
  struct Case {
    CoefficientModel model;
    Vec x;
  };
  const Case cases[] = {
      {make_preset("example21", quartic), v2(0.8, 0.1)},
      {make_preset("total_damping", quartic), v2(-0.6, 0.4)},
      {make_preset("zero_patch"), v2(1.8, 0.3)},
      {make_preset("zero_patch"), v2(1.7, 1.9)},
  };
  for (const auto& c : cases) {
    const double exact = compute_b0(c.model, c.x);
    const double e1 = std::abs(compute_b0_fd(c.model, c.x, 2e-2) - exact);
    const double e2 = std::abs(compute_b0_fd(c.model, c.x, 1e-2) - exact);
    ASSERT_GT(e1, 1e-9) << c.model.name();
    EXPECT_GE(e1 / e2, 3.5) << c.model.name();
  }
}

TEST(Coefficients, ZeroPatchVanishesInsidePatch) {
  const auto m = make_preset("zero_patch");
  EXPECT_EQ(m.B(v2(0.3, -1.2)).norm(), 0.0);
  EXPECT_GT(m.B(v2(1.9, 0.0))(0, 0), 0.0);
  EXPECT_TRUE(m.in_distorted_region(v2(0.1, 0.1), v2(1.0, 0.0)));
  EXPECT_FALSE(m.in_distorted_region(v2(1.9, 0.1), v2(1.0, 0.0)));
  EXPECT_NEAR(m.div_gamma(v2(0.4, 0.2)), 0.1, 1e-15);
}

TEST(Coefficients, GammaJacobianFallbackMatchesAnalytic) {
  const auto zp = make_preset("zero_patch");
  ModelFunctions f;
  f.B = [&](const Vec& x) { return zp.B(x); };
  f.gamma = [&](const Vec& x) { return zp.gamma(x); };
  const CoefficientModel fd("fd", zp.domain(), f);
  const Vec x = v2(0.3, -0.4);
  EXPECT_LT((fd.gamma_jacobian(x) - zp.gamma_jacobian(x)).norm(), 1e-8);
}

TEST(Coefficients, LambdaMembershipExample21) {
  const auto m = make_preset("example21");
  const auto on = lambda_membership(m, v2(0.0, 3.0 * 0.5), v2(1.0, 0.0));
  EXPECT_TRUE(on.member);
  EXPECT_EQ(on.residual, 0.0);
  const auto off = lambda_membership(m, v2(0.0, 1.5), v2(0.0, 1.0));
  EXPECT_FALSE(off.member);
  EXPECT_DOUBLE_EQ(off.residual, 1.0);
}

TEST(Coefficients, LambdaMembershipExampleAtPaperPoint) {
  PresetParams p;
  p.domain = Box{v2(-4.0, -4.0), v2(4.0, 4.0)};
  const auto m = make_preset("example21", p);
  EXPECT_TRUE(lambda_membership(m, v2(0.0, 3.0), v2(1.0, 0.0)).member);
  const auto q = lambda_membership(m, v2(0.0, 3.0), v2(0.0, 1.0));
  EXPECT_FALSE(q.member);
  EXPECT_DOUBLE_EQ(q.residual, 1.0);
}

TEST(Coefficients, IdentityHasEmptyLambda) {
  const auto m = make_preset("elliptic_iso");
  for (const Vec& x : sample_grid(m.domain(), 9)) {
    for (double a = 0.0; a < 6.3; a += 0.5) {
      EXPECT_FALSE(lambda_membership(m, x, v2(std::cos(a), std::sin(a))).member);
    }
  }
}

TEST(Coefficients, VerdictExample21WeaklyDegenerate) {
  const auto rep = weak_degeneracy_report(make_preset("example21"));
  EXPECT_EQ(rep.verdict, Verdict::WeaklyDegenerate);
  EXPECT_TRUE(rep.sigma_containment);
  EXPECT_GT(rep.lambda_samples, 0);
  EXPECT_NEAR(rep.transversality_min, 1.0, 1e-12);
  EXPECT_LE(rep.range_residual_max, 1e-8);
}

TEST(Coefficients, VerdictExample22FailsRangeCondition) {
  const auto rep = weak_degeneracy_report(make_preset("example22"));
  EXPECT_FALSE(rep.condition2);
  EXPECT_NEAR(rep.range_residual_max, 1.0, 1e-12);
  // The kernel direction e1 is tangent to Sigma = {x2 = 0}, so condition (1) fails too.
  EXPECT_FALSE(rep.condition1);
  EXPECT_EQ(rep.verdict, Verdict::BothFail);
}

TEST(Coefficients, VerdictTotalDampingCondition2) {
  const auto rep = weak_degeneracy_report(make_preset("total_damping"));
  EXPECT_EQ(rep.verdict, Verdict::Condition2Fails);
}

TEST(Coefficients, VerdictIdentityVacuous) {
  PresetParams p;
  p.gamma = v2(0.3, -2.0);
  const auto rep = weak_degeneracy_report(make_preset("elliptic_iso", p));
  EXPECT_EQ(rep.verdict, Verdict::WeaklyDegenerate);
  EXPECT_EQ(rep.lambda_samples, 0);
}

TEST(Coefficients, ZeroPatchWithoutSigmaThrows) {
  try {
    weak_degeneracy_report(make_preset("zero_patch"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingSigma);
  }
}

TEST(Coefficients, OddGridStillFindsSigma) {
  // Even node counts straddle x1 = 0; the crossing search must still find it.
  DegeneracyOptions opts;
  opts.samples_per_axis = 64;
  const auto rep = weak_degeneracy_report(make_preset("example21"), opts);
  EXPECT_GT(rep.lambda_samples, 0);
}

TEST(Coefficients, RangeConditionImpliesGammaOrthogonalOnLambda) {
  const auto m = make_preset("example21");
  for (const Vec& x : sample_grid(m.domain(), 33)) {
    for (double a = 0.0; a < 6.3; a += 0.25) {
      const Vec w = v2(std::cos(a), std::sin(a));
      if (lambda_membership(m, x, w).member) {
        EXPECT_LE(std::abs(m.gamma(x).dot(w)), 1e-8);
      }
    }
  }
}

TEST(Coefficients, PresetsArePsdAndSymmetric) {
  for (const auto& name : preset_names()) {
    const auto rep = check_structure(make_preset(name));
    EXPECT_EQ(rep.symmetry_defect_max, 0.0) << name;
    EXPECT_GE(rep.min_eigenvalue, -1e-12) << name;
    EXPECT_TRUE(rep.psd) << name;
  }
}

TEST(Coefficients, NonSymmetricModelFlagged) {
  ModelFunctions f;
  f.B = [](const Vec&) {
    Mat B(2, 2);
    B << 1.0, 0.5, 0.0, 1.0;
    return B;
  };
  f.gamma = [](const Vec&) { return v2(0.0, 0.0); };
  const CoefficientModel m("skew", Box{v2(-1, -1), v2(1, 1)}, f);
  EXPECT_FALSE(check_structure(m, 5).symmetric);
}

TEST(Coefficients, Elliptic3D) {
  PresetParams p;
  p.dim = 3;
  const auto m = make_preset("elliptic_iso", p);
  EXPECT_EQ(m.dim(), 3);
  EXPECT_EQ(weak_degeneracy_report(m, {.samples_per_axis = 8}).verdict, Verdict::WeaklyDegenerate);
}

TEST(Coefficients, UnknownPresetRejected) {
  EXPECT_THROW(make_preset("nope"), Error);
}
