#include "thermoray/error.hpp"
#include "thermoray/presets.hpp"
#include "thermoray/spectrum.hpp"
#include "thermoray/transport.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace thermoray;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const double kS = 1.0 / std::sqrt(2.0);

WavePacket packet(Vec c, Vec w, double sigma, ModeBalance bal = ModeBalance::pure_plus()) {
  WavePacket p;
  p.center = std::move(c);
  p.omega0 = std::move(w);
  p.width = sigma;
  p.balance = bal;
  return p;
}

}  // namespace

TEST(Transport, PurePlusPacketMass) {
  const auto [plus, minus] = init_plus_minus({{packet(v2(0, 0), v2(1, 0), 0.2)}, {}});
  EXPECT_NEAR(plus.total_mass(), 1.0, 1e-14);
  EXPECT_EQ(minus.total_mass(), 0.0);
  for (const auto& a : plus.atoms) EXPECT_EQ(a.omega, v2(1, 0));
}

TEST(Transport, MixedHalf) {
  const auto [plus, minus] =
      init_plus_minus({{packet(v2(0, 0), v2(0, 2), 0.2, ModeBalance::parse("mixed(0.5)"))}, {}});
  EXPECT_NEAR(plus.total_mass(), 0.5, 1e-14);
  EXPECT_NEAR(minus.total_mass(), 0.5, 1e-14);
  EXPECT_NEAR(plus.atoms[0].omega.norm(), 1.0, 1e-15);
}

TEST(Transport, BalanceParsing) {
  EXPECT_EQ(ModeBalance::parse("pure-").plus_fraction, 0.0);
  EXPECT_DOUBLE_EQ(ModeBalance::parse("mixed(0.25)").plus_fraction, 0.25);
  for (const char* bad : {"pure", "mixed(2)", "mixed(x)", "mixed(0.5"}) {
    try {
      ModeBalance::parse(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::BadSpec);
    }
  }
}

TEST(Transport, EnvelopeNormalization) {
  WavePacket g = packet(v2(0.1, -0.2), v2(1, 0), 0.3);
  g.mass = 2.5;
  // Riemann sum of a^2 over a fine grid.
  double s = 0.0;
  const double h = 0.01;
  for (double x = -1.5; x < 1.5; x += h) {
    for (double y = -1.5; y < 1.5; y += h) s += std::pow(g.amplitude(v2(x, y)), 2) * h * h;
  }
  EXPECT_NEAR(s, 2.5, 1e-6);
  WavePacket box = g;
  box.envelope = Envelope::FlatBox;
  EXPECT_DOUBLE_EQ(std::pow(box.amplitude(v2(0.1, -0.2)), 2) * 0.36, 2.5);
  EXPECT_EQ(box.amplitude(v2(0.5, 0.0)), 0.0);
}

TEST(Transport, SeededSamplingIsDeterministic) {
  SamplingOptions o;
  o.random = true;
  o.seed = 42;
  o.random_count = 100;
  const auto a = init_plus_minus({{packet(v2(0, 0), v2(1, 0), 0.2)}, {}}, o).first;
  const auto b = init_plus_minus({{packet(v2(0, 0), v2(1, 0), 0.2)}, {}}, o).first;
  ASSERT_EQ(a.size(), 100u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.atoms[i].x, b.atoms[i].x);
  o.seed = 43;
  const auto c = init_plus_minus({{packet(v2(0, 0), v2(1, 0), 0.2)}, {}}, o).first;
  EXPECT_NE(a.atoms[0].x, c.atoms[0].x);
}

TEST(Transport, TildeIdentity) {
  PresetParams p;
  p.gamma = v2(0.7, -0.4);
  const auto m = make_preset("elliptic_iso", p);
  const auto t = tilde_initial_measures(CMat::Identity(4, 4), v2(0, 0), v2(0.6, 0.8), m);
  EXPECT_NEAR(t.nu0, 1.0, 1e-15);
  EXPECT_NEAR(t.m_plus, 1.0, 1e-15);
  EXPECT_NEAR(t.m_minus, 1.0, 1e-15);
}

TEST(Transport, TildeTemperatureBlockWhenOrthogonal) {
  PresetParams p;
  p.gamma = v2(0.0, 1.0);
  const auto m = make_preset("elliptic_iso", p);
  CMat M = CMat::Zero(4, 4);
  M(3, 3) = 0.7;
  M(0, 0) = 5.0;
  EXPECT_NEAR(tilde_initial_measures(M, v2(0, 0), v2(1, 0), m).nu0, 0.7, 1e-15);
}

TEST(Transport, TildeRankOne) {
  PresetParams p;
  p.gamma = v2(0.7, -0.4);
  const auto m = make_preset("elliptic_iso", p);
  const Vec w = v2(0.6, 0.8);
  const double g = p.gamma->dot(w), c = std::sqrt(g * g + 1);
  CVec vp(4);
  vp << c, -w[0], -w[1], g;
  const auto t = tilde_initial_measures(vp * vp.adjoint(), v2(0, 0), w, m);
  EXPECT_NEAR(t.m_plus, 2 * c * c, 1e-13);
  EXPECT_NEAR(t.m_minus, 0.0, 1e-13);
}

TEST(Transport, TildePositiveOnRandomPsd) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  const auto m = make_preset("zero_patch");
  for (int i = 0; i < 50; ++i) {
    CMat A(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) A(r, c) = cdouble(n(rng), n(rng));
    const CMat M = A * A.adjoint();
    const double th = n(rng);
    const auto t = tilde_initial_measures(M, v2(0.1, 0.2), v2(std::cos(th), std::sin(th)), m);
    EXPECT_GE(t.nu0, 0.0);
    EXPECT_GE(t.m_plus, 0.0);
    EXPECT_GE(t.m_minus, 0.0);
  }
}

TEST(Transport, TildeRejectsIndefinite) {
  CMat M = CMat::Identity(4, 4);
  M(1, 1) = -0.5;
  try {
    tilde_initial_measures(M, v2(0, 0), v2(1, 0), make_preset("zero_patch"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPSD);
  }
}

TEST(Transport, DampedPureTransportWhenGammaOrthogonal) {
  const auto m = make_preset("example21");
  const auto [plus, minus] = init_plus_minus({{packet(v2(-1, 0), v2(1, 0), 0.1)}, {}});
  const auto moved = push_forward_damped(plus, 1.0, m);
  EXPECT_EQ(moved.total_mass(), plus.total_mass());
  for (std::size_t i = 0; i < plus.size(); ++i) {
    EXPECT_EQ(moved.atoms[i].x, plus.atoms[i].x + v2(1, 0));
  }
}

TEST(Transport, DampedArctanAtom) {
  const auto m = make_preset("example21");
  ParticleMeasure mu;
  mu.atoms.push_back(Atom{0, v2(-1, 0), v2(kS, kS), 2.0, WaveMode::Plus});
  const auto out = push_forward_damped(mu, 2.0 * std::sqrt(2.0), m);
  EXPECT_NEAR(out.atoms[0].weight, 2.0 * std::exp(-std::sqrt(2.0) * M_PI / 2), 2e-6);
  EXPECT_LT((out.atoms[0].x - v2(1, 2)).norm(), 1e-14);
}

TEST(Transport, TotalDampingKillsMass) {
  const auto m = make_preset("total_damping");
  ParticleMeasure mu;
  mu.atoms.push_back(Atom{0, v2(-0.5, 0.2), v2(1, 0), 1.0, WaveMode::Plus});
  EXPECT_LE(push_forward_damped(mu, 1.0, m).total_mass(), 1e-6);
}

TEST(Transport, SemigroupAndMonotone) {
  const auto m = make_preset("example21");
  auto [plus, minus] = init_plus_minus(
      {{packet(v2(-0.3, -0.2), v2(0.8, 0.6), 0.1, ModeBalance::mixed(0.6))}, {}}, {.per_axis = 9});
  for (const ParticleMeasure* mu : {&plus, &minus}) {
    const auto whole = push_forward_damped(*mu, 1.2, m);
    const auto steps = push_forward_damped(push_forward_damped(*mu, 0.5, m), 0.7, m);
    ASSERT_EQ(whole.size(), steps.size());
    for (std::size_t i = 0; i < whole.size(); ++i) {
      EXPECT_NEAR(whole.atoms[i].weight, steps.atoms[i].weight, 1e-9 * std::max(1e-3, mu->atoms[i].weight));
      EXPECT_LT((whole.atoms[i].x - steps.atoms[i].x).norm(), 1e-14);
    }
    EXPECT_LE(whole.total_mass(), mu->total_mass());
  }
}

TEST(Transport, TemperatureAtomsRejectedInDampedRegime) {
  ParticleMeasure mu;
  mu.atoms.push_back(Atom{0, v2(0, 0), v2(1, 0), 1.0, WaveMode::Temp});
  EXPECT_THROW(push_forward_damped(mu, 0.1, make_preset("example21")), Error);
}

TEST(Transport, DistortedExample22) {
  const auto m = make_preset("example22");
  ParticleMeasure mu, nu;
  mu.atoms.push_back(Atom{0, v2(0, 0), v2(1, 0), 0.3, WaveMode::Plus});
  nu.atoms.push_back(Atom{1, v2(0.5, 0), v2(1, 0), 0.2, WaveMode::Temp});
  const auto [out, frozen] = push_forward_distorted(mu, nu, 1.0, m);
  EXPECT_LT((out.atoms[0].x - v2(std::sqrt(2.0), 0)).norm(), 1e-8);
  EXPECT_EQ(out.atoms[0].weight, 0.3);
  EXPECT_EQ(out.total_mass(), mu.total_mass());
  EXPECT_EQ(frozen.atoms[0].x, nu.atoms[0].x);
  EXPECT_EQ(frozen.atoms[0].weight, 0.2);
}

TEST(Transport, DistortedZeroGammaIsStraight) {
  ModelFunctions f;
  f.B = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  f.gamma = [](const Vec&) { return v2(0, 0); };
  f.gamma_jacobian = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  const CoefficientModel m("flat", Box{v2(-2, -2), v2(2, 2)}, f);
  auto [plus, minus] = init_plus_minus({{packet(v2(0, 0), v2(0.6, 0.8), 0.1, ModeBalance::mixed(0.5))}, {}},
                                       {.per_axis = 5});
  const auto out = push_forward_distorted(minus, ParticleMeasure{}, 0.5, m, {.dt = 0.05}).first;
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_LT((out.atoms[i].x - (minus.atoms[i].x - 0.5 * v2(0.6, 0.8))).norm(), 1e-13);
  }
}

TEST(Transport, PairTotalMassAndCensus) {
  const auto m = make_preset("example21");
  auto [plus, minus] = init_plus_minus({{packet(v2(0.5, -1), v2(0, 1), 0.1)}, {}}, {.per_axis = 20});
  Observable all;
  EXPECT_NEAR(pair(plus, all), 1.0, 1e-14);

  Observable bump;
  bump.phi = smooth_box_cutoff(Box{v2(0.05, -1.5), v2(1.5, 1.5)}, 0.03);
  bump.phi_support = Box{v2(0.01, -1.6), v2(1.6, 1.6)};
  EXPECT_NEAR(pair(plus, bump, m, Regime::Damped), 1.0, 1e-12);

  // Half-space count after transport; the damping rate is uniform here, so the split is even.
  const auto moved = push_forward_damped(plus, 1.0, m);
  Observable upper;
  upper.phi = [](const Vec& x) { return x[1] > 0.0 ? 1.0 : 0.0; };
  double census = 0.0;
  for (const auto& a : moved.atoms) {
    if (a.x[1] > 0.0) census += a.weight;
  }
  EXPECT_DOUBLE_EQ(pair(moved, upper), census);
  EXPECT_NEAR(census, 0.5 * moved.total_mass(), 1e-12);
  EXPECT_LT(moved.total_mass(), 1.0);
}

TEST(Transport, PairSupportViolation) {
  const auto m = make_preset("example21");
  Observable crossing;
  crossing.phi = [](const Vec&) { return 1.0; };
  crossing.phi_support = Box{v2(-0.5, -0.5), v2(0.5, 0.5)};
  try {
    pair(ParticleMeasure{}, crossing, m, Regime::Damped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SupportViolation);
  }
  const auto zp = make_preset("zero_patch");
  Observable outside;
  outside.phi = [](const Vec&) { return 1.0; };
  outside.phi_support = Box{v2(1.0, -0.5), v2(1.8, 0.5)};
  EXPECT_THROW(pair(ParticleMeasure{}, outside, zp, Regime::Distorted), Error);
  outside.phi_support = Box{v2(-1.0, -0.5), v2(1.0, 0.5)};
  EXPECT_NO_THROW(pair(ParticleMeasure{}, outside, zp, Regime::Distorted));
}

TEST(Transport, LambdaMassLinearInTubeRadius) {
  const auto m = make_preset("example21");
  SamplingOptions o;
  o.random = true;
  o.seed = 1;
  o.random_count = 200000;
  auto [plus, minus] = init_plus_minus({{packet(v2(-0.6, 0.3), v2(1, 0), 0.2)}, {}}, o);
  const auto at = push_forward_damped(plus, 0.6, m);
  std::vector<double> r, mass;
  for (int k = 0; k < 5; ++k) {
    r.push_back(0.1 * std::pow(2.0, -k));
    mass.push_back(lambda_mass(at, m, r.back()));
  }
  EXPECT_GE(loglog_slope(r, mass), 0.9);
  // Thin tube: mass ~ 2r times the x1-marginal density of a^2 (std sigma/sqrt2) at Sigma.
  const double density = 1.0 / (0.2 / std::sqrt(2.0) * std::sqrt(2.0 * M_PI));
  EXPECT_NEAR(mass.back() / (2 * r.back() * density), 1.0, 0.1);
}

TEST(Transport, LambdaMassTransversalDirectionIsZero) {
  const auto m = make_preset("example21");
  auto [plus, minus] = init_plus_minus({{packet(v2(0, 0), v2(kS, kS), 0.2)}, {}});
  EXPECT_EQ(lambda_mass(plus, m, 0.1), 0.0);
}

TEST(Transport, LambdaMassAdversarialTangent) {
  // Atoms on Sigma with omega tangent to it: assumption (1) fails and the mass stays.
  const auto m = make_preset("example22");
  ParticleMeasure mu;
  for (int i = 0; i < 11; ++i) mu.atoms.push_back(Atom{i, v2(-0.5 + 0.1 * i, 0.0), v2(1, 0), 0.1, WaveMode::Plus});
  for (double r : {1e-1, 1e-3, 1e-6}) EXPECT_NEAR(lambda_mass(mu, m, r), 1.1, 1e-14);
}

TEST(Transport, LambdaMassEmptyLambda) {
  ModelFunctions f;
  f.B = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  f.gamma = [](const Vec&) { return v2(0, 0); };
  f.sigma = [](const Vec& x) { return x[0]; };
  const CoefficientModel m("iso_sigma", Box{v2(-2, -2), v2(2, 2)}, f);
  auto [plus, minus] = init_plus_minus({{packet(v2(0, 0), v2(1, 0), 0.2)}, {}});
  EXPECT_EQ(lambda_mass(plus, m, 0.5), 0.0);
  EXPECT_THROW(lambda_mass(plus, make_preset("elliptic_iso"), 0.5), Error);
}
