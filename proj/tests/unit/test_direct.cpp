#include "thermoray/direct.hpp"
#include "thermoray/error.hpp"
#include "thermoray/presets.hpp"

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

Box square(double half) { return Box{v2(-half, -half), v2(half, half)}; }

CoefficientModel constant_model(double kappa, Vec gamma, double half = 1.0) {
  ModelFunctions f;
  f.B = [kappa](const Vec&) { return Mat(kappa * Mat::Identity(2, 2)); };
  f.gamma = [gamma](const Vec&) { return gamma; };
  f.gamma_jacobian = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  return CoefficientModel("const", square(half), f);
}

Vec fill(const Grid2D& g, const std::function<double(const Vec&)>& f) {
  Vec out(g.interior_size());
  for (int j = 1; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) out[g.index(i, j)] = f(g.node(i, j));
  return out;
}

double bump(const Vec& x, const Vec& c, double s) { return std::exp(-(x - c).squaredNorm() / (s * s)); }

FieldState smooth_coupled_data(const Grid2D& g) {
  FieldState s = zero_state(g);
  s.u = fill(g, [](const Vec& x) { return 0.3 * bump(x, v2(-0.3, 0.1), 0.3); });
  s.v = fill(g, [](const Vec& x) { return bump(x, v2(0.2, -0.1), 0.25); });
  s.theta = fill(g, [](const Vec& x) { return 0.5 * bump(x, v2(0.1, 0.3), 0.3); });
  return s;
}

PresetParams unit_box() {
  PresetParams p;
  p.domain = square(1.0);
  return p;
}

}  // namespace

TEST(Direct, GridConstruction) {
  const Grid2D g = make_grid(Box{v2(0, 0), v2(2, 1)}, 64, 0.4, 1.0);
  EXPECT_EQ(g.ny, 32);
  EXPECT_DOUBLE_EQ(g.h, 2.0 / 64);
  EXPECT_LE(g.dt, 0.4 * g.h);
  EXPECT_NEAR(std::round(1.0 / g.dt) * g.dt, 1.0, 1e-12);
  try {
    make_grid(Disk{v2(0, 0), 1.0}, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotRectangle);
  }
  EXPECT_THROW(make_grid(Box{v2(0, 0), v2(1, 0.3)}, 16), Error);
}

TEST(Direct, CflViolation) {
  Grid2D g = make_grid(square(1.0), 16);
  g.dt = 0.5 * g.h;
  try {
    DirectSolver solver(make_preset("elliptic_iso", unit_box()), g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CFLViolation);
  }
}

TEST(Direct, ZeroStateHasZeroEnergy) {
  const Grid2D g = make_grid(square(1.0), 16);
  EXPECT_EQ(energy(g, zero_state(g)), 0.0);
}

TEST(Direct, OperatorsMatchStencilOracles) {
  const Grid2D g = make_grid(square(1.0), 12);
  // Identity diffusion reduces the cell form to the 5-point Laplacian.
  const DirectSolver iso(constant_model(1.0, v2(0.3, -0.2)), g);
  EXPECT_LT((Mat(iso.diffusion()) - Mat(iso.laplacian())).norm(), 1e-9);
  EXPECT_LT((Mat(iso.laplacian()) - Mat(iso.laplacian()).transpose()).norm(), 1e-12);

  // Transpose of the coupling is -gamma . centered gradient.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Vec v(g.interior_size());
  for (auto& x : v) x = n(rng);
  const Vec Gtv = iso.coupling().transpose() * v;
  Vec full = Vec::Zero((g.nx + 1) * (g.ny + 1));
  auto at = [&](int i, int j) { return (i > 0 && i < g.nx && j > 0 && j < g.ny) ? v[g.index(i, j)] : 0.0; };
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const double gx = (at(i + 1, j) - at(i - 1, j)) / (2 * g.h), gy = (at(i, j + 1) - at(i, j - 1)) / (2 * g.h);
      EXPECT_NEAR(Gtv[g.index(i, j)], -(0.3 * gx - 0.2 * gy), 1e-10);
    }
  }
}

TEST(Direct, DiffusionFormIsPsdForDegenerateAndAnisotropicB) {
  ModelFunctions f;
  f.B = [](const Vec& x) {
    Mat R(2, 2);
    const double c = std::cos(x[0] + x[1]), s = std::sin(x[0] + x[1]);
    R << c, -s, s, c;
    Mat D = Mat::Zero(2, 2);
    D(0, 0) = x[0] * x[0];
    return Mat(R * D * R.transpose());
  };
  f.gamma = [](const Vec&) { return v2(0, 0); };
  const CoefficientModel m("rotated", square(1.0), f);
  const Grid2D g = make_grid(square(1.0), 20);
  const DirectSolver solver(m, g);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int k = 0; k < 50; ++k) {
    Vec th(g.interior_size());
    for (auto& x : th) x = n(rng);
    EXPECT_GE(solver.dissipation_form(th), 0.0);
  }
  const Mat A = Mat(solver.diffusion());
  EXPECT_LT((A - A.transpose()).norm(), 1e-10);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().minCoeff(), -1e-9);
}

TEST(Direct, UncoupledTemperatureStaysZero) {
  const Grid2D g = make_grid(square(1.0), 32);
  const DirectSolver solver(make_preset("elliptic_iso", unit_box()), g);
  FieldState s = smooth_coupled_data(g);
  s.theta.setZero();
  solver.run(s, 0.3);
  EXPECT_EQ(s.theta.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Direct, HeatNormStrictlyDecreasing) {
  const Grid2D g = make_grid(square(1.0), 32);
  const DirectSolver solver(make_preset("elliptic_iso", unit_box()), g);
  FieldState s = zero_state(g);
  s.theta = fill(g, [](const Vec& x) { return bump(x, v2(0.1, 0.0), 0.3); });
  double prev = s.theta.norm();
  for (int k = 0; k < 40; ++k) {
    solver.step(s);
    EXPECT_LT(s.theta.norm(), prev);
    prev = s.theta.norm();
  }
  EXPECT_EQ(s.u.norm(), 0.0);
}

TEST(Direct, ConservativeWithoutHeat) {
  ModelFunctions f;
  f.B = [](const Vec&) { return Mat(Mat::Zero(2, 2)); };
  f.gamma = [](const Vec&) { return v2(0, 0); };
  const CoefficientModel m("wave", square(1.0), f);
  const Grid2D g = make_grid(square(1.0), 32);
  const DirectSolver solver(m, g);
  FieldState s = smooth_coupled_data(g);
  const double E0 = energy(g, s);
  for (int k = 0; k < 1000; ++k) solver.step(s);
  EXPECT_LE(std::abs(energy(g, s) - E0) / E0, 1e-10);
}

TEST(Direct, SchemeDissipationClosesTheBalance) {
  const Grid2D g = make_grid(square(1.0), 48);
  for (HeatScheme scheme : {HeatScheme::CrankNicolson, HeatScheme::ImplicitEuler}) {
    SolverOptions o;
    o.heat = scheme;
    const DirectSolver solver(make_preset("example21", unit_box()), g, o);
    FieldState s = smooth_coupled_data(g);
    const EnergyAudit a = solver.run(s, 0.5, 4);
    for (std::size_t k = 0; k < a.t.size(); ++k) {
      EXPECT_NEAR(a.E[k] + a.D_scheme[k], a.E[0], 1e-8 * a.E[0]);
      if (k > 0) {
        EXPECT_GT(a.D[k], a.D[k - 1]);
        EXPECT_GE(a.D_scheme[k], a.D_scheme[k - 1]);
      }
    }
    EXPECT_LT(a.E.back(), a.E.front());
  }
}

TEST(Direct, ResidualConvergesAtSecondOrder) {
  const auto m = make_preset("example21", unit_box());
  std::vector<double> res;
  for (int nx : {32, 64, 128}) {
    const Grid2D g = make_grid(square(1.0), nx, 0.4, 0.25);
    const DirectSolver solver(m, g);
    FieldState s = smooth_coupled_data(g);
    const EnergyAudit a = solver.run(s, 0.25, 1000000);
    res.push_back(std::abs(a.r.back()) / a.E.front());
  }
  EXPECT_GE(std::log2(res[0] / res[1]), 1.8);
  EXPECT_GE(std::log2(res[1] / res[2]), 1.8);
}

TEST(Direct, MirrorSymmetryPreserved) {
  const Grid2D g = make_grid(square(1.0), 40);
  const DirectSolver solver(make_preset("example21", unit_box()), g);
  FieldState s = zero_state(g);
  s.u = fill(g, [](const Vec& x) { return 0.2 * std::exp(-4 * x[0] * x[0] - 6 * (x[1] - 0.1) * (x[1] - 0.1)); });
  s.v = fill(g, [](const Vec& x) { return std::cos(3 * x[0]) * std::exp(-5 * x.squaredNorm()); });
  solver.run(s, 0.4);
  double worst = 0.0;
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const int p = g.index(i, j), q = g.index(g.nx - i, j);
      worst = std::max({worst, std::abs(s.u[p] - s.u[q]), std::abs(s.v[p] - s.v[q]),
                        std::abs(s.theta[p] - s.theta[q])});
    }
  }
  EXPECT_LE(worst, 1e-12);
  EXPECT_GT(s.theta.norm(), 0.0);
}

TEST(Direct, DecouplingMatchesSeparateSolvers) {
  const Grid2D g = make_grid(square(1.0), 24);
  const DirectSolver solver(make_preset("elliptic_iso", unit_box()), g);
  FieldState both = smooth_coupled_data(g), wave = both, heat = both;
  wave.theta.setZero();
  heat.u.setZero();
  heat.v.setZero();
  solver.run(both, 0.3);
  solver.run(wave, 0.3);
  solver.run(heat, 0.3);
  EXPECT_LT((both.u - wave.u).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT((both.v - wave.v).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LT((both.theta - heat.theta).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Direct, ModeSplitSymmetryAndSum) {
  const Grid2D g = make_grid(Box{v2(0, 0), v2(2, 1)}, 64);
  FieldState s = zero_state(g);
  s.u = fill(g, [](const Vec& x) { return std::sin(3 * M_PI * x[0] / 2) * std::sin(2 * M_PI * x[1]); });
  const ModeEnergies m = mode_energies(g, s, v2(0.6, 0.8));
  EXPECT_NEAR(m.plus, m.minus, 1e-12 * m.plus);
  EXPECT_NEAR(m.total(), energy(g, s), 1e-12 * energy(g, s));

  FieldState r = smooth_coupled_data(make_grid(square(1.0), 32));
  const Grid2D g2 = make_grid(square(1.0), 32);
  r.theta.setZero();
  const ModeEnergies mr = mode_energies(g2, r, v2(1, 0));
  EXPECT_NEAR(mr.total(), energy(g2, r), 1e-12 * energy(g2, r));

  FieldState t = zero_state(g2);
  t.theta = fill(g2, [](const Vec& x) { return bump(x, v2(0, 0), 0.3); });
  const ModeEnergies mt = mode_energies(g2, t, v2(1, 0));
  EXPECT_EQ(mt.plus, 0.0);
  EXPECT_EQ(mt.minus, 0.0);
  EXPECT_NEAR(mt.temperature, energy(g2, t), 1e-14);
}

TEST(Direct, PurePlusPacket) {
  const Grid2D g = make_grid(square(1.0), 512);
  WavePacket p;
  p.center = v2(-0.1, 0.05);
  p.omega0 = v2(0.6, 0.8);
  p.width = 0.15;
  for (double eps : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const FieldState s = wavepacket_init(g, p, eps);
    const ModeEnergies m = mode_energies(g, s, p.omega0);
    EXPECT_LE(m.minus / m.total(), 0.02);
    EXPECT_EQ(m.temperature, 0.0);
    // Closed form: mass (1 + 3/4 eps^2 / sigma^2) for the Gaussian envelope.
    EXPECT_NEAR(energy(g, s), p.mass * (1 + 0.75 * eps * eps / (p.width * p.width)), 2e-3);
  }
  p.balance = ModeBalance::pure_minus();
  const ModeEnergies mm = mode_energies(g, wavepacket_init(g, p, 1.0 / 64), p.omega0);
  EXPECT_LE(mm.plus / mm.total(), 0.02);
  p.balance = ModeBalance::mixed(0.3);
  const ModeEnergies mx = mode_energies(g, wavepacket_init(g, p, 1.0 / 64), p.omega0);
  EXPECT_NEAR(mx.plus / mx.total(), 0.3, 0.02);
}

TEST(Direct, PacketEnergyInvariantUnderEpsHalving) {
  const Grid2D g = make_grid(square(1.0), 1024);
  WavePacket p;
  p.center = v2(0, 0);
  p.omega0 = v2(1, 0);
  p.width = 0.2;
  p.mass = 0.7;
  const double e1 = energy(g, wavepacket_init(g, p, 1.0 / 64));
  const double e2 = energy(g, wavepacket_init(g, p, 1.0 / 128));
  EXPECT_NEAR(e1 / e2, 1.0, 0.01);
}

TEST(Direct, PacketGuards) {
  const Grid2D g = make_grid(square(1.0), 64);
  WavePacket p;
  p.center = v2(0, 0);
  p.omega0 = v2(1, 0);
  p.width = 0.1;
  try {
    wavepacket_init(g, p, 3.0 * g.h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResolutionTooCoarse);
  }
  p.center = v2(0.8, 0);
  EXPECT_THROW(wavepacket_init(g, p, 0.1), Error);
}

TEST(Direct, CoarseDensitySums) {
  const Grid2D g = make_grid(square(1.0), 32);
  const FieldState s = smooth_coupled_data(g);
  const double E = energy(g, s);
  EXPECT_NEAR(coarse_energy_density(g, s, 8).sum(), E, 1e-13 * E);
  const Mat one = coarse_energy_density(g, s, 32);
  ASSERT_EQ(one.size(), 1);
  EXPECT_NEAR(one(0, 0), E, 1e-13 * E);
  EXPECT_THROW(coarse_energy_density(g, s, 5), Error);
  EXPECT_NEAR(windowed_energy(g, s, [](const Vec&) { return 1.0; }), E, 1e-13 * E);
}

TEST(Direct, HfFractionOnSingleModes) {
  const Grid2D g = make_grid(square(1.0), 64);
  FieldState s = zero_state(g);
  s.theta = fill(g, [](const Vec& x) { return std::sin(M_PI * (x[0] + 1) / 2) * std::sin(M_PI * (x[1] + 1)); });
  // Mode (1, 2) has wavenumber pi/2 * sqrt(5).
  EXPECT_NEAR(hf_temperature_fraction(g, s, 10.0), 0.0, 1e-20);
  EXPECT_NEAR(hf_temperature_fraction(g, s, 3.0), 1.0, 1e-14);
  s.theta = fill(g, [](const Vec& x) { return std::sin(20 * M_PI * (x[0] + 1) / 2) * std::sin(M_PI * (x[1] + 1) / 2); });
  EXPECT_NEAR(hf_temperature_fraction(g, s, 10.0), 1.0, 1e-14);
}

TEST(Direct, PacketMovesAtUnitSpeed) {
  PresetParams p;
  p.domain = square(1.5);
  const auto m = make_preset("elliptic_iso", p);
  const double T = 0.8;
  const Grid2D g = make_grid(*p.domain, 256, 0.4, T);
  const DirectSolver solver(m, g);
  WavePacket w;
  w.center = v2(-0.4, -0.3);
  w.omega0 = v2(0.8, 0.6);
  w.width = 0.15;
  FieldState s = wavepacket_init(g, w, 1.0 / 16);
  const Vec c0 = energy_centroid(g, s);
  solver.run(s, T, 1000000);
  const Vec moved = energy_centroid(g, s) - c0;
  EXPECT_NEAR(moved.norm() / T, 1.0, 0.05);
  EXPECT_GT(moved.normalized().dot(w.omega0), 0.999);
}
