#include "thermoray/direct.hpp"

#include "thermoray/error.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <fftw3.h>

#include <cmath>
#include <complex>
#include <string>

namespace thermoray {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

Vec Grid2D::node(int i, int j) const {
  Vec x(2);
  x << box.lo[0] + i * h, box.lo[1] + j * h;
  return x;
}

Grid2D make_grid(const Domain& domain, int nx, double cfl, double horizon) {
  const Box* box = std::get_if<Box>(&domain);
  if (box == nullptr) throw Error(ErrorKind::NotRectangle, "the grid solver needs a rectangle");
  if (box->dim() != 2) throw Error(ErrorKind::BadSpec, "the grid solver is two-dimensional");
  if (nx < 2) throw Error(ErrorKind::BadSpec, "need at least two cells per axis");
  if (!(cfl > 0.0)) throw Error(ErrorKind::BadSpec, "cfl must be positive");
  const Vec size = box->size();
  Grid2D g;
  g.box = *box;
  g.nx = nx;
  g.h = size[0] / nx;
  g.ny = static_cast<int>(std::lround(size[1] / g.h));
  if (g.ny < 2 || std::abs(g.ny * g.h - size[1]) > 1e-9 * size[1]) {
    throw Error(ErrorKind::BadSpec, "box aspect ratio does not give square cells for nx=" + std::to_string(nx));
  }
  g.dt = cfl * g.h;
  if (horizon > 0.0) g.dt = horizon / std::ceil(horizon / g.dt - 1e-9);
  return g;
}

FieldState zero_state(const Grid2D& grid) {
  const int n = grid.interior_size();
  return FieldState{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n), 0.0};
}

namespace {

/// Interior vector to a full (ny+1) x (nx+1) array with zero boundary.
Mat to_full(const Grid2D& g, const Vec& interior) {
  Mat f = Mat::Zero(g.ny + 1, g.nx + 1);
  for (int j = 1; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) f(j, i) = interior[g.index(i, j)];
  return f;
}

void check_state(const Grid2D& g, const FieldState& s) {
  const Eigen::Index n = g.interior_size();
  if (s.u.size() != n || s.v.size() != n || s.theta.size() != n) {
    throw Error(ErrorKind::BadSpec, "state does not match the grid");
  }
}

}  // namespace

double energy(const Grid2D& grid, const FieldState& s) {
  check_state(grid, s);
  const Mat u = to_full(grid, s.u);
  double edges = 0.0;
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) edges += std::pow(u(j, i + 1) - u(j, i), 2);
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i) edges += std::pow(u(j + 1, i) - u(j, i), 2);
  return grid.h * grid.h * (s.v.squaredNorm() + s.theta.squaredNorm()) + edges;
}

Mat node_energy(const Grid2D& grid, const FieldState& s) {
  check_state(grid, s);
  const Mat u = to_full(grid, s.u);
  const Mat v = to_full(grid, s.v);
  const Mat th = to_full(grid, s.theta);
  Mat e = grid.h * grid.h * (v.array().square() + th.array().square()).matrix();
  for (int j = 0; j <= grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double d = 0.5 * std::pow(u(j, i + 1) - u(j, i), 2);
      e(j, i) += d;
      e(j, i + 1) += d;
    }
  }
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i <= grid.nx; ++i) {
      const double d = 0.5 * std::pow(u(j + 1, i) - u(j, i), 2);
      e(j, i) += d;
      e(j + 1, i) += d;
    }
  }
  return e;
}

struct DirectSolver::Solvers {
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> wave;
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> coupling;
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> heat;
  SpMat Mw, Mc, Mh;
};

DirectSolver::DirectSolver(const CoefficientModel& model, Grid2D grid, SolverOptions opts)
    : grid_(std::move(grid)), opts_(opts), solvers_(std::make_unique<Solvers>()) {
  const Grid2D& g = grid_;
  if (g.dt > opts_.cfl * g.h * (1.0 + 1e-12)) {
    throw Error(ErrorKind::CFLViolation,
                "dt=" + std::to_string(g.dt) + " exceeds " + std::to_string(opts_.cfl) + "*h");
  }
  if (model.dim() != 2) throw Error(ErrorKind::BadSpec, "model is not two-dimensional");
  const int n = g.interior_size();
  const double h2 = g.h * g.h;
  auto interior = [&](int i, int j) { return i > 0 && i < g.nx && j > 0 && j < g.ny; };

  std::vector<Triplet> tl, tg, ta;
  for (int j = 1; j < g.ny; ++j) {
    for (int i = 1; i < g.nx; ++i) {
      const int p = g.index(i, j);
      tl.emplace_back(p, p, 4.0 / h2);
      const int di[4] = {1, -1, 0, 0};
      const int dj[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const int a = i + di[k], b = j + dj[k];
        if (!interior(a, b)) continue;
        const int q = g.index(a, b);
        tl.emplace_back(p, q, -1.0 / h2);
        // d/dx_axis (gamma_axis theta) at p, centered, with gamma taken at the neighbour.
        const int axis = k < 2 ? 0 : 1;
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        tg.emplace_back(p, q, sign * model.gamma(g.node(a, b))[axis] / (2.0 * g.h));
      }
    }
  }

  // Per cell: 1/4 sum over corners of d^T B d, where d holds the two edge
  // differences meeting at the corner; PSD whenever B is.
  const Eigen::Vector4d eb(-1, 1, 0, 0), et(0, 0, -1, 1), el(-1, 0, 1, 0), er(0, -1, 0, 1);
  const Eigen::Matrix4d Kxx = 0.5 * (eb * eb.transpose() + et * et.transpose());
  const Eigen::Matrix4d Kyy = 0.5 * (el * el.transpose() + er * er.transpose());
  const Eigen::Vector4d sx = eb + et, sy = el + er;
  const Eigen::Matrix4d Kxy = 0.25 * (sx * sy.transpose() + sy * sx.transpose());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      Vec c(2);
      c << g.box.lo[0] + (i + 0.5) * g.h, g.box.lo[1] + (j + 0.5) * g.h;
      const Mat B = model.B(c);
      const Eigen::Matrix4d K = (B(0, 0) * Kxx + B(1, 1) * Kyy + 0.5 * (B(0, 1) + B(1, 0)) * Kxy) / h2;
      const int ci[4] = {i, i + 1, i, i + 1};
      const int cj[4] = {j, j, j + 1, j + 1};
      for (int r = 0; r < 4; ++r) {
        if (!interior(ci[r], cj[r])) continue;
        for (int s = 0; s < 4; ++s) {
          if (!interior(ci[s], cj[s]) || K(r, s) == 0.0) continue;
          ta.emplace_back(g.index(ci[r], cj[r]), g.index(ci[s], cj[s]), K(r, s));
        }
      }
    }
  }
  L_.resize(n, n);
  G_.resize(n, n);
  A_.resize(n, n);
  L_.setFromTriplets(tl.begin(), tl.end());
  G_.setFromTriplets(tg.begin(), tg.end());
  A_.setFromTriplets(ta.begin(), ta.end());
  G_.prune(0.0);

  SpMat I(n, n);
  I.setIdentity();
  const double tw = 0.5 * g.dt;
  Solvers& sv = *solvers_;
  sv.Mw = I + (tw * tw / 4.0) * L_;
  const SpMat GtG = SpMat(G_.transpose()) * G_;
  sv.Mc = I + (tw * tw / 4.0) * GtG;
  sv.Mh = I + (opts_.heat == HeatScheme::CrankNicolson ? 0.5 * g.dt : g.dt) * A_;
  for (auto* cg : {&sv.wave, &sv.coupling, &sv.heat}) {
    cg->setTolerance(opts_.cg_tol);
    cg->setMaxIterations(opts_.cg_max_iter);
  }
  sv.wave.compute(sv.Mw);
  sv.coupling.compute(sv.Mc);
  sv.heat.compute(sv.Mh);
}

DirectSolver::~DirectSolver() = default;

namespace {

template <class Solver>
Vec cg_solve(const Solver& cg, const Vec& rhs, const Vec& guess, const char* what) {
  Vec x = cg.solveWithGuess(rhs, guess);
  if (cg.info() != Eigen::Success) {
    throw Error(ErrorKind::SolverDiverged, std::string(what) + " solve stopped after " +
                                               std::to_string(cg.iterations()) + " iterations, error " +
                                               std::to_string(cg.error()));
  }
  return x;
}

}  // namespace

double DirectSolver::dissipation_form(const Vec& theta) const {
  return grid_.h * grid_.h * theta.dot(A_ * theta);
}

double DirectSolver::step(FieldState& s) const {
  check_state(grid_, s);
  const Solvers& sv = *solvers_;
  const double dt = grid_.dt, tw = 0.5 * dt;

  auto wave = [&] {
    const Vec ub = cg_solve(sv.wave, s.u + 0.5 * tw * s.v, s.u, "wave");
    const Vec vb = s.v - 0.5 * tw * (L_ * ub);
    s.u = 2.0 * ub - s.u;
    s.v = 2.0 * vb - s.v;
  };
  auto couple = [&] {
    if (G_.nonZeros() == 0) return;
    const Vec thb = cg_solve(sv.coupling, s.theta + 0.5 * tw * (G_.transpose() * s.v), s.theta, "coupling");
    const Vec vb = s.v - 0.5 * tw * (G_ * thb);
    s.theta = 2.0 * thb - s.theta;
    s.v = 2.0 * vb - s.v;
  };

  wave();
  couple();
  double removed = 0.0;
  if (opts_.heat == HeatScheme::CrankNicolson) {
    const Vec thb = cg_solve(sv.heat, s.theta, s.theta, "heat");
    removed = 2.0 * dt * dissipation_form(thb);
    s.theta = 2.0 * thb - s.theta;
  } else {
    const Vec next = cg_solve(sv.heat, s.theta, s.theta, "heat");
    removed = 2.0 * dt * dissipation_form(next) + grid_.h * grid_.h * (next - s.theta).squaredNorm();
    s.theta = next;
  }
  couple();
  wave();
  s.t += dt;
  return removed;
}

EnergyAudit DirectSolver::run(FieldState& s, double horizon, int sample_every,
                              const std::function<void(const FieldState&)>& observer) const {
  if (horizon < 0.0 || sample_every < 1) throw Error(ErrorKind::BadSpec, "bad run parameters");
  const long steps = static_cast<long>(std::ceil(horizon / grid_.dt - 1e-9));
  EnergyAudit audit;
  const double E0 = energy(grid_, s);
  double D = 0.0, D_scheme = 0.0;
  auto sample = [&] {
    const double E = energy(grid_, s);
    if (!std::isfinite(E)) throw Error(ErrorKind::NumericalBreakdown, "energy is not finite");
    audit.t.push_back(s.t);
    audit.E.push_back(E);
    audit.D.push_back(D);
    audit.D_scheme.push_back(D_scheme);
    audit.r.push_back(E - E0 + D);
    if (observer) observer(s);
  };
  sample();
  double phi = dissipation_form(s.theta);
  for (long k = 1; k <= steps; ++k) {
    D_scheme += step(s);
    const double next = dissipation_form(s.theta);
    D += grid_.dt * (phi + next);
    phi = next;
    if (k % sample_every == 0 || k == steps) sample();
  }
  return audit;
}

ModeEnergies mode_energies(const Grid2D& grid, const FieldState& s, const Vec& direction) {
  check_state(grid, s);
  if (direction.size() != 2 || direction.norm() == 0.0) throw Error(ErrorKind::BadSpec, "bad split direction");
  const int n1 = 2 * grid.nx, n0 = 2 * grid.ny, nh = grid.nx + 1;
  const Mat U = to_full(grid, s.u), V = to_full(grid, s.v);
  // Zero padding to twice the size: the periodic Laplacian of the padded field
  // has the same edge sum as the Dirichlet one, and no mirror images appear.
  std::vector<double> in_u(static_cast<std::size_t>(n0) * n1, 0.0), in_v(in_u.size(), 0.0);
  for (int q = 0; q <= grid.ny; ++q) {
    for (int p = 0; p <= grid.nx; ++p) {
      in_u[q * n1 + p] = U(q, p);
      in_v[q * n1 + p] = V(q, p);
    }
  }
  std::vector<std::complex<double>> fu(static_cast<std::size_t>(n0) * nh), fv(fu.size());
  fftw_plan pu = fftw_plan_dft_r2c_2d(n0, n1, in_u.data(), reinterpret_cast<fftw_complex*>(fu.data()), FFTW_ESTIMATE);
  fftw_plan pv = fftw_plan_dft_r2c_2d(n0, n1, in_v.data(), reinterpret_cast<fftw_complex*>(fv.data()), FFTW_ESTIMATE);
  fftw_execute(pu);
  fftw_execute(pv);
  fftw_destroy_plan(pu);
  fftw_destroy_plan(pv);

  const Vec size = grid.box.size();
  const double h2 = grid.h * grid.h;
  double plus = 0.0, minus = 0.0;
  auto add = [&](double z2, double proj, double scale) {
    if (proj > scale) plus += z2;
    else if (proj < -scale) minus += z2;
    else {
      plus += 0.5 * z2;
      minus += 0.5 * z2;
    }
  };
  const std::complex<double> I(0.0, 1.0);
  for (int q = 0; q < n0; ++q) {
    const double qs = q <= grid.ny ? q : q - n0;
    for (int p = 0; p < nh; ++p) {
      const double k1 = M_PI * p / size[0], k2 = M_PI * qs / size[1];  // 2 pi n / (2 L)
      const double lam = 4.0 / h2 *
                         (std::pow(std::sin(M_PI * p / n1), 2) + std::pow(std::sin(M_PI * q / n0), 2));
      const double root = std::sqrt(lam);
      const std::complex<double> Uh = fu[q * nh + p], Vh = fv[q * nh + p];
      // Nyquist rows alias +k with -k, so their direction is undetermined.
      const bool nyquist = p == grid.nx || q == grid.ny;
      const double proj = nyquist ? 0.0 : k1 * direction[0] + k2 * direction[1];
      const double scale = 1e-12 * std::hypot(k1, k2);
      add(std::norm(root * Uh + I * Vh), proj, scale);
      if (p > 0 && p < grid.nx) add(std::norm(root * std::conj(Uh) + I * std::conj(Vh)), -proj, scale);
    }
  }
  const double norm = h2 / (static_cast<double>(n0) * n1);
  return ModeEnergies{plus * norm, minus * norm, h2 * s.theta.squaredNorm()};
}

double hf_temperature_fraction(const Grid2D& grid, const FieldState& s, double cutoff) {
  check_state(grid, s);
  const int m1 = grid.nx - 1, m0 = grid.ny - 1;
  std::vector<double> in(s.theta.data(), s.theta.data() + s.theta.size()), out(in.size());
  fftw_plan plan = fftw_plan_r2r_2d(m0, m1, in.data(), out.data(), FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  const Vec size = grid.box.size();
  double total = 0.0, high = 0.0;
  for (int k2 = 1; k2 <= m0; ++k2) {
    for (int k1 = 1; k1 <= m1; ++k1) {
      const double c2 = std::pow(out[(k2 - 1) * m1 + (k1 - 1)], 2);
      total += c2;
      if (M_PI * std::hypot(k1 / size[0], k2 / size[1]) >= cutoff) high += c2;
    }
  }
  return total > 0.0 ? high / total : 0.0;
}

Mat coarse_energy_density(const Grid2D& grid, const FieldState& s, int cell) {
  if (cell < 1 || grid.nx % cell != 0 || grid.ny % cell != 0) {
    throw Error(ErrorKind::BadSpec, "cell size must divide the grid");
  }
  const int bx = grid.nx / cell, by = grid.ny / cell;
  const Mat e = node_energy(grid, s);
  Mat out = Mat::Zero(by, bx);
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i) out(std::min(j / cell, by - 1), std::min(i / cell, bx - 1)) += e(j, i);
  return out;
}

double windowed_energy(const Grid2D& grid, const FieldState& s, const std::function<double(const Vec&)>& phi) {
  const Mat e = node_energy(grid, s);
  double total = 0.0;
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i)
      if (e(j, i) != 0.0) total += phi(grid.node(i, j)) * e(j, i);
  return total;
}

Vec energy_centroid(const Grid2D& grid, const FieldState& s) {
  const Mat e = node_energy(grid, s);
  Vec c = Vec::Zero(2);
  for (int j = 0; j <= grid.ny; ++j)
    for (int i = 0; i <= grid.nx; ++i) c += e(j, i) * grid.node(i, j);
  const double total = e.sum();
  if (total == 0.0) throw Error(ErrorKind::BadSpec, "zero state has no centroid");
  return c / total;
}

FieldState wavepacket_init(const Grid2D& grid, const WavePacket& packet, double eps) {
  if (eps < 4.0 * grid.h) {
    throw Error(ErrorKind::ResolutionTooCoarse,
                "eps=" + std::to_string(eps) + " is below 4h=" + std::to_string(4.0 * grid.h));
  }
  if (packet.center.size() != 2 || packet.omega0.size() != 2 || packet.omega0.norm() == 0.0) {
    throw Error(ErrorKind::BadSpec, "packet must be two-dimensional with a nonzero direction");
  }
  const double R = packet.support_radius();
  for (int k = 0; k < 2; ++k) {
    if (packet.center[k] - R <= grid.box.lo[k] || packet.center[k] + R >= grid.box.hi[k]) {
      throw Error(ErrorKind::BadSpec, "packet support reaches the boundary");
    }
  }
  const Vec w = packet.omega0.normalized();
  const double sp = std::sqrt(packet.balance.plus_fraction);
  const double sm = std::sqrt(1.0 - packet.balance.plus_fraction);
  FieldState s = zero_state(grid);
  for (int j = 1; j < grid.ny; ++j) {
    for (int i = 1; i < grid.nx; ++i) {
      const Vec x = grid.node(i, j);
      const double a = packet.amplitude(x);
      if (a == 0.0) continue;
      const double da =
          packet.envelope == Envelope::Gaussian ? -w.dot(x - packet.center) / (packet.width * packet.width) * a : 0.0;
      const double phase = w.dot(x - packet.center) / eps;
      const int p = grid.index(i, j);
      s.u[p] = (sp + sm) * eps * a * std::sin(phase);
      s.v[p] = -(sp - sm) * (a * std::cos(phase) + eps * da * std::sin(phase));
    }
  }
  return s;
}

}  // namespace thermoray
