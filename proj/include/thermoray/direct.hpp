#pragma once

#include "thermoray/coefficients.hpp"
#include "thermoray/transport.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <vector>

namespace thermoray {

/// Uniform node grid on a rectangle: nodes (i, j), 0 <= i <= nx, 0 <= j <= ny,
/// square cells of side h. Unknowns live on interior nodes only.
struct Grid2D {
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  Box box;
  double dt = 0.0;

  int interior_size() const { return (nx - 1) * (ny - 1); }
  int index(int i, int j) const { return (i - 1) + (nx - 1) * (j - 1); }
  Vec node(int i, int j) const;
};

/// nx cells along the first axis; ny follows from the aspect ratio, which must
/// give square cells. When `horizon` > 0, dt is shrunk so it divides it.
/// Throws NotRectangle for non-box domains and BadSpec for non-square cells.
Grid2D make_grid(const Domain& domain, int nx, double cfl = 0.4, double horizon = 0.0);

/// Interior values of u, v = du/dt and theta; boundary values are zero.
struct FieldState {
  Vec u;
  Vec v;
  Vec theta;
  double t = 0.0;
};

FieldState zero_state(const Grid2D& grid);

enum class HeatScheme { CrankNicolson, ImplicitEuler };

struct SolverOptions {
  double cfl = 0.4;
  double cg_tol = 1e-10;
  int cg_max_iter = 20000;
  HeatScheme heat = HeatScheme::CrankNicolson;
};

/// E(t) samples with the cumulative dissipation D (trapezoid in time of
/// 2 int B grad theta . grad theta) and the residual r = E - E(0) + D.
/// `D_scheme` is the dissipation the time stepper actually removes.
struct EnergyAudit {
  std::vector<double> t, E, D, r, D_scheme;
};

/// E = h^2 sum (v^2 + theta^2) + sum over grid edges (u_p - u_q)^2.
double energy(const Grid2D& grid, const FieldState& s);

/// Per-node energy (rows j, columns i) summing to `energy`. Edge terms are
/// split evenly between their end nodes.
Mat node_energy(const Grid2D& grid, const FieldState& s);

class DirectSolver {
 public:
  DirectSolver(const CoefficientModel& model, Grid2D grid, SolverOptions opts = {});
  ~DirectSolver();
  DirectSolver(const DirectSolver&) = delete;
  DirectSolver& operator=(const DirectSolver&) = delete;

  const Grid2D& grid() const { return grid_; }

  /// One Strang step: wave(dt/2), coupling(dt/2), heat(dt), coupling(dt/2), wave(dt/2),
  /// each substep an implicit midpoint rule. Returns the scheme dissipation of the step.
  double step(FieldState& s) const;

  /// Discrete dissipation form sum_cells B grad theta . grad theta, times h^2.
  double dissipation_form(const Vec& theta) const;

  /// Steps to `horizon`, sampling the audit every `sample_every` steps. The
  /// observer, when set, sees each sampled state.
  EnergyAudit run(FieldState& s, double horizon, int sample_every = 1,
                  const std::function<void(const FieldState&)>& observer = {}) const;

  const Eigen::SparseMatrix<double>& laplacian() const { return L_; }
  const Eigen::SparseMatrix<double>& coupling() const { return G_; }
  const Eigen::SparseMatrix<double>& diffusion() const { return A_; }

 private:
  struct Solvers;
  Grid2D grid_;
  SolverOptions opts_;
  Eigen::SparseMatrix<double> L_, G_, A_;
  std::unique_ptr<Solvers> solvers_;
};

struct ModeEnergies {
  double plus = 0.0;
  double minus = 0.0;
  double temperature = 0.0;
  double total() const { return plus + minus + temperature; }
};

/// Forward/backward wave energies relative to `direction`, from the zero-padded
/// Fourier transform with the symbol of the discrete Laplacian; plus + minus
/// equals the wave part of `energy` up to rounding.
ModeEnergies mode_energies(const Grid2D& grid, const FieldState& s, const Vec& direction);

/// Share of ||theta||^2 in sine modes with wavenumber >= cutoff.
double hf_temperature_fraction(const Grid2D& grid, const FieldState& s, double cutoff);

/// Energy summed over blocks of cell x cell grid cells (rows along y).
Mat coarse_energy_density(const Grid2D& grid, const FieldState& s, int cell);

double windowed_energy(const Grid2D& grid, const FieldState& s, const std::function<double(const Vec&)>& phi);

Vec energy_centroid(const Grid2D& grid, const FieldState& s);

/// u = eps a sin(phi), v = -+(a cos(phi) + eps (w . grad a) sin(phi)) with
/// phi = (x - center).w / eps; mixed balances superpose both modes. Energy is ~ mass.
FieldState wavepacket_init(const Grid2D& grid, const WavePacket& packet, double eps);

}  // namespace thermoray
