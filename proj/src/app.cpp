#include "thermoray/app.hpp"

#include "thermoray/csv.hpp"
#include "thermoray/error.hpp"
#include "thermoray/rays.hpp"
#include "thermoray/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace thermoray {

namespace fs = std::filesystem;

bool Report::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

void Report::check(std::string name, bool ok, std::string detail) {
  checks.push_back(Check{std::move(name), ok, std::move(detail)});
}

void write_summary(const Report& r, const std::string& scenario_name) {
  nlohmann::json j;
  j["schema"] = 1;
  j["command"] = r.command;
  j["scenario"] = scenario_name;
  j["pass"] = r.pass();
  j["checks"] = nlohmann::json::array();
  for (const Check& c : r.checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_double(v));
  j["notes"] = r.notes;
  std::ofstream out(r.out_dir / (r.command + "_summary.json"));
  if (!out) throw Error(ErrorKind::BadScenario, "cannot write summary in " + r.out_dir.string());
  out << j.dump(2) << '\n';
}

namespace {

struct Context {
  CoefficientModel model;
  fs::path out;
  std::uint64_t seed;
};

Context prepare(const Scenario& s, const RunOptions& opts, bool check_regime = true) {
  CoefficientModel model = build_model(s);
  if (check_regime && !opts.force) {
    const std::string why = regime_mismatch(s, model);
    if (!why.empty()) throw Error(ErrorKind::BadScenario, why + " (use --force to run anyway)");
  }
  fs::path out = !opts.out.empty() ? opts.out : (!s.output.empty() ? fs::path(s.output) : fs::path("thermoray_out") / s.name);
  fs::create_directories(out);
  return Context{std::move(model), std::move(out), opts.seed.value_or(s.seed)};
}

Report new_report(std::string command, fs::path dir) {
  Report r;
  r.command = std::move(command);
  r.out_dir = std::move(dir);
  return r;
}

template <class T>
const T& require(const std::optional<T>& section, const char* name) {
  if (!section) throw Error(ErrorKind::BadScenario, std::string("scenario has no '") + name + "' section");
  return *section;
}

std::vector<std::string> axis_columns(const std::string& prefix, int d) {
  std::vector<std::string> out;
  for (int i = 0; i < d; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

void append(std::vector<CsvWriter::Cell>& row, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) row.emplace_back(v[i]);
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<double> log_space(double lo, double hi, int n) {
  std::vector<double> r(n);
  for (int i = 0; i < n; ++i) r[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
  return r;
}

Vec random_unit(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n;
  Vec w(d);
  do {
    for (int i = 0; i < d; ++i) w[i] = n(rng);
  } while (w.norm() < 1e-12);
  return w.normalized();
}

Vec random_point(std::mt19937_64& rng, const Box& box) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = box.lo[i] + u(rng) * (box.hi[i] - box.lo[i]);
  return x;
}

Domain ray_domain(const Scenario& s, const CoefficientModel& model) {
  if (s.rays && s.rays->domain) return *s.rays->domain;
  return model.domain();
}

bool distorted_regime(const Scenario& s) { return s.regime == RegimeKind::DegeneratePatch; }

/// Initial measures; atoms carry the scenario seed.
std::pair<ParticleMeasure, ParticleMeasure> initial_measures(const Scenario& s, std::uint64_t seed) {
  SamplingOptions o = s.sampling;
  o.seed = seed;
  return init_plus_minus(s.initial, o);
}

ParticleMeasure advance(const Scenario& s, const CoefficientModel& model, const ParticleMeasure& mu, double dt) {
  if (dt == 0.0) return mu;
  PushOptions o;
  if (distorted_regime(s)) {
    o.dt = s.transport ? s.transport->dt : o.dt;
    return push_forward_distorted(mu, ParticleMeasure{}, dt, model, o).first;
  }
  o.domain = ray_domain(s, model);
  return push_forward_damped(mu, dt, model, o);
}

std::vector<double> sorted_times(std::vector<double> t) {
  for (double v : t)
    if (!(v >= 0.0)) throw Error(ErrorKind::BadScenario, "times must be nonnegative");
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

FieldState packet_state(const Scenario& s, const Grid2D& grid, double eps) {
  if (s.initial.packets.empty()) throw Error(ErrorKind::BadScenario, "the grid solver needs at least one packet");
  FieldState st = zero_state(grid);
  for (const WavePacket& p : s.initial.packets) {
    const FieldState one = wavepacket_init(grid, p, eps);
    st.u += one.u;
    st.v += one.v;
  }
  return st;
}

Vec split_direction(const Scenario& s, const DirectSection& d) {
  if (d.split_direction) return *d.split_direction;
  if (s.initial.packets.empty()) throw Error(ErrorKind::BadScenario, "no split direction and no packet");
  return s.initial.packets.front().omega0;
}

}  // namespace

OracleCheck spectrum_oracle(const CoefficientModel& model, const Vec& x, const Vec& xi, const SpectrumOptions& opts) {
  const SymbolPoint pt = make_symbol_point(model, x, xi);
  const SpectrumResult sp = solve_spectrum(pt, opts);
  Eigen::ComplexEigenSolver<CMat> es(assemble_Q(pt), false);
  const CVec ev = es.eigenvalues();
  const cdouble ours[3] = {cdouble(sp.nu0, 0.0), sp.nu_plus, sp.nu_minus};
  double scale = 1.0;
  for (const cdouble& z : ours) scale = std::max(scale, std::abs(z));
  OracleCheck out;
  std::vector<bool> used(static_cast<std::size_t>(ev.size()), false);
  for (const cdouble& z : ours) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      if (used[i]) continue;
      if (best < 0 || std::abs(ev[i] - z) < std::abs(ev[best] - z)) best = i;
    }
    used[best] = true;
    out.relative_error = std::max(out.relative_error, std::abs(ev[best] - z) / scale);
  }
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!used[i] && std::abs(ev[i]) <= 1e-8 * scale) ++out.kernel_dimension;
  }
  out.residual = sp.max_residual;
  return out;
}

Report run_spectrum(const Scenario& s, const RunOptions& opts) {
  const SpectrumSection& sec = require(s.spectrum, "spectrum");
  Context ctx = prepare(s, opts);
  Report rep = new_report("spectrum", ctx.out);
  const CoefficientModel& m = ctx.model;
  const int d = m.dim();

  const R0Estimate r0 = estimate_R0(m);
  rep.metrics["R0"] = r0.R0;
  rep.check("R0_stabilized", r0.stabilized, "worst radius " + format_double(r0.worst_radius));
  const double rmin = std::max(r0.R0, 1e-3);
  if (!(sec.radius_max > rmin)) throw Error(ErrorKind::BadScenario, "spectrum.radius_max must exceed R0");

  SpectrumOptions so;
  so.residual_tol = s.tolerances.residual;
  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> u(std::log(rmin), std::log(sec.radius_max));
  CsvWriter csv(ctx.out / "spectrum.csv", "spectrum",
                concat(concat({"sample"}, axis_columns("x", d)),
                       concat(axis_columns("xi", d), {"radius", "nu0", "alpha", "beta", "oracle_rel_err",
                                                      "residual", "kernel_dim"})));
  double worst = 0.0, worst_res = 0.0;
  int min_kernel = d - 1;
  for (int k = 0; k < sec.samples; ++k) {
    const Vec x = random_point(rng, m.domain());
    const double r = std::exp(u(rng));
    const Vec xi = r * random_unit(rng, d);
    const SpectrumResult sp = solve_spectrum(make_symbol_point(m, x, xi), so);
    const OracleCheck oc = spectrum_oracle(m, x, xi, so);
    worst = std::max(worst, oc.relative_error);
    worst_res = std::max(worst_res, oc.residual);
    min_kernel = std::min(min_kernel, oc.kernel_dimension);
    std::vector<CsvWriter::Cell> row{static_cast<long long>(k)};
    append(row, x);
    append(row, xi);
    row.insert(row.end(), {r, sp.nu0, sp.alpha, sp.beta, oc.relative_error, oc.residual,
                           static_cast<long long>(oc.kernel_dimension)});
    csv.row(row);
  }
  rep.metrics["oracle_max_rel_err"] = worst;
  rep.metrics["eigen_residual_max"] = worst_res;
  rep.check("cubic_oracle", worst <= s.tolerances.oracle, "max relative error " + format_double(worst));
  rep.check("kernel_dimension", min_kernel >= d - 1, "min kernel dimension " + std::to_string(min_kernel));

  if (!sec.fits.empty()) {
    CsvWriter fits(ctx.out / "fits.csv", "asymptotic_fits", {"point", "branch", "radius", "residual"});
    CsvWriter slopes(ctx.out / "fit_slopes.csv", "asymptotic_slopes",
                     {"point", "branch", "slope", "exact", "predicted_order", "pass"});
    const auto radii = log_space(sec.fit_radius_min, sec.fit_radius_max, sec.fit_count);
    for (std::size_t i = 0; i < sec.fits.size(); ++i) {
      const auto res = asymptotic_residuals(m, sec.fits[i].x, sec.fits[i].omega, radii);
      for (const AsymptoticFit& f : res) {
        for (std::size_t k = 0; k < f.radii.size(); ++k) {
          fits.row({static_cast<long long>(i), std::string(to_string(f.branch)), f.radii[k], f.residuals[k]});
        }
        slopes.row({static_cast<long long>(i), std::string(to_string(f.branch)), f.slope,
                    static_cast<long long>(f.exact), static_cast<long long>(f.predicted_order),
                    static_cast<long long>(f.passes())});
        rep.check("fit/" + std::to_string(i) + "/" + std::string(to_string(f.branch)), f.passes(),
                  f.exact ? "exact" : "slope " + format_double(f.slope));
      }
    }
  }
  write_summary(rep, s.name);
  return rep;
}

Report run_rays(const Scenario& s, const RunOptions& opts) {
  const RaySection& sec = require(s.rays, "rays");
  Context ctx = prepare(s, opts);
  Report rep = new_report("rays", ctx.out);
  const CoefficientModel& m = ctx.model;
  const Domain dom = ray_domain(s, m);
  TraceOptions to;
  to.record_step = sec.record_step;
  CsvWriter pts(ctx.out / "rays.csv", "rays",
                concat(concat({"ray", "s"}, axis_columns("x", m.dim())),
                       concat(axis_columns("omega", m.dim()), {"log_weight", "weight", "flags"})));
  CsvWriter ev(ctx.out / "events.csv", "boundary_events",
               concat(concat({"ray", "event"}, axis_columns("x", m.dim())),
                      {"classification", "corner", "normal_component", "dr_normal"}));
  int halted = 0;
  for (std::size_t i = 0; i < sec.starts.size(); ++i) {
    const RayStart& st = sec.starts[i];
    if (st.omega.norm() == 0.0) throw Error(ErrorKind::BadScenario, "ray direction is zero");
    const RayTrace tr = trace_damped(m, dom, DampedRay{st.mode, st.x, st.omega.normalized()}, sec.duration, to);
    for (const TracePoint& p : tr.points) {
      std::vector<CsvWriter::Cell> row{static_cast<long long>(i), p.s};
      append(row, p.x);
      append(row, p.omega);
      row.insert(row.end(), {p.log_weight, std::exp(p.log_weight), static_cast<long long>(p.flags)});
      pts.row(row);
    }
    for (std::size_t k = 0; k < tr.events.size(); ++k) {
      const BoundaryEvent& e = tr.events[k];
      std::vector<CsvWriter::Cell> row{static_cast<long long>(i), static_cast<long long>(k)};
      append(row, e.hit);
      row.insert(row.end(), {std::string(to_string(e.classification)), static_cast<long long>(e.corner),
                             e.normal_component, e.dr_normal});
      ev.row(row);
    }
    rep.metrics["ray/" + std::to_string(i) + "/elapsed"] = tr.elapsed;
    rep.metrics["ray/" + std::to_string(i) + "/log_weight"] = tr.final_ray.log_weight;
    if (tr.halted) {
      ++halted;
      rep.notes["ray/" + std::to_string(i) + "/halted"] = tr.diagnostic;
    }
  }
  rep.metrics["halted"] = halted;
  write_summary(rep, s.name);
  return rep;
}

Report run_transport(const Scenario& s, const RunOptions& opts) {
  Context ctx = prepare(s, opts);
  Report rep = new_report("transport", ctx.out);
  const CoefficientModel& m = ctx.model;
  const int d = m.dim();
  auto [plus, minus] = initial_measures(s, ctx.seed);
  const auto times = sorted_times(s.times.empty() ? std::vector<double>{0.0} : s.times);

  CsvWriter atoms(ctx.out / "measure.csv", "measure",
                  concat(concat({"t", "id", "mode"}, axis_columns("x", d)), concat(axis_columns("omega", d), {"weight"})));
  CsvWriter masses(ctx.out / "masses.csv", "masses", {"t", "mass_plus", "mass_minus", "total"});
  std::optional<CsvWriter> lam;
  const bool want_lambda = s.transport && !s.transport->lambda_radii.empty();
  if (want_lambda) {
    if (!m.has_sigma()) throw Error(ErrorKind::MissingSigma, "lambda_radii given but the model has no Sigma");
    lam.emplace(ctx.out / "lambda.csv", "lambda_mass", std::vector<std::string>{"t", "radius", "lambda_mass"});
  }

  double t_prev = 0.0, last_total = plus.total_mass() + minus.total_mass();
  const double initial_total = last_total;
  bool monotone = true;
  for (double t : times) {
    plus = advance(s, m, plus, t - t_prev);
    minus = advance(s, m, minus, t - t_prev);
    t_prev = t;
    for (const ParticleMeasure* mu : {&plus, &minus}) {
      for (const Atom& a : mu->atoms) {
        std::vector<CsvWriter::Cell> row{t, static_cast<long long>(a.id), std::string(to_string(a.mode))};
        append(row, a.x);
        append(row, a.omega);
        row.emplace_back(a.weight);
        atoms.row(row);
      }
    }
    const double total = plus.total_mass() + minus.total_mass();
    masses.row({t, plus.total_mass(), minus.total_mass(), total});
    monotone = monotone && total <= last_total * (1.0 + 1e-12);
    last_total = total;
    if (lam) {
      for (double r : s.transport->lambda_radii) {
        lam->row({t, r, lambda_mass(plus, m, r) + lambda_mass(minus, m, r)});
      }
    }
  }
  rep.metrics["initial_mass"] = initial_total;
  rep.metrics["final_mass"] = last_total;
  if (distorted_regime(s)) {
    rep.check("mass_conserved", std::abs(last_total - initial_total) <= 1e-12 * std::max(1.0, initial_total));
  } else {
    rep.check("mass_nonincreasing", monotone);
  }
  write_summary(rep, s.name);
  return rep;
}

namespace {

/// Steps a solver to t_end, calling `sample` at t = 0, every `every` steps,
/// at the first step reaching each snapshot time, and at the end.
struct Stepper {
  const DirectSolver& solver;
  double E0 = 0.0, D = 0.0, D_scheme = 0.0, phi = 0.0;

  void run(FieldState& st, double t_end, int every, const std::vector<double>& marks,
           const std::function<void(const FieldState&, int mark)>& sample) {
    E0 = energy(solver.grid(), st);
    phi = solver.dissipation_form(st.theta);
    const double dt = solver.grid().dt;
    const long steps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    std::size_t next_mark = 0;
    auto due_mark = [&] {
      int idx = -1;
      while (next_mark < marks.size() && marks[next_mark] <= st.t + 1e-9 * dt) idx = static_cast<int>(next_mark++);
      return idx;
    };
    sample(st, due_mark());
    for (long k = 1; k <= steps; ++k) {
      D_scheme += solver.step(st);
      const double next = solver.dissipation_form(st.theta);
      D += dt * (phi + next);
      phi = next;
      const int mark = due_mark();
      if (k % every == 0 || k == steps || mark >= 0) sample(st, mark);
    }
  }
};

}  // namespace

Report run_direct(const Scenario& s, const RunOptions& opts) {
  const DirectSection& sec = require(s.direct, "direct");
  Context ctx = prepare(s, opts);
  Report rep = new_report("direct", ctx.out);
  const CoefficientModel& m = ctx.model;
  const Vec dir = split_direction(s, sec);
  const auto snaps = sorted_times(sec.snapshot_times);

  CsvWriter en(ctx.out / "energy.csv", "energy", {"level", "t", "E", "D", "r", "D_scheme"});
  std::vector<std::string> mcols{"level", "t", "E_plus", "E_minus", "E_theta"};
  if (sec.hf_cutoff > 0.0) mcols.push_back("hf_fraction");
  CsvWriter modes(ctx.out / "modes.csv", "modes", mcols);
  CsvWriter levels(ctx.out / "levels.csv", "levels", {"level", "nx", "h", "dt", "eps", "E0", "r_final", "r_rel"});

  for (int L = 0; L < sec.levels(); ++L) {
    SolverOptions so;
    so.cfl = sec.cfl;
    so.cg_tol = s.tolerances.cg;
    so.heat = sec.heat;
    const Grid2D grid = make_grid(m.domain(), sec.nx_at(L), sec.cfl, sec.t_end);
    const DirectSolver solver(m, grid, so);
    FieldState st = packet_state(s, grid, sec.eps[L]);
    Stepper stepper{solver};
    double lastD = 0.0, lastDs = 0.0, r_final = 0.0;
    bool monotone = true;
    stepper.run(st, sec.t_end, sec.sample_every, snaps, [&](const FieldState& f, int mark) {
      const double E = energy(grid, f);
      if (!std::isfinite(E)) throw Error(ErrorKind::NumericalBreakdown, "energy is not finite");
      r_final = E - stepper.E0 + stepper.D;
      en.row({static_cast<long long>(L), f.t, E, stepper.D, r_final, stepper.D_scheme});
      monotone = monotone && stepper.D >= lastD && stepper.D_scheme >= lastDs;
      lastD = stepper.D;
      lastDs = stepper.D_scheme;
      const ModeEnergies me = mode_energies(grid, f, dir);
      std::vector<CsvWriter::Cell> row{static_cast<long long>(L), f.t, me.plus, me.minus, me.temperature};
      if (sec.hf_cutoff > 0.0) row.emplace_back(hf_temperature_fraction(grid, f, sec.hf_cutoff));
      modes.row(row);
      if (mark >= 0) {
        const Mat dens = coarse_energy_density(grid, f, sec.cell);
        CsvWriter snap(ctx.out / ("density_L" + std::to_string(L) + "_S" + std::to_string(mark) + ".csv"),
                       "density", {"t", "ix", "iy", "x", "y", "energy"});
        const double side = sec.cell * grid.h;
        for (Eigen::Index iy = 0; iy < dens.rows(); ++iy) {
          for (Eigen::Index ix = 0; ix < dens.cols(); ++ix) {
            snap.row({f.t, static_cast<long long>(ix), static_cast<long long>(iy), grid.box.lo[0] + (ix + 0.5) * side,
                      grid.box.lo[1] + (iy + 0.5) * side, dens(iy, ix)});
          }
        }
      }
    });
    const std::string tag = "level" + std::to_string(L);
    levels.row({static_cast<long long>(L), static_cast<long long>(grid.nx), grid.h, grid.dt, sec.eps[L], stepper.E0,
                r_final, r_final / stepper.E0});
    rep.metrics[tag + "/r_rel"] = r_final / stepper.E0;
    rep.metrics[tag + "/h"] = grid.h;
    rep.check(tag + "/dissipation_monotone", monotone);
    const double closure = std::abs(energy(grid, st) + stepper.D_scheme - stepper.E0) / stepper.E0;
    rep.metrics[tag + "/scheme_closure"] = closure;
    rep.check(tag + "/scheme_balance", closure <= 1e-6, "relative closure " + format_double(closure));
  }
  if (sec.levels() >= 2) {
    const double a = std::abs(rep.metrics["level" + std::to_string(sec.levels() - 2) + "/r_rel"]);
    const double b = std::abs(rep.metrics["level" + std::to_string(sec.levels() - 1) + "/r_rel"]);
    const double ha = rep.metrics["level" + std::to_string(sec.levels() - 2) + "/h"];
    const double hb = rep.metrics["level" + std::to_string(sec.levels() - 1) + "/h"];
    if (a > 0.0 && b > 0.0 && ha != hb) rep.metrics["residual_order"] = std::log(a / b) / std::log(ha / hb);
  }
  write_summary(rep, s.name);
  return rep;
}

ComparisonReport run_compare(const Scenario& s, const RunOptions& opts) {
  const DirectSection& dsec = require(s.direct, "direct");
  const CompareSection& csec = require(s.compare, "compare");
  Context ctx = prepare(s, opts);
  ComparisonReport out;
  out.report = new_report("compare", ctx.out);
  Report& rep = out.report;
  const CoefficientModel& m = ctx.model;
  const Regime regime = distorted_regime(s) ? Regime::Distorted : Regime::Damped;
  const Vec dir = split_direction(s, dsec);

  std::vector<double> marks;
  for (const WindowSpec& w : csec.windows) {
    if (w.t > dsec.t_end + 1e-12) throw Error(ErrorKind::BadScenario, "window '" + w.name + "' is after t_end");
    marks.push_back(w.t);
  }
  marks = sorted_times(marks);

  // The transported measure does not depend on eps: compute it once per mark.
  auto [plus0, minus0] = initial_measures(s, ctx.seed);
  std::vector<ParticleMeasure> mu_at;
  {
    ParticleMeasure p = plus0, q = minus0;
    double prev = 0.0;
    for (double t : marks) {
      p = advance(s, m, p, t - prev);
      q = advance(s, m, q, t - prev);
      prev = t;
      ParticleMeasure both = p;
      both.atoms.insert(both.atoms.end(), q.atoms.begin(), q.atoms.end());
      mu_at.push_back(std::move(both));
    }
  }
  const double plus_final = advance(s, m, plus0, dsec.t_end).total_mass();
  const double predicted_loss = plus0.total_mass() > 0.0 ? 1.0 - plus_final / plus0.total_mass() : 0.0;

  std::vector<Observable> obs;
  for (const WindowSpec& w : csec.windows) {
    Observable o;
    o.name = w.name;
    o.phi = smooth_box_cutoff(w.box, w.margin);
    o.phi_support = Box{w.box.lo.array() - w.margin, w.box.hi.array() + w.margin};
    obs.push_back(std::move(o));
  }

  CsvWriter wcsv(ctx.out / "compare.csv", "compare",
                 {"level", "eps", "nx", "window", "t", "pde", "prediction", "rel_deviation"});
  CsvWriter lcsv(ctx.out / "compare_levels.csv", "compare_levels",
                 {"level", "eps", "nx", "pde_loss", "predicted_loss", "loss_deviation", "hf_fraction", "theta_energy"});

  for (int L = 0; L < dsec.levels(); ++L) {
    SolverOptions so;
    so.cfl = dsec.cfl;
    so.cg_tol = s.tolerances.cg;
    so.heat = dsec.heat;
    const Grid2D grid = make_grid(m.domain(), dsec.nx_at(L), dsec.cfl, dsec.t_end);
    const DirectSolver solver(m, grid, so);
    FieldState st = packet_state(s, grid, dsec.eps[L]);
    const ModeEnergies start = mode_energies(grid, st, dir);
    Stepper stepper{solver};
    stepper.run(st, dsec.t_end, 1 << 30, marks, [&](const FieldState& f, int mark) {
      if (mark < 0) return;
      for (std::size_t w = 0; w < csec.windows.size(); ++w) {
        if (std::abs(csec.windows[w].t - marks[mark]) > 1e-12) continue;
        WindowRow row;
        row.level = L;
        row.eps = dsec.eps[L];
        row.nx = grid.nx;
        row.window = csec.windows[w].name;
        row.t = f.t;
        row.pde = windowed_energy(grid, f, obs[w].phi);
        row.prediction = pair(mu_at[mark], obs[w], m, regime);
        row.deviation = std::abs(row.pde - row.prediction) / std::max(std::abs(row.prediction), 1e-300);
        wcsv.row({static_cast<long long>(L), row.eps, static_cast<long long>(row.nx), row.window, row.t, row.pde,
                  row.prediction, row.deviation});
        out.windows.push_back(row);
      }
    });
    const ModeEnergies end = mode_energies(grid, st, dir);
    LevelRow lr;
    lr.level = L;
    lr.eps = dsec.eps[L];
    lr.nx = grid.nx;
    lr.pde_loss = start.plus > 0.0 ? 1.0 - end.plus / start.plus : 0.0;
    lr.predicted_loss = predicted_loss;
    lr.loss_deviation = predicted_loss > 0.0 ? std::abs(lr.pde_loss - predicted_loss) / predicted_loss
                                             : std::abs(lr.pde_loss);
    lr.hf_fraction = dsec.hf_cutoff > 0.0 ? hf_temperature_fraction(grid, st, dsec.hf_cutoff) : 0.0;
    lr.theta_energy = end.temperature;
    lcsv.row({static_cast<long long>(L), lr.eps, static_cast<long long>(lr.nx), lr.pde_loss, lr.predicted_loss,
              lr.loss_deviation, lr.hf_fraction, lr.theta_energy});
    out.levels.push_back(lr);
  }

  const int finest = dsec.levels() - 1;
  for (const WindowSpec& w : csec.windows) {
    std::vector<double> dev;
    for (const WindowRow& r : out.windows)
      if (r.window == w.name) dev.push_back(r.deviation);
    if (dev.empty()) continue;
    rep.metrics["window/" + w.name + "/finest_deviation"] = dev.back();
    rep.check("window/" + w.name + "/finest", dev.back() <= csec.max_deviation,
              "deviation " + format_double(dev.back()) + " vs " + format_double(csec.max_deviation));
    bool trend = true;
    for (std::size_t k = 1; k < dev.size(); ++k) trend = trend && dev[k] <= dev[k - 1] * (1.0 + csec.trend_slack);
    rep.check("window/" + w.name + "/trend", trend, "deviations must not grow across eps levels");
  }
  if (csec.mode_loss && finest >= 0) {
    const LevelRow& f = out.levels.back();
    rep.metrics["loss/pde"] = f.pde_loss;
    rep.metrics["loss/predicted"] = f.predicted_loss;
    rep.metrics["loss/deviation"] = f.loss_deviation;
    rep.check("mode_loss/finest", f.loss_deviation <= csec.max_loss_deviation,
              "pde " + format_double(f.pde_loss) + " predicted " + format_double(f.predicted_loss));
  }
  if (dsec.hf_cutoff > 0.0 && dsec.levels() >= 2) {
    const double a = out.levels[finest - 1].hf_fraction, b = out.levels[finest].hf_fraction;
    rep.metrics["hf/coarse"] = a;
    rep.metrics["hf/fine"] = b;
    rep.check("hf_fraction/decreases", b < a, format_double(a) + " -> " + format_double(b));
  }
  write_summary(rep, s.name);
  return out;
}

Report validate(const Scenario& s, const RunOptions& opts) {
  Context ctx = prepare(s, opts, false);
  Report rep = new_report("validate", ctx.out);
  const CoefficientModel& m = ctx.model;
  const int d = m.dim();
  CsvWriter csv(ctx.out / "validation.csv", "validation", {"check", "pass", "detail"});

  const StructureReport st = check_structure(m);
  rep.check("B_symmetric", st.symmetric, "max defect " + format_double(st.symmetry_defect_max));
  rep.check("B_psd", st.psd, "min eigenvalue " + format_double(st.min_eigenvalue));

  const std::string mismatch = regime_mismatch(s, m);
  rep.check("regime", mismatch.empty(), mismatch.empty() ? std::string(to_string(s.regime)) : mismatch);

  if (m.has_sigma()) {
    DegeneracyOptions o;
    o.transversality_threshold = s.tolerances.transversality;
    const DegeneracyReport r = weak_degeneracy_report(m, o);
    rep.notes["verdict"] = std::string(to_string(r.verdict));
    rep.metrics["transversality_min"] = r.transversality_min;
    rep.metrics["range_residual_max"] = r.range_residual_max;
    rep.metrics["lambda_samples"] = r.lambda_samples;
  }

  if (st.symmetric && st.psd) {
    const R0Estimate r0 = estimate_R0(m);
    rep.metrics["R0"] = r0.R0;
    rep.check("R0_stabilized", r0.stabilized, "R0 " + format_double(r0.R0));

    const int samples = s.spectrum ? s.spectrum->samples : 200;
    const double rmax = s.spectrum ? s.spectrum->radius_max : 1e4;
    const double rmin = std::max(r0.R0, 1e-3);
    std::mt19937_64 rng(ctx.seed);
    std::uniform_real_distribution<double> u(std::log(rmin), std::log(std::max(rmax, 2 * rmin)));
    SpectrumOptions so;
    so.residual_tol = s.tolerances.residual;
    double worst = 0.0;
    int min_kernel = d - 1;
    for (int k = 0; k < samples; ++k) {
      const Vec x = random_point(rng, m.domain());
      const Vec xi = std::exp(u(rng)) * random_unit(rng, d);
      const OracleCheck oc = spectrum_oracle(m, x, xi, so);
      worst = std::max(worst, oc.relative_error);
      min_kernel = std::min(min_kernel, oc.kernel_dimension);
    }
    rep.metrics["oracle_max_rel_err"] = worst;
    rep.check("cubic_oracle", worst <= s.tolerances.oracle, "max relative error " + format_double(worst));
    rep.check("kernel_dimension", min_kernel >= d - 1, "min " + std::to_string(min_kernel));

    if (s.spectrum) {
      const auto radii = log_space(s.spectrum->fit_radius_min, s.spectrum->fit_radius_max, s.spectrum->fit_count);
      for (std::size_t i = 0; i < s.spectrum->fits.size(); ++i) {
        for (const AsymptoticFit& f : asymptotic_residuals(m, s.spectrum->fits[i].x, s.spectrum->fits[i].omega, radii)) {
          rep.check("fit/" + std::to_string(i) + "/" + std::string(to_string(f.branch)), f.passes(),
                    f.exact ? "exact" : "slope " + format_double(f.slope));
        }
      }
    }
  }

  // Distorted flow: starts inside the zero patch, or on Sigma along the kernel of B.
  {
    std::mt19937_64 rng(ctx.seed + 1);
    std::vector<DistortedRay> starts;
    for (int k = 0; k < 20; ++k) {
      DistortedRay r{WaveMode::Plus, Vec(), Vec()};
      if (m.zero_patch()) {
        const Box& p = *m.zero_patch();
        r.x = random_point(rng, Box{p.lo.array() + 0.25 * p.size().array(), p.hi.array() - 0.25 * p.size().array()});
        r.omega = random_unit(rng, d);
      } else if (m.has_sigma()) {
        r.x = project_to_sigma(m, random_point(rng, m.domain()));
        Eigen::SelfAdjointEigenSolver<Mat> es(m.B(r.x));
        r.omega = es.eigenvectors().col(0);
      } else {
        break;
      }
      if (m.in_distorted_region(r.x, r.omega)) starts.push_back(r);
    }
    if (!starts.empty()) {
      double drift = 0.0;
      int done = 0;
      for (const DistortedRay& r0 : starts) {
        try {
          drift = std::max(drift, advance_distorted(m, r0, 0.5, 1e-3).c_drift_max);
          ++done;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::LeftPatch) throw;
        }
      }
      rep.metrics["distorted_c_drift"] = drift;
      rep.check("distorted_conservation", done > 0 && drift <= 1e-6,
                std::to_string(done) + " trajectories, drift " + format_double(drift));
    }
  }

  for (const Check& c : rep.checks) csv.row({c.name, static_cast<long long>(c.pass), c.detail});
  write_summary(rep, s.name);
  return rep;
}

}  // namespace thermoray
