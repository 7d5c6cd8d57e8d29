#include "thermoray/app.hpp"
#include "thermoray/coefficients.hpp"
#include "thermoray/error.hpp"
#include "thermoray/presets.hpp"
#include "thermoray/rays.hpp"
#include "thermoray/scenario.hpp"
#include "thermoray/spectrum.hpp"

#include <pybind11/eigen.h>
#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace thermoray;

namespace {

PresetParams params_from(const py::kwargs& kw) {
  PresetParams p;
  for (auto item : kw) {
    const std::string key = py::str(item.first);
    py::handle v = item.second;
    if (key == "domain") {
      auto lh = v.cast<std::pair<Vec, Vec>>();
      p.domain = Box{lh.first, lh.second};
    } else if (key == "b_exponent") {
      p.b_exponent = v.cast<int>();
    } else if (key == "dim") {
      p.dim = v.cast<int>();
    } else if (key == "diffusivity") {
      p.diffusivity = v.cast<double>();
    } else if (key == "gamma") {
      p.gamma = v.cast<Vec>();
    } else if (key == "patch") {
      auto lh = v.cast<std::pair<Vec, Vec>>();
      p.patch = Box{lh.first, lh.second};
    } else {
      throw py::key_error("unknown preset parameter '" + key + "'");
    }
  }
  return p;
}

py::dict report_dict(const Report& r) {
  py::dict d;
  d["command"] = r.command;
  d["out_dir"] = r.out_dir.string();
  d["pass"] = r.pass();
  py::list checks;
  for (const Check& c : r.checks) checks.append(py::dict(py::arg("name") = c.name, py::arg("pass") = c.pass,
                                                         py::arg("detail") = c.detail));
  d["checks"] = checks;
  d["metrics"] = r.metrics;
  d["notes"] = r.notes;
  return d;
}

RunOptions run_options(const std::string& out, std::optional<std::uint64_t> seed, bool force) {
  RunOptions o;
  o.out = out;
  o.seed = seed;
  o.force = force;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "thermoelastic rays, measures and grid solver";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object kind = py::str(std::string(to_string(e.kind())));
      PyErr_SetObject(error.ptr(), py::make_tuple(kind, e.what()).ptr());
    }
  });

  py::class_<CoefficientModel>(m, "Model")
      .def_property_readonly("name", &CoefficientModel::name)
      .def_property_readonly("dim", &CoefficientModel::dim)
      .def_property_readonly("domain", [](const CoefficientModel& c) { return py::make_tuple(c.domain().lo, c.domain().hi); })
      .def("B", &CoefficientModel::B, py::arg("x"))
      .def("gamma", &CoefficientModel::gamma, py::arg("x"))
      .def("b0", [](const CoefficientModel& c, const Vec& x) { return compute_b0(c, x); }, py::arg("x"));

  m.def("presets", &preset_names);
  m.def("make_preset", [](const std::string& name, const py::kwargs& kw) { return make_preset(name, params_from(kw)); },
        py::arg("name"));

  m.def(
      "solve_spectrum",
      [](const CoefficientModel& model, const Vec& x, const Vec& xi) {
        const SpectrumResult r = solve_spectrum(make_symbol_point(model, x, xi));
        py::dict d;
        d["nu0"] = r.nu0;
        d["nu_plus"] = r.nu_plus;
        d["nu_minus"] = r.nu_minus;
        d["alpha"] = r.alpha;
        d["beta"] = r.beta;
        d["V0"] = r.V0;
        d["Vplus"] = r.Vplus;
        d["Vminus"] = r.Vminus;
        d["residual"] = r.max_residual;
        return d;
      },
      py::arg("model"), py::arg("x"), py::arg("xi"));
  m.def("symbol", [](const CoefficientModel& model, const Vec& x, const Vec& xi) { return assemble_Q(model, x, xi); },
        py::arg("model"), py::arg("x"), py::arg("xi"));

  m.def(
      "damped_weight",
      [](const CoefficientModel& model, const Vec& x0, const Vec& omega, double t) {
        return accumulate_damping(model, DampedRay{WaveMode::Plus, x0, omega.normalized()}, t).weight();
      },
      py::arg("model"), py::arg("x0"), py::arg("omega"), py::arg("t"));
  m.def(
      "distorted_ray",
      [](const CoefficientModel& model, const Vec& x, const Vec& omega, double t, double dt) {
        const DistortedRay r = advance_distorted(model, DistortedRay{WaveMode::Plus, x, omega.normalized()}, t, dt);
        return py::make_tuple(r.x, r.omega, r.c_drift_max);
      },
      py::arg("model"), py::arg("x"), py::arg("omega"), py::arg("t"), py::arg("dt") = 1e-3);
  m.def(
      "degeneracy_verdict",
      [](const CoefficientModel& model) { return std::string(to_string(weak_degeneracy_report(model).verdict)); },
      py::arg("model"));

  using Runner = Report (*)(const Scenario&, const RunOptions&);
  auto bind_run = [&m](const char* name, Runner run) {
    m.def(
        name,
        [run](const std::filesystem::path& scenario, const std::string& out, std::optional<std::uint64_t> seed,
              bool force) { return report_dict(run(load_scenario(scenario), run_options(out, seed, force))); },
        py::arg("scenario"), py::arg("out") = "", py::arg("seed") = py::none(), py::arg("force") = false);
  };
  bind_run("run_spectrum", &run_spectrum);
  bind_run("run_rays", &run_rays);
  bind_run("run_transport", &run_transport);
  bind_run("run_direct", &run_direct);
  bind_run("validate", &validate);
  m.def(
      "run_compare",
      [](const std::filesystem::path& scenario, const std::string& out, std::optional<std::uint64_t> seed, bool force) {
        return report_dict(run_compare(load_scenario(scenario), run_options(out, seed, force)).report);
      },
      py::arg("scenario"), py::arg("out") = "", py::arg("seed") = py::none(), py::arg("force") = false);
}
