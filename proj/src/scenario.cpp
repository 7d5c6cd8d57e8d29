#include "thermoray/scenario.hpp"

#include "thermoray/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace thermoray {

using json = nlohmann::json;

std::string_view to_string(RegimeKind r) {
  switch (r) {
    case RegimeKind::WeaklyDegenerate: return "weakly_degenerate";
    case RegimeKind::DegeneratePatch: return "degenerate_patch";
    case RegimeKind::TotalDamping: return "total_damping";
    case RegimeKind::Elliptic: return "elliptic";
  }
  return "?";
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::BadScenario, where + ": " + what);
}

/// Object view that remembers which keys were read; `done` rejects the rest.
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) bad(where_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) bad(where_, "missing key '" + key + "'");
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  double num(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) bad(path(key), "expected a number");
    return v.get<double>();
  }
  double num(const std::string& key, double dflt) { return has(key) ? num(key) : dflt; }

  long long integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) bad(path(key), "expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long dflt) { return has(key) ? integer(key) : dflt; }

  std::string str(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) bad(path(key), "expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& dflt) { return has(key) ? str(key) : dflt; }

  bool flag(const std::string& key, bool dflt) {
    if (!has(key)) return dflt;
    const json& v = j_.at(key);
    if (!v.is_boolean()) bad(path(key), "expected a boolean");
    return v.get<bool>();
  }

  Vec vec(const std::string& key) { return to_vec(at(key), path(key)); }

  std::vector<double> nums(const std::string& key) {
    const Vec v = vec(key);
    return {v.data(), v.data() + v.size()};
  }

  Obj obj(const std::string& key) { return Obj(at(key), path(key)); }

  const json& arr(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) bad(path(key), "expected an array");
    return v;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) bad(where_.empty() ? "scenario" : where_, "unknown key '" + it.key() + "'");
    }
  }

  static Vec to_vec(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) bad(where, "expected a non-empty array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) bad(where, "expected numbers");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Box parse_box(Obj o) {
  Box b{o.vec("lo"), o.vec("hi")};
  o.done();
  if (b.lo.size() != b.hi.size() || !((b.hi - b.lo).minCoeff() > 0.0)) {
    bad(o.path(""), "box needs lo < hi componentwise");
  }
  return b;
}

Domain parse_domain(Obj o) {
  const bool box = o.has("box"), disk = o.has("disk");
  if (box == disk) bad(o.path(""), "give exactly one of 'box' or 'disk'");
  Domain d;
  if (box) {
    d = parse_box(o.obj("box"));
  } else {
    Obj c = o.obj("disk");
    Disk k{c.vec("center"), c.num("radius")};
    c.done();
    if (k.center.size() != 2 || !(k.radius > 0.0)) bad(c.path(""), "disk needs a 2-D center and positive radius");
    d = k;
  }
  o.done();
  return d;
}

RegimeKind parse_regime(const std::string& s, const std::string& where) {
  for (RegimeKind r : {RegimeKind::WeaklyDegenerate, RegimeKind::DegeneratePatch, RegimeKind::TotalDamping,
                       RegimeKind::Elliptic}) {
    if (s == to_string(r)) return r;
  }
  bad(where, "unknown regime '" + s + "'");
}

ModelSpec parse_model(Obj o) {
  ModelSpec m;
  if (o.has("custom")) {
    if (o.has("preset")) bad(o.path(""), "give either 'preset' or 'custom'");
    Obj c = o.obj("custom");
    const json& rows = c.arr("B");
    const int d = static_cast<int>(rows.size());
    Mat B(d, d);
    for (int i = 0; i < d; ++i) {
      const Vec r = Obj::to_vec(rows[i], c.path("B"));
      if (r.size() != d) bad(c.path("B"), "B must be square");
      B.row(i) = r.transpose();
    }
    m.custom_B = B;
    m.custom_gamma = c.vec("gamma");
    c.done();
    if (m.custom_gamma->size() != d) bad(o.path("custom"), "gamma dimension does not match B");
    m.custom_domain = parse_box(o.obj("domain"));
    if (m.custom_domain->dim() != d) bad(o.path("domain"), "domain dimension does not match B");
    o.done();
    return m;
  }
  m.preset = o.str("preset");
  if (o.has("domain")) m.params.domain = parse_box(o.obj("domain"));
  m.params.b_exponent = static_cast<int>(o.integer("b_exponent", 2));
  m.params.dim = static_cast<int>(o.integer("dim", 2));
  m.params.diffusivity = o.num("diffusivity", 1.0);
  if (o.has("gamma")) m.params.gamma = o.vec("gamma");
  if (o.has("patch")) m.params.patch = parse_box(o.obj("patch"));
  o.done();
  return m;
}

WavePacket parse_packet(Obj o) {
  WavePacket p;
  p.center = o.vec("center");
  p.omega0 = o.vec("omega");
  p.width = o.num("width", p.width);
  p.mass = o.num("mass", p.mass);
  const std::string env = o.str("envelope", "gaussian");
  if (env == "gaussian") p.envelope = Envelope::Gaussian;
  else if (env == "flat_box") p.envelope = Envelope::FlatBox;
  else bad(o.path("envelope"), "expected 'gaussian' or 'flat_box'");
  try {
    p.balance = ModeBalance::parse(o.str("balance", "pure+"));
  } catch (const Error& e) {
    bad(o.path("balance"), e.what());
  }
  o.done();
  if (p.center.size() != p.omega0.size()) bad(o.path(""), "center and omega dimensions differ");
  return p;
}

Atom parse_atom(Obj o, std::int64_t id) {
  Atom a;
  a.id = id;
  a.x = o.vec("x");
  a.omega = o.vec("omega");
  a.weight = o.num("weight");
  try {
    a.mode = wave_mode_from_string(o.str("mode", "+"));
  } catch (const Error& e) {
    bad(o.path("mode"), e.what());
  }
  o.done();
  if (a.weight < 0.0) bad(o.path("weight"), "weights are nonnegative");
  return a;
}

void parse_initial(Obj o, Scenario& s) {
  if (o.has("packets")) {
    const json& ps = o.arr("packets");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      s.initial.packets.push_back(parse_packet(Obj(ps[i], o.path("packets[" + std::to_string(i) + "]"))));
    }
  }
  if (o.has("atoms")) {
    const json& as = o.arr("atoms");
    for (std::size_t i = 0; i < as.size(); ++i) {
      s.initial.atoms.push_back(
          parse_atom(Obj(as[i], o.path("atoms[" + std::to_string(i) + "]")), 1000000 + static_cast<std::int64_t>(i)));
    }
  }
  if (o.has("sampling")) {
    Obj q = o.obj("sampling");
    s.sampling.per_axis = static_cast<int>(q.integer("per_axis", s.sampling.per_axis));
    s.sampling.random = q.flag("random", s.sampling.random);
    s.sampling.random_count = static_cast<int>(q.integer("count", s.sampling.random_count));
    q.done();
    if (s.sampling.per_axis < 1 || s.sampling.random_count < 1) bad(q.path(""), "sample counts must be positive");
  }
  o.done();
}

SpectrumSection parse_spectrum(Obj o) {
  SpectrumSection s;
  s.samples = static_cast<int>(o.integer("samples", s.samples));
  s.radius_max = o.num("radius_max", s.radius_max);
  if (o.has("fits")) {
    const json& fs = o.arr("fits");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      Obj f(fs[i], o.path("fits[" + std::to_string(i) + "]"));
      s.fits.push_back(FitPoint{f.vec("x"), f.vec("omega")});
      f.done();
    }
  }
  s.fit_radius_min = o.num("fit_radius_min", s.fit_radius_min);
  s.fit_radius_max = o.num("fit_radius_max", s.fit_radius_max);
  s.fit_count = static_cast<int>(o.integer("fit_count", s.fit_count));
  o.done();
  if (s.samples < 1 || s.fit_count < 2 || !(s.fit_radius_max > s.fit_radius_min) || !(s.fit_radius_min > 0.0)) {
    bad(o.path(""), "invalid sample counts or radii");
  }
  return s;
}

RaySection parse_rays(Obj o) {
  RaySection r;
  if (o.has("domain")) r.domain = parse_domain(o.obj("domain"));
  const json& st = o.arr("starts");
  for (std::size_t i = 0; i < st.size(); ++i) {
    Obj q(st[i], o.path("starts[" + std::to_string(i) + "]"));
    RayStart s{q.vec("x"), q.vec("omega")};
    try {
      s.mode = wave_mode_from_string(q.str("mode", "+"));
    } catch (const Error& e) {
      bad(q.path("mode"), e.what());
    }
    q.done();
    r.starts.push_back(std::move(s));
  }
  r.duration = o.num("duration", r.duration);
  r.record_step = o.num("record_step", r.record_step);
  o.done();
  if (!(r.duration >= 0.0) || r.record_step < 0.0) bad(o.path(""), "negative duration or record_step");
  return r;
}

TransportSection parse_transport(Obj o) {
  TransportSection t;
  if (o.has("lambda_radii")) t.lambda_radii = o.nums("lambda_radii");
  t.dt = o.num("dt", t.dt);
  o.done();
  if (!(t.dt > 0.0)) bad(o.path("dt"), "must be positive");
  return t;
}

DirectSection parse_direct(Obj o) {
  DirectSection d;
  const json& nx = o.at("nx");
  if (nx.is_number_integer()) {
    d.nx = {nx.get<int>()};
  } else if (nx.is_array()) {
    for (const json& v : nx) {
      if (!v.is_number_integer()) bad(o.path("nx"), "expected integers");
      d.nx.push_back(v.get<int>());
    }
  } else {
    bad(o.path("nx"), "expected an integer or an array of integers");
  }
  d.eps = o.nums("eps");
  d.cfl = o.num("cfl", d.cfl);
  d.t_end = o.num("t_end", d.t_end);
  const std::string heat = o.str("heat", "crank_nicolson");
  if (heat == "crank_nicolson") d.heat = HeatScheme::CrankNicolson;
  else if (heat == "implicit_euler") d.heat = HeatScheme::ImplicitEuler;
  else bad(o.path("heat"), "expected 'crank_nicolson' or 'implicit_euler'");
  d.sample_every = static_cast<int>(o.integer("sample_every", d.sample_every));
  if (o.has("snapshot_times")) d.snapshot_times = o.nums("snapshot_times");
  d.cell = static_cast<int>(o.integer("cell", d.cell));
  if (o.has("split_direction")) d.split_direction = o.vec("split_direction");
  d.hf_cutoff = o.num("hf_cutoff", d.hf_cutoff);
  o.done();
  if (d.nx.size() != 1 && d.nx.size() != d.eps.size()) bad(o.path("nx"), "give one nx or one per eps level");
  if (d.sample_every < 1 || d.cell < 1 || !(d.t_end >= 0.0)) bad(o.path(""), "invalid sampling parameters");
  return d;
}

CompareSection parse_compare(Obj o) {
  CompareSection c;
  if (o.has("windows")) {
    const json& ws = o.arr("windows");
    for (std::size_t i = 0; i < ws.size(); ++i) {
      Obj w(ws[i], o.path("windows[" + std::to_string(i) + "]"));
      WindowSpec spec;
      spec.name = w.str("name", "w" + std::to_string(i));
      spec.box = Box{w.vec("lo"), w.vec("hi")};
      spec.margin = w.num("margin", spec.margin);
      spec.t = w.num("t");
      w.done();
      if (spec.box.lo.size() != 2 || spec.box.hi.size() != 2) bad(w.path(""), "windows are 2-D boxes");
      c.windows.push_back(std::move(spec));
    }
  }
  c.mode_loss = o.flag("mode_loss", c.mode_loss);
  c.max_deviation = o.num("max_deviation", c.max_deviation);
  c.max_loss_deviation = o.num("max_loss_deviation", c.max_loss_deviation);
  c.trend_slack = o.num("trend_slack", c.trend_slack);
  o.done();
  return c;
}

Tolerances parse_tolerances(Obj o) {
  Tolerances t;
  t.transversality = o.num("transversality", t.transversality);
  t.lambda = o.num("lambda", t.lambda);
  t.cg = o.num("cg", t.cg);
  t.residual = o.num("residual", t.residual);
  t.oracle = o.num("oracle", t.oracle);
  o.done();
  return t;
}

}  // namespace

Scenario parse_scenario(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::BadScenario, std::string("invalid JSON: ") + e.what());
  }
  Obj o(root, "");
  Scenario s;
  s.schema = static_cast<int>(o.integer("schema"));
  if (s.schema != 1) bad("schema", "unsupported schema version " + std::to_string(s.schema));
  s.name = o.str("name", "scenario");
  s.model = parse_model(o.obj("model"));
  s.regime = parse_regime(o.str("regime"), "regime");
  if (o.has("initial")) parse_initial(o.obj("initial"), s);
  if (o.has("times")) s.times = o.nums("times");
  if (o.has("spectrum")) s.spectrum = parse_spectrum(o.obj("spectrum"));
  if (o.has("rays")) s.rays = parse_rays(o.obj("rays"));
  if (o.has("transport")) s.transport = parse_transport(o.obj("transport"));
  if (o.has("direct")) s.direct = parse_direct(o.obj("direct"));
  if (o.has("compare")) s.compare = parse_compare(o.obj("compare"));
  if (o.has("tolerances")) s.tolerances = parse_tolerances(o.obj("tolerances"));
  s.output = o.str("output", "");
  const long long seed = o.integer("seed", 0);
  if (seed < 0) bad("seed", "must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  s.sampling.seed = s.seed;
  o.done();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::BadScenario, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

CoefficientModel build_model(const Scenario& s) {
  const ModelSpec& m = s.model;
  CoefficientModel model = [&] {
    if (m.custom_B) {
      const Mat B = *m.custom_B;
      const Vec g = *m.custom_gamma;
      const int d = static_cast<int>(g.size());
      ModelFunctions f;
      f.B = [B](const Vec&) { return B; };
      f.gamma = [g](const Vec&) { return g; };
      f.gamma_jacobian = [d](const Vec&) { return Mat(Mat::Zero(d, d)); };
      f.b0 = [](const Vec&) { return 0.0; };
      return CoefficientModel("custom", *m.custom_domain, std::move(f));
    }
    try {
      return make_preset(m.preset, m.params);
    } catch (const Error& e) {
      throw Error(ErrorKind::BadScenario, std::string("model: ") + e.what());
    }
  }();
  const SingularPolicy policy =
      s.regime == RegimeKind::TotalDamping ? SingularPolicy::Divergent : model.singular_policy();
  return model.with_policy(policy).with_tol_lambda(s.tolerances.lambda);
}

std::string regime_mismatch(const Scenario& s, const CoefficientModel& model) {
  switch (s.regime) {
    case RegimeKind::Elliptic: {
      const StructureReport st = check_structure(model, 17);
      if (!(st.min_eigenvalue > 1e-12)) {
        return "regime 'elliptic' needs B uniformly positive; min eigenvalue " + std::to_string(st.min_eigenvalue);
      }
      return {};
    }
    case RegimeKind::DegeneratePatch:
      if (!model.zero_patch()) return "regime 'degenerate_patch' needs a model with a zero patch";
      return {};
    case RegimeKind::WeaklyDegenerate:
    case RegimeKind::TotalDamping: {
      if (!model.has_sigma()) return "regime '" + std::string(to_string(s.regime)) + "' needs a level function for Sigma";
      DegeneracyOptions o;
      o.transversality_threshold = s.tolerances.transversality;
      const DegeneracyReport r = weak_degeneracy_report(model, o);
      if (s.regime == RegimeKind::WeaklyDegenerate && r.verdict != Verdict::WeaklyDegenerate) {
        return "regime 'weakly_degenerate' but the model verdict is " + std::string(to_string(r.verdict));
      }
      if (s.regime == RegimeKind::TotalDamping && r.condition2) {
        return "regime 'total_damping' but gamma lies in Range B (verdict " + std::string(to_string(r.verdict)) + ")";
      }
      return {};
    }
  }
  return {};
}

}  // namespace thermoray
