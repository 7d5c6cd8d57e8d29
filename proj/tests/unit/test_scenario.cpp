#include "thermoray/app.hpp"
#include "thermoray/csv.hpp"
#include "thermoray/error.hpp"
#include "thermoray/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace thermoray;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "schema": 1,
  "name": "minimal",
  "model": {"preset": "example21", "domain": {"lo": [-2, -2], "hi": [2, 2]}},
  "regime": "weakly_degenerate",
  "initial": {
    "packets": [{"center": [-0.6, 0.3], "omega": [1, 0], "width": 0.2}],
    "sampling": {"random": true, "count": 500}
  },
  "times": [0, 0.3],
  "transport": {"lambda_radii": [0.1, 0.05]},
  "seed": 5
})";

std::string with(const std::string& key_value) {
  std::string s = kMinimal;
  s.insert(s.rfind('}'), ",\n" + key_value);
  return s;
}

ErrorKind kind_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return ErrorKind::BadSpec;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("thermoray_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Scenario, ParsesMinimal) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_EQ(s.name, "minimal");
  EXPECT_EQ(s.regime, RegimeKind::WeaklyDegenerate);
  ASSERT_EQ(s.initial.packets.size(), 1u);
  EXPECT_DOUBLE_EQ(s.initial.packets[0].width, 0.2);
  EXPECT_TRUE(s.sampling.random);
  EXPECT_EQ(s.sampling.random_count, 500);
  EXPECT_EQ(s.seed, 5u);
  ASSERT_TRUE(s.transport);
  EXPECT_EQ(s.transport->lambda_radii.size(), 2u);
  EXPECT_FALSE(s.direct);
}

TEST(Scenario, UnknownKeysAreErrors) {
  EXPECT_EQ(kind_of(with(R"("colour": 1)")), ErrorKind::BadScenario);
  std::string nested = kMinimal;
  nested.replace(nested.find("\"width\""), 7, "\"widht\"");
  EXPECT_EQ(kind_of(nested), ErrorKind::BadScenario);
}

TEST(Scenario, SchemaVersionIsChecked) {
  std::string s = kMinimal;
  s.replace(s.find("\"schema\": 1"), 11, "\"schema\": 2");
  EXPECT_EQ(kind_of(s), ErrorKind::BadScenario);
  std::string missing = kMinimal;
  missing.erase(missing.find("\"schema\": 1,"), 12);
  EXPECT_EQ(kind_of(missing), ErrorKind::BadScenario);
}

TEST(Scenario, MalformedInputIsBadScenario) {
  EXPECT_EQ(kind_of("{ not json"), ErrorKind::BadScenario);
  EXPECT_EQ(kind_of("[]"), ErrorKind::BadScenario);
  std::string wrong_type = kMinimal;
  wrong_type.replace(wrong_type.find("\"times\": [0, 0.3]"), 17, "\"times\": \"soon\"");
  EXPECT_EQ(kind_of(wrong_type), ErrorKind::BadScenario);
  std::string regime = kMinimal;
  regime.replace(regime.find("weakly_degenerate"), 17, "mostly_harmless");
  EXPECT_EQ(kind_of(regime), ErrorKind::BadScenario);
}

TEST(Scenario, RegimeMismatchNeedsForce) {
  std::string text = kMinimal;
  text.replace(text.find("weakly_degenerate"), 17, "total_damping");
  const Scenario s = parse_scenario(text);
  EXPECT_FALSE(regime_mismatch(s, build_model(s)).empty());
  RunOptions o;
  o.out = scratch("mismatch");
  try {
    run_transport(s, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadScenario);
  }
  o.force = true;
  EXPECT_NO_THROW(run_transport(s, o));
}

TEST(Scenario, EveryShippedScenarioParses) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(THERMORAY_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(build_model(load_scenario(entry.path()))) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 8);
}

TEST(Csv, CommentLineHeaderAndQuoting) {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  {
    CsvWriter w(dir / "t.csv", "demo", {"a", "b", "c"});
    w.row({1.5, 2LL, std::string("x, \"y\"")});
    EXPECT_THROW(w.row({1.0}), Error);
  }
  EXPECT_EQ(slurp(dir / "t.csv"), "# thermoray-csv schema=1 table=demo\na,b,c\n1.5,2,\"x, \"\"y\"\"\"\n");
}

TEST(Csv, DoublesRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(u(rng), static_cast<int>(u(rng)));
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(-INFINITY), "-inf");
}

TEST(App, OutputsAreByteIdenticalForEqualSeeds) {
  const Scenario s = parse_scenario(kMinimal);
  RunOptions a, b, c;
  a.out = scratch("det_a");
  b.out = scratch("det_b");
  c.out = scratch("det_c");
  c.seed = 6;
  run_transport(s, a);
  run_transport(s, b);
  run_transport(s, c);
  for (const char* f : {"measure.csv", "masses.csv", "lambda.csv", "transport_summary.json"}) {
    EXPECT_EQ(slurp(a.out / f), slurp(b.out / f)) << f;
  }
  EXPECT_NE(slurp(a.out / "measure.csv"), slurp(c.out / "measure.csv"));
}

TEST(App, EveryCsvHasSchemaLineAndHeader) {
  const Scenario s = parse_scenario(kMinimal);
  RunOptions o;
  o.out = scratch("schema_lines");
  run_transport(s, o);
  validate(s, o);
  int n = 0;
  for (const auto& entry : fs::directory_iterator(o.out)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path());
    std::string first, second;
    std::getline(in, first);
    std::getline(in, second);
    EXPECT_EQ(first.rfind("# thermoray-csv schema=1 table=", 0), 0u) << entry.path();
    EXPECT_FALSE(second.empty());
    EXPECT_NE(second[0], '#');
    ++n;
  }
  EXPECT_GE(n, 4);
}

TEST(App, SpectrumOracleAgreesWithDenseSolver) {
  const auto m = build_model(parse_scenario(kMinimal));
  Vec x(2), xi(2);
  x << 0.3, -0.2;
  xi << 300.0, -40.0;
  const OracleCheck oc = spectrum_oracle(m, x, xi);
  EXPECT_LE(oc.relative_error, 1e-12);
  EXPECT_GE(oc.kernel_dimension, 1);
}

TEST(App, ValidateFlagsNonSymmetricCustomModel) {
  const Scenario s = parse_scenario(R"({
    "schema": 1, "name": "bad",
    "model": {"custom": {"B": [[1, 0.3], [0, 1]], "gamma": [0.5, 0]}, "domain": {"lo": [-1, -1], "hi": [1, 1]}},
    "regime": "elliptic", "initial": {}
  })");
  RunOptions o;
  o.out = scratch("bad_custom");
  const Report r = validate(s, o);
  EXPECT_FALSE(r.pass());
  bool flagged = false;
  for (const Check& c : r.checks) flagged = flagged || (c.name == "B_symmetric" && !c.pass);
  EXPECT_TRUE(flagged);
}

TEST(App, ZeroTimeWindowMatchesInitialEnergy) {
  const Scenario s = parse_scenario(R"({
    "schema": 1, "name": "zero_time",
    "model": {"preset": "elliptic_iso", "domain": {"lo": [-1, -1], "hi": [1, 1]}},
    "regime": "elliptic",
    "initial": {"packets": [{"center": [0, 0], "omega": [0.6, 0.8], "width": 0.2}], "sampling": {"per_axis": 61}},
    "direct": {"nx": 256, "eps": [0.03125], "t_end": 0.02},
    "compare": {"windows": [{"name": "all", "lo": [-0.9, -0.9], "hi": [0.9, 0.9], "margin": 0.05, "t": 0}],
                "max_deviation": 0.02}
  })");
  RunOptions o;
  o.out = scratch("zero_time");
  const ComparisonReport r = run_compare(s, o);
  ASSERT_EQ(r.windows.size(), 1u);
  EXPECT_NEAR(r.windows[0].prediction, 1.0, 1e-3);
  EXPECT_LE(r.windows[0].deviation, 0.02);
  EXPECT_TRUE(r.report.pass());
}
