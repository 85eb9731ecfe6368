#include <doctest.h>

#include <cmath>
#include <numeric>

#include "errors.hpp"
#include "experiments.hpp"

using namespace bariflex;
using namespace bariflex::experiments;
using sim::builtin_fixture;

namespace {

std::string golden(const std::string& name) { return read_text_file(std::string(BARIFLEX_GOLDEN_DIR) + "/" + name); }

std::vector<ReferencePoint> reference_from(const sim::GripperFixture& f) {
  ComplianceOptions o;
  o.trials = 1;
  const auto rows = run_compliance({f}, o);
  std::vector<ReferencePoint> ref;
  for (double mm : {10.0, 20.0, 30.0, 40.0}) ref.push_back({f.name, mm, force_at(rows, f.name, 1, mm)});
  return ref;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("compliance trials repeat and keep the ordering") {
  std::vector<sim::GripperFixture> fs;
  for (const auto& n : sim::fixture_names()) fs.push_back(builtin_fixture(n));
  ComplianceOptions o;
  o.trials = 3;
  const auto rows = run_compliance(fs, o);
  for (const auto& n : sim::fixture_names()) {
    for (int mm = 0; mm <= 40; ++mm) {
      const double f1 = force_at(rows, n, 1, mm);
      if (std::isnan(f1)) continue;
      CHECK(std::abs(force_at(rows, n, 3, mm) - f1) <= 1e-6);
    }
  }
  CHECK(force_at(rows, "bariflex", 1, 0) == 0.0);
  CHECK(force_at(rows, "bariflex", 1, 40) == doctest::Approx(22.0).epsilon(4.0 / 22.0));
  CHECK(force_at(rows, "rigid_baseline", 1, 40) == 60.0);
  for (int mm = 10; mm <= 40; ++mm) {
    const double b = force_at(rows, "bariflex", 1, mm);
    const double f87 = force_at(rows, "finray87", 1, mm);
    const double f95 = force_at(rows, "finray95", 1, mm);
    const double r = force_at(rows, "rigid_baseline", 1, mm);
    CHECK(r > f95);
    CHECK(f95 > f87);
    CHECK(f87 > b);
  }
  CHECK(std::isnan(force_at(rows, "bariflex", 1, 41)));
  CHECK(run_compliance(fs, ComplianceOptions{0}).empty());
}

TEST_CASE("capped curves stop at the cap") {
  const auto rows = run_compliance({builtin_fixture("rigid_baseline")}, ComplianceOptions{1});
  REQUIRE(!rows.empty());
  CHECK(rows.back().force_N >= 60.0);
  CHECK(rows.back().displacement_mm < 40.0);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) CHECK(rows[i].force_N < 60.0);
}

TEST_CASE("durability") {
  const auto f = builtin_fixture("bariflex");
  CHECK(run_durability(f, 0).empty());
  CHECK_THROWS_AS(run_durability(f, -1), InvalidArgument);
  const auto rows = run_durability(f, 12);
  REQUIRE(rows.size() == 12);
  for (const auto& r : rows) {
    CHECK(r.rest_drift_m < 1e-6);
    CHECK(std::abs(r.peak_force_N - rows.front().peak_force_N) <= 1e-3 * rows.front().peak_force_N);
  }
  CHECK(rows.front().peak_force_N == doctest::Approx(22.0).epsilon(4.0 / 22.0));
}

TEST_CASE("grasp positions") {
  const auto p = grasp_positions(0.04);
  REQUIRE(p.size() == 5);
  CHECK(p[0].dx == 0.0);
  CHECK(p[0].dy == 0.0);
  int along_x = 0;
  int along_y = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    CHECK(std::hypot(p[i].dx, p[i].dy) == doctest::Approx(0.04));
    along_x += p[i].dy == 0.0;
    along_y += p[i].dx == 0.0;
  }
  CHECK(along_x == 2);
  CHECK(along_y == 2);
}

TEST_CASE("grasp matrix rows are ordered and independent of jobs") {
  const std::vector<sim::GripperFixture> fs{builtin_fixture("bariflex"), builtin_fixture("rigid_baseline")};
  const auto all = sim::default_objects();
  const std::vector<contact::ObjectShape2D> objs{all[0], all[3]};
  GraspMatrixOptions o;
  const auto serial = run_grasp_matrix(fs, objs, o);
  o.jobs = 3;
  const auto parallel = run_grasp_matrix(fs, objs, o);
  REQUIRE(serial.size() == 2 * 2 * 5 * 4);
  CHECK(grasp_csv(serial) == grasp_csv(parallel));
  CHECK(serial[0].fixture == "bariflex");
  CHECK(serial[0].object == objs[0].name);
  CHECK(serial[1].theta_deg == 15.0);
  CHECK(serial.back().fixture == "rigid_baseline");
  int manual = 0;
  for (const auto& r : serial) {
    manual += r.fixture == "rigid_baseline" && r.object == "knife" && r.success;
    CHECK((r.reason == "none") == r.success);
  }
  CHECK(grasp_successes(serial, "rigid_baseline", "knife") == manual);
  CHECK(grasp_successes(serial, "rigid_baseline") >= manual);
  int at_centre = 0;
  for (const auto& r : serial) at_centre += r.fixture == "bariflex" && r.dx_mm == 0 && r.dy_mm == 0 && r.success;
  CHECK(grasp_successes_at(serial, "bariflex", 0, 0) == at_centre);
}

TEST_CASE("precision presses") {
  const auto f = builtin_fixture("bariflex");
  const auto r = run_precision(f);
  REQUIRE(r.readings_mm.size() == 25);
  const double mean = std::accumulate(r.readings_mm.begin(), r.readings_mm.end(), 0.0) / 25.0;
  double var = 0.0;
  double dev = 0.0;
  for (double x : r.readings_mm) {
    var += (x - mean) * (x - mean);
    dev = std::max(dev, std::abs(x - mean));
    const double counts = x / 0.0254;
    CHECK(std::abs(counts - std::round(counts)) < 1e-9);
  }
  CHECK(r.mean_mm == doctest::Approx(mean).epsilon(1e-12));
  // sample or population spread, both must hold the bound
  CHECK(std::sqrt(var / 24.0) <= 0.03);
  CHECK(r.std_mm <= 0.03);
  CHECK(r.max_dev_mm == doctest::Approx(dev).epsilon(1e-12));
  CHECK(r.mean_mm == doctest::Approx(3.76).epsilon(0.2 / 3.76));
  CHECK(r.max_dev_mm <= 0.09);

  PrecisionOptions o;
  o.seed = 4;
  const auto other = run_precision(f, o);
  CHECK(precision_csv(other) == precision_csv(run_precision(f, o)));
  CHECK(precision_csv(other) != precision_csv(r));
  // noise-free press lands on the target
  CHECK(press_indicator(f, PrecisionOptions{}, r.command, 1.0) == doctest::Approx(3.7597e-3).epsilon(1e-4));
}

TEST_CASE("closing speed") {
  CHECK(run_speed(builtin_fixture("bariflex")) == doctest::Approx(0.180).epsilon(0.005 / 0.180));
}

TEST_CASE("csv round-trips") {
  std::vector<ComplianceRow> c{{"bariflex", 1, 0.0, 0.0}, {"bariflex", 1, 1.0, 0.1 + 0.2}, {"rigid", 2, 3.5, 1e-17}};
  CHECK(parse_compliance_csv(compliance_csv(c)) == c);
  std::vector<DurabilityRow> d{{1, 21.123456789012345, 0.0}, {2, 21.1, 3e-12}};
  CHECK(parse_durability_csv(durability_csv(d)) == d);
  std::vector<GraspRow> g{{"bariflex", "drill", -40.0, 0.0, 45.0, false, "no_closure"},
                          {"finray95", "knife", 0.0, 40.0, 15.0, true, "none"}};
  CHECK(parse_grasp_csv(grasp_csv(g)) == g);
  PrecisionResult p;
  p.readings_mm = {3.7592, 3.7846, 3.7338};
  CHECK(parse_precision_csv(precision_csv(p)) == p.readings_mm);
  std::vector<std::pair<std::string, double>> s{{"bariflex", 0.18000000000000002}};
  CHECK(parse_speed_csv(speed_csv(s)) == s);
}

TEST_CASE("malformed csv names the line") {
  const std::string bad = "fixture,trial,displacement_mm,force_N\nbariflex,1,0,0\nbariflex,x,1,0\n";
  try {
    parse_compliance_csv(bad);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_compliance_csv("trial,fixture\n"), ConfigError);
  CHECK_THROWS_AS(parse_grasp_csv("fixture,object,dx_mm,dy_mm,theta_deg,verdict,reason\nb,o,0,0,0,maybe,none\n"),
                  ConfigError);
}

TEST_CASE("golden outputs") {
  ComplianceOptions o;
  o.trials = 1;
  const auto rows = run_compliance({builtin_fixture("bariflex"), builtin_fixture("finray87")}, o);
  std::vector<ComplianceRow> bari;
  std::vector<ComplianceRow> f87;
  for (const auto& r : rows) (r.fixture == "bariflex" ? bari : f87).push_back(r);
  CHECK(compliance_csv(bari) == golden("compliance_bariflex.csv"));
  CHECK(compliance_csv(f87) == golden("compliance_finray87.csv"));
  CHECK(precision_csv(run_precision(builtin_fixture("bariflex"))) == golden("precision_bariflex.csv"));
  std::vector<std::pair<std::string, double>> speeds;
  for (const auto& n : sim::fixture_names()) speeds.emplace_back(n, run_speed(builtin_fixture(n)));
  CHECK(speed_csv(speeds) == golden("speed.csv"));
}

TEST_CASE("reference parsing") {
  const auto ref = parse_reference("# comment\nfixture,displacement_mm,force_N\nbariflex,10,5.5\n\nfinray87,40,30\n");
  REQUIRE(ref.size() == 2);
  CHECK(ref[1].fixture == "finray87");
  CHECK(ref[1].force_N == 30.0);
  try {
    parse_reference("fixture,displacement_mm,force_N\nbariflex,70,5\n", "ref.csv");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ref.csv:2:") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_reference("fixture,displacement_mm,force_N\nbariflex,10,-1\n"), ConfigError);
  const auto shipped = load_reference(std::string(BARIFLEX_DATA_DIR) + "/compliance_reference.csv");
  CHECK(shipped.size() == 12);
}

TEST_CASE("calibration recovers known parameters") {
  auto truth_b = builtin_fixture("bariflex");
  truth_b.spring.stiffness *= 1.3;
  auto truth_f = builtin_fixture("finray87");
  truth_f.finray.modulus_scale = 0.8;
  auto ref = reference_from(truth_b);
  const auto ref_f = reference_from(truth_f);
  ref.insert(ref.end(), ref_f.begin(), ref_f.end());

  std::vector<sim::GripperFixture> fs{builtin_fixture("bariflex"), builtin_fixture("finray87"),
                                      builtin_fixture("rigid_baseline")};
  const auto fits = calibrate(fs, ref);
  CHECK(fs[0].spring.stiffness == doctest::Approx(truth_b.spring.stiffness).epsilon(0.01));
  CHECK(fs[1].finray.modulus_scale == doctest::Approx(0.8).epsilon(0.01));
  CHECK(fs[2].motor.coulomb_friction == builtin_fixture("rigid_baseline").motor.coulomb_friction);
  for (const auto& r : fits) CHECK(r.rms_N < 0.05);
  CHECK(calibration_csv(fits).rfind("fixture,", 0) == 0);
}

}
