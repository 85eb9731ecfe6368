#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "sim.hpp"

using namespace bariflex;
using namespace bariflex::sim;
namespace fs = std::filesystem;

namespace {

const contact::ObjectShape2D& object_named(const std::string& name) {
  static const auto objects = default_objects();
  for (const auto& o : objects)
    if (o.name == name) return o;
  throw std::runtime_error("no object " + name);
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("bariflex_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

GripperState at_mid(const GripperFixture& f) {
  const auto& g = f.geometry;
  return make_state(f, linkage::motor_from_crank(g, 0.5 * (g.crank_angle_open + g.crank_angle_closed)));
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("fixtures validate and differ where documented") {
  CHECK(fixture_names() == std::vector<std::string>{"bariflex", "rigid_baseline", "finray87", "finray95"});
  const auto bari = builtin_fixture("bariflex");
  const auto rigid = builtin_fixture("rigid_baseline");
  for (const auto& n : fixture_names()) CHECK_NOTHROW(builtin_fixture(n).validate());
  CHECK(rigid.motor.coulomb_friction == doctest::Approx(100.0 * bari.motor.coulomb_friction));
  CHECK(rigid.finger == FingerKind::rigid);
  CHECK(builtin_fixture("finray87").finray.material == elastics::Material::TPU87A);
  CHECK(builtin_fixture("finray95").finray.material == elastics::Material::TPU95A);
  CHECK_THROWS_AS(builtin_fixture("parallel_jaw"), ConfigError);
}

TEST_CASE("closing from open takes the rated time") {
  const auto f = builtin_fixture("bariflex");
  auto s = make_state(f, 0.0);
  CHECK(state_aperture(f, s) == doctest::Approx(0.200).epsilon(0.005));
  const double dt = 1e-3;
  double reached = -1.0;
  double worst = 0.0;
  for (int i = 1; i <= 400 && reached < 0; ++i) {
    s = step(f, s, Command::close(), {}, dt);
    worst = std::max(worst, kinematic_error(f, s));
    if (state_aperture(f, s) <= 0.002) reached = i * dt;
  }
  CHECK(reached == doctest::Approx(0.180).epsilon(0.01 / 0.180));
  CHECK(worst < 1e-9);
}

TEST_CASE("hold with no load is an equilibrium") {
  for (const auto& name : fixture_names()) {
    const auto f = builtin_fixture(name);
    const auto s0 = at_mid(f);
    auto s = s0;
    for (int i = 0; i < 50; ++i) s = step(f, s, Command::hold(0.0), {}, 1e-3);
    CHECK(s.motor.angle == s0.motor.angle);
    CHECK(state_distance(f, s, s0) < 1e-12);
  }
}

TEST_CASE("a 5 N fingertip push back-drives only the low-friction motor") {
  auto push = [](const GripperFixture& f) {
    auto s = at_mid(f);
    const double start = s.motor.angle;
    for (int i = 0; i < 50; ++i) {
      const ExternalLoad load{1, s.joints[1].fingertip_position, Vec2(-5.0, 0.0)};
      s = step(f, s, Command::hold(0.0), {load}, 1e-3);
    }
    CHECK(kinematic_error(f, s) < 1e-9);
    return s.motor.angle - start;
  };
  CHECK(std::abs(push(builtin_fixture("bariflex"))) > 1e-3);
  CHECK(push(builtin_fixture("rigid_baseline")) == 0.0);
}

TEST_CASE("travel limits bound the motor") {
  const auto f = builtin_fixture("bariflex");
  const auto [lo, hi] = motor_travel_limits(f);
  CHECK(lo < 0.0);
  CHECK(hi > linkage::motor_from_crank(f.geometry, f.geometry.crank_angle_closed));
  auto s = make_state(f, 0.0);
  for (int i = 0; i < 600; ++i) {
    s = step(f, s, Command::close(), {}, 1e-3);
    CHECK(s.motor.angle <= hi + 1e-12);
  }
  for (int i = 0; i < 600; ++i) {
    s = step(f, s, Command::open(), {}, 1e-3);
    CHECK(s.motor.angle >= lo - 1e-12);
  }
}

TEST_CASE("stepping is deterministic") {
  const auto f = builtin_fixture("finray95");
  auto run = [&] {
    auto s = make_state(f, 0.0);
    for (int i = 0; i < 120; ++i) s = step(f, s, i < 60 ? Command::close() : Command::position(0.4), {}, 1e-3);
    return state_to_config(s).dump();
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.find("motor") != std::string::npos);
}

TEST_CASE("grasps at zero offset") {
  CHECK(grasp_object(builtin_fixture("bariflex"), object_named("pringles"), {}).verdict.success);
  const auto knife = grasp_object(builtin_fixture("rigid_baseline"), object_named("knife"), {});
  CHECK(knife.verdict.success);
  for (const auto& c : knife.verdict.forces) {
    CHECK(std::abs(c.tangential_force) <= object_named("knife").friction_coefficient * c.normal_force + 1e-9);
  }
}

TEST_CASE("objects wider than the stroke cannot be grasped") {
  const auto wide = contact::make_rectangle("crate", 0.25, 0.10, 0.5, 0.6);
  for (const auto& name : fixture_names()) {
    CHECK_FALSE(grasp_object(builtin_fixture(name), wide, {}).verdict.success);
  }
}

TEST_CASE("grasp outcome is reproducible") {
  const auto f = builtin_fixture("bariflex");
  const GraspOffset off{0.04, 0.0, deg2rad(30.0)};
  const auto a = grasp_object(f, object_named("mustard"), off);
  const auto b = grasp_object(f, object_named("mustard"), off);
  CHECK(a.verdict.success == b.verdict.success);
  CHECK(a.verdict.reason == b.verdict.reason);
  CHECK(a.squeeze == b.squeeze);
  CHECK(a.crank_angles == b.crank_angles);
}

TEST_CASE("press curves") {
  for (const auto& name : fixture_names()) {
    const auto f = builtin_fixture(name);
    std::vector<double> schedule;
    for (int mm = 0; mm <= 40; ++mm) schedule.push_back(mm * 1e-3);
    const auto r = press_probe(f, schedule);
    REQUIRE(!r.samples.empty());
    CHECK(r.samples.front().force == doctest::Approx(0.0).epsilon(1e-9));
    for (std::size_t i = 1; i < r.samples.size(); ++i) {
      CHECK(r.samples[i].force >= r.samples[i - 1].force - 1e-9);
    }
    CHECK(r.rest_drift < 1e-9);
    if (name == "bariflex") {
      CHECK_FALSE(r.capped);
      CHECK(r.samples.back().force == doctest::Approx(22.0).epsilon(4.0 / 22.0));
    }
    if (name == "rigid_baseline") {
      CHECK(r.capped);
      CHECK(r.samples.back().displacement < 0.040);
      CHECK(r.samples.back().force >= 60.0);
    }
  }
}

TEST_CASE("fixture bundles round-trip") {
  const auto dir = scratch_dir("bundle");
  for (const auto& name : fixture_names()) {
    const auto f = builtin_fixture(name);
    save_fixture(f, dir.string());
    const auto g = load_fixture((dir / (name + ".fixture")).string());
    CHECK(g.name == f.name);
    CHECK(g.finger == f.finger);
    CHECK(g.motor.coulomb_friction == f.motor.coulomb_friction);
    CHECK(g.geometry.crank_angle_open == f.geometry.crank_angle_open);
    CHECK(g.finray.modulus_scale == f.finray.modulus_scale);
    CHECK(g.spring.stiffness == f.spring.stiffness);
    CHECK(g.force_limit == f.force_limit);
    CHECK(g.grasp_height == f.grasp_height);
    CHECK(g.probe_mode == f.probe_mode);
    CHECK(resolve_fixture(name, dir.string()).name == name);
  }
  CHECK(resolve_fixture("default", "").name == "bariflex");
  CHECK(resolve_fixture((dir / "finray87.fixture").string(), "").name == "finray87");
  CHECK_THROWS_AS(resolve_fixture("nonexistent", dir.string()), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("malformed bundle reports the line") {
  const auto dir = scratch_dir("bad");
  save_fixture(builtin_fixture("bariflex"), dir.string());
  const auto path = dir / "bariflex.fixture";
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  in.close();
  const auto pos = text.find("force_limit");
  REQUIRE(pos != std::string::npos);
  const auto eol = text.find('\n', pos);
  text.replace(pos, eol - pos, "force_limit = abc");
  const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n'));
  std::ofstream(path, std::ios::trunc) << text;
  try {
    load_fixture(path.string());
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":" + std::to_string(line) + ":") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("object sets round-trip") {
  const auto dir = scratch_dir("objects");
  const auto objs = default_objects();
  write_text_file((dir / "objects.cfg").string(), objects_to_config(objs).dump());
  const auto back = load_objects((dir / "objects.cfg").string());
  REQUIRE(back.size() == objs.size());
  for (std::size_t i = 0; i < objs.size(); ++i) {
    CHECK(back[i].name == objs[i].name);
    CHECK(back[i].kind == objs[i].kind);
    CHECK(back[i].mass == objs[i].mass);
    CHECK(back[i].friction_coefficient == objs[i].friction_coefficient);
    CHECK(back[i].vertices.size() == objs[i].vertices.size());
    CHECK(back[i].center_of_mass == objs[i].center_of_mass);
  }
  fs::remove_all(dir);
}

}
