#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "errors.hpp"
#include "learning.hpp"

namespace bariflex::verify {
namespace {

class Suite {
 public:
  void add(const std::string& module, const std::string& name, bool passed, double value, std::string detail = "") {
    checks_.push_back({module, name, passed, value, std::move(detail)});
  }

  // Runs `body`; an exception fails the check instead of the suite.
  template <class F>
  void run(const std::string& module, const std::string& name, F body) {
    try {
      body();
    } catch (const std::exception& e) {
      add(module, name, false, std::nan(""), e.what());
    }
  }

  std::vector<Check> take() { return std::move(checks_); }

 private:
  std::vector<Check> checks_;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string fmt(double v) { return format_number(v); }

}  // namespace

std::vector<Check> run_checks(const sim::GripperFixture& f, std::uint64_t seed, int samples) {
  Suite s;
  std::mt19937_64 rng(seed);
  const auto& g = f.geometry;
  const double lo = g.crank_angle_closed - linkage::kOvertravel;
  const double hi = g.crank_angle_open + linkage::kOvertravel;

  // linkage
  s.run("linkage", "loop_closure", [&] {
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) worst = std::max(worst, linkage::solve_loop(g, uniform(rng, lo, hi)).loop_residual(g));
    s.add("linkage", "loop_closure", worst < 1e-9, worst, "max residual [m] over " + std::to_string(samples) + " angles");
  });
  s.run("linkage", "jacobian_vs_difference", [&] {
    double worst = 0.0;
    const double h = 1e-6;
    for (int i = 0; i < 200; ++i) {
      const double t = uniform(rng, g.crank_angle_closed, g.crank_angle_open);
      const double analytic = linkage::transmission_jacobian(g, t).aperture_per_crank;
      const double numeric = (linkage::aperture(g, t + h) - linkage::aperture(g, t - h)) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic - numeric) / std::abs(numeric));
    }
    s.add("linkage", "jacobian_vs_difference", worst < 1e-6, worst, "max relative error");
  });
  s.run("linkage", "synthesis_constraints", [&] {
    const std::string why = linkage::check_synthesis(g, linkage::SynthesisConstraints{});
    s.add("linkage", "synthesis_constraints", why.empty(), linkage::aperture(g, g.crank_angle_open),
          why.empty() ? "open aperture [m]" : why);
  });
  s.run("linkage", "range_of_motion", [&] {
    const double rom = rad2deg(g.range_of_motion());
    s.add("linkage", "range_of_motion", std::abs(rom - 86.5) <= 0.5, rom, "[deg]");
  });
  s.run("linkage", "tip_excursion", [&] {
    const double ex = rad2deg(linkage::tip_excursion(g));
    s.add("linkage", "tip_excursion", ex <= 10.0 + 1e-9, ex, "[deg]");
  });

  // actuation
  s.run("actuation", "continuous_force", [&] {
    const double mid = 0.5 * (g.crank_angle_open + g.crank_angle_closed);
    const double force = linkage::fingertip_force(g, mid, 0.6);
    s.add("actuation", "continuous_force", force >= 8.25 && force <= 13.75, force, "[N] at 0.6 N m, mid-range");
  });
  s.run("actuation", "closing_time", [&] {
    const double t = actuation::closing_profile(f.motor, g.range_of_motion() * g.gear_ratio);
    s.add("actuation", "closing_time", std::abs(t - 0.180) <= 0.005, t, "[s]");
  });
  s.run("actuation", "static_friction_holds", [&] {
    const auto st = actuation::make_state(f.motor, 0.0);
    const auto next = actuation::step_motor(f.motor, st, 0.0, 0.5 * f.motor.coulomb_friction, 1e-3);
    s.add("actuation", "static_friction_holds", next.angle == 0.0 && next.velocity == 0.0, next.angle, "[rad]");
  });

  // elastics
  elastics::FinRayDesign design = f.has_finray() ? f.finray : elastics::FinRayDesign{};
  const elastics::FinRayFinger finger = elastics::build_finray(design);
  const int apex = finger.n_front_nodes() - 1;
  elastics::FinRayDeflection loaded;
  s.run("elastics", "work_equals_energy", [&] {
    // Frictionless load path: quasistatic ramp of an apex load into the face.
    const Vec2 full(-2.0, 0.0);
    const int n = 40;
    double work = 0.0;
    elastics::FinRayDeflection prev = elastics::finray_rest(finger);
    for (int k = 1; k <= n; ++k) {
      elastics::FinRayProblem p;
      p.loads.push_back({apex, full * (static_cast<double>(k) / n)});
      elastics::FinRayDeflection cur = elastics::finray_solve(finger, p, &prev);
      const Vec2 step = cur.deformed_node_positions[apex] - prev.deformed_node_positions[apex];
      work += (full * ((k - 0.5) / n)).dot(step);
      prev = std::move(cur);
    }
    loaded = prev;
    const double rel = std::abs(work - loaded.elastic_energy) / loaded.elastic_energy;
    s.add("elastics", "work_equals_energy", rel < 0.01, rel,
          "work " + fmt(work) + " J, energy " + fmt(loaded.elastic_energy) + " J");
  });
  s.run("elastics", "unload_returns", [&] {
    if (loaded.deformed_node_positions.empty()) throw NoConvergence("no loaded state");
    const auto rest = elastics::finray_rest(finger);
    const auto back = elastics::finray_solve(finger, elastics::FinRayProblem{}, &loaded);
    double worst = 0.0;
    for (std::size_t i = 0; i < rest.deformed_node_positions.size(); ++i) {
      worst = std::max(worst, (rest.deformed_node_positions[i] - back.deformed_node_positions[i]).norm());
    }
    s.add("elastics", "unload_returns", worst < 1e-9, worst, "max node distance [m]");
  });
  s.run("elastics", "stopper_blocks_extension", [&] {
    const auto r = elastics::fingertip_spring_torque(f.spring, f.spring.stopper_angle - 0.1, -0.2);
    s.add("elastics", "stopper_blocks_extension", r.stopper_engaged && r.angle == f.spring.stopper_angle, r.angle);
  });

  // contact
  s.run("contact", "antipodal_squeeze", [&] {
    const auto cube = contact::make_rectangle("cube", 0.04, 0.04, 0.1, 0.4);
    std::vector<contact::ContactPoint> cs(2);
    cs[0].position = Vec2(-0.02, 0.0);
    cs[0].normal = Vec2(1.0, 0.0);
    cs[0].finger = 0;
    cs[1].position = Vec2(0.02, 0.0);
    cs[1].normal = Vec2(-1.0, 0.0);
    cs[1].finger = 1;
    const auto held = contact::check_grasp(cs, cube, Vec2::Zero(), 9.81, 11.0);
    auto slick = cube;
    slick.friction_coefficient = 0.0;
    const auto slips = contact::check_grasp(cs, slick, Vec2::Zero(), 9.81, 11.0);
    s.add("contact", "antipodal_squeeze", held.success && !slips.success, held.success ? 1.0 : 0.0,
          "with friction: " + contact::failure_name(held.reason) + ", frictionless: " +
              contact::failure_name(slips.reason));
  });

  // sim
  s.run("sim", "close_keeps_kinematics", [&] {
    auto st = sim::make_state(f, 0.0);
    double worst = 0.0;
    for (int i = 0; i < 300; ++i) {
      st = sim::step(f, st, sim::Command::close(), {}, 1e-3);
      worst = std::max(worst, sim::kinematic_error(f, st));
    }
    const double ap = sim::state_aperture(f, st);
    s.add("sim", "close_keeps_kinematics", worst < 1e-9 && ap < 0.01, worst,
          "aperture after 0.3 s " + fmt(ap) + " m");
  });
  s.run("sim", "press_leaves_no_drift", [&] {
    const auto r = sim::press_probe(f, {0.0, 0.01, 0.02}, std::numeric_limits<double>::infinity());
    s.add("sim", "press_leaves_no_drift", r.rest_drift < 1e-9, r.rest_drift, "[m]");
  });

  // learning
  s.run("learning", "ucb_finds_best_arm", [&] {
    const auto counts = learning::bernoulli_pulls({0.9, 0.5, 0.1}, 2000, seed);
    const double frac = counts[0] / 2000.0;
    s.add("learning", "ucb_finds_best_arm", frac > 0.8, frac, "best-arm pull fraction");
  });

  return s.take();
}

bool all_passed(const std::vector<Check>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string checks_csv(const std::vector<Check>& checks) {
  std::string out = "module,check,passed,value,detail\n";
  for (const auto& c : checks) {
    std::string detail = c.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    out += c.module + "," + c.name + "," + (c.passed ? "1" : "0") + "," + fmt(c.value) + "," + detail + "\n";
  }
  return out;
}

}  // namespace bariflex::verify
