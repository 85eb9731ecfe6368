// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "experiments.hpp"
#include "learning.hpp"
#include "linkage.hpp"

using namespace bariflex;

namespace {

struct Verdict {
  bool ok = true;
  std::ostringstream why;
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      why << " [violated: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.ok = false;
    v.why << " [error: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(secs < limit_s, "runtime under " + format_number(limit_s) + " s");
  if (!v.ok) ++failures;
  std::printf("%s %d %s (%.1f s):%s\n", v.ok ? "PASS" : "FAIL", id, title.c_str(), secs, v.why.str().c_str());
  std::fflush(stdout);
}

std::vector<sim::GripperFixture> all_fixtures() {
  std::vector<sim::GripperFixture> out;
  for (const auto& n : sim::fixture_names()) out.push_back(sim::builtin_fixture(n));
  return out;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int hardware_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int main() {
  criterion(1, "compliance calibration", 30.0, [](Verdict& v) {
    auto fs = all_fixtures();
    const auto ref = experiments::load_reference(std::string(BARIFLEX_DATA_DIR) + "/compliance_reference.csv");
    experiments::calibrate(fs, ref);
    const auto rows = experiments::run_compliance(fs);
    const double f40 = experiments::force_at(rows, "bariflex", 1, 40.0);
    v.why << " bariflex F(40 mm) = " << fmt(f40) << " N";
    v.require(std::abs(f40 - 22.0) <= 4.0, "bariflex 22 +- 4 N at 40 mm");
    double rigid_last = 0.0;
    bool rigid_capped = false;
    for (const auto& r : rows) {
      if (r.fixture == "rigid_baseline" && r.trial == 1) {
        rigid_last = r.displacement_mm;
        rigid_capped = r.force_N >= 60.0;
      }
    }
    v.why << "; rigid capped at " << fmt(rigid_last) << " mm";
    v.require(rigid_capped && rigid_last < 40.0, "rigid reaches 60 N before 40 mm");
    int checked = 0;
    for (int trial = 1; trial <= 6; ++trial) {
      for (int mm = 10; mm <= 40; ++mm) {
        const double r = experiments::force_at(rows, "rigid_baseline", trial, mm);
        const double f95 = experiments::force_at(rows, "finray95", trial, mm);
        const double f87 = experiments::force_at(rows, "finray87", trial, mm);
        const double b = experiments::force_at(rows, "bariflex", trial, mm);
        v.require(r > f95 && f95 > f87 && f87 > b, "ordering at " + std::to_string(mm) + " mm, trial " +
                                                      std::to_string(trial));
        ++checked;
      }
    }
    v.why << "; ordering checked at " << checked << " samples";
  });

  criterion(2, "durability", 120.0, [](Verdict& v) {
    const auto rows = experiments::run_durability(sim::builtin_fixture("bariflex"), 200);
    double drift = 0.0;
    double change = 0.0;
    for (const auto& r : rows) {
      drift = std::max(drift, r.rest_drift_m);
      change = std::max(change, std::abs(r.peak_force_N - rows.front().peak_force_N) / rows.front().peak_force_N);
    }
    v.why << " " << rows.size() << " cycles, max rest drift " << fmt(drift) << " m, peak change " << fmt(change);
    v.require(rows.size() == 200, "200 cycles");
    v.require(drift < 1e-6, "rest drift < 1e-6 m");
    v.require(change < 1e-3, "peak force drift < 0.1 %");
  });

  criterion(3, "kinematics", 60.0, [](Verdict& v) {
    const auto g = linkage::synthesize_geometry(linkage::SynthesisConstraints{}, 0);
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<double> u(g.crank_angle_closed - linkage::kOvertravel,
                                             g.crank_angle_open + linkage::kOvertravel);
    double residual = 0.0;
    for (int i = 0; i < 10000; ++i) residual = std::max(residual, linkage::solve_loop(g, u(rng)).loop_residual(g));
    double jac = 0.0;
    std::uniform_real_distribution<double> in(g.crank_angle_closed, g.crank_angle_open);
    for (int i = 0; i < 1000; ++i) {
      const double t = in(rng);
      const double h = 1e-6;
      const double fd = (linkage::aperture(g, t + h) - linkage::aperture(g, t - h)) / (2 * h);
      jac = std::max(jac, std::abs(linkage::transmission_jacobian(g, t).aperture_per_crank - fd) / std::abs(fd));
    }
    const double open = linkage::aperture(g, g.crank_angle_open);
    const double ex = rad2deg(linkage::tip_excursion(g));
    const double rom = rad2deg(g.range_of_motion());
    v.why << " loop residual " << fmt(residual) << " m, jacobian rel err " << fmt(jac) << ", aperture "
          << fmt(open * 1e3, 6) << " mm, excursion " << fmt(ex) << " deg, ROM " << fmt(rom) << " deg";
    v.require(residual < 1e-9, "loop closure < 1e-9 m");
    v.require(jac < 1e-6, "jacobian rel err < 1e-6");
    v.require(std::abs(open - 0.200) <= 0.001, "aperture 200 +- 1 mm");
    v.require(ex <= 10.0, "tip excursion <= 10 deg");
    v.require(std::abs(rom - 86.5) <= 0.5, "ROM 86.5 +- 0.5 deg");
  });

  criterion(4, "force and speed", 10.0, [](Verdict& v) {
    const auto f = sim::builtin_fixture("bariflex");
    const auto& g = f.geometry;
    const double force = linkage::fingertip_force(g, 0.5 * (g.crank_angle_open + g.crank_angle_closed), 0.6);
    const double t = experiments::run_speed(f);
    v.why << " force " << fmt(force) << " N, closing " << fmt(t) << " s";
    v.require(force >= 8.25 && force <= 13.75, "11 N +- 25 %");
    v.require(std::abs(t - 0.180) <= 0.005, "0.180 +- 0.005 s");
  });

  std::vector<experiments::GraspRow> matrix;
  criterion(5, "grasp matrix", 300.0, [&](Verdict& v) {
    experiments::GraspMatrixOptions o;
    o.jobs = hardware_jobs();
    matrix = experiments::run_grasp_matrix(all_fixtures(), sim::default_objects(), o);
    for (const auto& n : sim::fixture_names()) {
      const int trials = static_cast<int>(std::count_if(matrix.begin(), matrix.end(),
                                                        [&](const auto& r) { return r.fixture == n; }));
      v.require(trials == 100, n + " has 100 trials");
      v.why << " " << n << " " << experiments::grasp_successes(matrix, n);
    }
    const int b = experiments::grasp_successes(matrix, "bariflex");
    for (const auto& n : {"rigid_baseline", "finray87", "finray95"}) {
      v.require(b > experiments::grasp_successes(matrix, n), std::string("bariflex beats ") + n);
    }
    const int drill95 = experiments::grasp_successes(matrix, "finray95", "drill");
    const int drill_r = experiments::grasp_successes(matrix, "rigid_baseline", "drill");
    const int knife95 = experiments::grasp_successes(matrix, "finray95", "knife");
    const int knife_r = experiments::grasp_successes(matrix, "rigid_baseline", "knife");
    v.why << "; drill finray95 " << drill95 << " vs rigid " << drill_r << "; knife rigid " << knife_r
          << " vs finray95 " << knife95;
    v.require(drill95 > drill_r, "finray95 > rigid on the drill");
    v.require(knife_r > knife95, "rigid > finray95 on the knife");
  });

  criterion(6, "precision", 10.0, [](Verdict& v) {
    const auto p = experiments::run_precision(sim::builtin_fixture("bariflex"));
    v.why << " mean " << fmt(p.mean_mm, 6) << " mm, std " << fmt(p.std_mm) << " mm, max dev " << fmt(p.max_dev_mm)
          << " mm over " << p.readings_mm.size() << " presses";
    v.require(p.readings_mm.size() == 25, "25 presses");
    v.require(std::abs(p.mean_mm - 3.76) <= 0.2, "mean 3.76 +- 0.2 mm");
    v.require(p.std_mm <= 0.03, "std <= 0.03 mm");
    v.require(p.max_dev_mm <= 0.09, "max dev <= 0.09 mm");
  });

  criterion(7, "learning", 120.0, [](Verdict& v) {
    const auto sc = learning::default_scenario();
    learning::Environment env(sc);
    int worst_steps = 0;
    int min_collisions = 1 << 30;
    int broken = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = learning::run_training(sc, seed, &env);
      v.require(r.solved && r.train_steps <= 175, "seed " + std::to_string(seed) + " solved within 175 steps");
      v.require(r.collisions > 0, "seed " + std::to_string(seed) + " collides");
      worst_steps = std::max(worst_steps, r.train_steps);
      min_collisions = std::min(min_collisions, r.collisions);
      broken += r.broken_steps;
    }
    v.require(broken == 0, "every collision leaves the invariants intact");
    double worst_frac = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto c = learning::bernoulli_pulls({0.9, 0.5, 0.1}, 2000, seed);
      worst_frac = std::min(worst_frac, c[0] / 2000.0);
    }
    v.require(worst_frac > 0.8, "best-arm fraction > 80 %");
    v.why << " worst train steps " << worst_steps << ", fewest collisions " << min_collisions << ", broken steps "
          << broken << ", worst best-arm fraction " << fmt(worst_frac);
  });

  criterion(8, "determinism", 300.0, [&](Verdict& v) {
    experiments::GraspMatrixOptions serial;
    serial.jobs = 1;
    experiments::GraspMatrixOptions parallel;
    parallel.jobs = std::max(4, hardware_jobs());
    const auto fs = all_fixtures();
    const auto objs = sim::default_objects();
    const std::string a = experiments::grasp_csv(experiments::run_grasp_matrix(fs, objs, serial));
    const std::string b = experiments::grasp_csv(experiments::run_grasp_matrix(fs, objs, parallel));
    v.require(a == b, "grasp matrix identical for jobs 1 and " + std::to_string(parallel.jobs));
    if (!matrix.empty()) v.require(a == experiments::grasp_csv(matrix), "grasp matrix identical across runs");
    v.require(experiments::compliance_csv(experiments::run_compliance(fs)) ==
                  experiments::compliance_csv(experiments::run_compliance(fs)),
              "compliance csv");
    const auto bari = sim::builtin_fixture("bariflex");
    v.require(experiments::durability_csv(experiments::run_durability(bari, 5)) ==
                  experiments::durability_csv(experiments::run_durability(bari, 5)),
              "durability csv");
    v.require(experiments::precision_csv(experiments::run_precision(bari)) ==
                  experiments::precision_csv(experiments::run_precision(bari)),
              "precision csv");
    const auto sc = learning::default_scenario();
    v.require(learning::learning_csv(learning::run_training(sc, 3).log) ==
                  learning::learning_csv(learning::run_training(sc, 3).log),
              "learning csv");
    v.why << " grasp matrix with jobs 1 and " << parallel.jobs << ", compliance, durability, precision, learning";
  });

  criterion(9, "energy and elasticity", 30.0, [](Verdict& v) {
    double worst_energy = 0.0;
    double worst_unload = 0.0;
    for (const auto& f : all_fixtures()) {
      if (!f.has_finray()) continue;
      const auto finger = elastics::build_finray(f.finray);
      const int apex = finger.n_front_nodes() - 1;
      const Vec2 full(-2.0, 0.5);
      const int n = 50;
      double work = 0.0;
      auto prev = elastics::finray_rest(finger);
      for (int k = 1; k <= n; ++k) {
        elastics::FinRayProblem p;
        p.loads.push_back({apex, full * (double(k) / n)});
        auto cur = elastics::finray_solve(finger, p, &prev);
        work += (full * ((k - 0.5) / n)).dot(cur.deformed_node_positions[apex] - prev.deformed_node_positions[apex]);
        prev = std::move(cur);
      }
      worst_energy = std::max(worst_energy, std::abs(work - prev.elastic_energy) / prev.elastic_energy);
      const auto back = elastics::finray_solve(finger, elastics::FinRayProblem{}, &prev);
      const auto rest = elastics::finray_rest(finger);
      for (std::size_t i = 0; i < rest.deformed_node_positions.size(); ++i) {
        worst_unload = std::max(worst_unload, (back.deformed_node_positions[i] - rest.deformed_node_positions[i]).norm());
      }
    }
    v.why << " work/energy rel err " << fmt(worst_energy) << ", unload error " << fmt(worst_unload) << " m";
    v.require(worst_energy < 0.01, "work = energy within 1 %");
    v.require(worst_unload < 1e-9, "unload within 1e-9 m");
  });

  std::printf("%s: %d of 9 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
