#include "bariflex/bariflex.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ios>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"
#include "experiments.hpp"
#include "learning.hpp"
#include "verify.hpp"

struct bf_fixture {
  bariflex::sim::GripperFixture f;
};

struct bf_objects {
  std::vector<bariflex::contact::ObjectShape2D> list;
};

struct bf_state {
  bariflex::sim::GripperState s;
};

struct bf_report {
  std::vector<std::pair<std::string, std::string>> files;
  std::vector<std::pair<std::string, double>> metrics;
  std::string summary;
  bool passed = true;

  void file(std::string name, std::string text) { files.emplace_back(std::move(name), std::move(text)); }
  void metric(std::string name, double v) { metrics.emplace_back(std::move(name), v); }
  void bound(bool ok, const std::string& what) {
    summary += (ok ? "PASS " : "FAIL ") + what + "\n";
    passed = passed && ok;
  }
  void note(const std::string& what) { summary += "     " + what + "\n"; }
};

namespace {

using namespace bariflex;

thread_local std::string last_error;

template <class F>
bf_status guard(F body) {
  last_error.clear();
  try {
    body();
    return BF_OK;
  } catch (const InvalidArgument& e) {
    last_error = e.what();
    return BF_INVALID_ARGUMENT;
  } catch (const ConfigError& e) {
    last_error = e.what();
    return BF_CONFIG_ERROR;
  } catch (const NoConvergence& e) {
    last_error = e.what();
    return BF_NO_CONVERGENCE;
  } catch (const SingularTransmission& e) {
    last_error = e.what();
    return BF_SINGULAR;
  } catch (const LinkageLocked& e) {
    last_error = e.what();
    return BF_LINKAGE_LOCKED;
  } catch (const SynthesisFailed& e) {
    last_error = e.what();
    return BF_SYNTHESIS_FAILED;
  } catch (const std::ios_base::failure& e) {
    last_error = e.what();
    return BF_IO_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return BF_INTERNAL_ERROR;
  } catch (...) {
    last_error = "unknown error";
    return BF_INTERNAL_ERROR;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " is null");
}

std::vector<sim::GripperFixture> collect(const bf_fixture* const* fixtures, size_t count) {
  if (count == 0) throw InvalidArgument("no fixtures given");
  need(fixtures, "fixture list");
  std::vector<sim::GripperFixture> out;
  for (size_t i = 0; i < count; ++i) {
    need(fixtures[i], "fixture");
    out.push_back(fixtures[i]->f);
  }
  return out;
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

bool has(const std::vector<sim::GripperFixture>& fs, const std::string& name) {
  return std::any_of(fs.begin(), fs.end(), [&](const auto& f) { return f.name == name; });
}

constexpr double kForceCap = 60.0;

// Compliance bounds over whichever fixtures were run.
void compliance_bounds(bf_report& r, const std::vector<sim::GripperFixture>& fs,
                       const std::vector<experiments::ComplianceRow>& rows, int trials) {
  for (const auto& f : fs) {
    for (double d : {10.0, 20.0, 30.0, 40.0}) {
      r.metric(f.name + ".force_" + num(d) + "mm", experiments::force_at(rows, f.name, 1, d, kForceCap));
    }
    double last = 0.0;
    double spread = 0.0;
    for (const auto& row : rows) {
      if (row.fixture != f.name) continue;
      if (row.trial == 1) last = std::max(last, row.displacement_mm);
      if (row.trial > 1) {
        spread = std::max(spread, std::abs(row.force_N - experiments::force_at(rows, f.name, 1, row.displacement_mm,
                                                                                 kForceCap)));
      }
    }
    r.metric(f.name + ".trial_spread_N", spread);
    if (trials > 1) r.bound(spread <= 1e-6, f.name + " trials repeat: spread " + num(spread) + " N <= 1e-6");
    if (f.name == "bariflex") {
      const double f40 = experiments::force_at(rows, f.name, 1, 40.0, kForceCap);
      r.bound(f40 >= 18.0 && f40 <= 26.0, "bariflex force at 40 mm = " + num(f40) + " N, within 22 +- 4");
    }
    if (f.name == "rigid_baseline") {
      r.bound(last < 40.0, "rigid_baseline reaches the " + num(kForceCap) + " N cap at " + num(last) + " mm < 40 mm");
    }
  }
  const std::vector<std::string> order = {"rigid_baseline", "finray95", "finray87", "bariflex"};
  std::vector<std::string> present;
  for (const auto& n : order) {
    if (has(fs, n)) present.push_back(n);
  }
  if (present.size() < 2) return;
  bool ok = true;
  std::string where;
  for (double d = 10.0; d <= 40.0 + 1e-9; d += 1.0) {
    for (size_t i = 0; i + 1 < present.size(); ++i) {
      const double a = experiments::force_at(rows, present[i], 1, d, kForceCap);
      const double b = experiments::force_at(rows, present[i + 1], 1, d, kForceCap);
      if (!(a > b)) {
        ok = false;
        if (where.empty()) where = " (breaks at " + num(d) + " mm: " + present[i] + " vs " + present[i + 1] + ")";
      }
    }
  }
  std::string chain;
  for (const auto& n : present) chain += (chain.empty() ? "" : " > ") + n;
  r.bound(ok, "force ordering " + chain + " at every 1 mm sample from 10 to 40 mm" + where);
}

}  // namespace

// Basics ------------------------------------------------------------------------

extern "C" {

const char* bf_last_error(void) { return last_error.c_str(); }

const char* bf_status_name(bf_status status) {
  switch (status) {
    case BF_OK: return "ok";
    case BF_INVALID_ARGUMENT: return "invalid argument";
    case BF_CONFIG_ERROR: return "config error";
    case BF_NO_CONVERGENCE: return "no convergence";
    case BF_SINGULAR: return "singular transmission";
    case BF_LINKAGE_LOCKED: return "linkage locked";
    case BF_SYNTHESIS_FAILED: return "synthesis failed";
    case BF_IO_ERROR: return "i/o error";
    case BF_INTERNAL_ERROR: return "internal error";
  }
  return "unknown status";
}

const char* bf_version(void) { return "1.0.0"; }
const char* bf_default_fixture_dir(void) { return BARIFLEX_DEFAULT_FIXTURE_DIR; }
const char* bf_default_data_dir(void) { return BARIFLEX_DEFAULT_DATA_DIR; }

// Fixtures ----------------------------------------------------------------------

size_t bf_builtin_fixture_count(void) { return sim::fixture_names().size(); }

const char* bf_builtin_fixture_name(size_t index) {
  const auto& n = sim::fixture_names();
  return index < n.size() ? n[index].c_str() : nullptr;
}

bf_status bf_fixture_open(const char* spec, const char* fixture_dir, bf_fixture** out) {
  return guard([&] {
    need(spec, "fixture spec");
    need(out, "output handle");
    *out = nullptr;
    auto h = std::make_unique<bf_fixture>();
    h->f = sim::resolve_fixture(spec, fixture_dir ? fixture_dir : "");
    *out = h.release();
  });
}

bf_status bf_fixture_save(const bf_fixture* fixture, const char* dir) {
  return guard([&] {
    need(fixture, "fixture");
    need(dir, "directory");
    sim::save_fixture(fixture->f, dir);
  });
}

const char* bf_fixture_name(const bf_fixture* fixture) { return fixture ? fixture->f.name.c_str() : nullptr; }

void bf_fixture_free(bf_fixture* fixture) { delete fixture; }

bf_status bf_objects_open(const char* path, bf_objects** out) {
  return guard([&] {
    need(out, "output handle");
    *out = nullptr;
    auto h = std::make_unique<bf_objects>();
    h->list = path ? sim::load_objects(path) : sim::default_objects();
    *out = h.release();
  });
}

size_t bf_objects_count(const bf_objects* objects) { return objects ? objects->list.size() : 0; }

bf_status bf_objects_save(const bf_objects* objects, const char* path) {
  return guard([&] {
    need(objects, "objects");
    need(path, "path");
    write_text_file(path, sim::objects_to_config(objects->list).dump());
  });
}

void bf_objects_free(bf_objects* objects) { delete objects; }

// Simulation --------------------------------------------------------------------

bf_status bf_state_create(const bf_fixture* fixture, double motor_angle, bf_state** out) {
  return guard([&] {
    need(fixture, "fixture");
    need(out, "output handle");
    *out = nullptr;
    auto h = std::make_unique<bf_state>();
    h->s = sim::make_state(fixture->f, motor_angle);
    *out = h.release();
  });
}

bf_status bf_state_step(const bf_fixture* fixture, bf_state* state, bf_command_kind kind, double value, double dt) {
  return guard([&] {
    need(fixture, "fixture");
    need(state, "state");
    sim::Command c;
    switch (kind) {
      case BF_CMD_OPEN: c = sim::Command::open(); break;
      case BF_CMD_CLOSE: c = sim::Command::close(); break;
      case BF_CMD_HOLD: c = sim::Command::hold(value); break;
      case BF_CMD_POSITION: c = sim::Command::position(value); break;
      default: throw InvalidArgument("unknown command kind");
    }
    state->s = sim::step(fixture->f, state->s, c, {}, dt);
  });
}

bf_status bf_state_motor_angle(const bf_state* state, double* out) {
  return guard([&] {
    need(state, "state");
    need(out, "output");
    *out = state->s.motor.angle;
  });
}

bf_status bf_state_aperture(const bf_fixture* fixture, const bf_state* state, double* out) {
  return guard([&] {
    need(fixture, "fixture");
    need(state, "state");
    need(out, "output");
    *out = sim::state_aperture(fixture->f, state->s);
  });
}

void bf_state_free(bf_state* state) { delete state; }

// Experiments -------------------------------------------------------------------

bf_status bf_synthesize(uint64_t seed, bf_report** out) {
  return guard([&] {
    need(out, "output handle");
    *out = nullptr;
    auto r = std::make_unique<bf_report>();
    const linkage::SynthesisConstraints c;
    const linkage::LinkageGeometry g = linkage::synthesize_geometry(c, seed);
    const std::string why = linkage::check_synthesis(g, c);
    const double ap = linkage::aperture(g, g.crank_angle_open);
    const double rom = rad2deg(g.range_of_motion());
    const double ex = rad2deg(linkage::tip_excursion(g));
    r->metric("open_aperture_m", ap);
    r->metric("range_of_motion_deg", rom);
    r->metric("tip_excursion_deg", ex);
    r->bound(std::abs(ap - 0.200) <= 0.001, "open aperture " + num(ap * 1e3, 6) + " mm within 200 +- 1");
    r->bound(std::abs(rom - 86.5) <= 0.5, "range of motion " + num(rom, 6) + " deg within 86.5 +- 0.5");
    r->bound(ex <= 10.0, "tip excursion " + num(ex) + " deg <= 10");
    r->bound(why.empty(), "all synthesis constraints" + (why.empty() ? std::string() : ": " + why));
    r->file("synthesized_geometry.cfg", linkage::geometry_to_config(g).dump());
    r->file("objects.cfg", sim::objects_to_config(sim::default_objects()).dump());
    r->file("learning_cube.cfg", learning::scenario_to_config(learning::default_scenario()).dump());
    *out = r.release();
  });
}

bf_status bf_run_compliance(const bf_fixture* const* fixtures, size_t count, int trials, bf_report** out) {
  return guard([&] {
    need(out, "output handle");
    *out = nullptr;
    const auto fs = collect(fixtures, count);
    experiments::ComplianceOptions o;
    o.trials = trials;
    o.force_cap = kForceCap;
    if (trials < 1) throw InvalidArgument("trials must be >= 1");
    const auto rows = experiments::run_compliance(fs, o);
    auto r = std::make_unique<bf_report>();
    for (const auto& f : fs) {
      std::vector<experiments::ComplianceRow> mine;
      for (const auto& row : rows) {
        if (row.fixture == f.name) mine.push_back(row);
      }
      r->file("compliance_" + f.name + ".csv", experiments::compliance_csv(mine));
    }
    compliance_bounds(*r, fs, rows, trials);
    *out = r.release();
  });
}

bf_status bf_run_durability(const bf_fixture* fixture, int cycles, bf_report** out) {
  return guard([&] {
    need(fixture, "fixture");
    need(out, "output handle");
    *out = nullptr;
    const auto rows = experiments::run_durability(fixture->f, cycles);
    auto r = std::make_unique<bf_report>();
    r->file("durability_" + fixture->f.name + ".csv", experiments::durability_csv(rows));
    double drift = 0.0, change = 0.0;
    for (const auto& row : rows) {
      drift = std::max(drift, row.rest_drift_m);
      change = std::max(change, std::abs(row.peak_force_N - rows.front().peak_force_N) / rows.front().peak_force_N);
    }
    r->metric("cycles", static_cast<double>(rows.size()));
    r->metric("max_rest_drift_m", drift);
    r->metric("peak_force_change", change);
    if (!rows.empty()) {
      r->metric("first_peak_N", rows.front().peak_force_N);
      r->metric("last_peak_N", rows.back().peak_force_N);
      r->bound(drift < 1e-6, "rest drift " + num(drift) + " m < 1e-6 over " + std::to_string(rows.size()) + " cycles");
      r->bound(change < 1e-3, "peak force change " + num(change * 100.0) + " % < 0.1 %");
    }
    *out = r.release();
  });
}

bf_status bf_run_grasp_matrix(const bf_fixture* const* fixtures, size_t count, const bf_objects* objects, int jobs,
                              bf_report** out) {
  return guard([&] {
    need(objects, "objects");
    need(out, "output handle");
    *out = nullptr;
    const auto fs = collect(fixtures, count);
    experiments::GraspMatrixOptions o;
    o.jobs = jobs;
    const auto rows = experiments::run_grasp_matrix(fs, objects->list, o);
    auto r = std::make_unique<bf_report>();
    r->file("grasp_matrix.csv", experiments::grasp_csv(rows));

    std::map<std::string, int> total;
    for (const auto& f : fs) {
      total[f.name] = experiments::grasp_successes(rows, f.name);
      r->metric(f.name + ".successes", total[f.name]);
      for (const auto& obj : objects->list) {
        r->metric(f.name + "." + obj.name + ".successes", experiments::grasp_successes(rows, f.name, obj.name));
      }
      const auto positions = experiments::grasp_positions(o.offset);
      const int centre = experiments::grasp_successes_at(rows, f.name, 0.0, 0.0);
      bool never_helps = true;
      for (const auto& p : positions) {
        const int at = experiments::grasp_successes_at(rows, f.name, p.dx * 1e3, p.dy * 1e3);
        r->metric(f.name + ".at_" + num(p.dx * 1e3) + "_" + num(p.dy * 1e3) + ".successes", at);
        never_helps = never_helps && at <= centre;
      }
      r->bound(never_helps, f.name + ": no offset beats the centre (" + std::to_string(centre) + " at centre)");
    }
    if (has(fs, "bariflex") && fs.size() > 1) {
      bool best = true;
      for (const auto& f : fs) {
        if (f.name != "bariflex" && total[f.name] >= total["bariflex"]) best = false;
      }
      std::string counts;
      for (const auto& f : fs) counts += (counts.empty() ? "" : ", ") + f.name + " " + std::to_string(total[f.name]);
      r->bound(best, "bariflex has strictly the most successes (" + counts + ")");
    }
    auto per = [&](const std::string& fx, const std::string& obj) {
      return experiments::grasp_successes(rows, fx, obj);
    };
    auto has_object = [&](const std::string& n) {
      return std::any_of(objects->list.begin(), objects->list.end(), [&](const auto& o2) { return o2.name == n; });
    };
    if (has(fs, "finray95") && has(fs, "rigid_baseline")) {
      if (has_object("drill")) {
        r->bound(per("finray95", "drill") > per("rigid_baseline", "drill"),
                 "drill: finray95 " + std::to_string(per("finray95", "drill")) + " > rigid_baseline " +
                     std::to_string(per("rigid_baseline", "drill")));
      }
      if (has_object("knife")) {
        r->bound(per("rigid_baseline", "knife") > per("finray95", "knife"),
                 "knife: rigid_baseline " + std::to_string(per("rigid_baseline", "knife")) + " > finray95 " +
                     std::to_string(per("finray95", "knife")));
      }
    }
    *out = r.release();
  });
}

bf_status bf_run_precision(const bf_fixture* fixture, uint64_t seed, bf_report** out) {
  return guard([&] {
    need(fixture, "fixture");
    need(out, "output handle");
    *out = nullptr;
    experiments::PrecisionOptions o;
    o.seed = seed;
    const auto p = experiments::run_precision(fixture->f, o);
    auto r = std::make_unique<bf_report>();
    r->file("precision_" + fixture->f.name + ".csv", experiments::precision_csv(p));
    r->metric("mean_mm", p.mean_mm);
    r->metric("std_mm", p.std_mm);
    r->metric("max_dev_mm", p.max_dev_mm);
    r->metric("command_rad", p.command);
    r->bound(std::abs(p.mean_mm - 3.76) <= 0.2, "mean press " + num(p.mean_mm, 6) + " mm within 3.76 +- 0.2");
    r->bound(p.std_mm <= 0.03, "std " + num(p.std_mm) + " mm <= 0.03");
    r->bound(p.max_dev_mm <= 0.09, "max deviation " + num(p.max_dev_mm) + " mm <= 0.09");
    *out = r.release();
  });
}

bf_status bf_run_speed(const bf_fixture* const* fixtures, size_t count, bf_report** out) {
  return guard([&] {
    need(out, "output handle");
    *out = nullptr;
    const auto fs = collect(fixtures, count);
    auto r = std::make_unique<bf_report>();
    std::vector<std::pair<std::string, double>> rows;
    for (const auto& f : fs) {
      const double t = experiments::run_speed(f);
      rows.emplace_back(f.name, t);
      r->metric(f.name + ".duration_s", t);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", t);
      r->bound(std::abs(t - 0.180) <= 0.005, f.name + " closes in " + buf + " s, within 0.180 +- 0.005");
    }
    r->file("speed.csv", experiments::speed_csv(rows));
    *out = r.release();
  });
}

bf_status bf_run_training(const bf_fixture* fixture, const char* scenario_path, const char* fixture_dir, uint64_t seed,
                          bf_report** out) {
  return guard([&] {
    need(out, "output handle");
    *out = nullptr;
    learning::LearningScenario sc;
    if (scenario_path) {
      sc = learning::load_scenario(scenario_path, fixture_dir ? fixture_dir : "");
    } else {
      sc = learning::default_scenario();
      if (fixture) sc.fixture = fixture->f;
    }
    const auto res = learning::run_training(sc, seed);
    auto r = std::make_unique<bf_report>();
    r->file("learning_seed" + std::to_string(seed) + ".csv", learning::learning_csv(res.log));
    r->metric("solved", res.solved ? 1.0 : 0.0);
    r->metric("train_steps", res.train_steps);
    r->metric("collisions", res.collisions);
    r->metric("broken_steps", res.broken_steps);
    r->metric("max_rest_drift_m", res.max_rest_drift);
    r->metric("policy_arm", static_cast<double>(res.policy_arm));
    r->bound(res.solved, "eval success reached 100 % after " + std::to_string(res.train_steps) + " train steps (budget " +
                             std::to_string(sc.budget) + ")");
    r->bound(res.collisions > 0, std::to_string(res.collisions) + " table collisions (> 0)");
    r->bound(res.broken_steps == 0, "gripper intact after every collision (" + std::to_string(res.broken_steps) +
                                        " broken, drift " + num(res.max_rest_drift) + " m)");
    *out = r.release();
  });
}

bf_status bf_calibrate(bf_fixture* const* fixtures, size_t count, const char* reference_path, bf_report** out) {
  return guard([&] {
    need(reference_path, "reference path");
    need(out, "output handle");
    *out = nullptr;
    auto fs = collect(fixtures, count);
    const auto ref = experiments::load_reference(reference_path);
    const auto fits = experiments::calibrate(fs, ref);
    for (size_t i = 0; i < count; ++i) fixtures[i]->f = fs[i];
    auto r = std::make_unique<bf_report>();
    r->file("calibration.csv", experiments::calibration_csv(fits));
    for (const auto& fit : fits) {
      r->metric(fit.fixture + "." + fit.parameter, fit.value);
      r->metric(fit.fixture + ".rms_N", fit.rms_N);
      r->note(fit.fixture + ": " + fit.parameter + " = " + num(fit.value, 6) + ", rms " + num(fit.rms_N) + " N");
    }
    experiments::ComplianceOptions o;
    o.trials = 1;
    compliance_bounds(*r, fs, experiments::run_compliance(fs, o), 1);
    *out = r.release();
  });
}

bf_status bf_verify(const bf_fixture* fixture, uint64_t seed, bf_report** out) {
  return guard([&] {
    need(fixture, "fixture");
    need(out, "output handle");
    *out = nullptr;
    const auto checks = verify::run_checks(fixture->f, seed);
    auto r = std::make_unique<bf_report>();
    r->file("verify_" + fixture->f.name + ".csv", verify::checks_csv(checks));
    for (const auto& c : checks) {
      r->metric(c.module + "." + c.name, c.value);
      r->bound(c.passed, fixture->f.name + " " + c.module + "." + c.name + " = " + num(c.value) +
                             (c.detail.empty() ? "" : " (" + c.detail + ")"));
    }
    *out = r.release();
  });
}

// Reports -----------------------------------------------------------------------

size_t bf_report_file_count(const bf_report* report) { return report ? report->files.size() : 0; }

const char* bf_report_file_name(const bf_report* report, size_t index) {
  return report && index < report->files.size() ? report->files[index].first.c_str() : nullptr;
}

const char* bf_report_file_text(const bf_report* report, size_t index) {
  return report && index < report->files.size() ? report->files[index].second.c_str() : nullptr;
}

size_t bf_report_metric_count(const bf_report* report) { return report ? report->metrics.size() : 0; }

const char* bf_report_metric_name(const bf_report* report, size_t index) {
  return report && index < report->metrics.size() ? report->metrics[index].first.c_str() : nullptr;
}

bf_status bf_report_metric(const bf_report* report, const char* name, double* out) {
  return guard([&] {
    need(report, "report");
    need(name, "metric name");
    need(out, "output");
    for (const auto& [k, v] : report->metrics) {
      if (k == name) {
        *out = v;
        return;
      }
    }
    throw InvalidArgument(std::string("no metric named '") + name + "'");
  });
}

int bf_report_passed(const bf_report* report) { return report && report->passed ? 1 : 0; }

const char* bf_report_summary(const bf_report* report) { return report ? report->summary.c_str() : ""; }

void bf_report_free(bf_report* report) { delete report; }

}  // extern "C"
