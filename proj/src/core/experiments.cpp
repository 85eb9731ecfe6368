#include "experiments.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_min.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "errors.hpp"

namespace bariflex::experiments {
namespace {

std::vector<double> press_schedule(double max_displacement, double step) {
  if (!(step > 0.0) || !(max_displacement >= 0.0)) throw InvalidArgument("press schedule needs a positive step");
  std::vector<double> s;
  const int n = static_cast<int>(std::floor(max_displacement / step + 1e-9));
  for (int i = 0; i <= n; ++i) s.push_back(i * step);
  return s;
}

// Uniform in [-1, 1] from the raw generator output, independent of the
// standard library's distribution implementations.
double symmetric_unit(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

// CSV helpers -------------------------------------------------------------------

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;
};

CsvTable read_csv(const std::string& text, const std::string& header, const std::string& origin) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  bool seen_header = false;
  const std::size_t columns = split(header, ',').size();
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) throw ConfigError(origin + ":" + std::to_string(n) + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != columns) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected " + std::to_string(columns) + " columns");
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(n);
  }
  if (!seen_header) throw ConfigError(origin + ": missing header '" + header + "'");
  return t;
}

double cell_number(const CsvTable& t, std::size_t row, std::size_t col, const std::string& origin) {
  const std::string& s = t.rows[row][col];
  double v = 0.0;
  if (!parse_number(s, v)) throw ConfigError(origin + ":" + std::to_string(t.lines[row]) + ": not a number: '" + s + "'");
  return v;
}

int cell_int(const CsvTable& t, std::size_t row, std::size_t col, const std::string& origin) {
  const double v = cell_number(t, row, col, origin);
  if (v != std::floor(v)) throw ConfigError(origin + ":" + std::to_string(t.lines[row]) + ": not an integer");
  return static_cast<int>(v);
}

std::string num(double v) { return format_number(v); }

}  // namespace

// Compliance ------------------------------------------------------------------

std::vector<ComplianceRow> run_compliance(const std::vector<sim::GripperFixture>& fixtures,
                                          const ComplianceOptions& options) {
  if (options.trials < 0) throw InvalidArgument("trial count must be >= 0");
  const auto schedule = press_schedule(options.max_displacement, options.step);
  std::vector<ComplianceRow> rows;
  for (const auto& f : fixtures) {
    sim::GripperState state = sim::make_state(f, 0.0);
    for (int trial = 1; trial <= options.trials; ++trial) {
      const sim::PressResult r = sim::press_probe(f, schedule, options.force_cap, 1e6, &state);
      for (const auto& s : r.samples) rows.push_back({f.name, trial, s.displacement * 1e3, s.force});
      state = r.rest;
    }
  }
  return rows;
}

double force_at(const std::vector<ComplianceRow>& rows, const std::string& fixture, int trial, double displacement_mm,
                double force_cap) {
  const ComplianceRow* last = nullptr;
  for (const auto& r : rows) {
    if (r.fixture != fixture || r.trial != trial) continue;
    if (std::abs(r.displacement_mm - displacement_mm) < 1e-6) return r.force_N;
    if (!last || r.displacement_mm > last->displacement_mm) last = &r;
  }
  if (last && last->force_N >= force_cap && displacement_mm > last->displacement_mm) return force_cap;
  return std::numeric_limits<double>::quiet_NaN();
}

// Durability ------------------------------------------------------------------

std::vector<DurabilityRow> run_durability(const sim::GripperFixture& f, int cycles, double displacement) {
  if (cycles < 0) throw InvalidArgument("cycle count must be >= 0");
  const auto schedule = press_schedule(displacement, displacement / 8.0);
  std::vector<DurabilityRow> rows;
  sim::GripperState state = sim::make_state(f, 0.0);
  for (int c = 1; c <= cycles; ++c) {
    const sim::PressResult r = sim::press_probe(f, schedule, std::numeric_limits<double>::infinity(), 1e6, &state);
    double peak = 0.0;
    for (const auto& s : r.samples) peak = std::max(peak, s.force);
    rows.push_back({c, peak, r.rest_drift});
    state = r.rest;
  }
  return rows;
}

// Grasp matrix ----------------------------------------------------------------

std::vector<sim::GraspOffset> grasp_positions(double offset) {
  return {{0.0, 0.0, 0.0}, {offset, 0.0, 0.0}, {-offset, 0.0, 0.0}, {0.0, offset, 0.0}, {0.0, -offset, 0.0}};
}

std::vector<GraspRow> run_grasp_matrix(const std::vector<sim::GripperFixture>& fixtures,
                                       const std::vector<contact::ObjectShape2D>& objects,
                                       const GraspMatrixOptions& options) {
  struct Trial {
    const sim::GripperFixture* fixture;
    const contact::ObjectShape2D* object;
    sim::GraspOffset offset;
    double deg;
  };
  std::vector<Trial> trials;
  const auto positions = grasp_positions(options.offset);
  for (const auto& f : fixtures) {
    for (const auto& o : objects) {
      for (const auto& p : positions) {
        for (double deg : options.orientations_deg) trials.push_back({&f, &o, {p.dx, p.dy, deg * kPi / 180.0}, deg});
      }
    }
  }
  std::vector<GraspRow> rows(trials.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      const Trial& t = trials[i];
      GraspRow& r = rows[i];
      r.fixture = t.fixture->name;
      r.object = t.object->name;
      r.dx_mm = t.offset.dx * 1e3;
      r.dy_mm = t.offset.dy * 1e3;
      r.theta_deg = t.deg;
      try {
        const sim::GraspOutcome g = sim::grasp_object(*t.fixture, *t.object, t.offset);
        r.success = g.verdict.success;
        r.reason = g.verdict.success ? "none" : contact::failure_name(g.verdict.reason);
      } catch (const Error&) {
        r.success = false;
        r.reason = contact::failure_name(contact::GraspFailure::no_closure);
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return rows;
}

int grasp_successes(const std::vector<GraspRow>& rows, const std::string& fixture, const std::string& object) {
  int n = 0;
  for (const auto& r : rows) {
    if (r.fixture == fixture && (object.empty() || r.object == object) && r.success) ++n;
  }
  return n;
}

int grasp_successes_at(const std::vector<GraspRow>& rows, const std::string& fixture, double dx_mm, double dy_mm) {
  int n = 0;
  for (const auto& r : rows) {
    if (r.fixture == fixture && std::abs(r.dx_mm - dx_mm) < 1e-9 && std::abs(r.dy_mm - dy_mm) < 1e-9 && r.success) ++n;
  }
  return n;
}

// Precision -------------------------------------------------------------------

double press_indicator(const sim::GripperFixture& f, const PrecisionOptions& o, double command, double torque_scale) {
  const auto& g = f.geometry;
  const auto& m = f.motor;
  const double x0 = linkage::solve_loop(g, g.crank_angle_open).fingertip_position.x();
  auto depth = [&](double motor) {
    return x0 - linkage::solve_loop(g, linkage::crank_from_motor(g, motor)).fingertip_position.x();
  };
  // Indicator plunger touching the open fingertip, pushing back along x.
  auto load_torque = [&](double motor) {
    const double d = depth(motor);
    if (d <= 0.0) return 0.0;
    const double h = 1e-6;
    const double rate = (depth(motor + h) - depth(motor - h)) / (2.0 * h);
    return -(o.indicator_preload + o.indicator_rate * d) * rate;
  };
  const actuation::TrapezoidProfile profile = actuation::make_profile(m, 0.0, command);
  actuation::MotorState s = actuation::make_state(m, 0.0);
  const double dt = 1e-4;
  const double settle = 0.3;
  const int steps = static_cast<int>(std::ceil((profile.duration() + settle) / dt));
  for (int i = 0; i < steps; ++i) {
    const auto ref = profile.at(i * dt);
    const double tau =
        torque_scale * actuation::pd_torque(m, s, ref.position, ref.velocity, m.rotor_inertia * ref.acceleration);
    s = actuation::step_motor(m, s, tau, load_torque(s.angle), dt);
  }
  return depth(s.angle);
}

PrecisionResult run_precision(const sim::GripperFixture& f, const PrecisionOptions& o) {
  if (o.presses < 1) throw InvalidArgument("precision test needs at least one press");
  if (!(o.indicator_resolution > 0.0)) throw InvalidArgument("indicator resolution must be positive");
  PrecisionResult r;
  // Command that reaches the nominal depth without noise.
  double lo = 0.0, hi = f.geometry.range_of_motion() * f.geometry.gear_ratio;
  if (press_indicator(f, o, hi, 1.0) < o.target) throw InvalidArgument("press target beyond the finger's travel");
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (press_indicator(f, o, mid, 1.0) < o.target ? lo : hi) = mid;
  }
  r.command = 0.5 * (lo + hi);

  std::mt19937_64 rng(o.seed);
  const double count = f.motor.encoder_resolution();
  for (int i = 0; i < o.presses; ++i) {
    const double cmd = r.command + o.encoder_noise_counts * count * symmetric_unit(rng);
    const double scale = 1.0 + o.torque_noise * symmetric_unit(rng);
    const double d = press_indicator(f, o, cmd, scale);
    const double reading = std::round(d / o.indicator_resolution) * o.indicator_resolution;
    r.readings_mm.push_back(reading * 1e3);
  }
  double sum = 0.0;
  for (double v : r.readings_mm) sum += v;
  r.mean_mm = sum / r.readings_mm.size();
  double ss = 0.0;
  for (double v : r.readings_mm) {
    ss += (v - r.mean_mm) * (v - r.mean_mm);
    r.max_dev_mm = std::max(r.max_dev_mm, std::abs(v - r.mean_mm));
  }
  r.std_mm = r.readings_mm.size() > 1 ? std::sqrt(ss / (r.readings_mm.size() - 1)) : 0.0;
  return r;
}

// Speed -------------------------------------------------------------------------

double run_speed(const sim::GripperFixture& f) {
  const double travel = f.geometry.range_of_motion() * f.geometry.gear_ratio;
  if (travel <= 0.0) return 0.0;
  return actuation::closing_profile(f.motor, travel);
}

// CSV -------------------------------------------------------------------------

std::string compliance_csv(const std::vector<ComplianceRow>& rows) {
  std::string s = "fixture,trial,displacement_mm,force_N\n";
  for (const auto& r : rows) {
    s += r.fixture + "," + std::to_string(r.trial) + "," + num(r.displacement_mm) + "," + num(r.force_N) + "\n";
  }
  return s;
}

std::string durability_csv(const std::vector<DurabilityRow>& rows) {
  std::string s = "cycle,peak_force_N,rest_drift_m\n";
  for (const auto& r : rows) s += std::to_string(r.cycle) + "," + num(r.peak_force_N) + "," + num(r.rest_drift_m) + "\n";
  return s;
}

std::string grasp_csv(const std::vector<GraspRow>& rows) {
  std::string s = "fixture,object,dx_mm,dy_mm,theta_deg,verdict,reason\n";
  for (const auto& r : rows) {
    s += r.fixture + "," + r.object + "," + num(r.dx_mm) + "," + num(r.dy_mm) + "," + num(r.theta_deg) + "," +
         (r.success ? "success" : "failure") + "," + r.reason + "\n";
  }
  return s;
}

std::string precision_csv(const PrecisionResult& r) {
  std::string s = "press_index,displacement_mm\n";
  for (std::size_t i = 0; i < r.readings_mm.size(); ++i) s += std::to_string(i + 1) + "," + num(r.readings_mm[i]) + "\n";
  return s;
}

std::string speed_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::string s = "fixture,duration_s\n";
  for (const auto& [name, t] : rows) s += name + "," + num(t) + "\n";
  return s;
}

std::vector<ComplianceRow> parse_compliance_csv(const std::string& text) {
  const std::string origin = "compliance csv";
  const CsvTable t = read_csv(text, "fixture,trial,displacement_mm,force_N", origin);
  std::vector<ComplianceRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({t.rows[i][0], cell_int(t, i, 1, origin), cell_number(t, i, 2, origin), cell_number(t, i, 3, origin)});
  }
  return out;
}

std::vector<DurabilityRow> parse_durability_csv(const std::string& text) {
  const std::string origin = "durability csv";
  const CsvTable t = read_csv(text, "cycle,peak_force_N,rest_drift_m", origin);
  std::vector<DurabilityRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({cell_int(t, i, 0, origin), cell_number(t, i, 1, origin), cell_number(t, i, 2, origin)});
  }
  return out;
}

std::vector<GraspRow> parse_grasp_csv(const std::string& text) {
  const std::string origin = "grasp csv";
  const CsvTable t = read_csv(text, "fixture,object,dx_mm,dy_mm,theta_deg,verdict,reason", origin);
  std::vector<GraspRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    GraspRow r;
    r.fixture = t.rows[i][0];
    r.object = t.rows[i][1];
    r.dx_mm = cell_number(t, i, 2, origin);
    r.dy_mm = cell_number(t, i, 3, origin);
    r.theta_deg = cell_number(t, i, 4, origin);
    const std::string& v = t.rows[i][5];
    if (v != "success" && v != "failure") {
      throw ConfigError(origin + ":" + std::to_string(t.lines[i]) + ": verdict must be success or failure");
    }
    r.success = v == "success";
    r.reason = t.rows[i][6];
    out.push_back(r);
  }
  return out;
}

std::vector<double> parse_precision_csv(const std::string& text) {
  const std::string origin = "precision csv";
  const CsvTable t = read_csv(text, "press_index,displacement_mm", origin);
  std::vector<double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.push_back(cell_number(t, i, 1, origin));
  return out;
}

std::vector<std::pair<std::string, double>> parse_speed_csv(const std::string& text) {
  const std::string origin = "speed csv";
  const CsvTable t = read_csv(text, "fixture,duration_s", origin);
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) out.emplace_back(t.rows[i][0], cell_number(t, i, 1, origin));
  return out;
}

// Calibration -----------------------------------------------------------------

std::vector<ReferencePoint> parse_reference(const std::string& text, const std::string& origin) {
  const CsvTable t = read_csv(text, "fixture,displacement_mm,force_N", origin);
  std::vector<ReferencePoint> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ReferencePoint p{t.rows[i][0], cell_number(t, i, 1, origin), cell_number(t, i, 2, origin)};
    if (!(p.displacement_mm >= 0.0 && p.displacement_mm <= 60.0) || !(p.force_N >= 0.0)) {
      throw ConfigError(origin + ":" + std::to_string(t.lines[i]) + ": point out of range");
    }
    out.push_back(p);
  }
  return out;
}

std::vector<ReferencePoint> load_reference(const std::string& path) {
  return parse_reference(read_text_file(path), path);
}

namespace {

struct FitProblem {
  sim::GripperFixture fixture;
  std::vector<double> schedule;   // [m], sorted
  std::vector<double> target;     // [N]
  double (*apply)(sim::GripperFixture&, double) = nullptr;

  // Sum of squared force errors with the parameter at exp(log_value).
  double cost(double log_value) {
    sim::GripperFixture f = fixture;
    apply(f, std::exp(log_value));
    const sim::PressResult r = sim::press_probe(f, schedule);
    double sse = 0.0;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const double model = i < r.samples.size() ? r.samples[i].force : 60.0;
      sse += (model - target[i]) * (model - target[i]);
    }
    return sse;
  }
};

double set_spring(sim::GripperFixture& f, double v) { return f.spring.stiffness = v; }
double set_modulus(sim::GripperFixture& f, double v) { return f.finray.modulus_scale = v; }

double gsl_cost(double x, void* p) { return static_cast<FitProblem*>(p)->cost(x); }

// Coarse log-spaced scan for a bracket, then Brent's method inside it.
double fit_log(FitProblem& prob, double lo, double hi) {
  const int n = 17;
  std::vector<double> xs(n), fs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1);
    fs[i] = prob.cost(xs[i]);
  }
  const int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  if (best == 0 || best == n - 1) return std::exp(xs[best]);
  if (!(fs[best] < fs[best - 1] && fs[best] < fs[best + 1])) return std::exp(xs[best]);

  gsl_set_error_handler_off();
  gsl_function fn{&gsl_cost, &prob};
  gsl_min_fminimizer* m = gsl_min_fminimizer_alloc(gsl_min_fminimizer_brent);
  gsl_min_fminimizer_set_with_values(m, &fn, xs[best], fs[best], xs[best - 1], fs[best - 1], xs[best + 1], fs[best + 1]);
  double x = xs[best];
  for (int it = 0; it < 100; ++it) {
    if (gsl_min_fminimizer_iterate(m) != GSL_SUCCESS) break;
    x = gsl_min_fminimizer_x_minimum(m);
    if (gsl_min_test_interval(gsl_min_fminimizer_x_lower(m), gsl_min_fminimizer_x_upper(m), 1e-6, 0.0) == GSL_SUCCESS) {
      break;
    }
  }
  gsl_min_fminimizer_free(m);
  return std::exp(x);
}

}  // namespace

std::vector<CalibrationResult> calibrate(std::vector<sim::GripperFixture>& fixtures,
                                         const std::vector<ReferencePoint>& reference) {
  std::vector<CalibrationResult> out;
  for (auto& f : fixtures) {
    if (f.finger == sim::FingerKind::rigid) continue;
    std::map<double, double> points;
    for (const auto& p : reference) {
      if (p.fixture == f.name) points[p.displacement_mm] = p.force_N;
    }
    if (points.empty()) continue;
    FitProblem prob;
    prob.fixture = f;
    for (const auto& [d, force] : points) {
      prob.schedule.push_back(d * 1e-3);
      prob.target.push_back(force);
    }
    CalibrationResult r;
    r.fixture = f.name;
    double value = 0.0;
    if (f.finger == sim::FingerKind::bariflex) {
      r.parameter = "spring_stiffness";
      prob.apply = &set_spring;
      value = fit_log(prob, 0.2, 20.0);
      f.spring.stiffness = value;
    } else {
      r.parameter = "modulus_scale";
      prob.apply = &set_modulus;
      value = fit_log(prob, 0.1, 10.0);
      f.finray.modulus_scale = value;
    }
    r.value = value;
    r.rms_N = std::sqrt(prob.cost(std::log(value)) / points.size());
    out.push_back(r);
  }
  return out;
}

std::string calibration_csv(const std::vector<CalibrationResult>& rows) {
  std::string s = "fixture,parameter,value,rms_N\n";
  for (const auto& r : rows) s += r.fixture + "," + r.parameter + "," + num(r.value) + "," + num(r.rms_N) + "\n";
  return s;
}

}  // namespace bariflex::experiments
