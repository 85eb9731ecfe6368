#include "learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "errors.hpp"

namespace bariflex::learning {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

BanditState::BanditState(std::vector<GraspAction> actions, double c)
    : arms(std::move(actions)), counts(arms.size(), 0), means(arms.size(), 0.0), exploration_c(c) {}

double ucb_index(const BanditState& s, std::size_t arm) {
  if (arm >= s.size()) throw InvalidArgument("arm index out of range");
  if (s.counts[arm] == 0) return std::numeric_limits<double>::infinity();
  const double t = static_cast<double>(std::max<long>(s.t, 1));
  return s.means[arm] + s.exploration_c * std::sqrt(std::log(t) / static_cast<double>(s.counts[arm]));
}

std::size_t ucb_select(const BanditState& s) {
  if (s.size() == 0) throw InvalidArgument("bandit has no arms");
  std::size_t best = 0;
  double best_index = ucb_index(s, 0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double v = ucb_index(s, i);
    if (v > best_index) {
      best = i;
      best_index = v;
    }
  }
  return best;
}

std::size_t greedy_select(const BanditState& s) {
  if (s.size() == 0) throw InvalidArgument("bandit has no arms");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s.means[i] > s.means[best]) best = i;
  }
  return best;
}

void ucb_update(BanditState& s, std::size_t arm, double reward) {
  if (arm >= s.size()) throw InvalidArgument("arm index out of range");
  if (!(reward >= 0.0 && reward <= 1.0)) throw InvalidArgument("reward must lie in [0, 1]");
  s.counts[arm] += 1;
  s.means[arm] += (reward - s.means[arm]) / static_cast<double>(s.counts[arm]);
  s.t += 1;
}

// Scenario ----------------------------------------------------------------------

void LearningScenario::validate() const {
  fixture.validate();
  object.validate();
  if (grid < 1) throw ConfigError("grid must be >= 1");
  if (!(dx_range >= 0.0) || !(max_depth >= 0.0)) throw ConfigError("dx_range and max_depth must be >= 0");
  if (!(jitter >= 0.0) || jitter_levels < 1) throw ConfigError("jitter must be >= 0 with at least one level");
  if (!std::isfinite(start_height)) throw ConfigError("start_height must be finite");
  if (train_steps < 1 || eval_steps < 1 || budget < 1) throw ConfigError("step counts must be >= 1");
  if (!(exploration_c >= 0.0)) throw ConfigError("exploration_c must be >= 0");
  if (std::abs(start_height) + max_depth + jitter > 0.1) throw ConfigError("heights must stay within 100 mm");
}

std::vector<GraspAction> LearningScenario::actions() const {
  auto level = [&](int i, double lo, double hi) { return grid == 1 ? lo : lo + (hi - lo) * i / (grid - 1); };
  std::vector<GraspAction> out;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      out.push_back({grid == 1 ? 0.0 : level(i, -dx_range, dx_range), 0.0, level(j, 0.0, max_depth)});
    }
  }
  return out;
}

LearningScenario default_scenario() {
  LearningScenario s;
  s.fixture = sim::builtin_fixture("bariflex");
  s.object = sim::make_cube(0.040, 0.100, 0.4);
  return s;
}

LearningScenario load_scenario(const std::string& path, const std::string& fixture_dir) {
  const KeyValueFile kv = KeyValueFile::load(path);
  LearningScenario s;
  s.fixture = sim::resolve_fixture(kv.text("fixture"), fixture_dir);
  s.object = sim::make_cube(kv.number("cube_side"), kv.number("cube_mass"), kv.number("cube_friction"));
  s.grid = static_cast<int>(kv.integer("grid"));
  s.dx_range = kv.number("dx_range");
  s.max_depth = kv.number("max_depth");
  s.start_height = kv.number("start_height");
  s.jitter = kv.number("jitter");
  s.jitter_levels = static_cast<int>(kv.integer("jitter_levels"));
  s.train_steps = static_cast<int>(kv.integer("train_steps"));
  s.eval_steps = static_cast<int>(kv.integer("eval_steps"));
  s.budget = static_cast<int>(kv.integer("budget"));
  s.seed = static_cast<std::uint64_t>(kv.integer("seed"));
  s.exploration_c = kv.number_or("exploration_c", s.exploration_c);
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return s;
}

KeyValueFile scenario_to_config(const LearningScenario& s) {
  KeyValueFile kv;
  kv.set("fixture", s.fixture.name);
  const auto& v = s.object.vertices;
  double side = 0.0;
  for (const Vec2& p : v) side = std::max(side, 2.0 * std::abs(p.x()));
  kv.set("cube_side", side);
  kv.set("cube_mass", s.object.mass);
  kv.set("cube_friction", s.object.friction_coefficient);
  kv.set("grid", static_cast<double>(s.grid));
  kv.set("dx_range", s.dx_range);
  kv.set("max_depth", s.max_depth);
  kv.set("start_height", s.start_height);
  kv.set("jitter", s.jitter);
  kv.set("jitter_levels", static_cast<double>(s.jitter_levels));
  kv.set("train_steps", static_cast<double>(s.train_steps));
  kv.set("eval_steps", static_cast<double>(s.eval_steps));
  kv.set("budget", static_cast<double>(s.budget));
  kv.set("seed", static_cast<double>(s.seed));
  kv.set("exploration_c", s.exploration_c);
  return kv;
}

// Environment -------------------------------------------------------------------

Environment::Environment(const LearningScenario& scenario) : scenario_(scenario), actions_(scenario.actions()) {
  scenario_.validate();
  const auto& o = scenario_.object;
  if (o.kind == contact::ShapeKind::circle) {
    below_ = o.radius;
  } else {
    const double c = std::cos(o.canonical_orientation), s = std::sin(o.canonical_orientation);
    for (const Vec2& p : o.vertices) below_ = std::max(below_, -(s * p.x() + c * p.y()));
  }
}

double Environment::table_clearance(std::size_t arm, int jitter_level) const {
  const auto& sc = scenario_;
  const double e = sc.jitter_levels == 1 ? 0.0 : -sc.jitter + 2.0 * sc.jitter * jitter_level / (sc.jitter_levels - 1);
  const double height = sc.start_height + actions_.at(arm).descent_depth + e;
  return below_ - height;
}

StepOutcome Environment::run(std::size_t arm, int jitter_level) {
  if (arm >= actions_.size()) throw InvalidArgument("arm index out of range");
  if (jitter_level < 0 || jitter_level >= scenario_.jitter_levels) throw InvalidArgument("jitter level out of range");
  const auto key = std::make_pair(arm, jitter_level);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;

  StepOutcome out;
  const double clearance = table_clearance(arm, jitter_level);
  out.collision = clearance < 0.0;
  sim::GripperFixture f = scenario_.fixture;
  f.grasp_height = 0.0;
  try {
    if (out.collision) {
      // The arm keeps descending after the tips meet the table; the finger
      // takes the overtravel like the rig probe from underneath.
      sim::GripperFixture pressed = f;
      pressed.probe_mode = sim::ProbeMode::underside;
      const sim::PressResult r =
          sim::press_probe(pressed, {0.0, -clearance}, std::numeric_limits<double>::infinity());
      out.table_force = r.samples.back().force;
      out.rest_drift = r.rest_drift;
      out.intact = r.rest_drift < 1e-6 && sim::kinematic_error(f, r.rest) < 1e-9;
    }
    // Tips resting on the table when the descent overshoots.
    const double height = below_ - std::max(clearance, 0.0);
    const sim::GraspOutcome g =
        sim::grasp_object(f, scenario_.object, {-actions_[arm].dx, height, 0.0});
    out.success = g.verdict.success;
  } catch (const Error&) {
    out.success = false;
    out.collision = true;
  }
  cache_.emplace(key, out);
  return out;
}

// Training ----------------------------------------------------------------------

TrainingResult run_training(const LearningScenario& scenario, std::uint64_t seed, Environment* env) {
  Environment local(scenario);
  Environment& e = env ? *env : local;
  const auto actions = scenario.actions();
  BanditState bandit(actions, scenario.exploration_c);
  std::mt19937_64 rng(seed);
  TrainingResult res;
  int step = 0;

  auto act = [&](const std::string& phase, std::size_t arm) {
    const int level = std::min(scenario.jitter_levels - 1,
                               static_cast<int>(uniform01(rng) * scenario.jitter_levels));
    const StepOutcome o = e.run(arm, level);
    if (o.collision) ++res.collisions;
    if (!o.intact) ++res.broken_steps;
    res.max_rest_drift = std::max(res.max_rest_drift, o.rest_drift);
    LogRow row;
    row.step = ++step;
    row.phase = phase;
    row.arm = arm;
    row.dx_mm = actions[arm].dx * 1e3;
    row.depth_mm = actions[arm].descent_depth * 1e3;
    row.reward = o.success ? 1 : 0;
    row.collision = o.collision;
    row.cum_collisions = res.collisions;
    res.log.push_back(row);
    return o.success;
  };

  while (res.train_steps < scenario.budget) {
    const int n = std::min(scenario.train_steps, scenario.budget - res.train_steps);
    for (int i = 0; i < n; ++i) {
      const std::size_t arm = ucb_select(bandit);
      ucb_update(bandit, arm, act("train", arm) ? 1.0 : 0.0);
      ++res.train_steps;
    }
    const std::size_t policy = greedy_select(bandit);
    int wins = 0;
    for (int i = 0; i < scenario.eval_steps; ++i) wins += act("eval", policy) ? 1 : 0;
    res.eval_success.push_back(static_cast<double>(wins) / scenario.eval_steps);
    res.policy_arm = policy;
    if (wins == scenario.eval_steps) {
      res.solved = true;
      break;
    }
  }
  return res;
}

std::string learning_csv(const std::vector<LogRow>& rows) {
  std::string s = "step,phase,arm,dx_mm,depth_mm,reward,collision,cum_collisions\n";
  for (const auto& r : rows) {
    s += std::to_string(r.step) + "," + r.phase + "," + std::to_string(r.arm) + "," + format_number(r.dx_mm) + "," +
         format_number(r.depth_mm) + "," + std::to_string(r.reward) + "," + (r.collision ? "1" : "0") + "," +
         std::to_string(r.cum_collisions) + "\n";
  }
  return s;
}

std::vector<LogRow> parse_learning_csv(const std::string& text) {
  const std::string header = "step,phase,arm,dx_mm,depth_mm,reward,collision,cum_collisions";
  std::istringstream in(text);
  std::string line;
  int n = 0;
  std::vector<LogRow> out;
  auto fail = [&](const std::string& what) -> void {
    throw ConfigError("learning csv:" + std::to_string(n) + ": " + what);
  };
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != header) fail("expected header '" + header + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(cell);
    if (c.size() != 8) fail("expected 8 columns");
    LogRow r;
    try {
      r.step = std::stoi(c[0]);
      r.phase = c[1];
      r.arm = static_cast<std::size_t>(std::stoul(c[2]));
      if (!parse_number(c[3], r.dx_mm) || !parse_number(c[4], r.depth_mm)) fail("malformed number");
      r.reward = std::stoi(c[5]);
      r.collision = std::stoi(c[6]) != 0;
      r.cum_collisions = std::stoi(c[7]);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    if (r.phase != "train" && r.phase != "eval") fail("phase must be train or eval");
    out.push_back(r);
  }
  if (!header_seen) fail("missing header");
  return out;
}

std::vector<long> bernoulli_pulls(const std::vector<double>& p, int steps, std::uint64_t seed, double exploration_c) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("arm probabilities must lie in [0, 1]");
  }
  BanditState s(std::vector<GraspAction>(p.size()), exploration_c);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < steps; ++i) {
    const std::size_t arm = ucb_select(s);
    ucb_update(s, arm, uniform01(rng) < p[arm] ? 1.0 : 0.0);
  }
  return s.counts;
}

}  // namespace bariflex::learning
