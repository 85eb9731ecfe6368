#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sim.hpp"

namespace bariflex::learning {

struct GraspAction {
  double dx = 0.0;             // lateral offset of the gripper [m]
  double dy = 0.0;             // [m], unused by the planar scenario
  double descent_depth = 0.0;  // below the start height [m]
  bool operator==(const GraspAction&) const = default;
};

struct BanditState {
  std::vector<GraspAction> arms;
  std::vector<long> counts;
  std::vector<double> means;
  double exploration_c = 1.4142135623730951;
  long t = 0;

  explicit BanditState(std::vector<GraspAction> actions = {}, double c = 1.4142135623730951);
  std::size_t size() const { return arms.size(); }
};

/// UCB index of one arm; +inf for an arm never pulled.
double ucb_index(const BanditState& s, std::size_t arm);

/// Arm with the largest UCB index, lowest index on ties.
std::size_t ucb_select(const BanditState& s);

/// Arm with the largest empirical mean, lowest index on ties.
std::size_t greedy_select(const BanditState& s);

void ucb_update(BanditState& s, std::size_t arm, double reward);

// Scenario ----------------------------------------------------------------------

/// A cube on a table under the gripper. The start height puts the object's
/// reference point `start_height` above the open fingertips; each action
/// lowers the gripper by its descent depth. The object's true height is off
/// by one of `jitter_levels` evenly spaced values in [-jitter, jitter].
struct LearningScenario {
  sim::GripperFixture fixture;
  contact::ObjectShape2D object;
  int grid = 5;
  double dx_range = 0.020;       // actions span [-dx_range, dx_range] [m]
  double max_depth = 0.030;      // actions span [0, max_depth] [m]
  double start_height = -0.006;  // [m]
  double jitter = 0.003;         // [m]
  int jitter_levels = 5;
  int train_steps = 15;
  int eval_steps = 8;
  int budget = 175;              // train steps
  std::uint64_t seed = 0;
  double exploration_c = 1.4142135623730951;

  void validate() const;
  /// Actions in dx-major order: every depth at the leftmost offset first.
  std::vector<GraspAction> actions() const;
};

LearningScenario default_scenario();
LearningScenario load_scenario(const std::string& path, const std::string& fixture_dir = "");
KeyValueFile scenario_to_config(const LearningScenario& s);

struct StepOutcome {
  bool success = false;
  bool collision = false;
  bool intact = true;        // gripper state after the step passes the invariant checks
  double rest_drift = 0.0;   // [m]
  double table_force = 0.0;  // [N]
};

/// Simulated outcomes keyed by action and jitter level; the simulator is
/// deterministic so repeated draws reuse the first result.
class Environment {
 public:
  explicit Environment(const LearningScenario& scenario);
  StepOutcome run(std::size_t arm, int jitter_level);
  const LearningScenario& scenario() const { return scenario_; }
  double table_clearance(std::size_t arm, int jitter_level) const;

 private:
  LearningScenario scenario_;
  std::vector<GraspAction> actions_;
  double below_ = 0.0;  // object extent under its reference point [m]
  std::map<std::pair<std::size_t, int>, StepOutcome> cache_;
};

struct LogRow {
  int step = 0;
  std::string phase;  // "train" or "eval"
  std::size_t arm = 0;
  double dx_mm = 0.0;
  double depth_mm = 0.0;
  int reward = 0;
  bool collision = false;
  int cum_collisions = 0;
  bool operator==(const LogRow&) const = default;
};

struct TrainingResult {
  std::vector<LogRow> log;
  std::vector<double> eval_success;  // per epoch
  bool solved = false;               // an eval epoch reached 100 %
  int train_steps = 0;               // train steps taken
  int collisions = 0;
  int broken_steps = 0;              // steps after which the invariants failed
  double max_rest_drift = 0.0;       // [m]
  std::size_t policy_arm = 0;
};

TrainingResult run_training(const LearningScenario& scenario, std::uint64_t seed, Environment* env = nullptr);

std::string learning_csv(const std::vector<LogRow>& rows);
std::vector<LogRow> parse_learning_csv(const std::string& text);

/// Stationary Bernoulli bandit; returns the pull counts per arm.
std::vector<long> bernoulli_pulls(const std::vector<double>& p, int steps, std::uint64_t seed,
                                  double exploration_c = 1.4142135623730951);

}  // namespace bariflex::learning
