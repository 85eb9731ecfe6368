#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "errors.hpp"
#include "learning.hpp"

using namespace bariflex;
using namespace bariflex::learning;

namespace {

BanditState two_arms(double m0, long n0, double m1, long n1) {
  BanditState s(std::vector<GraspAction>(2));
  s.means = {m0, m1};
  s.counts = {n0, n1};
  s.t = n0 + n1;
  return s;
}

}  // namespace

TEST_SUITE("learning") {

TEST_CASE("ucb index arithmetic") {
  const auto s = two_arms(0.9, 50, 0.1, 50);
  const double bonus = std::sqrt(2.0) * std::sqrt(std::log(100.0) / 50.0);
  CHECK(ucb_index(s, 0) == doctest::Approx(0.9 + bonus).epsilon(1e-12));
  CHECK(ucb_index(s, 1) == doctest::Approx(0.1 + bonus).epsilon(1e-12));
  CHECK(ucb_select(s) == 0);
}

TEST_CASE("unpulled arm goes first") {
  auto s = two_arms(1.0, 10, 0.0, 0);
  CHECK(std::isinf(ucb_index(s, 1)));
  CHECK(ucb_select(s) == 1);
}

TEST_CASE("ties go to the lowest arm") {
  BanditState fresh(std::vector<GraspAction>(4));
  CHECK(ucb_select(fresh) == 0);
  CHECK(ucb_select(two_arms(0.5, 3, 0.5, 3)) == 0);
  CHECK(greedy_select(two_arms(0.5, 3, 0.5, 7)) == 0);
}

TEST_CASE("incremental mean update") {
  BanditState s(std::vector<GraspAction>(2));
  ucb_update(s, 1, 0.7);
  CHECK(s.means[1] == 0.7);
  CHECK(s.t == 1);
  auto h = two_arms(0.5, 2, 0.0, 0);
  ucb_update(h, 0, 1.0);
  CHECK(h.means[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(h.counts[0] == 3);
  CHECK(h.t == 3);
  CHECK_THROWS_AS(ucb_update(h, 0, 1.5), InvalidArgument);
  CHECK_THROWS_AS(ucb_update(h, 2, 1.0), InvalidArgument);
}

TEST_CASE("selection never picks a dominated arm and the state stays consistent") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    BanditState s(std::vector<GraspAction>(7));
    for (int step = 0; step < 300; ++step) {
      const std::size_t a = ucb_select(s);
      for (std::size_t k = 0; k < s.size(); ++k) CHECK(ucb_index(s, a) >= ucb_index(s, k));
      ucb_update(s, a, u(rng) < 0.1 * static_cast<double>(a) ? 1.0 : 0.0);
      long total = 0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        total += s.counts[k];
        CHECK(s.means[k] >= 0.0);
        CHECK(s.means[k] <= 1.0);
      }
      CHECK(s.t == total);
    }
  }
}

TEST_CASE("single arm is always chosen") {
  BanditState s(std::vector<GraspAction>(1));
  for (int i = 0; i < 100; ++i) {
    CHECK(ucb_select(s) == 0);
    ucb_update(s, 0, i % 2);
  }
}

TEST_CASE("best Bernoulli arm dominates the pulls") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto counts = bernoulli_pulls({0.9, 0.5, 0.1}, 2000, seed);
    CHECK(counts[0] + counts[1] + counts[2] == 2000);
    CHECK(counts[0] / 2000.0 > 0.8);
    CHECK(counts[1] > counts[2]);
  }
  CHECK(bernoulli_pulls({0.9, 0.5, 0.1}, 2000, 3) == bernoulli_pulls({0.9, 0.5, 0.1}, 2000, 3));
}

TEST_CASE("scenario actions span the grid in dx-major order") {
  const auto sc = default_scenario();
  const auto acts = sc.actions();
  REQUIRE(acts.size() == 25);
  CHECK(acts[0].dx == doctest::Approx(-0.020));
  CHECK(acts[0].descent_depth == 0.0);
  CHECK(acts[1].dx == doctest::Approx(-0.020));
  CHECK(acts[4].descent_depth == doctest::Approx(0.030));
  CHECK(acts[5].dx == doctest::Approx(-0.010));
  for (const auto& a : acts) {
    CHECK(std::abs(a.dx) <= sc.dx_range + 1e-12);
    CHECK(a.descent_depth >= 0.0);
    CHECK(a.descent_depth <= sc.max_depth + 1e-12);
  }
}

TEST_CASE("scenario file round-trips") {
  namespace fs = std::filesystem;
  auto sc = default_scenario();
  sc.jitter = 0.002;
  sc.train_steps = 12;
  const fs::path p = fs::temp_directory_path() / "bariflex_test_scenario.cfg";
  write_text_file(p.string(), scenario_to_config(sc).dump());
  const auto back = load_scenario(p.string());
  CHECK(back.jitter == 0.002);
  CHECK(back.train_steps == 12);
  CHECK(back.object.width(Pose2{}) == doctest::Approx(0.04));
  CHECK(back.fixture.name == "bariflex");
  fs::remove(p);
  auto bad = default_scenario();
  bad.grid = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("the deepest row always meets the table, the top row never") {
  const auto sc = default_scenario();
  Environment env(sc);
  for (int level = 0; level < sc.jitter_levels; ++level) {
    for (int col = 0; col < sc.grid; ++col) {
      CHECK(env.table_clearance(col * sc.grid + sc.grid - 1, level) < 0.0);
      CHECK(env.table_clearance(col * sc.grid, level) > 0.0);
    }
  }
}

TEST_CASE("collisions leave the gripper intact") {
  const auto sc = default_scenario();
  Environment env(sc);
  int collisions = 0;
  for (std::size_t arm = 0; arm < 25; ++arm) {
    const auto out = env.run(arm, 2);
    CHECK(out.intact);
    if (out.collision) {
      ++collisions;
      CHECK(out.table_force > 0.0);
      CHECK(out.rest_drift < 1e-6);
    }
  }
  CHECK(collisions >= 5);
  CHECK_THROWS_AS(env.run(25, 0), InvalidArgument);
  CHECK_THROWS_AS(env.run(0, 5), InvalidArgument);
}

TEST_CASE("training solves the cube and logs reproducibly") {
  const auto sc = default_scenario();
  Environment env(sc);
  for (std::uint64_t seed : {0u, 1u}) {
    const auto r = run_training(sc, seed, &env);
    CHECK(r.solved);
    CHECK(r.train_steps <= 175);
    CHECK(r.collisions > 0);
    CHECK(r.broken_steps == 0);
    const auto again = run_training(sc, seed);
    CHECK(learning_csv(r.log) == learning_csv(again.log));
    CHECK(parse_learning_csv(learning_csv(r.log)) == r.log);
    int cum = 0;
    for (const auto& row : r.log) {
      cum += row.collision;
      CHECK(row.cum_collisions == cum);
      CHECK((row.phase == "train" || row.phase == "eval"));
    }
  }
}

}
