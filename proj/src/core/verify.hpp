#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim.hpp"

namespace bariflex::verify {

struct Check {
  std::string module;
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured quantity the bound applies to
  std::string detail;
};

/// Invariant suite over every module for one fixture. Random samples come
/// from `seed`; `samples` sets the size of the kinematic sweep.
std::vector<Check> run_checks(const sim::GripperFixture& f, std::uint64_t seed = 0, int samples = 10000);

bool all_passed(const std::vector<Check>& checks);

std::string checks_csv(const std::vector<Check>& checks);

}  // namespace bariflex::verify
