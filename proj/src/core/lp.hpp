#pragma once

#include <Eigen/Dense>

namespace bariflex::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// minimise c.x subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.
/// Dense two-phase simplex with Bland's rule; sized for a few dozen variables.
Result solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq, const Eigen::VectorXd& b_eq,
             const Eigen::MatrixXd& a_ub, const Eigen::VectorXd& b_ub);

}  // namespace bariflex::lp
