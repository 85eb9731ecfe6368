#include "lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace bariflex::lp {
namespace {

constexpr double kEps = 1e-10;

// Tableau with rows 0..m-1 constraints and row m the objective (reduced costs).
struct Tableau {
  Eigen::MatrixXd t;
  std::vector<int> basis;
  int m = 0;
  int n = 0;  // columns excluding rhs

  void pivot(int row, int col) {
    t.row(row) /= t(row, col);
    for (int r = 0; r <= m; ++r) {
      if (r != row && std::abs(t(r, col)) > 0.0) t.row(r) -= t(r, col) * t.row(row);
    }
    basis[row] = col;
  }

  // Returns false when unbounded. Only columns < allowed may enter.
  bool run(int allowed) {
    for (int iter = 0; iter < 10000; ++iter) {
      int col = -1;
      for (int j = 0; j < allowed; ++j) {
        if (t(m, j) < -kEps) {
          col = j;
          break;
        }
      }
      if (col < 0) return true;
      int row = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        if (t(r, col) > kEps) {
          const double ratio = t(r, n) / t(r, col);
          if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && row >= 0 && basis[r] < basis[row])) {
            best = ratio;
            row = r;
          }
        }
      }
      if (row < 0) return false;
      pivot(row, col);
    }
    return true;
  }
};

}  // namespace

Result solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& a_eq, const Eigen::VectorXd& b_eq,
             const Eigen::MatrixXd& a_ub, const Eigen::VectorXd& b_ub) {
  const int nx = static_cast<int>(c.size());
  const int me = static_cast<int>(a_eq.rows());
  const int mu = static_cast<int>(a_ub.rows());
  const int m = me + mu;
  // Columns: x, slacks (one per inequality), artificials (one per row).
  const int ns = mu;
  const int n = nx + ns + m;
  Tableau tab;
  tab.m = m;
  tab.n = n;
  tab.t = Eigen::MatrixXd::Zero(m + 1, n + 1);
  tab.basis.assign(m, -1);
  for (int r = 0; r < m; ++r) {
    const bool eq = r < me;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n + 1);
    if (eq) {
      row.head(nx) = a_eq.row(r);
      row(n) = b_eq(r);
    } else {
      row.head(nx) = a_ub.row(r - me);
      row(nx + (r - me)) = 1.0;
      row(n) = b_ub(r - me);
    }
    if (row(n) < 0) row = -row;
    row(nx + ns + r) = 1.0;
    tab.t.row(r) = row;
    tab.basis[r] = nx + ns + r;
  }
  // Phase I: minimise the sum of artificials.
  for (int r = 0; r < m; ++r) tab.t.row(m) -= tab.t.row(r);
  for (int r = 0; r < m; ++r) tab.t(m, nx + ns + r) = 0.0;
  tab.run(nx + ns);
  Result res;
  const double scale = 1.0 + (m > 0 ? tab.t.col(n).head(m).cwiseAbs().maxCoeff() : 0.0);
  if (-tab.t(m, n) > 1e-9 * scale) {
    res.status = Status::infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (tab.basis[r] >= nx + ns) {
      for (int j = 0; j < nx + ns; ++j) {
        if (std::abs(tab.t(r, j)) > kEps) {
          tab.pivot(r, j);
          break;
        }
      }
    }
  }
  // Phase II objective row.
  tab.t.row(m).setZero();
  tab.t.row(m).head(nx) = c.transpose();
  for (int r = 0; r < m; ++r) {
    const int b = tab.basis[r];
    if (b < nx && std::abs(c(b)) > 0.0) tab.t.row(m) -= c(b) * tab.t.row(r);
  }
  // Artificial columns stay out of the basis in phase II.
  for (int r = 0; r <= m; ++r) tab.t.block(r, nx + ns, 1, m).setZero();
  if (!tab.run(nx + ns)) {
    res.status = Status::unbounded;
    return res;
  }
  res.status = Status::optimal;
  res.x = Eigen::VectorXd::Zero(nx);
  for (int r = 0; r < m; ++r) {
    if (tab.basis[r] < nx) res.x(tab.basis[r]) = tab.t(r, n);
  }
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace bariflex::lp
