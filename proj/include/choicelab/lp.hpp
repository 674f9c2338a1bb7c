#pragma once

#include <Eigen/Dense>
#include <vector>

#include "choicelab/common.hpp"

namespace choicelab {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  double objective = 0;
  Eigen::VectorXd x;
};

// Revised simplex for  min c'x  s.t.  Ax = b,  lo <= x <= hi,  starting from
// a basic feasible solution (basis + nonbasic bound flags supplied by the
// caller). Bland's rule, so it terminates. Sized for the small feasibility
// programs used here (a handful of rows), not for large LPs.
inline LpResult lp_simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                           const Eigen::VectorXd& c, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, std::vector<int> basic,
                           std::vector<bool> at_upper, int max_iter = 5000) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  const double tol = 1e-9;

  std::vector<bool> is_basic(n, false);
  for (int i : basic) is_basic[i] = true;

  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) x[j] = at_upper[j] ? hi[j] : lo[j];

  LpResult res;
  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::MatrixXd B(m, m);
    for (int i = 0; i < m; ++i) B.col(i) = A.col(basic[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);

    Eigen::VectorXd rhs = b;
    for (int j = 0; j < n; ++j)
      if (!is_basic[j] && x[j] != 0) rhs -= A.col(j) * x[j];
    Eigen::VectorXd xB = lu.solve(rhs);
    for (int i = 0; i < m; ++i) x[basic[i]] = xB[i];

    Eigen::VectorXd cB(m);
    for (int i = 0; i < m; ++i) cB[i] = c[basic[i]];
    Eigen::VectorXd y = lu.transpose().solve(cB);

    int enter = -1;
    int dir = 0;
    for (int j = 0; j < n; ++j) {
      if (is_basic[j]) continue;
      const double dj = c[j] - y.dot(A.col(j));
      if (!at_upper[j] && dj < -tol) { enter = j; dir = +1; break; }
      if (at_upper[j] && dj > tol) { enter = j; dir = -1; break; }
    }
    if (enter < 0) {
      res.status = LpStatus::Optimal;
      res.objective = c.dot(x);
      res.x = x;
      return res;
    }

    Eigen::VectorXd w = lu.solve(A.col(enter));
    double tmax = hi[enter] - lo[enter];  // entering flips to its other bound
    int leave = -1;                       // -1 means bound flip
    for (int i = 0; i < m; ++i) {
      const double delta = -dir * w[i];  // basic value moves by delta * t
      const int bi = basic[i];
      double cap;
      if (delta > tol) cap = (hi[bi] - x[bi]) / delta;
      else if (delta < -tol) cap = (lo[bi] - x[bi]) / delta;
      else continue;
      if (cap < tmax - tol || (cap < tmax + tol && (leave < 0 || bi < basic[leave]))) {
        tmax = std::min(tmax, std::max(cap, 0.0));
        leave = i;
      }
    }
    if (tmax > 1e18) {
      res.status = LpStatus::Unbounded;
      return res;
    }

    x[enter] += dir * tmax;
    for (int i = 0; i < m; ++i) x[basic[i]] -= dir * tmax * w[i];

    if (leave < 0) {
      at_upper[enter] = !at_upper[enter];
    } else {
      const int out = basic[leave];
      is_basic[out] = false;
      // Snap the leaving variable onto the bound it hit.
      at_upper[out] = std::abs(x[out] - hi[out]) < std::abs(x[out] - lo[out]);
      x[out] = at_upper[out] ? hi[out] : lo[out];
      basic[leave] = enter;
      is_basic[enter] = true;
    }
  }
  return res;
}

// Feasibility of { u : Du >= margin * 1, |u_j| <= box } via a phase-1
// program. Every row of D used here sums to zero (differences of probability
// vectors), but the routine does not rely on that.
inline bool linear_system_feasible(const Eigen::MatrixXd& D, double margin = 1.0,
                                   double box = 1e6) {
  const int m = static_cast<int>(D.rows());
  const int k = static_cast<int>(D.cols());
  if (m == 0) return true;

  // Variables: u' = u + box in [0, 2*box]; surplus s >= 0; artificial a >= 0.
  //   D u' - s + sign(r) a = r,  r = margin + box * D 1.
  const int n = k + m + m;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  A.leftCols(k) = D;
  Eigen::VectorXd b = Eigen::VectorXd::Constant(m, margin) + box * D.rowwise().sum();
  for (int i = 0; i < m; ++i) {
    A(i, k + i) = -1.0;
    A(i, k + m + i) = b[i] >= 0 ? 1.0 : -1.0;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  c.tail(m).setOnes();
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, 1e30);
  hi.head(k).setConstant(2 * box);

  std::vector<int> basic(m);
  for (int i = 0; i < m; ++i) basic[i] = k + m + i;
  std::vector<bool> at_upper(n, false);

  LpResult r = lp_simplex(A, b, c, lo, hi, std::move(basic), std::move(at_upper));
  if (r.status == LpStatus::IterationLimit)
    throw Error("LP iteration limit in feasibility check");
  return r.status == LpStatus::Optimal && r.objective < 1e-7;
}

}  // namespace choicelab
