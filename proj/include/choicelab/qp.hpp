#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "choicelab/common.hpp"

namespace choicelab {

// min over { v : v >= lower_bound } of (g - Gv)' diag(weights) (g - Gv).
// Weights are a generalized inverse of a diagonal variance matrix: entries
// may be zero, which drops the row from the fit.
struct ConeProblem {
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd weights;
  double lower_bound = 0.0;
};

struct ConeSolution {
  double objective = 0.0;
  Eigen::VectorXd v;
  Eigen::VectorXd fitted;      // G v
  double kkt_interior = 0.0;   // max |gradient| over coordinates off the bound
  double kkt_bound = 0.0;      // max(0, -gradient) over coordinates at the bound
  int iterations = 0;
  int zero_weight_rows = 0;
};

// Substitutes w = v - bound*1: same objective with bound 0 and g shifted by
// G * bound * 1.
inline ConeProblem shift_to_zero_bound(const ConeProblem& p) {
  ConeProblem q = p;
  if (p.lower_bound != 0.0) {
    q.g = p.g - p.lower_bound * (p.G * Eigen::VectorXd::Ones(p.G.cols()));
    q.lower_bound = 0.0;
  }
  return q;
}

namespace detail {

// Lawson-Hanson active-set NNLS with minimum-norm inner solves (the columns
// of the cone matrices are massively collinear, so the normal equations go
// rank deficient routinely).
inline Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            int& iterations, int max_iter) {
  const int nc = static_cast<int>(A.cols());
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nc);
  if (nc == 0) return u;
  std::vector<bool> passive(nc, false);
  std::vector<int> pidx;

  const double dual_tol = 1e-11 * std::max(1.0, b.cwiseAbs().maxCoeff());

  auto solve_passive = [&](const std::vector<int>& idx) {
    Eigen::MatrixXd Ap(A.rows(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(k) = A.col(idx[k]);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Ap);
    return Eigen::VectorXd(cod.solve(b));
  };

  while (true) {
    if (++iterations > max_iter) throw Error("cone solver iteration limit");
    const Eigen::VectorXd resid = b - A * u;
    int enter = -1;
    double best = dual_tol;
    for (int j = 0; j < nc; ++j) {
      if (passive[j]) continue;
      const double d = A.col(j).dot(resid);
      if (d > best) { best = d; enter = j; }
    }
    if (enter < 0) break;

    passive[enter] = true;
    pidx.push_back(enter);
    Eigen::VectorXd z = solve_passive(pidx);

    // Inner loop: walk back toward feasibility, dropping variables that hit 0.
    while (true) {
      double zmin = 0;
      for (std::size_t k = 0; k < pidx.size(); ++k) zmin = std::min(zmin, z[k]);
      if (zmin > -1e-12) break;
      if (++iterations > max_iter) throw Error("cone solver iteration limit");

      double alpha = 1.0;
      for (std::size_t k = 0; k < pidx.size(); ++k)
        if (z[k] <= 1e-12) {
          const double uk = u[pidx[k]];
          const double step = uk / (uk - z[k]);
          alpha = std::min(alpha, step);
        }
      for (std::size_t k = 0; k < pidx.size(); ++k) {
        const int j = pidx[k];
        u[j] += alpha * (z[k] - u[j]);
      }
      std::vector<int> keep;
      for (int j : pidx) {
        if (u[j] <= 1e-12) {
          passive[j] = false;
          u[j] = 0.0;
        } else {
          keep.push_back(j);
        }
      }
      pidx = std::move(keep);
      if (pidx.empty()) { z.resize(0); break; }
      z = solve_passive(pidx);
    }
    for (std::size_t k = 0; k < pidx.size(); ++k) u[pidx[k]] = z[k];
  }
  return u;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace detail

// Solves the cone problem exactly (finite active-set termination). The block
// structure of G = [[B,0],[0,I]] makes the problem separable; rather than
// special-casing it, columns are split into connected components through the
// positive-weight rows and each component is solved independently. Identity
// columns become singleton components (a clipped projection), the B block
// stays one small NNLS.
inline ConeSolution solve_cone(const ConeProblem& problem, double tol = 1e-9,
                               int max_iter = 0) {
  const ConeProblem p0 = shift_to_zero_bound(problem);
  const int nr = static_cast<int>(p0.G.rows());
  const int nc = static_cast<int>(p0.G.cols());
  if (p0.g.size() != nr || p0.weights.size() != nr)
    throw Error("cone problem dimension mismatch");
  if (max_iter <= 0) max_iter = 30 * nc + 200;

  ConeSolution sol;
  sol.v = Eigen::VectorXd::Zero(nc);

  detail::UnionFind uf(nc);
  std::vector<std::vector<int>> row_cols(nr);
  for (int i = 0; i < nr; ++i) {
    if (p0.weights[i] <= 0) { ++sol.zero_weight_rows; continue; }
    for (int j = 0; j < nc; ++j)
      if (p0.G(i, j) != 0.0) row_cols[i].push_back(j);
    for (std::size_t k = 1; k < row_cols[i].size(); ++k)
      uf.unite(row_cols[i][0], row_cols[i][k]);
  }

  std::vector<std::vector<int>> comp_cols(nc);
  std::vector<bool> touched(nc, false);
  for (int i = 0; i < nr; ++i)
    for (int j : row_cols[i]) touched[j] = true;
  for (int j = 0; j < nc; ++j)
    if (touched[j]) comp_cols[uf.find(j)].push_back(j);

  // Columns outside every positive-weight row: cost-free. Track the data for
  // single-entry columns so the fitted vector follows g there; otherwise 0.
  for (int j = 0; j < nc; ++j) {
    if (touched[j]) continue;
    int hit_row = -1;
    int hits = 0;
    for (int i = 0; i < nr; ++i)
      if (p0.G(i, j) != 0.0) { ++hits; hit_row = i; }
    if (hits == 1) sol.v[j] = std::max(0.0, p0.g[hit_row] / p0.G(hit_row, j));
  }

  for (int root = 0; root < nc; ++root) {
    const auto& cols = comp_cols[root];
    if (cols.empty()) continue;
    std::vector<int> rows;
    for (int i = 0; i < nr; ++i) {
      if (p0.weights[i] <= 0) continue;
      for (int j : cols)
        if (p0.G(i, j) != 0.0) { rows.push_back(i); break; }
    }
    // 1x1 fast path: single column with a single row.
    if (cols.size() == 1 && rows.size() == 1) {
      const int i = rows[0], j = cols[0];
      sol.v[j] = std::max(0.0, p0.g[i] / p0.G(i, j));
      continue;
    }
    Eigen::MatrixXd Aw(rows.size(), cols.size());
    Eigen::VectorXd bw(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double s = std::sqrt(p0.weights[rows[r]]);
      bw[r] = s * p0.g[rows[r]];
      for (std::size_t c = 0; c < cols.size(); ++c)
        Aw(r, c) = s * p0.G(rows[r], cols[c]);
    }
    Eigen::VectorXd u = detail::nnls(Aw, bw, sol.iterations, max_iter);
    for (std::size_t c = 0; c < cols.size(); ++c) sol.v[cols[c]] = u[c];
  }

  // Back to the original bound and the exact objective/KKT on original data.
  sol.v.array() += problem.lower_bound;
  sol.fitted = problem.G * sol.v;
  const Eigen::VectorXd resid = problem.g - sol.fitted;
  sol.objective = resid.cwiseProduct(resid).dot(problem.weights);

  const Eigen::VectorXd grad =
      -2.0 * problem.G.transpose() * problem.weights.cwiseProduct(resid).eval();
  for (int j = 0; j < nc; ++j) {
    if (sol.v[j] > problem.lower_bound + tol)
      sol.kkt_interior = std::max(sol.kkt_interior, std::abs(grad[j]));
    else
      sol.kkt_bound = std::max(sol.kkt_bound, -grad[j]);
  }
  return sol;
}

}  // namespace choicelab
