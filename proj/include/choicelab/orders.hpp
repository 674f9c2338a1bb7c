#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "choicelab/common.hpp"
#include "choicelab/lottery.hpp"
#include "choicelab/lp.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// Strict linear order, best alternative first. Alternatives are item indices
// 0..n-1; when the order covers the default as well, index n stands for it.
struct PreferenceOrder {
  std::vector<int> ranking;

  int top_of(Mask menu_mask, int n_items, bool menu_has_default = false) const {
    for (int alt : ranking) {
      if (alt == n_items) {
        if (menu_has_default) return alt;
        continue;
      }
      if (menu_mask >> alt & 1u) return alt;
    }
    throw Error("order does not rank any alternative of the menu");
  }
};

enum class Restriction { All, Eu, Crra };

struct SigmaBracket {
  double lo = 0, hi = 0;  // closed grid range over which the order holds
};

struct PreferenceOrderSet {
  Restriction restriction = Restriction::All;
  bool includes_default = false;
  std::vector<PreferenceOrder> orders;
  std::vector<SigmaBracket> brackets;  // parallel to orders; CRRA only

  int count() const { return static_cast<int>(orders.size()); }

  // Interior boundaries between consecutive CRRA brackets (reported as the
  // last grid point of the earlier bracket).
  std::vector<double> bracket_boundaries() const {
    std::vector<double> b;
    for (std::size_t i = 0; i + 1 < brackets.size(); ++i)
      b.push_back(brackets[i].hi);
    return b;
  }
};

inline PreferenceOrderSet enumerate_orders(const ChoiceUniverse& u,
                                           bool include_default,
                                           long cap = 4000000) {
  const int k = u.size() + (include_default ? 1 : 0);
  long total = 1;
  for (int i = 2; i <= k; ++i) {
    total *= i;
    if (total > cap) throw Error("order enumeration cap exceeded");
  }
  PreferenceOrderSet set;
  set.includes_default = include_default;
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    set.orders.push_back(PreferenceOrder{perm});
  } while (std::next_permutation(perm.begin(), perm.end()));
  return set;
}

// Expected-utility consistency of one order: there must be a Bernoulli vector
// u with (x_i - x_{i+1})'u >= margin for consecutive ranked lotteries. Strict
// systems are scale free, so the margin choice is innocuous.
inline bool eu_feasible(const PreferenceOrder& order, const LotteryBook& book,
                        double margin = 1.0) {
  const int rows = static_cast<int>(order.ranking.size()) - 1;
  if (rows <= 0) return true;
  const int nz = static_cast<int>(book.prizes().size());
  Eigen::MatrixXd D(rows, nz);
  for (int i = 0; i < rows; ++i) {
    const Lottery& hi = book.alternative(order.ranking[i]);
    const Lottery& lo = book.alternative(order.ranking[i + 1]);
    for (int z = 0; z < nz; ++z) D(i, z) = hi.probs[z] - lo.probs[z];
  }
  return linear_system_feasible(D, margin);
}

inline PreferenceOrderSet filter_eu(const PreferenceOrderSet& all,
                                    const LotteryBook& book) {
  PreferenceOrderSet set;
  set.restriction = Restriction::Eu;
  set.includes_default = all.includes_default;
  for (const auto& o : all.orders)
    if (eu_feasible(o, book)) set.orders.push_back(o);
  return set;
}

// Ranks (1 = best) over items plus optionally the default at a single sigma.
inline std::vector<int> crra_ranks(const LotteryBook& book, double sigma,
                                   bool include_default) {
  const int k = book.universe().size() + (include_default ? 1 : 0);
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> v(k);
  for (int a = 0; a < k; ++a) v[a] = book.crra_value(a, sigma);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return v[a] > v[b]; });
  std::vector<int> rank(k);
  for (int r = 0; r < k; ++r) rank[idx[r]] = r + 1;
  return rank;
}

// Sweeps sigma over [lo, hi] on a uniform grid and collects the distinct
// induced orders with their contiguous sigma brackets. Grid points where two
// alternatives tie exactly are skipped (orders are strict). Every pairwise
// comparison must flip at most once along the grid; a second flip throws.
inline PreferenceOrderSet enumerate_crra(const LotteryBook& book,
                                         bool include_default = false,
                                         double sigma_lo = -1.0,
                                         double sigma_hi = 1.0,
                                         double step = 1e-4) {
  const int k = book.universe().size() + (include_default ? 1 : 0);
  const long steps = std::lround((sigma_hi - sigma_lo) / step);

  PreferenceOrderSet set;
  set.restriction = Restriction::Crra;
  set.includes_default = include_default;

  std::vector<int> flip_count(k * k, 0);
  std::vector<int> last_sign(k * k, 0);
  std::vector<double> v(k);
  std::vector<int> idx(k);

  for (long t = 0; t <= steps; ++t) {
    const double sigma = sigma_lo + static_cast<double>(t) * step;
    for (int a = 0; a < k; ++a) v[a] = book.crra_value(a, sigma);

    bool tie = false;
    for (int a = 0; a < k && !tie; ++a)
      for (int b = a + 1; b < k && !tie; ++b)
        if (std::abs(v[a] - v[b]) < 1e-12) tie = true;
    if (tie) continue;

    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        const int s = v[a] > v[b] ? 1 : -1;
        int& prev = last_sign[a * k + b];
        if (prev != 0 && s != prev && ++flip_count[a * k + b] > 1)
          throw Error("single-crossing violation on the sigma grid");
        prev = s;
      }

    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return v[a] > v[b]; });
    if (set.orders.empty() || set.orders.back().ranking != idx) {
      set.orders.push_back(PreferenceOrder{idx});
      set.brackets.push_back(SigmaBracket{sigma, sigma});
    } else {
      set.brackets.back().hi = sigma;
    }
  }
  return set;
}

// Deterministic-choice indicator matrix: column l is order l's choice pattern
// over all (a, A) coordinates. Row layout follows SubsetIndexer, with default
// rows present exactly when the order set ranks the default.
inline Eigen::MatrixXd build_B(const PreferenceOrderSet& orders,
                               const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  const bool def = orders.includes_default;
  const long rows = ix.choice_dim(def);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows, orders.count());
  for (int l = 0; l < orders.count(); ++l) {
    const auto& od = orders.orders[l];
    for (Mask A = 1; A <= u.full_mask(); ++A) {
      const int best = od.top_of(A, u.size(), def);
      long row;
      if (best == u.size()) row = ix.default_coord(A);
      else row = def ? ix.choice_coord_def(best, A) : ix.choice_coord(best, A);
      B(row, l) = 1.0;
    }
  }
  return B;
}

struct ConeMatrices {
  Eigen::MatrixXd B;
  Eigen::MatrixXd G;  // [[B, 0], [0, I_dm]]
  long d_p = 0, d_m = 0;
};

inline ConeMatrices build_G(const Eigen::MatrixXd& B, long d_m) {
  ConeMatrices cm;
  cm.B = B;
  cm.d_p = B.rows();
  cm.d_m = d_m;
  cm.G = Eigen::MatrixXd::Zero(B.rows() + d_m, B.cols() + d_m);
  cm.G.topLeftCorner(B.rows(), B.cols()) = B;
  cm.G.bottomRightCorner(d_m, d_m).setIdentity();
  return cm;
}

}  // namespace choicelab
