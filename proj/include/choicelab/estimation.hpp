#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "choicelab/linkfn.hpp"
#include "choicelab/orders.hpp"
#include "choicelab/qp.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// Euclidean projection of y onto { x : x >= floor, sum x = 1 }.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& y, double floor = 0.0) {
  const long n = y.size();
  const double budget = 1.0 - floor * static_cast<double>(n);
  if (budget < 0) throw Error("floor too large for simplex projection");
  // Shift so the problem is projection onto the scaled simplex {z>=0, sum=budget}.
  Eigen::VectorXd z = y.array() - floor;
  std::vector<double> sorted(z.data(), z.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0, theta = 0;
  for (long k = 0; k < n; ++k) {
    cum += sorted[k];
    const double t = (cum - budget) / static_cast<double>(k + 1);
    if (k + 1 == n || sorted[k + 1] <= t) { theta = t; break; }
  }
  return (z.array() - theta).cwiseMax(0.0) + floor;
}

// Projects a calibrated rule back onto the model class: LA and MM project the
// index onto the floored simplex (strict positivity is required for every
// menu), RCG projects onto the plain simplex, FC is already proper.
inline ConsiderationRule project_consideration(const Calibration& cal,
                                               const SubsetIndexer& ix,
                                               double floor = 1e-4) {
  switch (cal.link) {
    case LinkFn::FC:
      return cal.rule;
    case LinkFn::LA:
    case LinkFn::MM: {
      AttentionIndex idx;
      idx.eta = project_simplex(cal.index.eta, floor);
      return forward_m(idx, LinkFn::LA, ix);
    }
    case LinkFn::RCG: {
      AttentionIndex idx;
      idx.eta = project_simplex(cal.index.eta, 0.0);
      return forward_m(idx, LinkFn::RCG, ix);
    }
  }
  throw Error("unreachable");
}

struct PiEstimate {
  Eigen::VectorXd pi;       // on the simplex
  double residual = 0.0;    // weighted LS residual before normalization
  double raw_mass = 0.0;    // sum of the nonnegative solution
};

// Preference weights: nonnegative least squares of the deconvolved choice
// block on the order columns, then renormalized to the simplex. Exact on
// well-specified exact rules; the pre-normalization residual is reported.
inline PiEstimate estimate_pi(const Eigen::VectorXd& p_pi_block,
                              const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& weights = Eigen::VectorXd()) {
  ConeProblem prob;
  prob.g = p_pi_block;
  prob.G = B;
  prob.weights = weights.size() ? weights : Eigen::VectorXd::Ones(B.rows());
  prob.lower_bound = 0.0;
  const ConeSolution sol = solve_cone(prob);

  PiEstimate est;
  est.residual = sol.objective;
  est.raw_mass = sol.v.sum();
  if (est.raw_mass <= 0) throw Error("degenerate preference fit: zero mass");
  est.pi = sol.v / est.raw_mass;
  return est;
}

// Convenience: estimate pi for a rule under a projected consideration rule.
inline PiEstimate estimate_pi(const CompleteChoiceRule& p,
                              const ConsiderationRule& m_proper,
                              const PreferenceOrderSet& orders,
                              const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  for (Mask A = 1; A <= u.full_mask(); ++A)
    if (!(m_proper.m[ix.consideration_coord(A, A)] > 0))
      throw Error("zero full-consideration mass at menu " + std::to_string(A));
  const Eigen::VectorXd q = calibrate_full_consideration(p, m_proper, ix);
  return estimate_pi(q, build_B(orders, u));
}

// Average attention contribution of each item of A:
//   I_A(a) = sum_{D subset A, a in D} m_A(D) / |D|.
inline Eigen::VectorXd attention_contribution(const ConsiderationRule& m,
                                              const SubsetIndexer& ix, Mask A) {
  Eigen::VectorXd I = Eigen::VectorXd::Zero(ix.items());
  for (Mask D = 0;; D = next_subset(D, A)) {
    if (D != 0) {
      const double w = m.m[ix.consideration_coord(A, D)] / popcount(D);
      for (int a = 0; a < ix.items(); ++a)
        if (D >> a & 1u) I[a] += w;
    }
    if (D == A) break;
  }
  return I;
}

// Fraction of the population whose consideration set misses its preference
// type's best item of A, weighted by the type probabilities.
inline double welfare_suboptimization(const ConsiderationRule& m,
                                      const PreferenceOrderSet& orders,
                                      const Eigen::VectorXd& pi,
                                      const SubsetIndexer& ix, Mask A) {
  if (pi.size() != orders.count()) throw Error("pi size mismatch");
  double loss = 0;
  for (int l = 0; l < orders.count(); ++l) {
    const int top = orders.orders[l].top_of(A, ix.items(), false);
    double miss = 0;
    for (Mask D = 0;; D = next_subset(D, A)) {
      if (!(D >> top & 1u)) miss += m.m[ix.consideration_coord(A, D)];
      if (D == A) break;
    }
    loss += pi[l] * miss;
  }
  return loss;
}

struct SigmaMass {
  SigmaBracket bracket;
  double mass = 0.0;
};

// Attaches estimated masses to the CRRA sigma brackets.
inline std::vector<SigmaMass> sigma_bracket(const Eigen::VectorXd& pi,
                                            const PreferenceOrderSet& crra) {
  if (crra.restriction != Restriction::Crra || crra.brackets.size() != crra.orders.size())
    throw Error("sigma brackets require a CRRA order set");
  if (pi.size() != crra.count()) throw Error("pi size mismatch");
  std::vector<SigmaMass> out;
  for (int i = 0; i < crra.count(); ++i)
    out.push_back({crra.brackets[i], pi[i]});
  return out;
}

}  // namespace choicelab
