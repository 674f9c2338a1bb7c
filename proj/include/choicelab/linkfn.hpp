#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "choicelab/common.hpp"
#include "choicelab/dataset.hpp"
#include "choicelab/orders.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

enum class LinkFn { LA, MM, RCG, FC };

inline const char* link_name(LinkFn l) {
  switch (l) {
    case LinkFn::LA: return "la";
    case LinkFn::MM: return "mm";
    case LinkFn::RCG: return "rcg";
    case LinkFn::FC: return "fc";
  }
  return "?";
}

// Attention index over 2^X, indexed by subset mask. A proper index is a
// probability measure; calibrated instances may leave the simplex, and that
// departure is exactly what the tests measure.
struct AttentionIndex {
  Eigen::VectorXd eta;  // size 2^n

  bool proper(double tol = 1e-10) const {
    if (eta.minCoeff() < -tol) return false;
    return std::abs(eta.sum() - 1.0) <= tol;
  }
};

// Menu-conditional consideration weights m_A(D), laid out by SubsetIndexer
// (all A in 2^X ascending, D subset of A ascending; 3^n coordinates).
struct ConsiderationRule {
  LinkFn link = LinkFn::FC;
  Eigen::VectorXd m;  // size 3^n

  double at(const SubsetIndexer& ix, Mask A, Mask D) const {
    return m[ix.consideration_coord(A, D)];
  }
};

struct MMGamma {
  Eigen::VectorXd gamma;  // per item

  bool well_defined(double tol = 0.0) const {
    for (int i = 0; i < gamma.size(); ++i)
      if (!(gamma[i] > tol && gamma[i] < 1.0 - tol)) return false;
    return true;
  }
};

// Product-form index: eta(D) = prod_{a in D} g_a * prod_{b not in D} (1-g_b).
inline AttentionIndex product_index(const MMGamma& g) {
  const int n = static_cast<int>(g.gamma.size());
  AttentionIndex ai;
  ai.eta.resize(1L << n);
  for (Mask D = 0; D < (Mask{1} << n); ++D) {
    double v = 1.0;
    for (int a = 0; a < n; ++a) v *= (D >> a & 1u) ? g.gamma[a] : 1.0 - g.gamma[a];
    ai.eta[D] = v;
  }
  return ai;
}

// Subset sums s(A) = sum_{C subset A} f(C), in place, O(n 2^n).
inline void zeta_transform(Eigen::VectorXd& f, int n) {
  for (int i = 0; i < n; ++i)
    for (Mask S = 0; S < (Mask{1} << n); ++S)
      if (S >> i & 1u) f[S] += f[S ^ (Mask{1} << i)];
}

// Inverse of zeta_transform: g(D) = sum_{B subset D} (-1)^{|D\B|} f(B).
inline void mobius_transform(Eigen::VectorXd& f, int n) {
  for (int i = 0; i < n; ++i)
    for (Mask S = 0; S < (Mask{1} << n); ++S)
      if (S >> i & 1u) f[S] -= f[S ^ (Mask{1} << i)];
}

// -------- forward maps: index -> consideration rule --------

// LA: m_A(D) = eta(D) / sum_{C subset A} eta(C)     (requires eta > 0)
// RCG: m_A(D) = sum_{C : C cap A = D} eta(C)
// MM:  LA applied to the product-form index
// FC:  m_A(D) = 1[D == A]
inline ConsiderationRule forward_m(const AttentionIndex& idx, LinkFn link,
                                   const SubsetIndexer& ix) {
  const int n = ix.items();
  const Mask full = ix.full_mask();
  if (idx.eta.size() != (1L << n)) throw Error("attention index has wrong size");
  if (link != LinkFn::FC) {
    if (!idx.proper()) throw Error("improper attention index");
    if ((link == LinkFn::LA || link == LinkFn::MM) && idx.eta.minCoeff() <= 0)
      throw Error("LA/MM require a strictly positive index");
  }

  ConsiderationRule cr;
  cr.link = link;
  cr.m = Eigen::VectorXd::Zero(ix.consideration_dim());

  switch (link) {
    case LinkFn::FC:
      for (Mask A = 0; A <= full; ++A) cr.m[ix.consideration_coord(A, A)] = 1.0;
      break;
    case LinkFn::LA:
    case LinkFn::MM: {
      Eigen::VectorXd denom = idx.eta;
      zeta_transform(denom, n);
      for (Mask A = 0; A <= full; ++A)
        for (Mask D = 0;; D = next_subset(D, A)) {
          cr.m[ix.consideration_coord(A, D)] = idx.eta[D] / denom[A];
          if (D == A) break;
        }
      break;
    }
    case LinkFn::RCG:
      for (Mask A = 0; A <= full; ++A)
        for (Mask C = 0; C <= full; ++C)
          cr.m[ix.consideration_coord(A, C & A)] += idx.eta[C];
      break;
  }
  return cr;
}

inline ConsiderationRule forward_m_mm(const MMGamma& g, const SubsetIndexer& ix) {
  return forward_m(product_index(g), LinkFn::MM, ix);
}

// Default-choice probabilities implied by a consideration rule: p(o,A)=m_A(0).
inline Eigen::VectorXd default_probabilities(const ConsiderationRule& cr,
                                             const SubsetIndexer& ix) {
  const Mask full = ix.full_mask();
  Eigen::VectorXd po(full + 1);
  po[0] = 1.0;
  for (Mask A = 1; A <= full; ++A) po[A] = cr.m[ix.consideration_coord(A, 0)];
  return po;
}

// -------- calibration: data -> candidate index / rule --------

struct Calibration {
  LinkFn link;
  AttentionIndex index;           // calibrated eta
  ConsiderationRule rule;         // calibrated m
  std::optional<MMGamma> gamma;   // MM only
  Eigen::VectorXd gamma_by_menu;  // MM diagnostic: per-menu gamma estimates, flattened (a, A)
};

// Calibrates eta from default-choice probabilities by Mobius inversion.
// LA/MM require p(o,A) > 0 for every menu; a zero raises an Error naming the
// menu (callers that resample catch it and count the failure).
inline AttentionIndex calibrate_eta(const CompleteChoiceRule& p, LinkFn link,
                                    const SubsetIndexer& ix) {
  const int n = ix.items();
  const Mask full = ix.full_mask();
  AttentionIndex out;
  out.eta.resize(1L << n);

  switch (link) {
    case LinkFn::FC:
      out.eta.setZero();
      out.eta[full] = 1.0;
      break;
    case LinkFn::LA: {
      const double poX = p.p_default(full);
      for (Mask B = 0; B <= full; ++B) {
        const double poB = p.p_default(B);
        if (poB <= 0)
          throw Error(std::string("division by zero default probability at menu ") +
                      std::to_string(B));
        out.eta[B] = poX / poB;
      }
      mobius_transform(out.eta, n);
      break;
    }
    case LinkFn::RCG: {
      for (Mask B = 0; B <= full; ++B) out.eta[B] = p.p_default(full & ~B);
      mobius_transform(out.eta, n);
      break;
    }
    case LinkFn::MM: {
      // gamma from the grand set (all menus agree under correct
      // specification; the per-menu spread is a diagnostic, see below).
      MMGamma g;
      g.gamma.resize(n);
      const double poX = p.p_default(full);
      for (int a = 0; a < n; ++a) {
        const double po_sub = p.p_default(full & ~(Mask{1} << a));
        if (po_sub <= 0 || poX <= 0)
          throw Error("division by zero default probability in MM calibration");
        g.gamma[a] = 1.0 - poX / po_sub;
      }
      out = product_index(g);
      break;
    }
  }
  return out;
}

inline Calibration calibrate(const CompleteChoiceRule& p, LinkFn link,
                             const SubsetIndexer& ix) {
  Calibration cal;
  cal.link = link;
  cal.index = calibrate_eta(p, link, ix);
  const int n = ix.items();
  const Mask full = ix.full_mask();

  if (link == LinkFn::MM) {
    MMGamma g;
    g.gamma.resize(n);
    const double poX = p.p_default(full);
    for (int a = 0; a < n; ++a)
      g.gamma[a] = 1.0 - poX / p.p_default(full & ~(Mask{1} << a));
    cal.gamma = g;
    // Per-menu estimates gamma_A(a) = 1 - p(o,A)/p(o,A\{a}).
    std::vector<double> diag;
    for (Mask A = 1; A <= full; ++A)
      for (int a = 0; a < n; ++a)
        if (A >> a & 1u) {
          const double sub = p.p_default(A & ~(Mask{1} << a));
          diag.push_back(sub > 0 ? 1.0 - p.p_default(A) / sub
                                 : std::numeric_limits<double>::quiet_NaN());
        }
    cal.gamma_by_menu = Eigen::Map<Eigen::VectorXd>(diag.data(), diag.size());
    // MM's consideration rule is the LA form of the product index; that index
    // is proper by construction only when gamma is in (0,1), so build the rule
    // directly instead of going through forward_m's propriety gate.
  }

  // Build m from the calibrated eta via the link's formula, without the
  // propriety preconditions: calibrated rules may violate them.
  cal.rule.link = link;
  cal.rule.m = Eigen::VectorXd::Zero(ix.consideration_dim());
  switch (link) {
    case LinkFn::FC:
      for (Mask A = 0; A <= full; ++A)
        cal.rule.m[ix.consideration_coord(A, A)] = 1.0;
      break;
    case LinkFn::LA:
    case LinkFn::MM: {
      Eigen::VectorXd denom = cal.index.eta;
      zeta_transform(denom, n);
      for (Mask A = 0; A <= full; ++A)
        for (Mask D = 0;; D = next_subset(D, A)) {
          cal.rule.m[ix.consideration_coord(A, D)] = cal.index.eta[D] / denom[A];
          if (D == A) break;
        }
      break;
    }
    case LinkFn::RCG:
      for (Mask A = 0; A <= full; ++A)
        for (Mask C = 0; C <= full; ++C)
          cal.rule.m[ix.consideration_coord(A, C & A)] += cal.index.eta[C];
      break;
  }
  return cal;
}

// -------- well-definedness --------

struct Violation {
  Mask menu;
  Mask subset;
  double value;  // offending coordinate value (or gamma)
};

struct WellDefinedReport {
  bool ok = true;
  std::vector<Violation> violations;
};

// Per-link conditions: LA strictly positive, MM gamma in (0,1), RCG
// nonnegative, FC always fine. Violations are data, not errors.
inline WellDefinedReport well_defined(const Calibration& cal,
                                      const SubsetIndexer& ix,
                                      double tol = 1e-12) {
  WellDefinedReport rep;
  const Mask full = ix.full_mask();
  switch (cal.link) {
    case LinkFn::FC:
      break;
    case LinkFn::MM:
      for (int a = 0; a < ix.items(); ++a) {
        const double g = cal.gamma ? cal.gamma->gamma[a] : 0.0;
        if (!(g > tol && g < 1.0 - tol))
          rep.violations.push_back({Mask{1} << a, 0, g});
      }
      break;
    case LinkFn::LA:
    case LinkFn::RCG: {
      const bool strict = cal.link == LinkFn::LA;
      for (Mask A = 0; A <= full; ++A)
        for (Mask D = 0;; D = next_subset(D, A)) {
          const double v = cal.rule.m[ix.consideration_coord(A, D)];
          if (strict ? !(v > tol) : v < -tol) rep.violations.push_back({A, D, v});
          if (D == A) break;
        }
      break;
    }
  }
  rep.ok = rep.violations.empty();
  return rep;
}

// -------- calibrated full-consideration rule --------

// Recursive deconvolution of observed choices by a consideration rule,
// evaluated by ascending menu cardinality:
//   q(a,A) = ( p(a,A) - sum_{C strict subset of A} m_A(C) q(a,C) ) / m_A(A),
// with q(a,C) = 0 whenever a is outside C and q(a,empty) = 0. Layout is the
// default-free choice coordinate order; size d_p.
inline Eigen::VectorXd calibrate_full_consideration(const CompleteChoiceRule& p,
                                                    const ConsiderationRule& m,
                                                    const SubsetIndexer& ix,
                                                    double zero_tol = 0.0) {
  const int n = ix.items();
  const Mask full = ix.full_mask();
  Eigen::VectorXd q = Eigen::VectorXd::Zero(ix.choice_dim(false));

  std::vector<Mask> menus;
  for (Mask A = 1; A <= full; ++A) menus.push_back(A);
  std::stable_sort(menus.begin(), menus.end(),
                   [](Mask a, Mask b) { return popcount(a) < popcount(b); });

  for (Mask A : menus) {
    const double mAA = m.m[ix.consideration_coord(A, A)];
    if (!(std::abs(mAA) > zero_tol))
      throw Error("zero full-consideration mass at menu " + std::to_string(A));
    for (int a = 0; a < n; ++a) {
      if (!(A >> a & 1u)) continue;
      double s = p.p(a, A);
      for (Mask C = 0;; C = next_subset(C, A)) {
        if (C != A && (C >> a & 1u))
          s -= m.m[ix.consideration_coord(A, C)] * q[ix.choice_coord(a, C)];
        if (C == A) break;
      }
      q[ix.choice_coord(a, A)] = s / mAA;
    }
  }
  return q;
}

// -------- forward mixture rule and the universal decomposition --------

// p(a,A) = sum_orders pi(ord) sum_{D subset A} m_A(D) 1[a is ord-max of D];
// the empty consideration set selects the default.
inline CompleteChoiceRule mixture_rule(const ConsiderationRule& m,
                                       const PreferenceOrderSet& orders,
                                       const Eigen::VectorXd& pi,
                                       const ChoiceUniverse& u) {
  if (orders.includes_default)
    throw Error("mixture rule takes orders over items only");
  if (pi.size() != orders.count()) throw Error("pi size mismatch");
  if (std::abs(pi.sum() - 1.0) > 1e-9 || pi.minCoeff() < -1e-12)
    throw Error("pi must be a distribution");

  const SubsetIndexer ix(u);
  CompleteChoiceRule p(u);
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    p.set_p_default(A, m.m[ix.consideration_coord(A, 0)]);
    for (Mask D = 0;; D = next_subset(D, A)) {
      if (D != 0) {
        const double w = m.m[ix.consideration_coord(A, D)];
        if (w != 0.0) {
          for (int l = 0; l < orders.count(); ++l) {
            const int best = orders.orders[l].top_of(D, u.size(), false);
            p.set_p(best, A, p.p(best, A) + pi[l] * w);
          }
        }
      }
      if (D == A) break;
    }
  }
  return p;
}

// Pure full-consideration rule of a preference distribution (no default mass).
inline Eigen::VectorXd fc_choice_vector(const PreferenceOrderSet& orders,
                                        const Eigen::VectorXd& pi,
                                        const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(ix.choice_dim(false));
  for (Mask A = 1; A <= u.full_mask(); ++A)
    for (int l = 0; l < orders.count(); ++l) {
      const int best = orders.orders[l].top_of(A, u.size(), false);
      q[ix.choice_coord(best, A)] += pi[l];
    }
  return q;
}

struct Decomposition {
  ConsiderationRule m;
  PreferenceOrderSet orders;
  Eigen::VectorXd pi;
};

// Constructive decomposition: every complete rule is a consideration mixture
// with singleton consideration sets m_A({a}) = p(a,A), m_A(empty) = p(o,A),
// and a uniform preference distribution.
inline Decomposition universal_hrc_decomposition(const CompleteChoiceRule& p,
                                                 const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  Decomposition d;
  d.m.link = LinkFn::FC;  // tag is irrelevant; weights are explicit
  d.m.m = Eigen::VectorXd::Zero(ix.consideration_dim());
  d.m.m[ix.consideration_coord(0, 0)] = 1.0;
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    d.m.m[ix.consideration_coord(A, 0)] = p.p_default(A);
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u)
        d.m.m[ix.consideration_coord(A, Mask{1} << a)] = p.p(a, A);
  }
  d.orders = enumerate_orders(u, false);
  d.pi = Eigen::VectorXd::Constant(d.orders.count(), 1.0 / d.orders.count());
  return d;
}

}  // namespace choicelab
