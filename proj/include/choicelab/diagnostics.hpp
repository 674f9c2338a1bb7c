#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "choicelab/dataset.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

struct DeviationRecord {
  Mask menu = 0;       // the larger menu A
  int item = -1;       // removed item (overload) or boosted item (attraction)
  int decoy = -1;      // added alternative, attraction scans only
  double magnitude = 0.0;
};

// Inequality-scan summary mirrored by the JSON reports: share of comparisons
// violated, mean and standard deviation of the positive deviation magnitudes.
struct DeviationSummary {
  long comparisons = 0;
  long violations = 0;
  double mean_magnitude = 0.0;  // over violations
  double sd_magnitude = 0.0;
  std::vector<DeviationRecord> records;  // violations only

  double proportion() const {
    return comparisons ? static_cast<double>(violations) / comparisons : 0.0;
  }

  void finish() {
    violations = static_cast<long>(records.size());
    double s = 0, s2 = 0;
    for (const auto& r : records) { s += r.magnitude; s2 += r.magnitude * r.magnitude; }
    if (violations > 0) {
      mean_magnitude = s / violations;
      const double var = s2 / violations - mean_magnitude * mean_magnitude;
      sd_magnitude = var > 0 ? std::sqrt(var) : 0.0;
    }
  }
};

// Default-probability monotonicity scan: flags p(o,A) > p(o,A\{a}) over all
// menus with |A| >= 2. Frequencies are exact ratios, so the comparison is
// strict with zero tolerance.
inline DeviationSummary choice_overload_scan(const CompleteChoiceRule& p) {
  DeviationSummary s;
  const int n = p.items();
  for (Mask A = 1; A <= p.full_mask(); ++A) {
    if (popcount(A) < 2) continue;
    for (int a = 0; a < n; ++a) {
      if (!(A >> a & 1u)) continue;
      ++s.comparisons;
      const double d = p.p_default(A) - p.p_default(A & ~(Mask{1} << a));
      if (d > 0) s.records.push_back({A, a, -1, d});
    }
  }
  s.finish();
  return s;
}

// Regularity scan: flags p(a, A u {x}) > p(a, A) over all triples with a in A
// and x outside A.
inline DeviationSummary attraction_effect_scan(const CompleteChoiceRule& p) {
  DeviationSummary s;
  const int n = p.items();
  for (Mask A = 1; A <= p.full_mask(); ++A)
    for (int a = 0; a < n; ++a) {
      if (!(A >> a & 1u)) continue;
      for (int x = 0; x < n; ++x) {
        if (A >> x & 1u) continue;
        ++s.comparisons;
        const double d = p.p(a, A | (Mask{1} << x)) - p.p(a, A);
        if (d > 0) s.records.push_back({A | (Mask{1} << x), a, x, d});
      }
    }
  s.finish();
  return s;
}

struct RevealedPreferenceEdge {
  int from = -1, to = -1;
  Mask witness_menu = 0;  // p(from, A) > p(from, A \ {to})
};

struct AcyclicityReport {
  bool acyclic = true;
  std::vector<RevealedPreferenceEdge> edges;  // direct relation
  // A witnessing cycle as a closed walk of direct edges, when one exists.
  std::vector<RevealedPreferenceEdge> cycle;
};

// Builds the revealed-preference relation aPb (some menu A with both where
// removing b strictly raises a's probability), takes its transitive closure,
// and reports a witnessing cycle if the closure has one.
inline AcyclicityReport ram_acyclicity(const CompleteChoiceRule& p) {
  const int n = p.items();
  AcyclicityReport rep;
  std::vector<std::vector<std::optional<Mask>>> direct(
      n, std::vector<std::optional<Mask>>(n));

  for (Mask A = 1; A <= p.full_mask(); ++A) {
    if (popcount(A) < 2) continue;
    for (int a = 0; a < n; ++a) {
      if (!(A >> a & 1u)) continue;
      for (int b = 0; b < n; ++b) {
        if (b == a || !(A >> b & 1u)) continue;
        if (p.p(a, A) > p.p(a, A & ~(Mask{1} << b)) && !direct[a][b])
          direct[a][b] = A;
      }
    }
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (direct[a][b]) rep.edges.push_back({a, b, *direct[a][b]});

  // Floyd-Warshall reachability with path reconstruction over direct edges.
  std::vector<std::vector<int>> next(n, std::vector<int>(n, -1));
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (direct[a][b]) { reach[a][b] = true; next[a][b] = b; }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j] && !reach[i][j]) {
          reach[i][j] = true;
          next[i][j] = next[i][k];
        }

  for (int a = 0; a < n && rep.acyclic; ++a)
    for (int b = 0; b < n && rep.acyclic; ++b)
      if (a != b && reach[a][b] && reach[b][a]) {
        rep.acyclic = false;
        auto walk = [&](int from, int to) {
          for (int cur = from; cur != to;) {
            const int nx = next[cur][to];
            rep.cycle.push_back({cur, nx, *direct[cur][nx]});
            cur = nx;
          }
        };
        walk(a, b);
        walk(b, a);
      }
  return rep;
}

}  // namespace choicelab
