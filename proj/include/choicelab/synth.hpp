#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "choicelab/dataset.hpp"
#include "choicelab/diagnostics.hpp"
#include "choicelab/hypothesis.hpp"
#include "choicelab/linkfn.hpp"
#include "choicelab/lottery.hpp"
#include "choicelab/orders.hpp"
#include "choicelab/rng.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// ---------- population rules ----------

// Random-utility rule over the extended alternative set: orders rank the
// default alongside the items.
inline CompleteChoiceRule rum_rule(const PreferenceOrderSet& orders,
                                   const Eigen::VectorXd& pi,
                                   const ChoiceUniverse& u) {
  if (!orders.includes_default) throw Error("RUM rule needs orders over items + default");
  if (pi.size() != orders.count()) throw Error("pi size mismatch");
  CompleteChoiceRule p(u);
  for (Mask A = 1; A <= u.full_mask(); ++A)
    for (int l = 0; l < orders.count(); ++l) {
      const int best = orders.orders[l].top_of(A, u.size(), true);
      if (best == u.size()) p.set_p_default(A, p.p_default(A) + pi[l]);
      else p.set_p(best, A, p.p(best, A) + pi[l]);
    }
  return p;
}

// Attention index from a set-attractiveness function under entropy cost:
// eta proportional to exp(theta * alpha), normalized over 2^X.
inline AttentionIndex entropy_la_index(const Eigen::VectorXd& alpha, double theta) {
  AttentionIndex idx;
  idx.eta = (theta * alpha.array()).exp();
  idx.eta /= idx.eta.sum();
  return idx;
}

// Size-driven opt-out rule: p(o,A) = (|A|+1)/(n+1), remainder uniform on A.
inline CompleteChoiceRule overload_rule(const ChoiceUniverse& u) {
  CompleteChoiceRule p(u);
  const double denom = u.size() + 1;
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    const int k = popcount(A);
    const double po = (k + 1) / denom;
    p.set_p_default(A, po);
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u) p.set_p(a, A, (1.0 - po) / k);
  }
  return p;
}

inline CompleteChoiceRule blend(const CompleteChoiceRule& x,
                                const CompleteChoiceRule& y, double lambda,
                                const ChoiceUniverse& u) {
  if (lambda < 0 || lambda > 1) throw Error("lambda must be in [0,1]");
  CompleteChoiceRule p(u);
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    p.set_p_default(A, lambda * x.p_default(A) + (1 - lambda) * y.p_default(A));
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u)
        p.set_p(a, A, lambda * x.p(a, A) + (1 - lambda) * y.p(a, A));
  }
  return p;
}

// The power-study process: a lambda fraction follows an independent-item
// consideration rule (gamma = 1/2) mixed over the EU-consistent preference
// orders of the book, the rest follows the size-driven opt-out rule.
inline CompleteChoiceRule overload_mixture_rule(double lambda,
                                                const PreferenceOrderSet& eu_orders,
                                                const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  MMGamma g;
  g.gamma = Eigen::VectorXd::Constant(u.size(), 0.5);
  const ConsiderationRule m = forward_m_mm(g, ix);
  const Eigen::VectorXd pi =
      Eigen::VectorXd::Constant(eu_orders.count(), 1.0 / eu_orders.count());
  return blend(mixture_rule(m, eu_orders, pi, u), overload_rule(u), lambda, u);
}

// ---------- sampling ----------

// Mirrors the experiment's stratification: n_A proportional to |A|+1 with a
// largest-remainder rounding to the exact total, every menu at least once.
inline std::vector<long> stratified_sizes(const ChoiceUniverse& u, long total) {
  const int menus = u.menu_count();
  std::vector<double> weight(menus);
  double wsum = 0;
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    weight[A - 1] = popcount(A) + 1;
    wsum += weight[A - 1];
  }
  std::vector<long> out(menus);
  std::vector<std::pair<double, int>> rem(menus);
  long assigned = 0;
  for (int i = 0; i < menus; ++i) {
    const double raw = total * weight[i] / wsum;
    out[i] = static_cast<long>(raw);
    rem[i] = {raw - out[i], i};
    assigned += out[i];
  }
  std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (long k = 0; k < total - assigned; ++k) ++out[rem[k % menus].second];
  for (auto& v : out) v = std::max<long>(v, 1);
  return out;
}

// I.i.d. multinomial draws per menu from an exact rule.
inline EmpiricalChoiceRule sample_dataset(const CompleteChoiceRule& rule,
                                          const std::vector<long>& sizes,
                                          const ChoiceUniverse& u, Rng& rng,
                                          const std::string& treatment = "synthetic") {
  if (static_cast<int>(sizes.size()) != u.menu_count())
    throw Error("sizes must cover every menu");
  EmpiricalChoiceRule data(u, treatment);
  std::vector<double> probs;
  std::vector<int> labels;
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    probs.clear();
    labels.clear();
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u) {
        probs.push_back(rule.p(a, A));
        labels.push_back(a);
      }
    probs.push_back(rule.p_default(A));
    labels.push_back(Observation::kDefaultChoice);
    for (long i = 0; i < sizes[A - 1]; ++i)
      data.add(A, labels[rng.next_categorical(probs)]);
  }
  return data;
}

inline std::vector<Observation> to_observations(const EmpiricalChoiceRule& data,
                                                const ChoiceUniverse& u) {
  std::vector<Observation> obs;
  long subject = 0;
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    auto push = [&](int choice, long count) {
      for (long i = 0; i < count; ++i)
        obs.push_back(Observation{"s" + std::to_string(++subject),
                                  data.treatment(), Menu{A}, choice});
    };
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u) push(a, data.count(A, a));
    push(Observation::kDefaultChoice, data.count(A, Observation::kDefaultChoice));
  }
  return obs;
}

// Draws `count` distinct preference orders uniformly (without replacement).
inline PreferenceOrderSet random_orders(const ChoiceUniverse& u, bool include_default,
                                        int count, Rng& rng) {
  const int k = u.size() + (include_default ? 1 : 0);
  PreferenceOrderSet set;
  set.includes_default = include_default;
  std::set<std::vector<int>> seen;
  while (static_cast<int>(seen.size()) < count) {
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = k - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.next_below(i + 1)]);
    if (seen.insert(perm).second) set.orders.push_back(PreferenceOrder{perm});
  }
  return set;
}

// ---------- sweeps ----------

struct CoCell {
  long sample_size = 0;
  int order_count = 0;
  int repetitions = 0;
  double proportion = 0.0;            // share of repetitions with any violation
  double total_magnitude = 0.0;       // mean over repetitions of the summed magnitudes
  double avg_marginal_magnitude = 0.0;  // total magnitude per comparison
};

// Finite-sample overload incidence for utility-maximizing populations of a
// given heterogeneity, at the experiment's stratified sample sizes. Results
// are appended to `path` one row per cell, and cells already present in the
// file are skipped, so interrupted sweeps resume.
inline std::vector<CoCell> co_sweep(const ChoiceUniverse& u,
                                    const std::vector<long>& n_grid,
                                    const std::vector<int>& order_grid,
                                    int repetitions, std::uint64_t seed,
                                    const std::string& path = "") {
  std::set<std::pair<long, int>> done;
  if (!path.empty()) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      long N;
      int K;
      if (std::sscanf(line.c_str(), "%ld,%d", &N, &K) == 2) done.insert({N, K});
    }
  }
  std::ofstream out;
  if (!path.empty()) {
    const bool fresh = done.empty();
    out.open(path, std::ios::app);
    if (fresh)
      out << "sample_size,order_count,proportion,total_magnitude,"
             "avg_marginal_magnitude,repetitions\n";
  }

  std::vector<CoCell> cells;
  long cell_index = 0;
  for (long N : n_grid)
    for (int K : order_grid) {
      ++cell_index;
      if (done.count({N, K})) continue;
      const auto sizes = stratified_sizes(u, N);
      long any = 0;
      double total = 0;
      long comparisons = 0;
      for (int r = 0; r < repetitions; ++r) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(cell_index),
                            static_cast<std::uint64_t>(r)));
        const PreferenceOrderSet orders = random_orders(u, true, K, rng);
        const Eigen::VectorXd pi = Eigen::VectorXd::Constant(K, 1.0 / K);
        const CompleteChoiceRule pop = rum_rule(orders, pi, u);
        const EmpiricalChoiceRule data = sample_dataset(pop, sizes, u, rng);
        const DeviationSummary s = choice_overload_scan(data.frequencies(u));
        if (s.violations > 0) ++any;
        total += s.mean_magnitude * s.violations;
        comparisons = s.comparisons;
      }
      CoCell cell;
      cell.sample_size = N;
      cell.order_count = K;
      cell.repetitions = repetitions;
      cell.proportion = static_cast<double>(any) / repetitions;
      cell.total_magnitude = total / repetitions;
      cell.avg_marginal_magnitude = cell.total_magnitude / comparisons;
      cells.push_back(cell);
      if (out)
        out << cell.sample_size << ',' << cell.order_count << ','
            << cell.proportion << ',' << cell.total_magnitude << ','
            << cell.avg_marginal_magnitude << ',' << repetitions << "\n"
            << std::flush;
    }
  return cells;
}

struct PowerRow {
  double lambda = 0.0;
  int dataset = 0;
  double p_value = 1.0;
  double statistic = 0.0;
  int failed_replications = 0;
};

struct PowerCell {
  double lambda = 0.0;
  int datasets = 0;
  double reject_90 = 0.0;
  double reject_95 = 0.0;
};

// Rejection-rate study against the overload mixture, one row per Monte Carlo
// dataset (appended incrementally; finished rows are skipped on resume).
inline std::vector<PowerRow> power_sweep(const std::vector<double>& lambdas,
                                         long sample_size, int datasets,
                                         const TestContext& ctx,
                                         const PreferenceOrderSet& eu_orders,
                                         TestSpec spec,
                                         const std::string& path = "") {
  const ChoiceUniverse& u = *ctx.universe;
  std::set<std::pair<long, int>> done;  // (lambda * 1e6, dataset)
  auto key_of = [](double lam, int d) {
    return std::make_pair(std::lround(lam * 1e6), d);
  };
  if (!path.empty()) {
    std::ifstream in(path);
    std::string line;
    double lam;
    int d;
    while (std::getline(in, line))
      if (std::sscanf(line.c_str(), "%lf,%d", &lam, &d) == 2)
        done.insert(key_of(lam, d));
  }
  std::ofstream out;
  if (!path.empty()) {
    const bool fresh = done.empty();
    out.open(path, std::ios::app);
    if (fresh) out << "lambda,dataset,p_value,statistic,failed_replications\n";
  }

  std::vector<PowerRow> rows;
  const std::uint64_t root = spec.seed;
  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double lam = lambdas[li];
    const CompleteChoiceRule pop = overload_mixture_rule(lam, eu_orders, u);
    const auto sizes = stratified_sizes(u, sample_size);
    for (int d = 0; d < datasets; ++d) {
      if (done.count(key_of(lam, d))) continue;
      Rng rng(Rng::derive(root, 7000 + li, static_cast<std::uint64_t>(d)));
      const EmpiricalChoiceRule data = sample_dataset(pop, sizes, u, rng);
      spec.seed = Rng::derive(root, 8000 + li, static_cast<std::uint64_t>(d));
      const TestReport rep = bootstrap_pvalue(data, ctx, spec);
      PowerRow row{lam, d, rep.p_value, rep.statistic, rep.failed_replications};
      rows.push_back(row);
      if (out)
        out << row.lambda << ',' << row.dataset << ',' << row.p_value << ','
            << row.statistic << ',' << row.failed_replications << "\n"
            << std::flush;
    }
  }
  return rows;
}

inline std::vector<PowerCell> summarize_power(const std::vector<PowerRow>& rows) {
  std::vector<PowerCell> cells;
  for (const auto& r : rows) {
    PowerCell* c = nullptr;
    for (auto& x : cells)
      if (x.lambda == r.lambda) c = &x;
    if (!c) {
      cells.push_back(PowerCell{r.lambda, 0, 0, 0});
      c = &cells.back();
    }
    ++c->datasets;
    if (r.p_value < 0.10) c->reject_90 += 1;
    if (r.p_value < 0.05) c->reject_95 += 1;
  }
  for (auto& c : cells) {
    if (c.datasets) {
      c.reject_90 /= c.datasets;
      c.reject_95 /= c.datasets;
    }
  }
  return cells;
}

}  // namespace choicelab
