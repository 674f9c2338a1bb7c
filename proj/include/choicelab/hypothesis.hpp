#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "choicelab/dataset.hpp"
#include "choicelab/linkfn.hpp"
#include "choicelab/orders.hpp"
#include "choicelab/qp.hpp"
#include "choicelab/rng.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// Model under test: either random utility over the extended item set (the
// default treated as a regular alternative), or a consideration model with a
// given link function.
struct TestModel {
  bool rum = false;
  LinkFn link = LinkFn::LA;
};

enum class TauRule { Ks, Zero, Fixed };

struct TestSpec {
  TestModel model;
  TauRule tau_rule = TauRule::Ks;
  double tau_fixed = 0.0;
  int reps = 500;           // bootstrap replications
  int var_reps = 200;       // preliminary replications for the variance
  int var_reps_star = 50;   // per-replication variance replications
  std::uint64_t seed = 0;
  double laplace = 0.0;     // optional frequency floor, off by default
  int threads = 0;          // 0 = hardware concurrency
};

struct TestReport {
  std::string model_name;
  double statistic = 0.0;
  std::vector<double> bootstrap_stats;  // by replication index; NaN = dropped
  double p_value = 1.0;
  double tau = 0.0;
  long n = 0;
  long min_menu_n = 0;
  int zero_weight_coordinates = 0;
  int failed_replications = 0;
  bool unreliable = false;  // >5% of replications failed calibration
  bool well_defined_ok = true;
  int well_defined_violations = 0;
  double worst_violation = 0.0;
  int solver_iterations = 0;
  double kkt_interior = 0.0;
  double kkt_bound = 0.0;
};

// Precomputed geometry shared by a statistic and its bootstrap replications.
struct TestContext {
  const ChoiceUniverse* universe = nullptr;
  SubsetIndexer ix;
  TestModel model;
  PreferenceOrderSet orders;
  Eigen::MatrixXd G;
  long d_p = 0;  // choice block length
  long d_m = 0;  // consideration block length (0 for RUM)

  TestContext(const ChoiceUniverse& u, TestModel m, PreferenceOrderSet ord)
      : universe(&u), ix(u), model(m), orders(std::move(ord)) {
    if (model.rum != orders.includes_default)
      throw Error("order set and model disagree about the default");
    const Eigen::MatrixXd B = build_B(orders, u);
    if (model.rum) {
      d_p = ix.choice_dim(true);
      d_m = 0;
      G = B;
    } else {
      d_p = ix.choice_dim(false);
      d_m = ix.consideration_dim();
      G = build_G(B, d_m).G;
    }
  }
};

// Stacks the tested vector: for RUM the raw frequencies over items plus the
// default; for a link model the calibrated full-consideration block followed
// by the calibrated consideration block. Throws when calibration fails.
inline Eigen::VectorXd assemble_g(const CompleteChoiceRule& p,
                                  const TestContext& ctx) {
  const SubsetIndexer& ix = ctx.ix;
  if (ctx.model.rum) {
    Eigen::VectorXd g(ix.choice_dim(true));
    for (Mask A = 1; A <= ix.full_mask(); ++A) {
      for (int a = 0; a < ix.items(); ++a)
        if (A >> a & 1u) g[ix.choice_coord_def(a, A)] = p.p(a, A);
      g[ix.default_coord(A)] = p.p_default(A);
    }
    return g;
  }
  Calibration cal = calibrate(p, ctx.model.link, ix);
  Eigen::VectorXd g(ctx.d_p + ctx.d_m);
  g.head(ctx.d_p) = calibrate_full_consideration(p, cal.rule, ix);
  g.tail(ctx.d_m) = cal.rule.m;
  return g;
}

inline double tau_value(const TestSpec& spec, long min_menu_n) {
  switch (spec.tau_rule) {
    case TauRule::Zero: return 0.0;
    case TauRule::Fixed: return spec.tau_fixed;
    case TauRule::Ks:
      return std::sqrt(std::log(static_cast<double>(min_menu_n)) /
                       static_cast<double>(min_menu_n));
  }
  return 0.0;
}

// Diagonal of the estimated asymptotic covariance of g: n times the sample
// variance of each coordinate over stratified resamples. Replications whose
// calibration fails are dropped.
inline Eigen::VectorXd estimate_omega(const EmpiricalChoiceRule& data,
                                      const TestContext& ctx, int reps,
                                      std::uint64_t seed_tag, std::uint64_t seed,
                                      double laplace, int* failures = nullptr) {
  const long dim = ctx.d_p + ctx.d_m;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
  long good = 0;
  int fail = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng(Rng::derive(seed, seed_tag, static_cast<std::uint64_t>(r)));
    try {
      const auto star = data.resample(*ctx.universe, rng);
      const Eigen::VectorXd g = assemble_g(star.frequencies(*ctx.universe, laplace), ctx);
      ++good;
      const Eigen::VectorXd delta = g - mean;
      mean += delta / static_cast<double>(good);
      m2 += delta.cwiseProduct(g - mean);
    } catch (const Error&) {
      ++fail;
    }
  }
  if (failures) *failures = fail;
  if (good < 2) throw Error("variance estimation failed: too few valid replications");
  const double n = static_cast<double>(data.total());
  return (n / static_cast<double>(good - 1)) * m2;
}

inline Eigen::VectorXd weights_from_omega(const Eigen::VectorXd& omega,
                                          int* zero_count = nullptr) {
  Eigen::VectorXd w(omega.size());
  int zeros = 0;
  for (long i = 0; i < omega.size(); ++i) {
    if (omega[i] > 1e-12) {
      w[i] = 1.0 / omega[i];
    } else {
      w[i] = 0.0;
      ++zeros;
    }
  }
  if (zero_count) *zero_count = zeros;
  return w;
}

struct Statistic {
  double value = 0.0;
  ConeSolution solution;
};

// T = n * min over the tightened cone of the weighted squared distance.
inline Statistic test_statistic(const Eigen::VectorXd& g, const TestContext& ctx,
                                const Eigen::VectorXd& weights, double tau, long n) {
  ConeProblem prob;
  prob.g = g;
  prob.G = ctx.G;
  prob.weights = weights;
  prob.lower_bound = tau / static_cast<double>(ctx.G.cols());
  Statistic s;
  s.solution = solve_cone(prob);
  s.value = static_cast<double>(n) * s.solution.objective;
  return s;
}

namespace detail {

inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

// The recentered bootstrap test. Steps per replication: stratified resample,
// reassemble, re-estimate the variance on the resampled data, recenter by
// subtracting the original vector and adding its tightened cone fit, then
// recompute the statistic. The p-value uses the add-one convention.
inline TestReport bootstrap_pvalue(const EmpiricalChoiceRule& data,
                                   const TestContext& ctx, const TestSpec& spec) {
  TestReport rep;
  rep.model_name = ctx.model.rum ? "rum" : link_name(ctx.model.link);
  rep.n = data.total();
  rep.min_menu_n = data.min_menu_total();
  rep.tau = tau_value(spec, rep.min_menu_n);

  const CompleteChoiceRule freq = data.frequencies(*ctx.universe, spec.laplace);
  const Eigen::VectorXd g = assemble_g(freq, ctx);

  if (!ctx.model.rum) {
    const Calibration cal = calibrate(freq, ctx.model.link, ctx.ix);
    const WellDefinedReport wd = well_defined(cal, ctx.ix);
    rep.well_defined_ok = wd.ok;
    rep.well_defined_violations = static_cast<int>(wd.violations.size());
    for (const auto& v : wd.violations)
      rep.worst_violation = std::max(rep.worst_violation, std::abs(v.value));
  }

  const Eigen::VectorXd omega =
      estimate_omega(data, ctx, spec.var_reps, 1, spec.seed, spec.laplace);
  const Eigen::VectorXd w = weights_from_omega(omega, &rep.zero_weight_coordinates);

  const Statistic stat = test_statistic(g, ctx, w, rep.tau, rep.n);
  rep.statistic = stat.value;
  rep.solver_iterations = stat.solution.iterations;
  rep.kkt_interior = stat.solution.kkt_interior;
  rep.kkt_bound = stat.solution.kkt_bound;
  const Eigen::VectorXd eta_hat = stat.solution.fitted;

  rep.bootstrap_stats.assign(spec.reps, std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> failures{0};
  detail::parallel_for(spec.reps, spec.threads, [&](int l) {
    Rng rng(Rng::derive(spec.seed, 2, static_cast<std::uint64_t>(l)));
    try {
      const auto star = data.resample(*ctx.universe, rng);
      const Eigen::VectorXd g_star =
          assemble_g(star.frequencies(*ctx.universe, spec.laplace), ctx);
      const Eigen::VectorXd omega_star = estimate_omega(
          star, ctx, spec.var_reps_star, 1000 + static_cast<std::uint64_t>(l),
          spec.seed, spec.laplace);
      const Eigen::VectorXd w_star = weights_from_omega(omega_star);
      const Eigen::VectorXd recentered = g_star - g + eta_hat;
      rep.bootstrap_stats[l] =
          test_statistic(recentered, ctx, w_star, rep.tau, rep.n).value;
    } catch (const Error&) {
      ++failures;
    }
  });
  rep.failed_replications = failures;
  rep.unreliable = failures > spec.reps / 20;

  long ge = 0, valid = 0;
  for (double t : rep.bootstrap_stats)
    if (!std::isnan(t)) {
      ++valid;
      if (t >= rep.statistic) ++ge;
    }
  rep.p_value = static_cast<double>(1 + ge) / static_cast<double>(1 + valid);
  return rep;
}

// Joint preference-stability test across treatments: one shared preference
// weight per order column, one consideration block per treatment.
//   g = (P_block_1, ..., P_block_k, m_1, ..., m_k)
//   G = [[B, 0], ..., [B, 0], [0, I_{k d_m}]]
// For RUM models the m blocks are absent and G is just the stacked B.
inline TestReport joint_stability_test(const std::vector<EmpiricalChoiceRule>& datasets,
                                       const TestContext& ctx, const TestSpec& spec) {
  const int k = static_cast<int>(datasets.size());
  if (k < 2) throw Error("stability test needs at least two treatments");

  const long d_p = ctx.d_p, d_m = ctx.d_m;
  const long pcols = ctx.model.rum ? ctx.G.cols() : ctx.G.cols() - d_m;
  const Eigen::MatrixXd B = ctx.G.topLeftCorner(d_p, pcols);

  Eigen::MatrixXd Gs = Eigen::MatrixXd::Zero(k * (d_p + d_m), pcols + k * d_m);
  for (int t = 0; t < k; ++t) {
    Gs.block(t * d_p, 0, d_p, pcols) = B;
    if (d_m > 0)
      Gs.block(k * d_p + t * d_m, pcols + t * d_m, d_m, d_m).setIdentity();
  }

  auto assemble_all = [&](const std::vector<EmpiricalChoiceRule>& ds) {
    Eigen::VectorXd g(k * (d_p + d_m));
    for (int t = 0; t < k; ++t) {
      const Eigen::VectorXd gt =
          assemble_g(ds[t].frequencies(*ctx.universe, spec.laplace), ctx);
      g.segment(t * d_p, d_p) = gt.head(d_p);
      if (d_m > 0) g.segment(k * d_p + t * d_m, d_m) = gt.tail(d_m);
    }
    return g;
  };
  auto resample_all = [&](const std::vector<EmpiricalChoiceRule>& ds, Rng& rng) {
    std::vector<EmpiricalChoiceRule> out;
    out.reserve(k);
    for (const auto& d : ds) out.push_back(d.resample(*ctx.universe, rng));
    return out;
  };

  TestReport rep;
  rep.model_name = std::string(ctx.model.rum ? "rum" : link_name(ctx.model.link)) +
                   "-stability";
  long min_n = 0;
  for (const auto& d : datasets) {
    rep.n += d.total();
    min_n = min_n == 0 ? d.min_menu_total() : std::min(min_n, d.min_menu_total());
  }
  rep.min_menu_n = min_n;
  rep.tau = tau_value(spec, min_n);

  const Eigen::VectorXd g = assemble_all(datasets);

  auto omega_of = [&](const std::vector<EmpiricalChoiceRule>& ds, int reps,
                      std::uint64_t tag) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(g.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(g.size());
    long good = 0;
    for (int r = 0; r < reps; ++r) {
      Rng rng(Rng::derive(spec.seed, tag, static_cast<std::uint64_t>(r)));
      try {
        const Eigen::VectorXd gs = assemble_all(resample_all(ds, rng));
        ++good;
        const Eigen::VectorXd delta = gs - mean;
        mean += delta / static_cast<double>(good);
        m2 += delta.cwiseProduct(gs - mean);
      } catch (const Error&) {
      }
    }
    if (good < 2) throw Error("variance estimation failed in stability test");
    return Eigen::VectorXd((static_cast<double>(rep.n) / static_cast<double>(good - 1)) * m2);
  };

  const Eigen::VectorXd w =
      weights_from_omega(omega_of(datasets, spec.var_reps, 1), &rep.zero_weight_coordinates);

  ConeProblem prob;
  prob.g = g;
  prob.G = Gs;
  prob.weights = w;
  prob.lower_bound = rep.tau / static_cast<double>(Gs.cols());
  ConeSolution sol = solve_cone(prob);
  rep.statistic = static_cast<double>(rep.n) * sol.objective;
  rep.solver_iterations = sol.iterations;
  rep.kkt_interior = sol.kkt_interior;
  rep.kkt_bound = sol.kkt_bound;
  const Eigen::VectorXd eta_hat = sol.fitted;

  rep.bootstrap_stats.assign(spec.reps, std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> failures{0};
  detail::parallel_for(spec.reps, spec.threads, [&](int l) {
    Rng rng(Rng::derive(spec.seed, 2, static_cast<std::uint64_t>(l)));
    try {
      const auto star = resample_all(datasets, rng);
      const Eigen::VectorXd g_star = assemble_all(star);
      const Eigen::VectorXd w_star = weights_from_omega(
          omega_of(star, spec.var_reps_star, 1000 + static_cast<std::uint64_t>(l)));
      ConeProblem pb = prob;
      pb.g = g_star - g + eta_hat;
      pb.weights = w_star;
      rep.bootstrap_stats[l] = static_cast<double>(rep.n) * solve_cone(pb).objective;
    } catch (const Error&) {
      ++failures;
    }
  });
  rep.failed_replications = failures;
  rep.unreliable = failures > spec.reps / 20;

  long ge = 0, valid = 0;
  for (double t : rep.bootstrap_stats)
    if (!std::isnan(t)) {
      ++valid;
      if (t >= rep.statistic) ++ge;
    }
  rep.p_value = static_cast<double>(1 + ge) / static_cast<double>(1 + valid);
  return rep;
}

// Pools per-menu counts across the given datasets, then runs the plain test.
inline TestReport pooled_test(const std::vector<EmpiricalChoiceRule>& datasets,
                              const TestContext& ctx, const TestSpec& spec) {
  if (datasets.empty()) throw Error("pooled test needs data");
  EmpiricalChoiceRule pooled(*ctx.universe, "pooled");
  for (const auto& d : datasets) pooled.absorb(d);
  TestReport rep = bootstrap_pvalue(pooled, ctx, spec);
  rep.model_name += "-pooled";
  return rep;
}

}  // namespace choicelab
