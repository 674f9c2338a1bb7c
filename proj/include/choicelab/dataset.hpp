#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "choicelab/common.hpp"
#include "choicelab/rng.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// One choice observation. `choice` is an item index, or kDefaultChoice for
// the outside option. The menu always offers the default implicitly.
struct Observation {
  static constexpr int kDefaultChoice = -1;
  std::string subject_id;
  std::string treatment;
  Menu menu;
  int choice = kDefaultChoice;
};

// A complete stochastic choice rule: for every menu, probabilities over the
// menu's items plus the default. p(a,A) = 0 for a outside A; p(o,empty) = 1.
class CompleteChoiceRule {
 public:
  explicit CompleteChoiceRule(const ChoiceUniverse& u)
      : n_(u.size()), p_(Eigen::VectorXd::Zero(table_size(u.size()))) {}

  int items() const { return n_; }
  Mask full_mask() const { return (Mask{1} << n_) - 1; }

  double p(int item, Mask menu) const { return p_[cell(item, menu)]; }
  double p_default(Mask menu) const {
    if (menu == 0) return 1.0;
    return p_[cell_default(menu)];
  }
  void set_p(int item, Mask menu, double v) { p_[cell(item, menu)] = v; }
  void set_p_default(Mask menu, double v) { p_[cell_default(menu)] = v; }

  // Max |sum over A u {o} - 1| across menus.
  double simplex_defect() const {
    double worst = 0;
    for (Mask A = 1; A <= full_mask(); ++A) {
      double s = p_default(A);
      for (int a = 0; a < n_; ++a)
        if (A >> a & 1u) s += p(a, A);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  void validate(double tol = 1e-12) const {
    if (simplex_defect() > tol) throw Error("per-menu probabilities do not sum to 1");
  }

 private:
  static long table_size(int n) {
    // per menu: n item slots (dense) + 1 default slot
    return (static_cast<long>(n) + 1) * ((1L << n) - 1);
  }
  long cell(int item, Mask menu) const {
    if (menu == 0 || !(menu >> item & 1u)) throw Error("p(a,A) with a outside A");
    return (static_cast<long>(menu) - 1) * (n_ + 1) + item;
  }
  long cell_default(Mask menu) const {
    return (static_cast<long>(menu) - 1) * (n_ + 1) + n_;
  }

  int n_;
  Eigen::VectorXd p_;
};

// Empirical counterpart: per-menu counts plus the frequencies they imply.
// Frequencies are exact count ratios; the optional Laplace floor is applied
// only when explicitly requested (downstream calibration decides).
class EmpiricalChoiceRule {
 public:
  EmpiricalChoiceRule(const ChoiceUniverse& u, std::string treatment = "")
      : n_(u.size()),
        treatment_(std::move(treatment)),
        counts_((static_cast<long>(n_) + 1) * ((1L << n_) - 1), 0),
        menu_totals_((1L << n_), 0) {}

  int items() const { return n_; }
  Mask full_mask() const { return (Mask{1} << n_) - 1; }
  const std::string& treatment() const { return treatment_; }

  void add(Mask menu, int choice, long count = 1) {
    if (menu == 0) throw Error("observation with empty menu");
    if (choice != Observation::kDefaultChoice && !(menu >> choice & 1u))
      throw Error("choice outside menu");
    counts_[cell(menu, choice)] += count;
    menu_totals_[menu] += count;
  }

  long menu_total(Mask menu) const { return menu_totals_[menu]; }
  long total() const {
    long t = 0;
    for (Mask A = 1; A <= full_mask(); ++A) t += menu_totals_[A];
    return t;
  }
  long min_menu_total() const {
    long m = 0;
    for (Mask A = 1; A <= full_mask(); ++A)
      m = (m == 0) ? menu_totals_[A] : std::min(m, menu_totals_[A]);
    return m;
  }
  long count(Mask menu, int choice) const { return counts_[cell(menu, choice)]; }

  std::vector<Mask> missing_menus() const {
    std::vector<Mask> out;
    for (Mask A = 1; A <= full_mask(); ++A)
      if (menu_totals_[A] == 0) out.push_back(A);
    return out;
  }

  // Exact frequencies. With laplace_kappa > 0, cells become
  // (count + kappa) / (n_A + kappa * (|A|+1)).
  CompleteChoiceRule frequencies(const ChoiceUniverse& u,
                                 double laplace_kappa = 0.0) const {
    auto missing = missing_menus();
    if (!missing.empty()) {
      std::string msg = "incomplete coverage; missing menus:";
      for (Mask m : missing) msg += " " + std::to_string(m);
      throw Error(msg);
    }
    CompleteChoiceRule r(u);
    for (Mask A = 1; A <= full_mask(); ++A) {
      const int k = popcount(A);
      const double denom = static_cast<double>(menu_totals_[A]) + laplace_kappa * (k + 1);
      for (int a = 0; a < n_; ++a)
        if (A >> a & 1u)
          r.set_p(a, A, (count(A, a) + laplace_kappa) / denom);
      r.set_p_default(A, (count(A, Observation::kDefaultChoice) + laplace_kappa) / denom);
    }
    return r;
  }

  // Stratified multinomial resample: per menu, n_A i.i.d. draws from the
  // empirical cell frequencies. Menu counts are preserved exactly.
  EmpiricalChoiceRule resample(const ChoiceUniverse& u, Rng& rng) const {
    EmpiricalChoiceRule out(u, treatment_);
    std::vector<double> probs;
    std::vector<int> labels;
    for (Mask A = 1; A <= full_mask(); ++A) {
      const long nA = menu_totals_[A];
      if (nA == 0) continue;
      probs.clear();
      labels.clear();
      for (int a = 0; a < n_; ++a)
        if (A >> a & 1u) {
          probs.push_back(static_cast<double>(count(A, a)));
          labels.push_back(a);
        }
      probs.push_back(static_cast<double>(count(A, Observation::kDefaultChoice)));
      labels.push_back(Observation::kDefaultChoice);
      for (long i = 0; i < nA; ++i)
        out.add(A, labels[rng.next_categorical(probs)]);
    }
    return out;
  }

  // Pools counts cell-by-cell (menus keep their own strata).
  void absorb(const EmpiricalChoiceRule& other) {
    if (other.n_ != n_) throw Error("universe mismatch in pooling");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    for (std::size_t i = 0; i < menu_totals_.size(); ++i)
      menu_totals_[i] += other.menu_totals_[i];
  }

 private:
  long cell(Mask menu, int choice) const {
    const int slot = choice == Observation::kDefaultChoice ? n_ : choice;
    return (static_cast<long>(menu) - 1) * (n_ + 1) + slot;
  }

  int n_;
  std::string treatment_;
  std::vector<long> counts_;
  std::vector<long> menu_totals_;
};

// CSV contract: header `subject_id,treatment,menu,choice`; menu is
// `|`-separated 1-based item indices; choice is a 1-based item index or 0 for
// the default. Malformed rows are reported with their line numbers.
inline std::vector<Observation> load_observations(std::istream& in,
                                                  const ChoiceUniverse& u) {
  std::vector<Observation> out;
  std::string line;
  long lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.find("subject_id") != std::string::npos) continue;
      // headerless files are accepted; fall through and parse the row
    }
    std::stringstream ss(line);
    std::string subject, treatment, menu_str, choice_str;
    if (!std::getline(ss, subject, ',') || !std::getline(ss, treatment, ',') ||
        !std::getline(ss, menu_str, ',') || !std::getline(ss, choice_str))
      throw Error("line " + std::to_string(lineno) + ": expected 4 fields");

    Observation obs;
    obs.subject_id = subject;
    obs.treatment = treatment;
    std::stringstream ms(menu_str);
    std::string tok;
    while (std::getline(ms, tok, '|')) {
      long v;
      try {
        v = std::stol(tok);
      } catch (...) {
        throw Error("line " + std::to_string(lineno) + ": bad menu token '" + tok + "'");
      }
      if (v < 1 || v > u.size())
        throw Error("line " + std::to_string(lineno) + ": menu index out of range");
      obs.menu.mask |= Mask{1} << (v - 1);
    }
    if (obs.menu.mask == 0)
      throw Error("line " + std::to_string(lineno) + ": empty menu");
    long c;
    try {
      c = std::stol(choice_str);
    } catch (...) {
      throw Error("line " + std::to_string(lineno) + ": bad choice token '" +
                  choice_str + "'");
    }
    if (c == 0) {
      obs.choice = Observation::kDefaultChoice;
    } else if (c >= 1 && c <= u.size() && obs.menu.contains(static_cast<int>(c - 1))) {
      obs.choice = static_cast<int>(c - 1);
    } else {
      throw Error("line " + std::to_string(lineno) + ": choice outside menu");
    }
    out.push_back(std::move(obs));
  }
  return out;
}

inline std::vector<Observation> load_observations(const std::string& path,
                                                  const ChoiceUniverse& u) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open '" + path + "'");
  return load_observations(f, u);
}

// Builds the empirical rule for one treatment label ("" or "pooled" = all).
inline EmpiricalChoiceRule empirical_rule(const std::vector<Observation>& obs,
                                          const ChoiceUniverse& u,
                                          const std::string& treatment = "") {
  const bool pooled = treatment.empty() || treatment == "pooled";
  EmpiricalChoiceRule r(u, pooled ? "pooled" : treatment);
  for (const auto& o : obs)
    if (pooled || o.treatment == treatment) r.add(o.menu.mask, o.choice);
  auto missing = r.missing_menus();
  if (!missing.empty()) {
    std::string msg = "incomplete coverage for treatment '" + treatment +
                      "'; missing menus:";
    for (Mask m : missing) msg += " " + std::to_string(m);
    throw Error(msg);
  }
  return r;
}

inline std::vector<std::string> treatment_labels(const std::vector<Observation>& obs) {
  std::vector<std::string> out;
  for (const auto& o : obs)
    if (std::find(out.begin(), out.end(), o.treatment) == out.end())
      out.push_back(o.treatment);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace choicelab
