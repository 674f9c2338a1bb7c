#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "choicelab/dataset.hpp"
#include "choicelab/diagnostics.hpp"
#include "choicelab/estimation.hpp"
#include "choicelab/hypothesis.hpp"
#include "choicelab/linkfn.hpp"
#include "choicelab/orders.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

using json = nlohmann::json;

inline json menu_json(Mask A, const ChoiceUniverse& u) {
  json arr = json::array();
  for (int a = 0; a < u.size(); ++a)
    if (A >> a & 1u) arr.push_back(a + 1);
  return arr;
}

inline json universe_json(const ChoiceUniverse& u) {
  return json{{"items", u.items()}, {"default", u.default_label()}};
}

inline json empirical_rule_json(const EmpiricalChoiceRule& r, const ChoiceUniverse& u) {
  json cells = json::array();
  for (Mask A = 1; A <= u.full_mask(); ++A) {
    const long nA = r.menu_total(A);
    if (nA == 0) continue;
    json freqs = json::object();
    for (int a = 0; a < u.size(); ++a)
      if (A >> a & 1u)
        freqs[u.item_label(a)] =
            static_cast<double>(r.count(A, a)) / static_cast<double>(nA);
    freqs[u.default_label()] =
        static_cast<double>(r.count(A, Observation::kDefaultChoice)) /
        static_cast<double>(nA);
    cells.push_back({{"menu", menu_json(A, u)}, {"n", nA}, {"freqs", freqs}});
  }
  return json{{"universe", universe_json(u)},
              {"treatment", r.treatment()},
              {"cells", cells}};
}

inline json order_json(const PreferenceOrder& o, const ChoiceUniverse& u) {
  json arr = json::array();
  for (int alt : o.ranking)
    arr.push_back(alt == u.size() ? u.default_label() : u.item_label(alt));
  return arr;
}

inline json order_set_json(const PreferenceOrderSet& s, const ChoiceUniverse& u) {
  json orders = json::array();
  for (int i = 0; i < s.count(); ++i) {
    json o{{"ranking", order_json(s.orders[i], u)}};
    if (!s.brackets.empty())
      o["sigma_bracket"] = {s.brackets[i].lo, s.brackets[i].hi};
    orders.push_back(o);
  }
  const char* restriction = s.restriction == Restriction::All  ? "all"
                            : s.restriction == Restriction::Eu ? "eu"
                                                               : "crra";
  return json{{"restriction", restriction},
              {"includes_default", s.includes_default},
              {"count", s.count()},
              {"orders", orders}};
}

// Sparse exports: only nonzero coordinates, keyed by the member lists.
inline json attention_index_json(const AttentionIndex& idx, const ChoiceUniverse& u) {
  json entries = json::array();
  for (Mask D = 0; D < (Mask{1} << u.size()); ++D)
    if (idx.eta[D] != 0.0)
      entries.push_back({{"set", menu_json(D, u)}, {"eta", idx.eta[D]}});
  return entries;
}

inline json consideration_rule_json(const ConsiderationRule& m,
                                    const ChoiceUniverse& u) {
  const SubsetIndexer ix(u);
  json entries = json::array();
  for (Mask A = 0; A <= u.full_mask(); ++A)
    for (Mask D = 0;; D = next_subset(D, A)) {
      const double v = m.m[ix.consideration_coord(A, D)];
      if (v != 0.0)
        entries.push_back(
            {{"menu", menu_json(A, u)}, {"set", menu_json(D, u)}, {"m", v}});
      if (D == A) break;
    }
  return json{{"link", link_name(m.link)}, {"entries", entries}};
}

inline json calibration_json(const Calibration& cal, const WellDefinedReport& wd,
                             const ChoiceUniverse& u) {
  json j{{"link", link_name(cal.link)},
         {"eta", attention_index_json(cal.index, u)},
         {"m", consideration_rule_json(cal.rule, u)},
         {"well_defined", wd.ok}};
  if (cal.gamma) {
    json g = json::object();
    for (int a = 0; a < u.size(); ++a) g[u.item_label(a)] = cal.gamma->gamma[a];
    j["gamma"] = g;
  }
  json viols = json::array();
  for (const auto& v : wd.violations)
    viols.push_back({{"menu", menu_json(v.menu, u)},
                     {"set", menu_json(v.subset, u)},
                     {"value", v.value}});
  j["violations"] = viols;
  return j;
}

inline json test_report_json(const TestReport& r) {
  return json{{"model", r.model_name},
              {"statistic", r.statistic},
              {"p_value", r.p_value},
              {"tau", r.tau},
              {"n", r.n},
              {"min_menu_n", r.min_menu_n},
              {"bootstrap_stats", r.bootstrap_stats},
              {"zero_weight_coordinates", r.zero_weight_coordinates},
              {"failed_replications", r.failed_replications},
              {"unreliable", r.unreliable},
              {"well_defined", r.well_defined_ok},
              {"well_defined_violations", r.well_defined_violations},
              {"worst_violation", r.worst_violation},
              {"solver_iterations", r.solver_iterations},
              {"kkt_interior", r.kkt_interior},
              {"kkt_bound", r.kkt_bound}};
}

inline json deviation_summary_json(const DeviationSummary& s, const ChoiceUniverse& u,
                                   bool include_records = true) {
  json j{{"comparisons", s.comparisons},
         {"violations", s.violations},
         {"proportion", s.proportion()},
         {"mean_magnitude", s.mean_magnitude},
         {"sd_magnitude", s.sd_magnitude}};
  if (include_records) {
    json recs = json::array();
    for (const auto& r : s.records) {
      json rec{{"menu", menu_json(r.menu, u)},
               {"item", u.item_label(r.item)},
               {"magnitude", r.magnitude}};
      if (r.decoy >= 0) rec["decoy"] = u.item_label(r.decoy);
      recs.push_back(rec);
    }
    j["records"] = recs;
  }
  return j;
}

inline json acyclicity_json(const AcyclicityReport& r, const ChoiceUniverse& u) {
  auto edge_json = [&](const RevealedPreferenceEdge& e) {
    return json{{"from", u.item_label(e.from)},
                {"to", u.item_label(e.to)},
                {"witness_menu", menu_json(e.witness_menu, u)}};
  };
  json edges = json::array();
  for (const auto& e : r.edges) edges.push_back(edge_json(e));
  json cycle = json::array();
  for (const auto& e : r.cycle) cycle.push_back(edge_json(e));
  return json{{"acyclic", r.acyclic}, {"edges", edges}, {"cycle", cycle}};
}

inline json sigma_masses_json(const std::vector<SigmaMass>& masses) {
  json arr = json::array();
  for (const auto& m : masses)
    arr.push_back({{"sigma_lo", m.bracket.lo},
                   {"sigma_hi", m.bracket.hi},
                   {"mass", m.mass}});
  return arr;
}

}  // namespace choicelab
