// Command-line front end: calibration, testing, estimation, diagnostics, and
// simulation runs over stochastic choice CSV data, with JSON/CSV artifacts
// that embed the full run configuration for reproducibility.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>

#include "choicelab/diagnostics.hpp"
#include "choicelab/estimation.hpp"
#include "choicelab/hypothesis.hpp"
#include "choicelab/io.hpp"
#include "choicelab/lottery.hpp"
#include "choicelab/synth.hpp"

namespace cl = choicelab;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
  std::string model = "la";
  std::string prefs = "eu";
  std::string treatment = "pooled";
  std::string tau = "ks";
  int reps = 500;
  int var_reps = 200;
  int var_reps_star = 50;
  std::uint64_t seed = 0;
  double floor = 1e-4;
  double laplace = 0.0;
  int threads = 0;
  std::string out;
};

json config_json(const CommonOpts& o, const std::string& subcommand) {
  return json{{"tool", "choicelab"},       {"version", kVersion},
              {"subcommand", subcommand},  {"model", o.model},
              {"prefs", o.prefs},          {"treatment", o.treatment},
              {"tau", o.tau},              {"reps", o.reps},
              {"var_reps", o.var_reps},    {"var_reps_star", o.var_reps_star},
              {"seed", o.seed},            {"floor", o.floor},
              {"laplace", o.laplace}};
}

void write_artifact(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw cl::Error("cannot write '" + path + "'");
  f << j.dump(2) << "\n";
}

cl::TestModel parse_model(const std::string& m, std::string* prefs) {
  if (m == "rum") return {true, cl::LinkFn::FC};
  if (m == "eu-rum") {
    *prefs = "eu";
    return {true, cl::LinkFn::FC};
  }
  if (m == "la") return {false, cl::LinkFn::LA};
  if (m == "mm") return {false, cl::LinkFn::MM};
  if (m == "rcg") return {false, cl::LinkFn::RCG};
  if (m == "fc") return {false, cl::LinkFn::FC};
  throw cl::Error("unknown model '" + m + "'");
}

cl::PreferenceOrderSet build_orders(const cl::ChoiceUniverse& u,
                                    const cl::LotteryBook& book,
                                    const std::string& prefs, bool with_default) {
  if (prefs == "all") return cl::enumerate_orders(u, with_default);
  if (prefs == "eu") return cl::filter_eu(cl::enumerate_orders(u, with_default), book);
  if (prefs == "crra") return cl::enumerate_crra(book, with_default);
  throw cl::Error("unknown preference restriction '" + prefs + "'");
}

void apply_tau(const std::string& tau, cl::TestSpec& spec) {
  if (tau == "ks") {
    spec.tau_rule = cl::TauRule::Ks;
  } else if (tau == "zero") {
    spec.tau_rule = cl::TauRule::Zero;
  } else {
    spec.tau_rule = cl::TauRule::Fixed;
    spec.tau_fixed = std::stod(tau);
  }
}

cl::LotteryBook load_book(const std::string& path) {
  if (path.empty()) return cl::builtin_book();
  std::ifstream f(path);
  if (!f) throw cl::Error("cannot open book '" + path + "'");
  json j = json::parse(f);
  std::vector<std::string> items;
  for (std::size_t i = 0; i < j.at("lotteries").size(); ++i)
    items.push_back(std::to_string(i + 1));
  cl::ChoiceUniverse u(items, "o");
  cl::LotteryBook book(u, j.at("prizes").get<std::vector<double>>());
  int item = 0;
  for (const auto& lot : j.at("lotteries")) {
    std::map<double, double> pp;
    for (const auto& [k, v] : lot.items()) pp[std::stod(k)] = v.get<double>();
    book.set_lottery(item++, pp);
  }
  book.set_default_lottery(j.at("default_prize").get<double>());
  return book;
}

std::vector<std::string> split_labels(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic choice analysis: consideration-model calibration, "
               "cone tests, structural estimation, and simulation"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string data_path, book_path;
  bool stability = false, pooled = false;

  auto add_common = [&](CLI::App* sub, bool with_data) {
    sub->add_option("--model", o.model, "rum, eu-rum, la, mm, rcg, fc");
    sub->add_option("--prefs", o.prefs, "all, eu, crra");
    sub->add_option("--treatment", o.treatment, "treatment label or 'pooled'");
    sub->add_option("--tau", o.tau, "ks, zero, or a number");
    sub->add_option("--reps", o.reps, "bootstrap replications");
    sub->add_option("--var-reps", o.var_reps, "variance-estimation replications");
    sub->add_option("--var-reps-star", o.var_reps_star,
                    "per-replication variance replications");
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--floor", o.floor, "simplex projection floor");
    sub->add_option("--laplace", o.laplace, "optional frequency floor kappa");
    sub->add_option("--threads", o.threads, "worker threads (0 = auto)");
    sub->add_option("--out", o.out, "output path (default stdout)");
    sub->add_option("--book", book_path, "lottery book JSON (default built-in)");
    if (with_data)
      sub->add_option("data", data_path, "observations CSV")->required();
  };

  auto* c_cal = app.add_subcommand("calibrate", "calibrate an attention index");
  add_common(c_cal, true);

  auto* c_test = app.add_subcommand("test", "bootstrap cone test");
  add_common(c_test, true);
  c_test->add_flag("--stability", stability, "joint preference-stability test");
  c_test->add_flag("--pooled", pooled, "pool all treatments before testing");

  auto* c_est = app.add_subcommand("estimate", "structural estimation");
  add_common(c_est, true);

  auto* c_diag = app.add_subcommand("diagnose", "model-free scans");
  add_common(c_diag, true);

  auto* c_sim = app.add_subcommand("simulate", "synthetic data / overload sweep");
  add_common(c_sim, false);
  std::string sim_kind = "dataset";
  long sim_n = 4000;
  double sim_lambda = 1.0;
  std::string n_grid_s = "100,200,500,1000,5000,10000,15000";
  std::string order_grid_s = "2,5,10,50,100,200";
  int sim_reps = 1000;
  c_sim->add_option("--kind", sim_kind, "dataset, co-sweep");
  c_sim->add_option("--n", sim_n, "sample size");
  c_sim->add_option("--lambda", sim_lambda, "mixture weight for kind=dataset");
  c_sim->add_option("--n-grid", n_grid_s, "sample sizes for co-sweep");
  c_sim->add_option("--order-grid", order_grid_s, "heterogeneity for co-sweep");
  c_sim->add_option("--sweep-reps", sim_reps, "repetitions per cell");

  auto* c_pow = app.add_subcommand("power", "rejection-rate sweep");
  add_common(c_pow, false);
  std::string lambda_s = "0.25,0.5,0.75";
  long pow_n = 4000;
  int pow_datasets = 50;
  c_pow->add_option("--lambda", lambda_s, "comma-separated mixture weights");
  c_pow->add_option("--n", pow_n, "sample size per dataset");
  c_pow->add_option("--datasets", pow_datasets, "Monte Carlo datasets per lambda");

  CLI11_PARSE(app, argc, argv);

  try {
    const cl::LotteryBook book = load_book(book_path);
    const cl::ChoiceUniverse& u = book.universe();
    cl::SubsetIndexer ix(u);

    cl::TestSpec spec;
    std::string prefs = o.prefs;
    spec.model = parse_model(o.model, &prefs);
    apply_tau(o.tau, spec);
    spec.reps = o.reps;
    spec.var_reps = o.var_reps;
    spec.var_reps_star = o.var_reps_star;
    spec.seed = o.seed;
    spec.laplace = o.laplace;
    spec.threads = o.threads;

    auto load_data = [&]() { return cl::load_observations(data_path, u); };

    if (app.got_subcommand(c_cal)) {
      const auto obs = load_data();
      const auto rule = cl::empirical_rule(obs, u, o.treatment);
      const auto freq = rule.frequencies(u, o.laplace);
      const auto cal = cl::calibrate(freq, spec.model.link, ix);
      const auto wd = cl::well_defined(cal, ix);
      json j{{"config", config_json(o, "calibrate")},
             {"data", cl::empirical_rule_json(rule, u)},
             {"calibration", cl::calibration_json(cal, wd, u)}};
      write_artifact(o.out, j);
    } else if (app.got_subcommand(c_test)) {
      const auto obs = load_data();
      cl::TestContext ctx(u, spec.model,
                          build_orders(u, book, prefs, spec.model.rum));
      cl::TestReport rep;
      if (stability || pooled) {
        std::vector<cl::EmpiricalChoiceRule> datasets;
        for (const auto& t : cl::treatment_labels(obs))
          datasets.push_back(cl::empirical_rule(obs, u, t));
        rep = stability ? cl::joint_stability_test(datasets, ctx, spec)
                        : cl::pooled_test(datasets, ctx, spec);
      } else {
        rep = cl::bootstrap_pvalue(cl::empirical_rule(obs, u, o.treatment), ctx, spec);
      }
      json j{{"config", config_json(o, "test")},
             {"orders", ctx.orders.count()},
             {"report", cl::test_report_json(rep)}};
      write_artifact(o.out, j);
    } else if (app.got_subcommand(c_est)) {
      if (spec.model.rum) throw cl::Error("estimate applies to link models");
      const auto obs = load_data();
      const auto rule = cl::empirical_rule(obs, u, o.treatment);
      const auto freq = rule.frequencies(u, o.laplace);
      const auto cal = cl::calibrate(freq, spec.model.link, ix);
      const auto m_hat = cl::project_consideration(cal, ix, o.floor);
      const auto orders = build_orders(u, book, prefs, false);
      const auto pi = cl::estimate_pi(freq, m_hat, orders, u);
      const auto attention = cl::attention_contribution(m_hat, ix, u.full_mask());
      json att = json::object();
      for (int a = 0; a < u.size(); ++a) att[u.item_label(a)] = attention[a];
      json welfare = json::array();
      for (cl::Mask A = 1; A <= u.full_mask(); ++A)
        welfare.push_back(
            {{"menu", cl::menu_json(A, u)},
             {"suboptimizing",
              cl::welfare_suboptimization(m_hat, orders, pi.pi, ix, A)}});
      json j{{"config", config_json(o, "estimate")},
             {"m", cl::consideration_rule_json(m_hat, u)},
             {"pi", std::vector<double>(pi.pi.data(), pi.pi.data() + pi.pi.size())},
             {"fit_residual", pi.residual},
             {"attention_index", att},
             {"welfare", welfare}};
      if (prefs == "crra")
        j["sigma"] = cl::sigma_masses_json(cl::sigma_bracket(pi.pi, orders));
      write_artifact(o.out, j);
    } else if (app.got_subcommand(c_diag)) {
      const auto obs = load_data();
      const auto rule = cl::empirical_rule(obs, u, o.treatment);
      const auto freq = rule.frequencies(u);
      json j{{"config", config_json(o, "diagnose")},
             {"choice_overload", cl::deviation_summary_json(
                                     cl::choice_overload_scan(freq), u)},
             {"attraction_effect", cl::deviation_summary_json(
                                       cl::attraction_effect_scan(freq), u)},
             {"revealed_preference", cl::acyclicity_json(cl::ram_acyclicity(freq), u)}};
      write_artifact(o.out, j);
    } else if (app.got_subcommand(c_sim)) {
      if (sim_kind == "dataset") {
        const auto eu = cl::filter_eu(cl::enumerate_orders(u, false), book);
        const auto pop = cl::overload_mixture_rule(sim_lambda, eu, u);
        cl::Rng rng(cl::Rng::derive(o.seed, 1));
        const auto data =
            cl::sample_dataset(pop, cl::stratified_sizes(u, sim_n), u, rng);
        std::ostream* os = &std::cout;
        std::ofstream f;
        if (!o.out.empty() && o.out != "-") {
          f.open(o.out);
          if (!f) throw cl::Error("cannot write '" + o.out + "'");
          os = &f;
        }
        *os << "subject_id,treatment,menu,choice\n";
        for (const auto& ob : cl::to_observations(data, u)) {
          *os << ob.subject_id << ',' << ob.treatment << ',';
          bool first = true;
          for (int a = 0; a < u.size(); ++a)
            if (ob.menu.contains(a)) {
              if (!first) *os << '|';
              *os << (a + 1);
              first = false;
            }
          *os << ',' << (ob.choice == cl::Observation::kDefaultChoice ? 0 : ob.choice + 1)
              << "\n";
        }
      } else if (sim_kind == "co-sweep") {
        std::vector<long> n_grid;
        for (const auto& t : split_labels(n_grid_s)) n_grid.push_back(std::stol(t));
        std::vector<int> order_grid;
        for (const auto& t : split_labels(order_grid_s))
          order_grid.push_back(std::stoi(t));
        const auto cells =
            cl::co_sweep(u, n_grid, order_grid, sim_reps, o.seed, o.out);
        for (const auto& c : cells)
          std::cout << "N=" << c.sample_size << " orders=" << c.order_count
                    << " proportion=" << c.proportion
                    << " total=" << c.total_magnitude
                    << " avg_marginal=" << c.avg_marginal_magnitude << "\n";
      } else {
        throw cl::Error("unknown --kind '" + sim_kind + "'");
      }
    } else if (app.got_subcommand(c_pow)) {
      std::vector<double> lambdas;
      for (const auto& t : split_labels(lambda_s)) lambdas.push_back(std::stod(t));
      const auto eu = cl::filter_eu(cl::enumerate_orders(u, false), book);
      cl::TestContext ctx(u, spec.model, build_orders(u, book, prefs, spec.model.rum));
      const auto rows =
          cl::power_sweep(lambdas, pow_n, pow_datasets, ctx, eu, spec, o.out);
      for (const auto& c : cl::summarize_power(rows))
        std::cout << "lambda=" << c.lambda << " datasets=" << c.datasets
                  << " reject_90=" << c.reject_90
                  << " reject_95=" << c.reject_95 << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
