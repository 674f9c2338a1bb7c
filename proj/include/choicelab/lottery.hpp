#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "choicelab/common.hpp"
#include "choicelab/universe.hpp"

namespace choicelab {

// A lottery over a shared prize vector. Probabilities are stored aligned to
// the book's prize grid so that differences of lotteries are plain vectors.
struct Lottery {
  std::vector<double> probs;  // aligned to LotteryBook::prizes()

  double expectation(const std::vector<double>& prizes) const {
    double e = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) e += probs[i] * prizes[i];
    return e;
  }
};

// CRRA Bernoulli utility. Prizes are shifted by a tiny delta so the zero
// prize stays inside the domain of x^(1-sigma)/(1-sigma) and ln(x).
inline double crra_utility(double prize, double sigma, double delta = 1e-9) {
  const double x = prize + delta;
  if (std::abs(sigma - 1.0) < 1e-15) return std::log(x);
  return std::pow(x, 1.0 - sigma) / (1.0 - sigma);
}

class LotteryBook {
 public:
  LotteryBook(const ChoiceUniverse& universe, std::vector<double> prizes)
      : universe_(universe), prizes_(std::move(prizes)) {
    for (std::size_t i = 0; i < prizes_.size(); ++i)
      for (std::size_t j = i + 1; j < prizes_.size(); ++j)
        if (prizes_[i] == prizes_[j]) throw Error("duplicate prize");
    lotteries_.resize(universe.size());
  }

  void set_lottery(int item, const std::map<double, double>& prize_probs) {
    Lottery l;
    l.probs.assign(prizes_.size(), 0.0);
    double total = 0;
    for (auto [z, p] : prize_probs) {
      l.probs[prize_index(z)] = p;
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw Error("lottery probabilities sum to " + std::to_string(total));
    lotteries_[item] = std::move(l);
  }

  void set_default_lottery(double prize) {
    Lottery l;
    l.probs.assign(prizes_.size(), 0.0);
    l.probs[prize_index(prize)] = 1.0;
    default_ = std::move(l);
    has_default_ = true;
  }

  const ChoiceUniverse& universe() const { return universe_; }
  const std::vector<double>& prizes() const { return prizes_; }
  const Lottery& lottery(int item) const { return lotteries_[item]; }
  bool has_default_lottery() const { return has_default_; }
  const Lottery& default_lottery() const {
    if (!has_default_) throw Error("no default lottery set");
    return default_;
  }

  // Lottery for an "alternative index": 0..n-1 are items, n is the default.
  const Lottery& alternative(int alt) const {
    return alt == universe_.size() ? default_lottery() : lottery(alt);
  }

  double crra_value(int alt, double sigma) const {
    const Lottery& l = alternative(alt);
    double v = 0;
    for (std::size_t i = 0; i < prizes_.size(); ++i)
      if (l.probs[i] != 0) v += l.probs[i] * crra_utility(prizes_[i], sigma);
    return v;
  }

 private:
  std::size_t prize_index(double z) const {
    for (std::size_t i = 0; i < prizes_.size(); ++i)
      if (prizes_[i] == z) return i;
    throw Error("prize " + std::to_string(z) + " not on the book's grid");
  }

  ChoiceUniverse universe_;
  std::vector<double> prizes_;
  std::vector<Lottery> lotteries_;
  Lottery default_;
  bool has_default_ = false;
};

// The five-lottery instrument used throughout the docs, examples, and
// simulations, with a degenerate default paying 12.
inline LotteryBook builtin_book() {
  ChoiceUniverse u = ChoiceUniverse::of_size(5);
  LotteryBook book(u, {50, 48, 30, 14, 12, 10, 0});
  book.set_lottery(0, {{50, 0.5}, {0, 0.5}});
  book.set_lottery(1, {{30, 0.5}, {10, 0.5}});
  book.set_lottery(2, {{50, 0.25}, {30, 0.25}, {10, 0.25}, {0, 0.25}});
  book.set_lottery(3, {{50, 0.25}, {48, 0.2}, {14, 0.15}, {0, 0.4}});
  book.set_lottery(4, {{48, 0.2}, {30, 0.25}, {14, 0.15}, {10, 0.25}, {0, 0.15}});
  book.set_default_lottery(12);
  return book;
}

}  // namespace choicelab
