#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "choicelab/common.hpp"

namespace choicelab {

// Menus are nonempty subsets of the item set, encoded as bit masks over item
// positions. Enumeration order everywhere is ascending mask value; that fixes
// the coordinate system used by every matrix and serialized report.
struct Menu {
  Mask mask = 0;
  int size() const { return popcount(mask); }
  bool contains(int item) const { return mask >> item & 1u; }
};

class ChoiceUniverse {
 public:
  static constexpr int kMaxItems = 12;

  ChoiceUniverse(std::vector<std::string> items, std::string default_label)
      : items_(std::move(items)), default_label_(std::move(default_label)) {
    if (items_.empty()) throw Error("universe needs at least one item");
    if (static_cast<int>(items_.size()) > kMaxItems)
      throw Error("universe capped at " + std::to_string(kMaxItems) + " items");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (items_[i] == default_label_)
        throw Error("default label collides with item '" + items_[i] + "'");
      for (std::size_t j = i + 1; j < items_.size(); ++j)
        if (items_[i] == items_[j])
          throw Error("duplicate item '" + items_[i] + "'");
    }
  }

  // Universe of n unnamed items "1".."n" with default "o".
  static ChoiceUniverse of_size(int n) {
    std::vector<std::string> items;
    for (int i = 1; i <= n; ++i) items.push_back(std::to_string(i));
    return ChoiceUniverse(std::move(items), "o");
  }

  int size() const { return static_cast<int>(items_.size()); }
  Mask full_mask() const { return (Mask{1} << size()) - 1; }
  const std::vector<std::string>& items() const { return items_; }
  const std::string& item_label(int i) const { return items_[i]; }
  const std::string& default_label() const { return default_label_; }

  int item_index(const std::string& label) const {
    auto it = std::find(items_.begin(), items_.end(), label);
    if (it == items_.end()) throw Error("unknown item '" + label + "'");
    return static_cast<int>(it - items_.begin());
  }

  int menu_count() const { return (1 << size()) - 1; }

  std::vector<Menu> enumerate_menus() const {
    std::vector<Menu> out;
    out.reserve(menu_count());
    for (Mask m = 1; m <= full_mask(); ++m) out.push_back(Menu{m});
    return out;
  }

  // Number of (a, A) choice coordinates: sum_A |A|, plus one default
  // coordinate per menu when requested.
  long choice_coordinate_count(bool include_default) const {
    long d = 0;
    for (Mask m = 1; m <= full_mask(); ++m) d += popcount(m);
    if (include_default) d += menu_count();
    return d;
  }

  // Number of (A, D) consideration coordinates over all A in 2^X, D in 2^A.
  // Equals 3^n: each item is in A\D, in D, or outside A.
  long consideration_coordinate_count() const {
    long d = 0;
    for (Mask m = 0; m <= full_mask(); ++m) d += 1L << popcount(m);
    return d;
  }

 private:
  std::vector<std::string> items_;
  std::string default_label_;
};

// Canonical coordinate maps shared by the calibration and testing code.
//
//   choice coords:        menus ascending; within a menu, items by position,
//                         then (optionally) the default.
//   consideration coords: A over all of 2^X ascending (empty set included),
//                         D over subsets of A ascending.
class SubsetIndexer {
 public:
  explicit SubsetIndexer(const ChoiceUniverse& u) : n_(u.size()) {
    const Mask full = (Mask{1} << n_) - 1;
    choice_base_.assign(full + 2, 0);
    choice_base_def_.assign(full + 2, 0);
    cons_base_.assign(full + 2, 0);
    long cp = 0, cpd = 0, cc = 0;
    for (Mask m = 0; m <= full; ++m) {
      choice_base_[m] = cp;
      choice_base_def_[m] = cpd;
      cons_base_[m] = cc;
      if (m != 0) {
        cp += popcount(m);
        cpd += popcount(m) + 1;
      }
      cc += 1L << popcount(m);
    }
    choice_base_[full + 1] = cp;
    choice_base_def_[full + 1] = cpd;
    cons_base_[full + 1] = cc;
  }

  int items() const { return n_; }
  Mask full_mask() const { return (Mask{1} << n_) - 1; }

  long choice_dim(bool with_default) const {
    return with_default ? choice_base_def_[full_mask() + 1]
                        : choice_base_[full_mask() + 1];
  }
  long consideration_dim() const { return cons_base_[full_mask() + 1]; }

  // Coordinate of item `a` within menu `A` (a must be in A).
  long choice_coord(int a, Mask A) const {
    return choice_base_[A] + subset_rank(Mask{1} << a, A);
  }
  long choice_coord_def(int a, Mask A) const {
    return choice_base_def_[A] + subset_rank(Mask{1} << a, A);
  }
  // Coordinate of the default within menu `A` (default listed after items).
  long default_coord(Mask A) const {
    return choice_base_def_[A] + popcount(A);
  }

  long consideration_coord(Mask A, Mask D) const {
    return cons_base_[A] + subset_rank(D, A);
  }

 private:
  int n_;
  std::vector<long> choice_base_;
  std::vector<long> choice_base_def_;
  std::vector<long> cons_base_;
};

}  // namespace choicelab
