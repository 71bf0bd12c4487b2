#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mrisr/matrix.hpp"

namespace mrisr {

/// Rooted tree whose vertices carry one of `colors` labels. Children are a
/// multiset stored as sorted indices into the owning TreeSet.
struct ColoredTree {
  unsigned order = 1;
  unsigned color = 0;
  std::vector<std::size_t> children;
  std::size_t density = 1;  // gamma(t)
  std::string label;
};

/// All colored rooted trees up to a given order, generated order by order so
/// that every child index points at an earlier entry.
class TreeSet {
 public:
  TreeSet(unsigned max_order, unsigned colors, std::vector<std::string> color_names = {})
      : colors_(colors), names_(std::move(color_names)) {
    if (names_.size() < colors_)
      for (unsigned k = static_cast<unsigned>(names_.size()); k < colors_; ++k) names_.push_back(std::to_string(k));
    by_order_.resize(max_order + 1);
    for (unsigned n = 1; n <= max_order; ++n) {
      std::vector<std::vector<std::size_t>> forests;
      std::vector<std::size_t> current;
      collect_forests(n - 1, 0, current, forests);
      for (const auto& forest : forests)
        for (unsigned col = 0; col < colors_; ++col) {
          ColoredTree t;
          t.order = n;
          t.color = col;
          t.children = forest;
          t.density = n;
          for (auto ch : forest) t.density *= trees_[ch].density;
          t.label = names_[col];
          if (!forest.empty()) {
            t.label += "[";
            for (std::size_t q = 0; q < forest.size(); ++q) t.label += (q ? "," : "") + trees_[forest[q]].label;
            t.label += "]";
          }
          by_order_[n].push_back(trees_.size());
          trees_.push_back(std::move(t));
        }
    }
  }

  const std::vector<ColoredTree>& trees() const noexcept { return trees_; }
  const std::vector<std::size_t>& of_order(unsigned n) const { return by_order_.at(n); }
  unsigned max_order() const noexcept { return static_cast<unsigned>(by_order_.size()) - 1; }

  /// Internal stage weights: for every tree, the vector A^{color}-weighted
  /// product that feeds its parent, i.e. prod_children (A^{col(ch)} g(ch)).
  /// `a[col]` holds the coupling matrix used when a child of color `col`
  /// contributes to a stage.
  template <class T>
  std::vector<std::vector<T>> stage_weights(const std::vector<Matrix<T>>& a) const {
    std::vector<std::vector<T>> g(trees_.size());
    std::vector<std::vector<T>> contrib(trees_.size());
    const std::size_t s = a.front().rows();
    for (std::size_t id = 0; id < trees_.size(); ++id) {
      std::vector<T> v(s, T(1));
      for (auto ch : trees_[id].children)
        for (std::size_t i = 0; i < s; ++i) v[i] *= contrib[ch][i];
      contrib[id] = a[trees_[id].color] * v;
      g[id] = std::move(v);
    }
    return g;
  }

 private:
  void collect_forests(unsigned remaining, std::size_t min_id, std::vector<std::size_t>& current,
                       std::vector<std::vector<std::size_t>>& out) const {
    if (remaining == 0) {
      out.push_back(current);
      return;
    }
    for (std::size_t id = min_id; id < trees_.size(); ++id) {
      if (trees_[id].order > remaining) continue;
      current.push_back(id);
      collect_forests(remaining - trees_[id].order, id, current, out);
      current.pop_back();
    }
  }

  unsigned colors_;
  std::vector<std::string> names_;
  std::vector<ColoredTree> trees_;
  std::vector<std::vector<std::size_t>> by_order_;
};

/// Residual Phi(t) - 1/gamma(t) for every tree of exactly order n. The
/// weights `b[col]` close a tree whose root carries color `col`.
template <class T>
std::vector<std::pair<std::string, T>> tree_residuals(const TreeSet& set, const std::vector<Matrix<T>>& a,
                                                       const std::vector<std::vector<T>>& b, unsigned n) {
  const auto g = set.stage_weights(a);
  std::vector<std::pair<std::string, T>> out;
  for (auto id : set.of_order(n)) {
    const auto& t = set.trees()[id];
    T phi = dot(b[t.color], g[id]);
    out.emplace_back(t.label, phi - T(1) / T(t.density));
  }
  return out;
}

}  // namespace mrisr
