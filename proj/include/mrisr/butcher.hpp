#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrisr/errors.hpp"
#include "mrisr/matrix.hpp"
#include "mrisr/rational.hpp"
#include "mrisr/trees.hpp"

namespace mrisr {

/// Explicit (or general) Runge-Kutta table with optional embedded weights.
struct ButcherTable {
  std::string name;
  Matrix<Rational> A;
  std::vector<Rational> b;
  std::vector<Rational> c;
  std::optional<std::vector<Rational>> bhat;
  int order = 0;
  std::optional<int> emb_order;

  std::size_t stages() const noexcept { return b.size(); }
  bool has_embedding() const noexcept { return bhat.has_value(); }
  bool is_explicit() const {
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = i; j < A.cols(); ++j)
        if (A(i, j) != 0) return false;
    return true;
  }
};

/// Largest p <= max_order for which every classical order condition holds
/// exactly for weights `b`.
inline int rk_order(const Matrix<Rational>& A, const std::vector<Rational>& b, unsigned max_order = 6) {
  static const TreeSet single(6, 1);
  if (max_order > single.max_order()) max_order = single.max_order();
  const std::vector<Matrix<Rational>> a{A};
  const std::vector<std::vector<Rational>> bb{b};
  int p = 0;
  for (unsigned n = 1; n <= max_order; ++n) {
    for (const auto& [label, r] : tree_residuals(single, a, bb, n))
      if (r != 0) return p;
    p = static_cast<int>(n);
  }
  return p;
}

/// Recomputes the orders of `t` from its coefficients and throws if they
/// disagree with the declared ones or if c != A 1.
inline void certify(const ButcherTable& t) {
  const auto rs = row_sums(t.A);
  if (rs != t.c) throw FormatError(t.name + ": abscissae differ from row sums of A");
  const int p = rk_order(t.A, t.b);
  if (p != t.order)
    throw FormatError(t.name + ": declared order " + std::to_string(t.order) + ", conditions give " +
                      std::to_string(p));
  if (t.bhat) {
    const int q = rk_order(t.A, *t.bhat);
    if (!t.emb_order || q != *t.emb_order)
      throw FormatError(t.name + ": embedding order mismatch (conditions give " + std::to_string(q) + ")");
  }
}

namespace detail {

inline ButcherTable make_erk(std::string name, int order, std::optional<int> emb_order,
                             std::initializer_list<std::initializer_list<const char*>> lower,
                             std::initializer_list<const char*> b, std::initializer_list<const char*> bhat = {}) {
  ButcherTable t;
  t.name = std::move(name);
  const std::size_t s = b.size();
  t.A = Matrix<Rational>(s, s);
  std::size_t i = 1;
  for (const auto& row : lower) {
    std::size_t j = 0;
    for (const char* x : row) t.A(i, j++) = parse_rational(x);
    ++i;
  }
  t.b = rational_row(b);
  if (bhat.size() > 0) t.bhat = rational_row(bhat);
  t.c = row_sums(t.A);
  t.order = order;
  t.emb_order = emb_order;
  return t;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_inner_names() {
  static const std::vector<std::string> names{"heun-euler", "bogacki-shampine", "zonneveld", "dormand-prince",
                                              "rk4"};
  return names;
}

inline ButcherTable load_inner(const std::string& name) {
  using detail::make_erk;
  if (name == "heun-euler" || name == "heun")
    return make_erk("heun-euler", 2, 1, {{"1"}}, {"1/2", "1/2"}, {"1", "0"});
  if (name == "bogacki-shampine")
    return make_erk("bogacki-shampine", 3, 2, {{"1/2"}, {"0", "3/4"}, {"2/9", "1/3", "4/9"}},
                    {"2/9", "1/3", "4/9", "0"}, {"7/24", "1/4", "1/3", "1/8"});
  if (name == "zonneveld")
    return make_erk("zonneveld", 4, 3, {{"1/2"}, {"0", "1/2"}, {"0", "0", "1"}, {"5/32", "7/32", "13/32", "-1/32"}},
                    {"1/6", "1/3", "1/3", "1/6", "0"}, {"-1/2", "7/3", "7/3", "13/6", "-16/3"});
  if (name == "dormand-prince")
    return make_erk("dormand-prince", 5, 4,
                    {{"1/5"},
                     {"3/40", "9/40"},
                     {"44/45", "-56/15", "32/9"},
                     {"19372/6561", "-25360/2187", "64448/6561", "-212/729"},
                     {"9017/3168", "-355/33", "46732/5247", "49/176", "-5103/18656"},
                     {"35/384", "0", "500/1113", "125/192", "-2187/6784", "11/84"}},
                    {"35/384", "0", "500/1113", "125/192", "-2187/6784", "11/84", "0"},
                    {"5179/57600", "0", "7571/16695", "393/640", "-92097/339200", "187/2100", "1/40"});
  if (name == "rk4")
    return make_erk("rk4", 4, std::nullopt, {{"1/2"}, {"0", "1/2"}, {"0", "0", "1"}}, {"1/6", "1/3", "1/3", "1/6"});
  throw LookupError("unknown inner method '" + name + "'");
}

/// Inner method paired with a slow method when none is requested: an
/// explicit method of the same order.
inline std::string default_inner_for(const std::string& method) {
  if (method == "imex-mri-sr21" || method == "merk2") return "heun-euler";
  if (method == "imex-mri-sr32" || method == "merk3") return "bogacki-shampine";
  if (method == "merk5") return "dormand-prince";
  return "zonneveld";
}

/// K uniform steps of `t` over [0, 1] written as a single table.
inline ButcherTable compose(const ButcherTable& t, std::size_t K) {
  if (K == 0) throw PreconditionError("compose: K must be positive");
  const std::size_t s = t.stages();
  const Rational h(1, K);
  ButcherTable out;
  out.name = t.name + "^" + std::to_string(K);
  out.A = Matrix<Rational>(s * K, s * K);
  out.b.assign(s * K, Rational(0));
  out.c.assign(s * K, Rational(0));
  for (std::size_t m = 0; m < K; ++m)
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t row = m * s + i;
      for (std::size_t mm = 0; mm < m; ++mm)
        for (std::size_t j = 0; j < s; ++j) out.A(row, mm * s + j) = h * t.b[j];
      for (std::size_t j = 0; j < s; ++j) out.A(row, m * s + j) = h * t.A(i, j);
      out.b[row] = h * t.b[i];
      out.c[row] = h * (Rational(m) + t.c[i]);
    }
  out.order = t.order;
  return out;
}

}  // namespace mrisr
