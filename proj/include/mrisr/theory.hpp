#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mrisr/butcher.hpp"
#include "mrisr/errors.hpp"
#include "mrisr/matrix.hpp"
#include "mrisr/rational.hpp"
#include "mrisr/tableau.hpp"
#include "mrisr/trees.hpp"

namespace mrisr {

/// Flattened GARK coefficients of one slow step with one pass of the inner
/// table per stage. Fast stages are ordered slow-stage-major: row i*sF + l is
/// inner stage l of the fast IVP of slow stage i.
struct GarkTables {
  Matrix<Rational> AFF, AFE, AFI, ASF, ASE, ASI;
  std::vector<Rational> bF, bE, bI, cF, cS;
};

struct ARKPair {
  Matrix<Rational> AE, AI;
  std::vector<Rational> bE, bI, c;
};

struct Condition {
  std::string label;
  Rational residual;
  bool pass = false;
};

struct OrderReport {
  int order = 0;
  std::vector<Condition> conditions;
  std::string note;

  bool passed() const {
    return std::all_of(conditions.begin(), conditions.end(), [](const Condition& c) { return c.pass; });
  }
  void add(std::string label, Rational r) {
    const bool ok = (r == 0);
    conditions.push_back({std::move(label), std::move(r), ok});
  }
};

enum class Row { Primary, Embedding };

namespace detail {

inline Rational max_abs(const std::vector<Rational>& v) {
  Rational m = 0;
  for (const auto& x : v) m = std::max(m, abs(x));
  return m;
}

inline std::vector<Rational> col_ones(std::size_t n) { return std::vector<Rational>(n, Rational(1)); }

/// Row coefficients that close a step: the last stage rows or the embedding.
struct ClosingRow {
  std::vector<std::vector<Rational>> omega;
  std::vector<Rational> gamma;
};

inline ClosingRow closing_row(const MRISRTableau& t, Row row) {
  ClosingRow r;
  if (row == Row::Primary) {
    const std::size_t last = t.stages() - 1;
    for (const auto& m : t.omega) r.omega.push_back(m.row(last));
    r.gamma = t.gamma.row(last);
  } else {
    if (!t.embedding) throw PreconditionError(t.name + " has no embedding");
    r.omega = t.embedding->omega;
    r.gamma = t.embedding->gamma;
  }
  return r;
}

/// sum_k Omega^{k} * weight(k) as a matrix.
template <class F>
Matrix<Rational> weighted_omega(const MRISRTableau& t, F&& weight) {
  Matrix<Rational> out(t.stages(), t.stages());
  for (std::size_t k = 0; k < t.n_omega(); ++k) out += t.omega[k] * weight(k);
  return out;
}

template <class F>
std::vector<Rational> weighted_row(const ClosingRow& r, F&& weight) {
  std::vector<Rational> out(r.gamma.size(), Rational(0));
  for (std::size_t k = 0; k < r.omega.size(); ++k)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += r.omega[k][j] * weight(k);
  return out;
}

inline std::vector<Rational> row_times(const std::vector<Rational>& row, const Matrix<Rational>& m) {
  std::vector<Rational> out(m.cols(), Rational(0));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += row[i] * m(i, j);
  return out;
}

inline const TreeSet& ark_trees() {
  static const TreeSet set(4, 2, {"E", "I"});
  return set;
}

}  // namespace detail

/// Requires the inner weights to integrate tau^k exactly for k < n_Omega.
inline GarkTables assemble_gark(const MRISRTableau& t, const ButcherTable& inner) {
  const std::size_t s = t.stages();
  const std::size_t sf = inner.stages();
  const std::size_t nk = t.n_omega();

  std::vector<std::vector<Rational>> cpow(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    cpow[k] = elementwise_pow(inner.c, static_cast<unsigned>(k));
    const Rational bc = dot(inner.b, cpow[k]);
    if (bc != Rational(1, k + 1))
      throw PreconditionError("inner method " + inner.name + " violates b^T c^" + std::to_string(k) + " = 1/" +
                              std::to_string(k + 1) + " (residual " + to_string(bc - Rational(1, k + 1)) +
                              "); needs order >= " + std::to_string(nk));
  }
  std::vector<std::vector<Rational>> acpow(nk);
  for (std::size_t k = 0; k < nk; ++k) acpow[k] = inner.A * cpow[k];

  GarkTables g;
  g.AFF = Matrix<Rational>(s * sf, s * sf);
  g.AFE = Matrix<Rational>(s * sf, s);
  g.ASF = Matrix<Rational>(s, s * sf);
  g.ASE = Matrix<Rational>(s, s);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t l = 0; l < sf; ++l) {
      for (std::size_t m = 0; m < sf; ++m) g.AFF(i * sf + l, i * sf + m) = t.c[i] * inner.A(l, m);
      for (std::size_t j = 0; j < s; ++j) {
        Rational acc = 0;
        for (std::size_t k = 0; k < nk; ++k) acc += t.omega[k](i, j) * acpow[k][l];
        g.AFE(i * sf + l, j) = acc;
      }
      g.ASF(i, i * sf + l) = t.c[i] * inner.b[l];
    }
    for (std::size_t j = 0; j < s; ++j) {
      Rational acc = 0;
      for (std::size_t k = 0; k < nk; ++k) acc += t.omega[k](i, j) * dot(inner.b, cpow[k]);
      g.ASE(i, j) = acc;
    }
  }
  g.AFI = g.AFE;
  g.ASI = g.ASE + t.gamma;
  g.bF = g.ASF.row(s - 1);
  g.bE = g.ASE.row(s - 1);
  g.bI = g.ASI.row(s - 1);
  g.cS = t.c;
  g.cF.resize(s * sf);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t l = 0; l < sf; ++l) g.cF[i * sf + l] = t.c[i] * inner.c[l];
  return g;
}

/// Slow base method obtained when the fast function vanishes.
inline ARKPair base_ark(const MRISRTableau& t) {
  ARKPair p;
  p.AE = omega_bar(t);
  p.AI = p.AE + t.gamma;
  p.bE = p.AE.row(t.stages() - 1);
  p.bI = p.AI.row(t.stages() - 1);
  p.c = row_sums(p.AE);
  return p;
}

/// Base pair whose closing weights come from the embedding row.
inline ARKPair base_ark_embedding(const MRISRTableau& t) {
  ARKPair p = base_ark(t);
  p.bE = omega_bar_embedding(t);
  p.bI = p.bE;
  for (std::size_t j = 0; j < p.bI.size(); ++j) p.bI[j] += t.embedding->gamma[j];
  return p;
}

inline OrderReport check_internal_consistency(const MRISRTableau& t) {
  OrderReport rep;
  const auto ones = detail::col_ones(t.stages());
  for (std::size_t k = 0; k < t.n_omega(); ++k) {
    auto r = t.omega[k] * ones;
    if (k == 0)
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= t.c[i];
    rep.add(k == 0 ? "Omega0*1 - c" : "Omega" + std::to_string(k) + "*1", detail::max_abs(r));
  }
  rep.add("Gamma*1", detail::max_abs(t.gamma * ones));
  if (t.embedding) {
    for (std::size_t k = 0; k < t.embedding->omega.size(); ++k) {
      Rational sum = 0;
      for (const auto& x : t.embedding->omega[k]) sum += x;
      if (k == 0) sum -= 1;
      rep.add(k == 0 ? "embOmega0*1 - 1" : "embOmega" + std::to_string(k) + "*1", abs(sum));
    }
    Rational sum = 0;
    for (const auto& x : t.embedding->gamma) sum += x;
    rep.add("embGamma*1", abs(sum));
  }
  rep.order = rep.passed() ? 2 : 0;
  return rep;
}

/// Coupling conditions of exactly order p (3 or 4) for the primary or the
/// embedded closing row. Internal consistency is assumed. Of the fourth-order
/// coupling conditions only the six below remain once A^{F,E} = A^{F,I} and
/// the bushy inner conditions are used; the others hold identically.
inline OrderReport check_coupling_order(const MRISRTableau& t, int p, Row row = Row::Primary) {
  if (p != 3 && p != 4) throw PreconditionError("coupling conditions are available for p = 3 or 4");
  OrderReport rep;
  rep.order = p;
  const auto r = detail::closing_row(t, row);
  const auto& c = t.c;
  auto w2 = [](std::size_t k) { return Rational(1, (k + 1) * (k + 2)); };
  auto w3 = [](std::size_t k) { return Rational(1, (k + 1) * (k + 3)); };
  auto w1 = [](std::size_t k) { return Rational(1, k + 1); };
  const auto e_w2 = detail::weighted_row(r, w2);
  if (p == 3) {
    rep.add("e^T W2 c = 1/6", dot(e_w2, c) - Rational(1, 6));
    return rep;
  }
  const auto e_w3 = detail::weighted_row(r, w3);
  const auto e_bar = detail::weighted_row(r, w1);
  const auto W2 = detail::weighted_omega(t, w2);
  const auto Obar = omega_bar(t);
  const auto W2c = W2 * c;
  const auto cW2c = hadamard(c, W2c);
  rep.add("a: e^T W3 c = 1/8", dot(e_w3, c) - Rational(1, 8));
  rep.add("b: e^T W2 C c = 1/12", dot(e_w2, hadamard(c, c)) - Rational(1, 12));
  rep.add("c: e^T Gamma C W2 c = 0", dot(r.gamma, cW2c));
  rep.add("d: e^T Obar C W2 c = 1/24", dot(e_bar, cW2c) - Rational(1, 24));
  rep.add("f: e^T W2 Obar c = 1/24", dot(e_w2, Obar * c) - Rational(1, 24));
  rep.add("g: e^T W2 Gamma c = 0", dot(e_w2, t.gamma * c));
  return rep;
}

/// Additive Runge-Kutta conditions of exactly order q on (AE, AI, bE, bI):
/// one condition per bicolored rooted tree, where a vertex colored E (I) is
/// reached through AE (AI) and a root colored E (I) is closed with bE (bI).
/// Orders 1..4 contribute 2, 4, 14 and 52 conditions (26 per root color).
inline std::vector<std::pair<std::string, Rational>> ark_residuals(const ARKPair& ark, unsigned q) {
  return tree_residuals<Rational>(detail::ark_trees(), {ark.AE, ark.AI}, {ark.bE, ark.bI}, q);
}

inline OrderReport check_ark_order(const ARKPair& ark, int p) {
  if (p < 1 || p > 4) throw PreconditionError("check_ark_order: p must be in 1..4");
  OrderReport rep;
  rep.order = p;
  for (unsigned q = 1; q <= static_cast<unsigned>(p); ++q)
    for (auto& [label, r] : ark_residuals(ark, q)) rep.add(label, r);
  return rep;
}

/// Smallest inner-method order for which the slow order p can be claimed.
inline int inner_order_floor(int p, std::size_t n_omega) {
  const int n = static_cast<int>(n_omega);
  if (p <= 2) return p;
  if (p == 3) return std::max(3, n + 1);
  return std::max(4, n + 2);
}

inline int method_order(const MRISRTableau& t, int inner_order) {
  const auto ark = base_ark(t);
  const bool consistent = check_internal_consistency(t).passed();
  int order = 0;
  for (int p = 1; p <= 4; ++p) {
    if (p >= 2 && !consistent) break;
    bool ok = true;
    for (const auto& [label, r] : ark_residuals(ark, static_cast<unsigned>(p)))
      if (r != 0) ok = false;
    if (ok && p >= 3) ok = check_coupling_order(t, p).passed();
    if (ok) ok = inner_order >= inner_order_floor(p, t.n_omega());
    if (!ok) break;
    order = p;
  }
  return order;
}

/// Residual vector tau^{(q)}: base conditions of order q followed by the
/// coupling conditions of order q.
inline std::vector<Rational> residual_vector(const MRISRTableau& t, int q, Row row) {
  const auto ark = row == Row::Primary ? base_ark(t) : base_ark_embedding(t);
  std::vector<Rational> out;
  for (auto& [label, r] : ark_residuals(ark, static_cast<unsigned>(q))) out.push_back(r);
  if (q >= 3)
    for (const auto& c : check_coupling_order(t, q, row).conditions) out.push_back(c.residual);
  return out;
}

/// ||tau-hat^{(p+1)} - tau^{(p+1)}||_2 / ||tau-hat^{(p)}||_2.
inline double c_statistic(const MRISRTableau& t, int p) {
  if (!t.embedding) throw PreconditionError(t.name + " has no embedding");
  if (p < 1) throw PreconditionError("c_statistic: p must be positive");
  if (p + 1 > 4) throw PreconditionError("c_statistic: order " + std::to_string(p + 1) + " residuals are not available");
  const auto tau_next = residual_vector(t, p + 1, Row::Primary);
  const auto hat_next = residual_vector(t, p + 1, Row::Embedding);
  const auto hat_p = residual_vector(t, p, Row::Embedding);
  Rational den = 0, num = 0;
  for (const auto& x : hat_p) den += x * x;
  if (den == 0) throw DegenerateEmbeddingError(t.name + ": embedding satisfies every order-" + std::to_string(p) + " condition");
  for (std::size_t k = 0; k < tau_next.size(); ++k) {
    const Rational d = hat_next[k] - tau_next[k];
    num += d * d;
  }
  return std::sqrt(to_double(num)) / std::sqrt(to_double(den));
}

}  // namespace mrisr
