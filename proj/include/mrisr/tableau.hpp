#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrisr/errors.hpp"
#include "mrisr/matrix.hpp"
#include "mrisr/rational.hpp"

namespace mrisr {

/// Coefficients of the embedded solution: one row per tendency power plus
/// the implicit row.
struct Embedding {
  std::vector<std::vector<Rational>> omega;  // n_omega rows of length s
  std::vector<Rational> gamma;               // length s
};

/// Exact coefficient set of a stage-restart multirate IMEX method.
///
/// Stage i forces its fast IVP with
///   g_i(theta) = (1/c_i) sum_j omega_{i,j}(theta / (c_i H)) (fE_j + fI_j),
///   omega_{i,j}(tau) = sum_k omega[k](i,j) tau^k,
/// then applies the implicit correction with row i of `gamma`.
/// Indices are 0-based throughout; stage 0 is y_n and stage s-1 is y_{n+1}.
struct MRISRTableau {
  std::string name;
  std::vector<Rational> c;
  std::vector<Matrix<Rational>> omega;
  Matrix<Rational> gamma;
  std::optional<Embedding> embedding;

  std::size_t stages() const noexcept { return c.size(); }
  std::size_t n_omega() const noexcept { return omega.size(); }
  bool has_embedding() const noexcept { return embedding.has_value(); }
};

enum class FindingKind {
  Shape,
  FirstAbscissa,
  LastAbscissa,
  FirstRowNonzero,
  NotStrictlyLowerTriangular,
  NotLowerTriangular,
  EmbeddingShape,
  Format,
};

struct Finding {
  FindingKind kind;
  std::string message;
};

inline std::string to_string(FindingKind k) {
  switch (k) {
    case FindingKind::Shape: return "shape";
    case FindingKind::FirstAbscissa: return "first abscissa nonzero";
    case FindingKind::LastAbscissa: return "last abscissa not one";
    case FindingKind::FirstRowNonzero: return "first row nonzero";
    case FindingKind::NotStrictlyLowerTriangular: return "not strictly lower triangular";
    case FindingKind::NotLowerTriangular: return "not lower triangular";
    case FindingKind::EmbeddingShape: return "embedding shape";
    case FindingKind::Format: return "format";
  }
  return "unknown";
}

/// Lists every violated structural invariant; an empty result means valid.
inline std::vector<Finding> validate_structure(const MRISRTableau& t) {
  std::vector<Finding> out;
  const std::size_t s = t.stages();
  auto add = [&](FindingKind k, std::string msg) { out.push_back({k, std::move(msg)}); };

  if (s == 0) {
    add(FindingKind::Shape, "tableau has no stages");
    return out;
  }
  if (t.omega.empty()) add(FindingKind::Shape, "no Omega matrices (nOmega = 0)");
  if (t.c.front() != 0) add(FindingKind::FirstAbscissa, "c[0] = " + to_string(t.c.front()) + ", expected 0");
  if (t.c.back() != 1) add(FindingKind::LastAbscissa, "c[s-1] = " + to_string(t.c.back()) + ", expected 1");

  auto check_square = [&](const Matrix<Rational>& m, const std::string& label) {
    if (m.rows() != s || m.cols() != s) {
      add(FindingKind::Shape, label + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                  ", expected " + std::to_string(s) + "x" + std::to_string(s));
      return false;
    }
    return true;
  };

  for (std::size_t k = 0; k < t.omega.size(); ++k) {
    const auto label = "Omega" + std::to_string(k);
    const auto& m = t.omega[k];
    if (!check_square(m, label)) continue;
    for (std::size_t j = 0; j < s; ++j)
      if (m(0, j) != 0) {
        add(FindingKind::FirstRowNonzero, label + "(0," + std::to_string(j) + ") = " + to_string(m(0, j)));
        break;
      }
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = i; j < s; ++j)
        if (m(i, j) != 0)
          add(FindingKind::NotStrictlyLowerTriangular,
              label + "(" + std::to_string(i) + "," + std::to_string(j) + ") = " + to_string(m(i, j)));
  }

  if (check_square(t.gamma, "Gamma")) {
    for (std::size_t j = 0; j < s; ++j)
      if (t.gamma(0, j) != 0) {
        add(FindingKind::FirstRowNonzero, "Gamma(0," + std::to_string(j) + ") = " + to_string(t.gamma(0, j)));
        break;
      }
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = i + 1; j < s; ++j)
        if (t.gamma(i, j) != 0)
          add(FindingKind::NotLowerTriangular,
              "Gamma(" + std::to_string(i) + "," + std::to_string(j) + ") = " + to_string(t.gamma(i, j)));
  }

  if (t.embedding) {
    const auto& e = *t.embedding;
    if (e.omega.size() != t.omega.size())
      add(FindingKind::EmbeddingShape, "embedding has " + std::to_string(e.omega.size()) + " omega rows, expected " +
                                           std::to_string(t.omega.size()));
    for (std::size_t k = 0; k < e.omega.size(); ++k)
      if (e.omega[k].size() != s)
        add(FindingKind::EmbeddingShape, "embedding omega row " + std::to_string(k) + " has length " +
                                             std::to_string(e.omega[k].size()));
    if (e.gamma.size() != s)
      add(FindingKind::EmbeddingShape, "embedding gamma row has length " + std::to_string(e.gamma.size()));
  }
  return out;
}

/// omega_{i,j}(tau) evaluated in double precision by Horner's rule.
inline double omega_poly_eval(const MRISRTableau& t, std::size_t i, std::size_t j, double tau) {
  if (i >= t.stages() || j >= i)
    throw std::out_of_range("omega_poly_eval: need 0 <= j < i < s, got i=" + std::to_string(i) +
                            " j=" + std::to_string(j));
  double acc = 0.0;
  for (std::size_t k = t.n_omega(); k-- > 0;) acc = acc * tau + to_double(t.omega[k](i, j));
  return acc;
}

/// Omega-bar = sum_k Omega^{k} / (k + 1), the integral of the tendency
/// polynomials over [0, 1].
inline Matrix<Rational> omega_bar(const MRISRTableau& t) {
  const std::size_t s = t.stages();
  Matrix<Rational> out(s, s);
  for (std::size_t k = 0; k < t.n_omega(); ++k) out += t.omega[k] * Rational(1, k + 1);
  return out;
}

/// Same integral for the embedding row.
inline std::vector<Rational> omega_bar_embedding(const MRISRTableau& t) {
  if (!t.embedding) throw PreconditionError(t.name + " has no embedding");
  std::vector<Rational> out(t.stages(), Rational(0));
  for (std::size_t k = 0; k < t.embedding->omega.size(); ++k)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += t.embedding->omega[k][j] / Rational(k + 1);
  return out;
}

namespace detail {

inline Matrix<Rational> rational_matrix(std::initializer_list<std::initializer_list<const char*>> rows) {
  const std::size_t n = rows.size();
  Matrix<Rational> m(n, n);
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (r.size() != n) throw std::logic_error("builtin tableau row has wrong length");
    std::size_t j = 0;
    for (const char* x : r) m(i, j++) = parse_rational(x);
    ++i;
  }
  return m;
}

inline MRISRTableau imex_mri_sr21() {
  MRISRTableau t;
  t.name = "imex-mri-sr21";
  t.c = rational_row({"0", "3/5", "4/15", "1"});
  t.omega = {rational_matrix({{"0", "0", "0", "0"},
                              {"3/5", "0", "0", "0"},
                              {"14/165", "2/11", "0", "0"},
                              {"-13/54", "137/270", "11/15", "0"}})};
  t.gamma = rational_matrix({{"0", "0", "0", "0"},
                             {"-11/23", "11/23", "0", "0"},
                             {"-6692/52371", "-18355/52371", "11/23", "0"},
                             {"11621/90666", "-215249/226665", "17287/50370", "11/23"}});
  t.embedding = Embedding{{rational_row({"-1/4", "1/2", "3/4", "0"})}, rational_row({"-31/12", "-1/6", "11/4", "0"})};
  return t;
}

inline MRISRTableau imex_mri_sr32() {
  MRISRTableau t;
  t.name = "imex-mri-sr32";
  t.c = rational_row({"0", "23/34", "4/5", "17/15", "1"});
  t.omega = {
      rational_matrix({{"0", "0", "0", "0", "0"},
                       {"23/34", "0", "0", "0", "0"},
                       {"71/70", "-3/14", "0", "0", "0"},
                       {"124/1155", "4/7", "5/11", "0", "0"},
                       {"162181/187680", "119/1380", "11/32", "-5/17", "0"}}),
      // Entry (3,1) is positive: the row must sum to zero.
      rational_matrix({{"0", "0", "0", "0", "0"},
                       {"0", "0", "0", "0", "0"},
                       {"-14453/63825", "14453/63825", "0", "0", "0"},
                       {"-2101267877/1206582300", "2476735438/301645575", "-13575085/2098404", "0", "0"},
                       {"-762580446799/588660102960", "11083240219/4328383110", "-211274129/100368304",
                        "89562055/106641323", "0"}})};
  t.gamma = rational_matrix({{"0", "0", "0", "0", "0"},
                             {"-4/7", "4/7", "0", "0", "0"},
                             {"-2707004/3127425", "919904/3127425", "4/7", "0", "0"},
                             {"852879271/703839675", "-1575000496/703839675", "5/11", "4/7", "0"},
                             {"43136869/2019912118", "-73810600/1009956059", "-17653551/87822266",
                              "-13993902/43911133", "4/7"}});
  t.embedding = Embedding{{rational_row({"76355/74834", "-46/31", "67/34", "-36/71", "0"}),
                           rational_row({"-3732974/2278035", "13857574/2278035", "-52/9", "4/3", "0"})},
                          rational_row({"-179/4140", "799/14490", "1/14", "-1/12", "0"})};
  return t;
}

inline MRISRTableau imex_mri_sr43() {
  MRISRTableau t;
  t.name = "imex-mri-sr43";
  t.c = rational_row({"0", "1/4", "3/4", "11/20", "1/2", "1", "1"});
  t.omega = {
      rational_matrix({{"0", "0", "0", "0", "0", "0", "0"},
                       {"1/4", "0", "0", "0", "0", "0", "0"},
                       {"9/8", "-3/8", "0", "0", "0", "0", "0"},
                       {"187/2340", "7/9", "-4/13", "0", "0", "0", "0"},
                       {"64/165", "1/6", "-3/5", "6/11", "0", "0", "0"},
                       {"1816283/549120", "-2/9", "-4/11", "-1/6", "-2561809/1647360", "0", "0"},
                       {"0", "7/11", "-2203/264", "10825/792", "-85/12", "841/396", "0"}}),
      rational_matrix({{"0", "0", "0", "0", "0", "0", "0"},
                       {"0", "0", "0", "0", "0", "0", "0"},
                       {"-11/4", "11/4", "0", "0", "0", "0", "0"},
                       {"-1228/2925", "-92/225", "808/975", "0", "0", "0", "0"},
                       {"-2572/2805", "167/255", "199/136", "-1797/1496", "0", "0", "0"},
                       {"-1816283/274560", "253/36", "-23/44", "76/3", "-20775791/823680", "0", "0"},
                       {"0", "107/132", "1289/88", "-9275/792", "0", "-371/99", "0"}})};
  t.gamma = rational_matrix({{"0", "0", "0", "0", "0", "0", "0"},
                             {"-1/4", "1/4", "0", "0", "0", "0", "0"},
                             {"1/4", "-1/2", "1/4", "0", "0", "0", "0"},
                             {"13/100", "-7/30", "-11/75", "1/4", "0", "0", "0"},
                             {"6/85", "-301/1360", "-99/544", "45/544", "1/4", "0", "0"},
                             {"0", "-9/4", "-19/48", "-75/16", "85/12", "1/4", "0"},
                             {"0", "0", "0", "0", "0", "0", "0"}});
  t.embedding = Embedding{{rational_row({"1/400", "49/12", "43/6", "-7/10", "-85/12", "-2963/1200", "0"}),
                           rational_row({"-1/200", "-137/24", "-235/16", "1237/80", "0", "2963/600", "0"})},
                          rational_row({"0", "0", "0", "0", "0", "0", "0"})};
  return t;
}

/// Stage groups of a MERK method: every stage in `rows` interpolates the
/// slow differences D_j = f_j - f_0 at the stages listed in `nodes`.
struct MerkGroup {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> nodes;
};

inline std::vector<MerkGroup> merk_groups(int order) {
  switch (order) {
    case 2: return {{{2}, {1}}};
    case 3: return {{{2}, {1}}, {{3}, {2}}};
    case 4: return {{{2, 3}, {1}}, {{4, 5}, {2, 3}}, {{6}, {4, 5}}};
    case 5: return {{{2, 3}, {1}}, {{4, 5, 6}, {2, 3}}, {{7, 8, 9}, {4, 5, 6}}, {{10}, {7, 8, 9}}};
    default: throw PreconditionError("MERK order must be 2, 3, 4 or 5");
  }
}

inline std::size_t merk_stage_count(int order) {
  switch (order) {
    case 2: return 3;
    case 3: return 4;
    case 4: return 7;
    case 5: return 11;
    default: throw PreconditionError("MERK order must be 2, 3, 4 or 5");
  }
}

}  // namespace detail

struct MerkBuild {
  MRISRTableau tableau;
  /// Value the abscissae constraint demands for the constrained entry
  /// (c_6 for order 4, c_9 for order 5); empty for orders 2 and 3 or when the
  /// constraint's denominator vanishes.
  std::optional<Rational> constraint_value;
  bool constraint_satisfied = true;
};

/// Builds the stage-restart form of a MERK method for arbitrary abscissae.
///
/// Each stage forcing is N(y_n) plus the polynomial in theta/H that vanishes
/// at 0 and interpolates D_j = N(Y_j) - N(y_n) at the group's nodes. With
/// a^{k}_j the x^k coefficient of the Lagrange basis polynomial of node j,
/// omega^{k}_{i,j} = c_i^{k+1} a^{k}_j and the first column closes each row
/// of Omega^{k}, k >= 1, to zero.
inline MerkBuild build_merk_tableau(int order, const std::vector<Rational>& c) {
  const std::size_t s = detail::merk_stage_count(order);
  if (c.size() != s)
    throw PreconditionError("MERK" + std::to_string(order) + " needs " + std::to_string(s) + " abscissae, got " +
                            std::to_string(c.size()));
  if (c.front() != 0) throw PreconditionError("MERK abscissae must start with c_1 = 0");

  const auto groups = detail::merk_groups(order);
  std::size_t n_omega = 1;
  for (const auto& g : groups) n_omega = std::max(n_omega, g.nodes.size() + 1);

  MRISRTableau t;
  t.name = "merk" + std::to_string(order);
  t.c = c;
  t.omega.assign(n_omega, Matrix<Rational>(s, s));
  t.gamma = Matrix<Rational>(s, s);
  for (std::size_t i = 1; i < s; ++i) t.omega[0](i, 0) = c[i];

  for (const auto& g : groups) {
    const std::size_t m = g.nodes.size();
    // basis[q][k-1]: coefficient of x^k in the Lagrange polynomial that is 1 at
    // node q, 0 at the other nodes and at x = 0.
    std::vector<std::vector<Rational>> basis(m);
    for (std::size_t q = 0; q < m; ++q) {
      const Rational& cq = c[g.nodes[q]];
      if (cq == 0)
        throw DegenerateAbscissaeError("MERK interpolation node c_" + std::to_string(g.nodes[q] + 1) + " is zero");
      std::vector<Rational> poly{Rational(1)};
      Rational denom = cq;
      for (std::size_t r = 0; r < m; ++r) {
        if (r == q) continue;
        const Rational& cr = c[g.nodes[r]];
        if (cr == cq)
          throw DegenerateAbscissaeError("coincident MERK abscissae c_" + std::to_string(g.nodes[q] + 1) + " = c_" +
                                         std::to_string(g.nodes[r] + 1) + " = " + to_string(cq));
        std::vector<Rational> next(poly.size() + 1, Rational(0));
        for (std::size_t d = 0; d < poly.size(); ++d) {
          next[d + 1] += poly[d];
          next[d] -= cr * poly[d];
        }
        poly = std::move(next);
        denom *= cq - cr;
      }
      for (auto& p : poly) p /= denom;
      basis[q] = std::move(poly);
    }
    for (std::size_t row : g.rows) {
      Rational scale = c[row];
      for (std::size_t k = 1; k <= m; ++k) {
        scale *= c[row];
        Rational closing = 0;
        for (std::size_t q = 0; q < m; ++q) {
          const Rational w = scale * basis[q][k - 1];
          t.omega[k](row, g.nodes[q]) = w;
          closing += w;
        }
        t.omega[k](row, 0) = -closing;
      }
    }
  }

  MerkBuild out{std::move(t), std::nullopt, true};
  if (order == 4) {
    const Rational den = 4 - 6 * c[4];
    if (den == 0) {
      out.constraint_satisfied = false;
    } else {
      out.constraint_value = (3 - 4 * c[4]) / den;
      out.constraint_satisfied = (*out.constraint_value == c[5]);
    }
  } else if (order == 5) {
    const Rational& c8 = c[7];
    const Rational& c10 = c[9];
    const Rational den = 15 - 20 * c10 - 20 * c8 + 30 * c10 * c8;
    if (den == 0) {
      out.constraint_satisfied = false;
    } else {
      out.constraint_value = (12 - 15 * c10 - 15 * c8 + 20 * c10 * c8) / den;
      out.constraint_satisfied = (*out.constraint_value == c[8]);
    }
  }
  return out;
}

/// Default abscissae of the shipped MERK methods (c_2 = 1/2 where free).
inline std::vector<Rational> merk_default_abscissae(int order) {
  switch (order) {
    case 2: return detail::rational_row({"0", "1/2", "1"});
    case 3: return detail::rational_row({"0", "1/2", "2/3", "1"});
    case 4: return detail::rational_row({"0", "1/2", "1/2", "1/3", "5/6", "1/3", "1"});
    case 5:
      return detail::rational_row({"0", "1/2", "1/2", "1/3", "1/2", "1/3", "1/4", "7/10", "1/2", "2/3", "1"});
    default: throw LookupError("no MERK method of order " + std::to_string(order));
  }
}

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"imex-mri-sr21", "imex-mri-sr32", "imex-mri-sr43", "merk2",
                                              "merk3",         "merk4",         "merk5"};
  return names;
}

inline MRISRTableau load_builtin(const std::string& name) {
  if (name == "imex-mri-sr21") return detail::imex_mri_sr21();
  if (name == "imex-mri-sr32") return detail::imex_mri_sr32();
  if (name == "imex-mri-sr43") return detail::imex_mri_sr43();
  for (int order = 2; order <= 5; ++order)
    if (name == "merk" + std::to_string(order)) return build_merk_tableau(order, merk_default_abscissae(order)).tableau;
  throw LookupError("unknown method '" + name + "'");
}

}  // namespace mrisr
