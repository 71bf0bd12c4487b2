#include <gtest/gtest.h>

#include <random>

#include "mrisr/butcher.hpp"
#include "mrisr/theory.hpp"

using namespace mrisr;

namespace {

const std::vector<std::string> kSr{"imex-mri-sr21", "imex-mri-sr32", "imex-mri-sr43"};

Rational sq(const Rational& x) { return x * x; }

std::vector<Rational> sub(std::vector<Rational> a, const std::vector<Rational>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

}  // namespace

TEST(Gark, FastBlockIsScaledInner) {
  const auto t = load_builtin("imex-mri-sr21");
  const auto heun = load_inner("heun");
  const auto g = assemble_gark(t, heun);
  const std::size_t sf = heun.stages();
  for (std::size_t l = 0; l < sf; ++l)
    for (std::size_t m = 0; m < sf; ++m) EXPECT_EQ(g.AFF(sf + l, sf + m), frac(3, 5) * heun.A(l, m));
}

TEST(Gark, SlowBlocksAndWeights) {
  const auto t = load_builtin("imex-mri-sr21");
  const auto g = assemble_gark(t, load_inner("heun"));
  EXPECT_EQ(g.ASE, t.omega[0]);
  EXPECT_EQ(g.bE, (std::vector<Rational>{frac(-13, 54), frac(137, 270), frac(11, 15), frac(0)}));
}

TEST(Gark, FsalAndImplicitCouplingEqualsExplicit) {
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    const auto g = assemble_gark(t, load_inner(default_inner_for(name)));
    EXPECT_EQ(g.AFI, g.AFE) << name;
    const std::size_t s = t.stages();
    EXPECT_EQ(g.bF, g.ASF.row(s - 1)) << name;
    EXPECT_EQ(g.bE, g.ASE.row(s - 1)) << name;
    EXPECT_EQ(g.bI, g.ASI.row(s - 1)) << name;
  }
}

TEST(BaseArk, Sr21ImplicitDiagonal) {
  const auto ark = base_ark(load_builtin("imex-mri-sr21"));
  const std::vector<Rational> want{frac(0), frac(11, 23), frac(11, 23), frac(11, 23)};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(ark.AI(i, i), want[i]);
}

TEST(BaseArk, MerkPairCoincides) {
  for (const char* name : {"merk2", "merk3", "merk4", "merk5"}) {
    const auto ark = base_ark(load_builtin(name));
    EXPECT_EQ(ark.AI, ark.AE) << name;
  }
}

TEST(BaseArk, RowSumsMatchAbscissae) {
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    const auto ark = base_ark(t);
    EXPECT_EQ(row_sums(ark.AE), t.c) << name;
    EXPECT_EQ(row_sums(ark.AI), t.c) << name;
  }
}

TEST(Consistency, Sr21RowThree) {
  const auto t = load_builtin("imex-mri-sr21");
  EXPECT_EQ(t.omega[0](2, 0) + t.omega[0](2, 1), frac(4, 15));
  EXPECT_EQ(t.gamma(1, 0) + t.gamma(1, 1), frac(0));
}

TEST(Consistency, ExactForEveryBuiltin) {
  for (const auto& name : builtin_names()) {
    const auto rep = check_internal_consistency(load_builtin(name));
    EXPECT_TRUE(rep.passed()) << name;
    for (const auto& c : rep.conditions) EXPECT_EQ(c.residual, 0) << name << " " << c.label;
  }
}

TEST(Consistency, PerturbationShowsUpExactly) {
  auto t = load_builtin("imex-mri-sr21");
  t.omega[0](1, 0) += frac(1, 1000);
  const auto rep = check_internal_consistency(t);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.conditions.front().residual, frac(1, 1000));
}

TEST(Coupling, Sr32ThirdOrderByHand) {
  const auto t = load_builtin("imex-mri-sr32");
  const std::size_t s = t.stages();
  Rational acc = 0;
  for (std::size_t j = 0; j < s; ++j) acc += (t.omega[0](s - 1, j) / 2 + t.omega[1](s - 1, j) / 6) * t.c[j];
  EXPECT_EQ(acc, frac(1, 6));
  EXPECT_TRUE(check_coupling_order(t, 3).passed());
}

TEST(Coupling, Merk2SatisfiesThirdOrder) { EXPECT_TRUE(check_coupling_order(load_builtin("merk2"), 3).passed()); }

TEST(Coupling, FourthOrderForOrderFourMethods) {
  for (const char* name : {"imex-mri-sr43", "merk4", "merk5"}) {
    EXPECT_TRUE(check_coupling_order(load_builtin(name), 3).passed()) << name;
    EXPECT_TRUE(check_coupling_order(load_builtin(name), 4).passed()) << name;
  }
}

TEST(Coupling, RejectsUnsupportedOrder) {
  EXPECT_THROW(check_coupling_order(load_builtin("merk2"), 2), PreconditionError);
  EXPECT_THROW(check_coupling_order(load_builtin("merk2"), 5), PreconditionError);
}

// Single-polynomial tableaux with a second-order base method always miss the
// third-order coupling condition by exactly 1/12.
TEST(Coupling, SinglePolynomialFamilyMissesThirdOrder) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> num(1, 9);
  for (int trial = 0; trial < 50; ++trial) {
    const Rational c2 = frac(num(rng), 10);
    Rational c3 = frac(num(rng), 10);
    if (c3 == c2) c3 += frac(1, 20);
    // last row (b1, b2, b3, 0) with sum 1 and b2 c2 + b3 c3 = 1/2; b3 free
    const Rational b3 = frac(num(rng) - 5, 7);
    const Rational b2 = (frac(1, 2) - b3 * c3) / c2;
    const Rational b1 = 1 - b2 - b3;
    MRISRTableau t;
    t.name = "family";
    t.c = {0, c2, c3, 1};
    t.omega.assign(1, Matrix<Rational>(4, 4));
    t.gamma = Matrix<Rational>(4, 4);
    t.omega[0](1, 0) = c2;
    t.omega[0](2, 0) = c3 - frac(1, 3);
    t.omega[0](2, 1) = frac(1, 3);
    t.omega[0](3, 0) = b1;
    t.omega[0](3, 1) = b2;
    t.omega[0](3, 2) = b3;
    ASSERT_TRUE(check_internal_consistency(t).passed());
    ASSERT_TRUE(check_ark_order(base_ark(t), 2).passed());
    const auto rep = check_coupling_order(t, 3);
    ASSERT_EQ(rep.conditions.size(), 1u);
    EXPECT_EQ(rep.conditions[0].residual, frac(1, 12));
  }
}

TEST(ArkTrees, ConditionCounts) {
  const auto ark = base_ark(load_builtin("merk3"));
  EXPECT_EQ(ark_residuals(ark, 1).size(), 2u);
  EXPECT_EQ(ark_residuals(ark, 2).size(), 4u);
  EXPECT_EQ(ark_residuals(ark, 3).size(), 14u);
  EXPECT_EQ(ark_residuals(ark, 4).size(), 52u);
}

TEST(ArkOrder, Sr43BaseIsFourthOrder) { EXPECT_TRUE(check_ark_order(base_ark(load_builtin("imex-mri-sr43")), 4).passed()); }

TEST(ArkOrder, Merk3BaseIsThirdOrder) { EXPECT_TRUE(check_ark_order(base_ark(load_builtin("merk3")), 3).passed()); }

TEST(ArkOrder, ExplicitEulerFailsSecondOrder) {
  ARKPair euler;
  euler.AE = Matrix<Rational>(1, 1);
  euler.AI = Matrix<Rational>(1, 1);
  euler.bE = {1};
  euler.bI = {1};
  euler.c = {0};
  EXPECT_TRUE(check_ark_order(euler, 1).passed());
  for (const auto& [label, r] : ark_residuals(euler, 2)) EXPECT_EQ(r, frac(-1, 2)) << label;
}

TEST(ArkOrder, EmbeddingsOneOrderLower) {
  const std::vector<int> primary{2, 3, 4};
  for (std::size_t k = 0; k < kSr.size(); ++k) {
    const auto t = load_builtin(kSr[k]);
    ASSERT_TRUE(t.embedding);
    EXPECT_TRUE(check_ark_order(base_ark_embedding(t), primary[k] - 1).passed()) << kSr[k];
    EXPECT_EQ(t.embedding->gamma.back(), 0) << kSr[k];
  }
}

TEST(InnerFloor, Values) {
  EXPECT_EQ(inner_order_floor(2, 1), 2);
  EXPECT_EQ(inner_order_floor(3, 2), 3);
  EXPECT_EQ(inner_order_floor(3, 3), 4);
  EXPECT_EQ(inner_order_floor(4, 2), 4);
  EXPECT_EQ(inner_order_floor(4, 4), 6);
}

TEST(MethodOrder, Builtins) {
  EXPECT_EQ(method_order(load_builtin("imex-mri-sr21"), 2), 2);
  EXPECT_EQ(method_order(load_builtin("imex-mri-sr32"), 3), 3);
  EXPECT_EQ(method_order(load_builtin("imex-mri-sr32"), 2), 2);
  EXPECT_EQ(method_order(load_builtin("imex-mri-sr43"), 4), 4);
  EXPECT_EQ(method_order(load_builtin("merk2"), 2), 2);
  EXPECT_EQ(method_order(load_builtin("merk3"), 3), 3);
  const auto m4 = load_builtin("merk4");
  EXPECT_EQ(method_order(m4, inner_order_floor(4, m4.n_omega())), 4);
  const auto m5 = load_builtin("merk5");
  EXPECT_EQ(method_order(m5, inner_order_floor(4, m5.n_omega())), 4);
}

TEST(CStatistic, EmbeddingEqualToPrimaryIsDegenerate) {
  auto t = load_builtin("imex-mri-sr32");
  const std::size_t s = t.stages();
  for (std::size_t k = 0; k < t.n_omega(); ++k) t.embedding->omega[k] = t.omega[k].row(s - 1);
  t.embedding->gamma = t.gamma.row(s - 1);
  EXPECT_THROW(c_statistic(t, 2), DegenerateEmbeddingError);
}

// Independent evaluation for a single-polynomial tableau: with A^E 1 = A^I 1
// = c every bicolored tree reduces to b^T c, b^T c^2 or b^T A c.
TEST(CStatistic, Sr21MatchesHandEvaluation) {
  const auto t = load_builtin("imex-mri-sr21");
  const std::size_t s = t.stages();
  const auto ark = base_ark(t);
  const auto emb = base_ark_embedding(t);
  const auto c2 = hadamard(t.c, t.c);
  const auto AEc = ark.AE * t.c;
  const auto AIc = ark.AI * t.c;
  Rational num = 0, den = 0;
  for (int root = 0; root < 2; ++root) {
    const auto d = sub(root == 0 ? emb.bE : emb.bI, root == 0 ? ark.bE : ark.bI);
    num += 3 * sq(dot(d, c2)) + 2 * sq(dot(d, AEc)) + 2 * sq(dot(d, AIc));
    den += 2 * sq(dot(root == 0 ? emb.bE : emb.bI, t.c) - frac(1, 2));
  }
  num += sq(dot(sub(t.embedding->omega[0], t.omega[0].row(s - 1)), t.c) / 2);
  const double want = std::sqrt(to_double(num)) / std::sqrt(to_double(den));
  const double got = c_statistic(t, 2);
  EXPECT_GT(got, 0.0);
  EXPECT_NEAR(got, want, 1e-14 * want);
}

TEST(CStatistic, OutOfScope) { EXPECT_THROW(c_statistic(load_builtin("imex-mri-sr43"), 4), PreconditionError); }

TEST(Inner, CertifiedOrders) {
  for (const auto& name : builtin_inner_names()) {
    const auto b = load_inner(name);
    EXPECT_EQ(rk_order(b.A, b.b), b.order) << name;
    if (b.bhat) EXPECT_EQ(rk_order(b.A, *b.bhat), *b.emb_order) << name;
  }
}

TEST(Inner, ComposedRk4KeepsOrder) {
  const auto k = compose(load_inner("rk4"), 3);
  EXPECT_EQ(k.stages(), 12u);
  EXPECT_EQ(rk_order(k.A, k.b), 4);
}
