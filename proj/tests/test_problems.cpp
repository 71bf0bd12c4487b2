#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "mrisr/problems.hpp"

using namespace mrisr;

namespace {

Vec split_sum(const SplitIVP& p, double t, const Vec& y) { return eval(p.f_fast, t, y) + eval(p.f_explicit, t, y) + eval(p.f_implicit, t, y); }

}  // namespace

TEST(Kpr, ExactSolutionSatisfiesSplitSystem) {
  const auto s = make_problem("kpr");
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ut(0.0, s.tEnd);
  for (int k = 0; k < 1000; ++k) {
    const double t = ut(rng);
    const double u = std::sqrt(3.0 + std::cos(20.0 * t)), v = std::sqrt(2.0 + std::cos(t));
    const double du = -20.0 * std::sin(20.0 * t) / (2.0 * u), dv = -std::sin(t) / (2.0 * v);
    const Vec f = split_sum(s.ivp, t, s.exact(t));
    EXPECT_NEAR(f[0], du, 1e-12 * std::max(1.0, std::abs(du))) << t;
    EXPECT_NEAR(f[1], dv, 1e-12) << t;
  }
}

TEST(Kpr, InitialValueIsExact) {
  const auto s = make_problem("kpr");
  EXPECT_NEAR((s.ivp.y0 - s.exact(0.0)).norm(), 0.0, 1e-15);
}

TEST(Kpr, PartitionSumsToMonolithic) {
  const KPRParams q;
  const auto p = kpr_problem(q);
  Vec y(2);
  y << 1.7, 1.4;
  EXPECT_LT((split_sum(p, 0.3, y) - kpr_monolithic(q, 0.3, y)).norm(), 1e-14);
}

TEST(Kpr, ImplicitJacobianMatchesDifferences) {
  auto p = kpr_problem();
  Vec y(2);
  y << 1.9, 1.6;
  const auto J = std::get<DenseMatrix>(p.jac_implicit(0.4, y));
  p.jac_implicit = nullptr;
  const auto D = std::get<DenseMatrix>(implicit_jacobian(p, 0.4, y));
  EXPECT_LT((J - D).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Kpr, Overrides) {
  const auto s = make_problem("kpr", {{"beta", 5.0}, {"tEnd", 1.0}});
  EXPECT_DOUBLE_EQ(s.tEnd, 1.0);
  EXPECT_DOUBLE_EQ(s.params.at("beta"), 5.0);
  EXPECT_NEAR(s.exact(0.5)[0], std::sqrt(3.0 + std::cos(2.5)), 1e-15);
  EXPECT_THROW(make_problem("kpr", {{"nope", 1.0}}), LookupError);
}

TEST(Registry, Names) {
  for (const auto& id : problem_names()) EXPECT_EQ(make_problem(id).id, id);
  EXPECT_THROW(make_problem("lorenz"), LookupError);
  EXPECT_EQ(make_problem("brusselator-201").ivp.dim, 603u);
  EXPECT_EQ(make_problem("brusselator-tv-101").ivp.dim, 303u);
}

TEST(Registry, TenEquispacedSamples) {
  const auto s = equispaced_samples(0.0, 3.0);
  ASSERT_EQ(s.size(), 10u);
  EXPECT_DOUBLE_EQ(s.front(), 0.3);
  EXPECT_DOUBLE_EQ(s.back(), 3.0);
}

// One interior node written out from the model equations.
TEST(Brusselator, InteriorNodeByHand) {
  for (const char* id : {"brusselator-201", "brusselator-tv-101"}) {
    const auto s = make_problem(id);
    const std::size_t N = static_cast<std::size_t>(s.params.at("N"));
    const double dx = 1.0 / static_cast<double>(N - 1), t = 0.37;
    const bool tv = std::string(id).find("tv") != std::string::npos;
    const double al = tv ? 6e-5 + 5e-5 * std::cos(std::numbers::pi * t) : 1e-2;
    const double rh = tv ? al : 1e-3;
    const double r = tv ? 0.6 + 0.5 * std::cos(4.0 * std::numbers::pi * t) : 1.0;
    const double a = s.params.at("a"), b = s.params.at("b"), eps = s.params.at("eps");
    Vec y = s.ivp.y0;
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u01(-0.2, 0.2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += u01(rng);
    const Vec f = split_sum(s.ivp, t, y);
    const std::size_t j = N / 3;
    auto at = [&](std::size_t sp, std::size_t k) { return y[static_cast<Eigen::Index>(sp * N + k)]; };
    auto transport = [&](std::size_t sp) {
      return al * (at(sp, j - 1) - 2.0 * at(sp, j) + at(sp, j + 1)) / (dx * dx) + rh * (at(sp, j + 1) - at(sp, j - 1)) / (2.0 * dx);
    };
    const double u = at(0, j), v = at(1, j), w = at(2, j);
    const double want[3] = {transport(0) + r * (a - (w + 1.0) * u + u * u * v), transport(1) + r * (w * u - u * u * v),
                            transport(2) + r * ((b - w) / eps - w * u)};
    for (std::size_t sp = 0; sp < 3; ++sp)
      EXPECT_NEAR(f[static_cast<Eigen::Index>(sp * N + j)], want[sp], 1e-10 * std::max(1.0, std::abs(want[sp]))) << id << sp;
    for (std::size_t sp = 0; sp < 3; ++sp) {
      EXPECT_EQ(f[static_cast<Eigen::Index>(sp * N)], 0.0);
      EXPECT_EQ(f[static_cast<Eigen::Index>(sp * N + N - 1)], 0.0);
    }
  }
}

TEST(Brusselator, PartitionSumsToMonolithic) {
  const auto q = BrusselatorParams::time_varying(31);
  const auto p = brusselator_problem(q);
  Vec y = p.y0 + 0.05 * Vec::Random(p.y0.size());
  EXPECT_LT((split_sum(p, 1.1, y) - brusselator_monolithic(q, 1.1, y)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Brusselator, BandedJacobianMatchesDifferences) {
  auto p = brusselator_problem(BrusselatorParams::fixed(21));
  const Vec y = p.y0;
  const DenseMatrix J = std::get<BandedMatrix>(p.jac_implicit(0.2, y)).to_dense();
  p.jac_implicit = nullptr;
  const DenseMatrix D = std::get<BandedMatrix>(implicit_jacobian(p, 0.2, y)).to_dense();
  EXPECT_LT((J - D).cwiseAbs().maxCoeff(), 1e-6 * J.cwiseAbs().maxCoeff());
}

TEST(Reference, KprReferenceIsCloseToExact) {
  const auto s = make_problem("kpr", {{"tEnd", 1.0}});
  ReferenceOptions opt;
  opt.gate = 1e-8;
  const auto ref = reference_solution(s.ivp, s.tEnd, s.samples, opt);
  ASSERT_EQ(ref.times.size(), s.samples.size() + 1);
  for (std::size_t k = 1; k < ref.times.size(); ++k) EXPECT_LT((ref.states[k] - s.exact(ref.times[k])).norm(), 1e-8);
  EXPECT_LT(ref.change, opt.gate);
}

TEST(Reference, UnreachableGateThrows) {
  const auto s = make_problem("kpr", {{"tEnd", 1.0}});
  ReferenceOptions opt;
  opt.gate = 1e-30;
  opt.Hmin = 1e-2;
  EXPECT_THROW(reference_solution(s.ivp, s.tEnd, s.samples, opt), ReferenceError);
}
