#include <gtest/gtest.h>

#include <random>

#include "mrisr/linalg.hpp"
#include "mrisr/newton.hpp"
#include "mrisr/problem.hpp"

using namespace mrisr;

namespace {

BandedMatrix random_banded(std::size_t n, std::size_t kl, std::size_t ku, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BandedMatrix a(n, kl, ku);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i > kl ? i - kl : 0; j <= std::min(n - 1, i + ku); ++j) a.at(i, j) = u(rng);
  return a;
}

}  // namespace

TEST(Banded, SolveMatchesDense) {
  std::mt19937 rng(11);
  for (auto [n, kl, ku] : {std::tuple<std::size_t, std::size_t, std::size_t>{12, 1, 1}, {30, 2, 3}, {7, 0, 2}, {40, 4, 0}}) {
    const auto a = random_banded(n, kl, ku, rng);
    Vec b = Vec::Random(static_cast<Eigen::Index>(n));
    const Vec x = linear_solve(Jacobian(a), b);
    const Vec ref = a.to_dense().fullPivLu().solve(b);
    EXPECT_LT((x - ref).norm(), 1e-10 * (1.0 + ref.norm())) << n << " " << kl << " " << ku;
  }
}

TEST(Banded, ProductMatchesDense) {
  std::mt19937 rng(3);
  const auto a = random_banded(15, 2, 1, rng);
  const Vec x = Vec::Random(15);
  EXPECT_LT((a * x - a.to_dense() * x).norm(), 1e-14);
}

TEST(Banded, PivotingHandlesZeroDiagonal) {
  BandedMatrix a(2, 1, 1);
  a.at(0, 1) = 1.0;
  a.at(1, 0) = 1.0;
  Vec b(2);
  b << 2.0, 3.0;
  const Vec x = linear_solve(Jacobian(a), b);
  EXPECT_DOUBLE_EQ(x[0], 3.0);
  EXPECT_DOUBLE_EQ(x[1], 2.0);
}

TEST(Banded, SingularThrows) {
  BandedMatrix a(3, 1, 1);
  EXPECT_THROW(linear_solve(Jacobian(a), Vec::Ones(3)), SingularMatrixError);
  EXPECT_THROW(linear_solve(Jacobian(DenseMatrix::Zero(3, 3)), Vec::Ones(3)), SingularMatrixError);
}

TEST(Banded, OutOfBandWriteThrows) {
  BandedMatrix a(4, 1, 0);
  EXPECT_THROW(a.at(0, 2) = 1.0, std::out_of_range);
}

TEST(ScaleShift, BothFormats) {
  std::mt19937 rng(5);
  const auto a = random_banded(6, 1, 1, rng);
  const auto s = std::get<BandedMatrix>(scale_shift(Jacobian(a), -0.5, 1.0)).to_dense();
  const DenseMatrix want = -0.5 * a.to_dense() + DenseMatrix::Identity(6, 6);
  EXPECT_LT((s - want).norm(), 1e-15);
  const auto d = std::get<DenseMatrix>(scale_shift(Jacobian(a.to_dense()), -0.5, 1.0));
  EXPECT_LT((d - want).norm(), 1e-15);
}

TEST(Wrms, Definition) {
  Vec v(2), w(2);
  v << 3.0, 4.0;
  w << 1.0, 1.0;
  EXPECT_DOUBLE_EQ(wrms(v, w), std::sqrt(12.5));
  const Vec ew = error_weights(v, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(ew[0], 1.0 / 2.5);
}

TEST(FdJacobian, DenseAndBandedAgreeWithAnalytic) {
  SplitIVP p;
  p.dim = 9;
  p.f_implicit = [](double, const Vec& y, Vec& out) {
    const auto n = y.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double l = i > 0 ? y[i - 1] : 0.0, r = i + 1 < n ? y[i + 1] : 0.0;
      out[i] = l - 2.0 * y[i] * y[i] + std::sin(r);
    }
  };
  Vec y = Vec::LinSpaced(9, -1.0, 1.5);
  DenseMatrix J = DenseMatrix::Zero(9, 9);
  for (Eigen::Index i = 0; i < 9; ++i) {
    if (i > 0) J(i, i - 1) = 1.0;
    J(i, i) = -4.0 * y[i];
    if (i + 1 < 9) J(i, i + 1) = std::cos(y[i + 1]);
  }
  const auto dense = std::get<DenseMatrix>(fd_jacobian(p, 0.0, y));
  EXPECT_LT((dense - J).cwiseAbs().maxCoeff(), 1e-6);
  p.band = Bandwidths{1, 1};
  const auto banded = std::get<BandedMatrix>(fd_jacobian(p, 0.0, y)).to_dense();
  EXPECT_LT((banded - J).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Newton, ScalarQuadratic) {
  auto r = [](const Vec& x) { Vec o(1); o[0] = x[0] * x[0] - 2.0; return o; };
  auto j = [](const Vec& x) { DenseMatrix m(1, 1); m(0, 0) = 2.0 * x[0]; return Jacobian(m); };
  NewtonConfig cfg;
  cfg.modified = false;
  const auto res = newton_solve(r, j, Vec::Constant(1, 1.0), cfg);
  EXPECT_NEAR(res.root[0], std::sqrt(2.0), 1e-9);
  EXPECT_EQ(res.jacobian_evals, res.iters);
}

TEST(Newton, LinearConvergesInOneUpdate) {
  DenseMatrix a(2, 2);
  a << 4.0, 1.0, 1.0, 3.0;
  Vec b(2);
  b << 1.0, 2.0;
  auto r = [&](const Vec& x) { return Vec(a * x - b); };
  auto j = [&](const Vec&) { return Jacobian(a); };
  const auto res = newton_solve(r, j, Vec::Zero(2), {});
  EXPECT_LT((a * res.root - b).norm(), 1e-12);
  EXPECT_LE(res.iters, 2);
  EXPECT_EQ(res.jacobian_evals, 1);
}

TEST(Newton, NonFiniteFails) {
  auto r = [](const Vec& x) { Vec o(1); o[0] = std::log(x[0]) - 50.0; return o; };
  auto j = [](const Vec& x) { DenseMatrix m(1, 1); m(0, 0) = 1.0 / x[0]; return Jacobian(m); };
  EXPECT_THROW(newton_solve(r, j, Vec::Constant(1, -1.0), {}), NewtonFailure);
}
