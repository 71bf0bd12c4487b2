#include <gtest/gtest.h>

#include <random>

#include "mrisr/stability.hpp"
#include "oracles.hpp"

using namespace mrisr;

TEST(Phi, MatchesQuadrature) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<cplx> zs{cplx(1e-8, 0.0), cplx(-3e-7, 2e-7), cplx(0.49, 0.0), cplx(0.0, 0.51), cplx(-10.0, 0.0)};
  while (zs.size() < 60) {
    const cplx z(u(rng), u(rng));
    if (std::abs(z) <= 10.0) zs.push_back(z);
  }
  for (unsigned k = 0; k <= 5; ++k)
    for (const auto& z : zs) {
      const cplx want = oracle::phi_quadrature(k, z);
      EXPECT_LE(std::abs(phi(k, z) - want), 1e-10 * std::abs(want)) << k << " " << z;
    }
}

TEST(Phi, ValuesAtZero) {
  for (unsigned k = 1; k <= 6; ++k) EXPECT_DOUBLE_EQ(phi(k, 0.0).real(), 1.0 / k);
  EXPECT_EQ(phi(0, 0.0), cplx(1.0));
}

TEST(Phi, Recurrence) {
  const cplx z(-2.0, 1.5);
  for (unsigned k = 1; k <= 5; ++k) EXPECT_LT(std::abs(phi(k, z) - (z * phi(k + 1, z) + 1.0) / static_cast<double>(k)), 1e-13);
}

TEST(StabilityFunction, OneAtOrigin) {
  for (const auto& name : builtin_names()) EXPECT_EQ(stability_value(load_builtin(name), 0.0, 0.0, 0.0), cplx(1.0)) << name;
}

TEST(StabilityFunction, ReducesToBaseTables) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> re(-4.0, 0.5), im(-4.0, 4.0);
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    const auto ark = base_ark(t);
    for (int n = 0; n < 50; ++n) {
      const cplx z(re(rng), im(rng));
      const cplx e = oracle::rk_stability(oracle::dense(ark.AE), oracle::dense(ark.bE), z);
      const cplx i = oracle::rk_stability(oracle::dense(ark.AI), oracle::dense(ark.bI), z);
      EXPECT_LT(std::abs(stability_value(t, 0.0, z, 0.0) - e), 1e-12 * std::max(1.0, std::abs(e))) << name;
      EXPECT_LT(std::abs(stability_value(t, 0.0, 0.0, z) - i), 1e-12 * std::max(1.0, std::abs(i))) << name;
    }
  }
}

TEST(StabilityFunction, PureFastIsExponential) {
  const cplx z(-1.5, 0.7);
  for (const auto& name : builtin_names()) {
    const auto r = stability_value(load_builtin(name), z, 0.0, 0.0);
    EXPECT_LT(std::abs(r - std::exp(z)), 1e-13) << name;
  }
}

TEST(Sector, SamplesStayInside) {
  const SectorSpec s{30.0, 50.0};
  for (const auto& z : sector_samples(s)) {
    EXPECT_LE(std::abs(z), 50.0 * (1.0 + 1e-12));
    if (std::abs(z) > 0.0) EXPECT_LE(std::abs(std::arg(-z)), 30.0 * std::numbers::pi / 180.0 + 1e-12);
  }
  EXPECT_EQ(sector_samples({0.0, 0.0}).size(), 1u);
  EXPECT_THROW(sector_samples({100.0, 1.0}), PreconditionError);
}

TEST(Scan, Merk2ExplicitRegionNearOrigin) {
  const MethodCoefficients m(load_builtin("merk2"));
  Window w{-3.0, 0.0, -1.0, 1.0, 31, 21};
  ScanOptions opt;
  opt.threads = 1;
  const auto scan = scan_component_region(m, ScanKind::Explicit, {0.0, 0.0}, w, opt);
  EXPECT_EQ(scan.stable.size(), 31u * 21u);
  EXPECT_TRUE(scan.indicator(30, 10));  // origin
  EXPECT_TRUE(scan.indicator(25, 10));  // z = -0.5
  EXPECT_FALSE(scan.indicator(0, 10));  // z = -3
}

TEST(Scan, ThreadCountDoesNotChangeResult) {
  const MethodCoefficients m(load_builtin("imex-mri-sr32"));
  Window w{-4.0, 0.0, -3.0, 3.0, 17, 13};
  ScanOptions a, b;
  a.threads = 1;
  b.threads = 3;
  a.early_exit = b.early_exit = false;
  a.sampling = b.sampling = {8, 8, 4, 4};
  const auto s1 = scan_joint_region(m, {30.0, 10.0}, {30.0, 100.0}, w, a);
  const auto s2 = scan_joint_region(m, {30.0, 10.0}, {30.0, 100.0}, w, b);
  EXPECT_EQ(s1.stable, s2.stable);
  EXPECT_EQ(s1.max_abs_r, s2.max_abs_r);
}

TEST(Scan, Sr21ImplicitIsAStableOnSmallWindow) {
  const MethodCoefficients m(load_builtin("imex-mri-sr21"));
  Window w{-1e3, 0.0, -1e3, 1e3, 21, 41};
  ScanOptions opt;
  opt.sampling = {8, 8, 4, 4};
  const auto scan = scan_component_region(m, ScanKind::Implicit, {45.0, 100.0}, w, opt);
  EXPECT_EQ(scan.stable_count(), scan.stable.size());
}

TEST(Scan, BadArguments) {
  const MethodCoefficients m(load_builtin("merk2"));
  EXPECT_THROW(scan_component_region(m, ScanKind::Joint, {}, {}), PreconditionError);
  Window w;
  w.nx = 1;
  EXPECT_THROW(scan_component_region(m, ScanKind::Explicit, {}, w), PreconditionError);
}
