#include <gtest/gtest.h>

#include <cmath>

#include "mrisr/integrator.hpp"
#include "mrisr/problems.hpp"
#include "oracles.hpp"

using namespace mrisr;

namespace {

SplitIVP scalar_linear(double lF, double lE, double lI) {
  SplitIVP p;
  p.name = "linear";
  p.dim = 1;
  p.y0 = Vec::Ones(1);
  p.f_fast = [lF](double, const Vec& y, Vec& o) { o = lF * y; };
  p.f_explicit = [lE](double, const Vec& y, Vec& o) { o = lE * y; };
  p.f_implicit = [lI](double, const Vec& y, Vec& o) { o = lI * y; };
  p.jac_implicit = [lI](double, const Vec&) -> Jacobian { return DenseMatrix::Constant(1, 1, lI); };
  return p;
}

double one_step(const std::string& method, const std::string& inner, const SplitIVP& p, double H, std::size_t M) {
  const MethodCoefficients m(load_builtin(method));
  const InnerCoefficients ic(load_inner(inner));
  StepOptions opt;
  opt.embedding = false;
  opt.newton.rtol = 1e-14;
  opt.newton.atol = 1e-16;
  return step(p, m, ic, p.y0, 0.0, H, M, opt).y1[0];
}

}  // namespace

TEST(Substeps, CeilingWithFloorOfOne) {
  EXPECT_EQ(substeps_for(1.0, 10), 10u);
  EXPECT_EQ(substeps_for(0.6, 10), 6u);
  EXPECT_EQ(substeps_for(4.0 / 15.0, 10), 3u);
  EXPECT_EQ(substeps_for(0.01, 10), 1u);
  EXPECT_EQ(substeps_for(17.0 / 15.0, 10), 12u);
}

TEST(FastSolve, HeunOnPureFastProblemIsPolynomialPower) {
  const double lF = -3.0, H = 0.2;
  const auto p = scalar_linear(lF, 0.0, 0.0);
  for (std::size_t M : {1u, 4u, 25u}) {
    const double z = lF * H / static_cast<double>(M);
    const double want = std::pow(1.0 + z + 0.5 * z * z, static_cast<double>(M));
    EXPECT_NEAR(one_step("imex-mri-sr21", "heun", p, H, M), want, 1e-14) << M;
  }
}

TEST(FastSolve, ForcingPolynomialIntegratedExactly) {
  SplitIVP p = scalar_linear(0.0, 0.0, 0.0);
  const MethodCoefficients m(load_builtin("imex-mri-sr32"));
  const InnerCoefficients ic(load_inner("bogacki-shampine"));
  PolynomialForcing g;
  g.coeff = {Vec::Constant(1, 1.0), Vec::Constant(1, -2.0), Vec::Constant(1, 3.0)};
  g.inv_span = 1.0 / 0.5;
  const auto r = solve_fast_ivp(p, g, 0.0, 0.5, Vec::Zero(1), ic, 3);
  // int_0^0.5 1 - 2 (2t) + 3 (2t)^2 dt
  EXPECT_NEAR(r.v_end[0], 0.5 - 0.5 + 0.5, 1e-15);
}

TEST(Step, PureExplicitMatchesBaseErk) {
  const double lE = -1.3, H = 0.7;
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    const auto ark = base_ark(t);
    const double want = oracle::rk_stability(oracle::dense(ark.AE), oracle::dense(ark.bE), lE * H).real();
    EXPECT_NEAR(one_step(name, default_inner_for(name), scalar_linear(0.0, lE, 0.0), H, 3), want, 1e-13) << name;
  }
}

TEST(Step, PureImplicitMatchesBaseDirk) {
  const double lI = -40.0, H = 0.5;
  for (const auto& name : builtin_names()) {
    const auto t = load_builtin(name);
    const auto ark = base_ark(t);
    const double want = oracle::rk_stability(oracle::dense(ark.AI), oracle::dense(ark.bI), lI * H).real();
    EXPECT_NEAR(one_step(name, default_inner_for(name), scalar_linear(0.0, 0.0, lI), H, 3), want, 1e-12 * std::max(1.0, std::abs(want)))
        << name;
  }
}

TEST(Step, MatchesFlattenedTablesWhenFastSolveResolved) {
  const double lF = -1.0, lE = -0.7, lI = -5.0, H = 0.1;
  for (const auto& name : {"imex-mri-sr21", "merk3"}) {
    const auto t = load_builtin(name);
    const double want = oracle::gark_linear_step(assemble_gark(t, compose(load_inner("rk4"), 40)), H, lF, lE, lI, 1.0);
    EXPECT_NEAR(one_step(name, "rk4", scalar_linear(lF, lE, lI), H, 2000), want, 1e-10) << name;
  }
}

TEST(Step, EmbeddingAndCounters) {
  const auto p = scalar_linear(-1.0, -0.5, -2.0);
  const MethodCoefficients m(load_builtin("imex-mri-sr21"));
  const InnerCoefficients ic(load_inner("heun"));
  StepOptions opt;
  opt.fast_tol = FastTolerance{1e-6, 1e-6};
  const auto r = step(p, m, ic, p.y0, 0.0, 0.1, 10, opt);
  ASSERT_TRUE(r.yhat);
  EXPECT_GT(std::abs(r.y1[0] - (*r.yhat)[0]), 0.0);
  EXPECT_LT(std::abs(r.y1[0] - (*r.yhat)[0]), 0.1);
  // stages c = 3/5, 4/15, 1 need 6 + 3 + 10 substeps; the embedding pass 10
  EXPECT_EQ(r.stats.fast_f_evals, 2 * (6 + 3 + 10 + 10));
  EXPECT_EQ(r.fast_errs.size(), 29u);
  EXPECT_EQ(r.stats.implicit_solves, 3);
}

TEST(Step, RejectsBadArguments) {
  const auto p = scalar_linear(-1.0, 0.0, 0.0);
  const MethodCoefficients m(load_builtin("merk2"));
  const InnerCoefficients ic(load_inner("heun"));
  EXPECT_THROW(step(p, m, ic, p.y0, 0.0, 0.0, 4), PreconditionError);
  EXPECT_THROW(step(p, m, ic, p.y0, 0.0, 0.1, 0), PreconditionError);
}

TEST(Step, FastBlowUpIsStageFailure) {
  const auto p = scalar_linear(-1e160, 0.0, 0.0);
  const MethodCoefficients m(load_builtin("merk2"));
  const InnerCoefficients ic(load_inner("heun"));
  EXPECT_THROW(step(p, m, ic, p.y0, 0.0, 1.0, 1), StepFailure);
}

TEST(IntegrateFixed, SamplesAndCounters) {
  const auto s = make_problem("kpr");
  const double H = s.tEnd / 40.0;
  const auto rec = integrate_fixed(s.ivp, load_builtin("imex-mri-sr21"), load_inner("heun"), s.tEnd, H, 10, s.samples);
  ASSERT_FALSE(rec.failed) << rec.failure;
  EXPECT_EQ(rec.accepted, 40);
  ASSERT_EQ(rec.times.size(), 11u);
  EXPECT_EQ(rec.times.front(), 0.0);
  EXPECT_NEAR(rec.times.back(), s.tEnd, 1e-12);
  EXPECT_GT(rec.stats.fast_f_evals, 0);
  EXPECT_EQ(rec.stats.implicit_solves, 40 * 3);
  EXPECT_THROW(integrate_fixed(s.ivp, load_builtin("imex-mri-sr21"), load_inner("heun"), s.tEnd, H, 10, {0.123}),
               PreconditionError);
}

TEST(IntegrateFixed, KprSecondOrderRatio) {
  const auto s = make_problem("kpr");
  auto err = [&](double H) {
    const auto rec = integrate_fixed(s.ivp, load_builtin("imex-mri-sr21"), load_inner("heun"), s.tEnd, H, 10, s.samples);
    double e = 0.0;
    for (std::size_t k = 1; k < rec.times.size(); ++k) e = std::max(e, (rec.states[k] - s.exact(rec.times[k])).cwiseAbs().maxCoeff());
    return e;
  };
  const double e1 = err(s.tEnd / 160.0), e2 = err(s.tEnd / 320.0);
  EXPECT_GT(e1 / e2, 3.4);
  EXPECT_LT(e1 / e2, 4.6);
}
