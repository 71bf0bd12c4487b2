#include <gtest/gtest.h>

#include <cmath>

#include "mrisr/adaptivity.hpp"
#include "mrisr/problems.hpp"

using namespace mrisr;

namespace {

ControllerState unit_safety() {
  ControllerState st;
  st.safety = 1.0;
  st.slow_order = 2;
  st.fast_order = 2;
  return st;
}

}  // namespace

TEST(SlowError, ZeroForEqualSolutions) {
  const Vec y = Vec::LinSpaced(4, 1.0, 2.0);
  EXPECT_EQ(estimate_slow_error(y, y, Vec::Constant(4, 1e-6), 1e-6), 0.0);
}

TEST(SlowError, ScalarAtTolerance) {
  const Vec y1 = Vec::Constant(1, 1.0 + 1e-5), yhat = Vec::Constant(1, 1.0);
  EXPECT_NEAR(estimate_slow_error(y1, yhat, Vec::Constant(1, 1e-5), 0.0), 1.0, 1e-9);
}

TEST(SlowError, ThreeComponentsByHand) {
  Vec y1(3), yhat(3), atol(3);
  y1 << 1.0, -2.0, 0.5;
  yhat << 1.1, -2.2, 0.5;
  atol << 0.1, 0.2, 0.3;
  const double rtol = 0.1;
  // weights 1/(0.1 + 0.11), 1/(0.2 + 0.22), 1/(0.3 + 0.05)
  const double e0 = 0.1 / 0.21, e1 = 0.2 / 0.42;
  EXPECT_NEAR(estimate_slow_error(y1, yhat, atol, rtol), std::sqrt((e0 * e0 + e1 * e1) / 3.0), 1e-12);
}

TEST(SlowError, NonFiniteIsInfinite) {
  Vec y1 = Vec::Ones(2), yhat = Vec::Ones(2);
  y1[1] = std::nan("");
  EXPECT_TRUE(std::isinf(estimate_slow_error(y1, yhat, Vec::Ones(2), 0.0)));
}

TEST(FastError, Means) {
  EXPECT_DOUBLE_EQ(accumulate_fast_error(std::vector<std::vector<double>>{{1.0, 3.0}, {2.0}}).value, 2.0);
  EXPECT_DOUBLE_EQ(accumulate_fast_error(std::vector<double>{0.7}).value, 0.7);
  EXPECT_DOUBLE_EQ(accumulate_fast_error(std::vector<double>(9, 0.25)).value, 0.25);
  const auto none = accumulate_fast_error(std::vector<double>{});
  EXPECT_FALSE(none.available);
  EXPECT_EQ(none.value, 0.0);
}

TEST(Controller, FixedPoint) {
  const auto d = controller_update(unit_safety(), {1.0, 1.0, true, false}, 0.25, 17);
  EXPECT_TRUE(d.accept);
  EXPECT_DOUBLE_EQ(d.H, 0.25);
  EXPECT_EQ(d.M, 17u);
}

TEST(Controller, HalfErrorGrowth) {
  const auto d = controller_update(unit_safety(), {0.5, 1.0, true, false}, 1.0, 10);
  EXPECT_TRUE(d.accept);
  EXPECT_NEAR(d.H, std::pow(2.0, 0.14), 1e-14);
  EXPECT_NEAR(d.H, 1.1019, 1e-4);
}

TEST(Controller, LargeErrorRejectsAndShrinks) {
  const auto d = controller_update(ControllerState{}, {4.0, 0.1, true, false}, 1.0, 10);
  EXPECT_FALSE(d.accept);
  EXPECT_LT(d.H, 1.0);
}

TEST(Controller, FastRejectionRaisesM) {
  const auto d = controller_update(unit_safety(), {0.9, 1.05, true, false}, 1.0, 3);
  EXPECT_FALSE(d.accept);
  EXPECT_GE(d.M, 4u);
}

TEST(Controller, ScaleFree) {
  const ControllerState st;
  for (double es : {0.01, 0.3, 1.0, 2.5, 50.0}) {
    const ErrorEstimate e{es, 0.4, true, false};
    const auto a = controller_update(st, e, 0.1, 8), b = controller_update(st, e, 3.2, 8);
    EXPECT_NEAR(b.H / a.H, 32.0, 1e-12);
    EXPECT_EQ(a.accept, b.accept);
    EXPECT_EQ(a.M, b.M);
    EXPECT_EQ(controller_update(st, e, 0.1, 80).accept, a.accept);
  }
}

TEST(Controller, FactorLimits) {
  ControllerState st = unit_safety();
  EXPECT_DOUBLE_EQ(controller_update(st, {0.0, 0.0, true, false}, 1.0, 10).H, st.growth);
  EXPECT_DOUBLE_EQ(controller_update(st, {1e30, 0.0, true, false}, 1.0, 10).H, st.shrink);
  EXPECT_LE(controller_update(st, {1.0, 1e30, true, false}, 1.0, 999999).M, st.Mmax);
}

TEST(Controller, Errors) {
  ControllerState st;
  st.Hmin = 0.5;
  EXPECT_THROW(controller_update(st, {100.0, 0.0, true, false}, 0.6, 10), StepSizeError);
  EXPECT_THROW(controller_update(ControllerState{}, {std::nan(""), 0.0, true, false}, 1.0, 10), PreconditionError);
  ControllerState bad;
  bad.safety = 1.5;
  EXPECT_THROW(bad.validate(), PreconditionError);
}

TEST(Adaptive, NonStiffLooseToleranceAcceptsEverything) {
  SplitIVP p;
  p.name = "decay";
  p.dim = 1;
  p.y0 = Vec::Ones(1);
  p.f_fast = [](double, const Vec& y, Vec& o) { o = -0.5 * y; };
  p.f_explicit = [](double, const Vec& y, Vec& o) { o = -0.2 * y; };
  p.f_implicit = [](double, const Vec& y, Vec& o) { o = -0.3 * y; };
  ControllerState st;
  st.slow_order = 2;
  st.H0 = 0.05;
  const std::vector<double> samples{0.5, 1.0};
  const auto rec = integrate_adaptive(p, load_builtin("imex-mri-sr21"), load_inner("heun"), 1.0, 1e-2, st, samples);
  EXPECT_FALSE(rec.failed);
  EXPECT_EQ(rec.rejected, 0);
  EXPECT_GT(rec.accepted, 0);
  EXPECT_EQ(rec.times, (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(rec.t_final, 1.0);
  EXPECT_NEAR(rec.y_final[0], std::exp(-1.0), 1e-2);
  for (const auto& e : rec.log) EXPECT_TRUE(e.accepted);
  EXPECT_EQ(rec.log.size(), static_cast<std::size_t>(rec.accepted));
  EXPECT_GT(rec.stats.fast_f_evals, 0);
  EXPECT_GT(rec.stats.implicit_solves, 0);
}

TEST(Adaptive, KprHitsSamplesExactlyAndMeetsTolerance) {
  const auto s = make_problem("kpr");
  ControllerState st;
  st.slow_order = 3;
  st.fast_order = 3;
  const auto rec = integrate_adaptive(s.ivp, load_builtin("imex-mri-sr32"), load_inner("bogacki-shampine"), s.tEnd, 1e-5, st,
                                      s.samples);
  ASSERT_EQ(rec.times.size(), s.samples.size() + 1);
  for (std::size_t k = 0; k < s.samples.size(); ++k) EXPECT_EQ(rec.times[k + 1], s.samples[k]);
  double err = 0.0;
  for (std::size_t k = 1; k < rec.times.size(); ++k) err = std::max(err, (rec.states[k] - s.exact(rec.times[k])).cwiseAbs().maxCoeff());
  EXPECT_LT(err, 1e-3);
  EXPECT_GT(rec.stats.implicit_solves, 0);
  double t = -1.0;
  for (const auto& e : rec.log)
    if (e.accepted) {
      EXPECT_GT(e.t, t);
      t = e.t;
    }
}

TEST(Adaptive, TryReturnsPartialRecordOnFailure) {
  const auto s = make_problem("kpr");
  ControllerState st;
  st.Hmin = 1.0;
  st.H0 = 1.5;
  const auto rec = try_integrate_adaptive(s.ivp, load_builtin("imex-mri-sr21"), load_inner("heun"), s.tEnd, 1e-8, st, s.samples);
  EXPECT_TRUE(rec.failed);
  EXPECT_FALSE(rec.failure.empty());
  EXPECT_THROW(integrate_adaptive(s.ivp, load_builtin("imex-mri-sr21"), load_inner("heun"), s.tEnd, 1e-8, st, s.samples),
               Error);
}
