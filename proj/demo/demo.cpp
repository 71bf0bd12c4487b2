// Third-order IMEX-MRI-SR method on the KPR problem: order check, a short
// fixed-step convergence run and one adaptive run.
#include <cstdio>

#include "mrisr/mrisr.hpp"

using namespace mrisr;

int main() {
  const auto method = load_builtin("imex-mri-sr32");
  const auto inner = load_inner("bogacki-shampine");
  std::printf("%s: %zu stages, order %d with %s\n", method.name.c_str(), method.stages(), method_order(method, inner.order),
              inner.name.c_str());

  const auto kpr = make_problem("kpr");
  double prev = 0.0;
  for (int k = 4; k <= 7; ++k) {
    const double H = std::numbers::pi / std::ldexp(1.0, k);
    const auto rec = integrate_fixed(kpr.ivp, method, inner, kpr.tEnd, H, 10, kpr.samples);
    double err = 0.0;
    for (std::size_t i = 1; i < rec.times.size(); ++i)
      err = std::max(err, (rec.states[i] - kpr.exact(rec.times[i])).cwiseAbs().maxCoeff());
    std::printf("H = pi/2^%d  error %.3e", k, err);
    if (prev > 0.0) std::printf("  observed order %.2f", std::log2(prev / err));
    std::printf("\n");
    prev = err;
  }

  ControllerState st;
  st.slow_order = 3;
  st.fast_order = inner.order;
  const auto rec = integrate_adaptive(kpr.ivp, method, inner, kpr.tEnd, 1e-6, st, kpr.samples);
  std::printf("adaptive tol 1e-6: %lld accepted, %lld rejected, %lld fast evaluations, final error %.3e\n", rec.accepted,
              rec.rejected, rec.stats.fast_f_evals, (rec.y_final - kpr.exact(kpr.tEnd)).cwiseAbs().maxCoeff());

  const cplx r = stability_value(method, cplx(-1.0, 0.0), cplx(-0.5, 0.5), cplx(-20.0, 0.0));
  std::printf("|R(-1, -0.5+0.5i, -20)| = %.6f\n", std::abs(r));
  return 0;
}
