#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "mrisr/errors.hpp"
#include "mrisr/integrator.hpp"
#include "mrisr/tableau.hpp"

namespace mrisr {

using cplx = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// phi_0 = e^z, phi_k(z) = int_0^1 e^{z(1-t)} t^{k-1} dt (so phi_k(0) = 1/k).
/// Below |z| = 0.5 a 20-term series (k-1)! sum_m z^m / (m+k)! is used;
/// elsewhere phi_1 = (e^z - 1) / z and phi_{k+1} = (k phi_k - 1) / z.
inline cplx phi(unsigned k, cplx z) {
  if (k == 0) return std::exp(z);
  if (std::abs(z) < 0.5) {
    // term_m = (k-1)! z^m / (m+k)!
    cplx term = 1.0 / static_cast<double>(k);
    cplx sum = term;
    for (unsigned m = 1; m < 20; ++m) {
      term *= z / static_cast<double>(m + k);
      sum += term;
    }
    return sum;
  }
  cplx p = (std::exp(z) - 1.0) / z;
  for (unsigned j = 1; j < k; ++j) p = (static_cast<double>(j) * p - 1.0) / z;
  return p;
}

/// eta(zF) = sum_k diag(phi_{k+1}(c zF)) Omega^{k}.
inline ComplexMatrix eta_matrix(const MethodCoefficients& m, cplx zF) {
  const auto s = static_cast<Eigen::Index>(m.s);
  ComplexMatrix eta = ComplexMatrix::Zero(s, s);
  for (std::size_t k = 0; k < m.n_omega; ++k)
    for (Eigen::Index i = 0; i < s; ++i) {
      const cplx w = phi(static_cast<unsigned>(k + 1), m.c[static_cast<std::size_t>(i)] * zF);
      eta.row(i) += w * m.omega[k].row(i).cast<cplx>();
    }
  return eta;
}

inline ComplexMatrix eta_matrix(const MRISRTableau& t, cplx zF) { return eta_matrix(MethodCoefficients(t), zF); }

namespace detail {

/// eta(zF) and phi_0(c zF) for one fast sample, reused across (zE, zI).
struct FastSample {
  ComplexMatrix eta;
  std::vector<cplx> phi0;
};

inline FastSample fast_sample(const MethodCoefficients& m, cplx zF) {
  FastSample f{eta_matrix(m, zF), {}};
  for (double c : m.c) f.phi0.push_back(std::exp(c * zF));
  return f;
}

/// Last component of (I - (zE + zI) eta - zI Gamma)^{-1} phi0. The matrix is
/// lower triangular, so forward substitution suffices; a zero diagonal is a
/// pole and yields infinity.
inline cplx resolvent_last(const MethodCoefficients& m, const FastSample& f, cplx zE, cplx zI, std::vector<cplx>& Y) {
  const std::size_t s = m.s;
  const cplx a = zE + zI;
  Y.resize(s);
  for (std::size_t i = 0; i < s; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    cplx acc = f.phi0[i];
    for (std::size_t j = 0; j < i; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      acc += (a * f.eta(ii, jj) + zI * m.gamma(ii, jj)) * Y[j];
    }
    const cplx diag = 1.0 - a * f.eta(ii, ii) - zI * m.gamma(ii, ii);
    if (diag == 0.0) return {std::numeric_limits<double>::infinity(), 0.0};
    Y[i] = acc / diag;
  }
  return Y[s - 1];
}

}  // namespace detail

/// R(zF, zE, zI); infinity at a pole of the resolvent.
inline cplx stability_value(const MethodCoefficients& m, cplx zF, cplx zE, cplx zI) {
  std::vector<cplx> Y;
  return detail::resolvent_last(m, detail::fast_sample(m, zF), zE, zI, Y);
}

inline cplx stability_value(const MRISRTableau& t, cplx zF, cplx zE, cplx zI) {
  return stability_value(MethodCoefficients(t), zF, zE, zI);
}

/// {z : |arg z - pi| <= angle, |z| <= radius}, angle in degrees.
struct SectorSpec {
  double angle = 0.0;
  double radius = 0.0;
};

/// Sector sampling: both boundary rays and the negative real axis with
/// `ray` log-spaced radii, `arc` points on the outer arc, and a
/// lattice_r x lattice_a log-radial interior lattice. Radii span
/// radius * 1e-4 .. radius.
struct SectorSampling {
  std::size_t ray = 32;
  std::size_t arc = 32;
  std::size_t lattice_r = 16;
  std::size_t lattice_a = 16;
};

inline std::vector<cplx> sector_samples(const SectorSpec& sec, const SectorSampling& smp = {}) {
  if (sec.angle < 0.0 || sec.angle > 90.0) throw PreconditionError("sector angle must lie in [0, 90] degrees");
  if (sec.radius < 0.0) throw PreconditionError("sector radius must be non-negative");
  std::vector<cplx> out{cplx(0.0, 0.0)};
  if (sec.radius == 0.0) return out;
  const double a = sec.angle * std::numbers::pi / 180.0;
  auto radius = [&](std::size_t k, std::size_t n) {
    if (n <= 1) return sec.radius;
    return sec.radius * std::pow(10.0, -4.0 * (1.0 - static_cast<double>(k) / static_cast<double>(n - 1)));
  };
  std::vector<double> rays{std::numbers::pi};
  if (a > 0.0) {
    rays.push_back(std::numbers::pi - a);
    rays.push_back(std::numbers::pi + a);
  }
  for (double th : rays)
    for (std::size_t k = 0; k < smp.ray; ++k) out.push_back(std::polar(radius(k, smp.ray), th));
  if (a > 0.0) {
    for (std::size_t k = 0; k < smp.arc; ++k) {
      const double th = std::numbers::pi - a + 2.0 * a * static_cast<double>(k) / static_cast<double>(std::max<std::size_t>(1, smp.arc - 1));
      out.push_back(std::polar(sec.radius, th));
    }
    for (std::size_t q = 0; q < smp.lattice_a; ++q) {
      const double th = std::numbers::pi - a + 2.0 * a * (static_cast<double>(q) + 0.5) / static_cast<double>(smp.lattice_a);
      for (std::size_t k = 0; k < smp.lattice_r; ++k) out.push_back(std::polar(radius(k, smp.lattice_r), th));
    }
  }
  return out;
}

/// Rectangle of the complex plane sampled on an nx x ny grid of nodes
/// (both edges included).
struct Window {
  double re_min = -5.0, re_max = 0.0;
  double im_min = -5.0, im_max = 5.0;
  std::size_t nx = 100, ny = 100;

  cplx node(std::size_t ix, std::size_t iy) const {
    const double re = re_min + (re_max - re_min) * static_cast<double>(ix) / static_cast<double>(nx - 1);
    const double im = im_min + (im_max - im_min) * static_cast<double>(iy) / static_cast<double>(ny - 1);
    return {re, im};
  }
};

enum class ScanKind { Joint, Explicit, Implicit };

struct ScanOptions {
  SectorSampling sampling;
  double tol = 1e-12;
  /// Stop evaluating a cell at its first violation; maxAbsR is then a lower
  /// bound for unstable cells.
  bool early_exit = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Indicator grid, row-major with ix fastest.
struct RegionScan {
  std::string method;
  ScanKind kind = ScanKind::Joint;
  SectorSpec fast, implicit;
  Window window;
  ScanOptions options;
  std::vector<std::uint8_t> stable;
  std::vector<double> max_abs_r;

  std::size_t stable_count() const { return static_cast<std::size_t>(std::count(stable.begin(), stable.end(), 1)); }
  bool indicator(std::size_t ix, std::size_t iy) const { return stable[iy * window.nx + ix] != 0; }
};

namespace detail {

/// For each node z of the window evaluate max |R| over every fast sample and
/// every `other` sample, with z placed in the explicit (kind Joint/Explicit)
/// or implicit slot.
inline RegionScan run_scan(const MethodCoefficients& m, ScanKind kind, const SectorSpec& fast, const SectorSpec& other,
                           const Window& w, const ScanOptions& opt) {
  if (w.nx < 2 || w.ny < 2) throw PreconditionError("scan resolution must be at least 2 per axis");
  RegionScan scan;
  scan.method = m.name;
  scan.kind = kind;
  scan.fast = fast;
  scan.implicit = other;
  scan.window = w;
  scan.options = opt;
  const auto zf = sector_samples(fast, opt.sampling);
  const auto zo = kind == ScanKind::Joint ? sector_samples(other, opt.sampling) : std::vector<cplx>{cplx(0.0)};
  std::vector<FastSample> fs;
  fs.reserve(zf.size());
  for (const auto& z : zf) fs.push_back(fast_sample(m, z));

  const std::size_t cells = w.nx * w.ny;
  scan.stable.assign(cells, 0);
  scan.max_abs_r.assign(cells, 0.0);
  const double bound = 1.0 + opt.tol;
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<cplx> Y;
    for (std::size_t cell = begin; cell < end; ++cell) {
      const cplx z = w.node(cell % w.nx, cell / w.nx);
      double worst = 0.0;
      bool done = false;
      for (std::size_t a = 0; a < fs.size() && !done; ++a)
        for (const cplx& zz : zo) {
          const cplx zE = kind == ScanKind::Implicit ? cplx(0.0) : z;
          const cplx zI = kind == ScanKind::Implicit ? z : (kind == ScanKind::Joint ? zz : cplx(0.0));
          const double r = std::abs(resolvent_last(m, fs[a], zE, zI, Y));
          if (!(r <= worst)) worst = std::isnan(r) ? std::numeric_limits<double>::infinity() : r;
          if (opt.early_exit && worst > bound) {
            done = true;
            break;
          }
        }
      scan.max_abs_r[cell] = worst;
      scan.stable[cell] = worst <= bound ? 1 : 0;
    }
  };
  unsigned nt = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  nt = static_cast<unsigned>(std::min<std::size_t>(nt, cells));
  if (nt <= 1) {
    work(0, cells);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells + nt - 1) / nt;
    for (unsigned q = 0; q < nt; ++q) {
      const std::size_t b = q * chunk, e = std::min(cells, b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return scan;
}

}  // namespace detail

/// Joint region: zE over the window, max over zF in `fast` and zI in
/// `implicit`.
inline RegionScan scan_joint_region(const MethodCoefficients& m, const SectorSpec& fast, const SectorSpec& implicit,
                                    const Window& w, const ScanOptions& opt = {}) {
  return detail::run_scan(m, ScanKind::Joint, fast, implicit, w, opt);
}

/// which = Explicit scans zE with zI = 0; which = Implicit scans zI with
/// zE = 0.
inline RegionScan scan_component_region(const MethodCoefficients& m, ScanKind which, const SectorSpec& fast,
                                        const Window& w, const ScanOptions& opt = {}) {
  if (which == ScanKind::Joint) throw PreconditionError("scan_component_region needs Explicit or Implicit");
  return detail::run_scan(m, which, fast, SectorSpec{0.0, 0.0}, w, opt);
}

inline std::string to_string(ScanKind k) {
  switch (k) {
    case ScanKind::Joint: return "joint";
    case ScanKind::Explicit: return "explicit";
    case ScanKind::Implicit: return "implicit";
  }
  return "unknown";
}

}  // namespace mrisr
