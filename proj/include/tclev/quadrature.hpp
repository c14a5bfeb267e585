#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <set>
#include <vector>

#include "tclev/common.hpp"

namespace tclev {

// Shared knobs for every quadrature in the library. y_* fields steer the
// oscillatory integral over the Fourier variables, s_* fields the
// one-dimensional Laplace-functional integrals.
struct QuadConfig {
  double y_radius = 0.0;   // truncation radius per dimension; 0 = auto
  double y_tol = 0.0;      // absolute tolerance for the y-integral; 0 = auto
  double s_tol = 1e-10;    // absolute tolerance for 1-D Laplace quadratures
  double pole_tol = 1e-8;  // minimum allowed |b + K(s)| in the mark reduction
  double im_ratio_tol = 1e-6;          // |Im/Re| diagnostic threshold
  std::size_t max_evals = 20'000'000;  // integrand-evaluation budget per call
  unsigned threads = 1;                // worker cap for lattice evaluation
};

// The truncation rule bounds the absolute tail by boundary modulus times
// outside volume, which ignores oscillatory cancellation; for kernels with
// |y|^{-2a} tails the radius it demands grows quickly with the dimension.
// The auto tolerance is therefore dimension-aware.
inline double resolved_y_tol(const QuadConfig& q, std::size_t dims) {
  if (q.y_tol > 0.0) return q.y_tol;
  if (dims <= 1) return 1e-8;
  if (dims == 2) return 1e-3;
  return 1e-2;
}

struct QuadResult {
  cplx value{0.0, 0.0};
  double abs_err = 0.0;
  std::size_t evals = 0;
};

namespace detail {

// Gauss-Kronrod (7,15) nodes and weights on [-1,1].
inline constexpr double gk_x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double gk_wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gk_wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gk15(const F& f, double a, double b, cplx& integral, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  cplx ik{0.0, 0.0}, ig{0.0, 0.0};
  const cplx fc = f(c);
  ik += gk_wk[7] * fc;
  ig += gk_wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const cplx lo = f(c - h * gk_x[j]);
    const cplx hi = f(c + h * gk_x[j]);
    ik += gk_wk[j] * (lo + hi);
    if (j % 2 == 1) ig += gk_wg[j / 2] * (lo + hi);
  }
  integral = ik * h;
  err = std::abs(ik - ig) * std::abs(h);
}

struct Segment {
  double a, b, err;
  cplx value;
  bool operator<(const Segment& o) const {
    if (err != o.err) return err > o.err;  // largest error first
    return a < o.a;
  }
};

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration of a complex-valued integrand
// over [a, b] to absolute tolerance. Throws budget_error when max_evals is hit
// before the tolerance is met.
template <typename F>
QuadResult integrate_adaptive(const F& f, double a, double b, double abs_tol,
                              std::size_t max_evals) {
  QuadResult res;
  if (a == b) return res;
  std::multiset<detail::Segment> segs;
  auto push = [&](double lo, double hi) {
    detail::Segment s{lo, hi, 0.0, cplx{}};
    detail::gk15(f, lo, hi, s.value, s.err);
    res.evals += 15;
    segs.insert(s);
  };
  push(a, b);
  for (;;) {
    double total_err = 0.0;
    for (const auto& s : segs) total_err += s.err;
    if (total_err <= abs_tol) break;
    if (res.evals + 30 > max_evals)
      throw budget_error("integrate_adaptive: evaluation budget exhausted (err=" +
                         std::to_string(total_err) + ", tol=" + std::to_string(abs_tol) + ")");
    auto worst = segs.begin();
    const double lo = worst->a, hi = worst->b;
    segs.erase(worst);
    const double mid = 0.5 * (lo + hi);
    push(lo, mid);
    push(mid, hi);
  }
  for (const auto& s : segs) {
    res.value += s.value;
    res.abs_err += s.err;
  }
  return res;
}

}  // namespace tclev
