#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/prm.hpp"

namespace tclev {

// Integrated OU decay weight: a volatility jump at time s contributes
// x * eps(s; t1, t2) to the integrated variance over (t1, t2], where
//
//   eps = (1 - e^{-lam (t2-s)}) / lam                       for t1 < s <= t2
//   eps = (e^{-lam (t1-s)} - e^{-lam (t2-s)}) / lam         for s <= t1
//   eps = 0                                                 for s > t2.
//
// Continuous in s, bounded by min(t2-t1, 1/lam).
inline double ou_weight(double s, double t1, double t2, double lambda_ou) {
  if (!(t1 < t2)) throw std::invalid_argument("ou_weight: requires t1 < t2");
  if (s > t2) return 0.0;
  if (s > t1) return -std::expm1(-lambda_ou * (t2 - s)) / lambda_ou;
  return std::exp(-lambda_ou * (t1 - s)) * (-std::expm1(-lambda_ou * (t2 - t1))) / lambda_ou;
}

enum class FactorMode { IndependentFactors, CommonFactor };

// Gamma-OU background: volatility jumps arrive at rate a*lambda_ou with
// Exponential(b) marks and decay at rate lambda_ou, so the stationary
// instantaneous variance is Gamma(a, b) and E[tau_i] = (a/b) * Delta.
// Two factor layouts: IndependentFactors drives gamma_i by a second,
// independent coordinate with its own triple; CommonFactor sets
// g_i = kappa * h_i on the shared coordinate.
struct VolSpec {
  double lambda_ou = 1.0;
  double a = 1.0;
  double b = 1.0;
  FactorMode mode = FactorMode::CommonFactor;
  double kappa = 0.0;       // CommonFactor loading
  double lambda_ou2 = 1.0;  // IndependentFactors second triple
  double a2 = 1.0;
  double b2 = 1.0;
  double s_max = 0.0;  // warm-up depth; 0 = auto from e^{-lam S} <= 1e-10

  static VolSpec gamma_ou_common(double lambda_ou, double a, double b, double kappa) {
    VolSpec v;
    v.lambda_ou = lambda_ou;
    v.a = a;
    v.b = b;
    v.mode = FactorMode::CommonFactor;
    v.kappa = kappa;
    v.validate();
    return v;
  }

  static VolSpec gamma_ou_independent(double lambda_ou, double a, double b, double lambda_ou2,
                                      double a2, double b2) {
    VolSpec v;
    v.lambda_ou = lambda_ou;
    v.a = a;
    v.b = b;
    v.mode = FactorMode::IndependentFactors;
    v.lambda_ou2 = lambda_ou2;
    v.a2 = a2;
    v.b2 = b2;
    v.validate();
    return v;
  }

  void validate() const {
    if (!(lambda_ou > 0.0) || !(a > 0.0) || !(b > 0.0))
      throw std::invalid_argument("VolSpec: lambda_ou, a, b must be > 0");
    if (mode == FactorMode::CommonFactor) {
      if (!(kappa >= 0.0)) throw std::invalid_argument("VolSpec: kappa must be >= 0");
    } else {
      if (!(lambda_ou2 > 0.0) || !(a2 > 0.0) || !(b2 > 0.0))
        throw std::invalid_argument("VolSpec: second factor rates must be > 0");
    }
    if (!(s_max >= 0.0)) throw std::invalid_argument("VolSpec: s_max must be >= 0");
  }

  bool has_second_factor() const { return mode == FactorMode::IndependentFactors; }

  // default depth makes the dropped pre-sample weight e^{-lam S} <= 1e-10
  double warmup_depth(double lambda) const {
    if (s_max > 0.0) return s_max;
    return std::log(1e10) / lambda;
  }

  double factor_lambda(int factor) const { return factor == 0 ? lambda_ou : lambda_ou2; }
  double factor_a(int factor) const { return factor == 0 ? a : a2; }
  double factor_b(int factor) const { return factor == 0 ? b : b2; }

  // Poisson intensity of one factor coordinate over [-S, horizon]
  IntensityMeasure factor_intensity(int factor, double horizon) const {
    const double lam = factor_lambda(factor);
    return IntensityMeasure::constant_rate_exp_marks(factor_a(factor) * lam,
                                                     -warmup_depth(lam), horizon,
                                                     factor_b(factor));
  }
};

// Linear combination of per-interval OU kernels on one factor coordinate:
// k(s, x) = x * sum_j coef_j * eps(s; t1_j, t2_j).
struct FactorKernel {
  double lambda_ou = 1.0;
  std::vector<cplx> coef;
  std::vector<double> t1;
  std::vector<double> t2;

  bool empty() const { return coef.empty(); }

  void add(cplx c, double lo, double hi) {
    coef.push_back(c);
    t1.push_back(lo);
    t2.push_back(hi);
  }

  cplx eval(double s, double x) const {
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < coef.size(); ++j)
      acc += coef[j] * ou_weight(s, t1[j], t2[j], lambda_ou);
    return acc * x;
  }
};

// Kernel on the two-coordinate mark space: tau-type terms live on factor 1,
// gamma-type terms on factor 2 (IndependentFactors) or back on factor 1
// (CommonFactor).
struct BiKernel {
  FactorKernel f1;
  FactorKernel f2;

  cplx eval(int factor, double s, double x) const {
    return factor == 0 ? f1.eval(s, x) : f2.eval(s, x);
  }

  BiKernel& operator+=(const BiKernel& o) {
    for (std::size_t j = 0; j < o.f1.coef.size(); ++j) f1.add(o.f1.coef[j], o.f1.t1[j], o.f1.t2[j]);
    for (std::size_t j = 0; j < o.f2.coef.size(); ++j) f2.add(o.f2.coef[j], o.f2.t1[j], o.f2.t2[j]);
    f1.lambda_ou = o.f1.lambda_ou;
    f2.lambda_ou = o.f2.lambda_ou;
    return *this;
  }
};

enum class KernelPart { H, G, F };

// Kernel of the i-th interval time change (1-based i): h_i gives tau_i,
// g_i gives gamma_i, f_i = h_i + g_i gives tau*_i.
inline BiKernel interval_kernel(const VolSpec& vol, std::size_t i, double delta,
                                KernelPart which) {
  if (i < 1) throw std::invalid_argument("interval_kernel: interval index is 1-based");
  if (!(delta > 0.0)) throw std::invalid_argument("interval_kernel: delta must be > 0");
  const double lo = static_cast<double>(i - 1) * delta;
  const double hi = static_cast<double>(i) * delta;
  BiKernel k;
  k.f1.lambda_ou = vol.lambda_ou;
  k.f2.lambda_ou = vol.has_second_factor() ? vol.lambda_ou2 : vol.lambda_ou;
  if (which == KernelPart::H || which == KernelPart::F) k.f1.add({1.0, 0.0}, lo, hi);
  if (which == KernelPart::G || which == KernelPart::F) {
    if (vol.has_second_factor())
      k.f2.add({1.0, 0.0}, lo, hi);
    else if (vol.kappa > 0.0)
      k.f1.add({vol.kappa, 0.0}, lo, hi);
  }
  return k;
}

// N(kernel) for a realized point set: sum_j kernel(s_j, x_j).
inline double functional_from_points(const PointSet& ps,
                                     const std::function<double(double, double)>& kernel) {
  double acc = 0.0;
  for (const PrmPoint& p : ps.points) acc += kernel(p.s, p.x);
  return acc;
}

// Same, for a real single-factor OU kernel.
inline double functional_from_points(const PointSet& ps, const FactorKernel& k) {
  double acc = 0.0;
  for (const PrmPoint& p : ps.points) acc += k.eval(p.s, p.x).real();
  return acc;
}

// E[N(h_i)] when sampling is truncated at -S: the stationary value
// (a/b)(t2-t1) minus the dropped pre-sample weight.
inline double truncated_interval_mean(double a, double b, double lambda, double s_depth,
                                      double t1, double t2) {
  return (a / b) * ((t2 - t1) - std::exp(-lambda * s_depth) * ou_weight(0.0, t1, t2, lambda));
}

}  // namespace tclev
