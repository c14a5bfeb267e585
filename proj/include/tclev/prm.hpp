#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/quadrature.hpp"

namespace tclev {

// One realized point of N: a jump at time s with mark (size) x > 0.
struct PrmPoint {
  double s = 0.0;
  double x = 0.0;
};

struct PointSet {
  std::vector<PrmPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class MarkLaw { Exponential, Tabulated };

// Intensity nu(ds, dx) = r(s) ds * mark(dx) on [-s_depth, horizon] x (0, inf).
// The time rate is piecewise constant; marks are Exponential(b) or a discrete
// tabulated law.
struct IntensityMeasure {
  std::vector<double> rate_breaks;  // ascending, size = rate_values.size() + 1
  std::vector<double> rate_values;  // rate on [breaks[i], breaks[i+1])
  MarkLaw mark_law = MarkLaw::Exponential;
  double mark_rate = 1.0;                // Exponential(b)
  std::vector<double> mark_grid;         // Tabulated support
  std::vector<double> mark_weights;      // Tabulated probabilities, sum to 1

  static IntensityMeasure constant_rate_exp_marks(double rate, double s_lo, double s_hi,
                                                  double b) {
    IntensityMeasure m;
    m.rate_breaks = {s_lo, s_hi};
    m.rate_values = {rate};
    m.mark_law = MarkLaw::Exponential;
    m.mark_rate = b;
    m.validate();
    return m;
  }

  void validate() const {
    if (rate_breaks.size() != rate_values.size() + 1 || rate_values.empty())
      throw std::invalid_argument("IntensityMeasure: malformed piecewise rate");
    for (std::size_t i = 0; i + 1 < rate_breaks.size(); ++i)
      if (!(rate_breaks[i] < rate_breaks[i + 1]))
        throw std::invalid_argument("IntensityMeasure: rate breaks must be increasing");
    for (double r : rate_values)
      if (!(r >= 0.0)) throw std::invalid_argument("IntensityMeasure: negative rate");
    if (mark_law == MarkLaw::Exponential) {
      if (!(mark_rate > 0.0)) throw std::invalid_argument("IntensityMeasure: mark rate must be > 0");
    } else {
      if (mark_grid.empty() || mark_grid.size() != mark_weights.size())
        throw std::invalid_argument("IntensityMeasure: malformed tabulated mark law");
      double sum = 0.0;
      for (double w : mark_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("IntensityMeasure: negative mark weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("IntensityMeasure: mark weights must sum to 1");
    }
  }

  double s_lo() const { return rate_breaks.front(); }
  double s_hi() const { return rate_breaks.back(); }

  double total_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rate_values.size(); ++i)
      m += rate_values[i] * (rate_breaks[i + 1] - rate_breaks[i]);
    return m;
  }

  double mark_mean() const {
    if (mark_law == MarkLaw::Exponential) return 1.0 / mark_rate;
    double m = 0.0;
    for (std::size_t j = 0; j < mark_grid.size(); ++j) m += mark_grid[j] * mark_weights[j];
    return m;
  }
};

// Kernel on the mark space: f(s, x), complex valued.
using Kernel = std::function<cplx(double, double)>;

// Poisson randomness, or a frozen point configuration: the Deterministic
// variant replaces E[e^{-N(f)}] = e^{-Lambda(f)} by e^{-sum_j f(s_j, x_j)}.
struct MeasureKind {
  enum class Tag { Poisson, Deterministic };
  Tag tag = Tag::Poisson;
  IntensityMeasure intensity;
  PointSet points;   // factor-1 coordinate
  PointSet points2;  // factor-2 coordinate (IndependentFactors models)

  // the likelihood derives its Poisson intensity from the model's VolSpec
  static MeasureKind poisson() {
    MeasureKind m;
    m.tag = Tag::Poisson;
    return m;
  }
  static MeasureKind poisson(IntensityMeasure nu) {
    MeasureKind m;
    m.tag = Tag::Poisson;
    m.intensity = std::move(nu);
    return m;
  }
  static MeasureKind deterministic(PointSet ps, PointSet ps2 = {}) {
    MeasureKind m;
    m.tag = Tag::Deterministic;
    m.points = std::move(ps);
    m.points2 = std::move(ps2);
    return m;
  }
};

// Draws a realization of N: Poisson(total mass) many points, times by
// inversion of the cumulative rate, marks from the mark law. Points are
// returned sorted by time.
inline PointSet sample_points(const IntensityMeasure& nu, std::mt19937_64& rng) {
  nu.validate();
  const double mass = nu.total_mass();
  PointSet ps;
  if (mass <= 0.0) return ps;

  std::vector<double> cum(nu.rate_values.size() + 1, 0.0);
  for (std::size_t i = 0; i < nu.rate_values.size(); ++i)
    cum[i + 1] = cum[i] + nu.rate_values[i] * (nu.rate_breaks[i + 1] - nu.rate_breaks[i]);

  std::poisson_distribution<long> pois(mass);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const long count = pois(rng);
  ps.points.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) {
    const double u = unif(rng) * mass;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t seg = static_cast<std::size_t>(std::distance(cum.begin(), it));
    seg = std::min(std::max<std::size_t>(seg, 1), nu.rate_values.size()) - 1;
    const double s = nu.rate_breaks[seg] + (u - cum[seg]) / nu.rate_values[seg];

    double x;
    if (nu.mark_law == MarkLaw::Exponential) {
      std::exponential_distribution<double> expo(nu.mark_rate);
      x = expo(rng);
    } else {
      double v = unif(rng), acc = 0.0;
      std::size_t j = 0;
      for (; j + 1 < nu.mark_weights.size(); ++j) {
        acc += nu.mark_weights[j];
        if (v <= acc) break;
      }
      x = nu.mark_grid[j];
    }
    ps.points.push_back({s, x});
  }
  std::sort(ps.points.begin(), ps.points.end(),
            [](const PrmPoint& l, const PrmPoint& r) { return l.s < r.s; });
  return ps;
}

// Laplace functional Lambda(f) = integral (1 - e^{-f}) dnu by nested adaptive
// quadrature: outer over s, inner over the mark. Requires Re f >= 0 on the
// support (up to q.s_tol), which keeps |e^{-N(f)}| <= 1.
inline QuadResult laplace_functional_generic(const IntensityMeasure& nu, const Kernel& f,
                                             const QuadConfig& q) {
  nu.validate();
  const double inner_tol = 0.1 * q.s_tol;
  std::size_t evals_used = 0;

  auto check_re = [&](double s, double x) {
    // evaluates f once and validates the precondition
    const cplx v = f(s, x);
    if (v.real() < -q.s_tol)
      throw std::domain_error("laplace_functional_generic: Re f = " + std::to_string(v.real()) +
                              " < 0 at (s=" + std::to_string(s) + ", x=" + std::to_string(x) + ")");
    return v;
  };

  auto inner = [&](double s) -> cplx {
    if (nu.mark_law == MarkLaw::Tabulated) {
      cplx acc{0.0, 0.0};
      for (std::size_t j = 0; j < nu.mark_grid.size(); ++j) {
        acc += nu.mark_weights[j] * (1.0 - std::exp(-check_re(s, nu.mark_grid[j])));
        ++evals_used;
      }
      return acc;
    }
    const double b = nu.mark_rate;
    // |1 - e^{-f}| <= 2 for Re f >= 0, so the tail beyond x_max is below
    // 2 e^{-b x_max}
    const double x_max = std::log(2.0 / inner_tol) / b;
    auto g = [&](double x) -> cplx {
      return (1.0 - std::exp(-check_re(s, x))) * b * std::exp(-b * x);
    };
    const QuadResult r = integrate_adaptive(g, 0.0, x_max, inner_tol,
                                            q.max_evals > evals_used ? q.max_evals - evals_used : 0);
    evals_used += r.evals;
    return r.value;
  };

  auto outer = [&](double s) -> cplx {
    double rate = 0.0;
    for (std::size_t i = 0; i < nu.rate_values.size(); ++i)
      if (s >= nu.rate_breaks[i] && s <= nu.rate_breaks[i + 1]) {
        rate = nu.rate_values[i];
        break;
      }
    if (rate == 0.0) return {0.0, 0.0};
    return rate * inner(s);
  };

  // integrate each constant-rate segment separately so the rate jumps never
  // sit inside a panel
  QuadResult total;
  for (std::size_t i = 0; i < nu.rate_values.size(); ++i) {
    if (nu.rate_values[i] == 0.0) continue;
    const QuadResult r = integrate_adaptive(outer, nu.rate_breaks[i], nu.rate_breaks[i + 1],
                                            q.s_tol, q.max_evals);
    total.value += r.value;
    total.abs_err += r.abs_err;
    total.evals += r.evals;
  }
  total.evals += evals_used;
  return total;
}

// Semi-analytic fast path for kernels f(s, x) = x K(s) under Exponential(b)
// marks: the mark integral collapses to K(s) / (b + K(s)), leaving a single
// 1-D quadrature over s. Requires Re K > -b along the support.
inline QuadResult laplace_functional_exp_marks(const std::function<double(double)>& time_rate,
                                               double b,
                                               const std::function<cplx(double)>& K,
                                               double s_lo, double s_hi, const QuadConfig& q) {
  if (!(b > 0.0)) throw std::invalid_argument("laplace_functional_exp_marks: b must be > 0");
  auto g = [&](double s) -> cplx {
    const cplx k = K(s);
    const cplx denom = b + k;
    if (std::abs(denom) < q.pole_tol || denom.real() <= 0.0)
      throw pole_error("laplace_functional_exp_marks: b + K(s) too close to the pole at s=" +
                       std::to_string(s));
    return time_rate(s) * k / denom;
  };
  return integrate_adaptive(g, s_lo, s_hi, q.s_tol, q.max_evals);
}

// -log E[e^{-N(f)}] under either measure kind: Lambda(f) for Poisson, the
// plain point sum for Deterministic.
inline cplx neg_log_mgf(const MeasureKind& measure, const Kernel& f, const QuadConfig& q) {
  if (measure.tag == MeasureKind::Tag::Deterministic) {
    cplx acc{0.0, 0.0};
    for (const PrmPoint& p : measure.points.points) acc += f(p.s, p.x);
    return acc;
  }
  return laplace_functional_generic(measure.intensity, f, q).value;
}

}  // namespace tclev
