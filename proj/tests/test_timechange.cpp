#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tclev/prm.hpp"
#include "tclev/quadrature.hpp"
#include "tclev/timechange.hpp"

using namespace tclev;

namespace {

// independent oracle: eps(s; t1, t2) = integral of e^{-lam (u - s)} over
// [max(s, t1), t2]
double ou_weight_quadrature(double s, double t1, double t2, double lam) {
  if (s > t2) return 0.0;
  const double lo = std::max(s, t1);
  auto f = [&](double u) -> cplx { return {std::exp(-lam * (u - s)), 0.0}; };
  return integrate_adaptive(f, lo, t2, 1e-13, 100000).value.real();
}

}  // namespace

TEST_CASE("ou_weight endpoints and known value") {
  CHECK(ou_weight(1.0, 0.0, 1.0, 1.0) == 0.0);
  CHECK(ou_weight(2.5, 0.0, 1.0, 1.0) == 0.0);
  CHECK(ou_weight(0.0, 0.0, 1.0, 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
  CHECK(ou_weight(0.0, 0.0, 1.0, 1.0) == doctest::Approx(0.6321205588285577).epsilon(1e-12));
}

TEST_CASE("ou_weight matches the integral oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> us(-3.0, 2.5), ul(0.3, 2.5);
  for (int rep = 0; rep < 40; ++rep) {
    const double t1 = us(rng);
    const double t2 = t1 + ul(rng);
    const double s = us(rng);
    const double lam = ul(rng);
    CHECK(ou_weight(s, t1, t2, lam) ==
          doctest::Approx(ou_weight_quadrature(s, t1, t2, lam)).epsilon(1e-10));
  }
}

TEST_CASE("ou_weight continuity and bound") {
  const double t1 = 0.7, t2 = 1.9, lam = 1.3;
  const double eps = 1e-9;
  CHECK(std::abs(ou_weight(t1 - eps, t1, t2, lam) - ou_weight(t1 + eps, t1, t2, lam)) < 1e-8);
  CHECK(std::abs(ou_weight(t2 - eps, t1, t2, lam)) < 1e-8);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> us(-6.0, 2.0);
  const double cap = std::min(t2 - t1, 1.0 / lam);
  for (int i = 0; i < 200; ++i) {
    const double w = ou_weight(us(rng), t1, t2, lam);
    CHECK(w >= 0.0);
    CHECK(w <= cap + 1e-12);
  }
}

TEST_CASE("ou_weight rises to t1 then decays to zero at t2") {
  const double t1 = 0.0, t2 = 1.0, lam = 0.8;
  double prev = ou_weight(-4.0, t1, t2, lam);
  for (double s = -3.9; s < t1; s += 0.1) {
    const double cur = ou_weight(s, t1, t2, lam);
    CHECK(cur >= prev - 1e-14);
    prev = cur;
  }
  prev = ou_weight(t1, t1, t2, lam);
  for (double s = t1 + 0.05; s <= t2; s += 0.05) {
    const double cur = ou_weight(s, t1, t2, lam);
    CHECK(cur <= prev + 1e-14);
    prev = cur;
  }
}

TEST_CASE("telescoping sum identity") {
  const double lam = 1.4, delta = 0.7;
  const std::size_t n = 6;
  for (double s : {-2.3, -0.5, 0.0, 0.31, 1.8, 3.9}) {
    double sum = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      sum += ou_weight(s, (i - 1) * delta, i * delta, lam);
    const double direct = ou_weight(s, 0.0, static_cast<double>(n) * delta, lam);
    CHECK(sum == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("interval kernels: f = h + g pointwise, both factor modes") {
  const double delta = 1.0;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> us(-2.0, 3.0), ux(0.1, 3.0);

  const VolSpec common = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.7);
  const VolSpec indep = VolSpec::gamma_ou_independent(1.0, 2.0, 1.0, 2.0, 1.0, 3.0);
  for (const VolSpec& vol : {common, indep}) {
    for (std::size_t i = 1; i <= 3; ++i) {
      const BiKernel h = interval_kernel(vol, i, delta, KernelPart::H);
      const BiKernel g = interval_kernel(vol, i, delta, KernelPart::G);
      const BiKernel f = interval_kernel(vol, i, delta, KernelPart::F);
      for (int rep = 0; rep < 100; ++rep) {
        const double s = us(rng), x = ux(rng);
        for (int factor = 0; factor < 2; ++factor) {
          const cplx sum = h.eval(factor, s, x) + g.eval(factor, s, x);
          CHECK(std::abs(f.eval(factor, s, x) - sum) < 1e-14);
        }
      }
    }
  }
}

TEST_CASE("zero loading kills the g kernel") {
  const VolSpec vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.0);
  const BiKernel g = interval_kernel(vol, 1, 1.0, KernelPart::G);
  CHECK(g.f1.empty());
  CHECK(g.f2.empty());
}

TEST_CASE("kernel evaluation example") {
  // h_1 at (s=-0.5, x=2), Delta=1, lam=1: 2 (e^{-1/2} - e^{-3/2})
  const VolSpec vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.0);
  const BiKernel h = interval_kernel(vol, 1, 1.0, KernelPart::H);
  const double expect = 2.0 * (std::exp(-0.5) - std::exp(-1.5));
  CHECK(h.eval(0, -0.5, 2.0).real() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(h.eval(0, -0.5, 2.0).real() ==
        doctest::Approx(2.0 * ou_weight_quadrature(-0.5, 0.0, 1.0, 1.0)).epsilon(1e-10));
}

TEST_CASE("functional_from_points basics and telescoping") {
  PointSet empty;
  const VolSpec vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.0);
  const BiKernel h1 = interval_kernel(vol, 1, 1.0, KernelPart::H);
  CHECK(functional_from_points(empty, h1.f1) == 0.0);

  PointSet single;
  single.points = {{-0.5, 2.0}};
  const double v = 2.0 * (std::exp(-0.5) - std::exp(-1.5));
  CHECK(functional_from_points(single, h1.f1) == doctest::Approx(v).epsilon(1e-12));

  // per-interval sums telescope to the whole-window functional exactly
  std::mt19937_64 rng(23);
  const auto nu = vol.factor_intensity(0, 4.0);
  const PointSet ps = sample_points(nu, rng);
  const std::size_t n = 4;
  double per_interval = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    per_interval += functional_from_points(ps, interval_kernel(vol, i, 1.0, KernelPart::H).f1);
  FactorKernel whole;
  whole.lambda_ou = vol.lambda_ou;
  whole.add({1.0, 0.0}, 0.0, 4.0);
  CHECK(per_interval == doctest::Approx(functional_from_points(ps, whole)).epsilon(1e-12));
}

TEST_CASE("sampled interval mean matches the truncated stationary mean") {
  const double lam = 1.0, a = 2.0, b = 1.0, delta = 1.0;
  VolSpec vol = VolSpec::gamma_ou_common(lam, a, b, 0.0);
  vol.s_max = 6.0;  // short warm-up so the boundary correction is visible
  const auto nu = vol.factor_intensity(0, delta);
  const BiKernel h = interval_kernel(vol, 1, delta, KernelPart::H);

  std::mt19937_64 rng(71);
  const std::size_t reps = 100'000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const double tau = functional_from_points(sample_points(nu, rng), h.f1);
    sum += tau;
    sum2 += tau * tau;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  const double expect = truncated_interval_mean(a, b, lam, 6.0, 0.0, delta);
  CHECK(std::abs(mean - expect) < 4.0 * se);
  // the truncated mean approaches (a/b) delta as the warm-up deepens
  CHECK(truncated_interval_mean(a, b, lam, 40.0, 0.0, delta) ==
        doctest::Approx((a / b) * delta).epsilon(1e-12));
}

TEST_CASE("stationary tau mean from the kernel integral") {
  const double lam = 1.3, a = 1.7, b = 2.2, delta = 0.8;
  // integral of eps over (-inf, t2] equals (t2-t1)/lam; with mark mean 1/b
  // and arrival rate a lam this gives E[tau_i] = (a/b) delta
  auto f = [&](double s) -> cplx { return {ou_weight(s, 0.0, delta, lam), 0.0}; };
  const double integral = integrate_adaptive(f, -40.0, delta, 1e-12, 200000).value.real();
  CHECK(a * lam * (1.0 / b) * integral == doctest::Approx((a / b) * delta).epsilon(1e-9));
}
