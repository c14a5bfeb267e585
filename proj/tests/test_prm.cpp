#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "tclev/prm.hpp"
#include "tclev/timechange.hpp"

using namespace tclev;

namespace {

QuadConfig tight() {
  QuadConfig q;
  q.s_tol = 1e-11;
  return q;
}

}  // namespace

TEST_CASE("Lambda(0) = 0") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(2.0, -3.0, 1.0, 1.0);
  const Kernel zero = [](double, double) { return cplx{0.0, 0.0}; };
  const QuadResult r = laplace_functional_generic(nu, zero, tight());
  CHECK(std::abs(r.value) < 1e-12);
}

TEST_CASE("constant kernel pulls out of the integral") {
  // total mass 3, f == 1 on the support: Lambda = 3 (1 - e^{-1})
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.5, 0.0, 2.0, 1.0);
  CHECK(nu.total_mass() == doctest::Approx(3.0));
  const Kernel one = [](double, double) { return cplx{1.0, 0.0}; };
  const QuadResult r = laplace_functional_generic(nu, one, tight());
  CHECK(r.value.real() == doctest::Approx(3.0 * (1.0 - std::exp(-1.0))).epsilon(1e-10));
  CHECK(r.value.real() == doctest::Approx(1.8963616749713092).epsilon(1e-9));
  CHECK(std::abs(r.value.imag()) < 1e-12);
}

TEST_CASE("exponential-mark reduction, constant K") {
  const QuadConfig q = tight();
  auto rate = [](double) { return 2.0; };

  const auto zero = laplace_functional_exp_marks(rate, 1.0, [](double) { return cplx{0.0, 0.0}; },
                                                 0.0, 1.0, q);
  CHECK(std::abs(zero.value) < 1e-13);

  // a K0 / (b + K0): a=2, b=1, K0=1 -> 1
  const auto real_k = laplace_functional_exp_marks(rate, 1.0, [](double) { return cplx{1.0, 0.0}; },
                                                   0.0, 1.0, q);
  CHECK(real_k.value.real() == doctest::Approx(1.0).epsilon(1e-10));

  // K0 = i: 2i/(1+i) = 1 + i
  const auto imag_k = laplace_functional_exp_marks(rate, 1.0, [](double) { return cplx{0.0, 1.0}; },
                                                   0.0, 1.0, q);
  CHECK(imag_k.value.real() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(imag_k.value.imag() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("generic quadrature agrees with the exponential-mark reduction") {
  // Gamma-OU interval kernels with complex coefficients, both code paths
  const double lam = 1.0, b = 1.0, arr = 2.0 * lam;
  const double s_lo = -12.0, s_hi = 2.0;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> re(0.05, 1.2), im(-1.0, 1.0);
  for (int rep = 0; rep < 6; ++rep) {
    const cplx c1{re(rng), im(rng)};
    const cplx c2{re(rng), im(rng)};
    auto K = [&](double s) {
      return c1 * ou_weight(s, 0.0, 1.0, lam) + c2 * ou_weight(s, 1.0, 2.0, lam);
    };
    auto nu = IntensityMeasure::constant_rate_exp_marks(arr, s_lo, s_hi, b);
    const Kernel f = [&](double s, double x) { return x * K(s); };
    const QuadResult generic = laplace_functional_generic(nu, f, tight());
    const QuadResult fast = laplace_functional_exp_marks([&](double) { return arr; }, b, K, s_lo,
                                                         s_hi, tight());
    CHECK(std::abs(generic.value - fast.value) < 1e-8);
  }
}

TEST_CASE("tabulated marks against a hand sum") {
  IntensityMeasure nu;
  nu.rate_breaks = {0.0, 1.0};
  nu.rate_values = {1.5};
  nu.mark_law = MarkLaw::Tabulated;
  nu.mark_grid = {1.0, 2.0};
  nu.mark_weights = {0.5, 0.5};
  nu.validate();
  const Kernel f = [](double, double x) { return cplx{x, 0.0}; };
  const QuadResult r = laplace_functional_generic(nu, f, tight());
  const double expect = 1.5 * (0.5 * (1.0 - std::exp(-1.0)) + 0.5 * (1.0 - std::exp(-2.0)));
  CHECK(r.value.real() == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("monotonicity and nonnegativity of Lambda on real kernels") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.0, -5.0, 2.0, 1.5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const double a1 = u(rng), a2 = u(rng), extra = u(rng);
    const Kernel f = [&](double s, double x) {
      return cplx{x * (a1 * ou_weight(s, 0.0, 2.0, 1.0) + a2), 0.0};
    };
    const Kernel g = [&](double s, double x) {
      return cplx{x * (a1 * ou_weight(s, 0.0, 2.0, 1.0) + a2) + extra * x, 0.0};
    };
    const double lf = laplace_functional_generic(nu, f, tight()).value.real();
    const double lg = laplace_functional_generic(nu, g, tight()).value.real();
    CHECK(lf >= -1e-12);
    CHECK(lf <= lg + 1e-10);
  }
}

TEST_CASE("conjugate symmetry of Lambda") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.0, -4.0, 1.0, 1.0);
  const cplx c{0.4, 0.8};
  const Kernel f = [&](double s, double x) { return x * c * ou_weight(s, 0.0, 1.0, 1.0); };
  const Kernel fbar = [&](double s, double x) {
    return x * std::conj(c) * ou_weight(s, 0.0, 1.0, 1.0);
  };
  const cplx lf = laplace_functional_generic(nu, f, tight()).value;
  const cplx lfbar = laplace_functional_generic(nu, fbar, tight()).value;
  CHECK(std::abs(lfbar - std::conj(lf)) < 1e-10);
}

TEST_CASE("precondition violation on negative real part") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.0, 0.0, 1.0, 1.0);
  const Kernel bad = [](double, double x) { return cplx{-0.5 * x, 0.0}; };
  CHECK_THROWS_AS(laplace_functional_generic(nu, bad, tight()), std::domain_error);
}

TEST_CASE("pole proximity raises pole_error") {
  auto rate = [](double) { return 1.0; };
  CHECK_THROWS_AS(laplace_functional_exp_marks(rate, 1.0,
                                               [](double) { return cplx{-1.0, 0.0}; }, 0.0, 1.0,
                                               tight()),
                  pole_error);
}

TEST_CASE("budget exhaustion raises budget_error") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.0, -20.0, 5.0, 1.0);
  const Kernel f = [](double s, double x) {
    return cplx{x * std::abs(std::sin(40.0 * s)), 0.0};
  };
  QuadConfig q = tight();
  q.max_evals = 500;
  CHECK_THROWS_AS(laplace_functional_generic(nu, f, q), budget_error);
}

TEST_CASE("sample_points determinism and empty mass") {
  IntensityMeasure nu0;
  nu0.rate_breaks = {0.0, 1.0};
  nu0.rate_values = {0.0};
  std::mt19937_64 rng(1);
  CHECK(sample_points(nu0, rng).empty());

  const auto nu = IntensityMeasure::constant_rate_exp_marks(3.0, -2.0, 2.0, 1.0);
  std::mt19937_64 r1(77), r2(77);
  const PointSet p1 = sample_points(nu, r1);
  const PointSet p2 = sample_points(nu, r2);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1.points[i].s == p2.points[i].s);
    CHECK(p1.points[i].x == p2.points[i].x);
    CHECK(p1.points[i].s >= -2.0);
    CHECK(p1.points[i].s <= 2.0);
    CHECK(p1.points[i].x > 0.0);
  }
}

TEST_CASE("sampled point count matches the Poisson mean") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(5.0, 0.0, 2.0, 1.0);  // mass 10
  std::mt19937_64 rng(31);
  const std::size_t reps = 100'000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const double c = static_cast<double>(sample_points(nu, rng).size());
    sum += c;
    sum2 += c * c;
  }
  const double mean = sum / reps;
  const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
  CHECK(std::abs(mean - 10.0) < 4.0 * se);
}

TEST_CASE("empirical Laplace functional matches e^{-Lambda}") {
  const auto nu = IntensityMeasure::constant_rate_exp_marks(1.0, -6.0, 1.0, 1.0);
  const std::vector<std::vector<double>> kernels = {{0.8, 0.0}, {0.3, 0.4}, {1.5, 0.9}};
  for (const auto& coefs : kernels) {
    const Kernel f = [&](double s, double x) {
      return cplx{x * (coefs[0] * ou_weight(s, 0.0, 1.0, 1.0) + coefs[1] * 0.2), 0.0};
    };
    const double lam = laplace_functional_generic(nu, f, tight()).value.real();
    std::mt19937_64 rng(404);
    const std::size_t reps = 100'000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
      const PointSet ps = sample_points(nu, rng);
      double nf = 0.0;
      for (const PrmPoint& p : ps.points) nf += f(p.s, p.x).real();
      const double e = std::exp(-nf);
      sum += e;
      sum2 += e * e;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - std::exp(-lam)) < 4.0 * se);
  }
}

TEST_CASE("deterministic measure is the plain point sum") {
  PointSet ps;
  ps.points = {{-0.5, 1.2}, {0.3, 0.4}, {0.9, 2.0}};
  const MeasureKind m = MeasureKind::deterministic(ps);
  const Kernel f = [](double s, double x) { return cplx{x * (1.0 + s * s), 0.5 * x}; };
  cplx hand{0.0, 0.0};
  for (const auto& p : ps.points) hand += f(p.s, p.x);
  const cplx got = neg_log_mgf(m, f, tight());
  CHECK(std::abs(got - hand) < 1e-15);
}
