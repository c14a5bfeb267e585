#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "tclev/common.hpp"

namespace tclev {

// Pure-jump Levy processes with evaluable Laplace exponent psi, defined by
//
//   E[ e^{-omega J(1)} ] = e^{-psi(omega)}.
//
// All exponents below are written against this sign convention; published
// forms often use the characteristic-function convention instead.
enum class LevyKind {
  Zero,
  CompoundPoissonNormal,
  CompoundPoissonDoubleExp,
  GammaSubordinator,
  InverseGaussian,
};

struct LevySpec {
  LevyKind kind = LevyKind::Zero;
  // CompoundPoissonNormal:    rate, jump_mean, jump_sd
  // CompoundPoissonDoubleExp: rate, p_up, eta_plus, eta_minus
  // GammaSubordinator:        a (shape rate), b (scale rate)
  // InverseGaussian:          delta, gamma_ig
  double rate = 0.0;
  double jump_mean = 0.0;
  double jump_sd = 0.0;
  double p_up = 0.0;
  double eta_plus = 0.0;
  double eta_minus = 0.0;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;
  double gamma_ig = 0.0;

  static LevySpec zero() { return {}; }

  static LevySpec compound_poisson_normal(double rate, double jump_mean, double jump_sd) {
    LevySpec s;
    s.kind = LevyKind::CompoundPoissonNormal;
    s.rate = rate;
    s.jump_mean = jump_mean;
    s.jump_sd = jump_sd;
    s.validate();
    return s;
  }

  static LevySpec compound_poisson_double_exp(double rate, double p_up, double eta_plus,
                                              double eta_minus) {
    LevySpec s;
    s.kind = LevyKind::CompoundPoissonDoubleExp;
    s.rate = rate;
    s.p_up = p_up;
    s.eta_plus = eta_plus;
    s.eta_minus = eta_minus;
    s.validate();
    return s;
  }

  static LevySpec gamma_subordinator(double a, double b) {
    LevySpec s;
    s.kind = LevyKind::GammaSubordinator;
    s.a = a;
    s.b = b;
    s.validate();
    return s;
  }

  static LevySpec inverse_gaussian(double delta, double gamma_ig) {
    LevySpec s;
    s.kind = LevyKind::InverseGaussian;
    s.delta = delta;
    s.gamma_ig = gamma_ig;
    s.validate();
    return s;
  }

  void validate() const {
    switch (kind) {
      case LevyKind::Zero:
        return;
      case LevyKind::CompoundPoissonNormal:
        if (!(rate > 0.0)) throw std::invalid_argument("LevySpec: rate must be > 0");
        if (!(jump_sd >= 0.0)) throw std::invalid_argument("LevySpec: jump_sd must be >= 0");
        return;
      case LevyKind::CompoundPoissonDoubleExp:
        if (!(rate > 0.0)) throw std::invalid_argument("LevySpec: rate must be > 0");
        if (!(p_up >= 0.0 && p_up <= 1.0))
          throw std::invalid_argument("LevySpec: p_up must lie in [0,1]");
        if (!(eta_plus > 0.0) || !(eta_minus > 0.0))
          throw std::invalid_argument("LevySpec: eta_plus and eta_minus must be > 0");
        return;
      case LevyKind::GammaSubordinator:
        if (!(a > 0.0) || !(b > 0.0))
          throw std::invalid_argument("LevySpec: gamma subordinator needs a > 0, b > 0");
        return;
      case LevyKind::InverseGaussian:
        if (!(delta > 0.0) || !(gamma_ig > 0.0))
          throw std::invalid_argument("LevySpec: inverse Gaussian needs delta > 0, gamma > 0");
        return;
    }
    throw std::logic_error("LevySpec: unknown kind");
  }

  std::string name() const {
    switch (kind) {
      case LevyKind::Zero: return "zero";
      case LevyKind::CompoundPoissonNormal: return "compound_poisson_normal";
      case LevyKind::CompoundPoissonDoubleExp: return "compound_poisson_double_exp";
      case LevyKind::GammaSubordinator: return "gamma";
      case LevyKind::InverseGaussian: return "inverse_gaussian";
    }
    return "?";
  }
};

// Open interval of Re(omega) on which psi is defined.
struct RealInterval {
  double lo = -inf;
  double hi = inf;
  bool contains(double x) const { return x > lo && x < hi; }
};

inline RealInterval strip_of_analyticity(const LevySpec& spec) {
  switch (spec.kind) {
    case LevyKind::Zero:
    case LevyKind::CompoundPoissonNormal:
      return {-inf, inf};
    case LevyKind::CompoundPoissonDoubleExp:
      return {-spec.eta_plus, spec.eta_minus};
    case LevyKind::GammaSubordinator:
      return {-spec.b, inf};
    case LevyKind::InverseGaussian:
      // the branch point Re(2 omega + gamma^2) = 0 is excluded
      return {-0.5 * spec.gamma_ig * spec.gamma_ig, inf};
  }
  return {};
}

// Laplace exponent at complex omega. Principal branches throughout; the strip
// restriction keeps Re(1 + omega/b) resp. Re(2 omega + gamma^2) positive, so
// no branch tracking is needed.
inline cplx psi_eval(const LevySpec& spec, cplx omega) {
  const RealInterval strip = strip_of_analyticity(spec);
  if (!strip.contains(omega.real()))
    throw strip_error("psi_eval(" + spec.name() + "): Re(omega)=" +
                      std::to_string(omega.real()) +
                      " outside analyticity strip; E[e^{-Re(omega) J(1)}] does not exist");
  switch (spec.kind) {
    case LevyKind::Zero:
      return {0.0, 0.0};
    case LevyKind::CompoundPoissonNormal: {
      const cplx mgf = std::exp(-omega * spec.jump_mean +
                                0.5 * omega * omega * spec.jump_sd * spec.jump_sd);
      return spec.rate * (1.0 - mgf);
    }
    case LevyKind::CompoundPoissonDoubleExp: {
      const cplx mgf = spec.p_up * spec.eta_plus / (spec.eta_plus + omega) +
                       (1.0 - spec.p_up) * spec.eta_minus / (spec.eta_minus - omega);
      return spec.rate * (1.0 - mgf);
    }
    case LevyKind::GammaSubordinator:
      return spec.a * std::log(1.0 + omega / spec.b);
    case LevyKind::InverseGaussian:
      return spec.delta *
             (std::sqrt(2.0 * omega + spec.gamma_ig * spec.gamma_ig) - spec.gamma_ig);
  }
  throw std::logic_error("psi_eval: unknown kind");
}

struct Cumulants {
  double mean = 0.0;      // E[J(1)]
  double variance = 0.0;  // Var[J(1)]
};

// Closed-form (E[J(1)], Var[J(1)]); every catalogued variant has finite
// second moments.
inline Cumulants cumulants(const LevySpec& spec) {
  switch (spec.kind) {
    case LevyKind::Zero:
      return {0.0, 0.0};
    case LevyKind::CompoundPoissonNormal:
      return {spec.rate * spec.jump_mean,
              spec.rate * (spec.jump_mean * spec.jump_mean + spec.jump_sd * spec.jump_sd)};
    case LevyKind::CompoundPoissonDoubleExp: {
      const double m1 = spec.p_up / spec.eta_plus - (1.0 - spec.p_up) / spec.eta_minus;
      const double m2 = 2.0 * spec.p_up / (spec.eta_plus * spec.eta_plus) +
                        2.0 * (1.0 - spec.p_up) / (spec.eta_minus * spec.eta_minus);
      return {spec.rate * m1, spec.rate * m2};
    }
    case LevyKind::GammaSubordinator:
      return {spec.a / spec.b, spec.a / (spec.b * spec.b)};
    case LevyKind::InverseGaussian:
      return {spec.delta / spec.gamma_ig,
              spec.delta / (spec.gamma_ig * spec.gamma_ig * spec.gamma_ig)};
  }
  throw std::logic_error("cumulants: unknown kind");
}

namespace detail {

// Michael-Schucany-Haas transform for IG(mean, shape).
inline double sample_inverse_gaussian(double mean, double shape, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double nu = normal(rng);
  const double y = nu * nu;
  const double x = mean + mean * mean * y / (2.0 * shape) -
                   mean / (2.0 * shape) *
                       std::sqrt(4.0 * mean * shape * y + mean * mean * y * y);
  if (unif(rng) <= mean / (mean + x)) return x;
  return mean * mean / x;
}

}  // namespace detail

// Exact draw of J(t). Compound variants draw a Poisson number of jumps; the
// subordinators use their standard samplers. Deterministic given the
// generator state.
inline double sample_increment(const LevySpec& spec, double t, std::mt19937_64& rng) {
  if (t < 0.0) throw std::invalid_argument("sample_increment: t must be >= 0");
  if (t == 0.0 || spec.kind == LevyKind::Zero) return 0.0;
  switch (spec.kind) {
    case LevyKind::CompoundPoissonNormal: {
      std::poisson_distribution<long> pois(spec.rate * t);
      std::normal_distribution<double> normal(spec.jump_mean, spec.jump_sd);
      const long k = pois(rng);
      double sum = 0.0;
      for (long j = 0; j < k; ++j) sum += normal(rng);
      return sum;
    }
    case LevyKind::CompoundPoissonDoubleExp: {
      std::poisson_distribution<long> pois(spec.rate * t);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::exponential_distribution<double> up(spec.eta_plus), down(spec.eta_minus);
      const long k = pois(rng);
      double sum = 0.0;
      for (long j = 0; j < k; ++j) sum += unif(rng) < spec.p_up ? up(rng) : -down(rng);
      return sum;
    }
    case LevyKind::GammaSubordinator: {
      std::gamma_distribution<double> gam(spec.a * t, 1.0 / spec.b);
      return gam(rng);
    }
    case LevyKind::InverseGaussian:
      return detail::sample_inverse_gaussian(spec.delta * t / spec.gamma_ig,
                                             spec.delta * t * spec.delta * t, rng);
    case LevyKind::Zero:
      return 0.0;
  }
  throw std::logic_error("sample_increment: unknown kind");
}

}  // namespace tclev
