#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/levy.hpp"
#include "tclev/oscillatory.hpp"
#include "tclev/prm.hpp"
#include "tclev/quadrature.hpp"
#include "tclev/timechange.hpp"

namespace tclev {

// Scalar model parameters of the return model
//
//   X_i = mu Delta + J_{i,1} + J_{i,2} + beta tau*_i + rho gamma_i
//         + sqrt(tau*_i) eps_i
//
// with mu = r - q and rho = alpha - beta (sigma is fixed to 1).
struct ModelParams {
  double mu = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  double delta = 1.0;
  LevySpec levy1;
  LevySpec levy2;
  VolSpec vol;

  void validate() const {
    if (!(delta > 0.0)) throw std::invalid_argument("ModelParams: delta must be > 0");
    levy1.validate();
    levy2.validate();
    vol.validate();
    // psi_1 and psi_2 are evaluated at beta + i y, so beta must lie inside
    // both strips; the stated finiteness condition additionally wants
    // beta + rho inside the second strip.
    if (!strip_of_analyticity(levy1).contains(beta))
      throw strip_error("ModelParams: beta outside analyticity strip of levy1");
    if (!strip_of_analyticity(levy2).contains(beta))
      throw strip_error("ModelParams: beta outside analyticity strip of levy2");
    if (!strip_of_analyticity(levy2).contains(beta + rho))
      throw strip_error("ModelParams: beta + rho outside analyticity strip of levy2");
  }

  // stationary per-interval mean of tau*_i
  double stationary_tau_star_mean() const {
    double m = vol.a / vol.b;
    if (vol.has_second_factor())
      m += vol.a2 / vol.b2;
    else
      m *= 1.0 + vol.kappa;
    return m * delta;
  }
};

// Return series with the derived centered values A_i = X_i - mu Delta.
struct Observations {
  std::vector<double> x;

  std::size_t n() const { return x.size(); }

  std::vector<double> a_values(const ModelParams& p) const {
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i] - p.mu * p.delta;
    return a;
  }

  double a_bar(const ModelParams& p) const {
    double s = 0.0;
    for (double v : x) s += v - p.mu * p.delta;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
  }
};

struct Coefficients {
  std::vector<cplx> c1;
  std::vector<cplx> c2;
};

// Per-interval complex weights multiplying h_i and g_i:
//   c1_i = psi_1(beta + i y_i) + (beta^2 + y_i^2)/2
//   c2_i = psi_2(beta + i y_i) + rho (beta + i y_i) + (beta^2 + y_i^2)/2
inline Coefficients coefficients(const ModelParams& p, const std::vector<double>& y) {
  Coefficients c;
  c.c1.reserve(y.size());
  c.c2.reserve(y.size());
  for (double yi : y) {
    const cplx omega{p.beta, yi};
    const double quad = 0.5 * (p.beta * p.beta + yi * yi);
    c.c1.push_back(psi_eval(p.levy1, omega) + quad);
    c.c2.push_back(psi_eval(p.levy2, omega) + p.rho * omega + quad);
  }
  return c;
}

// The kernel Omega_n + Upsilon_n = sum_i c1_i h_i + sum_i c2_i g_i as an
// evaluable object on the two-coordinate mark space.
inline BiKernel omega_upsilon(const ModelParams& p, const std::vector<double>& y) {
  const Coefficients c = coefficients(p, y);
  BiKernel k;
  k.f1.lambda_ou = p.vol.lambda_ou;
  k.f2.lambda_ou = p.vol.has_second_factor() ? p.vol.lambda_ou2 : p.vol.lambda_ou;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double lo = static_cast<double>(i) * p.delta;
    const double hi = lo + p.delta;
    if (p.vol.has_second_factor()) {
      k.f1.add(c.c1[i], lo, hi);
      k.f2.add(c.c2[i], lo, hi);
    } else {
      k.f1.add(c.c1[i] + p.vol.kappa * c.c2[i], lo, hi);
    }
  }
  return k;
}

// Smallest Re of the combined kernel coefficients; values below -tol flag the
// (still evaluable) parameter region where Re(Omega_n + Upsilon_n) < 0.
inline double kernel_min_re(const BiKernel& k) {
  double m = 0.0;
  for (const cplx& c : k.f1.coef) m = std::min(m, c.real());
  for (const cplx& c : k.f2.coef) m = std::min(m, c.real());
  return m;
}

// Conditional Normal density of X_i given the jump information, in the
// factored exponential-tilt form; equals phi(X | mu Delta + J1 + J2 +
// rho gamma + beta tau*, tau*).
inline double conditional_density(const ModelParams& p, double x, double j1, double j2,
                                  double tau, double gamma) {
  const double tau_star = tau + gamma;
  if (!(tau_star > 0.0))
    throw std::domain_error("conditional_density: tau* must be > 0 (point-mass law)");
  const double resid = (x - p.mu * p.delta) - j1 - j2 - p.rho * gamma;
  return std::exp(resid * p.beta) / std::sqrt(2.0 * pi * tau_star) *
         std::exp(-resid * resid / (2.0 * tau_star)) *
         std::exp(-tau_star * p.beta * p.beta / 2.0);
}

namespace detail {

// Fixed s-quadrature of one Gamma-OU factor's Laplace functional
//
//   Lambda(c) = integral_{-S}^{n Delta} a lam K(s) / (b + K(s)) ds,
//   K(s) = sum_i c_i eps_i(s),
//
// split as a closed form over the warm-up [-S, 0] (where K = W e^{lam s})
// plus Gauss-Legendre panels over [0, n Delta]. Panels are graded toward the
// final endpoint where K vanishes and the integrand develops a boundary
// layer of width ~ b/|c|.
class OuFactorLattice {
 public:
  OuFactorLattice() = default;

  OuFactorLattice(double lambda, double a, double b, double s_depth, std::size_t n,
                  double delta)
      : lambda_(lambda), a_(a), b_(b), n_(n) {
    warm_decay_ = std::exp(-lambda * s_depth);
    warm_w_.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      warm_w_[i] = ou_weight(0.0, static_cast<double>(i) * delta,
                             static_cast<double>(i + 1) * delta, lambda);
    std::vector<double> edges;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      edges.push_back(static_cast<double>(j) * delta);
      edges.push_back((static_cast<double>(j) + 0.5) * delta);
    }
    // graded toward n Delta, where K vanishes and the integrand develops a
    // boundary layer of width ~ b/|c|
    const double t_last = static_cast<double>(n - 1) * delta;
    const double t_end = static_cast<double>(n) * delta;
    edges.push_back(t_last);
    for (int k = 1; k <= 12; ++k) edges.push_back(t_end - delta * std::pow(0.5, k));
    edges.push_back(t_end);

    for (std::size_t pnl = 0; pnl + 1 < edges.size(); ++pnl) {
      const double c = 0.5 * (edges[pnl] + edges[pnl + 1]);
      const double h = 0.5 * (edges[pnl + 1] - edges[pnl]);
      for (int sgn = -1; sgn <= 1; sgn += 2)
        for (int j = 0; j < 8; ++j) {
          const double s = c + sgn * h * gl16_x[j];
          node_weight_.push_back(a * lambda * h * gl16_w[j]);
          for (std::size_t i = 0; i < n; ++i)
            node_eps_.push_back(ou_weight(s, static_cast<double>(i) * delta,
                                          static_cast<double>(i + 1) * delta, lambda));
        }
    }
  }

  cplx eval(const cplx* c, const QuadConfig& q, std::atomic<std::size_t>* neg_nodes) const {
    cplx w_sum{0.0, 0.0};
    for (std::size_t i = 0; i < n_; ++i) w_sum += c[i] * warm_w_[i];
    if (!(w_sum.real() > -b_ * (1.0 - 1e-12)))
      throw pole_error("OuFactorLattice: Re(W) <= -b in the warm-up closed form");
    const cplx warm = a_ * (std::log(b_ + w_sum) - std::log(b_ + w_sum * warm_decay_));

    const double pole2 = q.pole_tol * q.pole_tol;
    const std::size_t nodes = node_weight_.size();
    const double cre0 = c[0].real(), cim0 = c[0].imag();
    double acc_re = 0.0, acc_im = 0.0;
    std::size_t neg = 0;
    for (std::size_t k = 0; k < nodes; ++k) {
      const double* eps = node_eps_.data() + k * n_;
      double k_re = cre0 * eps[0], k_im = cim0 * eps[0];
      for (std::size_t i = 1; i < n_; ++i) {
        k_re += c[i].real() * eps[i];
        k_im += c[i].imag() * eps[i];
      }
      const double d_re = b_ + k_re;
      const double nrm = d_re * d_re + k_im * k_im;
      if (!(d_re > 0.0) || nrm < pole2)
        throw pole_error("OuFactorLattice: b + K(s) too close to the pole");
      if (k_re < -1e-9) ++neg;
      // K / (b + K) via conj(denom) / |denom|^2
      const double w = node_weight_[k] / nrm;
      acc_re += w * (k_re * d_re + k_im * k_im);
      acc_im += w * (k_im * d_re - k_re * k_im);
    }
    if (neg_nodes && neg) neg_nodes->fetch_add(neg, std::memory_order_relaxed);
    return warm + cplx{acc_re, acc_im};
  }

  // stationary mass left beyond the warm-up truncation, |a log(1 + W e^{-lam S}/b)|
  double warm_tail(const cplx* c) const {
    cplx w_sum{0.0, 0.0};
    for (std::size_t i = 0; i < n_; ++i) w_sum += c[i] * warm_w_[i];
    return std::abs(a_ * std::log(1.0 + w_sum * warm_decay_ / b_));
  }

  std::size_t intervals() const { return n_; }

 private:
  double lambda_ = 1.0, a_ = 1.0, b_ = 1.0;
  std::size_t n_ = 0;
  double warm_decay_ = 0.0;
  std::vector<double> warm_w_;
  std::vector<double> node_weight_;
  std::vector<double> node_eps_;  // node-major, n_ entries per node
};

// Lambda(Omega_n + Upsilon_n) as a function of the coefficient vectors, with
// the factor layout of the volatility spec folded in.
class CoefficientLambda {
 public:
  static constexpr std::size_t max_intervals = 16;

  CoefficientLambda() = default;

  CoefficientLambda(const VolSpec& vol, std::size_t n, double delta) : vol_(vol), n_(n) {
    if (n > max_intervals)
      throw std::invalid_argument("CoefficientLambda: too many intervals");
    f1_ = OuFactorLattice(vol.lambda_ou, vol.a, vol.b, vol.warmup_depth(vol.lambda_ou), n, delta);
    if (vol.has_second_factor())
      f2_ = OuFactorLattice(vol.lambda_ou2, vol.a2, vol.b2, vol.warmup_depth(vol.lambda_ou2), n,
                            delta);
  }

  cplx value(const cplx* c1, const cplx* c2, const QuadConfig& q,
             std::atomic<std::size_t>* neg_nodes) const {
    if (vol_.has_second_factor())
      return f1_.eval(c1, q, neg_nodes) + f2_.eval(c2, q, neg_nodes);
    cplx merged[max_intervals];
    for (std::size_t i = 0; i < n_; ++i) merged[i] = c1[i] + vol_.kappa * c2[i];
    return f1_.eval(merged, q, neg_nodes);
  }

  double warm_tail(const cplx* c1, const cplx* c2) const {
    if (vol_.has_second_factor()) return f1_.warm_tail(c1) + f2_.warm_tail(c2);
    cplx merged[max_intervals];
    for (std::size_t i = 0; i < n_; ++i) merged[i] = c1[i] + vol_.kappa * c2[i];
    return f1_.warm_tail(merged);
  }

 private:
  VolSpec vol_;
  std::size_t n_ = 0;
  OuFactorLattice f1_;
  OuFactorLattice f2_;
};

// negexp for the Poisson measure: E(y) = Lambda(Omega_n + Upsilon_n)(y).
class PoissonNegExp final : public NegExpEvaluator {
 public:
  PoissonNegExp(const ModelParams& p, std::size_t n, const QuadConfig& q)
      : p_(p), q_(q), n_(n), lambda_(p.vol, n, p.delta) {
    core_scale_ = 1.0 / std::sqrt(std::max(p.stationary_tau_star_mean(), 1e-9));
  }

  std::size_t dims() const override { return n_; }
  double core_scale(std::size_t) const override { return core_scale_; }

  void prepare(const std::vector<AxisNodes>& axes) override {
    c1_.assign(n_, {});
    c2_.assign(n_, {});
    for (std::size_t d = 0; d < n_; ++d) {
      const std::size_t m = axes[d].size();
      c1_[d].resize(m);
      c2_[d].resize(m);
      for (std::size_t k = 0; k < m; ++k) {
        const double y = axes[d].y[k];
        const cplx omega{p_.beta, y};
        const double quad = 0.5 * (p_.beta * p_.beta + y * y);
        c1_[d][k] = psi_eval(p_.levy1, omega) + quad;
        c2_[d][k] = psi_eval(p_.levy2, omega) + p_.rho * omega + quad;
      }
    }
  }

  cplx at(const std::size_t* idx) override {
    cplx c1[3], c2[3];
    for (std::size_t d = 0; d < n_; ++d) {
      c1[d] = c1_[d][idx[d]];
      c2[d] = c2_[d][idx[d]];
    }
    return lambda_.value(c1, c2, q_, &neg_nodes_);
  }

  cplx at_y(const double* y) override {
    cplx c1[3], c2[3];
    for (std::size_t d = 0; d < n_; ++d) {
      const cplx omega{p_.beta, y[d]};
      const double quad = 0.5 * (p_.beta * p_.beta + y[d] * y[d]);
      c1[d] = psi_eval(p_.levy1, omega) + quad;
      c2[d] = psi_eval(p_.levy2, omega) + p_.rho * omega + quad;
    }
    return lambda_.value(c1, c2, q_, &neg_nodes_);
  }

  double warm_tail_at(const double* y) {
    cplx c1[3], c2[3];
    for (std::size_t d = 0; d < n_; ++d) {
      const cplx omega{p_.beta, y[d]};
      const double quad = 0.5 * (p_.beta * p_.beta + y[d] * y[d]);
      c1[d] = psi_eval(p_.levy1, omega) + quad;
      c2[d] = psi_eval(p_.levy2, omega) + p_.rho * omega + quad;
    }
    return lambda_.warm_tail(c1, c2);
  }

  std::size_t neg_nodes() const { return neg_nodes_.load(); }

 private:
  ModelParams p_;
  QuadConfig q_;
  std::size_t n_;
  CoefficientLambda lambda_;
  double core_scale_ = 1.0;
  std::vector<std::vector<cplx>> c1_, c2_;
  std::atomic<std::size_t> neg_nodes_{0};
};

// negexp for a frozen point configuration: E(y) = sum_i c1_i tau_i +
// c2_i gamma_i, which is separable across the y coordinates.
class DeterministicNegExp final : public NegExpEvaluator {
 public:
  DeterministicNegExp(const ModelParams& p, std::vector<double> tau, std::vector<double> gamma)
      : p_(p), tau_(std::move(tau)), gamma_(std::move(gamma)) {}

  std::size_t dims() const override { return tau_.size(); }

  double core_scale(std::size_t d) const override {
    return 1.0 / std::sqrt(std::max(tau_[d] + gamma_[d], 1e-9));
  }

  void prepare(const std::vector<AxisNodes>& axes) override {
    terms_.assign(dims(), {});
    factors_.assign(dims(), {});
    for (std::size_t d = 0; d < dims(); ++d) {
      terms_[d].resize(axes[d].size());
      factors_[d].resize(axes[d].size());
      for (std::size_t k = 0; k < axes[d].size(); ++k) {
        terms_[d][k] = term(d, axes[d].y[k]);
        factors_[d][k] = std::exp(-terms_[d][k]);
      }
    }
  }

  cplx at(const std::size_t* idx) override {
    cplx acc{0.0, 0.0};
    for (std::size_t d = 0; d < dims(); ++d) acc += terms_[d][idx[d]];
    return acc;
  }

  cplx at_y(const double* y) override {
    cplx acc{0.0, 0.0};
    for (std::size_t d = 0; d < dims(); ++d) acc += term(d, y[d]);
    return acc;
  }

  bool separable() const override { return true; }
  cplx axis_factor(std::size_t dim, std::size_t node) const override {
    return factors_[dim][node];
  }

 private:
  cplx term(std::size_t d, double y) const {
    const cplx omega{p_.beta, y};
    const double quad = 0.5 * (p_.beta * p_.beta + y * y);
    const cplx c1 = psi_eval(p_.levy1, omega) + quad;
    const cplx c2 = psi_eval(p_.levy2, omega) + p_.rho * omega + quad;
    return c1 * tau_[d] + c2 * gamma_[d];
  }

  ModelParams p_;
  std::vector<double> tau_, gamma_;
  std::vector<std::vector<cplx>> terms_;
  std::vector<std::vector<cplx>> factors_;
};

}  // namespace detail

struct LikDiagnostics {
  std::size_t evals = 0;
  double y_radius = 0.0;
  double refine_error = 0.0;
  double tail_estimate = 0.0;
  double decay_exponent = 0.0;
  double im_re_ratio = 0.0;
  double warm_tail = 0.0;
  std::size_t neg_kernel_nodes = 0;
  int level_used = 0;
  bool heavy_tail_warning = false;
  bool non_real_warning = false;
  bool symmetric_half = false;
  std::size_t blocks = 1;
  std::size_t block_size = 0;
};

struct LikResult {
  double loglik = 0.0;
  LikDiagnostics diag;
};

struct LikOptions {
  bool half_domain = false;  // integrate y_1 >= 0 only and double the real part
  bool verify = true;        // re-integrate on split panels as an error check
  int base_level = 0;
};

namespace detail {

inline void merge_osc_diag(const OscDiagnostics& o, LikDiagnostics& d) {
  d.evals += o.evals;
  d.y_radius = std::max(d.y_radius, o.y_radius);
  d.refine_error = std::max(d.refine_error, o.refine_error);
  d.tail_estimate = std::max(d.tail_estimate, o.tail_estimate);
  d.decay_exponent = o.decay_exponent;
  d.im_re_ratio = std::max(d.im_re_ratio, o.im_re_ratio);
  d.level_used = std::max(d.level_used, o.level_used);
  d.heavy_tail_warning = d.heavy_tail_warning || o.heavy_tail_warning;
  d.symmetric_half = o.symmetric_half;
}

// tau_i and gamma_i induced by a frozen point configuration
inline void point_time_changes(const ModelParams& p, const MeasureKind& measure, std::size_t n,
                               std::vector<double>& tau, std::vector<double>& gamma) {
  tau.assign(n, 0.0);
  gamma.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const BiKernel h = interval_kernel(p.vol, i + 1, p.delta, KernelPart::H);
    const BiKernel g = interval_kernel(p.vol, i + 1, p.delta, KernelPart::G);
    tau[i] = functional_from_points(measure.points, h.f1);
    if (p.vol.has_second_factor())
      gamma[i] = functional_from_points(measure.points2, g.f2);
    else
      gamma[i] = functional_from_points(measure.points, g.f1);
  }
}

}  // namespace detail

// Exact marginal log-likelihood of up to three aggregate returns:
//
//   L = e^{n Abar beta} / (2 pi)^n *
//       integral e^{-Lambda(Omega_n + Upsilon_n)} prod_i e^{i A_i y_i} dy,
//
// with e^{-Lambda} replaced by the frozen point sum for a Deterministic
// measure. The prefactor is applied in log space.
inline LikResult log_likelihood(const Observations& obs, const ModelParams& p,
                                const MeasureKind& measure, const QuadConfig& q,
                                const LikOptions& opt = {}) {
  p.validate();
  const std::size_t n = obs.n();
  if (n < 1) throw std::invalid_argument("log_likelihood: empty observations");
  if (n > 3)
    throw std::invalid_argument(
        "log_likelihood: exact joint integral capped at n <= 3; use "
        "composite_log_likelihood for longer series");

  const std::vector<double> a = obs.a_values(p);
  const double a_bar = obs.a_bar(p);

  LikResult res;
  OscOptions osc_opt;
  osc_opt.half_domain = opt.half_domain;
  osc_opt.base_level = opt.base_level;
  if (!opt.verify) osc_opt.max_level = opt.base_level;

  cplx integral;
  if (measure.tag == MeasureKind::Tag::Poisson) {
    detail::PoissonNegExp ev(p, n, q);
    OscillatoryIntegrator osc(ev, q, osc_opt);
    OscDiagnostics od;
    integral = osc.integrate_one(a, od);
    detail::merge_osc_diag(od, res.diag);
    res.diag.neg_kernel_nodes = ev.neg_nodes();
    double edge[3] = {od.y_radius, od.y_radius, od.y_radius};
    res.diag.warm_tail = ev.warm_tail_at(edge);
  } else {
    std::vector<double> tau, gamma;
    detail::point_time_changes(p, measure, n, tau, gamma);
    for (std::size_t i = 0; i < n; ++i)
      if (!(tau[i] + gamma[i] > 0.0))
        throw std::domain_error("log_likelihood: tau*_" + std::to_string(i + 1) +
                                " = 0 under the deterministic measure (point mass at mu Delta)");
    detail::DeterministicNegExp ev(p, tau, gamma);
    OscillatoryIntegrator osc(ev, q, osc_opt);
    OscDiagnostics od;
    integral = osc.integrate_one(a, od);
    detail::merge_osc_diag(od, res.diag);
  }

  const double re = integral.real();
  res.diag.non_real_warning = res.diag.im_re_ratio > q.im_ratio_tol;
  if (!(re > 0.0))
    throw truncation_error("log_likelihood: integral is not positive (" + std::to_string(re) +
                           "); truncation or tolerance insufficient");
  res.loglik = static_cast<double>(n) * a_bar * p.beta -
               static_cast<double>(n) * std::log(2.0 * pi) + std::log(re);
  return res;
}

// n = 1 density on a grid of return values. The Lambda lattice is shared
// across the grid; only the phases e^{i A y} differ per point.
struct DensityGrid {
  std::vector<double> x;
  std::vector<double> density;
  LikDiagnostics diag;
};

inline DensityGrid marginal_density_grid(const std::vector<double>& x_grid, const ModelParams& p,
                                         const QuadConfig& q, const LikOptions& opt = {}) {
  p.validate();
  if (x_grid.empty()) throw std::invalid_argument("marginal_density_grid: empty grid");

  std::vector<std::vector<double>> a_list;
  a_list.reserve(x_grid.size());
  for (double x : x_grid) a_list.push_back({x - p.mu * p.delta});

  detail::PoissonNegExp ev(p, 1, q);
  OscOptions osc_opt;
  osc_opt.half_domain = opt.half_domain;
  osc_opt.base_level = opt.base_level;
  if (!opt.verify) osc_opt.max_level = opt.base_level;
  OscillatoryIntegrator osc(ev, q, osc_opt);
  OscDiagnostics od;
  const std::vector<cplx> vals = osc.integrate(a_list, od);

  DensityGrid out;
  out.x = x_grid;
  out.density.resize(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i)
    out.density[i] = std::exp(a_list[i][0] * p.beta) * vals[i].real() / (2.0 * pi);
  detail::merge_osc_diag(od, out.diag);
  out.diag.neg_kernel_nodes = ev.neg_nodes();
  double edge[1] = {od.y_radius};
  out.diag.warm_tail = ev.warm_tail_at(edge);
  return out;
}

// Composite (block) likelihood: the series is split into consecutive windows
// of the given size and the exact window likelihoods are summed (stationarity
// makes every window of a given length share one Lambda lattice). Under a
// Deterministic measure every window reuses the same frozen points.
inline LikResult composite_log_likelihood(const Observations& obs, const ModelParams& p,
                                          std::size_t window, const QuadConfig& q,
                                          const LikOptions& opt = {},
                                          const MeasureKind& measure = MeasureKind::poisson()) {
  p.validate();
  if (window < 1 || window > 3)
    throw std::invalid_argument("composite_log_likelihood: window must be 1, 2, or 3");
  const std::size_t n = obs.n();
  if (n < 1) throw std::invalid_argument("composite_log_likelihood: empty observations");

  // group window lengths (the last window may be shorter)
  std::vector<std::vector<double>> a_all;
  const std::vector<double> a = obs.a_values(p);
  for (std::size_t lo = 0; lo < n; lo += window)
    a_all.emplace_back(a.begin() + lo, a.begin() + std::min(n, lo + window));

  LikResult res;
  res.diag.blocks = a_all.size();
  res.diag.block_size = window;
  double total = 0.0;

  for (std::size_t len = 1; len <= window; ++len) {
    std::vector<std::vector<double>> group;
    for (const auto& blk : a_all)
      if (blk.size() == len) group.push_back(blk);
    if (group.empty()) continue;

    OscOptions osc_opt;
    osc_opt.half_domain = opt.half_domain;
    osc_opt.base_level = opt.base_level;
    if (!opt.verify) osc_opt.max_level = opt.base_level;

    std::vector<cplx> vals;
    OscDiagnostics od;
    if (measure.tag == MeasureKind::Tag::Poisson) {
      detail::PoissonNegExp ev(p, len, q);
      OscillatoryIntegrator osc(ev, q, osc_opt);
      vals = osc.integrate(group, od);
      res.diag.neg_kernel_nodes += ev.neg_nodes();
    } else {
      std::vector<double> tau, gamma;
      detail::point_time_changes(p, measure, len, tau, gamma);
      for (std::size_t i = 0; i < len; ++i)
        if (!(tau[i] + gamma[i] > 0.0))
          throw std::domain_error("composite_log_likelihood: tau* = 0 under the deterministic "
                                  "measure");
      detail::DeterministicNegExp ev(p, tau, gamma);
      OscillatoryIntegrator osc(ev, q, osc_opt);
      vals = osc.integrate(group, od);
    }
    detail::merge_osc_diag(od, res.diag);

    for (std::size_t k = 0; k < group.size(); ++k) {
      const double re = vals[k].real();
      if (!(re > 0.0))
        throw truncation_error("composite_log_likelihood: block integral not positive");
      double a_sum = 0.0;
      for (double v : group[k]) a_sum += v;
      total += a_sum * p.beta - static_cast<double>(len) * std::log(2.0 * pi) + std::log(re);
    }
  }
  res.diag.non_real_warning = res.diag.im_re_ratio > q.im_ratio_tol;
  res.loglik = total;
  return res;
}

// Analytic joint characteristic function E[e^{i sum u_i X_i}] via the same
// coefficient algebra evaluated at d_j = psi_j(-i u) - i u beta(+rho) + u^2/2:
//
//   cf(u) = e^{i mu Delta sum u_i} e^{-Lambda(sum d1_i h_i + sum d2_i g_i)}.
inline cplx model_cf(const ModelParams& p, const std::vector<double>& u, const QuadConfig& q) {
  p.validate();
  const std::size_t n = u.size();
  if (n < 1) throw std::invalid_argument("model_cf: empty argument");
  detail::CoefficientLambda lam(p.vol, n, p.delta);
  std::vector<cplx> d1(n), d2(n);
  double u_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx arg{0.0, -u[i]};
    const double quad = 0.5 * u[i] * u[i];
    d1[i] = psi_eval(p.levy1, arg) - cplx{0.0, 1.0} * u[i] * p.beta + quad;
    d2[i] = psi_eval(p.levy2, arg) - cplx{0.0, 1.0} * u[i] * (p.beta + p.rho) + quad;
    u_sum += u[i];
  }
  const cplx lambda = lam.value(d1.data(), d2.data(), q, nullptr);
  return std::exp(cplx{0.0, u_sum * p.mu * p.delta} - lambda);
}

}  // namespace tclev
