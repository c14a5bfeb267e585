#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/likelihood.hpp"

namespace tclev {

namespace detail {

// Named scalar parameters the fitter can move, with the coordinate transform
// used inside the optimizer (log for positive rates, identity otherwise).
enum class ParamTransform { Identity, Log };

struct ParamAccessor {
  std::function<double(const ModelParams&)> get;
  std::function<void(ModelParams&, double)> set;
  ParamTransform transform;
};

inline const std::map<std::string, ParamAccessor>& parameter_table() {
  using PT = ParamTransform;
  static const std::map<std::string, ParamAccessor> table = [] {
    std::map<std::string, ParamAccessor> t;
    auto add = [&](const std::string& name, PT tr, std::function<double(const ModelParams&)> g,
                   std::function<void(ModelParams&, double)> s) {
      t[name] = ParamAccessor{std::move(g), std::move(s), tr};
    };
    add("mu", PT::Identity, [](const ModelParams& p) { return p.mu; },
        [](ModelParams& p, double v) { p.mu = v; });
    add("beta", PT::Identity, [](const ModelParams& p) { return p.beta; },
        [](ModelParams& p, double v) { p.beta = v; });
    add("rho", PT::Identity, [](const ModelParams& p) { return p.rho; },
        [](ModelParams& p, double v) { p.rho = v; });
    add("lambda_ou", PT::Log, [](const ModelParams& p) { return p.vol.lambda_ou; },
        [](ModelParams& p, double v) { p.vol.lambda_ou = v; });
    add("a", PT::Log, [](const ModelParams& p) { return p.vol.a; },
        [](ModelParams& p, double v) { p.vol.a = v; });
    add("b", PT::Log, [](const ModelParams& p) { return p.vol.b; },
        [](ModelParams& p, double v) { p.vol.b = v; });
    add("lambda_ou2", PT::Log, [](const ModelParams& p) { return p.vol.lambda_ou2; },
        [](ModelParams& p, double v) { p.vol.lambda_ou2 = v; });
    add("a2", PT::Log, [](const ModelParams& p) { return p.vol.a2; },
        [](ModelParams& p, double v) { p.vol.a2 = v; });
    add("b2", PT::Log, [](const ModelParams& p) { return p.vol.b2; },
        [](ModelParams& p, double v) { p.vol.b2 = v; });
    add("levy1.rate", PT::Log, [](const ModelParams& p) { return p.levy1.rate; },
        [](ModelParams& p, double v) { p.levy1.rate = v; });
    add("levy1.jump_mean", PT::Identity, [](const ModelParams& p) { return p.levy1.jump_mean; },
        [](ModelParams& p, double v) { p.levy1.jump_mean = v; });
    add("levy1.jump_sd", PT::Log, [](const ModelParams& p) { return p.levy1.jump_sd; },
        [](ModelParams& p, double v) { p.levy1.jump_sd = v; });
    add("levy2.rate", PT::Log, [](const ModelParams& p) { return p.levy2.rate; },
        [](ModelParams& p, double v) { p.levy2.rate = v; });
    add("levy2.jump_mean", PT::Identity, [](const ModelParams& p) { return p.levy2.jump_mean; },
        [](ModelParams& p, double v) { p.levy2.jump_mean = v; });
    add("levy2.jump_sd", PT::Log, [](const ModelParams& p) { return p.levy2.jump_sd; },
        [](ModelParams& p, double v) { p.levy2.jump_sd = v; });
    return t;
  }();
  return table;
}

inline double to_internal(double v, ParamTransform t) {
  if (t == ParamTransform::Log) {
    if (!(v > 0.0)) throw std::invalid_argument("fit: log-transformed parameter must be > 0");
    return std::log(v);
  }
  return v;
}

inline double to_natural(double v, ParamTransform t) {
  return t == ParamTransform::Log ? std::exp(v) : v;
}

// Cholesky factorization; returns false when not positive definite.
// a is row-major k x k and is overwritten with L.
inline bool cholesky(std::vector<double>& a, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * k + j];
      for (std::size_t m = 0; m < j; ++m) s -= a[i * k + m] * a[j * k + m];
      if (i == j) {
        if (!(s > 0.0)) return false;
        a[i * k + i] = std::sqrt(s);
      } else {
        a[i * k + j] = s / a[j * k + j];
      }
    }
    for (std::size_t j = i + 1; j < k; ++j) a[i * k + j] = 0.0;
  }
  return true;
}

inline std::vector<double> spd_inverse(std::vector<double> chol, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    chol[i * k + i] = 1.0 / chol[i * k + i];
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      for (std::size_t m = j; m < i; ++m) s -= chol[i * k + m] * chol[m * k + j];
      chol[i * k + j] = s * chol[i * k + i];
    }
  }
  std::vector<double> inv(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t m = i; m < k; ++m) s += chol[m * k + i] * chol[m * k + j];
      inv[i * k + j] = inv[j * k + i] = s;
    }
  return inv;
}

}  // namespace detail

struct FitOptions {
  std::size_t max_iter = 400;
  double xtol = 1e-7;       // simplex spread in internal coordinates
  double ftol = 1e-10;      // objective spread
  std::size_t window = 2;   // composite-likelihood block length (<= 3)
  double init_step = 0.15;  // initial simplex displacement, internal coords
  bool half_domain = true;  // symmetric quadrature for the objective
  MeasureKind measure = MeasureKind::poisson();
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> estimates;
  std::vector<double> stderrs;  // empty when the information matrix is unusable
  double loglik = 0.0;
  std::size_t iterations = 0;
  std::size_t objective_evals = 0;
  std::size_t infeasible_evals = 0;
  double final_simplex_size = 0.0;
  bool converged = false;
  bool budget_exhausted = false;
  bool information_spd = false;
  std::size_t window = 0;
  std::size_t blocks = 0;
  ModelParams params;
  LikDiagnostics quad_diag;
};

// Composite/exact log-likelihood as a function of the named free parameters.
// The first (construction-time) evaluation verifies the quadrature by panel
// refinement and pins the refinement level for all later evaluations, so the
// objective surface is smooth for the simplex search.
class LikObjective {
 public:
  LikObjective(Observations obs, ModelParams base, std::vector<std::string> free_names,
               QuadConfig q, FitOptions opt)
      : obs_(std::move(obs)), base_(std::move(base)), names_(std::move(free_names)), q_(q),
        opt_(opt) {
    if (names_.empty()) throw std::invalid_argument("fit: no free parameters");
    const auto& table = detail::parameter_table();
    for (const auto& name : names_) {
      const auto it = table.find(name);
      if (it == table.end()) throw std::invalid_argument("fit: unknown parameter '" + name + "'");
      acc_.push_back(it->second);
    }
    LikOptions lo;
    lo.half_domain = opt_.half_domain;
    lo.verify = true;
    const LikResult first = eval_with(base_, lo);
    level_ = first.diag.level_used;
    diag_ = first.diag;
  }

  std::size_t dim() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const LikDiagnostics& diag() const { return diag_; }
  std::size_t evals() const { return evals_; }
  std::size_t infeasible() const { return infeasible_; }
  std::size_t window() const { return std::min<std::size_t>(opt_.window, 3); }

  std::vector<double> internal_at(const ModelParams& p) const {
    std::vector<double> v(dim());
    for (std::size_t k = 0; k < dim(); ++k)
      v[k] = detail::to_internal(acc_[k].get(p), acc_[k].transform);
    return v;
  }

  ModelParams params_at_internal(const std::vector<double>& v) const {
    ModelParams p = base_;
    for (std::size_t k = 0; k < dim(); ++k)
      acc_[k].set(p, detail::to_natural(v[k], acc_[k].transform));
    return p;
  }

  ModelParams params_at_natural(const std::vector<double>& v) const {
    ModelParams p = base_;
    for (std::size_t k = 0; k < dim(); ++k) acc_[k].set(p, v[k]);
    return p;
  }

  std::vector<double> natural_at(const ModelParams& p) const {
    std::vector<double> v(dim());
    for (std::size_t k = 0; k < dim(); ++k) v[k] = acc_[k].get(p);
    return v;
  }

  double loglik_internal(const std::vector<double>& v) {
    return loglik_params(params_at_internal(v));
  }

  // -inf marks a point the exact evaluation rejects (outside strips, pole
  // region, or an integral that cannot be certified)
  double loglik_params(const ModelParams& p) {
    ++evals_;
    LikOptions lo;
    lo.half_domain = opt_.half_domain;
    lo.verify = false;
    lo.base_level = level_;
    try {
      return eval_with(p, lo).loglik;
    } catch (const strip_error&) {
    } catch (const std::invalid_argument&) {
    } catch (const std::domain_error&) {
    } catch (const pole_error&) {
    } catch (const truncation_error&) {
    } catch (const budget_error&) {
    }
    ++infeasible_;
    return -inf;
  }

 private:
  LikResult eval_with(const ModelParams& p, const LikOptions& lo) {
    return composite_log_likelihood(obs_, p,
                                    std::min(window(), std::max<std::size_t>(obs_.n(), 1)), q_,
                                    lo, opt_.measure);
  }

  Observations obs_;
  ModelParams base_;
  std::vector<std::string> names_;
  std::vector<detail::ParamAccessor> acc_;
  QuadConfig q_;
  FitOptions opt_;
  int level_ = 0;
  std::size_t evals_ = 0;
  std::size_t infeasible_ = 0;
  LikDiagnostics diag_;
};

namespace detail {

// Hessian of the log-likelihood by central differences in natural
// coordinates, step h_k = max(1e-4, 1e-4 |theta_k|).
inline std::vector<double> hessian_natural(LikObjective& obj, const ModelParams& at) {
  const std::size_t k = obj.dim();
  const std::vector<double> theta = obj.natural_at(at);
  std::vector<double> h(k);
  for (std::size_t d = 0; d < k; ++d) h[d] = std::max(1e-4, 1e-4 * std::abs(theta[d]));

  auto f_at = [&](std::vector<double> v) {
    const double ll = obj.loglik_params(obj.params_at_natural(v));
    if (!std::isfinite(ll))
      throw std::domain_error("observed_information: infeasible finite-difference point");
    return ll;
  };

  std::vector<double> hess(k * k, 0.0);
  const double f0 = f_at(theta);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> up = theta, dn = theta;
    up[i] += h[i];
    dn[i] -= h[i];
    hess[i * k + i] = (f_at(up) - 2.0 * f0 + f_at(dn)) / (h[i] * h[i]);
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> pp = theta, pm = theta, mp = theta, mm = theta;
      pp[i] += h[i];
      pp[j] += h[j];
      pm[i] += h[i];
      pm[j] -= h[j];
      mp[i] -= h[i];
      mp[j] += h[j];
      mm[i] -= h[i];
      mm[j] -= h[j];
      const double v = (f_at(pp) - f_at(pm) - f_at(mp) + f_at(mm)) / (4.0 * h[i] * h[j]);
      hess[i * k + j] = hess[j * k + i] = v;
    }
  return hess;
}

}  // namespace detail

struct InformationResult {
  std::vector<std::string> names;
  std::vector<double> information;  // row-major k x k, negative Hessian
  std::vector<double> stderrs;      // empty when not positive definite
  bool spd = false;
};

inline InformationResult observed_information(const Observations& obs, const ModelParams& params,
                                              const std::vector<std::string>& free_names,
                                              const QuadConfig& q, const FitOptions& opt = {}) {
  params.validate();
  LikObjective obj(obs, params, free_names, q, opt);
  const std::size_t k = obj.dim();
  InformationResult out;
  out.names = obj.names();
  const std::vector<double> hess = detail::hessian_natural(obj, params);
  out.information.resize(k * k);
  for (std::size_t i = 0; i < k * k; ++i) out.information[i] = -hess[i];
  std::vector<double> chol = out.information;
  out.spd = detail::cholesky(chol, k);
  if (out.spd) {
    const std::vector<double> cov = detail::spd_inverse(chol, k);
    out.stderrs.resize(k);
    for (std::size_t d = 0; d < k; ++d) out.stderrs[d] = std::sqrt(cov[d * k + d]);
  }
  return out;
}

// Derivative-free maximum likelihood: Nelder-Mead over the transformed
// coordinates. Deterministic given data and the starting point; the accepted
// optimum never has lower log-likelihood than the start.
inline FitResult fit_mle(const Observations& obs, const ModelParams& init,
                         const std::vector<std::string>& free_names, const QuadConfig& q,
                         const FitOptions& opt = {}) {
  init.validate();
  LikObjective obj(obs, init, free_names, q, opt);
  const std::size_t k = obj.dim();

  std::vector<std::vector<double>> vx(k + 1, obj.internal_at(init));
  for (std::size_t j = 0; j < k; ++j) vx[j + 1][j] += opt.init_step;
  std::vector<double> fv(k + 1);
  for (std::size_t j = 0; j <= k; ++j) fv[j] = -obj.loglik_internal(vx[j]);
  if (!std::isfinite(fv[0])) throw std::invalid_argument("fit_mle: infeasible initial parameters");

  auto order = [&]() {
    std::vector<std::size_t> idx(k + 1);
    for (std::size_t j = 0; j <= k; ++j) idx[j] = j;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t l, std::size_t r) { return fv[l] < fv[r]; });
    std::vector<std::vector<double>> vx2(k + 1);
    std::vector<double> fv2(k + 1);
    for (std::size_t j = 0; j <= k; ++j) {
      vx2[j] = vx[idx[j]];
      fv2[j] = fv[idx[j]];
    }
    vx = std::move(vx2);
    fv = std::move(fv2);
  };

  FitResult res;
  res.names = obj.names();
  res.window = obj.window();

  std::size_t iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    order();
    double spread = 0.0;
    for (std::size_t j = 0; j <= k; ++j)
      for (std::size_t d = 0; d < k; ++d)
        spread = std::max(spread, std::abs(vx[j][d] - vx[0][d]));
    res.final_simplex_size = spread;
    if (spread < opt.xtol && std::abs(fv[k] - fv[0]) < opt.ftol) {
      res.converged = true;
      break;
    }

    std::vector<double> centroid(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t d = 0; d < k; ++d) centroid[d] += vx[j][d] / static_cast<double>(k);
    auto along = [&](double coef) {
      std::vector<double> p(k);
      for (std::size_t d = 0; d < k; ++d) p[d] = centroid[d] + coef * (vx[k][d] - centroid[d]);
      return p;
    };

    const std::vector<double> xr = along(-1.0);
    const double fr = -obj.loglik_internal(xr);
    if (fr < fv[0]) {
      const std::vector<double> xe = along(-2.0);
      const double fe = -obj.loglik_internal(xe);
      if (fe < fr) {
        vx[k] = xe;
        fv[k] = fe;
      } else {
        vx[k] = xr;
        fv[k] = fr;
      }
    } else if (fr < fv[k - 1]) {
      vx[k] = xr;
      fv[k] = fr;
    } else {
      const bool outside = fr < fv[k];
      const std::vector<double> xc = along(outside ? -0.5 : 0.5);
      const double fc = -obj.loglik_internal(xc);
      if (fc < std::min(fr, fv[k])) {
        vx[k] = xc;
        fv[k] = fc;
      } else {
        for (std::size_t j = 1; j <= k; ++j) {
          for (std::size_t d = 0; d < k; ++d) vx[j][d] = vx[0][d] + 0.5 * (vx[j][d] - vx[0][d]);
          fv[j] = -obj.loglik_internal(vx[j]);
        }
      }
    }
  }
  order();
  res.iterations = iter;
  res.budget_exhausted = !res.converged;
  res.objective_evals = obj.evals();
  res.infeasible_evals = obj.infeasible();
  res.params = obj.params_at_internal(vx[0]);
  res.estimates = obj.natural_at(res.params);
  res.loglik = -fv[0];
  res.blocks = (obs.n() + res.window - 1) / res.window;
  res.quad_diag = obj.diag();

  const std::vector<double> hess = detail::hessian_natural(obj, res.params);
  std::vector<double> info(k * k);
  for (std::size_t i = 0; i < k * k; ++i) info[i] = -hess[i];
  std::vector<double> chol = info;
  res.information_spd = detail::cholesky(chol, k);
  if (res.information_spd) {
    const std::vector<double> cov = detail::spd_inverse(chol, k);
    res.stderrs.resize(k);
    for (std::size_t d = 0; d < k; ++d) res.stderrs[d] = std::sqrt(cov[d * k + d]);
  }
  return res;
}

}  // namespace tclev
