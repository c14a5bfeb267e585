#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/quadrature.hpp"

// Tensor-product quadrature for integrals of the form
//
//   I(A) = integral_{R^n} e^{-E(y)} prod_i e^{i A_i y_i} dy,      n <= 3,
//
// where E is supplied by an evaluator. Axes are paneled to resolve the
// integrand's core, the phase oscillation, and a polynomially decaying tail;
// panels carry 16-point Gauss-Legendre nodes. The truncation radius grows
// until the boundary modulus times the outside volume falls below tolerance,
// and results are verified by re-integrating with every panel split in two.

namespace tclev {

namespace detail {

inline constexpr double gl16_x[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542};
inline constexpr double gl16_w[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806};

}  // namespace detail

struct AxisNodes {
  std::vector<double> y;
  std::vector<double> w;
  double radius = 0.0;
  std::size_t size() const { return y.size(); }
};

// Provides the negative exponent E(y) of the integrand. prepare() lets the
// implementation cache per-axis quantities for lattice nodes; at() assembles
// the value at a node tuple. Separable evaluators expose per-axis factors of
// e^{-E} instead, which lets the driver factor the whole tensor sum.
class NegExpEvaluator {
 public:
  virtual ~NegExpEvaluator() = default;
  virtual std::size_t dims() const = 0;
  // Gaussian-like width hint of e^{-E} along one axis
  virtual double core_scale(std::size_t dim) const = 0;
  virtual void prepare(const std::vector<AxisNodes>& axes) = 0;
  virtual cplx at(const std::size_t* idx) = 0;
  virtual cplx at_y(const double* y) = 0;
  virtual bool separable() const { return false; }
  virtual cplx axis_factor(std::size_t /*dim*/, std::size_t /*node*/) const { return {1.0, 0.0}; }
};

struct OscDiagnostics {
  std::size_t evals = 0;
  double y_radius = 0.0;
  double refine_error = 0.0;
  double tail_estimate = 0.0;
  double decay_exponent = 0.0;
  double im_re_ratio = 0.0;
  int level_used = 0;
  bool heavy_tail_warning = false;
  bool symmetric_half = false;
};

struct OscOptions {
  bool half_domain = false;  // exploit F(-y) = conj F(y); result is 2 Re(half)
  int base_level = 0;        // panel pre-splits before the first pass
  int max_level = 5;
};

namespace detail {

inline std::vector<double> axis_edges(double radius, double h_core, double y_core,
                                      double osc_cap, int level) {
  std::vector<double> edges{0.0};
  double w = std::min(h_core, osc_cap);
  double pos = 0.0;
  while (pos < radius) {
    if (pos >= y_core) w = std::min(w * 1.7, osc_cap);
    double next = pos + w;
    if (next > radius - 0.25 * w) next = radius;
    edges.push_back(next);
    pos = next;
  }
  if (level > 0) {
    const std::size_t parts = std::size_t{1} << level;
    std::vector<double> fine{edges.front()};
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
      for (std::size_t k = 1; k <= parts; ++k)
        fine.push_back(edges[i] +
                       (edges[i + 1] - edges[i]) * static_cast<double>(k) / static_cast<double>(parts));
    edges = std::move(fine);
  }
  return edges;
}

inline AxisNodes build_axis(double radius, double h_core, double y_core, double osc_cap,
                            bool half, int level) {
  std::vector<double> pos_edges = axis_edges(radius, h_core, y_core, osc_cap, level);
  std::vector<double> edges;
  if (half) {
    edges = pos_edges;
  } else {
    edges.reserve(2 * pos_edges.size() - 1);
    for (std::size_t i = pos_edges.size(); i-- > 1;) edges.push_back(-pos_edges[i]);
    edges.insert(edges.end(), pos_edges.begin(), pos_edges.end());
  }
  AxisNodes ax;
  ax.radius = radius;
  ax.y.reserve((edges.size() - 1) * 16);
  ax.w.reserve((edges.size() - 1) * 16);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double c = 0.5 * (edges[p] + edges[p + 1]);
    const double h = 0.5 * (edges[p + 1] - edges[p]);
    for (int j = 7; j >= 0; --j) {
      ax.y.push_back(c - h * gl16_x[j]);
      ax.w.push_back(h * gl16_w[j]);
    }
    for (int j = 0; j < 8; ++j) {
      ax.y.push_back(c + h * gl16_x[j]);
      ax.w.push_back(h * gl16_w[j]);
    }
  }
  return ax;
}

// Fixed probe directions (sup-norm unit vectors) used for the truncation rule.
inline std::vector<std::array<double, 3>> probe_directions(std::size_t n) {
  std::vector<std::array<double, 3>> dirs;
  for (std::size_t d = 0; d < n; ++d) {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    v[d] = 1.0;
    dirs.push_back(v);
    v[d] = -1.0;
    dirs.push_back(v);
  }
  if (n >= 2) {
    const int corners = 1 << n;
    for (int c = 0; c < corners; ++c) {
      std::array<double, 3> v{0.0, 0.0, 0.0};
      for (std::size_t d = 0; d < n; ++d) v[d] = (c >> d) & 1 ? 1.0 : -1.0;
      dirs.push_back(v);
    }
    // a few skewed rays, fixed across runs
    const double skews[4][3] = {{1.0, 0.37, 0.0}, {0.37, 1.0, 0.0}, {1.0, -0.61, 0.29}, {-0.53, 1.0, -0.87}};
    for (const auto& s : skews) {
      std::array<double, 3> v{0.0, 0.0, 0.0};
      double mx = 0.0;
      for (std::size_t d = 0; d < n; ++d) mx = std::max(mx, std::abs(s[d]));
      for (std::size_t d = 0; d < n; ++d) v[d] = s[d] / mx;
      dirs.push_back(v);
    }
  }
  return dirs;
}

}  // namespace detail

class OscillatoryIntegrator {
 public:
  OscillatoryIntegrator(NegExpEvaluator& eval, const QuadConfig& q, OscOptions opt = {})
      : eval_(eval), q_(q), opt_(opt) {}

  // Integrates for every phase vector in A_list (each of length dims()).
  std::vector<cplx> integrate(const std::vector<std::vector<double>>& A_list,
                              OscDiagnostics& diag) {
    const std::size_t n = eval_.dims();
    for (const auto& A : A_list)
      if (A.size() != n) throw std::invalid_argument("oscillatory: phase vector length mismatch");

    double a_max = 1e-3;
    for (const auto& A : A_list)
      for (double v : A) a_max = std::max(a_max, std::abs(v));

    diag = OscDiagnostics{};
    diag.symmetric_half = opt_.half_domain;
    y_tol_ = resolved_y_tol(q_, n);
    double radius;
    if (q_.y_radius > 0.0) {
      radius = q_.y_radius;
      probe_shell(n, radius, diag);  // diagnostics only, radius stays fixed
    } else {
      radius = auto_radius(n, diag);
    }
    diag.y_radius = radius;

    // GL-16 keeps the phase error negligible for panels up to ~13/|A| wide,
    // and resolves a Gaussian-like core comfortably at ~2 sigma per panel
    const double osc_cap = std::min(13.0 / a_max, 8.0);
    std::vector<double> sigma(n), h_core(n), y_core(n);
    for (std::size_t d = 0; d < n; ++d) {
      sigma[d] = eval_.core_scale(d);
      h_core[d] = std::min(2.2 * sigma[d], 2.0);
      y_core[d] = std::min(radius, 7.0 * sigma[d] + 1.0);
    }

    std::vector<cplx> prev;
    for (int level = opt_.base_level;; ++level) {
      std::vector<AxisNodes> axes(n);
      std::size_t lattice = 1, axis_sum = 0;
      for (std::size_t d = 0; d < n; ++d) {
        const bool half = opt_.half_domain && d == 0;
        axes[d] = detail::build_axis(radius, h_core[d], y_core[d], osc_cap, half, level);
        lattice *= axes[d].size();
        axis_sum += axes[d].size();
      }
      // separable integrands are evaluated per axis node, not per tuple
      const std::size_t charged = eval_.separable() ? axis_sum : lattice;
      if (diag.evals + charged > q_.max_evals)
        throw budget_error("oscillatory: lattice of " + std::to_string(charged) +
                           " evaluations exceeds the budget; loosen quad.y_tol, pin "
                           "quad.y_radius, or raise quad.max_evals");
      diag.evals += charged;

      eval_.prepare(axes);
      std::vector<cplx> cur = eval_.separable() ? contract_separable(axes, A_list)
                                                : contract_dense(axes, A_list);
      if (opt_.half_domain)
        for (auto& v : cur) v = 2.0 * v;

      diag.level_used = level;
      if (level >= opt_.max_level && prev.empty()) {
        finish_diag(cur, diag);
        return cur;  // single unverified pass
      }
      if (!prev.empty()) {
        double err = 0.0;
        for (std::size_t k = 0; k < cur.size(); ++k) err = std::max(err, std::abs(cur[k] - prev[k]));
        diag.refine_error = err;
        if (err <= y_tol_ || level >= opt_.max_level) {
          // the coarser level is certified against this one; callers that
          // freeze the level (the fitter) can reuse it
          if (err <= y_tol_) diag.level_used = level - 1;
          finish_diag(cur, diag);
          return cur;
        }
      }
      prev = std::move(cur);
    }
  }

  cplx integrate_one(const std::vector<double>& A, OscDiagnostics& diag) {
    return integrate({A}, diag)[0];
  }

 private:
  void finish_diag(const std::vector<cplx>& values, OscDiagnostics& diag) const {
    double ratio = 0.0;
    if (!opt_.half_domain)
      for (const cplx& v : values)
        ratio = std::max(ratio, std::abs(v.imag()) / std::max(std::abs(v.real()), 1e-300));
    diag.im_re_ratio = ratio;
  }

  // boundary-shell probe: max modulus, slowest decay exponent, tail estimate
  double probe_shell(std::size_t n, double radius, OscDiagnostics& diag) {
    const auto dirs = detail::probe_directions(n);
    double mod_max = 0.0, p_min = inf;
    for (const auto& dir : dirs) {
      double y_full[3] = {0.0, 0.0, 0.0}, y_half[3] = {0.0, 0.0, 0.0};
      for (std::size_t d = 0; d < n; ++d) {
        y_full[d] = radius * dir[d];
        y_half[d] = 0.5 * radius * dir[d];
      }
      const double re_full = eval_.at_y(y_full).real();
      const double re_half = eval_.at_y(y_half).real();
      diag.evals += 2;
      mod_max = std::max(mod_max, std::exp(-re_full));
      p_min = std::min(p_min, (re_full - re_half) / std::log(2.0));
    }
    diag.decay_exponent = p_min;
    if (mod_max < 1e-280) {
      diag.tail_estimate = 0.0;
      return 0.0;
    }
    diag.heavy_tail_warning = diag.heavy_tail_warning || p_min <= static_cast<double>(n) + 0.2;
    const double p_eff = std::max(p_min - static_cast<double>(n), 0.5);
    const double tail = mod_max * std::pow(2.0 * radius, static_cast<double>(n)) *
                        static_cast<double>(n) / p_eff;
    diag.tail_estimate = tail;
    return tail;
  }

  double auto_radius(std::size_t n, OscDiagnostics& diag) {
    double core = 1.0;
    for (std::size_t d = 0; d < n; ++d) core = std::max(core, 8.0 * eval_.core_scale(d) + 1.0);
    double radius = std::max(10.0, core + 5.0);
    for (int iter = 0; iter < 96; ++iter) {
      const double tail = probe_shell(n, radius, diag);
      if (tail <= 0.5 * y_tol_) return radius;
      radius *= 1.3;
      if (radius > 1e6)
        throw truncation_error(
            "oscillatory: truncation radius exceeded 1e6 with tail estimate " +
            std::to_string(tail) + "; loosen quad.y_tol or pin quad.y_radius");
    }
    throw truncation_error("oscillatory: truncation rule did not converge");
  }

  // Fully factored path for separable integrands: I = prod_d sum_k F_d[k] w e^{i A_d y}.
  std::vector<cplx> contract_separable(const std::vector<AxisNodes>& axes,
                                       const std::vector<std::vector<double>>& A_list) {
    const std::size_t n = axes.size();
    std::vector<cplx> out(A_list.size());
    for (std::size_t ai = 0; ai < A_list.size(); ++ai) {
      cplx prod{1.0, 0.0};
      for (std::size_t d = 0; d < n; ++d) {
        cplx axis_sum{0.0, 0.0};
        for (std::size_t k = 0; k < axes[d].size(); ++k)
          axis_sum += axes[d].w[k] * eval_.axis_factor(d, k) *
                      std::exp(cplx{0.0, A_list[ai][d] * axes[d].y[k]});
        prod *= axis_sum;
      }
      out[ai] = prod;
    }
    return out;
  }

  std::vector<cplx> contract_dense(const std::vector<AxisNodes>& axes,
                                   const std::vector<std::vector<double>>& A_list) {
    const std::size_t n = axes.size();
    if (n == 1) return contract_1d(axes, A_list);
    if (n == 2) return contract_2d(axes, A_list);
    return contract_3d(axes, A_list);
  }

  std::vector<cplx> contract_1d(const std::vector<AxisNodes>& axes,
                                const std::vector<std::vector<double>>& A_list) {
    const AxisNodes& ax = axes[0];
    std::vector<cplx> V(ax.size());
    std::size_t idx[1];
    for (std::size_t k = 0; k < ax.size(); ++k) {
      idx[0] = k;
      V[k] = ax.w[k] * std::exp(-eval_.at(idx));
    }
    std::vector<cplx> out(A_list.size());
    parallel_chunks(A_list.size(), q_.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t ai = lo; ai < hi; ++ai) {
        cplx acc{0.0, 0.0};
        const double A = A_list[ai][0];
        for (std::size_t k = 0; k < ax.size(); ++k)
          acc += V[k] * std::exp(cplx{0.0, A * ax.y[k]});
        out[ai] = acc;
      }
    });
    return out;
  }

  std::vector<cplx> contract_2d(const std::vector<AxisNodes>& axes,
                                const std::vector<std::vector<double>>& A_list) {
    const AxisNodes& a0 = axes[0];
    const AxisNodes& a1 = axes[1];
    const std::size_t n0 = a0.size(), n1 = a1.size();
    std::vector<cplx> V(n0 * n1);
    parallel_chunks(n0, q_.threads, [&](std::size_t lo, std::size_t hi) {
      std::size_t idx[2];
      for (std::size_t j = lo; j < hi; ++j) {
        idx[0] = j;
        const double wj = a0.w[j];
        for (std::size_t k = 0; k < n1; ++k) {
          idx[1] = k;
          V[j * n1 + k] = wj * a1.w[k] * std::exp(-eval_.at(idx));
        }
      }
    });
    std::vector<cplx> out(A_list.size());
    parallel_chunks(A_list.size(), q_.threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<cplx> ph1(n1);
      for (std::size_t ai = lo; ai < hi; ++ai) {
        for (std::size_t k = 0; k < n1; ++k)
          ph1[k] = std::exp(cplx{0.0, A_list[ai][1] * a1.y[k]});
        cplx acc{0.0, 0.0};
        for (std::size_t j = 0; j < n0; ++j) {
          cplx row{0.0, 0.0};
          const cplx* vrow = V.data() + j * n1;
          for (std::size_t k = 0; k < n1; ++k) row += vrow[k] * ph1[k];
          acc += row * std::exp(cplx{0.0, A_list[ai][0] * a0.y[j]});
        }
        out[ai] = acc;
      }
    });
    return out;
  }

  std::vector<cplx> contract_3d(const std::vector<AxisNodes>& axes,
                                const std::vector<std::vector<double>>& A_list) {
    const AxisNodes& a0 = axes[0];
    const AxisNodes& a1 = axes[1];
    const AxisNodes& a2 = axes[2];
    const std::size_t n_a = A_list.size();
    std::vector<std::vector<cplx>> ph0(n_a), ph1(n_a), ph2(n_a);
    for (std::size_t ai = 0; ai < n_a; ++ai) {
      ph0[ai].resize(a0.size());
      ph1[ai].resize(a1.size());
      ph2[ai].resize(a2.size());
      for (std::size_t j = 0; j < a0.size(); ++j)
        ph0[ai][j] = std::exp(cplx{0.0, A_list[ai][0] * a0.y[j]}) * a0.w[j];
      for (std::size_t k = 0; k < a1.size(); ++k)
        ph1[ai][k] = std::exp(cplx{0.0, A_list[ai][1] * a1.y[k]}) * a1.w[k];
      for (std::size_t l = 0; l < a2.size(); ++l)
        ph2[ai][l] = std::exp(cplx{0.0, A_list[ai][2] * a2.y[l]}) * a2.w[l];
    }
    std::vector<std::vector<cplx>> partial(a0.size(), std::vector<cplx>(n_a, cplx{0.0, 0.0}));
    parallel_chunks(a0.size(), q_.threads, [&](std::size_t lo, std::size_t hi) {
      std::size_t idx[3];
      std::vector<cplx> inner(n_a);
      for (std::size_t j = lo; j < hi; ++j) {
        idx[0] = j;
        for (std::size_t k = 0; k < a1.size(); ++k) {
          idx[1] = k;
          std::fill(inner.begin(), inner.end(), cplx{0.0, 0.0});
          for (std::size_t l = 0; l < a2.size(); ++l) {
            idx[2] = l;
            const cplx v = std::exp(-eval_.at(idx));
            for (std::size_t ai = 0; ai < n_a; ++ai) inner[ai] += v * ph2[ai][l];
          }
          for (std::size_t ai = 0; ai < n_a; ++ai) partial[j][ai] += inner[ai] * ph1[ai][k];
        }
      }
    });
    std::vector<cplx> out(n_a, cplx{0.0, 0.0});
    for (std::size_t j = 0; j < a0.size(); ++j)
      for (std::size_t ai = 0; ai < n_a; ++ai) out[ai] += partial[j][ai] * ph0[ai][j];
    return out;
  }

  NegExpEvaluator& eval_;
  QuadConfig q_;
  OscOptions opt_;
  double y_tol_ = 1e-8;
};

}  // namespace tclev
