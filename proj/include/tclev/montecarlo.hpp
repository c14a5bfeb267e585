#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "tclev/common.hpp"
#include "tclev/levy.hpp"
#include "tclev/likelihood.hpp"
#include "tclev/prm.hpp"
#include "tclev/timechange.hpp"

namespace tclev {

// Exact simulation output; row p of `returns` holds X_1..X_n of path p.
// Latents, when retained, let every row be reconstructed exactly.
struct SimOutput {
  std::size_t n = 0;
  std::size_t n_paths = 0;
  std::vector<double> returns;  // n_paths x n, row-major
  bool has_latents = false;
  std::vector<double> tau, gamma, j1, j2, eps;  // n_paths x n each

  double ret(std::size_t path, std::size_t i) const { return returns[path * n + i]; }
};

struct SimOptions {
  bool keep_latents = false;
  unsigned threads = 1;
};

// Simulates model returns with no path discretization: volatility jumps are
// drawn from the Poisson factor(s), tau_i / gamma_i are the exact kernel
// sums, and the Levy increments are drawn directly at the realized
// subordinated times. Paths are chunked with per-chunk substreams, so the
// output is identical for any thread count.
inline SimOutput simulate_returns(const ModelParams& p, std::size_t n, std::size_t n_paths,
                                  std::uint64_t seed, const SimOptions& opt = {}) {
  p.validate();
  if (n < 1) throw std::invalid_argument("simulate_returns: n must be >= 1");
  const double horizon = static_cast<double>(n) * p.delta;
  const IntensityMeasure nu1 = p.vol.factor_intensity(0, horizon);
  const IntensityMeasure nu2 =
      p.vol.has_second_factor() ? p.vol.factor_intensity(1, horizon) : IntensityMeasure{};

  SimOutput out;
  out.n = n;
  out.n_paths = n_paths;
  out.returns.resize(n_paths * n);
  out.has_latents = opt.keep_latents;
  if (opt.keep_latents) {
    out.tau.resize(n_paths * n);
    out.gamma.resize(n_paths * n);
    out.j1.resize(n_paths * n);
    out.j2.resize(n_paths * n);
    out.eps.resize(n_paths * n);
  }

  constexpr std::size_t chunk_paths = 4096;
  const std::size_t chunks = (n_paths + chunk_paths - 1) / chunk_paths;

  parallel_chunks(chunks, opt.threads, [&](std::size_t c_lo, std::size_t c_hi) {
    for (std::size_t c = c_lo; c < c_hi; ++c) {
      // seed_seq keeps 32 bits per entry, so split the seed
      std::seed_seq sq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(c)};
      std::mt19937_64 rng(sq);
      // fresh distribution per chunk: normal_distribution caches a spare
      // variate, which must not leak across chunk boundaries
      std::normal_distribution<double> normal(0.0, 1.0);
      const std::size_t path_lo = c * chunk_paths;
      const std::size_t path_hi = std::min(n_paths, path_lo + chunk_paths);
      for (std::size_t path = path_lo; path < path_hi; ++path) {
        const PointSet ps1 = sample_points(nu1, rng);
        PointSet ps2;
        if (p.vol.has_second_factor()) ps2 = sample_points(nu2, rng);

        for (std::size_t i = 0; i < n; ++i) {
          const double t1 = static_cast<double>(i) * p.delta;
          const double t2 = t1 + p.delta;
          double tau_i = 0.0;
          for (const PrmPoint& pt : ps1.points)
            tau_i += pt.x * ou_weight(pt.s, t1, t2, p.vol.lambda_ou);
          double gamma_i = 0.0;
          if (p.vol.has_second_factor()) {
            for (const PrmPoint& pt : ps2.points)
              gamma_i += pt.x * ou_weight(pt.s, t1, t2, p.vol.lambda_ou2);
          } else {
            gamma_i = p.vol.kappa * tau_i;
          }
          const double tau_star = tau_i + gamma_i;
          const double j1 = sample_increment(p.levy1, tau_i, rng);
          const double j2 = sample_increment(p.levy2, gamma_i, rng);
          const double e = normal(rng);
          double x = p.mu * p.delta + j1 + j2 + p.beta * tau_star + p.rho * gamma_i;
          if (tau_star > 0.0) x += std::sqrt(tau_star) * e;
          out.returns[path * n + i] = x;
          if (opt.keep_latents) {
            out.tau[path * n + i] = tau_i;
            out.gamma[path * n + i] = gamma_i;
            out.j1[path * n + i] = j1;
            out.j2[path * n + i] = j2;
            out.eps[path * n + i] = e;
          }
        }
      }
    }
  });
  return out;
}

struct Kde {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> stderr_band;  // pointwise standard error of the estimate
  double bandwidth = 0.0;
};

// Gaussian-kernel density estimate with the normal-reference bandwidth
// 0.9 min(sd, iqr/1.34) m^{-1/5} when none is supplied. The pointwise
// standard error is the sample sd of the kernel terms over sqrt(m).
inline Kde empirical_density(const std::vector<double>& samples, const std::vector<double>& grid,
                             double bandwidth = 0.0, unsigned threads = 1) {
  const std::size_t m = samples.size();
  if (m < 10'000)
    throw std::invalid_argument("empirical_density: needs at least 1e4 samples");
  Kde out;
  out.grid = grid;
  out.density.assign(grid.size(), 0.0);
  out.stderr_band.assign(grid.size(), 0.0);

  if (bandwidth <= 0.0) {
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double v : sorted) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m - 1);
    const double iqr = sorted[static_cast<std::size_t>(0.75 * (m - 1))] -
                       sorted[static_cast<std::size_t>(0.25 * (m - 1))];
    const double spread = std::min(std::sqrt(var), iqr / 1.34);
    bandwidth = 0.9 * spread * std::pow(static_cast<double>(m), -0.2);
    if (!(bandwidth > 0.0))
      throw std::invalid_argument("empirical_density: degenerate sample spread");
  }
  out.bandwidth = bandwidth;

  const double h = bandwidth;
  const double norm = 1.0 / (h * std::sqrt(2.0 * pi));
  parallel_chunks(grid.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t g = lo; g < hi; ++g) {
      double sum = 0.0, sum2 = 0.0;
      for (double v : samples) {
        const double z = (grid[g] - v) / h;
        const double k = norm * std::exp(-0.5 * z * z);
        sum += k;
        sum2 += k * k;
      }
      const double mean = sum / static_cast<double>(m);
      const double var = std::max(0.0, sum2 / static_cast<double>(m) - mean * mean);
      out.density[g] = mean;
      out.stderr_band[g] = std::sqrt(var / static_cast<double>(m));
    }
  });
  return out;
}

struct EmpiricalCf {
  std::vector<cplx> value;
  std::vector<double> stderr_re;
  std::vector<double> stderr_im;
};

// Empirical characteristic function mean of e^{i u X} with per-component
// standard errors.
inline EmpiricalCf empirical_cf(const std::vector<double>& samples,
                                const std::vector<double>& u) {
  const std::size_t m = samples.size();
  if (m < 10'000) throw std::invalid_argument("empirical_cf: needs at least 1e4 samples");
  EmpiricalCf out;
  out.value.resize(u.size());
  out.stderr_re.resize(u.size());
  out.stderr_im.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    double sr = 0.0, si = 0.0, sr2 = 0.0, si2 = 0.0;
    for (double x : samples) {
      const double re = std::cos(u[k] * x);
      const double im = std::sin(u[k] * x);
      sr += re;
      si += im;
      sr2 += re * re;
      si2 += im * im;
    }
    const double mr = sr / static_cast<double>(m);
    const double mi = si / static_cast<double>(m);
    out.value[k] = {mr, mi};
    out.stderr_re[k] = std::sqrt(std::max(0.0, sr2 / static_cast<double>(m) - mr * mr) /
                                 static_cast<double>(m));
    out.stderr_im[k] = std::sqrt(std::max(0.0, si2 / static_cast<double>(m) - mi * mi) /
                                 static_cast<double>(m));
  }
  return out;
}

// Joint version over simulated paths: mean of e^{i sum_k u_k X_k}.
inline EmpiricalCf empirical_joint_cf(const SimOutput& sim,
                                      const std::vector<std::vector<double>>& u_list) {
  if (sim.n_paths < 10'000)
    throw std::invalid_argument("empirical_joint_cf: needs at least 1e4 paths");
  EmpiricalCf out;
  out.value.resize(u_list.size());
  out.stderr_re.resize(u_list.size());
  out.stderr_im.resize(u_list.size());
  for (std::size_t k = 0; k < u_list.size(); ++k) {
    const std::vector<double>& u = u_list[k];
    if (u.size() != sim.n)
      throw std::invalid_argument("empirical_joint_cf: u length must equal n");
    double sr = 0.0, si = 0.0, sr2 = 0.0, si2 = 0.0;
    for (std::size_t path = 0; path < sim.n_paths; ++path) {
      double phase = 0.0;
      for (std::size_t i = 0; i < sim.n; ++i) phase += u[i] * sim.ret(path, i);
      const double re = std::cos(phase);
      const double im = std::sin(phase);
      sr += re;
      si += im;
      sr2 += re * re;
      si2 += im * im;
    }
    const double m = static_cast<double>(sim.n_paths);
    const double mr = sr / m, mi = si / m;
    out.value[k] = {mr, mi};
    out.stderr_re[k] = std::sqrt(std::max(0.0, sr2 / m - mr * mr) / m);
    out.stderr_im[k] = std::sqrt(std::max(0.0, si2 / m - mi * mi) / m);
  }
  return out;
}

}  // namespace tclev
