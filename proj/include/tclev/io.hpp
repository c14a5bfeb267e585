#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tclev/estimate.hpp"
#include "tclev/levy.hpp"
#include "tclev/likelihood.hpp"
#include "tclev/montecarlo.hpp"
#include "tclev/prm.hpp"
#include "tclev/quadrature.hpp"
#include "tclev/timechange.hpp"

namespace tclev {

using nlohmann::json;

inline constexpr int schema_version = 1;

// Schema violations carry the dotted field path of the offending entry.
class config_error : public std::runtime_error {
 public:
  config_error(const std::string& path, const std::string& what)
      : std::runtime_error("config error at '" + path + "': " + what), field_path(path) {}
  std::string field_path;
};

namespace detail_io {

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                           const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw config_error(path + "." + it.key(), "unknown key");
  }
}

inline double get_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw config_error(path + "." + key, "missing required number");
  if (!j[key].is_number()) throw config_error(path + "." + key, "expected a number");
  return j[key].get<double>();
}

inline double get_number_or(const json& j, const std::string& key, const std::string& path,
                            double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw config_error(path + "." + key, "expected a number");
  return j[key].get<double>();
}

inline double get_positive(const json& j, const std::string& key, const std::string& path) {
  const double v = get_number(j, key, path);
  if (!(v > 0.0)) throw config_error(path + "." + key, "must be > 0");
  return v;
}

inline std::string get_string_or(const json& j, const std::string& key, const std::string& path,
                                 const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw config_error(path + "." + key, "expected a string");
  return j[key].get<std::string>();
}

}  // namespace detail_io

// ---------------------------------------------------------------------------
// LevySpec

inline json to_json(const LevySpec& s) {
  switch (s.kind) {
    case LevyKind::Zero:
      return {{"kind", "zero"}};
    case LevyKind::CompoundPoissonNormal:
      return {{"kind", "compound_poisson_normal"},
              {"rate", s.rate},
              {"jump_mean", s.jump_mean},
              {"jump_sd", s.jump_sd}};
    case LevyKind::CompoundPoissonDoubleExp:
      return {{"kind", "compound_poisson_double_exp"},
              {"rate", s.rate},
              {"p_up", s.p_up},
              {"eta_plus", s.eta_plus},
              {"eta_minus", s.eta_minus}};
    case LevyKind::GammaSubordinator:
      return {{"kind", "gamma"}, {"a", s.a}, {"b", s.b}};
    case LevyKind::InverseGaussian:
      return {{"kind", "inverse_gaussian"}, {"delta", s.delta}, {"gamma", s.gamma_ig}};
  }
  return {};
}

inline LevySpec levy_from_json(const json& j, const std::string& path) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error(path, "expected an object");
  const std::string kind = get_string_or(j, "kind", path, "");
  try {
    if (kind == "zero") {
      reject_unknown(j, {"kind"}, path);
      return LevySpec::zero();
    }
    if (kind == "compound_poisson_normal") {
      reject_unknown(j, {"kind", "rate", "jump_mean", "jump_sd"}, path);
      return LevySpec::compound_poisson_normal(get_positive(j, "rate", path),
                                               get_number(j, "jump_mean", path),
                                               get_number(j, "jump_sd", path));
    }
    if (kind == "compound_poisson_double_exp") {
      reject_unknown(j, {"kind", "rate", "p_up", "eta_plus", "eta_minus"}, path);
      return LevySpec::compound_poisson_double_exp(
          get_positive(j, "rate", path), get_number(j, "p_up", path),
          get_positive(j, "eta_plus", path), get_positive(j, "eta_minus", path));
    }
    if (kind == "gamma") {
      reject_unknown(j, {"kind", "a", "b"}, path);
      return LevySpec::gamma_subordinator(get_positive(j, "a", path),
                                          get_positive(j, "b", path));
    }
    if (kind == "inverse_gaussian") {
      reject_unknown(j, {"kind", "delta", "gamma"}, path);
      return LevySpec::inverse_gaussian(get_positive(j, "delta", path),
                                        get_positive(j, "gamma", path));
    }
  } catch (const std::invalid_argument& e) {
    throw config_error(path, e.what());
  }
  throw config_error(path + ".kind",
                     "expected one of zero | compound_poisson_normal | "
                     "compound_poisson_double_exp | gamma | inverse_gaussian");
}

// ---------------------------------------------------------------------------
// VolSpec

inline json to_json(const VolSpec& v) {
  json factors;
  if (v.mode == FactorMode::CommonFactor) {
    factors = {{"mode", "common"}, {"kappa", v.kappa}};
  } else {
    factors = {{"mode", "independent"},
               {"lambda_ou", v.lambda_ou2},
               {"a", v.a2},
               {"b", v.b2}};
  }
  return {{"lambda_ou", v.lambda_ou}, {"a", v.a},      {"b", v.b},
          {"s_max", v.s_max},         {"factors", factors}};
}

inline VolSpec vol_from_json(const json& j, const std::string& path) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error(path, "expected an object");
  reject_unknown(j, {"lambda_ou", "a", "b", "s_max", "factors"}, path);
  VolSpec v;
  v.lambda_ou = get_positive(j, "lambda_ou", path);
  v.a = get_positive(j, "a", path);
  v.b = get_positive(j, "b", path);
  v.s_max = get_number_or(j, "s_max", path, 0.0);
  if (v.s_max < 0.0) throw config_error(path + ".s_max", "must be >= 0 (0 = auto)");
  if (j.contains("factors")) {
    const json& f = j["factors"];
    const std::string fp = path + ".factors";
    const std::string mode = get_string_or(f, "mode", fp, "common");
    if (mode == "common") {
      reject_unknown(f, {"mode", "kappa"}, fp);
      v.mode = FactorMode::CommonFactor;
      v.kappa = get_number_or(f, "kappa", fp, 0.0);
      if (v.kappa < 0.0) throw config_error(fp + ".kappa", "must be >= 0");
    } else if (mode == "independent") {
      reject_unknown(f, {"mode", "lambda_ou", "a", "b"}, fp);
      v.mode = FactorMode::IndependentFactors;
      v.lambda_ou2 = get_positive(f, "lambda_ou", fp);
      v.a2 = get_positive(f, "a", fp);
      v.b2 = get_positive(f, "b", fp);
    } else {
      throw config_error(fp + ".mode", "expected 'common' or 'independent'");
    }
  } else {
    v.mode = FactorMode::CommonFactor;
    v.kappa = 0.0;
  }
  v.validate();
  return v;
}

// ---------------------------------------------------------------------------
// IntensityMeasure

inline json to_json(const IntensityMeasure& m) {
  json j = {{"rate_breaks", m.rate_breaks}, {"rate_values", m.rate_values}};
  if (m.mark_law == MarkLaw::Exponential) {
    j["marks"] = {{"law", "exponential"}, {"rate", m.mark_rate}};
  } else {
    j["marks"] = {{"law", "tabulated"}, {"grid", m.mark_grid}, {"weights", m.mark_weights}};
  }
  return j;
}

inline IntensityMeasure intensity_from_json(const json& j, const std::string& path) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error(path, "expected an object");
  reject_unknown(j, {"rate_breaks", "rate_values", "marks"}, path);
  IntensityMeasure m;
  if (!j.contains("rate_breaks") || !j.contains("rate_values"))
    throw config_error(path, "needs rate_breaks and rate_values");
  m.rate_breaks = j["rate_breaks"].get<std::vector<double>>();
  m.rate_values = j["rate_values"].get<std::vector<double>>();
  if (j.contains("marks")) {
    const json& mk = j["marks"];
    const std::string mp = path + ".marks";
    const std::string law = get_string_or(mk, "law", mp, "exponential");
    if (law == "exponential") {
      reject_unknown(mk, {"law", "rate"}, mp);
      m.mark_law = MarkLaw::Exponential;
      m.mark_rate = get_positive(mk, "rate", mp);
    } else if (law == "tabulated") {
      reject_unknown(mk, {"law", "grid", "weights"}, mp);
      m.mark_law = MarkLaw::Tabulated;
      m.mark_grid = mk["grid"].get<std::vector<double>>();
      m.mark_weights = mk["weights"].get<std::vector<double>>();
    } else {
      throw config_error(mp + ".law", "expected 'exponential' or 'tabulated'");
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(path, e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// ModelParams and QuadConfig

inline json to_json(const ModelParams& p) {
  return {{"mu", p.mu},           {"beta", p.beta},   {"rho", p.rho},
          {"delta", p.delta},     {"levy1", to_json(p.levy1)},
          {"levy2", to_json(p.levy2)}, {"vol", to_json(p.vol)}};
}

inline ModelParams model_from_json(const json& j, const std::string& path) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error(path, "expected an object");
  reject_unknown(j, {"mu", "beta", "rho", "delta", "levy1", "levy2", "vol"}, path);
  ModelParams p;
  p.mu = get_number_or(j, "mu", path, 0.0);
  p.beta = get_number_or(j, "beta", path, 0.0);
  p.rho = get_number_or(j, "rho", path, 0.0);
  p.delta = get_number_or(j, "delta", path, 1.0);
  if (!(p.delta > 0.0)) throw config_error(path + ".delta", "must be > 0");
  if (j.contains("levy1")) p.levy1 = levy_from_json(j["levy1"], path + ".levy1");
  if (j.contains("levy2")) p.levy2 = levy_from_json(j["levy2"], path + ".levy2");
  if (!j.contains("vol")) throw config_error(path + ".vol", "missing required section");
  p.vol = vol_from_json(j["vol"], path + ".vol");
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw config_error(path, e.what());
  }
  return p;
}

inline json to_json(const QuadConfig& q) {
  return {{"y_radius", q.y_radius},   {"y_tol", q.y_tol},
          {"s_tol", q.s_tol},         {"pole_tol", q.pole_tol},
          {"im_ratio_tol", q.im_ratio_tol}, {"max_evals", q.max_evals}};
}

inline QuadConfig quad_from_json(const json& j, const std::string& path) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error(path, "expected an object");
  reject_unknown(j, {"y_radius", "y_tol", "s_tol", "pole_tol", "im_ratio_tol", "max_evals"},
                 path);
  QuadConfig q;
  q.y_radius = get_number_or(j, "y_radius", path, 0.0);
  if (q.y_radius < 0.0) throw config_error(path + ".y_radius", "must be >= 0 (0 = auto)");
  q.y_tol = get_number_or(j, "y_tol", path, q.y_tol);
  q.s_tol = get_number_or(j, "s_tol", path, q.s_tol);
  q.pole_tol = get_number_or(j, "pole_tol", path, q.pole_tol);
  q.im_ratio_tol = get_number_or(j, "im_ratio_tol", path, q.im_ratio_tol);
  if (q.y_tol < 0.0) throw config_error(path + ".y_tol", "must be >= 0 (0 = auto)");
  if (!(q.s_tol > 0.0)) throw config_error(path + ".s_tol", "must be > 0");
  if (j.contains("max_evals")) {
    if (!j["max_evals"].is_number_unsigned())
      throw config_error(path + ".max_evals", "expected a positive integer");
    q.max_evals = j["max_evals"].get<std::size_t>();
  }
  return q;
}

// ---------------------------------------------------------------------------
// RunConfig: the CLI's single configuration file

struct RunConfig {
  ModelParams model;
  QuadConfig quad;
  std::string data_csv;
  std::string data_column = "x";
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware
  std::size_t n = 1;
  std::size_t n_paths = 100'000;
  bool keep_latents = false;
  std::size_t window = 2;
  std::vector<std::string> free_params = {"mu", "beta"};
  double grid_lo = -8.0;
  double grid_hi = 8.0;
  double grid_step = 0.05;
  std::string out_dir = "out";
};

inline json to_json(const RunConfig& c) {
  return {{"schema_version", schema_version},
          {"model", to_json(c.model)},
          {"quad", to_json(c.quad)},
          {"data", {{"csv", c.data_csv}, {"column", c.data_column}, {"delta", c.model.delta}}},
          {"run",
           {{"seed", c.seed},
            {"threads", c.threads},
            {"n", c.n},
            {"n_paths", c.n_paths},
            {"keep_latents", c.keep_latents},
            {"window", c.window},
            {"free", c.free_params},
            {"grid", {{"lo", c.grid_lo}, {"hi", c.grid_hi}, {"step", c.grid_step}}},
            {"out_dir", c.out_dir}}}};
}

inline RunConfig config_from_json(const json& j) {
  using namespace detail_io;
  if (!j.is_object()) throw config_error("", "top level must be an object");
  reject_unknown(j, {"schema_version", "model", "quad", "data", "run"}, "");
  if (j.contains("schema_version") && j["schema_version"].get<int>() != schema_version)
    throw config_error("schema_version", "unsupported version");
  if (!j.contains("model")) throw config_error("model", "missing required section");

  RunConfig c;
  c.model = model_from_json(j["model"], "model");
  if (j.contains("quad")) c.quad = quad_from_json(j["quad"], "quad");

  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d, {"csv", "column", "delta"}, "data");
    c.data_csv = get_string_or(d, "csv", "data", "");
    c.data_column = get_string_or(d, "column", "data", "x");
    if (d.contains("delta")) {
      const double dd = get_positive(d, "delta", "data");
      c.model.delta = dd;  // data section overrides the interval width
    }
  }

  if (j.contains("run")) {
    const json& r = j["run"];
    reject_unknown(r, {"seed", "threads", "n", "n_paths", "keep_latents", "window", "free",
                       "grid", "out_dir"},
                   "run");
    if (r.contains("seed")) c.seed = r["seed"].get<std::uint64_t>();
    if (r.contains("threads")) c.threads = r["threads"].get<unsigned>();
    if (r.contains("n")) {
      c.n = r["n"].get<std::size_t>();
      if (c.n < 1) throw config_error("run.n", "must be >= 1");
    }
    if (r.contains("n_paths")) c.n_paths = r["n_paths"].get<std::size_t>();
    if (r.contains("keep_latents")) c.keep_latents = r["keep_latents"].get<bool>();
    if (r.contains("window")) {
      c.window = r["window"].get<std::size_t>();
      if (c.window < 1 || c.window > 3)
        throw config_error("run.window", "must be 1, 2, or 3");
    }
    if (r.contains("free")) {
      if (!r["free"].is_array()) throw config_error("run.free", "expected an array of names");
      c.free_params.clear();
      for (const auto& name : r["free"]) c.free_params.push_back(name.get<std::string>());
    }
    if (r.contains("grid")) {
      const json& g = r["grid"];
      reject_unknown(g, {"lo", "hi", "step"}, "run.grid");
      c.grid_lo = get_number_or(g, "lo", "run.grid", c.grid_lo);
      c.grid_hi = get_number_or(g, "hi", "run.grid", c.grid_hi);
      c.grid_step = get_number_or(g, "step", "run.grid", c.grid_step);
      if (!(c.grid_step > 0.0) || !(c.grid_hi > c.grid_lo))
        throw config_error("run.grid", "need hi > lo and step > 0");
    }
    c.out_dir = get_string_or(r, "out_dir", "run", c.out_dir);
  }
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

// Data files: header row, comma separated, one named return column.
inline std::vector<double> read_return_column(const std::string& path,
                                              const std::string& column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty data file: " + path);
  std::size_t col = std::string::npos;
  {
    std::stringstream ss(line);
    std::string cell;
    std::size_t idx = 0;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (cell == column) col = idx;
      ++idx;
    }
  }
  if (col == std::string::npos)
    throw std::runtime_error("column '" + column + "' not found in " + path);
  std::vector<double> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t idx = 0;
    bool found = false;
    while (std::getline(ss, cell, ',')) {
      if (idx == col) {
        try {
          out.push_back(std::stod(cell));
        } catch (...) {
          throw std::runtime_error("bad number at row " + std::to_string(row) + " in " + path);
        }
        found = true;
      }
      ++idx;
    }
    if (!found) throw std::runtime_error("short row " + std::to_string(row) + " in " + path);
  }
  return out;
}

inline void write_returns_csv(const std::string& path, const SimOutput& sim) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  for (std::size_t i = 0; i < sim.n; ++i) out << (i ? "," : "") << "X" << (i + 1);
  out << "\n";
  for (std::size_t p = 0; p < sim.n_paths; ++p) {
    for (std::size_t i = 0; i < sim.n; ++i) out << (i ? "," : "") << sim.ret(p, i);
    out << "\n";
  }
}

inline void write_latents_csv(const std::string& path, const SimOutput& sim) {
  if (!sim.has_latents) throw std::logic_error("write_latents_csv: latents were not retained");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "path,interval,tau,gamma,j1,j2,eps\n";
  for (std::size_t p = 0; p < sim.n_paths; ++p)
    for (std::size_t i = 0; i < sim.n; ++i) {
      const std::size_t k = p * sim.n + i;
      out << p << "," << (i + 1) << "," << sim.tau[k] << "," << sim.gamma[k] << ","
          << sim.j1[k] << "," << sim.j2[k] << "," << sim.eps[k] << "\n";
    }
}

inline void write_density_csv(const std::string& path, const DensityGrid& dg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "x,density\n";
  for (std::size_t i = 0; i < dg.x.size(); ++i) out << dg.x[i] << "," << dg.density[i] << "\n";
}

inline void write_points_csv(const std::string& path, const PointSet& ps) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << std::setprecision(17);
  out << "s,x\n";
  for (const PrmPoint& p : ps.points) out << p.s << "," << p.x << "\n";
}

// ---------------------------------------------------------------------------
// machine-readable result payloads

inline json to_json(const LikDiagnostics& d) {
  return {{"evals", d.evals},
          {"y_radius", d.y_radius},
          {"refine_error", d.refine_error},
          {"tail_estimate", d.tail_estimate},
          {"decay_exponent", d.decay_exponent},
          {"im_re_ratio", d.im_re_ratio},
          {"warm_tail", d.warm_tail},
          {"neg_kernel_nodes", d.neg_kernel_nodes},
          {"level_used", d.level_used},
          {"heavy_tail_warning", d.heavy_tail_warning},
          {"non_real_warning", d.non_real_warning},
          {"symmetric_half", d.symmetric_half},
          {"blocks", d.blocks},
          {"block_size", d.block_size}};
}

inline json to_json(const FitResult& fr) {
  json estimates = json::object();
  json stderrs = json::object();
  for (std::size_t k = 0; k < fr.names.size(); ++k) {
    estimates[fr.names[k]] = fr.estimates[k];
    if (fr.information_spd) stderrs[fr.names[k]] = fr.stderrs[k];
  }
  return {{"schema_version", schema_version},
          {"estimates", estimates},
          {"stderr", stderrs},
          {"information_spd", fr.information_spd},
          {"loglik", fr.loglik},
          {"iterations", fr.iterations},
          {"objective_evals", fr.objective_evals},
          {"infeasible_evals", fr.infeasible_evals},
          {"final_simplex_size", fr.final_simplex_size},
          {"converged", fr.converged},
          {"budget_exhausted", fr.budget_exhausted},
          {"window", fr.window},
          {"blocks", fr.blocks},
          {"quad_diag", to_json(fr.quad_diag)},
          {"params", to_json(fr.params)}};
}

// KDE and CF comparison payloads with their standard-error columns
inline json to_json(const Kde& kde) {
  return {{"schema_version", schema_version},
          {"grid", kde.grid},
          {"density", kde.density},
          {"stderr", kde.stderr_band},
          {"bandwidth", kde.bandwidth}};
}

inline json to_json(const EmpiricalCf& cf) {
  std::vector<double> re(cf.value.size()), im(cf.value.size());
  for (std::size_t k = 0; k < cf.value.size(); ++k) {
    re[k] = cf.value[k].real();
    im[k] = cf.value[k].imag();
  }
  return {{"schema_version", schema_version},
          {"re", re},
          {"im", im},
          {"stderr_re", cf.stderr_re},
          {"stderr_im", cf.stderr_im}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace tclev
