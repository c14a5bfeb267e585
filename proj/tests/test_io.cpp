#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "tclev/io.hpp"

using namespace tclev;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json minimal_config() {
  return json{{"model",
               {{"vol",
                 {{"lambda_ou", 1.0}, {"a", 2.0}, {"b", 1.0},
                  {"factors", {{"mode", "common"}, {"kappa", 1.0}}}}}}},
              {"run", {{"seed", 7}}}};
}

}  // namespace

TEST_CASE("minimal config gets documented defaults") {
  const RunConfig cfg = config_from_json(minimal_config());
  CHECK(cfg.model.mu == 0.0);
  CHECK(cfg.model.delta == 1.0);
  CHECK(cfg.model.levy1.kind == LevyKind::Zero);
  CHECK(cfg.model.vol.s_max == 0.0);  // auto warm-up from the 1e-10 rule
  CHECK(cfg.model.vol.warmup_depth(1.0) == doctest::Approx(std::log(1e10)));
  CHECK(cfg.quad.y_radius == 0.0);  // auto truncation
  CHECK(cfg.quad.y_tol == 0.0);     // auto, dimension-aware
  CHECK(resolved_y_tol(cfg.quad, 1) == 1e-8);
  CHECK(resolved_y_tol(cfg.quad, 2) == 1e-3);
  CHECK(cfg.seed == 7);
  CHECK(cfg.n == 1);
  CHECK(cfg.window == 2);
  CHECK(cfg.out_dir == "out");
}

TEST_CASE("negative rate is rejected with its field path") {
  json j = minimal_config();
  j["model"]["vol"]["b"] = -1.0;
  try {
    config_from_json(j);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(e.field_path == "model.vol.b");
  }
}

TEST_CASE("unknown keys are rejected with their path") {
  json j = minimal_config();
  j["model"]["volatility"] = 1.0;
  try {
    config_from_json(j);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(e.field_path == "model.volatility");
  }

  json j2 = minimal_config();
  j2["run"]["grid"] = {{"lo", -1.0}, {"hi", 1.0}, {"step", 0.1}, {"points", 10}};
  try {
    config_from_json(j2);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(e.field_path == "run.grid.points");
  }
}

TEST_CASE("parse - serialize - parse is the identity on the effective config") {
  json j = minimal_config();
  j["model"]["beta"] = 0.2;
  j["model"]["rho"] = -0.3;
  j["model"]["levy1"] = {{"kind", "compound_poisson_normal"},
                         {"rate", 0.5},
                         {"jump_mean", 0.0},
                         {"jump_sd", 0.3}};
  j["run"]["n_paths"] = 5000;
  const RunConfig c1 = config_from_json(j);
  const RunConfig c2 = config_from_json(to_json(c1));
  CHECK(to_json(c1) == to_json(c2));
  CHECK(c2.model.beta == c1.model.beta);
  CHECK(c2.model.levy1.jump_sd == c1.model.levy1.jump_sd);
  CHECK(c2.n_paths == c1.n_paths);
  CHECK(c2.free_params == c1.free_params);
}

TEST_CASE("levy specs round-trip through JSON") {
  const std::vector<LevySpec> cat = {
      LevySpec::zero(), LevySpec::compound_poisson_normal(0.5, -0.1, 0.3),
      LevySpec::compound_poisson_double_exp(1.5, 0.6, 3.0, 2.0),
      LevySpec::gamma_subordinator(2.0, 1.0), LevySpec::inverse_gaussian(1.0, 2.0)};
  for (const auto& s : cat) {
    const LevySpec back = levy_from_json(to_json(s), "levy");
    CHECK(back.kind == s.kind);
    CHECK(to_json(back) == to_json(s));
  }
  CHECK_THROWS_AS(levy_from_json(json{{"kind", "brownian"}}, "levy"), config_error);
}

TEST_CASE("vol spec JSON covers both factor modes") {
  const VolSpec common = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.7);
  const VolSpec indep = VolSpec::gamma_ou_independent(1.0, 2.0, 1.0, 1.4, 1.1, 2.0);
  for (const auto& v : {common, indep}) {
    const VolSpec back = vol_from_json(to_json(v), "vol");
    CHECK(back.mode == v.mode);
    CHECK(to_json(back) == to_json(v));
  }
}

TEST_CASE("bundled reference config parses to the criterion model") {
  std::string path = "../configs/reference.json";
  if (!std::ifstream(path)) path = "configs/reference.json";
  const RunConfig cfg = parse_config(path);
  CHECK(cfg.model.beta == doctest::Approx(0.2));
  CHECK(cfg.model.rho == doctest::Approx(-0.3));
  CHECK(cfg.model.levy1.kind == LevyKind::CompoundPoissonNormal);
  CHECK(cfg.model.levy1.rate == doctest::Approx(0.5));
  CHECK(cfg.model.vol.a == doctest::Approx(2.0));
  CHECK(cfg.model.vol.mode == FactorMode::CommonFactor);
  CHECK(cfg.model.vol.kappa == doctest::Approx(1.0));
}

TEST_CASE("return column CSV round trip") {
  const std::string path = "io_test_returns.csv";
  {
    std::ofstream out(path);
    out << "date,x,volume\n";
    out << "1,0.125,100\n";
    out << "2,-0.5,200\n";
    out << "3,1.75,50\n";
  }
  const std::vector<double> xs = read_return_column(path, "x");
  REQUIRE(xs.size() == 3);
  CHECK(xs[0] == 0.125);
  CHECK(xs[1] == -0.5);
  CHECK(xs[2] == 1.75);
  CHECK_THROWS(read_return_column(path, "missing_column"));
  std::remove(path.c_str());
}

TEST_CASE("simulation CSV output is byte-identical across runs with one seed") {
  ModelParams p;
  p.beta = 0.1;
  p.vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 0.5);
  const SimOutput s1 = simulate_returns(p, 2, 500, 42);
  const SimOutput s2 = simulate_returns(p, 2, 500, 42);
  write_returns_csv("io_test_a.csv", s1);
  write_returns_csv("io_test_b.csv", s2);
  CHECK(slurp("io_test_a.csv") == slurp("io_test_b.csv"));
  CHECK(slurp("io_test_a.csv").substr(0, 6) == "X1,X2\n");
  std::remove("io_test_a.csv");
  std::remove("io_test_b.csv");
}

TEST_CASE("point set CSV export") {
  PointSet ps;
  ps.points = {{-0.5, 1.25}, {0.75, 2.0}};
  write_points_csv("io_test_points.csv", ps);
  const std::string body = slurp("io_test_points.csv");
  CHECK(body == "s,x\n-0.5,1.25\n0.75,2\n");
  std::remove("io_test_points.csv");
}

TEST_CASE("intensity measures round-trip through JSON") {
  const auto exp_marks = IntensityMeasure::constant_rate_exp_marks(2.0, -23.0, 2.0, 1.0);
  IntensityMeasure tab;
  tab.rate_breaks = {0.0, 0.5, 1.0};
  tab.rate_values = {1.0, 3.0};
  tab.mark_law = MarkLaw::Tabulated;
  tab.mark_grid = {0.5, 1.5};
  tab.mark_weights = {0.25, 0.75};
  for (const auto& m : {exp_marks, tab}) {
    const IntensityMeasure back = intensity_from_json(to_json(m), "nu");
    CHECK(to_json(back) == to_json(m));
    CHECK(back.total_mass() == doctest::Approx(m.total_mass()));
  }
  json bad = to_json(exp_marks);
  bad["marks"]["law"] = "pareto";
  CHECK_THROWS_AS(intensity_from_json(bad, "nu"), config_error);
}

TEST_CASE("density is shift-equivariant end to end") {
  // shifting mu by c and the grid by c Delta leaves the density values fixed
  ModelParams p;
  p.beta = 0.2;
  p.rho = -0.3;
  p.levy1 = LevySpec::compound_poisson_normal(0.5, 0.0, 0.3);
  p.vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 1.0);
  QuadConfig q;
  const double c = 0.41;
  const std::vector<double> grid = linspace(-3.0, 3.0, 13);
  std::vector<double> shifted_grid;
  for (double x : grid) shifted_grid.push_back(x + c * p.delta);
  ModelParams shifted = p;
  shifted.mu = p.mu + c;
  const DensityGrid a = marginal_density_grid(grid, p, q);
  const DensityGrid b = marginal_density_grid(shifted_grid, shifted, q);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::abs(a.density[i] - b.density[i]) < 1e-10);
}

TEST_CASE("KDE and CF payloads serialize with stderr columns") {
  Kde kde;
  kde.grid = {0.0, 1.0};
  kde.density = {0.4, 0.2};
  kde.stderr_band = {0.01, 0.02};
  kde.bandwidth = 0.1;
  const json jk = to_json(kde);
  CHECK(jk["stderr"].size() == 2);
  CHECK(jk["schema_version"] == 1);

  EmpiricalCf cf;
  cf.value = {{0.9, 0.1}};
  cf.stderr_re = {0.001};
  cf.stderr_im = {0.002};
  const json jc = to_json(cf);
  CHECK(jc["re"][0] == 0.9);
  CHECK(jc["stderr_im"][0] == 0.002);
}

TEST_CASE("fit result serializes with estimates and diagnostics") {
  FitResult fr;
  fr.names = {"mu", "beta"};
  fr.estimates = {0.01, 0.22};
  fr.stderrs = {0.05, 0.07};
  fr.information_spd = true;
  fr.loglik = -123.5;
  fr.converged = true;
  fr.window = 2;
  fr.params.vol = VolSpec::gamma_ou_common(1.0, 2.0, 1.0, 1.0);
  const json j = to_json(fr);
  CHECK(j["schema_version"] == 1);
  CHECK(j["estimates"]["mu"] == 0.01);
  CHECK(j["stderr"]["beta"] == 0.07);
  CHECK(j["converged"] == true);
}
