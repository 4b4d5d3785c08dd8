#include "doctest.h"

#include "velgas/errors.hpp"
#include "velgas/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace velgas;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Experiment tiny_experiment() {
  Experiment e;
  e.sizes = {16, 32};
  e.replicas = 6;
  e.pde_m = 64;
  e.times = {0.02, 0.04};
  e.threads = 2;
  return e;
}

// P(Poisson(mean) <= k) summed term by term.
double poisson_cdf(double mean, int k) {
  double term = std::exp(-mean);
  double s = term;
  for (int i = 1; i <= k; ++i) {
    term *= mean / i;
    s += term;
  }
  return s;
}

}  // namespace

TEST_CASE("model specs") {
  CHECK(make_model("model1", 2)->size() == 4);
  CHECK(make_model("model2a", 3)->size() == 8);
  CHECK(make_model("model2b", 3)->size() == 24);
  CHECK_THROWS_AS(make_model("model2a", 2), InvalidModel);
  CHECK_THROWS_AS(make_model("model7", 1), InvalidModel);
}

TEST_CASE("list and reservoir parsing") {
  CHECK(parse_list("0.5,0.25") == std::vector<double>{0.5, 0.25});
  CHECK_THROWS_AS(parse_list("0.5,x"), InvalidArgument);
  const auto r = parse_reservoirs("0.8,0.6", 2);
  CHECK(r.per_velocity[1].mean() == 0.6);
  CHECK_THROWS_AS(parse_reservoirs("0.8", 2), InvalidArgument);
}

TEST_CASE("initial profile grammar") {
  const auto m = build_model_one(1);
  const auto a = ReservoirProfiles::constant({0.8, 0.6});
  const auto b = ReservoirProfiles::constant({0.3, 0.3});
  const Eigen::VectorXd mid = Eigen::VectorXd::Constant(1, 0.5);
  CHECK(parse_initial("equilibrium", m, a, b)(mid)[0] == 0.5);
  CHECK(parse_initial("theta:0.2,0.7", m, a, b)(mid)[1] == 0.7);
  CHECK(parse_initial("interp", m, a, b)(mid)[0] == doctest::Approx(0.55));
  CHECK(parse_initial("interp-bump:0.1", m, a, b)(mid)[0] == doctest::Approx(0.65));
  CHECK_THROWS_AS(parse_initial("theta:0.2", m, a, b), InvalidArgument);
  CHECK_THROWS_AS(parse_initial("interp-bump:0.5", m, a, b), ProfileOutOfRange);
  CHECK_THROWS_AS(parse_initial("flat", m, a, b), InvalidArgument);
}

TEST_CASE("experiment regime consistency") {
  Experiment e;
  e.theta = 2.0;
  e.regime = Regime::Dirichlet;
  CHECK_THROWS_AS((void)e.validated_regime(), RegimeMismatch);
  CHECK_THROWS_AS(run_convergence(e), RegimeMismatch);
  e.regime = Regime::Neumann;
  CHECK(e.validated_regime() == Regime::Neumann);
  e.theta = 1.0;
  e.regime.reset();
  CHECK(e.validated_regime() == Regime::Robin);
}

TEST_CASE("experiment JSON round trip") {
  Experiment e = tiny_experiment();
  e.theta = 0.5;
  e.regime = Regime::Dirichlet;
  e.epsilon = 0.07;
  const Experiment back = Experiment::from_json(e.to_json());
  CHECK(back.to_json() == e.to_json());
  CHECK(back.sizes == e.sizes);
  CHECK(back.regime == Regime::Dirichlet);
  CHECK_THROWS_AS(Experiment::from_json("{\"sizes\": \"many\"}"), InvalidArgument);
}

TEST_CASE("poisson quantile") {
  for (double mean : {0.0, 0.3, 1.0, 7.5, 40.0}) {
    const auto k = poisson_upper(mean, 0.999);
    CHECK(poisson_cdf(mean, static_cast<int>(k)) >= 0.999);
    if (k > 0) CHECK(poisson_cdf(mean, static_cast<int>(k) - 1) < 0.999);
  }
  CHECK(poisson_upper(1.0, 0.999) == 5);
}

TEST_CASE("report slope and monotonicity") {
  ComparisonReport r;
  r.experiment.sizes = {64, 128, 256};
  for (int n : {64, 128, 256}) {
    ComparisonRow row;
    row.n = n;
    row.t = 0.1;
    row.l1 = Eigen::Vector2d(1.0 / std::sqrt(n), n == 128 ? 1.0 : 0.5);
    r.rows.push_back(row);
  }
  CHECK(r.slope(0.1)[0] == doctest::Approx(-0.5));
  CHECK(r.strictly_decreasing(0.1, 0));
  CHECK_FALSE(r.strictly_decreasing(0.1, 1));
  CHECK(r.at_time(0.2).empty());
}

TEST_CASE("matched constant state sits at the noise floor") {
  Experiment e = tiny_experiment();
  e.alpha = ReservoirProfiles::constant({0.5, 0.5});
  e.beta = ReservoirProfiles::constant({0.5, 0.5});
  e.init = "equilibrium";
  e.epsilon = 0.1;
  const auto rep = run_convergence(e);
  REQUIRE(rep.rows.size() == 4);
  for (const auto& row : rep.rows) {
    CHECK((row.l1.array() >= 0).all());
    CHECK((row.l2.array() >= row.l1.array() - 1e-15).all());
    // Mean absolute value of a centred Gaussian is 0.8 sigma.
    CHECK((row.l1.array() <= 3.0 * row.noise.array()).all());
  }
  CHECK(rep.tests.size() == 4 * 4);
}

TEST_CASE("comparison outputs are reproducible") {
  const fs::path base = fs::temp_directory_path() / "velgas_test_repro";
  fs::remove_all(base);
  Experiment e = tiny_experiment();
  e.out = base / "a";
  const auto r1 = run_convergence(e);
  e.out = base / "b";
  e.threads = 1;
  const auto r2 = run_convergence(e);
  int files = 0;
  for (const auto& entry : fs::directory_iterator(base / "a")) {
    if (entry.path().extension() != ".csv") continue;
    ++files;
    CHECK(read_file(entry.path()) == read_file(base / "b" / entry.path().filename()));
  }
  CHECK(files == 4);
  CHECK(r1.rows[3].l1 == r2.rows[3].l1);
  fs::remove_all(base);
}

TEST_CASE("regime scan diagnostics") {
  ScanConfig c;
  c.thetas = {0.0, 3.0};
  c.n = 32;
  c.T = 0.2;
  c.average_from = 0.05;
  c.replicas = 8;
  const auto rep = regime_scan(c);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].regime == Regime::Dirichlet);
  CHECK(rep.rows[1].regime == Regime::Neumann);
  CHECK(rep.rows[0].alpha_total == doctest::Approx(1.4));
  CHECK(rep.rows[1].event_bound == doctest::Approx(2.0 * 2 * std::pow(32.0, -1.0) * 0.2));
  CHECK(rep.rows[0].boundary_events.mean > rep.rows[1].boundary_events.mean);
  CHECK(rep.rate_bound_ok());
  c.average_from = 0.3;
  CHECK_THROWS_AS(regime_scan(c), InvalidArgument);
}

TEST_CASE("check suite and negative control") {
  CheckOptions o;
  o.dynkin_replicas = 0;  // statistical row; covered by the acceptance run
  const auto clean = check_suite(o);
  for (const auto& r : clean) CHECK_MESSAGE(r.passed, r.name);
  o.mutation = true;
  const auto bad = check_suite(o);
  REQUIRE(bad.size() == clean.size());
  CHECK_FALSE(bad[0].passed);
  CHECK_FALSE(bad[1].passed);
  o.mutation = false;
  o.seed = 99;
  const auto other = check_suite(o);
  for (std::size_t i = 0; i < clean.size(); ++i) CHECK(other[i].passed == clean[i].passed);
  CHECK(checks_to_json(clean).find("\"passed\": true") != std::string::npos);
}
