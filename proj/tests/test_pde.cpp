#include "doctest.h"

#include "velgas/errors.hpp"
#include "velgas/pde.hpp"

#include <cmath>
#include <numbers>

using namespace velgas;

namespace {

constexpr double kPi = std::numbers::pi;

std::shared_ptr<const VelocityModel> line() { return std::make_shared<const VelocityModel>(build_model_one(1)); }

HydroVector hv(double rho, double mom) { return HydroVector(Eigen::Vector2d(rho, mom)); }

HydroVector heat_solution(double t, double u) {
  return hv(1.0 + 0.5 * std::exp(-kPi * kPi * t / 2) * std::sin(kPi * u),
            0.3 * std::exp(-2 * kPi * kPi * t) * std::sin(2 * kPi * u));
}

double heat_error(int m, double T) {
  PdeOptions o;
  o.drift = false;
  const HydroSystem sys(line(), o);
  const Field f0 = sys.make_field(m, [](double u) { return heat_solution(0, u); }, Regime::Dirichlet, hv(1, 0), hv(1, 0));
  const auto out = sys.solve(f0, T, 0.0, {T});
  double err = 0.0;
  for (int i = 0; i <= m; ++i) {
    err = std::max(err, (out.back().second.values.row(i).transpose() - heat_solution(T, f0.node(i)).value).cwiseAbs().maxCoeff());
  }
  return err;
}

HydroVector bumpy(double u) {
  // theta_+ = 0.8 - 0.5u + 0.1 sin(pi u), theta_- = 0.6 - 0.3u + 0.1 sin(pi u)
  const double tp = 0.8 - 0.5 * u + 0.1 * std::sin(kPi * u);
  const double tm = 0.6 - 0.3 * u + 0.1 * std::sin(kPi * u);
  return hv(tp + tm, tp - tm);
}

}  // namespace

TEST_CASE("regime map") {
  CHECK(regime_for_theta(0.0) == Regime::Dirichlet);
  CHECK(regime_for_theta(0.99) == Regime::Dirichlet);
  CHECK(regime_for_theta(1.0) == Regime::Robin);
  CHECK(regime_for_theta(1.5) == Regime::Neumann);
  CHECK(parse_regime("robin") == Regime::Robin);
  CHECK_THROWS_AS(parse_regime("periodic"), InvalidArgument);
  CHECK_THROWS_AS(regime_for_theta(-1.0), InvalidArgument);
}

TEST_CASE("flux of simple fields") {
  const HydroSystem sys(line());
  // Constant face fluxes have zero divergence; the closed-wall closure would
  // not keep a nonzero drift flux, so pin the ends.
  const Field c = sys.make_field(16, [](double) { return hv(1.0, 0.0); }, Regime::Dirichlet, hv(1, 0), hv(1, 0));
  const Eigen::Vector2d d = sys.drift(hv(1.0, 0.0));
  CHECK(d[0] == doctest::Approx(0.0));
  CHECK(d[1] == doctest::Approx(0.5));
  const Field next = sys.advance(c, sys.auto_dt(c));
  CHECK((next.values - c.values).cwiseAbs().maxCoeff() <= 1e-14);

  PdeOptions off;
  off.drift = false;
  const HydroSystem diff(line(), off);
  const Field lin = diff.make_field(8, [](double u) { return hv(0.5 + 0.4 * u, 0.1); }, Regime::Neumann, hv(1, 0), hv(1, 0));
  const Eigen::MatrixXd F = diff.flux(lin);
  for (int i = 0; i < 8; ++i) {
    CHECK(F(i, 0) == doctest::Approx(0.2));
    CHECK(F(i, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("drift divergence converges at second order") {
  // Compare the discrete divergence with the exact derivative of the flux.
  const HydroSystem sys(line());
  auto p = [](double u) { return bumpy(u); };
  auto exact_div = [&](double u) {
    const double e = 1e-5;
    auto F = [&](double x) {
      const double de = 1e-5;
      const Eigen::VectorXd dp = (p(x + de).value - p(x - de).value) / (2 * de);
      return Eigen::VectorXd(0.5 * dp - sys.drift(p(x)));
    };
    return Eigen::VectorXd((F(u + e) - F(u - e)) / (2 * e));
  };
  double errs[2];
  int k = 0;
  for (int m : {32, 64}) {
    const Field f = sys.make_field(m, p, Regime::Neumann, hv(1, 0), hv(1, 0));
    const Eigen::MatrixXd F = sys.flux(f);
    double err = 0.0;
    for (int i = 1; i < m; ++i) {
      const Eigen::VectorXd div = (F.row(i) - F.row(i - 1)).transpose() / f.h();
      err = std::max(err, (div - exact_div(f.node(i))).cwiseAbs().maxCoeff());
    }
    errs[k++] = err;
  }
  CHECK(errs[0] / errs[1] > 3.5);
}

TEST_CASE("heat kernel decays at second order") {
  const double e64 = heat_error(64, 0.1);
  const double e128 = heat_error(128, 0.1);
  CHECK(e128 < 1e-4);
  CHECK(e64 / e128 > 3.5);
  CHECK(e64 / e128 < 4.5);
}

TEST_CASE("Neumann closure conserves mass and momentum") {
  const HydroSystem sys(line());
  const Field f0 = sys.make_field(64, bumpy, Regime::Neumann, hv(1, 0), hv(1, 0));
  auto total = [](const Field& f) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    for (int i = 0; i <= f.m; ++i) s += ((i == 0 || i == f.m) ? 0.5 : 1.0) * f.h() * f.values.row(i).transpose();
    return s;
  };
  const Eigen::VectorXd m0 = total(f0);
  double worst = 0.0;
  (void)sys.solve(f0, 0.1, 0.0, {}, [&](double, const Field& f) { worst = std::max(worst, (total(f) - m0).cwiseAbs().maxCoeff()); });
  CHECK(worst <= 1e-12);
}

TEST_CASE("Dirichlet nodes stay pinned") {
  const HydroSystem sys(line());
  const HydroVector l = hv(1.4, 0.2);
  const HydroVector r = hv(0.6, 0.0);
  const Field f0 = sys.make_field(32, bumpy, Regime::Dirichlet, l, r);
  bool pinned = true;
  (void)sys.solve(f0, 0.05, 0.0, {}, [&](double, const Field& f) {
    pinned = pinned && f.values(0, 0) == 1.4 && f.values(0, 1) == 0.2 && f.values(32, 0) == 0.6 && f.values(32, 1) == 0.0;
  });
  CHECK(pinned);

  const Field flat = sys.make_field(32, [](double) { return hv(0.8, 0.1); }, Regime::Dirichlet, hv(0.8, 0.1), hv(0.8, 0.1));
  const auto out = sys.solve(flat, 0.05, 0.0, {0.05});
  CHECK((out.back().second.values - flat.values).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("Robin closure with matching data is Neumann") {
  const HydroSystem sys(line());
  Field rob = sys.make_field(32, bumpy, Regime::Robin, bumpy(0.0), bumpy(1.0));
  Field neu = rob;
  neu.regime = Regime::Neumann;
  const Field a = sys.advance(rob, 1e-5);
  const Field b = sys.advance(neu, 1e-5);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("time step guards") {
  const HydroSystem sys(line());
  const Field f = sys.make_field(32, bumpy, Regime::Neumann, hv(1, 0), hv(1, 0));
  CHECK_THROWS_AS((void)sys.advance(f, 1.0 / 32 / 32), CFLViolation);
  CHECK(sys.auto_dt(f) <= 0.2 / 32 / 32);
  CHECK_THROWS_AS((void)sys.make_field(8, [](double) { return hv(2.5, 0.0); }, Regime::Neumann, hv(1, 0), hv(1, 0)), NotInU);
}

TEST_CASE("reflection symmetry of the solver") {
  // u -> 1-u, momentum -> -momentum, alpha <-> reflected beta.
  const HydroSystem sys(line());
  for (Regime reg : {Regime::Dirichlet, Regime::Robin, Regime::Neumann}) {
    const HydroVector l = hv(1.4, 0.2);
    const HydroVector r = hv(0.6, 0.0);
    const Field a0 = sys.make_field(40, bumpy, reg, l, r);
    const Field b0 = sys.make_field(40, [](double u) { const HydroVector p = bumpy(1 - u); return hv(p.value[0], -p.value[1]); },
                                    reg, hv(0.6, 0.0), hv(1.4, -0.2));
    const Field a = sys.solve(a0, 0.02, 0.0, {0.02}).back().second;
    const Field b = sys.solve(b0, 0.02, 0.0, {0.02}).back().second;
    double worst = 0.0;
    for (int i = 0; i <= 40; ++i) {
      worst = std::max(worst, std::abs(a.values(i, 0) - b.values(40 - i, 0)));
      worst = std::max(worst, std::abs(a.values(i, 1) + b.values(40 - i, 1)));
    }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("weak residual basics") {
  const HydroSystem sys(line());
  const Field f0 = sys.make_field(32, bumpy, Regime::Dirichlet, bumpy(0), bumpy(1));
  const auto zero = static_test_function("zero", [](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
  WeakResidual acc(sys, zero, Regime::Dirichlet);
  (void)sys.solve(f0, 0.02, 0.0, {}, [&](double t, const Field& f) { acc.add(t, f); });
  CHECK(acc.value().cwiseAbs().maxCoeff() == 0.0);

  const auto cosg = static_test_function("cos", [](double u) { return std::cos(kPi * u); },
                                         [](double u) { return -kPi * std::sin(kPi * u); },
                                         [](double u) { return -kPi * kPi * std::cos(kPi * u); });
  CHECK_THROWS_AS(WeakResidual(sys, cosg, Regime::Dirichlet), TestFunctionClassViolation);
  WeakResidual ok(sys, cosg, Regime::Neumann);
}

TEST_CASE("weak residual of the heat kernel is small") {
  PdeOptions o;
  o.drift = false;
  const HydroSystem sys(line(), o);
  const auto g = static_test_function("sin", [](double u) { return std::sin(kPi * u); },
                                      [](double u) { return kPi * std::cos(kPi * u); },
                                      [](double u) { return -kPi * kPi * std::sin(kPi * u); });
  // Exact trajectory sampled on a fine grid in time.
  std::vector<std::pair<double, Field>> traj;
  const int m = 128;
  const Field base = sys.make_field(m, [](double u) { return heat_solution(0, u); }, Regime::Dirichlet, hv(1, 0), hv(1, 0));
  for (int k = 0; k <= 400; ++k) {
    const double t = 0.1 * k / 400;
    Field f = base;
    for (int i = 0; i <= m; ++i) f.values.row(i) = heat_solution(t, f.node(i)).value.transpose();
    traj.emplace_back(t, f);
  }
  CHECK(weak_residual(sys, traj, g, Regime::Dirichlet).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("weak residual decreases under refinement") {
  const HydroSystem sys(line());
  const auto g = static_test_function("u2", [](double u) { return u * u; }, [](double u) { return 2 * u; },
                                      [](double) { return 2.0; });
  for (Regime reg : {Regime::Robin, Regime::Neumann}) {
    double prev = 1e300;
    for (int m : {32, 64, 128}) {
      const Field f0 = sys.make_field(m, bumpy, reg, hv(1.4, 0.2), hv(0.6, 0.0));
      WeakResidual acc(sys, g, reg);
      (void)sys.solve(f0, 0.05, 0.0, {}, [&](double t, const Field& f) { acc.add(t, f); });
      const double r = acc.value().cwiseAbs().maxCoeff();
      CHECK(r < prev);
      prev = r;
    }
  }
}

TEST_CASE("energy of basis functions") {
  const HydroSystem sys(line());
  const int m = 512;
  const Field zero = sys.make_field(m, [](double) { return hv(1.0, 0.0); }, Regime::Neumann, hv(1, 0), hv(1, 0));
  CHECK(energy(zero, zero, 64).cwiseAbs().maxCoeff() == 0.0);
  Field psi2 = zero;
  Field psi1 = zero;
  for (int i = 0; i <= m; ++i) {
    psi2.values(i, 0) += energy_basis(2, zero.node(i));
    psi1.values(i, 1) += energy_basis(1, zero.node(i));
  }
  const Eigen::VectorXd v2 = energy(psi2, zero, 64);
  CHECK(v2[0] == doctest::Approx(1.0 / (2 * (4 * kPi * kPi + 1))).epsilon(1e-5));
  CHECK(v2[1] == 0.0);
  // psi_1 has mean 2 sqrt(2)/pi, so it also loads the constant mode.
  const Eigen::VectorXd v1 = energy(psi1, zero, 64);
  CHECK(v1[1] == doctest::Approx(1.0 / (2 * (kPi * kPi + 1)) + 4.0 / (kPi * kPi)).epsilon(1e-5));
  CHECK_THROWS_AS(energy(zero, sys.make_field(8, [](double) { return hv(1.0, 0.0); }, Regime::Neumann, hv(1, 0), hv(1, 0))), ShapeMismatch);
}
