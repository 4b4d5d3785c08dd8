#include "doctest.h"

#include "velgas/errors.hpp"
#include "velgas/rng.hpp"
#include "velgas/thermo.hpp"

#include <cmath>

using namespace velgas;

namespace {

Eigen::VectorXd random_lambda(RandomStream& r, int d, double bound) {
  Eigen::VectorXd l(d + 1);
  for (int i = 0; i <= d; ++i) l[i] = bound * (2 * r.uniform() - 1);
  return l;
}

}  // namespace

TEST_CASE("sigmoid is stable at extremes") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(-30.0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-10));
  CHECK(chi(0.25) == doctest::Approx(0.1875));
}

TEST_CASE("forward map at lambda zero") {
  for (int d = 1; d <= 3; ++d) {
    const auto m = build_model_one(d);
    const auto p = forward_map({Eigen::VectorXd::Zero(d + 1)}, m);
    CHECK(p.rho() == doctest::Approx(d));
    CHECK(p.momentum().norm() < 1e-15);
  }
}

TEST_CASE("jacobian matches finite differences") {
  RandomStream r(11, 0);
  for (int d = 1; d <= 3; ++d) {
    const auto m = build_model_one(d);
    const Eigen::VectorXd l = random_lambda(r, d, 1.5);
    const Eigen::MatrixXd j = forward_jacobian({l}, m);
    const double h = 1e-6;
    for (int i = 0; i <= d; ++i) {
      Eigen::VectorXd lp = l;
      Eigen::VectorXd lm = l;
      lp[i] += h;
      lm[i] -= h;
      const Eigen::VectorXd fd = (forward_map({lp}, m).value - forward_map({lm}, m).value) / (2 * h);
      CHECK((fd - j.col(i)).cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK((j - j.transpose()).norm() < 1e-15);
  }
}

TEST_CASE("inverse map round trip") {
  RandomStream r(5, 0);
  for (int d = 1; d <= 3; ++d) {
    const auto m = build_model_one(d);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd l = random_lambda(r, d, 2.0);
      const auto p = forward_map({l}, m);
      NewtonReport rep;
      const auto back = inverse_map(p, m, &rep);
      CHECK((back.lambda - l).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(rep.residual <= 1e-12);
    }
  }
}

TEST_CASE("two-velocity closed form") {
  const auto m = build_model_one(1);
  RandomStream r(9, 0);
  for (int i = 0; i < 50; ++i) {
    const double tp = 0.02 + 0.96 * r.uniform();
    const double tm = 0.02 + 0.96 * r.uniform();
    const HydroVector p(Eigen::Vector2d(tp + tm, tp - tm));
    const Eigen::VectorXd th = theta_all(inverse_map(p, m).lambda, m);
    CHECK(std::abs(th[0] - (p.rho() + p.value[1]) / 2) < 1e-10);
    CHECK(std::abs(th[1] - (p.rho() - p.value[1]) / 2) < 1e-10);
    const Eigen::Vector2d closed = two_velocity_thetas(p, m);
    CHECK(closed[0] == doctest::Approx(tp));
    CHECK(closed[1] == doctest::Approx(tm));
    CHECK(phi_v(p, 0, m) == doctest::Approx(tp * (1 - tp)).epsilon(1e-9));
  }
  CHECK(is_two_velocity_line(m));
  CHECK_FALSE(is_two_velocity_line(build_model_one(2)));
}

TEST_CASE("points outside U are rejected") {
  const auto m = build_model_one(1);
  CHECK_THROWS_AS(inverse_map(HydroVector(Eigen::Vector2d(2.0, 0.0)), m), NotInU);
  CHECK_THROWS_AS(inverse_map(HydroVector(Eigen::Vector2d(0.0, 0.0)), m), NotInU);
  CHECK_THROWS_AS(inverse_map(HydroVector(Eigen::Vector2d(1.0, 1.0)), m), NotInU);
  CHECK_FALSE(in_u(HydroVector(Eigen::Vector2d(1.0, 1.2)), m));
  CHECK(in_u(HydroVector(Eigen::Vector2d(1.0, 0.5)), m));
  CHECK(in_u_two_velocity(HydroVector(Eigen::Vector2d(1.0, 0.5)), m));
  CHECK_FALSE(in_u_two_velocity(HydroVector(Eigen::Vector2d(1.0, -1.0)), m));
}

TEST_CASE("reservoir profiles") {
  const auto m = build_model_one(2);
  const auto prof = ReservoirProfiles::from_json(
      R"([0.8, {"mean": 0.5, "modes": [{"k": [1], "cos": 0.1, "sin": 0.2}]}, 0.3, 0.4])");
  CHECK(prof.per_velocity.size() == 4);
  Eigen::VectorXd ut(1);
  ut << 0.25;
  CHECK(prof.value(1, ut) == doctest::Approx(0.5 + 0.2));
  CHECK(prof.value(0, ut) == doctest::Approx(0.8));
  prof.validate(m);

  const auto again = ReservoirProfiles::from_json(prof.to_json());
  CHECK(again.value(1, ut) == doctest::Approx(prof.value(1, ut)));

  const auto bd = boundary_data(prof, m);
  const HydroVector d0 = bd(ut);
  CHECK(d0.rho() == doctest::Approx(0.8 + 0.7 + 0.3 + 0.4));
  CHECK(d0.value[1] == doctest::Approx(0.8 - 0.7));
  CHECK(d0.value[2] == doctest::Approx(0.3 - 0.4));

  CHECK_THROWS_AS(ReservoirProfiles::constant({1.0, 0.5, 0.5, 0.5}).validate(m), ProfileOutOfRange);
  const auto wavy = ReservoirProfiles::from_json(
      R"([0.8, {"mean": 0.5, "modes": [{"k": [1], "cos": 0.4, "sin": 0.4}]}, 0.3, 0.4])");
  CHECK_THROWS_AS(wavy.validate(m), ProfileOutOfRange);
}
