#include "doctest.h"

#include "velgas/errors.hpp"
#include "velgas/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <tuple>

using namespace velgas;

namespace {

// Counts ordered effective collisions by direct vector arithmetic.
int count_effective(const Eigen::MatrixXd& vel) {
  const int n = static_cast<int>(vel.cols());
  int count = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          if (a == b || c == e) continue;
          if (a == c || a == e || b == c || b == e) continue;
          if ((vel.col(a) + vel.col(b) - vel.col(c) - vel.col(e)).norm() < 1e-9) ++count;
        }
  return count;
}

Eigen::VectorXd observable_by_loop(SiteOccupancy occ, const Eigen::MatrixXd& vel) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(vel.rows() + 1);
  for (int v = 0; v < vel.cols(); ++v) {
    if ((occ >> v) & 1u) {
      out[0] += 1.0;
      out.tail(vel.rows()) += vel.col(v);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("model one layout") {
  const auto m1 = build_model_one(1);
  CHECK(m1.size() == 2);
  CHECK(m1.velocity(0)[0] == 1.0);
  CHECK(m1.velocity(1)[0] == -1.0);
  CHECK(m1.collisions().empty());
  CHECK(m1.reflected(0) == 1);

  const auto m3 = build_model_one(3);
  CHECK(m3.size() == 6);
  CHECK(m3.velocity(4)[2] == 1.0);
  CHECK(m3.velocity(5)[2] == -1.0);
}

TEST_CASE("effective collision counts") {
  // d=2: 4 ordered antipodal pairs, each with 2 ordered antipodal images.
  CHECK(build_model_one(2).collisions().size() == 8);
  CHECK(build_model_one(3).collisions().size() == 24);
  for (int d = 1; d <= 3; ++d) {
    const auto m = build_model_one(d);
    CHECK(static_cast<int>(m.collisions().size()) == count_effective(m.velocities()));
  }
  const auto m2 = build_model_two(ModelTwoVariant::B);
  CHECK(static_cast<int>(m2.collisions().size()) == count_effective(m2.velocities()));
}

TEST_CASE("raw quadruples include degenerate ones") {
  const auto m = build_model_one(2);
  const auto raw = momentum_conserving_quadruples(m.velocities());
  CHECK(raw.size() > m.collisions().size());
  CHECK(std::find(raw.begin(), raw.end(), CollisionRule{0, 0, 0, 0}) != raw.end());
}

TEST_CASE("collisions conserve site observables exhaustively") {
  for (const auto& m : {build_model_one(2), build_model_one(3), build_model_two(ModelTwoVariant::A)}) {
    const SiteOccupancy states = SiteOccupancy{1} << m.size();
    for (SiteOccupancy occ = 0; occ < states; ++occ) {
      const Eigen::VectorXd before = observable_by_loop(occ, m.velocities());
      CHECK((site_observable(occ, m) - before).cwiseAbs().maxCoeff() < 1e-12);
      for (const auto& c : m.collisions()) {
        if (!c.fires(occ)) continue;
        const SiteOccupancy after = c.apply(occ);
        CHECK(std::popcount(after) == std::popcount(occ));
        CHECK((observable_by_loop(after, m.velocities()) - before).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("collision firing is the exclusion product") {
  const CollisionRule r{0, 1, 2, 3};
  for (SiteOccupancy occ = 0; occ < 16; ++occ) {
    const int expected = static_cast<int>((occ & 1) && (occ & 2) && !(occ & 4) && !(occ & 8));
    CHECK(static_cast<int>(r.fires(occ)) == expected);
  }
  CHECK(r.apply(0b0011) == 0b1100);
}

TEST_CASE("model two root") {
  const double w = model_two_root();
  CHECK(w == doctest::Approx(std::sqrt(3.0 + std::sqrt(10.0))).epsilon(1e-14));
  CHECK(std::abs(w * w * w * w - 6 * w * w - 1) < 1e-10);

  const auto a = build_model_two(ModelTwoVariant::A);
  CHECK(a.size() == 8);
  CHECK(a.dim() == 3);
  const auto b = build_model_two(ModelTwoVariant::B);
  CHECK(b.size() == 24);
  const auto scaled = build_model_two(ModelTwoVariant::A, 2.0);
  CHECK(scaled.velocities().cwiseAbs().maxCoeff() == doctest::Approx(2.0 * w));
}

TEST_CASE("orbit and closure") {
  const Eigen::MatrixXd orbit = signed_permutation_orbit(Eigen::Vector3d(1, 1, 0));
  CHECK(orbit.cols() == 12);
  CHECK(missing_for_closure(orbit).empty());

  Eigen::MatrixXd open(2, 2);
  open << 1, 0, 0, 1;
  const auto missing = missing_for_closure(open);
  CHECK(missing.size() == 2);
  CHECK_THROWS_AS(VelocityModel{open}, InvalidModel);

  Eigen::MatrixXd dup(1, 3);
  dup << 1, -1, 1;
  CHECK_THROWS_AS(VelocityModel{dup}, InvalidModel);
}

TEST_CASE("missing vectors are named") {
  Eigen::MatrixXd open(1, 1);
  open << 2.0;
  try {
    VelocityModel m(open);
    FAIL("expected InvalidModel");
  } catch (const InvalidModel& e) {
    CHECK(std::string(e.what()).find("-2") != std::string::npos);
  }
}

TEST_CASE("velocity JSON") {
  const auto m = parse_velocity_json("[[1,0],[-1,0],[0,1],[0,-1]]", "square");
  CHECK(m.size() == 4);
  CHECK(m.name() == "square");
  CHECK(m.collisions().size() == 8);
  CHECK(m.index_of(Eigen::Vector2d(0, -1)) == 3);
  CHECK(m.index_of(Eigen::Vector2d(1, 1)) == -1);
  CHECK_THROWS_AS(parse_velocity_json("[[1,0],[1]]"), InvalidModel);
}
