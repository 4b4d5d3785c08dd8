#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace velgas {

/// Occupancy of the velocity slots of one site; bit i is velocity index i.
using SiteOccupancy = std::uint64_t;

inline constexpr int kMaxVelocities = 64;
inline constexpr double kVelocityTolerance = 1e-12;

/// A collision (v, w) -> (v', w') between two particles at one site, stored as
/// velocity indices.  Momentum is conserved: v + w = v' + w'.
struct CollisionRule {
  int v = 0;
  int w = 0;
  int vp = 0;
  int wp = 0;

  friend bool operator==(const CollisionRule&, const CollisionRule&) = default;

  /// Both incoming slots occupied and both outgoing slots empty.
  [[nodiscard]] bool fires(SiteOccupancy occ) const {
    const SiteOccupancy in = (SiteOccupancy{1} << v) | (SiteOccupancy{1} << w);
    const SiteOccupancy out = (SiteOccupancy{1} << vp) | (SiteOccupancy{1} << wp);
    return (occ & in) == in && (occ & out) == 0;
  }

  /// Post-collision occupancy; only meaningful when fires(occ).
  [[nodiscard]] SiteOccupancy apply(SiteOccupancy occ) const {
    const SiteOccupancy flip = (SiteOccupancy{1} << v) | (SiteOccupancy{1} << w) |
                               (SiteOccupancy{1} << vp) | (SiteOccupancy{1} << wp);
    return occ ^ flip;
  }
};

/// Finite velocity set closed under coordinate reflections and permutations,
/// together with its effective momentum-conserving collisions.
///
/// Velocities are the columns of a d x |V| matrix; the column order is the
/// velocity index used everywhere else (occupancy bits, jump laws, reservoir
/// profiles).  Immutable after construction.
class VelocityModel {
 public:
  /// Validates closure and uniqueness, then enumerates collisions.
  /// Throws InvalidModel listing the missing vectors when not closed.
  explicit VelocityModel(Eigen::MatrixXd velocities, std::string name = "custom");

  [[nodiscard]] int dim() const { return static_cast<int>(velocities_.rows()); }
  [[nodiscard]] int size() const { return static_cast<int>(velocities_.cols()); }
  [[nodiscard]] const std::string& name() const { return name_; }

  [[nodiscard]] const Eigen::MatrixXd& velocities() const { return velocities_; }
  [[nodiscard]] auto velocity(int i) const { return velocities_.col(i); }

  /// (d+1) x |V| matrix whose columns are (1, v_1, ..., v_d).
  [[nodiscard]] const Eigen::MatrixXd& extended() const { return extended_; }

  [[nodiscard]] const std::vector<CollisionRule>& collisions() const { return collisions_; }

  /// Index of -v.
  [[nodiscard]] int reflected(int i) const { return reflected_[static_cast<std::size_t>(i)]; }

  /// Index of the velocity equal to `v` within tolerance, or -1.
  [[nodiscard]] int index_of(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  [[nodiscard]] SiteOccupancy full_site() const {
    return size() == 64 ? ~SiteOccupancy{0} : ((SiteOccupancy{1} << size()) - 1);
  }

 private:
  Eigen::MatrixXd velocities_;
  Eigen::MatrixXd extended_;
  std::vector<CollisionRule> collisions_;
  std::vector<int> reflected_;
  std::string name_;
};

/// Model I: {+e_1, -e_1, ..., +e_d, -e_d} in that order.
VelocityModel build_model_one(int d);

enum class ModelTwoVariant {
  A,  ///< signed permutations of (w, w, w)
  B,  ///< signed permutations of (1, 1, w)
};

/// Positive root of w^4 - 6 w^2 - 1 = 0, by Newton iteration.
double model_two_root();

/// Three-dimensional model built from the root above; see ModelTwoVariant.
VelocityModel build_model_two(ModelTwoVariant variant = ModelTwoVariant::A, double scale = 1.0);

/// Orbit of `base` under coordinate sign flips and permutations, deduplicated,
/// in lexicographic order.
Eigen::MatrixXd signed_permutation_orbit(const Eigen::Ref<const Eigen::VectorXd>& base);

/// Vectors that must be added to make the set closed; empty when closed.
std::vector<Eigen::VectorXd> missing_for_closure(const Eigen::MatrixXd& velocities);

/// Every quadruple of indices with v + w = v' + w', unfiltered.
std::vector<CollisionRule> momentum_conserving_quadruples(const Eigen::MatrixXd& velocities);

/// The effective subset: v != w, v' != w' and {v, w} disjoint from {v', w'}.
/// Lexicographic in (v, w, v', w').
std::vector<CollisionRule> enumerate_collisions(const Eigen::MatrixXd& velocities);

/// (I_0, I_1, ..., I_d) of one site.
Eigen::VectorXd site_observable(SiteOccupancy occ, const VelocityModel& model);

/// Reads a JSON array of d-vectors and builds a model from it.
VelocityModel load_velocity_file(const std::filesystem::path& path);

/// Parses the same JSON document from a string.
VelocityModel parse_velocity_json(const std::string& text, std::string name = "custom");

}  // namespace velgas
