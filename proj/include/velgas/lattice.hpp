#pragma once

#include "velgas/model.hpp"
#include "velgas/rng.hpp"
#include "velgas/thermo.hpp"

#include <Eigen/Dense>

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace velgas {

/// Integer lattice vector; unused trailing coordinates are zero.
using LatticeVector = std::array<int, 3>;

/// Bulk D^d_N = {1, ..., N-1} x T^{d-1}_N.  Coordinate 1 is open, the others
/// are periodic.  Sites are numbered with coordinate 1 fastest.
class LatticeGeom {
 public:
  LatticeGeom(int dim, int n);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int extent(int axis) const { return axis == 0 ? n_ - 1 : n_; }
  [[nodiscard]] std::size_t num_sites() const { return num_sites_; }
  /// Sites on one boundary hyperplane: N^{d-1}.
  [[nodiscard]] std::size_t boundary_size() const { return num_sites_ / static_cast<std::size_t>(n_ - 1); }

  /// Coordinates (x_1 in [1, N-1], others in [0, N-1]).
  [[nodiscard]] LatticeVector coord(std::size_t site) const;
  [[nodiscard]] std::size_t index(const LatticeVector& x) const;

  /// Site x + z, or nullopt when coordinate 1 leaves [1, N-1].
  [[nodiscard]] std::optional<std::size_t> shifted(std::size_t site, const LatticeVector& z) const;

  /// Macroscopic position x / N.
  [[nodiscard]] Eigen::VectorXd position(std::size_t site) const;
  /// Transverse macroscopic position x~ / N (empty for d = 1).
  [[nodiscard]] Eigen::VectorXd transverse_position(std::size_t site) const;

  [[nodiscard]] bool on_left(std::size_t site) const { return site % static_cast<std::size_t>(n_ - 1) == 0; }
  [[nodiscard]] bool on_right(std::size_t site) const {
    return site % static_cast<std::size_t>(n_ - 1) == static_cast<std::size_t>(n_ - 2);
  }

  friend bool operator==(const LatticeGeom&, const LatticeGeom&) = default;

 private:
  int dim_;
  int n_;
  std::size_t num_sites_;
};

/// Occupancy bits eta(x, v), one 64-bit word per site.
class Configuration {
 public:
  Configuration(LatticeGeom geom, std::shared_ptr<const VelocityModel> model);

  [[nodiscard]] const LatticeGeom& geom() const { return geom_; }
  [[nodiscard]] const VelocityModel& model() const { return *model_; }
  [[nodiscard]] const std::shared_ptr<const VelocityModel>& model_ptr() const { return model_; }

  [[nodiscard]] SiteOccupancy site(std::size_t x) const { return bits_[x]; }
  void set_site(std::size_t x, SiteOccupancy occ) { bits_[x] = occ; }
  [[nodiscard]] bool occupied(std::size_t x, int v) const { return (bits_[x] >> v) & 1u; }
  void set(std::size_t x, int v, bool value) {
    const SiteOccupancy mask = SiteOccupancy{1} << v;
    bits_[x] = value ? (bits_[x] | mask) : (bits_[x] & ~mask);
  }
  void flip(std::size_t x, int v) { bits_[x] ^= SiteOccupancy{1} << v; }

  [[nodiscard]] std::span<const SiteOccupancy> words() const { return bits_; }
  [[nodiscard]] std::size_t particle_count() const;

  /// Sum over sites of I(eta_x).
  [[nodiscard]] Eigen::VectorXd total_observable() const;

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return a.geom_ == b.geom_ && a.bits_ == b.bits_;
  }

 private:
  LatticeGeom geom_;
  std::shared_ptr<const VelocityModel> model_;
  std::vector<SiteOccupancy> bits_;
};

/// Macroscopic (density, momentum) profile u -> (rho, momentum)(u).
using HydroProfile = std::function<HydroVector(const Eigen::VectorXd& u)>;

/// Profile built from per-velocity occupation densities u -> theta_v(u):
/// (rho, momentum)(u) = sum_v (1, v) theta_v(u).
HydroProfile profile_from_densities(const VelocityModel& model,
                                    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> densities);

/// Product measure with site marginals m_{Lambda(profile(x/N))}.
/// Throws NotInU naming the first offending site.
Configuration sample_local_equilibrium(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                       const HydroProfile& profile, RandomStream& rng);

Configuration sample_local_equilibrium(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                       const HydroProfile& profile, std::uint64_t seed,
                                       std::uint64_t replica = 0);

/// Reference product measure nu^N_h; same construction with h in place of
/// the initial profile, on its own RNG stream.
Configuration sample_reference(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                               const HydroProfile& h, std::uint64_t seed, std::uint64_t replica = 0);

/// Per-site values I(eta_x), num_sites x (d+1).
struct EmpiricalProfile {
  LatticeGeom geom;
  Eigen::MatrixXd values;

  [[nodiscard]] double spacing() const { return 1.0 / geom.n(); }
};

EmpiricalProfile empirical_profile(const Configuration& config);

/// Grid samples G(x/N) of a scalar function.
Eigen::VectorXd sample_on_sites(const LatticeGeom& geom, const std::function<double(const Eigen::VectorXd&)>& g);

/// N^{-d} sum_x G(x/N) I(eta_x), componentwise.  Throws ShapeMismatch.
Eigen::VectorXd pair_with_test_function(const EmpiricalProfile& profile, const Eigen::Ref<const Eigen::VectorXd>& g);

/// Box-kernel average over [-eps, eps]^d (floor(eps N) sites each way),
/// renormalized by the sites actually inside the slab, periodic transversally.
EmpiricalProfile smooth_profile(const EmpiricalProfile& profile, double eps);

/// Average of I over the cube of half-width L around `site`, truncated in
/// coordinate 1 and divided by the truncated count.
Eigen::VectorXd block_average(const Configuration& config, std::size_t site, int half_width);

// ---------------------------------------------------------------------------
// Snapshot and profile files.

/// Binary snapshot: "VGAS", u32 version, u32 d, u32 N, u32 |V|, then the bits
/// eta(x, v) packed site-major, LSB first, index x * |V| + v.  A JSON sidecar
/// (path + ".json") records the velocity set and any extra metadata.
void write_snapshot(const std::filesystem::path& path, const Configuration& config,
                    const std::string& metadata_json = "{}");
Configuration read_snapshot(const std::filesystem::path& path, std::shared_ptr<const VelocityModel> model);

/// CSV with columns u1..ud, I0..Id.
void write_profile_csv(const std::filesystem::path& path, const EmpiricalProfile& profile);

}  // namespace velgas
