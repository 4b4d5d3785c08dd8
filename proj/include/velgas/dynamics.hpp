#pragma once

#include "velgas/lattice.hpp"
#include "velgas/model.hpp"
#include "velgas/rng.hpp"
#include "velgas/thermo.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace velgas {

// ---------------------------------------------------------------------------
// Jump laws.

struct JumpStep {
  LatticeVector z{0, 0, 0};
  double p = 0.0;
};

/// p(., v) for every velocity (model order), each a finite list of
/// displacements with probabilities.
struct JumpLaw {
  std::vector<std::vector<JumpStep>> per_velocity;

  /// max over listed z of the Euclidean length.
  [[nodiscard]] double range() const;

  /// Probabilities in [0,1] summing to 1, mean displacement v to 1e-12,
  /// nonzero displacements.  Throws InvalidJumpLaw naming the velocity.
  void validate(const VelocityModel& model) const;

  /// [[{"z": [1], "p": 1.0}], [{"z": [-1], "p": 1.0}]], one list per velocity.
  static JumpLaw from_json(const std::string& text);
  [[nodiscard]] std::string to_json() const;
};

/// p(z, v) = 1 at z = v.  Throws NonLatticeVelocity.
JumpLaw default_jump_law(const VelocityModel& model);

/// One term of P_N(., v): displacement and the probability mass
/// 1/2 [z = +-e_j] + p(z, v)/N, merged per displacement.
std::vector<JumpStep> kernel_for_velocity(const JumpLaw& law, int velocity, int dim, int n);

// ---------------------------------------------------------------------------
// Simulation.

struct SimParams {
  double theta = 0.0;
  double T = 0.1;
  ReservoirProfiles alpha;
  ReservoirProfiles beta;
  JumpLaw jump;
  std::uint64_t seed = 1;
  std::vector<double> snapshots;

  /// theta >= 0, T > 0, snapshot times sorted within [0, T], reservoirs in
  /// (0,1), jump law valid.
  void validate(const VelocityModel& model) const;
};

enum class EventKind { Jump, Collision, Flip, Absorbed };

struct Event {
  EventKind kind = EventKind::Absorbed;
  std::size_t site = 0;
  std::size_t target = 0;
  int velocity = -1;
  int collision = -1;
  double dt = 0.0;  ///< macroscopic waiting time
};

/// Linear functional N^{-d} sum_x g_x I_k(eta_x) followed along a trajectory
/// together with the compensator of its Dynkin martingale.
struct TrackedFunctional {
  Eigen::VectorXd g;  ///< one value per site
  int component = 0;
};

struct SimStats {
  std::uint64_t events = 0;
  std::uint64_t jumps = 0;
  std::uint64_t collisions = 0;
  std::uint64_t flips_left_in = 0;
  std::uint64_t flips_left_out = 0;
  std::uint64_t flips_right_in = 0;
  std::uint64_t flips_right_out = 0;
  /// Time integral of I_0 summed over the x_1 = 1 (left) and x_1 = N-1
  /// (right) hyperplanes, from SimOptions::average_from to the end time.
  double left_occupation_integral = 0.0;
  double right_occupation_integral = 0.0;
  double averaged_time = 0.0;

  [[nodiscard]] std::uint64_t boundary_events() const {
    return flips_left_in + flips_left_out + flips_right_in + flips_right_out;
  }
};

struct SimOptions {
  std::vector<TrackedFunctional> tracked;
  double average_from = 0.0;
  /// Compare incremental rates with a rebuild every this many events (0: never).
  std::uint64_t verify_interval = 0;
};

struct Snapshot {
  double t = 0.0;
  EmpiricalProfile profile;
  /// Per tracked functional: M_t = <pi_t,G> - <pi_0,G> - int_0^t L<pi_s,G> ds.
  std::vector<double> martingale;
};

/// Exact CTMC with generator N^2 {L^b + L^c + L^ex}; times are macroscopic.
class Simulator {
 public:
  Simulator(Configuration initial, SimParams params, RandomStream rng, SimOptions options = {});
  ~Simulator();
  Simulator(Simulator&&) noexcept;
  Simulator& operator=(Simulator&&) noexcept;

  /// Samples and applies the next event; Absorbed when the total rate is 0.
  Event step();

  /// Runs to params.T recording the scheduled snapshots.
  std::vector<Snapshot> run();

  [[nodiscard]] const Configuration& config() const;
  [[nodiscard]] double time() const;
  [[nodiscard]] double total_rate() const;
  [[nodiscard]] const SimStats& stats() const;

  /// Rate of everything that can happen at one site, recomputed from scratch.
  [[nodiscard]] double site_rate_from_scratch(std::size_t site) const;

  /// Maximum relative deviation between the maintained rates and a rebuild.
  [[nodiscard]] double verify_rates() const;

  /// L <pi, G> evaluated in closed form from the current configuration.
  [[nodiscard]] double functional_drift(std::size_t index) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SimulationResult {
  std::vector<Snapshot> snapshots;
  SimStats stats;
  Configuration final_state;
};

/// Single trajectory on the Dynamics stream (seed, N, replica).
SimulationResult simulate(const Configuration& initial, const SimParams& params, std::uint64_t replica = 0,
                          const SimOptions& options = {});

/// Mean, standard error and count of a Monte Carlo sample.
struct SampleStatistic {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;

  [[nodiscard]] bool within(double sigmas) const { return std::abs(mean) <= sigmas * std_error; }
};

SampleStatistic summarize(const std::vector<double>& xs);

struct DynkinResult {
  std::vector<double> times;
  /// stats[j][s]: tracked functional j at snapshot s.
  std::vector<std::vector<SampleStatistic>> stats;
};

/// Dynkin martingale check: M replicas from local equilibrium of `initial`,
/// M_t(G) for every (G, component), summarized at each snapshot time.
/// Throws InvalidArgument for zero replicas.
DynkinResult dynkin_martingale_check(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                     const SimParams& params, const HydroProfile& initial,
                                     const std::vector<std::function<double(const Eigen::VectorXd&)>>& tests,
                                     const std::vector<int>& components, std::size_t replicas, int threads = 0);

// ---------------------------------------------------------------------------
// Exact generators for tiny systems.

/// Sites of a tiny system: either the slab D^d_N or the full torus T^d_N.
class TinyLattice {
 public:
  static TinyLattice slab(int dim, int n);
  static TinyLattice torus(int dim, int n);

  [[nodiscard]] int dim() const { return dim_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] bool is_torus() const { return torus_; }
  [[nodiscard]] std::size_t num_sites() const { return sites_; }
  [[nodiscard]] std::optional<std::size_t> shifted(std::size_t site, const LatticeVector& z) const;
  [[nodiscard]] Eigen::VectorXd position(std::size_t site) const;
  [[nodiscard]] bool on_left(std::size_t site) const;
  [[nodiscard]] bool on_right(std::size_t site) const;

 private:
  TinyLattice(int dim, int n, bool torus);
  int dim_;
  int n_;
  bool torus_;
  std::size_t sites_;
};

enum GeneratorPart : unsigned {
  kExclusion = 1u,
  kCollision = 2u,
  kBoundary = 4u,
  kAllParts = 7u,
};

enum class GeneratorMutation {
  None,
  /// Jumps leaving site 0 run 50% too fast (negative control).
  CorruptSiteZero,
};

inline constexpr std::size_t kMaxGeneratorBits = 20;
inline constexpr std::size_t kMaxDenseStates = 4096;

/// Number of states 2^{sites |V|}; throws StateSpaceTooLarge beyond 2^20.
std::size_t tiny_state_count(const TinyLattice& lattice, const VelocityModel& model);

/// Rate matrix of N^2 times the selected parts (boundary ignored on the
/// torus).  State bit site * |V| + v.  Rows sum to zero.
Eigen::SparseMatrix<double, Eigen::RowMajor> build_generator_matrix(
    const TinyLattice& lattice, const VelocityModel& model, const SimParams& params,
    unsigned parts = kAllParts, GeneratorMutation mutation = GeneratorMutation::None);

/// Dense copy for at most 4096 states; throws StateSpaceTooLarge otherwise.
Eigen::MatrixXd dense_generator(const Eigen::SparseMatrix<double, Eigen::RowMajor>& L);

/// exp(A) by scaling and squaring of a truncated Taylor series (tol 1e-12).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

/// Product measure prod_x m_{lambda_x} over tiny-system states.
Eigen::VectorXd product_measure(const TinyLattice& lattice, const VelocityModel& model,
                                const std::vector<Eigen::VectorXd>& site_lambdas);

/// Observable eta -> N^{-d} sum_x g_x I_k(eta_x) over tiny-system states.
Eigen::VectorXd linear_observable(const TinyLattice& lattice, const VelocityModel& model,
                                  const Eigen::VectorXd& g, int component);

/// <L^c sqrt f, sqrt f>_nu using the collision generator (without N^2).
double collision_form_direct(const TinyLattice& lattice, const VelocityModel& model,
                             const Eigen::VectorXd& nu, const Eigen::VectorXd& f);

/// -1/2 D^c(sqrt f) with D^c = sum_{x,q} int p_c (sqrt f(eta^{x,q}) - sqrt f(eta))^2 dnu,
/// by looping over states, sites and collision clocks.
double collision_form_dirichlet(const TinyLattice& lattice, const VelocityModel& model,
                                const Eigen::VectorXd& nu, const Eigen::VectorXd& f);

}  // namespace velgas
