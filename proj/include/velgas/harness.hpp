#pragma once

#include "velgas/dynamics.hpp"
#include "velgas/lattice.hpp"
#include "velgas/model.hpp"
#include "velgas/pde.hpp"
#include "velgas/thermo.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace velgas {

/// "model1" (any d), "model2a", "model2b", or "file:<path>" (JSON velocities).
std::shared_ptr<const VelocityModel> make_model(const std::string& spec, int dim);

/// Per-velocity occupation densities u -> theta_v(u).
using DensityProfile = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Initial-profile grammar:
///   equilibrium        theta_v = 1/2
///   theta:a,b,...      constant theta_v (one per velocity)
///   interp             theta_v = alpha_v + (beta_v - alpha_v) u_1
///   interp-bump:A      the same plus A sin(pi u_1)
/// Throws InvalidArgument; values are checked to lie in (0,1) on a grid.
DensityProfile parse_initial(const std::string& spec, const VelocityModel& model, const ReservoirProfiles& alpha,
                             const ReservoirProfiles& beta);

/// Comma-separated constants, or "@file.json" with the ReservoirProfiles JSON.
ReservoirProfiles parse_reservoirs(const std::string& spec, int velocities);

std::vector<double> parse_list(const std::string& csv);

struct Experiment {
  std::string model = "model1";
  int dim = 1;
  double theta = 0.0;
  std::optional<Regime> regime;  ///< checked against theta when given
  std::vector<int> sizes{64, 128, 256};
  std::size_t replicas = 50;
  std::string init = "interp-bump:0.1";
  ReservoirProfiles alpha = ReservoirProfiles::constant({0.8, 0.6});
  ReservoirProfiles beta = ReservoirProfiles::constant({0.3, 0.3});
  double epsilon = 0.0;  ///< smoothing half-width; <= 0 means 5/N
  bool smooth_reference = true;
  std::vector<double> times{0.1};
  std::uint64_t seed = 1;
  int pde_m = 512;
  double robin_coefficient = 2.0;
  int threads = 0;
  std::filesystem::path out;

  /// Regime implied by theta; throws RegimeMismatch when `regime` disagrees.
  [[nodiscard]] Regime validated_regime() const;

  static Experiment from_json(const std::string& text);
  [[nodiscard]] std::string to_json() const;
};

struct ComparisonRow {
  int n = 0;
  double t = 0.0;
  double epsilon = 0.0;
  Eigen::VectorXd l1;
  Eigen::VectorXd l2;
  /// Mean over PDE nodes of the replica standard error of the smoothed profile.
  Eigen::VectorXd noise;
};

struct TestFunctionRow {
  int n = 0;
  double t = 0.0;
  std::string name;
  Eigen::VectorXd error;      ///< |<pi^N, G> - int G p| per component
  Eigen::VectorXd std_error;  ///< replica standard error of <pi^N, G>
};

struct ComparisonReport {
  Experiment experiment;
  Regime regime = Regime::Dirichlet;
  std::vector<ComparisonRow> rows;
  std::vector<TestFunctionRow> tests;

  /// Rows for one comparison time, ordered as experiment.sizes.
  [[nodiscard]] std::vector<ComparisonRow> at_time(double t) const;
  /// Least-squares slope of log L1 against log N, per component.
  [[nodiscard]] Eigen::VectorXd slope(double t) const;
  [[nodiscard]] bool strictly_decreasing(double t, int component) const;
  [[nodiscard]] std::string to_json() const;
};

/// Replicated simulations for each N, averaged and smoothed, against the PDE
/// in the regime selected by theta.  Writes CSV and JSON when experiment.out
/// is set.
ComparisonReport run_convergence(const Experiment& experiment);

// ---------------------------------------------------------------------------

struct ScanConfig {
  std::string model = "model1";
  int dim = 1;
  std::vector<double> thetas{0.0, 0.5, 1.0, 2.0, 3.0};
  int n = 128;
  double T = 0.3;
  double average_from = 0.1;
  std::size_t replicas = 20;
  ReservoirProfiles alpha = ReservoirProfiles::constant({0.8, 0.6});
  ReservoirProfiles beta = ReservoirProfiles::constant({0.3, 0.3});
  std::string init = "interp";
  std::uint64_t seed = 1;
  int threads = 0;
};

struct ScanRow {
  double theta = 0.0;
  Regime regime = Regime::Dirichlet;
  SampleStatistic left_occupation;   ///< time-averaged I_0 per x_1 = 1 site
  SampleStatistic right_occupation;  ///< time-averaged I_0 per x_1 = N-1 site
  double alpha_total = 0.0;          ///< sum_v alpha_v (transverse mean)
  double beta_total = 0.0;
  SampleStatistic left_current;   ///< net mass inflow per unit time at u_1 = 0
  SampleStatistic right_current;  ///< net mass inflow per unit time at u_1 = 1
  SampleStatistic boundary_events;
  double event_bound = 0.0;  ///< 2 N^{d-1} |V| N^{2-theta} T
};

struct ScanReport {
  ScanConfig config;
  std::vector<ScanRow> rows;

  /// theta = 0 rows: |occupation - sum alpha| within 3 standard errors.
  [[nodiscard]] bool dirichlet_value_ok() const;
  /// Rows with theta > 2: total boundary events within the Poisson 99.9%
  /// upper bound of replicas * event_bound.
  [[nodiscard]] bool rate_bound_ok() const;
  /// |net current| non-increasing in theta up to 3 combined standard errors.
  [[nodiscard]] bool current_monotone() const;
  [[nodiscard]] std::string to_json() const;
};

ScanReport regime_scan(const ScanConfig& config);

/// Smallest k with P(Poisson(mean) <= k) >= level.
std::uint64_t poisson_upper(double mean, double level);

// ---------------------------------------------------------------------------

struct CheckRow {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  bool mutation = false;  ///< corrupt one rate in the stationarity check
  std::size_t dynkin_replicas = 200;
  int threads = 0;
};

/// Exact tiny-system checks plus the Dynkin and rate-table checks.  Failures
/// are reported as rows, never thrown.
std::vector<CheckRow> check_suite(const CheckOptions& options = {});

std::string checks_to_json(const std::vector<CheckRow>& rows);
std::string checks_to_table(const std::vector<CheckRow>& rows);

}  // namespace velgas
