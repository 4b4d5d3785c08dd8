#pragma once

#include "velgas/model.hpp"
#include "velgas/thermo.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace velgas {

enum class Regime { Dirichlet, Robin, Neumann };

std::string to_string(Regime r);
Regime parse_regime(const std::string& name);

/// Boundary regime selected by theta: [0,1) Dirichlet, 1 Robin, (1,inf) Neumann.
Regime regime_for_theta(double theta);

enum class DriftScheme { Central, Upwind };

struct PdeOptions {
  bool drift = true;
  DriftScheme scheme = DriftScheme::Central;
  /// kappa in F(0) = kappa/2 (p(0) - d(0)), F(1) = kappa/2 (d(1) - p(1))
  /// for the Robin regime.
  double robin_coefficient = 1.0;
};

/// Nodal values on the uniform grid u_i = i/M, i = 0..M, of a d = 1 system;
/// row i holds (rho, momentum) at u_i.
struct Field {
  int m = 0;
  Eigen::MatrixXd values;
  Regime regime = Regime::Dirichlet;
  HydroVector left;   ///< d(0)
  HydroVector right;  ///< d(1)

  [[nodiscard]] double h() const { return 1.0 / m; }
  [[nodiscard]] double node(int i) const { return static_cast<double>(i) / m; }
  [[nodiscard]] int components() const { return static_cast<int>(values.cols()); }
  [[nodiscard]] HydroVector at(int i) const { return HydroVector(values.row(i).transpose()); }
};

/// Hydrodynamic system for a one-dimensional velocity model.
class HydroSystem {
 public:
  HydroSystem(std::shared_ptr<const VelocityModel> model, PdeOptions options = {});

  [[nodiscard]] const VelocityModel& model() const { return *model_; }
  [[nodiscard]] const PdeOptions& options() const { return options_; }

  /// theta_v(Lambda(p)); closed form for two-velocity lines.  Throws NotInU.
  [[nodiscard]] Eigen::VectorXd thetas(const HydroVector& p) const;

  /// sum_v (1, v) v_1 chi(theta_v(Lambda(p))).
  [[nodiscard]] Eigen::VectorXd drift(const HydroVector& p) const;

  /// Max column-sum norm of d(drift)/dp by central differences.
  [[nodiscard]] double drift_speed(const HydroVector& p) const;

  /// Field sampled from `initial`; Dirichlet fields get d(0), d(1) pinned.
  [[nodiscard]] Field make_field(int m, const std::function<HydroVector(double)>& initial, Regime regime,
                                 const HydroVector& left, const HydroVector& right) const;

  /// Total face flux F = 1/2 dp/du - drift at faces i + 1/2, i = 0..M-1.
  [[nodiscard]] Eigen::MatrixXd flux(const Field& field) const;

  /// Prescribed boundary fluxes (F(0), F(1)) for Robin and Neumann fields.
  [[nodiscard]] std::pair<Eigen::VectorXd, Eigen::VectorXd> boundary_flux(const Field& field) const;

  /// Largest stable step: 0.2 h^2, reduced when the drift CFL number would exceed 1.
  [[nodiscard]] double auto_dt(const Field& field) const;

  /// One explicit Euler step in conservative form.  Throws CFLViolation when
  /// dt > 0.5 h^2 or dt * speed / h > 1, NotInU naming the node after the step.
  [[nodiscard]] Field advance(const Field& field, double dt) const;

  /// Pins Dirichlet boundary nodes; Robin and Neumann closures live in the
  /// boundary fluxes and leave the field unchanged.
  void apply_bc(Field& field) const;

  using Observer = std::function<void(double t, const Field&)>;

  /// Marches to T landing exactly on every snapshot time; dt <= 0 selects
  /// auto_dt.  The observer sees every accepted time level including t = 0.
  [[nodiscard]] std::vector<std::pair<double, Field>> solve(const Field& initial, double T, double dt,
                                                            const std::vector<double>& snapshots,
                                                            const Observer& observer = {}) const;

 private:
  // Closed forms for two-velocity lines (no allocation in the hot loop).
  [[nodiscard]] Eigen::Vector2d line_drift(double rho, double mom) const;
  [[nodiscard]] double line_speed(double rho, double mom) const;
  [[nodiscard]] bool line_in_u(double rho, double mom) const;
  [[nodiscard]] double max_speed(const Field& field) const;

  std::shared_ptr<const VelocityModel> model_;
  PdeOptions options_;
  bool two_velocity_;
  double c0_ = 0.0;
  double c1_ = 0.0;
};

// ---------------------------------------------------------------------------
// Weak formulation.

/// Scalar test function G(t, u) with the derivatives the residual needs.
struct TestFunction {
  std::string name;
  std::function<double(double, double)> value;
  std::function<double(double, double)> dt;
  std::function<double(double, double)> du;
  std::function<double(double, double)> duu;
};

/// Time-independent test function from G, G', G''.
TestFunction static_test_function(std::string name, std::function<double(double)> g, std::function<double(double)> dg,
                                  std::function<double(double)> ddg);

/// Accumulates every term of the weak residual along a trajectory, with
/// trapezoidal quadrature in space (grid nodes) and time (accepted levels).
class WeakResidual {
 public:
  /// Throws TestFunctionClassViolation for Dirichlet when G(t,0) or G(t,1)
  /// is nonzero at t = 0.
  WeakResidual(const HydroSystem& system, TestFunction g, Regime regime);

  void add(double t, const Field& field);

  /// Per-component residual (size d+1).
  [[nodiscard]] Eigen::VectorXd value() const;

 private:
  [[nodiscard]] Eigen::VectorXd integrand(double t, const Field& field) const;
  [[nodiscard]] Eigen::VectorXd pairing(double t, const Field& field) const;

  const HydroSystem* system_;
  TestFunction g_;
  Regime regime_;
  bool started_ = false;
  double last_t_ = 0.0;
  Eigen::VectorXd last_integrand_;
  Eigen::VectorXd initial_pairing_;
  Eigen::VectorXd final_pairing_;
  Eigen::VectorXd time_integral_;
};

/// Residual of a stored trajectory (levels sorted by time).
Eigen::VectorXd weak_residual(const HydroSystem& system, const std::vector<std::pair<double, Field>>& trajectory,
                              const TestFunction& g, Regime regime);

// ---------------------------------------------------------------------------
// Energy of a difference.

/// psi_0 = 1, psi_z = sqrt(2) sin(z pi u).
double energy_basis(int z, double u);

/// V_k = sum_{z=0}^{zmax} <pbar_k, psi_z>^2 / (2 a_z), a_z = (z pi)^2 + 1,
/// pbar = a - b, coefficients by trapezoidal quadrature.  Per component.
Eigen::VectorXd energy(const Field& a, const Field& b, int zmax = 64);

}  // namespace velgas
