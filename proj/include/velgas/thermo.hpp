#pragma once

#include "velgas/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace velgas {

/// lambda = (lambda_0, ..., lambda_d) parameterizing the product measure
/// m_lambda(xi) proportional to exp(lambda . I(xi)).
struct ChemicalPotential {
  Eigen::VectorXd lambda;
};

/// (rho, momentum_1, ..., momentum_d): expected mass and momentum per site.
struct HydroVector {
  Eigen::VectorXd value;

  HydroVector() = default;
  explicit HydroVector(Eigen::VectorXd v) : value(std::move(v)) {}

  [[nodiscard]] double rho() const { return value[0]; }
  [[nodiscard]] auto momentum() const { return value.tail(value.size() - 1); }
  [[nodiscard]] int dim() const { return static_cast<int>(value.size()) - 1; }
};

/// Logistic function e^x / (1 + e^x), split at 0 so exp never overflows.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// Static compressibility r(1 - r).
template <typename Scalar>
Scalar chi(Scalar r) {
  return r * (Scalar(1) - r);
}

/// theta_v(lambda): mean occupation of velocity v under m_lambda.
template <typename DerivedL, typename DerivedV>
typename DerivedL::Scalar theta_v(const Eigen::MatrixBase<DerivedL>& lambda,
                                  const Eigen::MatrixBase<DerivedV>& v) {
  const auto arg = lambda[0] + lambda.tail(lambda.size() - 1).dot(v);
  return sigmoid(arg);
}

/// theta_v(lambda) for every velocity, in model order.
Eigen::VectorXd theta_all(const Eigen::Ref<const Eigen::VectorXd>& lambda, const VelocityModel& model);

/// (rho, momentum)(lambda) = sum_v (1, v) theta_v(lambda).
HydroVector forward_map(const ChemicalPotential& lambda, const VelocityModel& model);

/// d(rho, momentum)/d(lambda) = sum_v theta_v (1 - theta_v) (1, v)(1, v)^T.
Eigen::MatrixXd forward_jacobian(const ChemicalPotential& lambda, const VelocityModel& model);

struct NewtonReport {
  int iterations = 0;
  double residual = 0.0;
};

/// Numerical inverse of forward_map.  Newton from lambda = 0 with residual
/// halving line search; converges to ||forward(lambda) - p||_inf <= 1e-12.
/// Throws NotInU when the budget is exhausted or some theta_v hits 0 or 1.
ChemicalPotential inverse_map(const HydroVector& p, const VelocityModel& model,
                              NewtonReport* report = nullptr);

/// Operational membership test for the open set U: Newton converges and
/// every theta_v stays at least 1e-10 away from 0 and 1.
bool in_u(const HydroVector& p, const VelocityModel& model);

/// Phi_v(p) = chi(theta_v(Lambda(p))).
double phi_v(const HydroVector& p, int velocity, const VelocityModel& model);

/// Phi_v(p) for every velocity.
Eigen::VectorXd phi_all(const HydroVector& p, const VelocityModel& model);

/// Two-velocity one-dimensional models {+c, -c}: theta_{+c} = (rho + m/c)/2,
/// theta_{-c} = (rho - m/c)/2.  Returned in model order.
Eigen::Vector2d two_velocity_thetas(const HydroVector& p, const VelocityModel& model);

/// True for a d = 1 model with exactly two velocities.
bool is_two_velocity_line(const VelocityModel& model);

/// Explicit description of U for the two-velocity line: both thetas in (0, 1).
bool in_u_two_velocity(const HydroVector& p, const VelocityModel& model);

// ---------------------------------------------------------------------------
// Reservoir profiles on the transverse torus T^{d-1}.

struct FourierMode {
  std::vector<int> wavevector;  ///< d-1 integers
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

/// c_0 + sum_k (a_k cos(2 pi k.u) + b_k sin(2 pi k.u)) on T^{d-1}.
class TransverseProfile {
 public:
  TransverseProfile() = default;
  explicit TransverseProfile(double mean, std::vector<FourierMode> modes = {})
      : mean_(mean), modes_(std::move(modes)) {}

  [[nodiscard]] double operator()(const Eigen::Ref<const Eigen::VectorXd>& u_tilde) const;
  [[nodiscard]] double mean() const { return mean_; }
  [[nodiscard]] const std::vector<FourierMode>& modes() const { return modes_; }
  [[nodiscard]] bool is_constant() const { return modes_.empty(); }

  /// Throws ProfileOutOfRange unless every value lies in (0, 1).
  void validate(int transverse_dim) const;

 private:
  double mean_ = 0.5;
  std::vector<FourierMode> modes_;
};

/// One transverse profile per velocity (model order).
struct ReservoirProfiles {
  std::vector<TransverseProfile> per_velocity;

  static ReservoirProfiles constant(const std::vector<double>& values);
  static ReservoirProfiles uniform(int velocities, double value);

  /// Constants or Fourier coefficients, e.g.
  /// [0.8, {"mean": 0.5, "modes": [{"k": [1], "cos": 0.1, "sin": 0.0}]}].
  static ReservoirProfiles from_json(const std::string& text);
  [[nodiscard]] std::string to_json() const;

  void validate(const VelocityModel& model) const;

  [[nodiscard]] double value(int velocity, const Eigen::Ref<const Eigen::VectorXd>& u_tilde) const {
    return per_velocity[static_cast<std::size_t>(velocity)](u_tilde);
  }
};

enum class Side { Left, Right };

/// d(u) = sum_v (1, v) alpha_v(u~) at u_1 = 0 (Left) or with beta at u_1 = 1.
class BoundaryData {
 public:
  BoundaryData(ReservoirProfiles profiles, const VelocityModel& model);

  [[nodiscard]] HydroVector operator()(const Eigen::Ref<const Eigen::VectorXd>& u_tilde) const;

 private:
  ReservoirProfiles profiles_;
  Eigen::MatrixXd extended_;
};

/// Validates the profiles (ProfileOutOfRange) and returns the boundary map.
BoundaryData boundary_data(const ReservoirProfiles& profiles, const VelocityModel& model);

}  // namespace velgas
