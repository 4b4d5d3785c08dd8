#include "velgas/thermo.hpp"

#include "velgas/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace velgas {
namespace {

constexpr int kNewtonBudget = 100;
constexpr int kMaxHalvings = 60;
constexpr double kNewtonTolerance = 1e-12;

std::string describe(const HydroVector& p) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < p.value.size(); ++i) os << (i ? ", " : "") << p.value[i];
  os << ')';
  return os.str();
}

}  // namespace

Eigen::VectorXd theta_all(const Eigen::Ref<const Eigen::VectorXd>& lambda, const VelocityModel& model) {
  const Eigen::VectorXd args = model.extended().transpose() * lambda;
  return args.unaryExpr([](double a) { return sigmoid(a); });
}

HydroVector forward_map(const ChemicalPotential& lambda, const VelocityModel& model) {
  return HydroVector(model.extended() * theta_all(lambda.lambda, model));
}

Eigen::MatrixXd forward_jacobian(const ChemicalPotential& lambda, const VelocityModel& model) {
  const Eigen::VectorXd th = theta_all(lambda.lambda, model);
  const Eigen::VectorXd w = th.array() * (1.0 - th.array());
  return model.extended() * w.asDiagonal() * model.extended().transpose();
}

ChemicalPotential inverse_map(const HydroVector& p, const VelocityModel& model, NewtonReport* report) {
  const Eigen::Index n = model.dim() + 1;
  if (p.value.size() != n) throw ShapeMismatch("hydro vector has wrong dimension");
  if (!p.value.allFinite()) throw NotInU("non-finite point " + describe(p));

  ChemicalPotential lam{Eigen::VectorXd::Zero(n)};
  Eigen::VectorXd residual = forward_map(lam, model).value - p.value;
  double norm = residual.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < kNewtonBudget && norm > kNewtonTolerance; ++it) {
    const Eigen::MatrixXd jac = forward_jacobian(lam, model);
    const Eigen::VectorXd step = jac.ldlt().solve(-residual);
    if (!step.allFinite()) break;
    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h < kMaxHalvings; ++h, scale *= 0.5) {
      ChemicalPotential trial{lam.lambda + scale * step};
      Eigen::VectorXd r = forward_map(trial, model).value - p.value;
      const double rn = r.cwiseAbs().maxCoeff();
      if (rn < norm) {
        lam = std::move(trial);
        residual = std::move(r);
        norm = rn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (report) *report = {it, norm};
  if (!(norm <= kNewtonTolerance)) {
    throw NotInU("inverse map did not converge at " + describe(p) + " (residual " +
                 std::to_string(norm) + ")");
  }
  const Eigen::VectorXd th = theta_all(lam.lambda, model);
  // A solution within tolerance of the boundary of [0,1]^V is indistinguishable
  // from a boundary point.
  const double margin = 100.0 * kNewtonTolerance;
  if ((th.array() <= margin).any() || (th.array() >= 1.0 - margin).any()) {
    throw NotInU("occupation saturated at " + describe(p));
  }
  return lam;
}

bool in_u(const HydroVector& p, const VelocityModel& model) {
  try {
    (void)inverse_map(p, model);
    return true;
  } catch (const NotInU&) {
    return false;
  }
}

double phi_v(const HydroVector& p, int velocity, const VelocityModel& model) {
  const ChemicalPotential lam = inverse_map(p, model);
  return chi(theta_v(lam.lambda, model.velocity(velocity)));
}

Eigen::VectorXd phi_all(const HydroVector& p, const VelocityModel& model) {
  const Eigen::VectorXd th = theta_all(inverse_map(p, model).lambda, model);
  return th.array() * (1.0 - th.array());
}

bool is_two_velocity_line(const VelocityModel& model) {
  return model.dim() == 1 && model.size() == 2;
}

Eigen::Vector2d two_velocity_thetas(const HydroVector& p, const VelocityModel& model) {
  if (!is_two_velocity_line(model)) throw InvalidModel("expected a two-velocity line model");
  const double c0 = model.velocities()(0, 0);
  const double c1 = model.velocities()(0, 1);
  // rho = t0 + t1, m = c0 t0 + c1 t1 with c1 = -c0.
  const double t0 = (p.value[1] - c1 * p.value[0]) / (c0 - c1);
  return {t0, p.value[0] - t0};
}

bool in_u_two_velocity(const HydroVector& p, const VelocityModel& model) {
  const Eigen::Vector2d t = two_velocity_thetas(p, model);
  return t[0] > 0.0 && t[0] < 1.0 && t[1] > 0.0 && t[1] < 1.0;
}

// ---------------------------------------------------------------------------

double TransverseProfile::operator()(const Eigen::Ref<const Eigen::VectorXd>& u_tilde) const {
  double out = mean_;
  for (const auto& m : modes_) {
    double phase = 0.0;
    for (std::size_t i = 0; i < m.wavevector.size(); ++i) {
      const double u = static_cast<Eigen::Index>(i) < u_tilde.size() ? u_tilde[static_cast<Eigen::Index>(i)] : 0.0;
      phase += m.wavevector[i] * u;
    }
    phase *= 2.0 * std::numbers::pi;
    out += m.cos_coeff * std::cos(phase) + m.sin_coeff * std::sin(phase);
  }
  return out;
}

void TransverseProfile::validate(int transverse_dim) const {
  double spread = 0.0;
  for (const auto& m : modes_) {
    if (static_cast<int>(m.wavevector.size()) != transverse_dim) {
      throw ProfileOutOfRange("Fourier mode dimension does not match the transverse torus");
    }
    spread += std::abs(m.cos_coeff) + std::abs(m.sin_coeff);
  }
  if (!std::isfinite(mean_) || !std::isfinite(spread)) throw ProfileOutOfRange("non-finite profile");
  if (mean_ - spread > 0.0 && mean_ + spread < 1.0) return;
  if (transverse_dim == 0 || modes_.empty()) {
    throw ProfileOutOfRange("reservoir value " + std::to_string(mean_) + " outside (0,1)");
  }
  // The triangle bound failed; fall back to a dense grid.
  constexpr int kGrid = 64;
  Eigen::VectorXd u(transverse_dim);
  long total = 1;
  for (int i = 0; i < transverse_dim; ++i) total *= kGrid;
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int i = 0; i < transverse_dim; ++i) {
      u[i] = static_cast<double>(rem % kGrid) / kGrid;
      rem /= kGrid;
    }
    const double v = (*this)(u);
    if (!(v > 0.0 && v < 1.0)) {
      throw ProfileOutOfRange("reservoir profile takes value " + std::to_string(v) + " outside (0,1)");
    }
  }
}

ReservoirProfiles ReservoirProfiles::constant(const std::vector<double>& values) {
  ReservoirProfiles out;
  for (double v : values) out.per_velocity.emplace_back(v);
  return out;
}

ReservoirProfiles ReservoirProfiles::uniform(int velocities, double value) {
  return constant(std::vector<double>(static_cast<std::size_t>(velocities), value));
}

ReservoirProfiles ReservoirProfiles::from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProfileOutOfRange(std::string("reservoir profile: ") + e.what());
  }
  if (!doc.is_array()) throw ProfileOutOfRange("reservoir profile must be an array");
  ReservoirProfiles out;
  for (const auto& item : doc) {
    if (item.is_number()) {
      out.per_velocity.emplace_back(item.get<double>());
      continue;
    }
    std::vector<FourierMode> modes;
    for (const auto& m : item.value("modes", nlohmann::json::array())) {
      modes.push_back({m.at("k").get<std::vector<int>>(), m.value("cos", 0.0), m.value("sin", 0.0)});
    }
    out.per_velocity.emplace_back(item.at("mean").get<double>(), std::move(modes));
  }
  return out;
}

std::string ReservoirProfiles::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& p : per_velocity) {
    if (p.is_constant()) {
      doc.push_back(p.mean());
      continue;
    }
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& m : p.modes()) modes.push_back({{"k", m.wavevector}, {"cos", m.cos_coeff}, {"sin", m.sin_coeff}});
    doc.push_back({{"mean", p.mean()}, {"modes", modes}});
  }
  return doc.dump();
}

void ReservoirProfiles::validate(const VelocityModel& model) const {
  if (static_cast<int>(per_velocity.size()) != model.size()) {
    throw ProfileOutOfRange("expected " + std::to_string(model.size()) + " reservoir profiles, got " +
                            std::to_string(per_velocity.size()));
  }
  for (const auto& p : per_velocity) p.validate(model.dim() - 1);
}

BoundaryData::BoundaryData(ReservoirProfiles profiles, const VelocityModel& model)
    : profiles_(std::move(profiles)), extended_(model.extended()) {}

HydroVector BoundaryData::operator()(const Eigen::Ref<const Eigen::VectorXd>& u_tilde) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(extended_.rows());
  for (Eigen::Index v = 0; v < extended_.cols(); ++v) {
    out += profiles_.value(static_cast<int>(v), u_tilde) * extended_.col(v);
  }
  return HydroVector(std::move(out));
}

BoundaryData boundary_data(const ReservoirProfiles& profiles, const VelocityModel& model) {
  profiles.validate(model);
  return BoundaryData(profiles, model);
}

}  // namespace velgas
