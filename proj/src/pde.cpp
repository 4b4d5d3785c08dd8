#include "velgas/pde.hpp"

#include "velgas/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace velgas {

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Dirichlet:
      return "dirichlet";
    case Regime::Robin:
      return "robin";
    case Regime::Neumann:
      return "neumann";
  }
  return "unknown";
}

Regime parse_regime(const std::string& name) {
  if (name == "dirichlet") return Regime::Dirichlet;
  if (name == "robin") return Regime::Robin;
  if (name == "neumann") return Regime::Neumann;
  throw InvalidArgument("unknown boundary regime '" + name + "'");
}

Regime regime_for_theta(double theta) {
  if (!(theta >= 0.0)) throw InvalidArgument("theta must be >= 0");
  if (theta < 1.0) return Regime::Dirichlet;
  if (theta == 1.0) return Regime::Robin;
  return Regime::Neumann;
}

HydroSystem::HydroSystem(std::shared_ptr<const VelocityModel> model, PdeOptions options)
    : model_(std::move(model)), options_(options) {
  if (!model_) throw InvalidArgument("hydrodynamic system needs a model");
  if (model_->dim() != 1) throw InvalidModel("the PDE solver is one-dimensional");
  if (!(options_.robin_coefficient >= 0.0)) throw InvalidArgument("Robin coefficient must be >= 0");
  two_velocity_ = is_two_velocity_line(*model_);
  if (two_velocity_) {
    c0_ = model_->velocities()(0, 0);
    c1_ = model_->velocities()(0, 1);
  }
}

Eigen::Vector2d HydroSystem::line_drift(double rho, double mom) const {
  const double t0 = (mom - c1_ * rho) / (c0_ - c1_);
  const double t1 = rho - t0;
  const double x0 = chi(t0);
  const double x1 = chi(t1);
  return {c0_ * x0 + c1_ * x1, c0_ * c0_ * x0 + c1_ * c1_ * x1};
}

double HydroSystem::line_speed(double rho, double mom) const {
  const double t0 = (mom - c1_ * rho) / (c0_ - c1_);
  const double t1 = rho - t0;
  const double d0 = 1.0 - 2.0 * t0;
  const double d1 = 1.0 - 2.0 * t1;
  const double a = -c1_ / (c0_ - c1_);  // d t0 / d rho
  const double b = 1.0 / (c0_ - c1_);   // d t0 / d mom
  Eigen::Matrix2d jac;
  jac.col(0) << c0_ * d0 * a + c1_ * d1 * (1 - a), c0_ * c0_ * d0 * a + c1_ * c1_ * d1 * (1 - a);
  jac.col(1) << c0_ * d0 * b - c1_ * d1 * b, c0_ * c0_ * d0 * b - c1_ * c1_ * d1 * b;
  return jac.cwiseAbs().colwise().sum().maxCoeff();
}

bool HydroSystem::line_in_u(double rho, double mom) const {
  const double t0 = (mom - c1_ * rho) / (c0_ - c1_);
  const double t1 = rho - t0;
  return t0 > 0.0 && t0 < 1.0 && t1 > 0.0 && t1 < 1.0;
}

double HydroSystem::max_speed(const Field& field) const {
  double speed = 0.0;
  for (int i = 0; i <= field.m; ++i) {
    speed = std::max(speed, two_velocity_ ? line_speed(field.values(i, 0), field.values(i, 1))
                                          : drift_speed(field.at(i)));
  }
  return speed;
}

Eigen::VectorXd HydroSystem::thetas(const HydroVector& p) const {
  if (two_velocity_) {
    const Eigen::Vector2d t = two_velocity_thetas(p, *model_);
    if (!(t[0] > 0.0 && t[0] < 1.0 && t[1] > 0.0 && t[1] < 1.0)) {
      std::ostringstream os;
      os << "state (" << p.value.transpose() << ") outside U";
      throw NotInU(os.str());
    }
    return t;
  }
  return theta_all(inverse_map(p, *model_).lambda, *model_);
}

Eigen::VectorXd HydroSystem::drift(const HydroVector& p) const {
  if (two_velocity_) {
    (void)thetas(p);
    return line_drift(p.value[0], p.value[1]);
  }
  const Eigen::VectorXd th = thetas(p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2);
  for (int v = 0; v < model_->size(); ++v) {
    const double v1 = model_->velocity(v)[0];
    out += model_->extended().col(v) * (v1 * chi(th[v]));
  }
  return out;
}

double HydroSystem::drift_speed(const HydroVector& p) const {
  if (two_velocity_) return line_speed(p.value[0], p.value[1]);
  const double eps = 1e-6;
  Eigen::Matrix2d jac;
  for (int j = 0; j < 2; ++j) {
    HydroVector a = p;
    HydroVector b = p;
    a.value[j] += eps;
    b.value[j] -= eps;
    jac.col(j) = (drift(a) - drift(b)) / (2 * eps);
  }
  return jac.cwiseAbs().colwise().sum().maxCoeff();
}

Field HydroSystem::make_field(int m, const std::function<HydroVector(double)>& initial, Regime regime,
                              const HydroVector& left, const HydroVector& right) const {
  if (m < 2) throw InvalidArgument("grid needs at least 2 cells");
  if (left.value.size() != 2 || right.value.size() != 2) throw ShapeMismatch("boundary data must be (rho, momentum)");
  Field f;
  f.m = m;
  f.regime = regime;
  f.left = left;
  f.right = right;
  f.values.resize(m + 1, 2);
  for (int i = 0; i <= m; ++i) {
    const HydroVector p = initial(f.node(i));
    if (p.value.size() != 2) throw ShapeMismatch("initial data must be (rho, momentum)");
    f.values.row(i) = p.value.transpose();
  }
  apply_bc(f);
  for (int i = 0; i <= m; ++i) {
    try {
      (void)thetas(f.at(i));
    } catch (const NotInU& e) {
      throw NotInU("initial data at node " + std::to_string(i) + ": " + e.what());
    }
  }
  return f;
}

Eigen::MatrixXd HydroSystem::flux(const Field& field) const {
  const int m = field.m;
  const double h = field.h();
  Eigen::MatrixXd out(m, 2);
  if (two_velocity_ && options_.scheme == DriftScheme::Central) {
    for (int i = 0; i < m; ++i) {
      const double r0 = field.values(i, 0), m0 = field.values(i, 1);
      const double r1 = field.values(i + 1, 0), m1 = field.values(i + 1, 1);
      out(i, 0) = 0.5 * (r1 - r0) / h;
      out(i, 1) = 0.5 * (m1 - m0) / h;
      if (options_.drift) {
        const Eigen::Vector2d d = line_drift(0.5 * (r0 + r1), 0.5 * (m0 + m1));
        out(i, 0) -= d[0];
        out(i, 1) -= d[1];
      }
    }
    return out;
  }
  std::vector<Eigen::VectorXd> nodal;
  if (options_.drift && options_.scheme == DriftScheme::Upwind) {
    for (int i = 0; i <= m; ++i) nodal.push_back(drift(field.at(i)));
  }
  for (int i = 0; i < m; ++i) {
    const Eigen::VectorXd a = field.values.row(i).transpose();
    const Eigen::VectorXd b = field.values.row(i + 1).transpose();
    Eigen::VectorXd f = 0.5 * (b - a) / h;
    if (options_.drift) {
      if (options_.scheme == DriftScheme::Central) {
        f -= drift(HydroVector(0.5 * (a + b)));
      } else {
        const double speed = std::max(drift_speed(HydroVector(a)), drift_speed(HydroVector(b)));
        f -= 0.5 * (nodal[static_cast<std::size_t>(i)] + nodal[static_cast<std::size_t>(i + 1)]) - 0.5 * speed * (b - a);
      }
    }
    out.row(i) = f.transpose();
  }
  return out;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> HydroSystem::boundary_flux(const Field& field) const {
  Eigen::VectorXd f0 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd f1 = Eigen::VectorXd::Zero(2);
  if (field.regime == Regime::Robin) {
    const double k = 0.5 * options_.robin_coefficient;
    f0 = k * (field.values.row(0).transpose() - field.left.value);
    f1 = k * (field.right.value - field.values.row(field.m).transpose());
  }
  return {f0, f1};
}

double HydroSystem::auto_dt(const Field& field) const {
  const double h = field.h();
  double dt = 0.2 * h * h;
  if (options_.drift) {
    const double speed = max_speed(field);
    if (speed > 0.0) dt = std::min(dt, 0.5 * h / speed);
  }
  if (field.regime == Regime::Robin && options_.robin_coefficient > 0.0) {
    dt = std::min(dt, 0.25 * h / options_.robin_coefficient);
  }
  return dt;
}

void HydroSystem::apply_bc(Field& field) const {
  if (field.regime == Regime::Dirichlet) {
    field.values.row(0) = field.left.value.transpose();
    field.values.row(field.m) = field.right.value.transpose();
  }
}

Field HydroSystem::advance(const Field& field, double dt) const {
  const double h = field.h();
  if (!(dt > 0.0)) throw CFLViolation("time step must be positive");
  if (dt > 0.5 * h * h * (1.0 + 1e-12)) {
    throw CFLViolation("dt = " + std::to_string(dt) + " exceeds the diffusive limit 0.5 h^2 = " +
                       std::to_string(0.5 * h * h));
  }
  const Eigen::MatrixXd F = flux(field);
  if (options_.drift) {
    const double speed = max_speed(field);
    if (dt * speed / h > 1.0) {
      throw CFLViolation("drift CFL number " + std::to_string(dt * speed / h) + " exceeds 1");
    }
  }
  Field next = field;
  const int m = field.m;
  for (int i = 1; i < m; ++i) next.values.row(i) += dt * (F.row(i) - F.row(i - 1)) / h;
  if (field.regime == Regime::Dirichlet) {
    apply_bc(next);
  } else {
    const auto [f0, f1] = boundary_flux(field);
    next.values.row(0) += dt * (F.row(0) - f0.transpose()) / (0.5 * h);
    next.values.row(m) += dt * (f1.transpose() - F.row(m - 1)) / (0.5 * h);
  }
  for (int i = 0; i <= m; ++i) {
    if (two_velocity_ && line_in_u(next.values(i, 0), next.values(i, 1))) continue;
    try {
      (void)thetas(next.at(i));
    } catch (const NotInU& e) {
      throw NotInU("after step, node " + std::to_string(i) + " (u = " + std::to_string(next.node(i)) + "): " +
                   e.what());
    }
  }
  return next;
}

std::vector<std::pair<double, Field>> HydroSystem::solve(const Field& initial, double T, double dt,
                                                         const std::vector<double>& snapshots,
                                                         const Observer& observer) const {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (!(snapshots[i] >= 0.0 && snapshots[i] <= T)) throw InvalidArgument("snapshot times must lie in [0, T]");
    if (i > 0 && snapshots[i] < snapshots[i - 1]) throw InvalidArgument("snapshot times must be sorted");
  }
  const double step = dt > 0.0 ? dt : auto_dt(initial);
  std::vector<double> stops = snapshots;
  stops.push_back(T);

  std::vector<std::pair<double, Field>> out;
  Field cur = initial;
  double t = 0.0;
  if (observer) observer(t, cur);
  for (std::size_t s = 0; s < stops.size(); ++s) {
    const double stop = stops[s];
    if (stop > t) {
      const auto n = static_cast<long>(std::ceil((stop - t) / step - 1e-9));
      const double h = (stop - t) / static_cast<double>(n);
      const double t0 = t;
      for (long k = 1; k <= n; ++k) {
        cur = advance(cur, h);
        t = k == n ? stop : t0 + static_cast<double>(k) * h;
        if (observer) observer(t, cur);
      }
    }
    if (s < snapshots.size()) out.emplace_back(stop, cur);
  }
  return out;
}

// ---------------------------------------------------------------------------

TestFunction static_test_function(std::string name, std::function<double(double)> g, std::function<double(double)> dg,
                                  std::function<double(double)> ddg) {
  return {std::move(name), [g](double, double u) { return g(u); }, [](double, double) { return 0.0; },
          [dg](double, double u) { return dg(u); }, [ddg](double, double u) { return ddg(u); }};
}

WeakResidual::WeakResidual(const HydroSystem& system, TestFunction g, Regime regime)
    : system_(&system), g_(std::move(g)), regime_(regime) {
  if (regime_ == Regime::Dirichlet) {
    const double a = g_.value(0.0, 0.0);
    const double b = g_.value(0.0, 1.0);
    if (std::abs(a) > 1e-12 || std::abs(b) > 1e-12) {
      throw TestFunctionClassViolation("test function '" + g_.name +
                                       "' must vanish at u = 0 and u = 1 in the Dirichlet regime");
    }
  }
}

Eigen::VectorXd WeakResidual::pairing(double t, const Field& field) const {
  const double h = field.h();
  Eigen::VectorXd s = Eigen::VectorXd::Zero(field.components());
  for (int i = 0; i <= field.m; ++i) {
    const double w = (i == 0 || i == field.m) ? 0.5 * h : h;
    s += w * g_.value(t, field.node(i)) * field.values.row(i).transpose();
  }
  return s;
}

// Everything under the time integral, with the signs of the residual.
Eigen::VectorXd WeakResidual::integrand(double t, const Field& field) const {
  const double h = field.h();
  const int m = field.m;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(field.components());
  const bool with_drift = system_->options().drift;
  for (int i = 0; i <= m; ++i) {
    const double u = field.node(i);
    const double w = (i == 0 || i == m) ? 0.5 * h : h;
    const Eigen::VectorXd p = field.values.row(i).transpose();
    s -= w * (g_.dt(t, u) + 0.5 * g_.duu(t, u)) * p;
    if (with_drift) s -= w * g_.du(t, u) * system_->drift(HydroVector(p));
  }
  const Eigen::VectorXd p0 = field.values.row(0).transpose();
  const Eigen::VectorXd p1 = field.values.row(m).transpose();
  if (regime_ == Regime::Robin) {
    const double k = 0.5 * system_->options().robin_coefficient;
    s -= k * (field.right.value - p1) * g_.value(t, 1.0);
    s += k * (p0 - field.left.value) * g_.value(t, 0.0);
  }
  s += 0.5 * p1 * g_.du(t, 1.0);
  s -= 0.5 * p0 * g_.du(t, 0.0);
  return s;
}

void WeakResidual::add(double t, const Field& field) {
  const Eigen::VectorXd f = integrand(t, field);
  if (!started_) {
    initial_pairing_ = pairing(t, field);
    time_integral_ = Eigen::VectorXd::Zero(field.components());
    started_ = true;
  } else {
    if (t < last_t_) throw InvalidArgument("weak residual levels must be added in time order");
    time_integral_ += 0.5 * (t - last_t_) * (f + last_integrand_);
  }
  last_t_ = t;
  last_integrand_ = f;
  final_pairing_ = pairing(t, field);
}

Eigen::VectorXd WeakResidual::value() const {
  if (!started_) return Eigen::VectorXd::Zero(2);
  return final_pairing_ - initial_pairing_ + time_integral_;
}

Eigen::VectorXd weak_residual(const HydroSystem& system, const std::vector<std::pair<double, Field>>& trajectory,
                              const TestFunction& g, Regime regime) {
  WeakResidual acc(system, g, regime);
  for (const auto& [t, f] : trajectory) acc.add(t, f);
  return acc.value();
}

// ---------------------------------------------------------------------------

double energy_basis(int z, double u) {
  if (z == 0) return 1.0;
  return std::numbers::sqrt2 * std::sin(z * std::numbers::pi * u);
}

Eigen::VectorXd energy(const Field& a, const Field& b, int zmax) {
  if (a.m != b.m || a.values.cols() != b.values.cols()) throw ShapeMismatch("energy needs fields on the same grid");
  if (zmax < 0) throw InvalidArgument("zmax must be >= 0");
  const Eigen::MatrixXd diff = a.values - b.values;
  const double h = a.h();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(diff.cols());
  for (int z = 0; z <= zmax; ++z) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(diff.cols());
    for (int i = 0; i <= a.m; ++i) {
      const double w = (i == 0 || i == a.m) ? 0.5 * h : h;
      c += w * energy_basis(z, a.node(i)) * diff.row(i).transpose();
    }
    const double az = std::pow(z * std::numbers::pi, 2) + 1.0;
    v += c.cwiseAbs2() / (2.0 * az);
  }
  return v;
}

}  // namespace velgas
