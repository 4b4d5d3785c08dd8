#include "velgas/model.hpp"

#include "velgas/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace velgas {
namespace {

bool approx_equal(const Eigen::Ref<const Eigen::VectorXd>& a,
                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  return (a - b).cwiseAbs().maxCoeff() <= kVelocityTolerance;
}

int find_column(const Eigen::MatrixXd& m, const Eigen::Ref<const Eigen::VectorXd>& v) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (approx_equal(m.col(j), v)) return static_cast<int>(j);
  }
  return -1;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] < b[i] - kVelocityTolerance) return true;
    if (a[i] > b[i] + kVelocityTolerance) return false;
  }
  return false;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

}  // namespace

VelocityModel::VelocityModel(Eigen::MatrixXd velocities, std::string name)
    : velocities_(std::move(velocities)), name_(std::move(name)) {
  if (velocities_.rows() < 1) throw InvalidModel("velocity dimension must be >= 1");
  if (velocities_.cols() < 1) throw InvalidModel("velocity set is empty");
  if (velocities_.cols() > kMaxVelocities) {
    throw InvalidModel("at most 64 velocities are supported");
  }
  if (!velocities_.allFinite()) throw InvalidModel("velocity entries must be finite");
  for (Eigen::Index i = 0; i < velocities_.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < velocities_.cols(); ++j) {
      if (approx_equal(velocities_.col(i), velocities_.col(j))) {
        throw InvalidModel("duplicate velocity " + format_vector(velocities_.col(i)));
      }
    }
  }
  if (auto missing = missing_for_closure(velocities_); !missing.empty()) {
    std::string msg = "velocity set not closed under reflections/permutations; missing:";
    for (const auto& m : missing) msg += ' ' + format_vector(m);
    throw InvalidModel(msg);
  }

  extended_.resize(velocities_.rows() + 1, velocities_.cols());
  extended_.row(0).setOnes();
  extended_.bottomRows(velocities_.rows()) = velocities_;

  reflected_.resize(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) {
    reflected_[static_cast<std::size_t>(i)] = find_column(velocities_, -velocities_.col(i));
  }
  collisions_ = enumerate_collisions(velocities_);
}

int VelocityModel::index_of(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != velocities_.rows()) return -1;
  return find_column(velocities_, v);
}

VelocityModel build_model_one(int d) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, 2 * d);
  for (int i = 0; i < d; ++i) {
    v(i, 2 * i) = 1.0;
    v(i, 2 * i + 1) = -1.0;
  }
  return VelocityModel(std::move(v), "model1");
}

double model_two_root() {
  // f(w) = w^4 - 6 w^2 - 1 is convex and increasing for w > sqrt(3);
  // Newton from the right converges monotonically.
  double w = 3.0;
  for (int it = 0; it < 100; ++it) {
    const double w2 = w * w;
    const double f = w2 * w2 - 6.0 * w2 - 1.0;
    const double df = 4.0 * w2 * w - 12.0 * w;
    const double next = w - f / df;
    if (std::abs(next - w) <= 1e-15 * w) {
      w = next;
      break;
    }
    w = next;
  }
  return w;
}

VelocityModel build_model_two(ModelTwoVariant variant, double scale) {
  const double w = model_two_root();
  Eigen::Vector3d base = variant == ModelTwoVariant::A ? Eigen::Vector3d(w, w, w)
                                                       : Eigen::Vector3d(1.0, 1.0, w);
  base *= scale;
  return VelocityModel(signed_permutation_orbit(base),
                       variant == ModelTwoVariant::A ? "model2-A" : "model2-B");
}

Eigen::MatrixXd signed_permutation_orbit(const Eigen::Ref<const Eigen::VectorXd>& base) {
  const auto d = static_cast<int>(base.size());
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Eigen::VectorXd> orbit;
  do {
    for (unsigned signs = 0; signs < (1u << d); ++signs) {
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) {
        const double s = (signs >> i) & 1u ? -1.0 : 1.0;
        v[i] = s * base[perm[static_cast<std::size_t>(i)]];
      }
      const bool seen = std::any_of(orbit.begin(), orbit.end(),
                                    [&](const Eigen::VectorXd& o) { return approx_equal(o, v); });
      if (!seen) orbit.push_back(std::move(v));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(orbit.begin(), orbit.end(), lex_less);
  Eigen::MatrixXd out(d, static_cast<Eigen::Index>(orbit.size()));
  for (std::size_t j = 0; j < orbit.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = orbit[j];
  return out;
}

std::vector<Eigen::VectorXd> missing_for_closure(const Eigen::MatrixXd& velocities) {
  std::vector<Eigen::VectorXd> missing;
  for (Eigen::Index j = 0; j < velocities.cols(); ++j) {
    const Eigen::MatrixXd orbit = signed_permutation_orbit(velocities.col(j));
    for (Eigen::Index k = 0; k < orbit.cols(); ++k) {
      if (find_column(velocities, orbit.col(k)) >= 0) continue;
      const bool listed = std::any_of(missing.begin(), missing.end(), [&](const Eigen::VectorXd& m) {
        return approx_equal(m, orbit.col(k));
      });
      if (!listed) missing.emplace_back(orbit.col(k));
    }
  }
  return missing;
}

std::vector<CollisionRule> momentum_conserving_quadruples(const Eigen::MatrixXd& velocities) {
  const auto n = static_cast<int>(velocities.cols());
  std::vector<CollisionRule> out;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Eigen::VectorXd in = velocities.col(a) + velocities.col(b);
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          if (approx_equal(in, velocities.col(c) + velocities.col(e))) out.push_back({a, b, c, e});
        }
    }
  return out;
}

std::vector<CollisionRule> enumerate_collisions(const Eigen::MatrixXd& velocities) {
  std::vector<CollisionRule> out;
  for (const auto& q : momentum_conserving_quadruples(velocities)) {
    if (q.v == q.w || q.vp == q.wp) continue;
    if (q.v == q.vp || q.v == q.wp || q.w == q.vp || q.w == q.wp) continue;
    out.push_back(q);
  }
  return out;
}

Eigen::VectorXd site_observable(SiteOccupancy occ, const VelocityModel& model) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim() + 1);
  for (int i = 0; i < model.size(); ++i) {
    if ((occ >> i) & 1u) out += model.extended().col(i);
  }
  return out;
}

VelocityModel parse_velocity_json(const std::string& text, std::string name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel(std::string("velocity file: ") + e.what());
  }
  if (!doc.is_array() || doc.empty()) throw InvalidModel("velocity file must be a non-empty array");
  const std::size_t d = doc.front().size();
  Eigen::MatrixXd v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(doc.size()));
  for (std::size_t j = 0; j < doc.size(); ++j) {
    const auto& row = doc[j];
    if (!row.is_array() || row.size() != d) {
      throw InvalidModel("velocity " + std::to_string(j) + " has wrong dimension");
    }
    for (std::size_t i = 0; i < d; ++i) {
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[i].get<double>();
    }
  }
  return VelocityModel(std::move(v), std::move(name));
}

VelocityModel load_velocity_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidModel("cannot open velocity file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_velocity_json(ss.str(), path.stem().string());
}

}  // namespace velgas
