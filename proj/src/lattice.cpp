#include "velgas/lattice.hpp"

#include "velgas/errors.hpp"

#include "json.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace velgas {

LatticeGeom::LatticeGeom(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3) throw InvalidArgument("lattice dimension must be 1, 2 or 3");
  if (n < 2) throw InvalidArgument("N must be >= 2");
  num_sites_ = static_cast<std::size_t>(n - 1);
  for (int i = 1; i < dim; ++i) num_sites_ *= static_cast<std::size_t>(n);
}

LatticeVector LatticeGeom::coord(std::size_t site) const {
  LatticeVector x{0, 0, 0};
  const auto e0 = static_cast<std::size_t>(n_ - 1);
  x[0] = static_cast<int>(site % e0) + 1;
  site /= e0;
  for (int i = 1; i < dim_; ++i) {
    x[static_cast<std::size_t>(i)] = static_cast<int>(site % static_cast<std::size_t>(n_));
    site /= static_cast<std::size_t>(n_);
  }
  return x;
}

std::size_t LatticeGeom::index(const LatticeVector& x) const {
  std::size_t idx = 0;
  for (int i = dim_ - 1; i >= 1; --i) idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(x[static_cast<std::size_t>(i)]);
  return idx * static_cast<std::size_t>(n_ - 1) + static_cast<std::size_t>(x[0] - 1);
}

std::optional<std::size_t> LatticeGeom::shifted(std::size_t site, const LatticeVector& z) const {
  LatticeVector x = coord(site);
  x[0] += z[0];
  if (x[0] < 1 || x[0] > n_ - 1) return std::nullopt;
  for (std::size_t i = 1; i < static_cast<std::size_t>(dim_); ++i) {
    x[i] = ((x[i] + z[i]) % n_ + n_) % n_;
  }
  return index(x);
}

Eigen::VectorXd LatticeGeom::position(std::size_t site) const {
  const LatticeVector x = coord(site);
  Eigen::VectorXd u(dim_);
  for (int i = 0; i < dim_; ++i) u[i] = static_cast<double>(x[static_cast<std::size_t>(i)]) / n_;
  return u;
}

Eigen::VectorXd LatticeGeom::transverse_position(std::size_t site) const {
  return position(site).tail(dim_ - 1);
}

Configuration::Configuration(LatticeGeom geom, std::shared_ptr<const VelocityModel> model)
    : geom_(geom), model_(std::move(model)), bits_(geom.num_sites(), 0) {
  if (!model_) throw InvalidArgument("configuration needs a velocity model");
  if (model_->dim() != geom_.dim()) throw ShapeMismatch("model and lattice dimensions differ");
}

std::size_t Configuration::particle_count() const {
  std::size_t n = 0;
  for (auto w : bits_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

Eigen::VectorXd Configuration::total_observable() const {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(model_->size());
  for (auto w : bits_) {
    for (int v = 0; v < model_->size(); ++v) counts[v] += static_cast<double>((w >> v) & 1u);
  }
  return model_->extended() * counts;
}

HydroProfile profile_from_densities(const VelocityModel& model,
                                    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> densities) {
  return [ext = model.extended(), densities = std::move(densities)](const Eigen::VectorXd& u) {
    return HydroVector(ext * densities(u));
  };
}

namespace {

Configuration sample_product(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                             const HydroProfile& profile, RandomStream& rng) {
  Configuration config(geom, model);
  const VelocityModel& m = *model;
  Eigen::VectorXd last_point;
  Eigen::VectorXd thetas;
  for (std::size_t x = 0; x < geom.num_sites(); ++x) {
    const HydroVector p = profile(geom.position(x));
    if (last_point.size() != p.value.size() || last_point != p.value) {
      try {
        thetas = theta_all(inverse_map(p, m).lambda, m);
      } catch (const NotInU& e) {
        std::ostringstream os;
        os << "profile leaves U at u = " << geom.position(x).transpose() << ": " << e.what();
        throw NotInU(os.str());
      }
      last_point = p.value;
    }
    SiteOccupancy occ = 0;
    for (int v = 0; v < m.size(); ++v) {
      if (rng.uniform() < thetas[v]) occ |= SiteOccupancy{1} << v;
    }
    config.set_site(x, occ);
  }
  return config;
}

}  // namespace

Configuration sample_local_equilibrium(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                       const HydroProfile& profile, RandomStream& rng) {
  return sample_product(geom, std::move(model), profile, rng);
}

Configuration sample_local_equilibrium(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                       const HydroProfile& profile, std::uint64_t seed, std::uint64_t replica) {
  RandomStream rng(seed, stream_id(StreamPurpose::InitialState, static_cast<std::uint64_t>(geom.n()), replica));
  return sample_product(geom, std::move(model), profile, rng);
}

Configuration sample_reference(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                               const HydroProfile& h, std::uint64_t seed, std::uint64_t replica) {
  RandomStream rng(seed, stream_id(StreamPurpose::Reference, static_cast<std::uint64_t>(geom.n()), replica));
  return sample_product(geom, std::move(model), h, rng);
}

EmpiricalProfile empirical_profile(const Configuration& config) {
  const VelocityModel& m = config.model();
  EmpiricalProfile out{config.geom(), Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(config.geom().num_sites()), m.dim() + 1)};
  for (std::size_t x = 0; x < config.geom().num_sites(); ++x) {
    const SiteOccupancy w = config.site(x);
    for (int v = 0; v < m.size(); ++v) {
      if ((w >> v) & 1u) out.values.row(static_cast<Eigen::Index>(x)) += m.extended().col(v).transpose();
    }
  }
  return out;
}

Eigen::VectorXd sample_on_sites(const LatticeGeom& geom, const std::function<double(const Eigen::VectorXd&)>& g) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(geom.num_sites()));
  for (std::size_t x = 0; x < geom.num_sites(); ++x) out[static_cast<Eigen::Index>(x)] = g(geom.position(x));
  return out;
}

Eigen::VectorXd pair_with_test_function(const EmpiricalProfile& profile, const Eigen::Ref<const Eigen::VectorXd>& g) {
  if (g.size() != profile.values.rows()) {
    throw ShapeMismatch("test function has " + std::to_string(g.size()) + " samples, lattice has " +
                        std::to_string(profile.values.rows()) + " sites");
  }
  return profile.values.transpose() * g / std::pow(static_cast<double>(profile.geom.n()), profile.geom.dim());
}

namespace {

// One-dimensional box average along `axis`, half-width k sites.
Eigen::MatrixXd box_average_axis(const LatticeGeom& geom, const Eigen::MatrixXd& in, int axis, int k) {
  if (k <= 0) return in;
  Eigen::MatrixXd out(in.rows(), in.cols());
  const int ext = geom.extent(axis);
  for (std::size_t x = 0; x < geom.num_sites(); ++x) {
    const LatticeVector c = geom.coord(x);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(in.cols());
    int count = 0;
    for (int o = -k; o <= k; ++o) {
      LatticeVector y = c;
      if (axis == 0) {
        y[0] += o;
        if (y[0] < 1 || y[0] > ext) continue;
      } else {
        auto& yi = y[static_cast<std::size_t>(axis)];
        yi = ((yi + o) % ext + ext) % ext;
      }
      acc += in.row(static_cast<Eigen::Index>(geom.index(y)));
      ++count;
    }
    out.row(static_cast<Eigen::Index>(x)) = acc / count;
  }
  return out;
}

}  // namespace

EmpiricalProfile smooth_profile(const EmpiricalProfile& profile, double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidArgument("smoothing width must lie in (0, 1/2)");
  const int k = static_cast<int>(std::floor(eps * profile.geom.n() + 1e-9));
  Eigen::MatrixXd values = profile.values;
  for (int axis = 0; axis < profile.geom.dim(); ++axis) values = box_average_axis(profile.geom, values, axis, k);
  return {profile.geom, std::move(values)};
}

Eigen::VectorXd block_average(const Configuration& config, std::size_t site, int half_width) {
  if (half_width < 0) throw InvalidArgument("block half-width must be >= 0");
  const LatticeGeom& g = config.geom();
  const VelocityModel& m = config.model();
  const LatticeVector c = g.coord(site);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.dim() + 1);
  long count = 0;
  const int L = half_width;
  const int span1 = g.dim() > 1 ? L : 0;
  const int span2 = g.dim() > 2 ? L : 0;
  for (int a = -L; a <= L; ++a) {
    const int x1 = c[0] + a;
    if (x1 < 1 || x1 > g.n() - 1) continue;
    for (int b = -span1; b <= span1; ++b)
      for (int e = -span2; e <= span2; ++e) {
        const std::size_t y = *g.shifted(site, {a, b, e});
        acc += site_observable(config.site(y), m);
        ++count;
      }
  }
  return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw InvalidArgument("truncated snapshot header");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace

void write_snapshot(const std::filesystem::path& path, const Configuration& config,
                    const std::string& metadata_json) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  const auto nv = static_cast<std::size_t>(config.model().size());
  os.write("VGAS", 4);
  put_u32(os, kSnapshotVersion);
  put_u32(os, static_cast<std::uint32_t>(config.geom().dim()));
  put_u32(os, static_cast<std::uint32_t>(config.geom().n()));
  put_u32(os, static_cast<std::uint32_t>(nv));
  std::vector<unsigned char> payload((config.geom().num_sites() * nv + 7) / 8, 0);
  for (std::size_t x = 0; x < config.geom().num_sites(); ++x)
    for (std::size_t v = 0; v < nv; ++v) {
      if (config.occupied(x, static_cast<int>(v))) {
        const std::size_t bit = x * nv + v;
        payload[bit / 8] = static_cast<unsigned char>(payload[bit / 8] | (1u << (bit % 8)));
      }
    }
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));

  nlohmann::json meta = nlohmann::json::parse(metadata_json);
  nlohmann::json vel = nlohmann::json::array();
  for (int v = 0; v < config.model().size(); ++v) {
    vel.push_back(std::vector<double>(config.model().velocity(v).begin(), config.model().velocity(v).end()));
  }
  meta["velocities"] = vel;
  meta["model"] = config.model().name();
  meta["dim"] = config.geom().dim();
  meta["N"] = config.geom().n();
  std::ofstream js(path.string() + ".json");
  js << meta.dump(2) << '\n';
}

Configuration read_snapshot(const std::filesystem::path& path, std::shared_ptr<const VelocityModel> model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot read " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "VGAS") throw InvalidArgument("not a snapshot file");
  if (get_u32(is) != kSnapshotVersion) throw InvalidArgument("unsupported snapshot version");
  const auto d = static_cast<int>(get_u32(is));
  const auto n = static_cast<int>(get_u32(is));
  const auto nv = static_cast<std::size_t>(get_u32(is));
  if (nv != static_cast<std::size_t>(model->size())) throw ShapeMismatch("snapshot velocity count differs from model");
  Configuration config(LatticeGeom(d, n), std::move(model));
  std::vector<unsigned char> payload((config.geom().num_sites() * nv + 7) / 8);
  is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!is) throw InvalidArgument("truncated snapshot payload");
  for (std::size_t x = 0; x < config.geom().num_sites(); ++x)
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t bit = x * nv + v;
      if ((payload[bit / 8] >> (bit % 8)) & 1u) config.set(x, static_cast<int>(v), true);
    }
  return config;
}

void write_profile_csv(const std::filesystem::path& path, const EmpiricalProfile& profile) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  const int d = profile.geom.dim();
  for (int i = 0; i < d; ++i) os << 'u' << i + 1 << ',';
  for (int k = 0; k <= d; ++k) os << 'I' << k << (k == d ? '\n' : ',');
  os << std::setprecision(17);
  for (std::size_t x = 0; x < profile.geom.num_sites(); ++x) {
    const Eigen::VectorXd u = profile.geom.position(x);
    for (int i = 0; i < d; ++i) os << u[i] << ',';
    for (int k = 0; k <= d; ++k) {
      os << profile.values(static_cast<Eigen::Index>(x), k) << (k == d ? '\n' : ',');
    }
  }
}

}  // namespace velgas
