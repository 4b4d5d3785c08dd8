#include "velgas/dynamics.hpp"

#include "velgas/errors.hpp"
#include "velgas/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace velgas {

namespace {

std::string describe_velocity(const VelocityModel& model, int v) {
  std::ostringstream os;
  os << "velocity " << v << " (" << model.velocity(v).transpose() << ")";
  return os.str();
}

}  // namespace

double JumpLaw::range() const {
  double r = 0.0;
  for (const auto& steps : per_velocity)
    for (const auto& s : steps) {
      r = std::max(r, std::sqrt(static_cast<double>(s.z[0] * s.z[0] + s.z[1] * s.z[1] + s.z[2] * s.z[2])));
    }
  return r;
}

void JumpLaw::validate(const VelocityModel& model) const {
  if (per_velocity.size() != static_cast<std::size_t>(model.size())) {
    throw InvalidJumpLaw("jump law lists " + std::to_string(per_velocity.size()) + " velocities, model has " +
                         std::to_string(model.size()));
  }
  const int d = model.dim();
  for (int v = 0; v < model.size(); ++v) {
    const auto& steps = per_velocity[static_cast<std::size_t>(v)];
    if (steps.empty()) throw InvalidJumpLaw(describe_velocity(model, v) + ": empty jump law");
    double total = 0.0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (const auto& s : steps) {
      if (!(s.p >= 0.0 && s.p <= 1.0)) {
        throw InvalidJumpLaw(describe_velocity(model, v) + ": probability outside [0,1]");
      }
      bool zero = true;
      for (int i = 0; i < 3; ++i) {
        if (i >= d && s.z[static_cast<std::size_t>(i)] != 0) {
          throw InvalidJumpLaw(describe_velocity(model, v) + ": displacement has too many coordinates");
        }
        zero = zero && s.z[static_cast<std::size_t>(i)] == 0;
      }
      if (zero) throw InvalidJumpLaw(describe_velocity(model, v) + ": zero displacement");
      total += s.p;
      for (int i = 0; i < d; ++i) mean[i] += s.p * s.z[static_cast<std::size_t>(i)];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw InvalidJumpLaw(describe_velocity(model, v) + ": probabilities sum to " + std::to_string(total));
    }
    if ((mean - model.velocity(v)).cwiseAbs().maxCoeff() > 1e-12) {
      std::ostringstream os;
      os << describe_velocity(model, v) << ": mean displacement (" << mean.transpose() << ") differs from v";
      throw InvalidJumpLaw(os.str());
    }
  }
}

JumpLaw JumpLaw::from_json(const std::string& text) {
  JumpLaw law;
  try {
    const auto doc = nlohmann::json::parse(text);
    if (!doc.is_array()) throw InvalidJumpLaw("jump law must be an array with one entry per velocity");
    for (const auto& entry : doc) {
      std::vector<JumpStep> steps;
      for (const auto& s : entry) {
        JumpStep step;
        const auto z = s.at("z").get<std::vector<int>>();
        if (z.empty() || z.size() > 3) throw InvalidJumpLaw("displacement must have 1 to 3 coordinates");
        for (std::size_t i = 0; i < z.size(); ++i) step.z[i] = z[i];
        step.p = s.at("p").get<double>();
        steps.push_back(step);
      }
      law.per_velocity.push_back(std::move(steps));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidJumpLaw(std::string("malformed jump law: ") + e.what());
  }
  return law;
}

std::string JumpLaw::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& steps : per_velocity) {
    nlohmann::json entry = nlohmann::json::array();
    for (const auto& s : steps) entry.push_back({{"z", std::vector<int>(s.z.begin(), s.z.end())}, {"p", s.p}});
    doc.push_back(entry);
  }
  return doc.dump();
}

JumpLaw default_jump_law(const VelocityModel& model) {
  JumpLaw law;
  for (int v = 0; v < model.size(); ++v) {
    JumpStep s;
    for (int i = 0; i < model.dim(); ++i) {
      const double c = model.velocity(v)[i];
      if (std::abs(c - std::round(c)) > kVelocityTolerance) {
        throw NonLatticeVelocity(describe_velocity(model, v) + " is not a lattice vector; supply a jump law");
      }
      s.z[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(c));
    }
    s.p = 1.0;
    law.per_velocity.push_back({s});
  }
  return law;
}

std::vector<JumpStep> kernel_for_velocity(const JumpLaw& law, int velocity, int dim, int n) {
  std::map<LatticeVector, double> mass;
  for (int j = 0; j < dim; ++j) {
    LatticeVector e{0, 0, 0};
    e[static_cast<std::size_t>(j)] = 1;
    mass[e] += 0.5;
    e[static_cast<std::size_t>(j)] = -1;
    mass[e] += 0.5;
  }
  for (const auto& s : law.per_velocity.at(static_cast<std::size_t>(velocity))) mass[s.z] += s.p / n;
  std::vector<JumpStep> out;
  for (const auto& [z, p] : mass) {
    if (p > 0.0) out.push_back({z, p});
  }
  return out;
}

void SimParams::validate(const VelocityModel& model) const {
  if (!(theta >= 0.0) || !std::isfinite(theta)) throw InvalidArgument("theta must be finite and >= 0");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidArgument("T must be positive");
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (!(snapshots[i] >= 0.0 && snapshots[i] <= T)) throw InvalidArgument("snapshot times must lie in [0, T]");
    if (i > 0 && snapshots[i] < snapshots[i - 1]) throw InvalidArgument("snapshot times must be sorted");
  }
  alpha.validate(model);
  beta.validate(model);
  jump.validate(model);
}

// ---------------------------------------------------------------------------

namespace {

// Complete binary tree of partial sums over the per-site total rates.  Parents
// are recomputed from their children on every update so no error accumulates.
class RateTree {
 public:
  explicit RateTree(std::size_t n) : leaves_(std::bit_ceil(std::max<std::size_t>(n, 1))), node_(2 * leaves_, 0.0) {}

  void set(std::size_t i, double rate) {
    std::size_t j = i + leaves_;
    node_[j] = rate;
    for (j /= 2; j >= 1; j /= 2) node_[j] = node_[2 * j] + node_[2 * j + 1];
  }

  [[nodiscard]] double leaf(std::size_t i) const { return node_[i + leaves_]; }
  [[nodiscard]] double total() const { return node_[1]; }

  // Leaf containing u in [0, total), with u reduced to an offset inside it.
  std::size_t find(double& u) const {
    std::size_t j = 1;
    while (j < leaves_) {
      const double left = node_[2 * j];
      if (u < left || node_[2 * j + 1] <= 0.0) {
        u = std::min(u, left);
        j = 2 * j;
      } else {
        u -= left;
        j = 2 * j + 1;
      }
    }
    return j - leaves_;
  }

 private:
  std::size_t leaves_;
  std::vector<double> node_;
};

struct KernelEntry {
  int disp = 0;  // index into the displacement table
  double rate = 0.0;
};

constexpr std::uint64_t kResumInterval = 1u << 16;

}  // namespace

struct Simulator::Impl {
  Configuration config;
  SimParams params;
  RandomStream rng;
  SimOptions options;
  LatticeGeom geom;
  const VelocityModel* model;
  int nv;
  double n_pow_d;
  double collision_rate;
  double flip_rate;

  std::vector<LatticeVector> disps;
  std::vector<int> neg_disp;
  std::vector<std::vector<KernelEntry>> kernel;
  std::vector<std::int64_t> neighbor;  // site * |disps| + disp, -1 outside
  std::vector<double> alpha_at;        // transverse index * |V| + v
  std::vector<double> beta_at;
  RateTree tree;

  std::vector<std::vector<double>> drift_site;
  std::vector<double> drift_total;
  std::vector<double> compensator;
  std::vector<double> initial_pairing;
  std::vector<std::vector<double>> weights;  // per tracked: I_k weight per velocity

  double t = 0.0;
  double integrated_to = 0.0;
  long left_count = 0;
  long right_count = 0;
  SimStats stats;
  std::vector<std::size_t> scratch;

  Impl(Configuration c, SimParams p, RandomStream r, SimOptions o)
      : config(std::move(c)),
        params(std::move(p)),
        rng(r),
        options(std::move(o)),
        geom(config.geom()),
        model(&config.model()),
        nv(config.model().size()),
        n_pow_d(std::pow(static_cast<double>(geom.n()), geom.dim())),
        collision_rate(static_cast<double>(geom.n()) * geom.n()),
        flip_rate(std::pow(static_cast<double>(geom.n()), 2.0 - params.theta)),
        tree(geom.num_sites()) {
    params.validate(*model);
    const int n = geom.n();
    const int d = geom.dim();

    std::map<LatticeVector, int> index;
    auto disp_index = [&](const LatticeVector& z) {
      auto [it, inserted] = index.try_emplace(z, static_cast<int>(disps.size()));
      if (inserted) disps.push_back(z);
      return it->second;
    };
    for (int v = 0; v < nv; ++v) {
      std::vector<KernelEntry> entries;
      for (const auto& s : kernel_for_velocity(params.jump, v, d, n)) {
        entries.push_back({disp_index(s.z), collision_rate * s.p});
        disp_index({-s.z[0], -s.z[1], -s.z[2]});
      }
      kernel.push_back(std::move(entries));
    }
    neg_disp.resize(disps.size());
    for (std::size_t i = 0; i < disps.size(); ++i) {
      neg_disp[i] = index.at({-disps[i][0], -disps[i][1], -disps[i][2]});
    }
    const std::size_t nd = disps.size();
    neighbor.assign(geom.num_sites() * nd, -1);
    for (std::size_t x = 0; x < geom.num_sites(); ++x)
      for (std::size_t k = 0; k < nd; ++k) {
        if (auto y = geom.shifted(x, disps[k])) neighbor[x * nd + k] = static_cast<std::int64_t>(*y);
      }

    const std::size_t nb = geom.boundary_size();
    alpha_at.resize(nb * static_cast<std::size_t>(nv));
    beta_at.resize(nb * static_cast<std::size_t>(nv));
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t site = b * static_cast<std::size_t>(n - 1);
      const Eigen::VectorXd ut = geom.transverse_position(site);
      for (int v = 0; v < nv; ++v) {
        alpha_at[b * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v)] = params.alpha.value(v, ut);
        beta_at[b * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v)] = params.beta.value(v, ut);
      }
    }

    for (const auto& tf : options.tracked) {
      if (tf.g.size() != static_cast<Eigen::Index>(geom.num_sites())) {
        throw ShapeMismatch("tracked functional has the wrong number of site values");
      }
      if (tf.component < 0 || tf.component > d) throw InvalidArgument("tracked component out of range");
      std::vector<double> w(static_cast<std::size_t>(nv));
      for (int v = 0; v < nv; ++v) w[static_cast<std::size_t>(v)] = model->extended()(tf.component, v);
      weights.push_back(std::move(w));
    }
    const std::size_t nt = options.tracked.size();
    drift_site.assign(nt, std::vector<double>(geom.num_sites(), 0.0));
    drift_total.assign(nt, 0.0);
    compensator.assign(nt, 0.0);
    for (std::size_t j = 0; j < nt; ++j) initial_pairing.push_back(pairing(j));

    for (std::size_t x = 0; x < geom.num_sites(); ++x) {
      tree.set(x, site_rate(x));
      for (std::size_t j = 0; j < nt; ++j) drift_site[j][x] = site_drift(j, x);
      const int pc = std::popcount(config.site(x));
      if (geom.on_left(x)) left_count += pc;
      if (geom.on_right(x)) right_count += pc;
    }
    resum_drift();
  }

  [[nodiscard]] std::size_t boundary_index(std::size_t x) const { return x / static_cast<std::size_t>(geom.n() - 1); }

  [[nodiscard]] double site_rate(std::size_t x) const {
    const SiteOccupancy occ = config.site(x);
    const std::size_t nd = disps.size();
    double r = 0.0;
    for (SiteOccupancy bits = occ; bits; bits &= bits - 1) {
      const int v = std::countr_zero(bits);
      for (const auto& k : kernel[static_cast<std::size_t>(v)]) {
        const std::int64_t y = neighbor[x * nd + static_cast<std::size_t>(k.disp)];
        if (y >= 0 && !((config.site(static_cast<std::size_t>(y)) >> v) & 1u)) r += k.rate;
      }
    }
    for (const auto& c : model->collisions()) {
      if (c.fires(occ)) r += collision_rate;
    }
    if (geom.on_left(x)) r += flip_total(occ, &alpha_at[boundary_index(x) * static_cast<std::size_t>(nv)]);
    if (geom.on_right(x)) r += flip_total(occ, &beta_at[boundary_index(x) * static_cast<std::size_t>(nv)]);
    return r;
  }

  [[nodiscard]] double flip_total(SiteOccupancy occ, const double* res) const {
    double r = 0.0;
    for (int v = 0; v < nv; ++v) r += ((occ >> v) & 1u) ? 1.0 - res[v] : res[v];
    return flip_rate * r;
  }

  [[nodiscard]] double site_drift(std::size_t j, std::size_t x) const {
    const auto& g = options.tracked[j].g;
    const auto& w = weights[j];
    const SiteOccupancy occ = config.site(x);
    const std::size_t nd = disps.size();
    const double gx = g[static_cast<Eigen::Index>(x)];
    double s = 0.0;
    for (SiteOccupancy bits = occ; bits; bits &= bits - 1) {
      const int v = std::countr_zero(bits);
      const double wv = w[static_cast<std::size_t>(v)];
      if (wv == 0.0) continue;
      for (const auto& k : kernel[static_cast<std::size_t>(v)]) {
        const std::int64_t y = neighbor[x * nd + static_cast<std::size_t>(k.disp)];
        if (y >= 0 && !((config.site(static_cast<std::size_t>(y)) >> v) & 1u)) {
          s += k.rate * wv * (g[y] - gx);
        }
      }
    }
    auto flips = [&](const double* res) {
      double f = 0.0;
      for (int v = 0; v < nv; ++v) {
        const double wv = w[static_cast<std::size_t>(v)];
        f += ((occ >> v) & 1u) ? -wv * (1.0 - res[v]) : wv * res[v];
      }
      return flip_rate * gx * f;
    };
    if (geom.on_left(x)) s += flips(&alpha_at[boundary_index(x) * static_cast<std::size_t>(nv)]);
    if (geom.on_right(x)) s += flips(&beta_at[boundary_index(x) * static_cast<std::size_t>(nv)]);
    return s / n_pow_d;
  }

  [[nodiscard]] double pairing(std::size_t j) const {
    const auto& g = options.tracked[j].g;
    const auto& w = weights[j];
    double s = 0.0;
    for (std::size_t x = 0; x < geom.num_sites(); ++x) {
      double ix = 0.0;
      for (SiteOccupancy bits = config.site(x); bits; bits &= bits - 1) ix += w[static_cast<std::size_t>(std::countr_zero(bits))];
      s += g[static_cast<Eigen::Index>(x)] * ix;
    }
    return s / n_pow_d;
  }

  void resum_drift() {
    for (std::size_t j = 0; j < drift_site.size(); ++j) {
      double s = 0.0;
      for (double v : drift_site[j]) s += v;
      drift_total[j] = s;
    }
  }

  void integrate_to(double to) {
    const double span = to - integrated_to;
    if (span <= 0.0) return;
    for (std::size_t j = 0; j < compensator.size(); ++j) compensator[j] += drift_total[j] * span;
    const double from = std::max(integrated_to, options.average_from);
    if (to > from) {
      stats.left_occupation_integral += static_cast<double>(left_count) * (to - from);
      stats.right_occupation_integral += static_cast<double>(right_count) * (to - from);
      stats.averaged_time += to - from;
    }
    integrated_to = to;
  }

  Snapshot snapshot(double at) const {
    Snapshot s{at, empirical_profile(config), {}};
    for (std::size_t j = 0; j < compensator.size(); ++j) {
      s.martingale.push_back(pairing(j) - initial_pairing[j] - compensator[j]);
    }
    return s;
  }

  double draw_wait() {
    const double total = tree.total();
    if (!(total > 0.0)) return std::numeric_limits<double>::infinity();
    return rng.exponential(total);
  }

  void collect_affected(std::size_t x) {
    const std::size_t nd = disps.size();
    scratch.push_back(x);
    for (std::size_t k = 0; k < nd; ++k) {
      const std::int64_t y = neighbor[x * nd + static_cast<std::size_t>(neg_disp[k])];
      if (y >= 0) scratch.push_back(static_cast<std::size_t>(y));
    }
  }

  void refresh_affected() {
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    for (std::size_t x : scratch) {
      tree.set(x, site_rate(x));
      for (std::size_t j = 0; j < drift_site.size(); ++j) {
        const double nd = site_drift(j, x);
        drift_total[j] += nd - drift_site[j][x];
        drift_site[j][x] = nd;
      }
    }
    scratch.clear();
  }

  void set_site_tracked(std::size_t x, SiteOccupancy occ) {
    const int delta = std::popcount(occ) - std::popcount(config.site(x));
    if (geom.on_left(x)) left_count += delta;
    if (geom.on_right(x)) right_count += delta;
    config.set_site(x, occ);
  }

  // Chooses and applies the event at site x with offset u into its rate.
  Event apply_at(std::size_t x, double u) {
    const SiteOccupancy occ = config.site(x);
    const std::size_t nd = disps.size();
    Event ev;
    ev.site = x;
    Event last;
    auto take = [&](double rate) {
      if (rate <= 0.0) return false;
      if (u < rate) return true;
      u -= rate;
      return false;
    };
    bool chosen = false;
    for (SiteOccupancy bits = occ; bits && !chosen; bits &= bits - 1) {
      const int v = std::countr_zero(bits);
      for (const auto& k : kernel[static_cast<std::size_t>(v)]) {
        const std::int64_t y = neighbor[x * nd + static_cast<std::size_t>(k.disp)];
        if (y < 0 || ((config.site(static_cast<std::size_t>(y)) >> v) & 1u)) continue;
        last = {EventKind::Jump, x, static_cast<std::size_t>(y), v, -1, 0.0};
        if (take(k.rate)) {
          ev = last;
          chosen = true;
          break;
        }
      }
    }
    if (!chosen) {
      const auto& rules = model->collisions();
      for (std::size_t q = 0; q < rules.size(); ++q) {
        if (!rules[q].fires(occ)) continue;
        last = {EventKind::Collision, x, x, -1, static_cast<int>(q), 0.0};
        if (take(collision_rate)) {
          ev = last;
          chosen = true;
          break;
        }
      }
    }
    auto flips = [&](const double* res, std::size_t tag) {
      for (int v = 0; v < nv && !chosen; ++v) {
        const double r = flip_rate * (((occ >> v) & 1u) ? 1.0 - res[v] : res[v]);
        if (r <= 0.0) continue;
        last = {EventKind::Flip, x, tag, v, -1, 0.0};
        if (take(r)) {
          ev = last;
          chosen = true;
        }
      }
    };
    // Flip targets are tagged 0 for the left reservoir and 1 for the right.
    if (!chosen && geom.on_left(x)) flips(&alpha_at[boundary_index(x) * static_cast<std::size_t>(nv)], 0);
    if (!chosen && geom.on_right(x)) flips(&beta_at[boundary_index(x) * static_cast<std::size_t>(nv)], 1);
    if (!chosen) ev = last;  // round-off at the top end of the site's rate

    switch (ev.kind) {
      case EventKind::Jump: {
        const SiteOccupancy bit = SiteOccupancy{1} << ev.velocity;
        set_site_tracked(x, occ ^ bit);
        set_site_tracked(ev.target, config.site(ev.target) ^ bit);
        ++stats.jumps;
        collect_affected(x);
        collect_affected(ev.target);
        break;
      }
      case EventKind::Collision:
        set_site_tracked(x, model->collisions()[static_cast<std::size_t>(ev.collision)].apply(occ));
        ++stats.collisions;
        collect_affected(x);
        break;
      case EventKind::Flip: {
        const bool entering = !((occ >> ev.velocity) & 1u);
        set_site_tracked(x, occ ^ (SiteOccupancy{1} << ev.velocity));
        if (ev.target == 0) {
          ++(entering ? stats.flips_left_in : stats.flips_left_out);
        } else {
          ++(entering ? stats.flips_right_in : stats.flips_right_out);
        }
        ev.target = x;
        collect_affected(x);
        break;
      }
      case EventKind::Absorbed:
        break;
    }
    refresh_affected();
    ++stats.events;
    if (!drift_total.empty() && stats.events % kResumInterval == 0) resum_drift();
    if (options.verify_interval > 0 && stats.events % options.verify_interval == 0) {
      const double dev = verify();
      if (dev > 1e-9) throw Error("rate table drifted from a rebuild by " + std::to_string(dev));
    }
    return ev;
  }

  Event fire(double dt) {
    if (!std::isfinite(dt)) return Event{};
    integrate_to(t + dt);
    t += dt;
    double u = rng.uniform() * tree.total();
    const std::size_t x = tree.find(u);
    Event ev = apply_at(x, u);
    ev.dt = dt;
    return ev;
  }

  [[nodiscard]] double verify() const {
    double worst = 0.0;
    double sum = 0.0;
    for (std::size_t x = 0; x < geom.num_sites(); ++x) {
      const double fresh = site_rate(x);
      sum += fresh;
      worst = std::max(worst, std::abs(fresh - tree.leaf(x)) / std::max(1.0, std::abs(fresh)));
    }
    worst = std::max(worst, std::abs(sum - tree.total()) / std::max(1.0, sum));
    return worst;
  }
};

Simulator::Simulator(Configuration initial, SimParams params, RandomStream rng, SimOptions options)
    : impl_(std::make_unique<Impl>(std::move(initial), std::move(params), rng, std::move(options))) {}
Simulator::~Simulator() = default;
Simulator::Simulator(Simulator&&) noexcept = default;
Simulator& Simulator::operator=(Simulator&&) noexcept = default;

Event Simulator::step() { return impl_->fire(impl_->draw_wait()); }

std::vector<Snapshot> Simulator::run() {
  Impl& s = *impl_;
  std::vector<Snapshot> out;
  std::size_t next = 0;
  const auto& times = s.params.snapshots;
  while (next < times.size() && times[next] <= s.t) out.push_back(s.snapshot(times[next++]));
  for (;;) {
    const double dt = s.draw_wait();
    const double t_next = s.t + dt;
    while (next < times.size() && times[next] < t_next) {
      s.integrate_to(times[next]);
      out.push_back(s.snapshot(times[next++]));
    }
    if (!(t_next <= s.params.T)) {
      s.integrate_to(s.params.T);
      s.t = s.params.T;
      break;
    }
    s.fire(dt);
  }
  return out;
}

const Configuration& Simulator::config() const { return impl_->config; }
double Simulator::time() const { return impl_->t; }
double Simulator::total_rate() const { return impl_->tree.total(); }
const SimStats& Simulator::stats() const { return impl_->stats; }
double Simulator::site_rate_from_scratch(std::size_t site) const { return impl_->site_rate(site); }
double Simulator::verify_rates() const { return impl_->verify(); }

double Simulator::functional_drift(std::size_t index) const {
  double s = 0.0;
  for (std::size_t x = 0; x < impl_->geom.num_sites(); ++x) s += impl_->site_drift(index, x);
  return s;
}

SimulationResult simulate(const Configuration& initial, const SimParams& params, std::uint64_t replica,
                          const SimOptions& options) {
  RandomStream rng(params.seed,
                   stream_id(StreamPurpose::Dynamics, static_cast<std::uint64_t>(initial.geom().n()), replica));
  Simulator sim(initial, params, rng, options);
  auto snaps = sim.run();
  return {std::move(snaps), sim.stats(), sim.config()};
}

SampleStatistic summarize(const std::vector<double>& xs) {
  if (xs.empty()) throw InvalidArgument("empty sample");
  SampleStatistic s;
  s.count = xs.size();
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double var = 0.0;
    for (double x : xs) var += (x - s.mean) * (x - s.mean);
    var /= static_cast<double>(xs.size() - 1);
    s.std_error = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return s;
}

DynkinResult dynkin_martingale_check(const LatticeGeom& geom, std::shared_ptr<const VelocityModel> model,
                                     const SimParams& params, const HydroProfile& initial,
                                     const std::vector<std::function<double(const Eigen::VectorXd&)>>& tests,
                                     const std::vector<int>& components, std::size_t replicas, int threads) {
  if (replicas == 0) throw InvalidArgument("Dynkin check needs at least one replica");
  SimOptions options;
  for (const auto& g : tests) {
    const Eigen::VectorXd samples = sample_on_sites(geom, g);
    for (int k : components) options.tracked.push_back({samples, k});
  }
  std::vector<std::vector<Snapshot>> runs(replicas);
  parallel_for(replicas, threads, [&](std::size_t r) {
    const auto init = sample_local_equilibrium(geom, model, initial, params.seed, r);
    runs[r] = simulate(init, params, r, options).snapshots;
  });
  DynkinResult result;
  result.times = params.snapshots;
  result.stats.resize(options.tracked.size());
  for (std::size_t j = 0; j < options.tracked.size(); ++j)
    for (std::size_t s = 0; s < params.snapshots.size(); ++s) {
      std::vector<double> xs;
      xs.reserve(replicas);
      for (const auto& run : runs) xs.push_back(run[s].martingale[j]);
      result.stats[j].push_back(summarize(xs));
    }
  return result;
}

// ---------------------------------------------------------------------------

TinyLattice::TinyLattice(int dim, int n, bool torus) : dim_(dim), n_(n), torus_(torus) {
  if (dim < 1 || dim > 3) throw InvalidArgument("lattice dimension must be 1, 2 or 3");
  if (n < 2) throw InvalidArgument("N must be >= 2");
  sites_ = static_cast<std::size_t>(torus ? n : n - 1);
  for (int i = 1; i < dim; ++i) sites_ *= static_cast<std::size_t>(n);
}

TinyLattice TinyLattice::slab(int dim, int n) { return {dim, n, false}; }
TinyLattice TinyLattice::torus(int dim, int n) { return {dim, n, true}; }

std::optional<std::size_t> TinyLattice::shifted(std::size_t site, const LatticeVector& z) const {
  if (!torus_) return LatticeGeom(dim_, n_).shifted(site, z);
  std::size_t out = 0;
  std::size_t stride = 1;
  for (int i = 0; i < dim_; ++i) {
    const int c = static_cast<int>(site % static_cast<std::size_t>(n_));
    site /= static_cast<std::size_t>(n_);
    const int shifted = ((c + z[static_cast<std::size_t>(i)]) % n_ + n_) % n_;
    out += static_cast<std::size_t>(shifted) * stride;
    stride *= static_cast<std::size_t>(n_);
  }
  return out;
}

Eigen::VectorXd TinyLattice::position(std::size_t site) const {
  if (!torus_) return LatticeGeom(dim_, n_).position(site);
  Eigen::VectorXd u(dim_);
  for (int i = 0; i < dim_; ++i) {
    u[i] = static_cast<double>(site % static_cast<std::size_t>(n_)) / n_;
    site /= static_cast<std::size_t>(n_);
  }
  return u;
}

bool TinyLattice::on_left(std::size_t site) const { return !torus_ && LatticeGeom(dim_, n_).on_left(site); }
bool TinyLattice::on_right(std::size_t site) const { return !torus_ && LatticeGeom(dim_, n_).on_right(site); }

std::size_t tiny_state_count(const TinyLattice& lattice, const VelocityModel& model) {
  if (lattice.dim() != model.dim()) throw ShapeMismatch("model and lattice dimensions differ");
  const std::size_t bits = lattice.num_sites() * static_cast<std::size_t>(model.size());
  if (bits > kMaxGeneratorBits) {
    throw StateSpaceTooLarge("state space 2^" + std::to_string(bits) + " exceeds 2^" +
                             std::to_string(kMaxGeneratorBits));
  }
  return std::size_t{1} << bits;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> build_generator_matrix(const TinyLattice& lattice,
                                                                    const VelocityModel& model,
                                                                    const SimParams& params, unsigned parts,
                                                                    GeneratorMutation mutation) {
  const std::size_t states = tiny_state_count(lattice, model);
  const std::size_t sites = lattice.num_sites();
  const int nv = model.size();
  const int n = lattice.n();
  const double n2 = static_cast<double>(n) * n;
  const double flip_rate = std::pow(static_cast<double>(n), 2.0 - params.theta);

  if (parts & kExclusion) params.jump.validate(model);
  std::vector<std::vector<JumpStep>> kernel;
  std::vector<std::vector<std::optional<std::size_t>>> targets(sites);
  if (parts & kExclusion) {
    for (int v = 0; v < nv; ++v) kernel.push_back(kernel_for_velocity(params.jump, v, lattice.dim(), n));
  }
  for (std::size_t x = 0; x < sites && !kernel.empty(); ++x)
    for (int v = 0; v < nv; ++v)
      for (const auto& s : kernel[static_cast<std::size_t>(v)]) targets[x].push_back(lattice.shifted(x, s.z));

  std::vector<Eigen::VectorXd> alpha(sites);
  std::vector<Eigen::VectorXd> beta(sites);
  const bool boundary = (parts & kBoundary) && !lattice.is_torus();
  if (boundary) {
    for (std::size_t x = 0; x < sites; ++x) {
      const Eigen::VectorXd ut = lattice.position(x).tail(lattice.dim() - 1);
      alpha[x].resize(nv);
      beta[x].resize(nv);
      for (int v = 0; v < nv; ++v) {
        alpha[x][v] = params.alpha.value(v, ut);
        beta[x][v] = params.beta.value(v, ut);
      }
    }
  }

  auto bit = [nv](std::size_t x, int v) { return std::size_t{1} << (x * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v)); };
  auto site_occ = [nv](std::size_t s, std::size_t x) {
    const std::size_t mask = (std::size_t{1} << nv) - 1;
    return static_cast<SiteOccupancy>((s >> (x * static_cast<std::size_t>(nv))) & mask);
  };

  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t s = 0; s < states; ++s) {
    double out = 0.0;
    auto add = [&](std::size_t to, double rate) {
      if (rate <= 0.0) return;
      trip.emplace_back(static_cast<int>(s), static_cast<int>(to), rate);
      out += rate;
    };
    for (std::size_t x = 0; x < sites; ++x) {
      const SiteOccupancy occ = site_occ(s, x);
      if (parts & kExclusion) {
        std::size_t t_index = 0;
        for (int v = 0; v < nv; ++v) {
          for (const auto& step : kernel[static_cast<std::size_t>(v)]) {
            const auto& y = targets[x][t_index++];
            if (!((occ >> v) & 1u) || !y || (s & bit(*y, v))) continue;
            double rate = n2 * step.p;
            if (mutation == GeneratorMutation::CorruptSiteZero && x == 0) rate *= 1.5;
            add(s ^ bit(x, v) ^ bit(*y, v), rate);
          }
        }
      }
      if (parts & kCollision) {
        for (const auto& c : model.collisions()) {
          if (!c.fires(occ)) continue;
          add(s ^ bit(x, c.v) ^ bit(x, c.w) ^ bit(x, c.vp) ^ bit(x, c.wp), n2);
        }
      }
      if (boundary) {
        for (int v = 0; v < nv; ++v) {
          const bool filled = (occ >> v) & 1u;
          double rate = 0.0;
          if (lattice.on_left(x)) rate += filled ? 1.0 - alpha[x][v] : alpha[x][v];
          if (lattice.on_right(x)) rate += filled ? 1.0 - beta[x][v] : beta[x][v];
          add(s ^ bit(x, v), flip_rate * rate);
        }
      }
    }
    trip.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> L(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Eigen::MatrixXd dense_generator(const Eigen::SparseMatrix<double, Eigen::RowMajor>& L) {
  if (static_cast<std::size_t>(L.rows()) > kMaxDenseStates) {
    throw StateSpaceTooLarge("dense generator limited to " + std::to_string(kMaxDenseStates) + " states");
  }
  return Eigen::MatrixXd(L);
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw ShapeMismatch("expm needs a square matrix");
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Eigen::MatrixXd b = a / std::ldexp(1.0, squarings);
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = result;
  for (int k = 1; k < 40; ++k) {
    term = term * b / k;
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-17 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

Eigen::VectorXd product_measure(const TinyLattice& lattice, const VelocityModel& model,
                                const std::vector<Eigen::VectorXd>& site_lambdas) {
  const std::size_t states = tiny_state_count(lattice, model);
  const std::size_t sites = lattice.num_sites();
  if (site_lambdas.size() != sites) throw ShapeMismatch("one chemical potential per site required");
  const int nv = model.size();
  std::vector<Eigen::VectorXd> th;
  for (const auto& l : site_lambdas) th.push_back(theta_all(l, model));
  Eigen::VectorXd nu(static_cast<Eigen::Index>(states));
  for (std::size_t s = 0; s < states; ++s) {
    double p = 1.0;
    for (std::size_t x = 0; x < sites; ++x)
      for (int v = 0; v < nv; ++v) {
        const bool on = (s >> (x * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v))) & 1u;
        p *= on ? th[x][v] : 1.0 - th[x][v];
      }
    nu[static_cast<Eigen::Index>(s)] = p;
  }
  return nu;
}

Eigen::VectorXd linear_observable(const TinyLattice& lattice, const VelocityModel& model, const Eigen::VectorXd& g,
                                  int component) {
  const std::size_t states = tiny_state_count(lattice, model);
  const std::size_t sites = lattice.num_sites();
  const int nv = model.size();
  const double scale = std::pow(static_cast<double>(lattice.n()), lattice.dim());
  Eigen::VectorXd f(static_cast<Eigen::Index>(states));
  for (std::size_t s = 0; s < states; ++s) {
    double acc = 0.0;
    for (std::size_t x = 0; x < sites; ++x)
      for (int v = 0; v < nv; ++v) {
        if ((s >> (x * static_cast<std::size_t>(nv) + static_cast<std::size_t>(v))) & 1u) {
          acc += g[static_cast<Eigen::Index>(x)] * model.extended()(component, v);
        }
      }
    f[static_cast<Eigen::Index>(s)] = acc / scale;
  }
  return f;
}

double collision_form_direct(const TinyLattice& lattice, const VelocityModel& model, const Eigen::VectorXd& nu,
                             const Eigen::VectorXd& f) {
  const auto L = build_generator_matrix(lattice, model, SimParams{}, kCollision);
  const double n2 = static_cast<double>(lattice.n()) * lattice.n();
  const Eigen::VectorXd sf = f.cwiseSqrt();
  const Eigen::VectorXd lsf = (L * sf) / n2;
  return nu.cwiseProduct(sf).dot(lsf);
}

double collision_form_dirichlet(const TinyLattice& lattice, const VelocityModel& model, const Eigen::VectorXd& nu,
                                const Eigen::VectorXd& f) {
  const std::size_t states = tiny_state_count(lattice, model);
  const std::size_t sites = lattice.num_sites();
  const auto nv = static_cast<std::size_t>(model.size());
  const SiteOccupancy mask = model.full_site();
  double dc = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    const double root = std::sqrt(f[static_cast<Eigen::Index>(s)]);
    for (std::size_t x = 0; x < sites; ++x) {
      const SiteOccupancy occ = (s >> (x * nv)) & mask;
      for (const auto& c : model.collisions()) {
        if (!c.fires(occ)) continue;
        const std::size_t after = (s & ~(static_cast<std::size_t>(mask) << (x * nv))) |
                                  (static_cast<std::size_t>(c.apply(occ)) << (x * nv));
        const double diff = std::sqrt(f[static_cast<Eigen::Index>(after)]) - root;
        dc += nu[static_cast<Eigen::Index>(s)] * diff * diff;
      }
    }
  }
  return -0.5 * dc;
}

}  // namespace velgas
