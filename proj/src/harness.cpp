#include "velgas/harness.hpp"

#include "velgas/errors.hpp"
#include "velgas/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace velgas {

using nlohmann::json;

std::shared_ptr<const VelocityModel> make_model(const std::string& spec, int dim) {
  if (spec == "model1") return std::make_shared<const VelocityModel>(build_model_one(dim));
  if (spec == "model2a" || spec == "model2b") {
    if (dim != 3) throw InvalidModel(spec + " is three-dimensional");
    return std::make_shared<const VelocityModel>(
        build_model_two(spec == "model2a" ? ModelTwoVariant::A : ModelTwoVariant::B));
  }
  if (spec.rfind("file:", 0) == 0) {
    auto m = std::make_shared<const VelocityModel>(load_velocity_file(spec.substr(5)));
    if (m->dim() != dim) throw InvalidModel("velocity file has dimension " + std::to_string(m->dim()));
    return m;
  }
  throw InvalidModel("unknown model '" + spec + "'");
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("not a number: '" + item + "'");
    }
  }
  return out;
}

ReservoirProfiles parse_reservoirs(const std::string& spec, int velocities) {
  ReservoirProfiles r;
  if (!spec.empty() && spec[0] == '@') {
    std::ifstream is(spec.substr(1));
    if (!is) throw InvalidArgument("cannot read " + spec.substr(1));
    std::stringstream buf;
    buf << is.rdbuf();
    r = ReservoirProfiles::from_json(buf.str());
  } else {
    r = ReservoirProfiles::constant(parse_list(spec));
  }
  if (static_cast<int>(r.per_velocity.size()) != velocities) {
    throw InvalidArgument("expected " + std::to_string(velocities) + " reservoir values, got " +
                          std::to_string(r.per_velocity.size()));
  }
  return r;
}

DensityProfile parse_initial(const std::string& spec, const VelocityModel& model, const ReservoirProfiles& alpha,
                             const ReservoirProfiles& beta) {
  const int nv = model.size();
  DensityProfile prof;
  if (spec == "equilibrium") {
    prof = [nv](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(nv, 0.5); };
  } else if (spec.rfind("theta:", 0) == 0) {
    const auto vals = parse_list(spec.substr(6));
    if (static_cast<int>(vals.size()) != nv) {
      throw InvalidArgument("theta: needs " + std::to_string(nv) + " values");
    }
    const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(vals.data(), nv);
    prof = [c](const Eigen::VectorXd&) { return c; };
  } else if (spec == "interp" || spec.rfind("interp-bump:", 0) == 0) {
    const double amp = spec == "interp" ? 0.0 : parse_list(spec.substr(12)).at(0);
    prof = [nv, alpha, beta, amp](const Eigen::VectorXd& u) {
      const Eigen::VectorXd ut = u.tail(u.size() - 1);
      Eigen::VectorXd th(nv);
      for (int v = 0; v < nv; ++v) {
        const double a = alpha.value(v, ut);
        const double b = beta.value(v, ut);
        th[v] = a + (b - a) * u[0] + amp * std::sin(std::numbers::pi * u[0]);
      }
      return th;
    };
  } else {
    throw InvalidArgument("unknown initial profile '" + spec + "'");
  }
  // Values must stay inside (0,1); probe a grid.
  const int d = model.dim();
  for (int i = 0; i <= 100; ++i) {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(d, 0.37);
    u[0] = i / 100.0;
    const Eigen::VectorXd th = prof(u);
    if ((th.array() <= 0.0).any() || (th.array() >= 1.0).any()) {
      throw ProfileOutOfRange("initial profile '" + spec + "' leaves (0,1) at u_1 = " + std::to_string(u[0]));
    }
  }
  return prof;
}

// ---------------------------------------------------------------------------

Regime Experiment::validated_regime() const {
  const Regime r = regime_for_theta(theta);
  if (regime && *regime != r) {
    throw RegimeMismatch("theta = " + std::to_string(theta) + " selects the " + to_string(r) + " regime, not " +
                         to_string(*regime));
  }
  return r;
}

Experiment Experiment::from_json(const std::string& text) {
  Experiment e;
  try {
    const json j = json::parse(text);
    e.model = j.value("model", e.model);
    e.dim = j.value("dim", e.dim);
    e.theta = j.value("theta", e.theta);
    if (j.contains("regime")) e.regime = parse_regime(j.at("regime").get<std::string>());
    e.sizes = j.value("sizes", e.sizes);
    e.replicas = j.value("replicas", e.replicas);
    e.init = j.value("init", e.init);
    if (j.contains("alpha")) e.alpha = ReservoirProfiles::from_json(j.at("alpha").dump());
    if (j.contains("beta")) e.beta = ReservoirProfiles::from_json(j.at("beta").dump());
    e.epsilon = j.value("epsilon", e.epsilon);
    e.smooth_reference = j.value("smooth_reference", e.smooth_reference);
    e.times = j.value("times", e.times);
    e.seed = j.value("seed", e.seed);
    e.pde_m = j.value("pde_m", e.pde_m);
    e.robin_coefficient = j.value("robin_coefficient", e.robin_coefficient);
    e.threads = j.value("threads", e.threads);
    if (j.contains("out")) e.out = j.at("out").get<std::string>();
  } catch (const json::exception& ex) {
    throw InvalidArgument(std::string("malformed experiment: ") + ex.what());
  }
  return e;
}

std::string Experiment::to_json() const {
  json j;
  j["model"] = model;
  j["dim"] = dim;
  j["theta"] = theta;
  if (regime) j["regime"] = to_string(*regime);
  j["sizes"] = sizes;
  j["replicas"] = replicas;
  j["init"] = init;
  j["alpha"] = json::parse(alpha.to_json());
  j["beta"] = json::parse(beta.to_json());
  j["epsilon"] = epsilon;
  j["smooth_reference"] = smooth_reference;
  j["times"] = times;
  j["seed"] = seed;
  j["pde_m"] = pde_m;
  j["robin_coefficient"] = robin_coefficient;
  j["threads"] = threads;
  if (!out.empty()) j["out"] = out.string();
  return j.dump(2);
}

std::vector<ComparisonRow> ComparisonReport::at_time(double t) const {
  std::vector<ComparisonRow> out;
  for (int n : experiment.sizes)
    for (const auto& r : rows) {
      if (r.n == n && r.t == t) out.push_back(r);
    }
  return out;
}

Eigen::VectorXd ComparisonReport::slope(double t) const {
  const auto rs = at_time(t);
  if (rs.size() < 2) return Eigen::VectorXd();
  Eigen::VectorXd out(rs.front().l1.size());
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : rs) {
      const double x = std::log(r.n);
      const double y = std::log(r.l1[k]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double n = static_cast<double>(rs.size());
    out[k] = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return out;
}

bool ComparisonReport::strictly_decreasing(double t, int component) const {
  const auto rs = at_time(t);
  for (std::size_t i = 1; i < rs.size(); ++i) {
    if (!(rs[i].l1[component] < rs[i - 1].l1[component])) return false;
  }
  return true;
}

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json stat_json(const SampleStatistic& s) {
  return {{"mean", s.mean}, {"std_error", s.std_error}, {"count", s.count}};
}

// Linear interpolation of site values (positions x/N, x = 1..N-1) at u,
// constant beyond the first and last sites.
Eigen::VectorXd interpolate_sites(const Eigen::MatrixXd& values, int n, double u) {
  const double pos = u * n - 1.0;
  if (pos <= 0.0) return values.row(0).transpose();
  if (pos >= n - 2) return values.row(n - 2).transpose();
  const auto i = static_cast<Eigen::Index>(std::floor(pos));
  const double w = pos - static_cast<double>(i);
  return ((1 - w) * values.row(i) + w * values.row(i + 1)).transpose();
}

Eigen::VectorXd interpolate_field(const Field& f, double u) {
  const double pos = u * f.m;
  const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), f.m - 1);
  const double w = pos - static_cast<double>(i);
  return ((1 - w) * f.values.row(i) + w * f.values.row(i + 1)).transpose();
}

struct BasketEntry {
  std::string name;
  std::function<double(double)> g;
};

std::vector<BasketEntry> comparison_basket() {
  using std::numbers::pi;
  return {{"one", [](double) { return 1.0; }},
          {"u", [](double u) { return u; }},
          {"sin_pi_u", [](double u) { return std::sin(pi * u); }},
          {"cos_pi_u", [](double u) { return std::cos(pi * u); }}};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  os << s;
}

std::string time_tag(double t) {
  std::ostringstream os;
  os << std::setprecision(6) << t;
  return os.str();
}

}  // namespace

std::string ComparisonReport::to_json() const {
  json j;
  j["experiment"] = json::parse(experiment.to_json());
  j["regime"] = to_string(regime);
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"N", r.n}, {"t", r.t}, {"epsilon", r.epsilon}, {"L1", vec(r.l1)}, {"L2", vec(r.l2)},
                  {"noise", vec(r.noise)}});
  }
  j["rows"] = rs;
  json ts = json::array();
  for (const auto& r : tests) {
    ts.push_back({{"N", r.n}, {"t", r.t}, {"G", r.name}, {"error", vec(r.error)}, {"std_error", vec(r.std_error)}});
  }
  j["test_functions"] = ts;
  json sl = json::object();
  for (double t : experiment.times) {
    const Eigen::VectorXd s = slope(t);
    if (s.size() > 0) sl[time_tag(t)] = vec(s);
  }
  j["slopes"] = sl;
  return j.dump(2);
}

ComparisonReport run_convergence(const Experiment& exp) {
  ComparisonReport report;
  report.experiment = exp;
  report.regime = exp.validated_regime();
  if (exp.dim != 1) throw InvalidArgument("hydrodynamic comparisons are one-dimensional");
  if (exp.sizes.empty() || exp.times.empty()) throw InvalidArgument("need at least one N and one time");
  if (exp.replicas == 0) throw InvalidArgument("need at least one replica");
  std::vector<double> times = exp.times;
  if (!std::is_sorted(times.begin(), times.end())) throw InvalidArgument("comparison times must be sorted");

  const auto model = make_model(exp.model, exp.dim);
  exp.alpha.validate(*model);
  exp.beta.validate(*model);
  const DensityProfile density = parse_initial(exp.init, *model, exp.alpha, exp.beta);
  const HydroProfile profile = profile_from_densities(*model, density);

  PdeOptions popt;
  popt.robin_coefficient = exp.robin_coefficient;
  const HydroSystem sys(model, popt);
  const Eigen::VectorXd empty(0);
  const HydroVector d0 = boundary_data(exp.alpha, *model)(empty);
  const HydroVector d1 = boundary_data(exp.beta, *model)(empty);
  const Field f0 = sys.make_field(
      exp.pde_m, [&](double u) { return profile(Eigen::VectorXd::Constant(1, u)); }, report.regime, d0, d1);
  const auto pde = sys.solve(f0, times.back(), 0.0, times);

  if (!exp.out.empty()) {
    std::filesystem::create_directories(exp.out);
    write_text(exp.out / "experiment.json", exp.to_json());
  }

  const auto basket = comparison_basket();
  for (int n : exp.sizes) {
    const LatticeGeom geom(1, n);
    const double eps = exp.epsilon > 0.0 ? exp.epsilon : 5.0 / n;
    SimParams params;
    params.theta = exp.theta;
    params.T = times.back();
    params.alpha = exp.alpha;
    params.beta = exp.beta;
    params.jump = default_jump_law(*model);
    params.seed = exp.seed;
    params.snapshots = times;

    std::vector<Eigen::VectorXd> gsites;
    for (const auto& b : basket) {
      gsites.push_back(sample_on_sites(geom, [&](const Eigen::VectorXd& u) { return b.g(u[0]); }));
    }

    // smoothed[r][s]: smoothed profile; pairs[r][s][g]: <pi^N, G>.
    std::vector<std::vector<Eigen::MatrixXd>> smoothed(exp.replicas);
    std::vector<std::vector<std::vector<Eigen::VectorXd>>> pairs(exp.replicas);
    parallel_for(exp.replicas, exp.threads, [&](std::size_t r) {
      const auto init = sample_local_equilibrium(geom, model, profile, exp.seed, r);
      const auto res = simulate(init, params, r);
      for (const auto& snap : res.snapshots) {
        smoothed[r].push_back(smooth_profile(snap.profile, eps).values);
        std::vector<Eigen::VectorXd> ps;
        for (const auto& g : gsites) ps.push_back(pair_with_test_function(snap.profile, g));
        pairs[r].push_back(std::move(ps));
      }
    });

    for (std::size_t s = 0; s < times.size(); ++s) {
      const Field& ref = pde[s].second;
      const auto rows = static_cast<Eigen::Index>(geom.num_sites());
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(rows, 2);
      Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(rows, 2);
      for (std::size_t r = 0; r < exp.replicas; ++r) mean += smoothed[r][s];
      mean /= static_cast<double>(exp.replicas);
      for (std::size_t r = 0; r < exp.replicas; ++r) sq += (smoothed[r][s] - mean).cwiseAbs2();
      const double reps = static_cast<double>(exp.replicas);
      const Eigen::MatrixXd se = reps > 1 ? Eigen::MatrixXd((sq / (reps - 1) / reps).cwiseSqrt())
                                          : Eigen::MatrixXd::Zero(rows, 2);

      // Reference on the sites, smoothed with the same kernel when requested.
      EmpiricalProfile refsites{geom, Eigen::MatrixXd(rows, 2)};
      for (Eigen::Index x = 0; x < rows; ++x) {
        refsites.values.row(x) = interpolate_field(ref, geom.position(static_cast<std::size_t>(x))[0]).transpose();
      }
      if (exp.smooth_reference) refsites = smooth_profile(refsites, eps);

      ComparisonRow row;
      row.n = n;
      row.t = times[s];
      row.epsilon = eps;
      row.l1 = Eigen::VectorXd::Zero(2);
      row.l2 = Eigen::VectorXd::Zero(2);
      row.noise = Eigen::VectorXd::Zero(2);
      std::ofstream csv;
      if (!exp.out.empty()) {
        csv.open(exp.out / ("profile_N" + std::to_string(n) + "_t" + time_tag(times[s]) + ".csv"));
        csv << "u,emp_I0,emp_I1,stderr_I0,stderr_I1,pde_I0,pde_I1,ref_I0,ref_I1\n" << std::setprecision(12);
      }
      const double h = ref.h();
      for (int i = 0; i <= ref.m; ++i) {
        const double u = ref.node(i);
        const double w = (i == 0 || i == ref.m) ? 0.5 * h : h;
        const Eigen::VectorXd e = interpolate_sites(mean, n, u);
        const Eigen::VectorXd p = exp.smooth_reference ? interpolate_sites(refsites.values, n, u)
                                                       : Eigen::VectorXd(ref.values.row(i).transpose());
        const Eigen::VectorXd diff = e - p;
        row.l1 += w * diff.cwiseAbs();
        row.l2 += w * diff.cwiseAbs2();
        row.noise += w * interpolate_sites(se, n, u);
        if (csv.is_open()) {
          csv << u << ',' << e[0] << ',' << e[1] << ',' << interpolate_sites(se, n, u)[0] << ','
              << interpolate_sites(se, n, u)[1] << ',' << ref.values(i, 0) << ',' << ref.values(i, 1) << ',' << p[0]
              << ',' << p[1] << '\n';
        }
      }
      row.l2 = row.l2.cwiseSqrt();
      report.rows.push_back(row);

      for (std::size_t g = 0; g < basket.size(); ++g) {
        Eigen::VectorXd exact = Eigen::VectorXd::Zero(2);
        for (int i = 0; i <= ref.m; ++i) {
          const double w = (i == 0 || i == ref.m) ? 0.5 * h : h;
          exact += w * basket[g].g(ref.node(i)) * ref.values.row(i).transpose();
        }
        TestFunctionRow tr;
        tr.n = n;
        tr.t = times[s];
        tr.name = basket[g].name;
        tr.error = Eigen::VectorXd::Zero(2);
        tr.std_error = Eigen::VectorXd::Zero(2);
        for (int k = 0; k < 2; ++k) {
          std::vector<double> xs;
          for (std::size_t r = 0; r < exp.replicas; ++r) xs.push_back(pairs[r][s][g][k]);
          const auto st = summarize(xs);
          tr.error[k] = std::abs(st.mean - exact[k]);
          tr.std_error[k] = st.std_error;
        }
        report.tests.push_back(tr);
      }
    }
  }
  if (!exp.out.empty()) write_text(exp.out / "report.json", report.to_json());
  return report;
}

// ---------------------------------------------------------------------------

std::uint64_t poisson_upper(double mean, double level) {
  if (!(mean >= 0.0)) throw InvalidArgument("Poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  double logp = -mean;
  double cdf = std::exp(logp);
  std::uint64_t k = 0;
  const auto limit = static_cast<std::uint64_t>(mean + 40.0 * std::sqrt(mean) + 100.0);
  while (cdf < level && k < limit) {
    ++k;
    logp += std::log(mean) - std::log(static_cast<double>(k));
    cdf += std::exp(logp);
  }
  return k;
}

bool ScanReport::dirichlet_value_ok() const {
  bool any = false;
  for (const auto& r : rows) {
    if (r.theta != 0.0) continue;
    any = true;
    if (std::abs(r.left_occupation.mean - r.alpha_total) > 3.0 * r.left_occupation.std_error) return false;
    if (std::abs(r.right_occupation.mean - r.beta_total) > 3.0 * r.right_occupation.std_error) return false;
  }
  return any;
}

bool ScanReport::rate_bound_ok() const {
  bool any = false;
  for (const auto& r : rows) {
    if (r.theta <= 2.0) continue;
    any = true;
    const double total = r.boundary_events.mean * static_cast<double>(r.boundary_events.count);
    const double bound = r.event_bound * static_cast<double>(r.boundary_events.count);
    if (total > static_cast<double>(poisson_upper(bound, 0.999))) return false;
  }
  return any;
}

bool ScanReport::current_monotone() const {
  std::vector<ScanRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), [](const ScanRow& a, const ScanRow& b) { return a.theta < b.theta; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    for (auto get : {&ScanRow::left_current, &ScanRow::right_current}) {
      const auto& a = sorted[i - 1].*get;
      const auto& b = sorted[i].*get;
      if (std::abs(b.mean) > std::abs(a.mean) + 3.0 * std::hypot(a.std_error, b.std_error)) return false;
    }
  }
  return true;
}

std::string ScanReport::to_json() const {
  json j;
  j["N"] = config.n;
  j["T"] = config.T;
  j["average_from"] = config.average_from;
  j["replicas"] = config.replicas;
  j["seed"] = config.seed;
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"theta", r.theta},
                  {"regime", to_string(r.regime)},
                  {"left_occupation", stat_json(r.left_occupation)},
                  {"right_occupation", stat_json(r.right_occupation)},
                  {"alpha_total", r.alpha_total},
                  {"beta_total", r.beta_total},
                  {"left_current", stat_json(r.left_current)},
                  {"right_current", stat_json(r.right_current)},
                  {"boundary_events", stat_json(r.boundary_events)},
                  {"event_bound", r.event_bound}});
  }
  j["rows"] = rs;
  j["dirichlet_value_ok"] = dirichlet_value_ok();
  j["rate_bound_ok"] = rate_bound_ok();
  j["current_monotone"] = current_monotone();
  return j.dump(2);
}

ScanReport regime_scan(const ScanConfig& cfg) {
  if (cfg.replicas < 2) throw InvalidArgument("the scan needs at least two replicas");
  if (!(cfg.average_from >= 0.0 && cfg.average_from < cfg.T)) {
    throw InvalidArgument("averaging must start inside [0, T)");
  }
  ScanReport report;
  report.config = cfg;
  const auto model = make_model(cfg.model, cfg.dim);
  cfg.alpha.validate(*model);
  cfg.beta.validate(*model);
  const HydroProfile profile =
      profile_from_densities(*model, parse_initial(cfg.init, *model, cfg.alpha, cfg.beta));
  const LatticeGeom geom(cfg.dim, cfg.n);
  const double nd = std::pow(static_cast<double>(cfg.n), cfg.dim);
  const double bsites = static_cast<double>(geom.boundary_size());

  for (double theta : cfg.thetas) {
    SimParams params;
    params.theta = theta;
    params.T = cfg.T;
    params.alpha = cfg.alpha;
    params.beta = cfg.beta;
    params.jump = default_jump_law(*model);
    params.seed = cfg.seed;
    SimOptions opts;
    opts.average_from = cfg.average_from;

    std::vector<SimStats> stats(cfg.replicas);
    parallel_for(cfg.replicas, cfg.threads, [&](std::size_t r) {
      const auto init = sample_local_equilibrium(geom, model, profile, cfg.seed, r);
      stats[r] = simulate(init, params, r, opts).stats;
    });

    std::vector<double> lo, ro, lc, rc, ev;
    for (const auto& s : stats) {
      lo.push_back(s.left_occupation_integral / s.averaged_time / bsites);
      ro.push_back(s.right_occupation_integral / s.averaged_time / bsites);
      lc.push_back((static_cast<double>(s.flips_left_in) - static_cast<double>(s.flips_left_out)) / nd / cfg.T);
      rc.push_back((static_cast<double>(s.flips_right_in) - static_cast<double>(s.flips_right_out)) / nd / cfg.T);
      ev.push_back(static_cast<double>(s.boundary_events()));
    }
    ScanRow row;
    row.theta = theta;
    row.regime = regime_for_theta(theta);
    row.left_occupation = summarize(lo);
    row.right_occupation = summarize(ro);
    row.left_current = summarize(lc);
    row.right_current = summarize(rc);
    row.boundary_events = summarize(ev);
    for (int v = 0; v < model->size(); ++v) {
      row.alpha_total += cfg.alpha.per_velocity[static_cast<std::size_t>(v)].mean();
      row.beta_total += cfg.beta.per_velocity[static_cast<std::size_t>(v)].mean();
    }
    row.event_bound = 2.0 * bsites * model->size() * std::pow(static_cast<double>(cfg.n), 2.0 - theta) * cfg.T;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

CheckRow row_le(std::string name, double value, double tol, std::string detail = {}) {
  return {std::move(name), value <= tol, value, tol, std::move(detail)};
}

Eigen::VectorXd draw_lambda(RandomStream& r, int d, double bound) {
  Eigen::VectorXd l(d + 1);
  for (int i = 0; i <= d; ++i) l[i] = bound * (2 * r.uniform() - 1);
  return l;
}

SimParams check_params(const VelocityModel& m, double theta) {
  SimParams p;
  p.theta = theta;
  p.alpha = ReservoirProfiles::constant(std::vector<double>(static_cast<std::size_t>(m.size()), 0.4));
  p.beta = ReservoirProfiles::constant(std::vector<double>(static_cast<std::size_t>(m.size()), 0.55));
  if (m.size() >= 2) {
    p.alpha.per_velocity[0] = TransverseProfile(0.8);
    p.alpha.per_velocity[1] = TransverseProfile(0.6);
    p.beta.per_velocity[0] = TransverseProfile(0.3);
    p.beta.per_velocity[1] = TransverseProfile(0.3);
  }
  p.jump = default_jump_law(m);
  return p;
}

}  // namespace

std::vector<CheckRow> check_suite(const CheckOptions& opt) {
  std::vector<CheckRow> rows;
  auto guarded = [&rows](const std::string& name, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rows.push_back({name, false, 0.0, 0.0, std::string("error: ") + e.what()});
    }
  };
  RandomStream rng(opt.seed, stream_id(StreamPurpose::Check, 0, 0));
  const auto mutation = opt.mutation ? GeneratorMutation::CorruptSiteZero : GeneratorMutation::None;

  for (int d = 1; d <= 2; ++d) {
    const std::string name = "torus stationarity d=" + std::to_string(d);
    guarded(name, [&] {
      const auto m = build_model_one(d);
      const auto lattice = d == 1 ? TinyLattice::torus(1, 3) : TinyLattice::torus(2, 2);
      const auto L = build_generator_matrix(lattice, m, check_params(m, 0.0), kAllParts, mutation);
      double worst = 0.0;
      for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd l = draw_lambda(rng, d, 2.0);
        const Eigen::VectorXd mu = product_measure(lattice, m, std::vector<Eigen::VectorXd>(lattice.num_sites(), l));
        worst = std::max(worst, (L.transpose() * mu).cwiseAbs().maxCoeff());
      }
      rows.push_back(row_le(name, worst, 1e-12, "max |mu^T L| over 5 random lambda"));
    });
  }

  guarded("collision conservation", [&] {
    double worst = 0.0;
    std::size_t rules = 0;
    for (const auto& m : {build_model_one(2), build_model_one(3), build_model_two(ModelTwoVariant::A),
                          build_model_two(ModelTwoVariant::B)}) {
      rules += m.collisions().size();
      for (const auto& c : m.collisions()) {
        const Eigen::VectorXd in = m.extended().col(c.v) + m.extended().col(c.w);
        const Eigen::VectorXd out = m.extended().col(c.vp) + m.extended().col(c.wp);
        worst = std::max(worst, (in - out).cwiseAbs().maxCoeff());
      }
      if (m.size() <= 12) {
        const SiteOccupancy states = SiteOccupancy{1} << m.size();
        for (SiteOccupancy occ = 0; occ < states; ++occ)
          for (const auto& c : m.collisions()) {
            if (c.fires(occ)) {
              worst = std::max(worst, (site_observable(c.apply(occ), m) - site_observable(occ, m)).cwiseAbs().maxCoeff());
            }
          }
      }
    }
    rows.push_back(row_le("collision conservation", worst, 1e-12, std::to_string(rules) + " rules"));
  });

  guarded("collisions annihilate linear observables", [&] {
    const auto m = build_model_one(2);
    const auto lattice = TinyLattice::torus(2, 2);
    const auto Lc = build_generator_matrix(lattice, m, SimParams{}, kCollision);
    Eigen::VectorXd g(static_cast<Eigen::Index>(lattice.num_sites()));
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = 2 * rng.uniform() - 1;
    double worst = 0.0;
    for (int k = 0; k <= 2; ++k) worst = std::max(worst, (Lc * linear_observable(lattice, m, g, k)).cwiseAbs().maxCoeff());
    rows.push_back(row_le("collisions annihilate linear observables", worst, 1e-12));
  });

  guarded("thermo round trip", [&] {
    double worst = 0.0;
    for (int d = 1; d <= 3; ++d) {
      const auto m = build_model_one(d);
      for (int i = 0; i < 100; ++i) {
        const Eigen::VectorXd l = draw_lambda(rng, d, 2.0);
        const auto back = inverse_map(forward_map({l}, m), m);
        worst = std::max(worst, (back.lambda - l).cwiseAbs().maxCoeff());
      }
    }
    rows.push_back(row_le("thermo round trip", worst, 1e-10, "100 lambda per d in {1,2,3}"));
  });

  guarded("collision Dirichlet form identity", [&] {
    const auto m = build_model_one(2);
    const auto lattice = TinyLattice::torus(2, 2);
    std::vector<Eigen::VectorXd> lambdas;
    for (std::size_t x = 0; x < lattice.num_sites(); ++x) lambdas.push_back(draw_lambda(rng, 2, 1.0));
    const Eigen::VectorXd nu = product_measure(lattice, m, lambdas);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd f(nu.size());
      for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = rng.uniform();
      f /= nu.dot(f);
      worst = std::max(worst, std::abs(collision_form_direct(lattice, m, nu, f) -
                                       collision_form_dirichlet(lattice, m, nu, f)));
    }
    rows.push_back(row_le("collision Dirichlet form identity", worst, 1e-10, "20 random densities"));
  });

  guarded("rate table rebuild", [&] {
    auto m = std::make_shared<const VelocityModel>(build_model_one(2));
    auto p = check_params(*m, 0.5);
    p.T = 1.0;
    SimOptions o;
    o.verify_interval = 100000;
    const auto init = sample_local_equilibrium(
        LatticeGeom(2, 24), m,
        profile_from_densities(*m, [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(4, 0.35); }),
        opt.seed);
    Simulator sim(init, p, RandomStream(opt.seed, stream_id(StreamPurpose::Check, 24, 1)), o);
    for (int i = 0; i < 300000; ++i) (void)sim.step();
    rows.push_back(row_le("rate table rebuild", sim.verify_rates(), 1e-9, "300000 events"));
  });

  if (opt.dynkin_replicas > 0) {
    guarded("Dynkin martingale mean zero", [&] {
      auto m = std::make_shared<const VelocityModel>(build_model_one(1));
      auto p = check_params(*m, 0.0);
      p.T = 0.05;
      p.seed = opt.seed;
      p.snapshots = {0.02, 0.05};
      const auto init = profile_from_densities(*m, [](const Eigen::VectorXd& u) {
        Eigen::VectorXd th(2);
        th << 0.8 - 0.5 * u[0], 0.6 - 0.3 * u[0];
        return th;
      });
      const auto res = dynkin_martingale_check(
          LatticeGeom(1, 32), m, p, init,
          {[](const Eigen::VectorXd& u) { return std::sin(std::numbers::pi * u[0]) + 0.5; },
           [](const Eigen::VectorXd& u) { return u[0] * u[0]; }},
          {0, 1}, opt.dynkin_replicas, opt.threads);
      double worst = 0.0;
      for (const auto& per : res.stats)
        for (const auto& s : per) worst = std::max(worst, std::abs(s.mean) / s.std_error);
      rows.push_back(row_le("Dynkin martingale mean zero", worst, 3.0, "max |mean| / stderr"));
    });
  }
  return rows;
}

std::string checks_to_json(const std::vector<CheckRow>& rows) {
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"tolerance", r.tolerance},
                 {"detail", r.detail}});
  }
  return j.dump(2);
}

std::string checks_to_table(const std::vector<CheckRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(44) << "check" << std::setw(6) << "ok" << std::setw(14) << "value" << "tolerance\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(44) << r.name << std::setw(6) << (r.passed ? "PASS" : "FAIL") << std::setw(14)
       << std::setprecision(4) << r.value << r.tolerance;
    if (!r.detail.empty()) os << "  " << r.detail;
    os << '\n';
  }
  return os.str();
}

}  // namespace velgas
