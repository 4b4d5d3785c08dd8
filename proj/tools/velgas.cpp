// velgas command line: simulate, pde, compare, scan-theta, check.

#include "velgas/errors.hpp"
#include "velgas/harness.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace velgas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw InvalidArgument("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  if (!os) throw InvalidArgument("cannot write " + p.string());
  os << s;
}

std::string tag(double t) {
  std::ostringstream os;
  os << std::setprecision(6) << t;
  return os.str();
}

struct Common {
  std::string model = "model1";
  int dim = 1;
  double theta = 0.0;
  std::string alpha = "0.8,0.6";
  std::string beta = "0.3,0.3";
  std::string init = "interp-bump:0.1";
  std::uint64_t seed = 1;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--model", c.model, "model1 | model2a | model2b | file:<path>");
  app->add_option("--dim", c.dim, "lattice dimension");
  app->add_option("--theta", c.theta, "boundary damping exponent");
  app->add_option("--alpha", c.alpha, "left reservoir densities (csv or @file.json)");
  app->add_option("--beta", c.beta, "right reservoir densities (csv or @file.json)");
  app->add_option("--init", c.init, "equilibrium | theta:a,b,.. | interp | interp-bump:A");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
}

int run_simulate(const Common& c, int n, double T, std::size_t replica, const std::string& snaps,
                 const std::string& jump_file) {
  const auto model = make_model(c.model, c.dim);
  SimParams p;
  p.theta = c.theta;
  p.T = T;
  p.alpha = parse_reservoirs(c.alpha, model->size());
  p.beta = parse_reservoirs(c.beta, model->size());
  p.jump = jump_file.empty() ? default_jump_law(*model) : JumpLaw::from_json(slurp(jump_file));
  p.seed = c.seed;
  p.snapshots = parse_list(snaps);
  const LatticeGeom geom(c.dim, n);
  const auto profile = profile_from_densities(*model, parse_initial(c.init, *model, p.alpha, p.beta));
  const auto init = sample_local_equilibrium(geom, model, profile, c.seed, replica);
  const auto res = simulate(init, p, replica);

  json manifest{{"command", "simulate"}, {"model", c.model},  {"dim", c.dim},         {"N", n},
                {"theta", c.theta},      {"T", T},            {"seed", c.seed},       {"replica", replica},
                {"init", c.init},        {"alpha", json::parse(p.alpha.to_json())},
                {"beta", json::parse(p.beta.to_json())},      {"jump", json::parse(p.jump.to_json())}};
  const auto& s = res.stats;
  manifest["stats"] = {{"events", s.events},
                       {"jumps", s.jumps},
                       {"collisions", s.collisions},
                       {"flips_left_in", s.flips_left_in},
                       {"flips_left_out", s.flips_left_out},
                       {"flips_right_in", s.flips_right_in},
                       {"flips_right_out", s.flips_right_out}};
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    json files = json::array();
    for (const auto& snap : res.snapshots) {
      const std::string base = "t" + tag(snap.t);
      write_profile_csv(fs::path(c.out) / (base + ".csv"), snap.profile);
      files.push_back(base + ".csv");
    }
    write_snapshot(fs::path(c.out) / "final.vgas", res.final_state, manifest.dump());
    manifest["profiles"] = files;
    spit(fs::path(c.out) / "manifest.json", manifest.dump(2));
  }
  std::cout << manifest["stats"].dump() << '\n';
  return 0;
}

int run_pde(const Common& c, const std::string& bc, int m, double T, const std::string& dt_text,
            const std::string& snaps, double kappa, bool upwind, bool no_drift) {
  if (c.dim != 1) throw InvalidArgument("the PDE solver is one-dimensional");
  const auto model = make_model(c.model, 1);
  const auto alpha = parse_reservoirs(c.alpha, model->size());
  const auto beta = parse_reservoirs(c.beta, model->size());
  const Regime regime = bc.empty() ? regime_for_theta(c.theta) : parse_regime(bc);
  PdeOptions opt;
  opt.drift = !no_drift;
  opt.scheme = upwind ? DriftScheme::Upwind : DriftScheme::Central;
  opt.robin_coefficient = kappa;
  const HydroSystem sys(model, opt);
  const auto profile = profile_from_densities(*model, parse_initial(c.init, *model, alpha, beta));
  const Eigen::VectorXd empty(0);
  const Field f0 = sys.make_field(
      m, [&](double u) { return profile(Eigen::VectorXd::Constant(1, u)); }, regime,
      boundary_data(alpha, *model)(empty), boundary_data(beta, *model)(empty));
  const double dt = (dt_text == "auto") ? 0.0 : std::stod(dt_text);
  auto times = parse_list(snaps);
  if (times.empty()) times.push_back(T);
  const auto traj = sys.solve(f0, T, dt, times);

  json manifest{{"command", "pde"}, {"model", c.model}, {"regime", to_string(regime)}, {"M", m},
                {"T", T},           {"dt", dt_text},    {"robin_coefficient", kappa}, {"init", c.init},
                {"scheme", upwind ? "upwind" : "central"}, {"drift", !no_drift}};
  json files = json::array();
  if (!c.out.empty()) fs::create_directories(c.out);
  for (const auto& [t, f] : traj) {
    if (c.out.empty()) {
      std::cout << "t=" << t << " mass=" << f.values.col(0).mean() << '\n';
      continue;
    }
    const std::string name = "pde_t" + tag(t) + ".csv";
    std::ofstream os(fs::path(c.out) / name);
    os << "u,rho,momentum\n" << std::setprecision(15);
    for (int i = 0; i <= f.m; ++i) os << f.node(i) << ',' << f.values(i, 0) << ',' << f.values(i, 1) << '\n';
    files.push_back(name);
  }
  if (!c.out.empty()) {
    manifest["fields"] = files;
    spit(fs::path(c.out) / "manifest.json", manifest.dump(2));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"velgas: multi-velocity exclusion process with reservoirs"};
  app.require_subcommand(1);

  Common sim_c;
  int sim_n = 64;
  double sim_T = 0.1;
  std::size_t sim_rep = 0;
  std::string sim_snaps, sim_jump;
  auto* sim = app.add_subcommand("simulate", "run one trajectory");
  add_common(sim, sim_c);
  sim->add_option("--N", sim_n, "scale parameter")->required();
  sim->add_option("--T", sim_T, "macroscopic horizon");
  sim->add_option("--replica", sim_rep, "replica index");
  sim->add_option("--snapshots", sim_snaps, "comma separated snapshot times");
  sim->add_option("--jump-law", sim_jump, "JSON jump law file");

  Common pde_c;
  std::string pde_bc, pde_dt = "auto", pde_snaps;
  int pde_m = 256;
  double pde_T = 0.1, pde_kappa = 2.0;
  bool pde_upwind = false, pde_nodrift = false;
  auto* pde = app.add_subcommand("pde", "solve the hydrodynamic equations (d = 1)");
  add_common(pde, pde_c);
  pde->add_option("--bc", pde_bc, "dirichlet | robin | neumann (default: from theta)");
  pde->add_option("--M", pde_m, "grid intervals");
  pde->add_option("--T", pde_T, "horizon");
  pde->add_option("--dt", pde_dt, "time step or auto");
  pde->add_option("--snapshots", pde_snaps, "comma separated output times");
  pde->add_option("--robin-coefficient", pde_kappa, "kappa in the Robin closure");
  pde->add_flag("--upwind", pde_upwind, "Rusanov drift flux");
  pde->add_flag("--no-drift", pde_nodrift, "pure diffusion");

  std::string cmp_config, cmp_out, cmp_sizes, cmp_times, cmp_regime;
  std::optional<double> cmp_theta, cmp_eps;
  std::optional<std::size_t> cmp_reps;
  std::optional<std::uint64_t> cmp_seed;
  int cmp_threads = 0;
  auto* cmp = app.add_subcommand("compare", "replicated simulations against the PDE");
  cmp->add_option("--config", cmp_config, "experiment JSON");
  cmp->add_option("--theta", cmp_theta);
  cmp->add_option("--regime", cmp_regime, "expected regime, checked against theta");
  cmp->add_option("--sizes", cmp_sizes, "comma separated N list");
  cmp->add_option("--times", cmp_times, "comma separated comparison times");
  cmp->add_option("--replicas", cmp_reps);
  cmp->add_option("--epsilon", cmp_eps, "smoothing half-width (<= 0: 5/N)");
  cmp->add_option("--seed", cmp_seed);
  cmp->add_option("--threads", cmp_threads);
  cmp->add_option("--out", cmp_out);

  ScanConfig scan_cfg;
  std::string scan_thetas, scan_out;
  auto* scan = app.add_subcommand("scan-theta", "boundary diagnostics across theta");
  scan->add_option("--thetas", scan_thetas, "comma separated theta list");
  scan->add_option("--N", scan_cfg.n);
  scan->add_option("--T", scan_cfg.T);
  scan->add_option("--average-from", scan_cfg.average_from);
  scan->add_option("--replicas", scan_cfg.replicas);
  scan->add_option("--seed", scan_cfg.seed);
  scan->add_option("--threads", scan_cfg.threads);
  scan->add_option("--out", scan_out, "report JSON path");

  CheckOptions chk;
  bool chk_json = false;
  auto* check = app.add_subcommand("check", "exact and statistical generator checks");
  check->add_option("--seed", chk.seed);
  check->add_flag("--mutate", chk.mutation, "corrupt one rate (negative control)");
  check->add_option("--dynkin-replicas", chk.dynkin_replicas);
  check->add_option("--threads", chk.threads);
  check->add_flag("--json", chk_json, "print JSON instead of a table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return run_simulate(sim_c, sim_n, sim_T, sim_rep, sim_snaps, sim_jump);
    if (*pde) return run_pde(pde_c, pde_bc, pde_m, pde_T, pde_dt, pde_snaps, pde_kappa, pde_upwind, pde_nodrift);
    if (*cmp) {
      Experiment e = cmp_config.empty() ? Experiment{} : Experiment::from_json(slurp(cmp_config));
      if (cmp_theta) e.theta = *cmp_theta;
      if (!cmp_regime.empty()) e.regime = parse_regime(cmp_regime);
      if (!cmp_sizes.empty()) {
        e.sizes.clear();
        for (double v : parse_list(cmp_sizes)) e.sizes.push_back(static_cast<int>(v));
      }
      if (!cmp_times.empty()) e.times = parse_list(cmp_times);
      if (cmp_reps) e.replicas = *cmp_reps;
      if (cmp_eps) e.epsilon = *cmp_eps;
      if (cmp_seed) e.seed = *cmp_seed;
      if (cmp_threads) e.threads = cmp_threads;
      if (!cmp_out.empty()) e.out = cmp_out;
      const auto rep = run_convergence(e);
      std::cout << std::setw(6) << "N" << std::setw(8) << "t" << std::setw(12) << "L1 rho" << std::setw(12)
                << "L1 mom" << std::setw(12) << "noise rho" << std::setw(12) << "noise mom" << '\n';
      for (const auto& r : rep.rows) {
        std::cout << std::setw(6) << r.n << std::setw(8) << r.t << std::setw(12) << r.l1[0] << std::setw(12)
                  << r.l1[1] << std::setw(12) << r.noise[0] << std::setw(12) << r.noise[1] << '\n';
      }
      return 0;
    }
    if (*scan) {
      if (!scan_thetas.empty()) scan_cfg.thetas = parse_list(scan_thetas);
      const auto rep = regime_scan(scan_cfg);
      const std::string js = rep.to_json();
      if (!scan_out.empty()) spit(scan_out, js);
      std::cout << js << '\n';
      return rep.dirichlet_value_ok() && rep.rate_bound_ok() ? 0 : 1;
    }
    if (*check) {
      const auto rows = check_suite(chk);
      std::cout << (chk_json ? checks_to_json(rows) + "\n" : checks_to_table(rows));
      for (const auto& r : rows)
        if (!r.passed) return 1;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
