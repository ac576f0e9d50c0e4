// SPDX-License-Identifier: MIT
//
// Command-line driver.  Every subcommand reads a JSON config, prints a JSON
// report to stdout, and exits with 0 (pass), 2 (a check reported a
// finding), or 1 (usage/config/runtime error).

#include <cmath>
#include <iostream>

#include "CLI11.hpp"
#include "emdelay/config.hpp"

namespace {

using namespace emd;

struct Common {
  std::string config_path, out_path, csv_path;
  long long paths = -1, seed = -1, steps = -1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--out", out_path, "write the JSON report here too");
    cmd->add_option("--csv", csv_path, "write tidy plot data (CSV)");
    cmd->add_option("--paths", paths, "override mc.paths");
    cmd->add_option("--seed", seed, "override mc.seed");
    cmd->add_option("--steps", steps, "override grid.steps");
  }

  Json load() const {
    Json cfg = load_json(config_path);
    if (paths >= 0) cfg["mc"]["paths"] = paths;
    if (seed >= 0) cfg["mc"]["seed"] = seed;
    if (steps >= 0) cfg["grid"]["steps"] = steps;
    return cfg;
  }
};

struct Loaded {
  Json cfg;
  TimeGrid grid;
  McConfig mc;
  BrownianEnsemble noise;
};

Loaded load_run(const Common& common) {
  Loaded l;
  l.cfg = common.load();
  if (!l.cfg.contains("grid")) throw ConfigError("missing required field 'grid'");
  l.grid = grid_from_json(l.cfg["grid"]);
  l.mc = mc_from_json(l.cfg.value("mc", Json::object()));
  l.noise = sample_brownian(l.grid, l.mc.paths, l.mc.seed);
  return l;
}

const Json& system_cfg(const Json& cfg) {
  if (!cfg.contains("system"))
    throw ConfigError("missing required field 'system'");
  return cfg["system"];
}

std::string system_type(const Json& sys) {
  return sys.value("type", std::string("linear"));
}

// System + nominal control from the config ("lq" defaults to the closed
// form; "linear" to the configured or zero control).
struct Instance {
  DelaySystem sys;
  ControlProcess control;
};

Instance build_instance(const Json& cfg, const TimeGrid& grid) {
  const Json& sc = system_cfg(cfg);
  const std::string type = system_type(sc);
  if (type == "lq") {
    const LqSpec spec = lq_from_json(sc, grid);
    ControlProcess u = cfg.contains("control")
                           ? control_from_json(cfg["control"], grid)
                           : spec.control_from(lq_closed_form(spec));
    return {spec.to_system(), std::move(u)};
  }
  if (type == "linear") {
    ControlProcess u =
        cfg.contains("control")
            ? control_from_json(cfg["control"], grid)
            : ControlProcess::constant(0.0, grid, 1);
    return {linear_system_from_json(sc, grid), std::move(u)};
  }
  throw ConfigError("unknown system type '" + type + "'");
}

SvieSystem build_svie(const DelaySystem& sys, const ControlProcess& u,
                      const BrownianEnsemble& noise) {
  BrownianEnsemble one(sys.grid, 1, noise.seed(), noise.storage());
  const std::vector<StateTrajectory> nominal = simulate(sys, u, one);
  return assemble_svie(linearize(sys, nominal[0]), sys.phi1, sys.psi1,
                       sys.phi2, sys.psi2);
}

int finish(const Common& common, Json& report, bool pass,
           const std::vector<Series>& series = {}) {
  report["pass"] = pass;
  std::cout << report.dump(2) << std::endl;
  if (!common.out_path.empty()) write_json(common.out_path, report);
  if (!common.csv_path.empty()) write_plot_csv(common.csv_path, series);
  return pass ? 0 : 2;
}

Json echo(const Loaded& l, const std::string& command) {
  Json j;
  j["command"] = command;
  j["config"] = l.cfg;
  return j;
}

// ---------------------------------------------------------------------------

int run_simulate(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  const std::vector<StateTrajectory> trajs =
      simulate(inst.sys, inst.control, l.noise);

  const int N = l.grid.n_steps;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(N + 1);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(N + 1);
  double j_acc = 0.0;
  for (const StateTrajectory& tr : trajs) {
    for (int k = 0; k <= N; ++k) {
      mean(k) += tr.x(0, k);
      m2(k) += tr.x(0, k) * tr.x(0, k);
    }
    j_acc += path_cost(inst.sys, tr);
  }
  const int P = static_cast<int>(trajs.size());
  mean /= P;
  Json rep = echo(l, "simulate");
  rep["terminal_mean"] = mean(N);
  rep["terminal_sd"] =
      std::sqrt(std::max(0.0, m2(N) / P - mean(N) * mean(N)));
  rep["cost_mean"] = j_acc / P;

  Series s{"mean_x", {}, {}, {}};
  for (int k = 0; k <= N; ++k) {
    s.x.push_back(l.grid.time(k));
    s.y.push_back(mean(k));
    const double sd = std::sqrt(std::max(0.0, m2(k) / P - mean(k) * mean(k)));
    s.y_stderr.push_back(sd / std::sqrt(static_cast<double>(P)));
  }
  return finish(common, rep, true, {s});
}

int run_cost(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  const McEstimate j = evaluate_cost(inst.sys, inst.control, l.noise);
  Json rep = echo(l, "cost");
  rep["cost_mean"] = j.mean;
  rep["cost_std_error"] = j.std_error;
  return finish(common, rep, true);
}

int run_svie_check(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  const Eigen::MatrixXd v = direction_bank(l.grid, inst.sys.m, 1, 7)[0];

  const double gap =
      svie_equivalence_gap(inst.sys, inst.control, v, l.noise);
  const std::vector<double> rhos = {0.4, 0.2, 0.1, 0.05};
  const std::vector<double> taylor =
      expansion_gap(inst.sys, inst.control, v, l.noise, rhos);

  Json rep = echo(l, "svie-check");
  rep["equivalence_gap"] = gap;
  rep["equivalence_budget"] = std::sqrt(l.grid.dt);
  rep["expansion_rhos"] = rhos;
  rep["expansion_gaps"] = taylor;
  const bool pass = gap <= std::sqrt(l.grid.dt);

  Series s{"expansion_gap", rhos, taylor, {}};
  return finish(common, rep, pass, {s});
}

int run_grad_check(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  const int n_dirs = l.cfg.value("directions", 4);

  Json rep = echo(l, "grad-check");
  rep["directions"] = Json::array();
  bool pass = true;
  for (const Eigen::MatrixXd& v :
       direction_bank(l.grid, inst.sys.m, n_dirs, 7)) {
    GateauxOptions a;
    a.method = GateauxMethod::Analytic;
    GateauxOptions f;
    f.method = GateauxMethod::FiniteDifference;
    const McEstimate da = gateaux(inst.sys, inst.control, v, l.noise, a);
    const McEstimate df = gateaux(inst.sys, inst.control, v, l.noise, f);
    const double tol = 3.0 * (da.std_error + df.std_error) +
                       1e-3 * std::max(1.0, std::abs(da.mean));
    const bool ok = std::abs(da.mean - df.mean) <= tol;
    pass = pass && ok;
    rep["directions"].push_back(Json{{"analytic", da.mean},
                                     {"finite_difference", df.mean},
                                     {"tolerance", tol},
                                     {"ok", ok}});
  }
  return finish(common, rep, pass);
}

int run_absde_solve(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  // LQ instances take the deterministic anticipated route; generic systems
  // are classified by their linearization.
  const AdjointPair pq = [&] {
    const Json& sc = system_cfg(l.cfg);
    if (system_type(sc) == "lq")
      return lq_adjoint(lq_from_json(sc, l.grid), inst.control, l.noise);
    return solve_absde(build_svie(inst.sys, inst.control, l.noise), l.noise);
  }();

  Json rep = echo(l, "absde-solve");
  rep["deterministic"] = pq.deterministic;
  Series sp{"p", {}, {}, {}}, sq{"q", {}, {}, {}};
  Json pj = Json::array(), qj = Json::array();
  for (int k = 0; k <= l.grid.n_steps; ++k) {
    const double pv = pq.p_at(0, k)(0), qv = pq.q_at(0, k)(0);
    sp.x.push_back(l.grid.time(k));
    sp.y.push_back(pv);
    sq.x.push_back(l.grid.time(k));
    sq.y.push_back(qv);
    pj.push_back(pv);
    qj.push_back(qv);
  }
  rep["p"] = pj;
  rep["q"] = qj;
  return finish(common, rep, true, {sp, sq});
}

int run_duality_check(const Common& common) {
  const Loaded l = load_run(common);
  const Instance inst = build_instance(l.cfg, l.grid);
  const SvieSystem svie = build_svie(inst.sys, inst.control, l.noise);
  const Eigen::MatrixXd v = direction_bank(l.grid, inst.sys.m, 1, 7)[0];
  const DualityReport d = duality_check(svie, v, l.noise);

  Json rep = echo(l, "duality-check");
  rep["lhs"] = d.lhs;
  rep["rhs"] = d.rhs;
  rep["diff_mean"] = d.diff_mean;
  rep["diff_std_error"] = d.diff_se;
  rep["budget"] = d.budget;
  return finish(common, rep, d.pass);
}

int run_clark_ocone(const Common& common) {
  const Loaded l = load_run(common);
  const std::string fn = l.cfg.value("functional", std::string("wT_squared"));
  PathFunctional F;
  if (fn == "wT") {
    F = [](const double* dw, int n) {
      double w = 0.0;
      for (int k = 0; k < n; ++k) w += dw[k];
      return w;
    };
  } else if (fn == "wT_squared") {
    F = [](const double* dw, int n) {
      double w = 0.0;
      for (int k = 0; k < n; ++k) w += dw[k];
      return w * w;
    };
  } else {
    throw ConfigError("unknown functional '" + fn + "'");
  }
  const ClarkOconeReport c = clark_ocone_check(F, l.noise);
  Json rep = echo(l, "clark-ocone");
  rep["rel_l2_error"] = c.rel_l2_error;
  rep["isometry_lhs"] = c.isometry_lhs;
  rep["isometry_rhs"] = c.isometry_rhs;
  rep["isometry_std_error"] = c.isometry_se;
  return finish(common, rep, c.pass());
}

int run_lq_verify(const Common& common) {
  const Loaded l = load_run(common);
  const Json& sc = system_cfg(l.cfg);
  if (system_type(sc) != "lq")
    throw ConfigError("lq-verify needs a system of type 'lq'");
  const LqSpec spec = lq_from_json(sc, l.grid);
  const LqVerifyReport r = lq_verify_optimality(spec, l.noise);

  Json rep = echo(l, "lq-verify");
  rep["j_star"] = r.j_star;
  rep["j_affine"] = r.j_affine;
  rep["j_gap"] = r.j_gap;
  rep["j_gap_std_error"] = r.j_gap_se;
  rep["stationarity_residual"] = r.stationarity.max_abs_interior;
  Json probes = Json::array();
  for (const DirectionProbe& p : r.probes)
    probes.push_back(Json{{"rho_vertex", p.rho_vertex},
                          {"curvature", p.curvature},
                          {"violated", p.violated}});
  rep["probes"] = probes;

  Series s{"u_star", {}, {}, {}};
  for (int k = 0; k <= l.grid.n_steps; ++k) {
    s.x.push_back(l.grid.time(k));
    s.y.push_back(r.u_star(k));
  }
  return finish(common, rep, r.pass, {s});
}

int run_nash_check(const Common& common) {
  const Loaded l = load_run(common);
  const Json& sc = system_cfg(l.cfg);
  if (system_type(sc) != "game")
    throw ConfigError("nash-check needs a system of type 'game'");
  const GameSpec game = game_from_json(sc, l.grid);
  const NashReport r = nash_check(game, l.noise);

  Json rep = echo(l, "nash-check");
  Json players = Json::array();
  for (int i = 0; i < 2; ++i) {
    int violations = 0;
    for (const DirectionProbe& p : r.players[i].probes)
      if (p.violated) ++violations;
    players.push_back(Json{{"max_residual", r.players[i].max_residual},
                           {"residual_std_error", r.players[i].residual_se},
                           {"violations", violations},
                           {"pass", r.players[i].pass}});
  }
  rep["players"] = players;

  std::vector<Series> series;
  for (int i = 0; i < 2; ++i) {
    Series s{"u_star_player" + std::to_string(i + 1), {}, {}, {}};
    for (int k = 0; k <= l.grid.n_steps; ++k) {
      s.x.push_back(l.grid.time(k));
      s.y.push_back(r.u_star(i, k));
    }
    series.push_back(std::move(s));
  }
  return finish(common, rep, r.pass, series);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-system simulation, adjoints and optimality checks"};
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Common&);
  };
  const Cmd cmds[] = {
      {"simulate", "forward Euler-Maruyama simulation", run_simulate},
      {"svie-check", "delay/Volterra equivalence and expansion gaps",
       run_svie_check},
      {"cost", "Monte Carlo cost of a control", run_cost},
      {"grad-check", "analytic vs finite-difference Gateaux derivative",
       run_grad_check},
      {"absde-solve", "anticipated backward equation for (p, q)",
       run_absde_solve},
      {"duality-check", "generalized duality identity", run_duality_check},
      {"clark-ocone", "Clark-Ocone reconstruction of a Wiener functional",
       run_clark_ocone},
      {"lq-verify", "closed-form LQ control vs perturbations", run_lq_verify},
      {"nash-check", "unilateral deviations from the Nash candidate",
       run_nash_check},
  };

  std::vector<Common> commons(std::size(cmds));
  std::vector<int (*)(const Common&)> picked;
  int which = -1;
  for (std::size_t i = 0; i < std::size(cmds); ++i) {
    CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    commons[i].attach(sub);
    sub->callback([&which, i] { which = static_cast<int>(i); });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return cmds[which].fn(commons[which]);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
