// SPDX-License-Identifier: MIT

#include "emdelay/lq.hpp"

#include <cmath>

namespace emd {
namespace {

double call(const TimeFn& f, double t) { return f ? f(t) : 0.0; }

TimeMat fn_mat(const TimeFn& f) {
  if (!f) return const_mat(Eigen::MatrixXd());
  return scalar_mat(f);
}

// 1 x 2 control-coefficient row [f1(t) f2(t)].
TimeMat pair_mat(const TimeFn& f1, const TimeFn& f2) {
  return [f1, f2](double t) {
    Eigen::MatrixXd r(1, 2);
    r << call(f1, t), call(f2, t);
    return r;
  };
}

ScalarCoefficient quadratic_cost(const TimeFn& r1, const TimeFn& r2,
                                 int component, int m) {
  auto f = [r1, r2, component](const StateArgs& a) {
    const double u = a.u(component), mu = a.mu(component);
    return call(r1, a.t) * u * u + call(r2, a.t) * mu * mu;
  };
  auto grad = [r1, r2, component, m](Arg which, const StateArgs& a) {
    const int dim = is_state_arg(which) ? 1 : m;
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(dim);
    if (which == Arg::U) g(component) = 2.0 * call(r1, a.t) * a.u(component);
    if (which == Arg::Mu) g(component) = 2.0 * call(r2, a.t) * a.mu(component);
    return g;
  };
  return ScalarCoefficient::callable(f, grad);
}

// Least-squares fit delta_j(rho) ~ a rho + b rho^2 over the probe points.
void fit_parabola(DirectionProbe& probe) {
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < probe.rhos.size(); ++i) {
    const double r = probe.rhos[i], y = probe.delta_j[i];
    s11 += r * r; s12 += r * r * r; s22 += r * r * r * r;
    b1 += r * y; b2 += r * r * y;
  }
  const double det = s11 * s22 - s12 * s12;
  if (std::abs(det) < 1e-300) return;
  const double a = (s22 * b1 - s12 * b2) / det;
  const double b = (s11 * b2 - s12 * b1) / det;
  probe.curvature = b;
  probe.rho_vertex = std::abs(b) > 1e-300 ? -a / (2.0 * b) : 0.0;
}

const std::vector<double> kRhoLadder = {-0.2, -0.1, -0.05, 0.05, 0.1, 0.2};

DirectionProbe probe_direction(const DelaySystem& sys, const ControlProcess& u,
                               const Eigen::MatrixXd& v,
                               const BrownianEnsemble& noise,
                               double stat_mult) {
  DirectionProbe probe;
  for (double rho : kRhoLadder) {
    const McEstimate dj = cost_difference(sys, u, u.perturbed(v, rho), noise);
    probe.rhos.push_back(rho);
    probe.delta_j.push_back(dj.mean);
    probe.std_err.push_back(dj.std_error);
    if (dj.mean < -stat_mult * dj.std_error) probe.violated = true;
  }
  fit_parabola(probe);
  return probe;
}

}  // namespace

LqSpec LqSpec::benchmark(const TimeGrid& grid) {
  LqSpec s;
  s.grid = grid;
  auto two = [](double) { return 2.0; };
  auto one = [](double) { return 1.0; };
  s.f = two; s.g = two; s.h = two; s.k = two;
  s.ab = [](double) { return 0.1; };
  s.fb = [](double) { return 0.2; };
  s.r1 = one; s.r2 = one;
  s.phi2 = KernelSpec::constant(2.0);
  s.x0 = 0.0;
  return s;
}

DelaySystem LqSpec::to_system() const {
  DelaySystem sys;
  sys.grid = grid;
  sys.n = 1;
  sys.m = 1;

  LinearCoeffs b;
  b.u = fn_mat(f); b.mu = fn_mat(g); b.nu = fn_mat(h); b.lambda = fn_mat(k);
  sys.drift = VectorCoefficient::linear(b);

  LinearCoeffs s;
  s.x = fn_mat(ab); s.y = fn_mat(bb); s.z = fn_mat(cb); s.kappa = fn_mat(db);
  s.u = fn_mat(fb); s.mu = fn_mat(gb); s.nu = fn_mat(hb); s.lambda = fn_mat(kb);
  sys.diffusion = VectorCoefficient::linear(s);

  sys.running_cost = quadratic_cost(r1, r2, 0, 1);
  sys.terminal_cost = TerminalCost::linear(
      Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Zero(1),
      Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Zero(1));

  sys.phi1 = phi1; sys.psi1 = psi1; sys.phi2 = phi2; sys.psi2 = psi2;

  const double v0 = x0;
  sys.xi = [v0](double) { return Eigen::VectorXd::Constant(1, v0); };
  sys.orientation = Orientation::Minimize;
  return sys;
}

ControlProcess LqSpec::control_from(const Eigen::VectorXd& values) const {
  Eigen::MatrixXd v(1, values.size());
  v.row(0) = values.transpose();
  const TimeFn vs = varsigma;
  return ControlProcess::open_loop(
      v, [vs](double t) { return Eigen::VectorXd::Constant(1, call(vs, t)); });
}

Eigen::VectorXd lq_closed_form(const LqSpec& spec) {
  const TimeGrid& g = spec.grid;
  const int N = g.n_steps, d = g.delay_steps;
  Eigen::VectorXd u(N + 1);
  for (int k = 0; k <= N; ++k) {
    const double t = g.time(k);
    const bool interior = k + d <= N - 1;  // t < T - delta on the grid
    double c = call(spec.f, t);
    if (interior) c += call(spec.g, g.time(k + d));
    for (int j = k + 1; j < N; ++j)
      c += spec.phi2.eval_grid(g, j, k) * call(spec.h, g.time(j)) * g.dt;
    double r = call(spec.r1, t);
    if (spec.literal_denominator)
      r += call(spec.r2, t + g.delta);
    else if (interior)
      r += call(spec.r2, g.time(k + d));
    if (r <= 0.0)
      throw std::invalid_argument("lq_closed_form: nonpositive R(t)");
    u(k) = -c / (2.0 * r);
  }
  return u;
}

Eigen::VectorXd lq_affine_candidate(const LqSpec& spec) {
  const TimeGrid& g = spec.grid;
  Eigen::VectorXd u(g.n_points());
  for (int k = 0; k <= g.n_steps; ++k) u(k) = g.T - g.time(k) + 1.0;
  return u;
}

AdjointPair lq_adjoint(const LqSpec& spec, const ControlProcess& u,
                       const BrownianEnsemble& noise) {
  const DelaySystem sys = spec.to_system();
  BrownianEnsemble one(sys.grid, 1, noise.seed(), noise.storage());
  const std::vector<StateTrajectory> nominal = simulate(sys, u, one);
  Linearization lin = linearize(sys, nominal[0]);
  // The cost is quadratic in the control only and the nominal control is
  // open loop, so every linearized row is deterministic even though the
  // generic classifier cannot see it.
  lin.deterministic = true;
  const SvieSystem svie =
      assemble_svie(std::move(lin), sys.phi1, sys.psi1, sys.phi2, sys.psi2);
  return solve_absde(svie, noise);
}

CandidateReport lq_probe_candidate(const LqSpec& spec,
                                   const Eigen::VectorXd& candidate,
                                   const BrownianEnsemble& noise,
                                   int n_directions,
                                   std::uint64_t direction_seed,
                                   double stat_mult) {
  const DelaySystem sys = spec.to_system();
  const ControlProcess u = spec.control_from(candidate);
  CandidateReport rep;
  const McEstimate j = evaluate_cost(sys, u, noise);
  rep.j = j.mean;
  rep.j_se = j.std_error;
  rep.pass = true;
  for (const Eigen::MatrixXd& v :
       direction_bank(spec.grid, 1, n_directions, direction_seed)) {
    rep.probes.push_back(probe_direction(sys, u, v, noise, stat_mult));
    if (rep.probes.back().violated) rep.pass = false;
  }
  return rep;
}

LqVerifyReport lq_verify_optimality(const LqSpec& spec,
                                    const BrownianEnsemble& noise,
                                    int n_directions,
                                    std::uint64_t direction_seed,
                                    double stat_mult) {
  const DelaySystem sys = spec.to_system();
  LqVerifyReport rep;
  rep.u_star = lq_closed_form(spec);
  const ControlProcess u_star = spec.control_from(rep.u_star);
  const ControlProcess u_aff = spec.control_from(lq_affine_candidate(spec));

  const McEstimate j_star = evaluate_cost(sys, u_star, noise);
  const McEstimate j_aff = evaluate_cost(sys, u_aff, noise);
  const McEstimate gap = cost_difference(sys, u_star, u_aff, noise);
  rep.j_star = j_star.mean; rep.j_star_se = j_star.std_error;
  rep.j_affine = j_aff.mean; rep.j_affine_se = j_aff.std_error;
  rep.j_gap = gap.mean; rep.j_gap_se = gap.std_error;

  bool ok = rep.j_gap > -stat_mult * rep.j_gap_se;
  for (const Eigen::MatrixXd& v :
       direction_bank(spec.grid, 1, n_directions, direction_seed)) {
    rep.probes.push_back(probe_direction(sys, u_star, v, noise, stat_mult));
    if (rep.probes.back().violated) ok = false;
  }

  rep.stationarity =
      maximum_condition(sys, u_star, lq_adjoint(spec, u_star, noise), noise);
  rep.pass = ok;
  return rep;
}

DelaySystem GameSpec::joint_system(int objective) const {
  const LqSpec& p1 = player1;
  const LqSpec& p2 = player2;
  DelaySystem sys;
  sys.grid = grid;
  sys.n = 1;
  sys.m = 2;

  LinearCoeffs b;
  b.u = pair_mat(p1.f, p2.f);
  b.mu = pair_mat(p1.g, p2.g);
  b.nu = pair_mat(p1.h, p2.h);
  b.lambda = pair_mat(p1.k, p2.k);
  sys.drift = VectorCoefficient::linear(b);

  LinearCoeffs s;
  s.x = fn_mat(p1.ab); s.y = fn_mat(p1.bb);
  s.z = fn_mat(p1.cb); s.kappa = fn_mat(p1.db);
  s.u = pair_mat(p1.fb, p2.fb);
  s.mu = pair_mat(p1.gb, p2.gb);
  s.nu = pair_mat(p1.hb, p2.hb);
  s.lambda = pair_mat(p1.kb, p2.kb);
  sys.diffusion = VectorCoefficient::linear(s);

  const LqSpec& obj = objective == 0 ? p1 : p2;
  sys.running_cost = quadratic_cost(obj.r1, obj.r2, objective, 2);
  sys.terminal_cost = TerminalCost::linear(
      Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Zero(1),
      Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Zero(1));

  sys.phi1 = p1.phi1; sys.psi1 = p1.psi1;
  sys.phi2 = p1.phi2; sys.psi2 = p1.psi2;

  const double v0 = p1.x0;
  sys.xi = [v0](double) { return Eigen::VectorXd::Constant(1, v0); };
  sys.orientation = Orientation::Minimize;
  return sys;
}

Eigen::MatrixXd GameSpec::nash_candidate() const {
  Eigen::MatrixXd u(2, grid.n_points());
  u.row(0) = lq_closed_form(player1).transpose();
  u.row(1) = lq_closed_form(player2).transpose();
  return u;
}

NashReport nash_check(const GameSpec& game, const BrownianEnsemble& noise,
                      int n_directions, std::uint64_t direction_seed,
                      double stat_mult, const Eigen::MatrixXd* candidate) {
  const TimeGrid& g = game.grid;
  NashReport rep;
  rep.u_star = candidate ? *candidate : game.nash_candidate();

  const TimeFn vs1 = game.player1.varsigma;
  const TimeFn vs2 = game.player2.varsigma;
  const ControlProcess u_star = ControlProcess::open_loop(
      rep.u_star, [vs1, vs2](double t) {
        Eigen::VectorXd v(2);
        v << call(vs1, t), call(vs2, t);
        return v;
      });

  rep.pass = true;
  const std::vector<Eigen::MatrixXd> bank =
      direction_bank(g, 1, n_directions, direction_seed);
  for (int i = 0; i < 2; ++i) {
    const DelaySystem sys = game.joint_system(i);
    NashPlayerReport& pr = rep.players[i];
    pr.pass = true;

    for (const Eigen::MatrixXd& v1 : bank) {
      Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, g.n_points());
      v.row(i) = v1.row(0);
      pr.probes.push_back(probe_direction(sys, u_star, v, noise, stat_mult));
      if (pr.probes.back().violated) pr.pass = false;
    }

    // Stationarity residual of player i's component of G.
    BrownianEnsemble one(g, 1, noise.seed(), noise.storage());
    const std::vector<StateTrajectory> nominal = simulate(sys, u_star, one);
    Linearization lin = linearize(sys, nominal[0]);
    lin.deterministic = true;  // control-only quadratic cost, open loop
    const SvieSystem svie =
        assemble_svie(std::move(lin), sys.phi1, sys.psi1, sys.phi2, sys.psi2);
    const AdjointPair pq = solve_absde(svie, noise);
    const MaxConditionReport mc = maximum_condition(sys, u_star, pq, noise);
    const int interior_end = g.n_steps - g.delay_steps;
    for (int k = 0; k < interior_end; ++k)
      pr.max_residual = std::max(pr.max_residual, std::abs(mc.G(i, k)));
    pr.residual_se = mc.stat_se;
    if (pr.max_residual > stat_mult * pr.residual_se + 2.0 * g.dt)
      pr.pass = false;

    if (!pr.pass) rep.pass = false;
  }
  return rep;
}

}  // namespace emd
