// SPDX-License-Identifier: MIT
//
// End-to-end acceptance gate: ten numbered checks, one PASS/FAIL line each.
// All tolerances are pinned here.  Exit status = number of failed checks.
//
// Usage: acceptance <path-to-cli-binary> <path-to-configs-dir>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emdelay/adjoint.hpp"
#include "emdelay/config.hpp"
#include "emdelay/cost.hpp"
#include "emdelay/forward.hpp"
#include "emdelay/lq.hpp"
#include "emdelay/svie.hpp"

using namespace emd;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("AC%d %s: %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// AC1 -- the LQ verification example separates the two sign candidates.
// ---------------------------------------------------------------------------
void ac1(const LqSpec& spec, const BrownianEnsemble& noise) {
  // 20 random directions, rho in {+-0.2, +-0.1, +-0.05}, 3-sigma test.
  const CandidateReport closed =
      lq_probe_candidate(spec, lq_closed_form(spec), noise, 20);
  const CandidateReport affine =
      lq_probe_candidate(spec, lq_affine_candidate(spec), noise, 20);
  const bool pass = closed.pass && !affine.pass;
  report(1, pass,
         "closed-form candidate " + std::string(closed.pass ? "passes" : "FAILS") +
             ", affine T-t+1 candidate " +
             std::string(affine.pass ? "passes (must fail)" : "fails") +
             "; winner = negative closed form, J* = " + fmt(closed.j) +
             " vs J_affine = " + fmt(affine.j));
}

// ---------------------------------------------------------------------------
// AC2 -- anticipated-BSDE solver returns (p, q) == (1, 0) on the LQ instance.
// ---------------------------------------------------------------------------
void ac2(const LqSpec& spec, const BrownianEnsemble& noise) {
  const AdjointPair pq =
      lq_adjoint(spec, spec.control_from(lq_closed_form(spec)), noise);
  const double p_err =
      pq.deterministic ? (pq.p_det.array() - 1.0).abs().maxCoeff() : 1.0;
  const double q_err =
      pq.deterministic ? pq.q_det.cwiseAbs().maxCoeff() : 1.0;
  report(2, p_err <= 1e-8 && q_err <= 1e-8,
         "max|p-1| = " + fmt(p_err) + ", max|q| = " + fmt(q_err) +
             " (tol 1e-8, deterministic short-circuit)");
}

// ---------------------------------------------------------------------------
// AC3 -- the generalized duality identity on random linear instances.
// ---------------------------------------------------------------------------
void ac3() {
  const TimeGrid g = make_grid(0.0, 1.0, 100, 0.1);
  bool all = true;
  std::string detail;
  for (int inst = 0; inst < 5; ++inst) {
    std::mt19937_64 rng(1000 + inst);
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    DelaySystem sys;
    sys.grid = g;
    sys.n = 1;
    sys.m = 1;
    LinearCoeffs b;
    b.x = const_scalar_mat(U(rng));
    b.y = const_scalar_mat(U(rng));
    b.z = const_scalar_mat(U(rng));
    b.u = const_scalar_mat(1.0);
    b.mu = const_scalar_mat(U(rng));
    sys.drift = VectorCoefficient::linear(b);
    LinearCoeffs s;
    s.x = const_scalar_mat(U(rng));
    const double s0 = 0.2 + 0.3 * std::abs(U(rng));
    s.affine = [s0](double) { return Eigen::VectorXd::Constant(1, s0); };
    sys.diffusion = VectorCoefficient::linear(s);
    LinearCoeffs l;
    l.x = const_scalar_mat(U(rng));
    l.z = const_scalar_mat(U(rng));
    sys.running_cost = ScalarCoefficient::linear(l);
    sys.terminal_cost = TerminalCost::linear(
        Eigen::RowVectorXd::Constant(1, 1.0),
        Eigen::RowVectorXd::Constant(1, U(rng)),
        Eigen::RowVectorXd::Constant(1, U(rng)), Eigen::RowVectorXd::Zero(1));
    sys.phi1 = KernelSpec::exponential(U(rng), U(rng));
    sys.phi2 = KernelSpec::constant(U(rng));
    sys.xi = [](double) { return Eigen::VectorXd::Constant(1, 1.0); };

    const BrownianEnsemble noise = sample_brownian(g, 10000, 500 + inst);
    const BrownianEnsemble one = sample_brownian(g, 1, 1);
    const auto nominal =
        simulate(sys, ControlProcess::constant(0.1, g), one);
    const SvieSystem svie = assemble_svie(linearize(sys, nominal[0]),
                                          sys.phi1, sys.psi1, sys.phi2,
                                          sys.psi2);
    Eigen::MatrixXd v(1, g.n_points());
    const double a = U(rng), c = U(rng);
    for (int k = 0; k <= g.n_steps; ++k)
      v(0, k) = a + c * std::sin(3.0 * g.time(k));

    const DualityReport rep = duality_check(svie, v, noise);
    if (!rep.pass) all = false;
    detail += (inst ? ", " : "") + fmt(std::abs(rep.lhs - rep.rhs)) + "<=" +
              fmt(rep.budget);
  }
  report(3, all, "|LHS-RHS| vs 3*SE + 0.5*sqrt(dt)*scale per instance: " +
                     detail);
}

// ---------------------------------------------------------------------------
// AC4 -- SDDE <-> SVIE equivalence under grid refinement.
// ---------------------------------------------------------------------------
void ac4() {
  // Shared driving noise across the three grids via pairwise coarsening.
  const TimeGrid fine = make_grid(0.0, 1.0, 200, 0.1);
  const BrownianEnsemble w200 = sample_brownian(fine, 2000, 77);
  const BrownianEnsemble w100 = coarsen(w200, 2);
  const BrownianEnsemble w50 = coarsen(w200, 4);

  // Under the strict reading of the row-2 indicator the two schemes
  // coincide to O(dt) (the discrete Fubini swap is exact), which hides the
  // generic rate.  The lax reading 1_[delta,inf) keeps the boundary cell
  // t - s = delta in row 2, and that single increment is the genuine
  // O(sqrt(dt)) leading term of the transformation ambiguity -- provided a
  // diffusion delay coupling (sigma_y != 0) carries it into the state at
  // full strength (a drift coupling damps it to O(dt)).
  SvieOptions lax;
  lax.strict_delay_indicator = false;

  std::vector<double> dts, gaps;
  for (const BrownianEnsemble* w : {&w50, &w100, &w200}) {
    const TimeGrid& g = w->grid();
    DelaySystem sys;
    sys.grid = g;
    sys.n = 1;
    sys.m = 1;
    LinearCoeffs b;
    b.x = const_scalar_mat(-0.4);
    b.y = const_scalar_mat(0.3);
    b.u = const_scalar_mat(1.0);
    sys.drift = VectorCoefficient::linear(b);
    LinearCoeffs s;
    s.x = const_scalar_mat(0.25);
    s.y = const_scalar_mat(0.3);
    s.affine = [](double) { return Eigen::VectorXd::Constant(1, 0.1); };
    sys.diffusion = VectorCoefficient::linear(s);
    sys.running_cost = ScalarCoefficient::zero();
    sys.terminal_cost = TerminalCost::zero();
    sys.phi1 = KernelSpec::exponential(0.5, -1.0);
    sys.psi1 = KernelSpec::constant(0.4);
    sys.phi2 = KernelSpec::constant(0.5);
    sys.xi = [](double t) { return Eigen::VectorXd::Constant(1, 1.0 + t); };

    Eigen::MatrixXd v(1, g.n_points());
    for (int k = 0; k <= g.n_steps; ++k)
      v(0, k) = std::cos(2.0 * g.time(k));
    gaps.push_back(svie_equivalence_gap(
        sys, ControlProcess::constant(0.2, g), v, *w, lax));
    dts.push_back(g.dt);
  }

  // Least-squares slope of log(gap) against log(dt).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 3; ++i) {
    const double x = std::log(dts[i]), y = std::log(gaps[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double order = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
  const bool monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
  report(4, monotone && order >= 0.35 && order <= 0.65,
         "gaps(dt=1/50,1/100,1/200) = " + fmt(gaps[0]) + ", " + fmt(gaps[1]) +
             ", " + fmt(gaps[2]) + "; fitted order " + fmt(order) +
             " in [0.35, 0.65]");
}

// ---------------------------------------------------------------------------
// AC5 -- Taylor-expansion gap of the convex variation (first-order lemma).
// ---------------------------------------------------------------------------
void ac5() {
  const TimeGrid g = make_grid(0.0, 1.0, 100, 0.1);
  const BrownianEnsemble noise = sample_brownian(g, 500, 91);
  Eigen::MatrixXd v(1, g.n_points());
  for (int k = 0; k <= g.n_steps; ++k) v(0, k) = std::sin(2.0 * g.time(k));
  const std::vector<double> rhos = {0.4, 0.2, 0.1, 0.05};

  // Quadratic drift: the remainder is genuinely second order in rho.
  DelaySystem quad;
  quad.grid = g;
  quad.n = 1;
  quad.m = 1;
  quad.drift = VectorCoefficient::callable([](const StateArgs& a) {
    Eigen::VectorXd out(1);
    out(0) = -0.3 * a.x(0) + 0.2 * a.x(0) * a.x(0) + a.u(0) + 0.1 * a.y(0);
    return out;
  });
  LinearCoeffs s;
  s.affine = [](double) { return Eigen::VectorXd::Constant(1, 0.2); };
  quad.diffusion = VectorCoefficient::linear(s);
  quad.running_cost = ScalarCoefficient::zero();
  quad.terminal_cost = TerminalCost::zero();
  quad.xi = [](double) { return Eigen::VectorXd::Constant(1, 0.5); };

  const std::vector<double> gq =
      expansion_gap(quad, ControlProcess::constant(0.1, g), v, noise, rhos);
  const bool strict = gq[0] > gq[1] && gq[1] > gq[2] && gq[2] > gq[3];
  const bool tenfold = gq[3] <= gq[0] / 10.0;

  // Linear drift: the expansion is exact, the gap is numerical round-off.
  DelaySystem lin = quad;
  LinearCoeffs b;
  b.x = const_scalar_mat(-0.3);
  b.y = const_scalar_mat(0.1);
  b.u = const_scalar_mat(1.0);
  lin.drift = VectorCoefficient::linear(b);
  const std::vector<double> gl =
      expansion_gap(lin, ControlProcess::constant(0.1, g), v, noise, {0.2});

  report(5, strict && tenfold && gl[0] <= 1e-10,
         "quadratic gaps(rho=0.4,0.2,0.1,0.05) = " + fmt(gq[0]) + ", " +
             fmt(gq[1]) + ", " + fmt(gq[2]) + ", " + fmt(gq[3]) +
             "; linear gap = " + fmt(gl[0]) + " (tol 1e-10)");
}

// ---------------------------------------------------------------------------
// AC6 -- Clark-Ocone reconstruction and the isometry.
// ---------------------------------------------------------------------------
void ac6() {
  const TimeGrid g = make_grid(0.0, 1.0, 400, 0.0);
  const BrownianEnsemble noise = sample_brownian(g, 10000, 63);
  const PathFunctional wT = [](const double* dw, int n) {
    double w = 0.0;
    for (int k = 0; k < n; ++k) w += dw[k];
    return w;
  };
  const PathFunctional wT2 = [wT](const double* dw, int n) {
    const double w = wT(dw, n);
    return w * w;
  };
  const ClarkOconeReport r1 = clark_ocone_check(wT, noise);
  const ClarkOconeReport r2 = clark_ocone_check(wT2, noise);
  report(6, r1.pass() && r2.pass(),
         "rel L2 error W(T) = " + fmt(r1.rel_l2_error) + ", W(T)^2 = " +
             fmt(r2.rel_l2_error) + " (tol 0.05); isometry |LHS-RHS| = " +
             fmt(std::abs(r2.isometry_lhs - r2.isometry_rhs)) + " vs 5*SE = " +
             fmt(5.0 * r2.isometry_se));
}

// ---------------------------------------------------------------------------
// AC7 -- Picard contraction with the proof-recipe weight.
// ---------------------------------------------------------------------------
void ac7() {
  const double L = 0.1;
  const TimeGrid g = make_grid(0.0, 1.0, 50, 0.1);
  DelaySystem sys;
  sys.grid = g;
  sys.n = 1;
  sys.m = 1;
  LinearCoeffs b;
  b.x = const_scalar_mat(L);
  b.y = const_scalar_mat(-L);
  b.z = const_scalar_mat(L);
  sys.drift = VectorCoefficient::linear(b);
  LinearCoeffs s;
  s.x = const_scalar_mat(L);
  s.affine = [](double) { return Eigen::VectorXd::Constant(1, 0.1); };
  sys.diffusion = VectorCoefficient::linear(s);
  sys.running_cost = ScalarCoefficient::zero();
  sys.terminal_cost = TerminalCost::zero();
  sys.phi1 = KernelSpec::constant(L);
  sys.xi = [](double) { return Eigen::VectorXd::Constant(1, 1.0); };

  PicardOptions opt;
  opt.L = L;
  const BrownianEnsemble noise = sample_brownian(g, 200, 17);
  const PicardReport rep =
      picard_solve(sys, ControlProcess::constant(0.0, g), noise, opt);
  bool ratios_ok = rep.converged;
  double worst = 0.0;
  const std::vector<double> r = rep.ratios();
  for (std::size_t i = 1; i < r.size(); ++i) {
    worst = std::max(worst, r[i]);
    if (r[i] > 0.5) ratios_ok = false;
  }
  report(7, ratios_ok,
         "converged in " + std::to_string(rep.iterations) +
             " iterations; worst weighted-gap ratio after the first = " +
             fmt(worst) + " (bound 0.5)");
}

// ---------------------------------------------------------------------------
// AC8 -- discrete maximum condition at and off the LQ optimum.
// ---------------------------------------------------------------------------
void ac8(const LqSpec& spec, const BrownianEnsemble& noise) {
  const TimeGrid& g = spec.grid;
  const DelaySystem sys = spec.to_system();
  const Eigen::VectorXd u_star = lq_closed_form(spec);

  const ControlProcess at_star = spec.control_from(u_star);
  const AdjointPair pq = lq_adjoint(spec, at_star, noise);
  const MaxConditionReport on =
      maximum_condition(sys, at_star, pq, noise);
  const double tol_on = 3.0 * on.stat_se + 2.0 * g.dt;

  const ControlProcess shifted =
      spec.control_from(u_star + Eigen::VectorXd::Ones(g.n_points()));
  const AdjointPair pq2 = lq_adjoint(spec, shifted, noise);
  const MaxConditionReport off =
      maximum_condition(sys, shifted, pq2, noise);
  double min_off = 1e300;
  const int interior_end = g.n_steps - g.delay_steps;
  for (int k = 0; k < interior_end; ++k)
    min_off = std::min(min_off, std::abs(off.G(0, k)));
  const double tol_off = 1.0 - (3.0 * off.stat_se + 10.0 * g.dt);

  report(8, on.max_abs_interior <= tol_on && min_off >= tol_off,
         "max|G| at optimum = " + fmt(on.max_abs_interior) + " (tol " +
             fmt(tol_on) + "); min interior |G| at u*+1 = " + fmt(min_off) +
             " (needs >= " + fmt(tol_off) + ")");
}

// ---------------------------------------------------------------------------
// AC9 -- decoupled two-player equilibrium and unilateral-deviation detection.
// ---------------------------------------------------------------------------
void ac9() {
  const TimeGrid g = make_grid(0.0, 1.0, 50, 0.1);
  GameSpec game;
  game.grid = g;
  game.player1 = LqSpec::benchmark(g);
  game.player2 = LqSpec::benchmark(g);
  game.player2.f = [](double) { return 1.0; };
  game.player2.g = [](double) { return 0.5; };
  game.player2.h = [](double) { return 1.0; };
  game.player2.k = [](double) { return 1.0; };
  game.player2.r2 = [](double) { return 0.5; };
  const BrownianEnsemble noise = sample_brownian(g, 2000, 29);

  const NashReport at_nash = nash_check(game, noise);

  Eigen::MatrixXd bent = game.nash_candidate();
  bent.row(0).array() += 1.0;
  const NashReport off1 = nash_check(game, noise, 4, 7, 3.0, &bent);

  bent = game.nash_candidate();
  bent.row(1).array() += 1.0;
  const NashReport off2 = nash_check(game, noise, 4, 7, 3.0, &bent);

  const bool pass = at_nash.pass && at_nash.players[0].pass &&
                    at_nash.players[1].pass && !off1.players[0].pass &&
                    off1.players[1].pass && off2.players[0].pass &&
                    !off2.players[1].pass;
  report(9, pass,
         std::string("solo closed forms: both unilateral tests ") +
             (at_nash.pass ? "pass" : "FAIL") +
             "; perturbing player 1 trips exactly player 1 (" +
             (!off1.players[0].pass && off1.players[1].pass ? "yes" : "no") +
             "), player 2 exactly player 2 (" +
             (off2.players[0].pass && !off2.players[1].pass ? "yes" : "no") +
             ")");
}

// ---------------------------------------------------------------------------
// AC10 -- bit-exact reproducibility of the CLI reports.
// ---------------------------------------------------------------------------
std::string run_cli(const std::string& cmd) {
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return "<popen failed>";
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) out.append(buf, n);
  pclose(p);
  return out;
}

void ac10(const std::string& cli, const std::string& configs) {
  bool pass = true;
  std::string detail;
  const std::array<std::pair<const char*, const char*>, 3> runs = {{
      {"simulate", "linear_delay.json"},
      {"duality-check", "linear_delay.json"},
      {"cost", "lq_benchmark.json"},
  }};
  for (const auto& [sub, cfg] : runs) {
    const std::string cmd = "'" + cli + "' " + sub + " --config '" + configs +
                            "/" + cfg + "' --paths 2000 2>/dev/null";
    const std::string a = run_cli(cmd);
    const std::string b = run_cli(cmd);
    const bool same = !a.empty() && a == b;
    if (!same) pass = false;
    detail += std::string(sub) + (same ? " identical, " : " DIFFERS, ");
  }
  report(10, pass, detail + "byte-compared across two runs");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <cli-binary> <configs-dir>\n");
    return 64;
  }

  // Shared LQ verification instance: T = 1, delta = 0.1, N = 100, all cost
  // weights 2, both control penalties 1, phi2 == 2, 10^4 paths.
  const TimeGrid g = make_grid(0.0, 1.0, 100, 0.1);
  const LqSpec spec = LqSpec::benchmark(g);
  const BrownianEnsemble noise = sample_brownian(g, 10000, 42);

  ac1(spec, noise);
  ac2(spec, noise);
  ac3();
  ac4();
  ac5();
  ac6();
  ac7();
  ac8(spec, noise);
  ac9();
  ac10(argv[1], argv[2]);

  std::printf("%d/10 criteria passed\n", 10 - g_failures);
  return g_failures;
}
