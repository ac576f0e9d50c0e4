// SPDX-License-Identifier: MIT

#include <cmath>

#include "doctest.h"
#include "emdelay/adjoint.hpp"

using namespace emd;

namespace {

DelaySystem linear_instance(const TimeGrid& g, bool with_diffusion) {
  DelaySystem sys;
  sys.grid = g;
  sys.n = 1;
  sys.m = 1;
  LinearCoeffs b;
  b.x = const_scalar_mat(-0.3);
  b.y = const_scalar_mat(0.2);
  b.z = const_scalar_mat(0.1);
  b.u = const_scalar_mat(1.0);
  b.mu = const_scalar_mat(0.4);
  sys.drift = VectorCoefficient::linear(b);
  LinearCoeffs s;
  if (with_diffusion) {
    s.x = const_scalar_mat(0.2);
    s.affine = [](double) { return Eigen::VectorXd::Constant(1, 0.1); };
  }
  sys.diffusion = VectorCoefficient::linear(s);
  LinearCoeffs l;
  l.x = const_scalar_mat(1.0);
  l.u = const_scalar_mat(0.5);
  sys.running_cost = ScalarCoefficient::linear(l);
  sys.terminal_cost = TerminalCost::linear(
      Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Constant(1, 0.5),
      Eigen::RowVectorXd::Constant(1, 0.25), Eigen::RowVectorXd::Zero(1));
  sys.phi1 = KernelSpec::exponential(0.5, -1.0);
  sys.phi2 = KernelSpec::constant(0.5);
  sys.xi = [](double) { return Eigen::VectorXd::Constant(1, 1.0); };
  return sys;
}

SvieSystem svie_of(const DelaySystem& sys, const BrownianEnsemble& noise) {
  const BrownianEnsemble one = sample_brownian(sys.grid, 1, noise.seed());
  const auto nominal = simulate(sys, ControlProcess::constant(0.1, sys.grid),
                                one);
  return assemble_svie(linearize(sys, nominal[0]), sys.phi1, sys.psi1,
                       sys.phi2, sys.psi2);
}

}  // namespace

TEST_CASE("terminal BSDE recovers the running martingale") {
  // Xi = W(T): eta(t) = W(t) and zeta == 1 exactly; the LSMC solver should
  // reproduce both up to regression error.
  const TimeGrid g = make_grid(0.0, 1.0, 20, 0.0);
  const BrownianEnsemble noise = sample_brownian(g, 4000, 9);
  Eigen::MatrixXd xi(1, 4000);
  std::vector<double> w;
  for (int p = 0; p < 4000; ++p) {
    noise.path_values(p, w);
    xi(0, p) = w.back();
  }
  const BsdeSolution s = solve_bsde_terminal(g, noise, xi);
  // Sampling-noise errors: eta's target W(t_k) lies in the basis, zeta's
  // regression carries the 1/dt-amplified increment noise, so we test RMS
  // over paths and steps rather than the (heavy-tailed) sup.
  double eta_ss = 0.0, zeta_ss = 0.0;
  for (int p = 0; p < 4000; ++p) {
    noise.path_values(p, w);
    for (int k = 0; k <= g.n_steps; ++k) {
      const double e = s.eta_at(p, k)(0) - w[k];
      eta_ss += e * e;
    }
    for (int k = 0; k < g.n_steps; ++k) {
      const double e = s.zeta_at(p, k)(0) - 1.0;
      zeta_ss += e * e;
    }
  }
  CHECK(std::sqrt(eta_ss / (4000.0 * g.n_points())) < 0.05);
  CHECK(std::sqrt(zeta_ss / (4000.0 * g.n_steps)) < 0.5);
}

TEST_CASE("malliavin_fd is exact on a linear functional") {
  // F = sum_k W(t_k) dt: dF/d dW_j = (N - j) dt, exactly recovered by the
  // central difference.
  const TimeGrid g = make_grid(0.0, 1.0, 25, 0.0);
  const BrownianEnsemble noise = sample_brownian(g, 10, 14);
  const PathFunctional F = [](const double* dw, int n) {
    double w = 0.0, acc = 0.0;
    for (int k = 0; k < n; ++k) {
      w += dw[k];
      acc += w;
    }
    return acc / n;  // dt = 1/n here
  };
  const Eigen::MatrixXd d = malliavin_fd(F, noise);
  for (int p = 0; p < 10; ++p)
    for (int j = 0; j < g.n_steps; ++j)
      CHECK(d(p, j) ==
            doctest::Approx((g.n_steps - j) * g.dt).epsilon(1e-8));
}

TEST_CASE("Clark-Ocone reconstructs W(T) almost exactly") {
  const TimeGrid g = make_grid(0.0, 1.0, 50, 0.0);
  const BrownianEnsemble noise = sample_brownian(g, 4000, 27);
  const PathFunctional F = [](const double* dw, int n) {
    double w = 0.0;
    for (int k = 0; k < n; ++k) w += dw[k];
    return w;
  };
  const ClarkOconeReport rep = clark_ocone_check(F, noise);
  // D_t F == 1, so the integrand regression is a constant fit up to
  // finite-sample noise in the higher basis coefficients.
  CHECK(rep.rel_l2_error < 0.03);
  CHECK(rep.pass());
}

TEST_CASE("deterministic BSVIE matches a scalar closed form") {
  // b_x = a, l_x = c, h_x = 1 and nothing else: the first block satisfies
  // Y_i = c + a + a dt sum_{j>i} Y_j, i.e. Y_i = (c + a)(1 + a dt)^{N-i}.
  const double a = -0.6, c = 0.8;
  const TimeGrid g = make_grid(0.0, 1.0, 50, 0.1);
  DelaySystem sys;
  sys.grid = g;
  sys.n = 1;
  sys.m = 1;
  LinearCoeffs b;
  b.x = const_scalar_mat(a);
  b.u = const_scalar_mat(1.0);
  sys.drift = VectorCoefficient::linear(b);
  sys.diffusion = VectorCoefficient::linear({});
  LinearCoeffs l;
  l.x = const_scalar_mat(c);
  sys.running_cost = ScalarCoefficient::linear(l);
  sys.terminal_cost = TerminalCost::linear(
      Eigen::RowVectorXd::Ones(1), Eigen::RowVectorXd::Zero(1),
      Eigen::RowVectorXd::Zero(1), Eigen::RowVectorXd::Zero(1));
  sys.xi = [](double) { return Eigen::VectorXd::Zero(1); };

  const BrownianEnsemble noise = sample_brownian(g, 10, 3);
  const SvieSystem svie = svie_of(sys, noise);
  const BsdeSolution bsde =
      solve_bsde_terminal(g, Eigen::Vector4d(1.0, 0.0, 0.0, 0.0));
  const BsvieSolution bsvie = solve_bsvie_linear(svie, bsde, noise);
  REQUIRE(bsvie.deterministic);
  for (int i = 0; i <= g.n_steps; ++i) {
    const double exact = (c + a) * std::pow(1.0 + a * g.dt, g.n_steps - i);
    CHECK(bsvie.Y_det[i](0) == doctest::Approx(exact).epsilon(1e-11));
  }
}

TEST_CASE("stochastic BSVIE route reproduces a deterministic instance") {
  // Forcing the LSMC route on a noiseless-coefficient instance (zero
  // diffusion rows, so the zeta terms drop) must reproduce the resolvent
  // solution up to regression round-off.
  const TimeGrid g = make_grid(0.0, 1.0, 20, 0.2);
  const DelaySystem sys = linear_instance(g, false);
  const BrownianEnsemble noise = sample_brownian(g, 500, 19);
  const SvieSystem svie = svie_of(sys, noise);

  const Eigen::VectorXd h =
      (Eigen::VectorXd(4) << 1.0, 0.5, 0.25, 0.0).finished();
  const BsvieSolution det =
      solve_bsvie_linear(svie, solve_bsde_terminal(g, h), noise);

  Eigen::MatrixXd h_paths(4, noise.n_paths());
  h_paths.colwise() = h;
  const BsdeSolution bsde_sto = solve_bsde_terminal(g, noise, h_paths);
  const std::vector<Linearization> per_path(noise.n_paths(), svie.lin);
  const BsvieSolution sto =
      solve_bsvie_linear(svie, bsde_sto, noise, {}, &per_path);

  double max_diff = 0.0;
  for (int i = 0; i <= g.n_steps; ++i)
    max_diff = std::max(max_diff,
                        (sto.Y_at(0, i) - det.Y_det[i]).cwiseAbs().maxCoeff());
  CHECK(max_diff < 1e-6);
}

TEST_CASE("anticipated route and BSVIE aggregation agree on p") {
  const TimeGrid g = make_grid(0.0, 1.0, 100, 0.1);
  DelaySystem sys = linear_instance(g, true);
  sys.phi1 = KernelSpec::zero();  // constant E1 regime for the ABSDE
  const BrownianEnsemble noise = sample_brownian(g, 10, 41);
  const SvieSystem svie = svie_of(sys, noise);

  const AdjointPair absde = solve_absde(svie, noise);
  REQUIRE(absde.deterministic);

  const Eigen::VectorXd h =
      (Eigen::VectorXd(4) << 1.0, 0.5, 0.25, 0.0).finished();
  const BsvieSolution bsvie =
      solve_bsvie_linear(svie, solve_bsde_terminal(g, h), noise);
  const AdjointPair agg =
      aggregate_pq(svie, solve_bsde_terminal(g, h), bsvie, noise);
  REQUIRE(agg.deterministic);

  double max_diff = 0.0, scale = 0.0;
  for (int k = 0; k <= g.n_steps; ++k) {
    max_diff = std::max(max_diff,
                        std::abs(absde.p_det(0, k) - agg.p_det(0, k)));
    scale = std::max(scale, std::abs(agg.p_det(0, k)));
  }
  // Two O(dt) quadratures of the same continuous object.
  CHECK(max_diff < 10.0 * g.dt * std::max(1.0, scale));
  CHECK(agg.q_det.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("p jumps by h_y across T - delta") {
  const TimeGrid g = make_grid(0.0, 1.0, 50, 0.2);
  DelaySystem sys = linear_instance(g, false);
  sys.phi1 = KernelSpec::zero();
  // Strip the generator so the jump is the only feature: keep only h.
  sys.drift = VectorCoefficient::linear([] {
    LinearCoeffs b;
    b.u = const_scalar_mat(1.0);
    return b;
  }());
  sys.running_cost = ScalarCoefficient::zero();

  const BrownianEnsemble noise = sample_brownian(g, 5, 2);
  const SvieSystem svie = svie_of(sys, noise);
  const AdjointPair pq = solve_absde(svie, noise);
  const int kc = g.n_steps - g.delay_steps;
  CHECK(pq.p_det(0, kc) == doctest::Approx(1.0));            // h_x
  CHECK(pq.p_det(0, kc - 1) == doctest::Approx(1.0 + 0.5));  // + h_y below
}

TEST_CASE("duality identity holds on a mixed linear instance") {
  const TimeGrid g = make_grid(0.0, 1.0, 100, 0.1);
  const DelaySystem sys = linear_instance(g, true);
  const BrownianEnsemble noise = sample_brownian(g, 3000, 55);
  const SvieSystem svie = svie_of(sys, noise);
  Eigen::MatrixXd v(1, g.n_points());
  for (int k = 0; k <= g.n_steps; ++k) v(0, k) = std::sin(2.5 * g.time(k));

  const DualityReport rep = duality_check(svie, v, noise);
  CHECK(rep.pass);
  // The systematic discretization mismatch should be tiny relative to the
  // quadrature budget, not just inside it.
  CHECK(std::abs(rep.diff_mean) < 0.5 * rep.budget);
}

TEST_CASE("unsupported regimes are refused loudly") {
  const TimeGrid g = make_grid(0.0, 1.0, 20, 0.1);
  DelaySystem sys = linear_instance(g, false);
  sys.psi1 = KernelSpec::constant(0.3);
  const BrownianEnsemble noise = sample_brownian(g, 5, 1);
  const SvieSystem svie = svie_of(sys, noise);
  const BsdeSolution bsde =
      solve_bsde_terminal(g, Eigen::VectorXd::Zero(4));
  CHECK_THROWS_AS(solve_bsvie_linear(svie, bsde, noise), UnsupportedRegime);

  DelaySystem sys2 = linear_instance(g, false);  // phi1 exponential:
  const SvieSystem svie2 = svie_of(sys2, noise); // E1 is not constant
  CHECK_THROWS_AS(solve_absde(svie2, noise), UnsupportedRegime);
}

TEST_CASE("Hamiltonian and its gradients are consistent") {
  const TimeGrid g = make_grid(0.0, 1.0, 10, 0.1);
  const DelaySystem sys = linear_instance(g, true);
  StateArgs a;
  a.resize(1, 1);
  a.t = 0.3;
  a.x(0) = 1.2; a.y(0) = 0.7; a.z(0) = 0.4; a.u(0) = -0.2; a.mu(0) = 0.1;
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 2.0);
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, -1.0);

  // l + <b,p> + <sigma,q> by hand from linear_instance's coefficients.
  const double b = -0.3 * 1.2 + 0.2 * 0.7 + 0.1 * 0.4 + 1.0 * (-0.2) +
                   0.4 * 0.1;
  const double s = 0.2 * 1.2 + 0.1;
  const double l = 1.0 * 1.2 + 0.5 * (-0.2);
  CHECK(hamiltonian(sys, a, p, q) ==
        doctest::Approx(l + 2.0 * b - s).epsilon(1e-13));
  CHECK(hamiltonian_grad(sys, a, Arg::U, p, q)(0) ==
        doctest::Approx(0.5 + 2.0 * 1.0).epsilon(1e-13));
  CHECK(hamiltonian_grad(sys, a, Arg::X, p, q)(0) ==
        doctest::Approx(1.0 + 2.0 * (-0.3) - 0.2).epsilon(1e-13));
}
