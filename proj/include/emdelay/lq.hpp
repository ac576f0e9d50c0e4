// SPDX-License-Identifier: MIT
//
// Linear-quadratic benchmark family: scalar state driven purely by the
// control and its delayed/distributed/noisy memories,
//
//   dx = [f u + g mu + h nu + k lambda] dt
//      + [ab x + bb y + cb z + db kappa + fb u + gb mu + hb nu + kb lambda] dW
//
// with cost J = E[ int (r1 u^2 + r2 mu^2) dt + x(T) ] to be minimized.
// The stationarity condition is solvable in closed form:
//
//   u*(t) = -c(t) / (2 R(t)),
//   c(t)  = f(t) + g(t+delta) 1_{[t0, T-delta)}(t)
//         + int_t^T phi2(s,t) h(s) ds,
//   R(t)  = r1(t) + r2(t+delta) 1_{[t0, T-delta)}(t),
//
// discretized consistently with the left-point schemes so that u* is the
// exact minimizer of the discrete cost.  A switch selects the variant
// without the indicator correction in the denominator
// (R = r1(t) + r2(t+delta) unconditionally) for comparison.

#pragma once

#include "emdelay/adjoint.hpp"

namespace emd {

using TimeFn = std::function<double(double)>;

struct LqSpec {
  TimeGrid grid;

  // Drift control coefficients.
  TimeFn f, g, h, k;
  // Diffusion coefficients (state block and control block).
  TimeFn ab, bb, cb, db;  // x, y, z, kappa
  TimeFn fb, gb, hb, kb;  // u, mu, nu, lambda
  // Running-cost weights.
  TimeFn r1, r2;

  KernelSpec phi1, psi1;  // state memories (enter only via diffusion here)
  KernelSpec phi2, psi2;  // control memories

  double x0 = 0.0;
  TimeFn varsigma;  // initial control segment; default 0

  bool literal_denominator = false;

  // All-twos benchmark instance: f = g = h = k = 2, phi2 = Constant(2),
  // r1 = r2 = 1, zero state-memory kernels, with a small state-dependent
  // diffusion ab = 0.1, fb = 0.2.
  static LqSpec benchmark(const TimeGrid& grid);

  DelaySystem to_system() const;
  ControlProcess control_from(const Eigen::VectorXd& values) const;
};

// The discrete stationarity solution u*(t_k), k = 0..n_steps.
Eigen::VectorXd lq_closed_form(const LqSpec& spec);

// Affine comparison candidate u(t) = T - t + 1, kept as the alternative
// answer the verification example must distinguish from u*.
Eigen::VectorXd lq_affine_candidate(const LqSpec& spec);

struct DirectionProbe {
  std::vector<double> rhos;
  std::vector<double> delta_j;   // paired-MC estimates of J(u*+rho v)-J(u*)
  std::vector<double> std_err;
  double rho_vertex = 0.0;       // vertex of the parabola fit a rho + b rho^2
  double curvature = 0.0;        // fitted b
  bool violated = false;         // some delta_j < -stat_mult * SE
};

struct LqVerifyReport {
  Eigen::VectorXd u_star;
  double j_star = 0.0, j_star_se = 0.0;
  double j_affine = 0.0, j_affine_se = 0.0;
  double j_gap = 0.0, j_gap_se = 0.0;  // paired J(affine) - J(u*)
  std::vector<DirectionProbe> probes;
  MaxConditionReport stationarity;
  bool pass = false;
};

// First-order probe of an arbitrary open-loop candidate: paired cost
// differences over a direction bank and the rho ladder; pass means no
// direction improves the cost beyond stat_mult standard errors.
struct CandidateReport {
  double j = 0.0, j_se = 0.0;
  std::vector<DirectionProbe> probes;
  bool pass = false;
};

CandidateReport lq_probe_candidate(const LqSpec& spec,
                                   const Eigen::VectorXd& candidate,
                                   const BrownianEnsemble& noise,
                                   int n_directions = 6,
                                   std::uint64_t direction_seed = 7,
                                   double stat_mult = 3.0);

LqVerifyReport lq_verify_optimality(const LqSpec& spec,
                                    const BrownianEnsemble& noise,
                                    int n_directions = 6,
                                    std::uint64_t direction_seed = 7,
                                    double stat_mult = 3.0);

// Adjoint pair of the LQ system along a nominal control (the deterministic
// anticipated route; p == 1, q == 0 whenever the diffusion has no state
// feedback into the drift, which holds for this family).
AdjointPair lq_adjoint(const LqSpec& spec, const ControlProcess& u,
                       const BrownianEnsemble& noise);

// ---------------------------------------------------------------------------
// Two-player game: shared scalar state, additively separated dynamics and
// costs, so the Nash equilibrium is each player's solo stationary control.
// ---------------------------------------------------------------------------
struct GameSpec {
  TimeGrid grid;
  LqSpec player1, player2;  // state-diffusion block taken from player1

  // Joint dynamics with m = 2 controls and the cost of one player
  // (objective = 0 or 1).
  DelaySystem joint_system(int objective) const;
  // Nash candidate: 2 x n_points, row i = player i's solo closed form.
  Eigen::MatrixXd nash_candidate() const;
};

struct NashPlayerReport {
  std::vector<DirectionProbe> probes;
  double max_residual = 0.0;       // stationarity residual of G_i
  double residual_se = 0.0;
  bool pass = false;
};

struct NashReport {
  Eigen::MatrixXd u_star;  // 2 x n_points
  NashPlayerReport players[2];
  bool pass = false;
};

// Unilateral-deviation check of the Nash candidate: for each player,
// perturb only that player's component over a direction bank and a rho
// ladder (paired MC), and evaluate the player's stationarity residual.
// `candidate` overrides the solo closed forms (2 x n_points), e.g. to show
// that a unilateral perturbation trips exactly the perturbed player's test.
NashReport nash_check(const GameSpec& game, const BrownianEnsemble& noise,
                      int n_directions = 4, std::uint64_t direction_seed = 7,
                      double stat_mult = 3.0,
                      const Eigen::MatrixXd* candidate = nullptr);

}  // namespace emd
