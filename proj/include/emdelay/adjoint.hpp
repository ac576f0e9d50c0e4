// SPDX-License-Identifier: MIT
//
// Adjoint machinery: the terminal BSDE (eta, zeta), the linear BSVIE with
// M-solution (Y, Z), the anticipated-BSDE route for (p, q), aggregation of
// (p, q) from the BSVIE solution, Malliavin finite differences, the
// Clark-Ocone reconstruction check, the generalized duality identity, and
// the Hamiltonian / maximum-condition residual.
//
// Solvable regimes are enforced explicitly: the BSVIE and duality routes
// require psi1 = Zero; the anticipated route requires a constant E1 field
// and deterministic psi1 with Malliavin terms that vanish symbolically
// (deterministic integrands).  Everything else throws UnsupportedRegime.

#pragma once

#include "emdelay/cost.hpp"
#include "emdelay/regression.hpp"

namespace emd {

struct UnsupportedRegime : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-path field: one (dim x n_points) matrix per path.
using Field = std::vector<Eigen::MatrixXd>;

// ---------------------------------------------------------------------------
// (4.1a)-type BSDE with zero generator: eta(t) = E[Xi | F_t],
// zeta from the martingale representation (regression of eta ÎW / dt).
// ---------------------------------------------------------------------------
struct BsdeSolution {
  int dim = 0;
  bool deterministic = false;
  Eigen::VectorXd eta_const;  // deterministic case: eta == Xi, zeta == 0
  Field eta, zeta;            // stochastic case

  Eigen::VectorXd eta_at(int path, int k) const {
    return deterministic ? eta_const : Eigen::VectorXd(eta.at(path).col(k));
  }
  Eigen::VectorXd zeta_at(int path, int k) const {
    return deterministic ? Eigen::VectorXd(Eigen::VectorXd::Zero(dim))
                         : Eigen::VectorXd(zeta.at(path).col(k));
  }
};

// Deterministic terminal value.
BsdeSolution solve_bsde_terminal(const TimeGrid& grid,
                                 const Eigen::VectorXd& terminal);
// Stochastic terminal value (dim x n_paths), LSMC backward induction with a
// polynomial basis in W(t_k).
BsdeSolution solve_bsde_terminal(const TimeGrid& grid,
                                 const BrownianEnsemble& noise,
                                 const Eigen::MatrixXd& terminal,
                                 const RegressionOptions& reg = {});

// ---------------------------------------------------------------------------
// Malliavin finite differences + Clark-Ocone
// ---------------------------------------------------------------------------

// A square-integrable functional of one path of increments.
using PathFunctional = std::function<double(const double* dw, int n_steps)>;

// Central-difference estimate of D_{t_k} F for all k and all paths
// (paths x n_steps); bump eps = eps_rel * sqrt(dt).
Eigen::MatrixXd malliavin_fd(const PathFunctional& F,
                             const BrownianEnsemble& noise,
                             double eps_rel = 0.1);

struct ClarkOconeReport {
  double rel_l2_error = 0.0;   // || F - Fhat ||_L2 / || F ||_L2
  double isometry_lhs = 0.0;   // E int E[D_t F | F_t]^2 dt
  double isometry_rhs = 0.0;   // Var(F)
  double isometry_se = 0.0;    // SE of the paired difference
  bool pass(double tol_rel = 0.05, double sigma_mult = 5.0) const {
    return rel_l2_error <= tol_rel &&
           std::abs(isometry_lhs - isometry_rhs) <= sigma_mult * isometry_se;
  }
};

// Reconstruction F ?= E F + int E[D_t F | F_t] dW (left-point sum), with the
// conditional expectations regressed on a polynomial basis in W(t_k).
ClarkOconeReport clark_ocone_check(const PathFunctional& F,
                                   const BrownianEnsemble& noise,
                                   const RegressionOptions& reg = {});

// ---------------------------------------------------------------------------
// Linear BSVIE (4.1b) with M-solution (4.1c); psi1 = Zero regime only.
// ---------------------------------------------------------------------------
struct BsvieSolution {
  int dim = 0;  // 4n
  bool deterministic = false;
  // Deterministic instances: Z == 0 and Y(t) solves the resolvent Volterra
  // recursion exactly.
  std::vector<Eigen::VectorXd> Y_det;  // per outer index, 4n
  // Stochastic instances (per-path linearizations): diagonal Y(t) per path
  // and the M-solution part Z(t_outer, t_inner), inner < outer.
  Field Y;                                       // per path: 4n x np
  std::vector<std::vector<Eigen::MatrixXd>> Z;   // [path][outer]: 4n x outer

  Eigen::VectorXd Y_at(int path, int k) const {
    return deterministic ? Y_det.at(k) : Eigen::VectorXd(Y.at(path).col(k));
  }
};

// per_path: optional per-path linearizations (size n_paths) for stochastic
// coefficient processes; nullptr uses svie.lin for all paths (deterministic
// route when svie.lin.deterministic).
BsvieSolution solve_bsvie_linear(const SvieSystem& svie,
                                 const BsdeSolution& bsde,
                                 const BrownianEnsemble& noise,
                                 const RegressionOptions& reg = {},
                                 const std::vector<Linearization>* per_path =
                                     nullptr);

// ---------------------------------------------------------------------------
// (p, q): anticipated-BSDE route and BSVIE aggregation route
// ---------------------------------------------------------------------------
struct AdjointPair {
  int dim = 0;  // n
  bool deterministic = false;
  Eigen::MatrixXd p_det, q_det;  // n x np
  Field p, q;

  Eigen::VectorXd p_at(int path, int k) const {
    return deterministic ? Eigen::VectorXd(p_det.col(k))
                         : Eigen::VectorXd(p.at(path).col(k));
  }
  Eigen::VectorXd q_at(int path, int k) const {
    return deterministic ? Eigen::VectorXd(q_det.col(k))
                         : Eigen::VectorXd(q.at(path).col(k));
  }
};

// Anticipated-BSDE solver for (p, q).  Requires a constant E1 field; the
// h_y aggregation jump at T - delta and the anticipated generator term on
// [t0, T - delta) are handled in the backward sweep.
AdjointPair solve_absde(const SvieSystem& svie, const BrownianEnsemble& noise,
                        const RegressionOptions& reg = {},
                        const std::vector<Linearization>* per_path = nullptr);

// (4.12)-(4.13) aggregation from (eta, zeta, Y, Z); psi1 = Zero regime.
AdjointPair aggregate_pq(const SvieSystem& svie, const BsdeSolution& bsde,
                         const BsvieSolution& bsvie,
                         const BrownianEnsemble& noise,
                         const RegressionOptions& reg = {});

// ---------------------------------------------------------------------------
// Generalized duality identity
//   E<H, X(T)> + E int L X dt = E<H^T, phi(T)> + E int <phi, Y> dt
// ---------------------------------------------------------------------------
struct DualityReport {
  double lhs = 0.0, rhs = 0.0;
  double diff_mean = 0.0, diff_se = 0.0;
  double budget = 0.0;  // sigma_mult * SE + dt_coef * sqrt(dt) * scale
  bool pass = false;
};

DualityReport duality_check(const SvieSystem& svie, const Eigen::MatrixXd& v,
                            const BrownianEnsemble& noise,
                            double sigma_mult = 3.0, double dt_coef = 0.5,
                            const RegressionOptions& reg = {},
                            const std::vector<Linearization>* per_path =
                                nullptr);

// ---------------------------------------------------------------------------
// Hamiltonian and maximum condition
// ---------------------------------------------------------------------------

// H = l + <b, p> + <sigma, q>.
double hamiltonian(const DelaySystem& sys, const StateArgs& args,
                   const Eigen::VectorXd& p, const Eigen::VectorXd& q);

// dH/d(which) as an m- (control args) or n- (state args) vector.
Eigen::VectorXd hamiltonian_grad(const DelaySystem& sys, const StateArgs& args,
                                 Arg which, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q);

struct MaxConditionReport {
  // G(t_k) sampled on the grid: deterministic values, or path means.
  Eigen::MatrixXd G;        // m x np
  double max_abs_interior = 0.0;  // max_k |G(t_k)|, t_k in [t0, T - delta)
  double max_abs = 0.0;
  double stat_se = 0.0;     // MC standard error floor of the estimates
};

// G(t) = H_u(t) + E^{F_t}[ H_mu(t+delta) 1_{[t0,T-delta)}(t)
//        + int_t^T phi2(s,t)^T H_nu(s) ds + int_t^T psi2(s,t)^T D_t
//        H_lambda(s) ds ]; the Malliavin term is exactly zero when the
//        integrand is deterministic and unsupported otherwise.
MaxConditionReport maximum_condition(const DelaySystem& sys,
                                     const ControlProcess& u,
                                     const AdjointPair& pq,
                                     const BrownianEnsemble& noise,
                                     const RegressionOptions& reg = {});

}  // namespace emd
