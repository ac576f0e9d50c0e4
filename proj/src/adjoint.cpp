// SPDX-License-Identifier: MIT

#include "emdelay/adjoint.hpp"

#include <cmath>

namespace emd {
namespace {

// W(t_k) values for every path: n_paths x n_points.
Eigen::MatrixXd brownian_matrix(const BrownianEnsemble& noise) {
  const TimeGrid& g = noise.grid();
  Eigen::MatrixXd w(noise.n_paths(), g.n_points());
  for (int p = 0; p < noise.n_paths(); ++p) {
    double acc = 0.0;
    w(p, 0) = 0.0;
    for (int k = 0; k < g.n_steps; ++k) {
      acc += noise.dw(p, k);
      w(p, k + 1) = acc;
    }
  }
  return w;
}

// Coefficient row [f_x f_y f_z f_kappa](t_j): n x 4n.
Eigen::MatrixXd stacked_row(const Linearization& lin, int j, bool drift) {
  const int n = lin.n;
  Eigen::MatrixXd r(n, 4 * n);
  r.leftCols(n) = drift ? lin.bx[j] : lin.sx[j];
  r.middleCols(n, n) = drift ? lin.by[j] : lin.sy[j];
  r.middleCols(2 * n, n) = drift ? lin.bz[j] : lin.sz[j];
  r.rightCols(n) = drift ? lin.bk[j] : lin.sk[j];
  return r;
}

double row2_weight(const SvieSystem& svie, int k, int j) {
  const int lag = k - j;
  const int d = svie.lin.grid.delay_steps;
  if (svie.options.strict_delay_indicator) return lag > d ? 1.0 : 0.0;
  return lag >= d ? 1.0 : 0.0;
}

// A1(t_k, t_j) (drift) or C1(t_k, t_j) (diffusion): 4n x 4n, rows 1..3
// weighted by {1, row-2 indicator, E1(t_k,t_j)}; row 4 zero (psi1 = Zero).
Eigen::MatrixXd weighted_block(const SvieSystem& svie, const Linearization& lin,
                               int k, int j, bool drift) {
  const int n = lin.n;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4 * n, 4 * n);
  const Eigen::MatrixXd r = stacked_row(lin, j, drift);
  b.topRows(n) = r;
  b.middleRows(n, n) = row2_weight(svie, k, j) * r;
  b.middleRows(2 * n, n) = svie.e1(k, j) * r;
  return b;
}

// L(t_j)^T: the 4n running-cost gradient stack.
Eigen::VectorXd l_vec(const Linearization& lin, int j) {
  const int n = lin.n;
  Eigen::VectorXd v(4 * n);
  v.head(n) = lin.lx[j].transpose();
  v.segment(n, n) = lin.ly[j].transpose();
  v.segment(2 * n, n) = lin.lz[j].transpose();
  v.tail(n) = lin.lk[j].transpose();
  return v;
}

// H^T = (h_x, h_y, h_z, h_kappa)^T.
Eigen::VectorXd h_vec(const Linearization& lin) {
  const int n = lin.n;
  Eigen::VectorXd v(4 * n);
  v.head(n) = lin.hx.transpose();
  v.segment(n, n) = lin.hy.transpose();
  v.segment(2 * n, n) = lin.hz.transpose();
  v.tail(n) = lin.hk.transpose();
  return v;
}

void require_psi1_zero(const SvieSystem& svie, const char* where) {
  if (!svie.psi1.is_zero())
    throw UnsupportedRegime(std::string(where) +
                            ": psi1 must be the zero kernel in this regime");
}

}  // namespace

// ---------------------------------------------------------------------------
// BSDE with zero generator
// ---------------------------------------------------------------------------

BsdeSolution solve_bsde_terminal(const TimeGrid& grid,
                                 const Eigen::VectorXd& terminal) {
  (void)grid;
  BsdeSolution s;
  s.dim = static_cast<int>(terminal.size());
  s.deterministic = true;
  s.eta_const = terminal;
  return s;
}

BsdeSolution solve_bsde_terminal(const TimeGrid& grid,
                                 const BrownianEnsemble& noise,
                                 const Eigen::MatrixXd& terminal,
                                 const RegressionOptions& reg) {
  const int P = noise.n_paths();
  const int np = grid.n_points();
  BsdeSolution s;
  s.dim = static_cast<int>(terminal.rows());
  s.deterministic = false;
  s.eta.assign(P, Eigen::MatrixXd::Zero(s.dim, np));
  s.zeta.assign(P, Eigen::MatrixXd::Zero(s.dim, np));

  const Eigen::MatrixXd w = brownian_matrix(noise);
  const Eigen::MatrixXd xi = terminal.transpose();  // P x dim

  for (int k = 0; k <= grid.n_steps; ++k) {
    Eigen::MatrixXd eta_k;
    if (k == grid.n_steps) {
      eta_k = xi;
    } else {
      eta_k = regress_fitted(w.col(k), xi, reg);
      // zeta(t_k): martingale-representation density over [t_k, t_{k+1}).
      Eigen::MatrixXd tgt(P, s.dim);
      for (int p = 0; p < P; ++p)
        tgt.row(p) = xi.row(p) * (noise.dw(p, k) / grid.dt);
      const Eigen::MatrixXd zeta_k = regress_fitted(w.col(k), tgt, reg);
      for (int p = 0; p < P; ++p)
        s.zeta[p].col(k) = zeta_k.row(p).transpose();
    }
    for (int p = 0; p < P; ++p) s.eta[p].col(k) = eta_k.row(p).transpose();
  }
  // Extend zeta to the last grid point for convenience.
  if (grid.n_steps >= 1)
    for (int p = 0; p < P; ++p)
      s.zeta[p].col(grid.n_steps) = s.zeta[p].col(grid.n_steps - 1);
  return s;
}

// ---------------------------------------------------------------------------
// Malliavin finite differences + Clark-Ocone
// ---------------------------------------------------------------------------

Eigen::MatrixXd malliavin_fd(const PathFunctional& F,
                             const BrownianEnsemble& noise, double eps_rel) {
  const TimeGrid& g = noise.grid();
  const int P = noise.n_paths();
  const double eps = eps_rel * std::sqrt(g.dt);
  Eigen::MatrixXd d(P, g.n_steps);
  std::vector<double> dw(g.n_steps);
  for (int p = 0; p < P; ++p) {
    const double* base = noise.path(p);
    std::copy(base, base + g.n_steps, dw.begin());
    for (int k = 0; k < g.n_steps; ++k) {
      dw[k] = base[k] + eps;
      const double up = F(dw.data(), g.n_steps);
      dw[k] = base[k] - eps;
      const double dn = F(dw.data(), g.n_steps);
      dw[k] = base[k];
      d(p, k) = (up - dn) / (2.0 * eps);
    }
  }
  return d;
}

ClarkOconeReport clark_ocone_check(const PathFunctional& F,
                                   const BrownianEnsemble& noise,
                                   const RegressionOptions& reg) {
  const TimeGrid& g = noise.grid();
  const int P = noise.n_paths();
  Eigen::VectorXd f(P);
  for (int p = 0; p < P; ++p) f(p) = F(noise.path(p), g.n_steps);
  const double f_mean = f.mean();

  const Eigen::MatrixXd d = malliavin_fd(F, noise);
  const Eigen::MatrixXd w = brownian_matrix(noise);

  Eigen::VectorXd fhat = Eigen::VectorXd::Constant(P, f_mean);
  Eigen::VectorXd quad = Eigen::VectorXd::Zero(P);  // int E[D|F_t]^2 dt
  for (int k = 0; k < g.n_steps; ++k) {
    const Eigen::MatrixXd phi = regress_fitted(w.col(k), d.col(k), reg);
    for (int p = 0; p < P; ++p) {
      fhat(p) += phi(p, 0) * noise.dw(p, k);
      quad(p) += phi(p, 0) * phi(p, 0) * g.dt;
    }
  }

  ClarkOconeReport rep;
  const double num = std::sqrt((f - fhat).squaredNorm() / P);
  const double den = std::sqrt(f.squaredNorm() / P);
  rep.rel_l2_error = den > 0 ? num / den : num;

  Eigen::VectorXd dev = (f.array() - f_mean).square().matrix();
  rep.isometry_lhs = quad.mean();
  rep.isometry_rhs = dev.mean();
  const Eigen::VectorXd diff = quad - dev;
  const double dm = diff.mean();
  rep.isometry_se =
      std::sqrt((diff.array() - dm).square().sum() / (P - 1.0) / P);
  return rep;
}

// ---------------------------------------------------------------------------
// Linear BSVIE
// ---------------------------------------------------------------------------

BsvieSolution solve_bsvie_linear(const SvieSystem& svie,
                                 const BsdeSolution& bsde,
                                 const BrownianEnsemble& noise,
                                 const RegressionOptions& reg,
                                 const std::vector<Linearization>* per_path) {
  require_psi1_zero(svie, "solve_bsvie_linear");
  const TimeGrid& g = svie.lin.grid;
  const int N = g.n_steps;
  const int dim = 4 * svie.lin.n;
  const double dt = g.dt;

  BsvieSolution s;
  s.dim = dim;

  if (svie.lin.deterministic && bsde.deterministic && !per_path) {
    s.deterministic = true;
    s.Y_det.assign(N + 1, Eigen::VectorXd::Zero(dim));
    const Eigen::VectorXd h = bsde.eta_const;
    for (int i = N; i >= 0; --i) {
      Eigen::VectorXd y = l_vec(svie.lin, i) +
                          weighted_block(svie, svie.lin, N, i, true)
                              .transpose() * h;
      for (int j = i + 1; j <= N; ++j)
        y += weighted_block(svie, svie.lin, j, i, true).transpose() *
             s.Y_det[j] * dt;
      s.Y_det[i] = y;
    }
    return s;
  }

  // Stochastic route: LSMC backward sweep over outer rows; the diagonal
  // Y(t_i) is a regression on F_{t_i}, and the M-solution densities
  // Z(t_i, t_k), k < i, are regressions of Y(t_i) dW_k / dt.
  const int P = noise.n_paths();
  s.deterministic = false;
  s.Y.assign(P, Eigen::MatrixXd::Zero(dim, N + 1));
  s.Z.assign(P, std::vector<Eigen::MatrixXd>(N + 1));
  for (int p = 0; p < P; ++p)
    for (int i = 0; i <= N; ++i)
      s.Z[p][i] = Eigen::MatrixXd::Zero(dim, i);

  const Eigen::MatrixXd w = brownian_matrix(noise);
  auto lin_of = [&](int p) -> const Linearization& {
    return per_path ? (*per_path)[p] : svie.lin;
  };

  for (int i = N; i >= 0; --i) {
    Eigen::MatrixXd raw(P, dim);
    for (int p = 0; p < P; ++p) {
      const Linearization& lin = lin_of(p);
      Eigen::VectorXd f =
          l_vec(lin, i) +
          weighted_block(svie, lin, N, i, true).transpose() * bsde.eta_at(p, N) +
          weighted_block(svie, lin, N, i, false).transpose() *
              bsde.zeta_at(p, i);
      for (int j = i + 1; j <= N; ++j) {
        f += weighted_block(svie, lin, j, i, true).transpose() *
             s.Y[p].col(j) * dt;
        if (i < j)
          f += weighted_block(svie, lin, j, i, false).transpose() *
               s.Z[p][j].col(i) * dt;
      }
      raw.row(p) = f.transpose();
    }
    const Eigen::MatrixXd y_i =
        (i == N) ? raw : Eigen::MatrixXd(regress_fitted(w.col(i), raw, reg));
    for (int p = 0; p < P; ++p) s.Y[p].col(i) = y_i.row(p).transpose();

    for (int k = 0; k < i; ++k) {
      Eigen::MatrixXd tgt(P, dim);
      for (int p = 0; p < P; ++p)
        tgt.row(p) = y_i.row(p) * (noise.dw(p, k) / dt);
      const Eigen::MatrixXd z = regress_fitted(w.col(k), tgt, reg);
      for (int p = 0; p < P; ++p) s.Z[p][i].col(k) = z.row(p).transpose();
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// (p, q) aggregation from (eta, zeta, Y, Z)
// ---------------------------------------------------------------------------

AdjointPair aggregate_pq(const SvieSystem& svie, const BsdeSolution& bsde,
                         const BsvieSolution& bsvie,
                         const BrownianEnsemble& noise,
                         const RegressionOptions& reg) {
  require_psi1_zero(svie, "aggregate_pq");
  const TimeGrid& g = svie.lin.grid;
  const int N = g.n_steps;
  const int n = svie.lin.n;
  const int d = g.delay_steps;
  const double dt = g.dt;

  AdjointPair pq;
  pq.dim = n;

  auto eta_part = [&](const Eigen::VectorXd& eta, int block) {
    return Eigen::VectorXd(eta.segment(block * n, n));
  };

  if (bsde.deterministic && bsvie.deterministic) {
    pq.deterministic = true;
    pq.p_det = Eigen::MatrixXd::Zero(n, N + 1);
    pq.q_det = Eigen::MatrixXd::Zero(n, N + 1);
    for (int i = 0; i <= N; ++i) {
      Eigen::VectorXd p = eta_part(bsde.eta_const, 0) +
                          svie.e1(N, i) * eta_part(bsde.eta_const, 2);
      if (i < N - d) p += eta_part(bsde.eta_const, 1);
      for (int j = i + 1; j <= N; ++j)
        p += (eta_part(bsvie.Y_det[j], 0) +
              svie.e1(j, i) * eta_part(bsvie.Y_det[j], 2)) *
             dt;
      for (int j = i + d + 1; j <= N; ++j)
        p += eta_part(bsvie.Y_det[j], 1) * dt;
      pq.p_det.col(i) = p;
    }
    return pq;
  }

  const int P = noise.n_paths();
  pq.deterministic = false;
  pq.p.assign(P, Eigen::MatrixXd::Zero(n, N + 1));
  pq.q.assign(P, Eigen::MatrixXd::Zero(n, N + 1));
  const Eigen::MatrixXd w = brownian_matrix(noise);

  for (int i = 0; i <= N; ++i) {
    // Adapted part (eta / zeta / Z terms) plus the conditional expectation
    // of the future-Y integrals, which needs a regression at t_i.
    Eigen::MatrixXd future(P, n);
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
      for (int j = i + 1; j <= N; ++j)
        acc += (eta_part(bsvie.Y_at(p, j), 0) +
                svie.e1(j, i) * eta_part(bsvie.Y_at(p, j), 2)) *
               dt;
      for (int j = i + d + 1; j <= N; ++j)
        acc += eta_part(bsvie.Y_at(p, j), 1) * dt;
      future.row(p) = acc.transpose();
    }
    const Eigen::MatrixXd cond =
        (i == N) ? future : Eigen::MatrixXd(regress_fitted(w.col(i), future, reg));

    for (int p = 0; p < P; ++p) {
      const Eigen::VectorXd eta = bsde.eta_at(p, i);
      Eigen::VectorXd pv =
          eta_part(eta, 0) + svie.e1(N, i) * eta_part(eta, 2);
      if (i < N - d) pv += eta_part(eta, 1);
      pv += cond.row(p).transpose();
      pq.p[p].col(i) = pv;

      const Eigen::VectorXd zeta = bsde.zeta_at(p, i);
      Eigen::VectorXd qv =
          eta_part(zeta, 0) + svie.e1(N, i) * eta_part(zeta, 2);
      if (i < N - d) qv += eta_part(zeta, 1);
      if (!bsvie.deterministic) {
        for (int j = i + 1; j <= N; ++j) {
          const Eigen::VectorXd z = bsvie.Z[p][j].col(i);
          qv += (eta_part(z, 0) + svie.e1(j, i) * eta_part(z, 2)) * dt;
          if (j > i + d) qv += eta_part(z, 1) * dt;
        }
      }
      pq.q[p].col(i) = qv;
    }
  }
  return pq;
}

// ---------------------------------------------------------------------------
// Anticipated-BSDE route
// ---------------------------------------------------------------------------

AdjointPair solve_absde(const SvieSystem& svie, const BrownianEnsemble& noise,
                        const RegressionOptions& reg,
                        const std::vector<Linearization>* per_path) {
  const TimeGrid& g = svie.lin.grid;
  const int N = g.n_steps;
  const int n = svie.lin.n;
  const int d = g.delay_steps;
  const double dt = g.dt;

  double C = 0.0;
  if (!svie.e1.is_constant(1e-10, &C))
    throw UnsupportedRegime(
        "solve_absde: E1(t,s) must be constant on the strict lower triangle");

  AdjointPair pq;
  pq.dim = n;

  if (svie.lin.deterministic && !per_path) {
    // Deterministic coefficients: exact backward recursion, q == 0, and the
    // Malliavin (kappa) terms vanish symbolically.
    pq.deterministic = true;
    pq.p_det = Eigen::MatrixXd::Zero(n, N + 1);
    pq.q_det = Eigen::MatrixXd::Zero(n, N + 1);
    const Linearization& lin = svie.lin;
    Eigen::VectorXd p_next = lin.hx.transpose() + C * lin.hz.transpose();
    if (d == 0) p_next += lin.hy.transpose();
    pq.p_det.col(N) = p_next;
    for (int k = N - 1; k >= 0; --k) {
      Eigen::VectorXd p_eff = pq.p_det.col(k + 1);
      if (d > 0 && k + 1 == N - d) p_eff += lin.hy.transpose();
      Eigen::VectorXd gen =
          lin.lx[k].transpose() + lin.bx[k].transpose() * p_eff +
          C * (lin.lz[k].transpose() + lin.bz[k].transpose() * p_eff);
      if (k < N - d) {
        const int j = k + d;
        const Eigen::VectorXd pj =
            (j > k) ? Eigen::VectorXd(pq.p_det.col(j)) : p_eff;
        gen += lin.ly[j].transpose() + lin.by[j].transpose() * pj;
      }
      pq.p_det.col(k) = p_eff + gen * dt;
    }
    return pq;
  }

  if (!svie.psi1.is_zero())
    throw UnsupportedRegime(
        "solve_absde: stochastic coefficients require psi1 = Zero (the "
        "Malliavin term does not vanish otherwise)");

  const int P = noise.n_paths();
  pq.deterministic = false;
  pq.p.assign(P, Eigen::MatrixXd::Zero(n, N + 1));
  pq.q.assign(P, Eigen::MatrixXd::Zero(n, N + 1));
  const Eigen::MatrixXd w = brownian_matrix(noise);
  auto lin_of = [&](int p) -> const Linearization& {
    return per_path ? (*per_path)[p] : svie.lin;
  };

  for (int p = 0; p < P; ++p) {
    const Linearization& lin = lin_of(p);
    Eigen::VectorXd pn = lin.hx.transpose() + C * lin.hz.transpose();
    if (d == 0) pn += lin.hy.transpose();
    pq.p[p].col(N) = pn;
  }

  Eigen::MatrixXd p_eff(P, n);
  for (int k = N - 1; k >= 0; --k) {
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd pe = pq.p[p].col(k + 1);
      if (d > 0 && k + 1 == N - d) pe += lin_of(p).hy.transpose();
      p_eff.row(p) = pe.transpose();
    }
    // q(t_k) from the martingale-representation density of p over the step.
    Eigen::MatrixXd tgt(P, n);
    for (int p = 0; p < P; ++p)
      tgt.row(p) = p_eff.row(p) * (noise.dw(p, k) / dt);
    const Eigen::MatrixXd q_k = regress_fitted(w.col(k), tgt, reg);
    for (int p = 0; p < P; ++p) pq.q[p].col(k) = q_k.row(p).transpose();

    // Anticipated term E^{F_{t_k}}[ l_y + b_y^T p + sigma_y^T q ](t_k+delta).
    Eigen::MatrixXd ant = Eigen::MatrixXd::Zero(P, n);
    if (k < N - d) {
      const int j = k + d;
      Eigen::MatrixXd raw(P, n);
      for (int p = 0; p < P; ++p) {
        const Linearization& lin = lin_of(p);
        const Eigen::VectorXd pj = (j > k)
                                       ? Eigen::VectorXd(pq.p[p].col(j))
                                       : Eigen::VectorXd(p_eff.row(p));
        raw.row(p) = (lin.ly[j].transpose() + lin.by[j].transpose() * pj +
                      lin.sy[j].transpose() * pq.q[p].col(j))
                         .transpose();
      }
      ant = (j > k) ? Eigen::MatrixXd(regress_fitted(w.col(k), raw, reg)) : raw;
    }

    Eigen::MatrixXd target(P, n);
    for (int p = 0; p < P; ++p) {
      const Linearization& lin = lin_of(p);
      const Eigen::VectorXd pe = p_eff.row(p).transpose();
      const Eigen::VectorXd qk = pq.q[p].col(k);
      Eigen::VectorXd gen =
          lin.lx[k].transpose() + lin.bx[k].transpose() * pe +
          lin.sx[k].transpose() * qk +
          C * (lin.lz[k].transpose() + lin.bz[k].transpose() * pe +
               lin.sz[k].transpose() * qk) +
          ant.row(p).transpose();
      target.row(p) = (pe + gen * dt).transpose();
    }
    const Eigen::MatrixXd p_k = regress_fitted(w.col(k), target, reg);
    for (int p = 0; p < P; ++p) pq.p[p].col(k) = p_k.row(p).transpose();
  }
  for (int p = 0; p < P; ++p)
    if (N >= 1) pq.q[p].col(N) = pq.q[p].col(N - 1);
  return pq;
}

// ---------------------------------------------------------------------------
// Duality identity
// ---------------------------------------------------------------------------

DualityReport duality_check(const SvieSystem& svie, const Eigen::MatrixXd& v,
                            const BrownianEnsemble& noise, double sigma_mult,
                            double dt_coef, const RegressionOptions& reg,
                            const std::vector<Linearization>* per_path) {
  require_psi1_zero(svie, "duality_check");
  const TimeGrid& g = svie.lin.grid;
  const int N = g.n_steps;
  const int P = noise.n_paths();
  const double dt = g.dt;

  BsdeSolution bsde;
  if (per_path) {
    Eigen::MatrixXd h(4 * svie.lin.n, P);
    for (int p = 0; p < P; ++p) h.col(p) = h_vec((*per_path)[p]);
    bsde = solve_bsde_terminal(g, noise, h, reg);
  } else {
    bsde = solve_bsde_terminal(g, h_vec(svie.lin));
  }
  const BsvieSolution bsvie =
      solve_bsvie_linear(svie, bsde, noise, reg, per_path);

  Eigen::VectorXd lhs(P), rhs(P);
  for (int p = 0; p < P; ++p) {
    SvieSystem local = svie;
    if (per_path) local.lin = (*per_path)[p];
    const SviePath path = simulate_svie(local, v, noise.path(p), true);
    const Eigen::VectorXd h = h_vec(local.lin);

    double l = h.dot(path.X.col(N));
    double r = h.dot(path.phi.col(N));
    for (int k = 0; k < N; ++k) {
      l += l_vec(local.lin, k).dot(path.X.col(k)) * dt;
      r += path.phi.col(k).dot(bsvie.Y_at(p, k)) * dt;
    }
    lhs(p) = l;
    rhs(p) = r;
  }

  DualityReport rep;
  rep.lhs = lhs.mean();
  rep.rhs = rhs.mean();
  const Eigen::VectorXd diff = lhs - rhs;
  rep.diff_mean = diff.mean();
  rep.diff_se = P > 1 ? std::sqrt((diff.array() - rep.diff_mean).square().sum() /
                                  (P - 1.0) / P)
                      : 0.0;
  const double scale = std::max(1.0, std::abs(rep.lhs));
  rep.budget = sigma_mult * rep.diff_se + dt_coef * std::sqrt(g.dt) * scale;
  rep.pass = std::abs(rep.diff_mean) <= rep.budget;
  return rep;
}

// ---------------------------------------------------------------------------
// Hamiltonian and maximum condition
// ---------------------------------------------------------------------------

double hamiltonian(const DelaySystem& sys, const StateArgs& args,
                   const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  return sys.running_cost.eval(args) +
         sys.drift.eval(args, sys.n).dot(p) +
         sys.diffusion.eval(args, sys.n).dot(q);
}

Eigen::VectorXd hamiltonian_grad(const DelaySystem& sys, const StateArgs& args,
                                 Arg which, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& q) {
  const int dim = is_state_arg(which) ? sys.n : sys.m;
  return sys.running_cost.grad(which, args, dim).transpose() +
         sys.drift.deriv(which, args, sys.n).transpose() * p +
         sys.diffusion.deriv(which, args, sys.n).transpose() * q;
}

MaxConditionReport maximum_condition(const DelaySystem& sys,
                                     const ControlProcess& u,
                                     const AdjointPair& pq,
                                     const BrownianEnsemble& noise,
                                     const RegressionOptions& reg) {
  const TimeGrid& g = sys.grid;
  const int N = g.n_steps;
  const int d = g.delay_steps;
  const int m = sys.m;
  const double dt = g.dt;

  // Deterministic short-circuit: deterministic adjoints plus linear
  // coefficients make every Hamiltonian gradient a deterministic function
  // of time, so one path determines G and the Malliavin term is zero.
  const bool det = pq.deterministic && sys.drift.is_linear() &&
                   sys.diffusion.is_linear() && sys.running_cost.is_linear() &&
                   u.is_open_loop();
  const int P = det ? 1 : noise.n_paths();

  const std::vector<StateTrajectory> trajs = [&] {
    if (!det) return simulate(sys, u, noise);
    BrownianEnsemble one(g, 1, noise.seed(), noise.storage());
    return simulate(sys, u, one);
  }();

  // Hamiltonian gradients along the nominal pair, per path and grid index.
  std::vector<Eigen::MatrixXd> hu(P), hmu(P), hnu(P), hlam(P);
  StateArgs args;
  args.resize(sys.n, m);
  for (int p = 0; p < P; ++p) {
    hu[p].resize(m, N + 1);
    hmu[p].resize(m, N + 1);
    hnu[p].resize(m, N + 1);
    hlam[p].resize(m, N + 1);
    const StateTrajectory& tr = trajs[p];
    for (int k = 0; k <= N; ++k) {
      args.t = g.time(k);
      args.x = tr.x.col(k); args.y = tr.y.col(k);
      args.z = tr.z.col(k); args.kappa = tr.kappa.col(k);
      args.u = tr.u.col(k); args.mu = tr.mu.col(k);
      args.nu = tr.nu.col(k); args.lambda = tr.lambda.col(k);
      const Eigen::VectorXd pv = pq.p_at(det ? 0 : p, k);
      const Eigen::VectorXd qv = pq.q_at(det ? 0 : p, k);
      hu[p].col(k) = hamiltonian_grad(sys, args, Arg::U, pv, qv);
      hmu[p].col(k) = hamiltonian_grad(sys, args, Arg::Mu, pv, qv);
      hnu[p].col(k) = hamiltonian_grad(sys, args, Arg::Nu, pv, qv);
      if (!sys.psi2.is_zero())
        hlam[p].col(k) = hamiltonian_grad(sys, args, Arg::Lambda, pv, qv);
    }
  }

  // The psi2 term of G carries D_t H_lambda(s), which is exactly zero when
  // H_lambda is deterministic; verify that and refuse otherwise.
  if (!sys.psi2.is_zero() && P > 1) {
    double spread = 0.0, scale = 1.0;
    for (int k = 0; k <= N; ++k)
      for (int c = 0; c < m; ++c) {
        double lo = hlam[0](c, k), hi = lo;
        for (int p = 1; p < P; ++p) {
          lo = std::min(lo, hlam[p](c, k));
          hi = std::max(hi, hlam[p](c, k));
        }
        spread = std::max(spread, hi - lo);
        scale = std::max(scale, std::abs(hi));
      }
    if (spread > 1e-10 * scale)
      throw UnsupportedRegime(
          "maximum_condition: psi2 != 0 with a stochastic H_lambda needs "
          "Malliavin derivatives beyond the supported regime");
  }

  const Eigen::MatrixXd w = det ? Eigen::MatrixXd() : brownian_matrix(noise);

  MaxConditionReport rep;
  rep.G.setZero(m, N + 1);
  Eigen::MatrixXd se(m, N + 1);
  se.setZero();

  for (int k = 0; k <= N; ++k) {
    Eigen::MatrixXd future(P, m);
    for (int p = 0; p < P; ++p) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
      if (k < N - d) acc += hmu[p].col(k + d);
      // j starts at k+1: u(t_k) first enters the nu-memories at t_{k+1}
      // under the left-point convention, so the discrete stationarity
      // condition carries no diagonal term.
      for (int j = k + 1; j < N; ++j)
        acc += sys.phi2.eval_grid(g, j, k) * hnu[p].col(j) * dt;
      future.row(p) = acc.transpose();
    }
    const Eigen::MatrixXd cond =
        det ? future : Eigen::MatrixXd(regress_fitted(w.col(k), future, reg));
    Eigen::MatrixXd gk(P, m);
    for (int p = 0; p < P; ++p)
      gk.row(p) = hu[p].col(k).transpose() + cond.row(p);
    rep.G.col(k) = gk.colwise().mean().transpose();
    if (P > 1)
      for (int c = 0; c < m; ++c) {
        const double mu_c = rep.G(c, k);
        se(c, k) = std::sqrt(
            (gk.col(c).array() - mu_c).square().sum() / (P - 1.0) / P);
      }
  }

  for (int k = 0; k <= N; ++k) {
    const double a = rep.G.col(k).cwiseAbs().maxCoeff();
    rep.max_abs = std::max(rep.max_abs, a);
    if (k < N - d) rep.max_abs_interior = std::max(rep.max_abs_interior, a);
  }
  rep.stat_se = se.maxCoeff();
  return rep;
}

}  // namespace emd
