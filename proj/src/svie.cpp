// SPDX-License-Identifier: MIT

#include "emdelay/svie.hpp"

#include <cmath>

namespace emd {

namespace {

StateArgs args_at(const StateTrajectory& traj, const TimeGrid& g, int k) {
  StateArgs a;
  a.t = g.time(k);
  a.x = traj.x.col(k);
  a.y = traj.y.col(k);
  a.z = traj.z.col(k);
  a.kappa = traj.kappa.col(k);
  a.u = traj.u.col(k);
  a.mu = traj.mu.col(k);
  a.nu = traj.nu.col(k);
  a.lambda = traj.lambda.col(k);
  return a;
}

}  // namespace

Linearization linearize(const DelaySystem& sys,
                        const StateTrajectory& nominal) {
  const TimeGrid& g = sys.grid;
  const int np = g.n_points();
  Linearization L;
  L.grid = g;
  L.n = sys.n;
  L.m = sys.m;
  auto resv = [&](auto& v) { v.resize(np); };
  resv(L.bx); resv(L.by); resv(L.bz); resv(L.bk);
  resv(L.bu); resv(L.bmu); resv(L.bnu); resv(L.bl);
  resv(L.sx); resv(L.sy); resv(L.sz); resv(L.sk);
  resv(L.su); resv(L.smu); resv(L.snu); resv(L.sl);
  resv(L.lx); resv(L.ly); resv(L.lz); resv(L.lk);
  resv(L.lu); resv(L.lmu); resv(L.lnu); resv(L.ll);
  for (int k = 0; k < np; ++k) {
    const StateArgs a = args_at(nominal, g, k);
    L.bx[k] = sys.drift.deriv(Arg::X, a, sys.n);
    L.by[k] = sys.drift.deriv(Arg::Y, a, sys.n);
    L.bz[k] = sys.drift.deriv(Arg::Z, a, sys.n);
    L.bk[k] = sys.drift.deriv(Arg::Kappa, a, sys.n);
    L.bu[k] = sys.drift.deriv(Arg::U, a, sys.n);
    L.bmu[k] = sys.drift.deriv(Arg::Mu, a, sys.n);
    L.bnu[k] = sys.drift.deriv(Arg::Nu, a, sys.n);
    L.bl[k] = sys.drift.deriv(Arg::Lambda, a, sys.n);
    L.sx[k] = sys.diffusion.deriv(Arg::X, a, sys.n);
    L.sy[k] = sys.diffusion.deriv(Arg::Y, a, sys.n);
    L.sz[k] = sys.diffusion.deriv(Arg::Z, a, sys.n);
    L.sk[k] = sys.diffusion.deriv(Arg::Kappa, a, sys.n);
    L.su[k] = sys.diffusion.deriv(Arg::U, a, sys.n);
    L.smu[k] = sys.diffusion.deriv(Arg::Mu, a, sys.n);
    L.snu[k] = sys.diffusion.deriv(Arg::Nu, a, sys.n);
    L.sl[k] = sys.diffusion.deriv(Arg::Lambda, a, sys.n);
    L.lx[k] = sys.running_cost.grad(Arg::X, a, sys.n);
    L.ly[k] = sys.running_cost.grad(Arg::Y, a, sys.n);
    L.lz[k] = sys.running_cost.grad(Arg::Z, a, sys.n);
    L.lk[k] = sys.running_cost.grad(Arg::Kappa, a, sys.n);
    L.lu[k] = sys.running_cost.grad(Arg::U, a, sys.m);
    L.lmu[k] = sys.running_cost.grad(Arg::Mu, a, sys.m);
    L.lnu[k] = sys.running_cost.grad(Arg::Nu, a, sys.m);
    L.ll[k] = sys.running_cost.grad(Arg::Lambda, a, sys.m);
  }
  const int N = g.n_steps;
  L.hx = sys.terminal_cost.grad(Arg::X, nominal.x.col(N), nominal.y.col(N),
                                nominal.z.col(N), nominal.kappa.col(N));
  L.hy = sys.terminal_cost.grad(Arg::Y, nominal.x.col(N), nominal.y.col(N),
                                nominal.z.col(N), nominal.kappa.col(N));
  L.hz = sys.terminal_cost.grad(Arg::Z, nominal.x.col(N), nominal.y.col(N),
                                nominal.z.col(N), nominal.kappa.col(N));
  L.hk = sys.terminal_cost.grad(Arg::Kappa, nominal.x.col(N),
                                nominal.y.col(N), nominal.z.col(N),
                                nominal.kappa.col(N));
  L.deterministic = sys.drift.is_linear() && sys.diffusion.is_linear() &&
                    sys.running_cost.is_linear() &&
                    sys.terminal_cost.is_linear();
  return L;
}

VariationalPath simulate_variational(const DelaySystem& sys,
                                     const StateTrajectory& nominal,
                                     const Eigen::MatrixXd& v,
                                     const double* dw) {
  const TimeGrid& g = sys.grid;
  const int np = g.n_points();
  const int d = g.delay_steps;
  const int n = sys.n, m = sys.m;
  VariationalPath out;
  out.xhat.setZero(n, np);
  out.yhat.setZero(n, np);
  out.zhat.setZero(n, np);
  out.khat.setZero(n, np);
  out.vnu.setZero(m, np);
  out.vlam.setZero(m, np);

  MemoryAccumulator mz(&sys.phi1, &g, n), mk(&sys.psi1, &g, n);
  MemoryAccumulator mn(&sys.phi2, &g, m), ml(&sys.psi2, &g, m);

  for (int k = 0; k < np; ++k) {
    out.yhat.col(k) =
        (k < d) ? Eigen::VectorXd::Zero(n) : Eigen::VectorXd(out.xhat.col(k - d));
    out.zhat.col(k) = mz.value(k);
    out.khat.col(k) = mk.value(k);
    out.vnu.col(k) = mn.value(k);
    out.vlam.col(k) = ml.value(k);
    if (k == g.n_steps) break;

    const StateArgs a = args_at(nominal, g, k);
    // v(t - delta) = 0 for t < t0 + delta (direction vanishes on the
    // initial segment).
    const Eigen::VectorXd vk = v.col(k);
    const Eigen::VectorXd vmu =
        (k < d) ? Eigen::VectorXd::Zero(m) : Eigen::VectorXd(v.col(k - d));

    Eigen::VectorXd db =
        sys.drift.deriv(Arg::X, a, n) * out.xhat.col(k) +
        sys.drift.deriv(Arg::Y, a, n) * out.yhat.col(k) +
        sys.drift.deriv(Arg::Z, a, n) * out.zhat.col(k) +
        sys.drift.deriv(Arg::Kappa, a, n) * out.khat.col(k) +
        sys.drift.deriv(Arg::U, a, n) * vk +
        sys.drift.deriv(Arg::Mu, a, n) * vmu +
        sys.drift.deriv(Arg::Nu, a, n) * out.vnu.col(k) +
        sys.drift.deriv(Arg::Lambda, a, n) * out.vlam.col(k);
    Eigen::VectorXd ds =
        sys.diffusion.deriv(Arg::X, a, n) * out.xhat.col(k) +
        sys.diffusion.deriv(Arg::Y, a, n) * out.yhat.col(k) +
        sys.diffusion.deriv(Arg::Z, a, n) * out.zhat.col(k) +
        sys.diffusion.deriv(Arg::Kappa, a, n) * out.khat.col(k) +
        sys.diffusion.deriv(Arg::U, a, n) * vk +
        sys.diffusion.deriv(Arg::Mu, a, n) * vmu +
        sys.diffusion.deriv(Arg::Nu, a, n) * out.vnu.col(k) +
        sys.diffusion.deriv(Arg::Lambda, a, n) * out.vlam.col(k);

    out.xhat.col(k + 1) = out.xhat.col(k) + db * g.dt + ds * dw[k];
    mz.push(k, out.xhat.col(k), g.dt);
    mk.push(k, out.xhat.col(k), dw[k]);
    mn.push(k, vk, g.dt);
    ml.push(k, vk, dw[k]);
  }
  return out;
}

SvieSystem assemble_svie(Linearization lin, const KernelSpec& phi1,
                         const KernelSpec& psi1, const KernelSpec& phi2,
                         const KernelSpec& psi2, const SvieOptions& options) {
  SvieSystem s;
  s.e1 = build_e1(phi1, lin.grid);
  s.lin = std::move(lin);
  s.phi1 = phi1;
  s.psi1 = psi1;
  s.phi2 = phi2;
  s.psi2 = psi2;
  s.options = options;
  return s;
}

SviePath simulate_svie(const SvieSystem& svie, const Eigen::MatrixXd& v,
                       const double* dw, bool with_phi) {
  const Linearization& L = svie.lin;
  const TimeGrid& g = L.grid;
  const int np = g.n_points();
  const int d = g.delay_steps;
  const int n = L.n, m = L.m;
  SviePath out;
  out.X.setZero(4 * n, np);
  if (with_phi) out.phi.setZero(4 * n, np);

  // Forcing memories of v.
  MemoryAccumulator mn(&svie.phi2, &g, m), ml(&svie.psi2, &g, m);

  // Core increments mu_j = (A-row-core + forcing) dt + (C-row-core +
  // forcing) dW, shared by all four rows up to the row weights.
  Eigen::MatrixXd incr = Eigen::MatrixXd::Zero(n, np);      // full increment
  Eigen::MatrixXd incr_f = Eigen::MatrixXd::Zero(n, np);    // forcing only
  Eigen::VectorXd pre = Eigen::VectorXd::Zero(n);           // prefix of incr
  std::vector<Eigen::VectorXd> prefix(np + 1, Eigen::VectorXd::Zero(n));
  Eigen::VectorXd pre_f = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> prefix_f(np + 1, Eigen::VectorXd::Zero(n));

  std::vector<double> e2row;
  const bool has_psi1 = !svie.psi1.is_zero();

  for (int k = 0; k < np; ++k) {
    // Row 1: plain prefix.  Row 2: prefix cut at the delay indicator.
    out.X.block(0, k, n, 1) = prefix[k];
    int cut = svie.options.strict_delay_indicator ? k - d : k - d + 1;
    if (d == 0 && svie.options.strict_delay_indicator) cut = k;  // t-s>0
    cut = std::min(cut, k);
    out.X.block(n, k, n, 1) = (cut > 0) ? prefix[cut] : Eigen::VectorXd::Zero(n);
    // Rows 3, 4: kernel-weighted sums, one t-row at a time.
    Eigen::VectorXd r3 = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd r4 = Eigen::VectorXd::Zero(n);
    if (has_psi1) build_e2_row(svie.psi1, g, dw, k, e2row);
    for (int j = 0; j < k; ++j) {
      r3 += svie.e1(k, j) * incr.col(j);
      // The x-increment over [t_j, t_{j+1}) only reaches the noisy memory
      // through the Ito sums strictly after t_j, so the E2 weight starts at
      // t_{j+1}; including the t_j increment would pair sigma dW_j with
      // psi1 dW_j and leave an O(1) quadratic-covariation bias.
      if (has_psi1) r4 += e2row[j + 1] * incr.col(j);
    }
    out.X.block(2 * n, k, n, 1) = r3;
    out.X.block(3 * n, k, n, 1) = r4;

    if (with_phi) {
      out.phi.block(0, k, n, 1) = prefix_f[k];
      out.phi.block(n, k, n, 1) =
          (cut > 0) ? prefix_f[cut] : Eigen::VectorXd::Zero(n);
      Eigen::VectorXd f3 = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd f4 = Eigen::VectorXd::Zero(n);
      for (int j = 0; j < k; ++j) {
        f3 += svie.e1(k, j) * incr_f.col(j);
        if (has_psi1) f4 += e2row[j + 1] * incr_f.col(j);
      }
      out.phi.block(2 * n, k, n, 1) = f3;
      out.phi.block(3 * n, k, n, 1) = f4;
    }
    if (k == g.n_steps) break;

    const Eigen::VectorXd vk = v.col(k);
    const Eigen::VectorXd vmu =
        (k < d) ? Eigen::VectorXd::Zero(m) : Eigen::VectorXd(v.col(k - d));
    const Eigen::VectorXd& vnu = mn.value(k);
    const Eigen::VectorXd& vlam_k = ml.value(k);
    const Eigen::VectorXd fb = L.bu[k] * vk + L.bmu[k] * vmu +
                               L.bnu[k] * vnu + L.bl[k] * vlam_k;
    const Eigen::VectorXd fs = L.su[k] * vk + L.smu[k] * vmu +
                               L.snu[k] * vnu + L.sl[k] * vlam_k;
    const Eigen::VectorXd a = L.bx[k] * out.X.block(0, k, n, 1) +
                              L.by[k] * out.X.block(n, k, n, 1) +
                              L.bz[k] * out.X.block(2 * n, k, n, 1) +
                              L.bk[k] * out.X.block(3 * n, k, n, 1);
    const Eigen::VectorXd c = L.sx[k] * out.X.block(0, k, n, 1) +
                              L.sy[k] * out.X.block(n, k, n, 1) +
                              L.sz[k] * out.X.block(2 * n, k, n, 1) +
                              L.sk[k] * out.X.block(3 * n, k, n, 1);
    incr.col(k) = (a + fb) * g.dt + (c + fs) * dw[k];
    incr_f.col(k) = fb * g.dt + fs * dw[k];
    pre += incr.col(k);
    prefix[k + 1] = pre;
    pre_f += incr_f.col(k);
    prefix_f[k + 1] = pre_f;

    mn.push(k, vk, g.dt);
    ml.push(k, vk, dw[k]);
  }
  return out;
}

std::vector<double> expansion_gap(const DelaySystem& sys,
                                  const ControlProcess& u_star,
                                  const Eigen::MatrixXd& v,
                                  const BrownianEnsemble& noise,
                                  const std::vector<double>& rhos) {
  const int P = noise.n_paths();
  ForwardSimulator base(sys, u_star);
  std::vector<ControlProcess> pert;
  std::vector<ForwardSimulator> psim;
  pert.reserve(rhos.size());
  for (double rho : rhos) pert.push_back(u_star.perturbed(v, rho));
  psim.reserve(rhos.size());
  for (auto& c : pert) psim.emplace_back(sys, c);

  std::vector<double> gaps(rhos.size(), 0.0);
  StateTrajectory star, rho_traj;
  for (int p = 0; p < P; ++p) {
    const double* dw = noise.path(p);
    base.run_path(dw, star);
    const VariationalPath var = simulate_variational(sys, star, v, dw);
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      psim[r].run_path(dw, rho_traj);
      double sup = 0.0;
      for (int k = 0; k < sys.grid.n_points(); ++k) {
        const double d2 =
            ((rho_traj.x.col(k) - star.x.col(k)) / rhos[r] - var.xhat.col(k))
                .squaredNorm();
        sup = std::max(sup, d2);
      }
      gaps[r] += sup;
    }
  }
  for (double& gp : gaps) gp /= P;
  return gaps;
}

double svie_equivalence_gap(const DelaySystem& sys,
                            const ControlProcess& u_star,
                            const Eigen::MatrixXd& v,
                            const BrownianEnsemble& noise,
                            const SvieOptions& options) {
  const int P = noise.n_paths();
  ForwardSimulator base(sys, u_star);
  StateTrajectory star;
  double acc = 0.0;
  bool assembled = false;
  SvieSystem svie;
  for (int p = 0; p < P; ++p) {
    const double* dw = noise.path(p);
    base.run_path(dw, star);
    if (!assembled || !(sys.drift.is_linear() && sys.diffusion.is_linear())) {
      svie = assemble_svie(linearize(sys, star), sys.phi1, sys.psi1, sys.phi2,
                           sys.psi2, options);
      assembled = true;
    }
    const VariationalPath var = simulate_variational(sys, star, v, dw);
    const SviePath sp = simulate_svie(svie, v, dw);
    double sup = 0.0;
    for (int k = 0; k < sys.grid.n_points(); ++k) {
      sup = std::max(sup, (sp.X.block(0, k, sys.n, 1) - var.xhat.col(k))
                              .squaredNorm());
    }
    acc += sup;
  }
  return std::sqrt(acc / P);
}

}  // namespace emd
