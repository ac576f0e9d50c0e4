// SPDX-License-Identifier: MIT

#include "emdelay/forward.hpp"

#include <cmath>

namespace emd {

void StateTrajectory::resize(int n, int m, int n_points) {
  x.setZero(n, n_points);
  y.setZero(n, n_points);
  z.setZero(n, n_points);
  kappa.setZero(n, n_points);
  u.setZero(m, n_points);
  mu.setZero(m, n_points);
  nu.setZero(m, n_points);
  lambda.setZero(m, n_points);
}

// ---------------------------------------------------------------------------
// MemoryAccumulator
// ---------------------------------------------------------------------------

MemoryAccumulator::MemoryAccumulator(const KernelSpec* kernel,
                                     const TimeGrid* grid, int dim)
    : kernel_(kernel), grid_(grid) {
  acc_ = Eigen::VectorXd::Zero(dim);
  if (kernel->is_zero()) {
    kind_ = Kind::Zero;
  } else if (kernel->form() == KernelForm::Constant) {
    kind_ = Kind::Constant;
    c_ = kernel->c();
  } else if (kernel->form() == KernelForm::Exponential) {
    kind_ = Kind::Exponential;
    c_ = kernel->c();
    decay_ = std::exp(kernel->lambda() * grid->dt);
  } else {
    kind_ = Kind::Generic;
    hist_.setZero(dim, grid->n_steps);
    weights_.assign(grid->n_steps, 0.0);
  }
}

void MemoryAccumulator::reset() {
  acc_.setZero();
  pushed_ = 0;
}

const Eigen::VectorXd& MemoryAccumulator::value(int k) {
  if (kind_ == Kind::Generic) {
    acc_.setZero();
    for (int j = 0; j < k; ++j) {
      acc_ += kernel_->eval_grid(*grid_, k, j) * weights_[j] * hist_.col(j);
    }
  }
  return acc_;
}

void MemoryAccumulator::push(int j, const Eigen::VectorXd& v, double w) {
  switch (kind_) {
    case Kind::Zero:
      break;
    case Kind::Constant:
      acc_ += (c_ * w) * v;
      break;
    case Kind::Exponential:
      // acc tracks sum_{j'<=j} c exp(lambda(t_{j+1}-t_{j'})) v w, so after
      // all pushes with j' < k, acc equals the value at t_k exactly.
      acc_ = decay_ * (acc_ + (c_ * w) * v);
      break;
    case Kind::Generic:
      hist_.col(j) = v;
      weights_[j] = w;
      break;
  }
  pushed_ = j + 1;
}

// ---------------------------------------------------------------------------
// ForwardSimulator
// ---------------------------------------------------------------------------

namespace {

// Scalar memory accumulator for the n = m = 1 fast path.
struct SMem {
  int kind = 0;  // 0 zero, 1 constant, 2 exponential, 3 generic
  double c = 0.0, decay = 1.0, acc = 0.0;
  const KernelSpec* ker = nullptr;
  const TimeGrid* g = nullptr;

  void init(const KernelSpec& k, const TimeGrid& grid) {
    ker = &k;
    g = &grid;
    acc = 0.0;
    if (k.is_zero()) {
      kind = 0;
    } else if (k.form() == KernelForm::Constant) {
      kind = 1;
      c = k.c();
    } else if (k.form() == KernelForm::Exponential) {
      kind = 2;
      c = k.c();
      decay = std::exp(k.lambda() * grid.dt);
    } else {
      kind = 3;
    }
  }
  // hist[j] = value v_j, w = per-index weights (nullptr => constant wconst).
  double value(int k, const double* hist, const double* w,
               double wconst) const {
    if (kind != 3) return acc;
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
      s += ker->eval_grid(*g, k, j) * hist[j] * (w ? w[j] : wconst);
    }
    return s;
  }
  void push(double v, double w) {
    if (kind == 1) {
      acc += c * v * w;
    } else if (kind == 2) {
      acc = decay * (acc + c * v * w);
    }
  }
};

void fill_scalar_table(const LinearCoeffs& lc, const TimeGrid& g,
                       std::vector<double>* out, Arg a) {
  const TimeMat& tm = lc.term(a);
  out->assign(g.n_points(), 0.0);
  if (tm) {
    for (int k = 0; k < g.n_points(); ++k) (*out)[k] = tm(g.time(k))(0, 0);
  }
}

}  // namespace

ForwardSimulator::ForwardSimulator(const DelaySystem& sys,
                                   const ControlProcess& control)
    : sys_(&sys), control_(&control) {
  const TimeGrid& g = sys.grid;
  scalar_fast_ = sys.n == 1 && sys.m == 1 && sys.drift.is_linear() &&
                 sys.diffusion.is_linear() && control.is_open_loop();
  if (scalar_fast_) {
    for (ScalarTab* tab : {&b_, &s_}) {
      const LinearCoeffs& lc = (tab == &b_)
                                   ? sys.drift.linear_coeffs()
                                   : sys.diffusion.linear_coeffs();
      fill_scalar_table(lc, g, &tab->x, Arg::X);
      fill_scalar_table(lc, g, &tab->y, Arg::Y);
      fill_scalar_table(lc, g, &tab->z, Arg::Z);
      fill_scalar_table(lc, g, &tab->kappa, Arg::Kappa);
      fill_scalar_table(lc, g, &tab->u, Arg::U);
      fill_scalar_table(lc, g, &tab->mu, Arg::Mu);
      fill_scalar_table(lc, g, &tab->nu, Arg::Nu);
      fill_scalar_table(lc, g, &tab->lambda, Arg::Lambda);
      tab->affine.assign(g.n_points(), 0.0);
      if (lc.affine) {
        for (int k = 0; k < g.n_points(); ++k) {
          tab->affine[k] = lc.affine(g.time(k))(0);
        }
      }
    }
  }
  const int d = g.delay_steps;
  xi_init_.assign(d + 1, 0.0);
  u_init_.assign(std::max(d, 1), 0.0);
  for (int k = 0; k <= d; ++k) {
    const double t = g.time(k) - g.delta;
    if (sys.xi) xi_init_[k] = sys.xi(t)(0);
  }
  for (int k = 0; k < d; ++k) {
    u_init_[k] = control.initial(g.time(k) - g.delta)(0);
  }
}

void ForwardSimulator::run_path(const double* dw, StateTrajectory& out) const {
  if (scalar_fast_) {
    run_path_scalar(dw, out);
  } else {
    run_path_generic(dw, out);
  }
}

void ForwardSimulator::run_path_scalar(const double* dw,
                                       StateTrajectory& out) const {
  const TimeGrid& g = sys_->grid;
  const int np = g.n_points();
  const int d = g.delay_steps;
  out.resize(1, 1, np);
  double* x = out.x.data();
  double* y = out.y.data();
  double* z = out.z.data();
  double* kp = out.kappa.data();
  double* u = out.u.data();
  double* mu = out.mu.data();
  double* nu = out.nu.data();
  double* la = out.lambda.data();
  const double* uvals = control_->values().data();

  SMem mz, mk, mn, ml;
  mz.init(sys_->phi1, g);
  mk.init(sys_->psi1, g);
  mn.init(sys_->phi2, g);
  ml.init(sys_->psi2, g);

  x[0] = xi_init_.back();  // xi(t0)
  for (int k = 0; k < np; ++k) {
    u[k] = uvals[k];
    mu[k] = (k < d) ? u_init_[k] : u[k - d];
    y[k] = (k < d) ? xi_init_[k] : x[k - d];
    z[k] = mz.value(k, x, nullptr, g.dt);
    kp[k] = mk.value(k, x, dw, 0.0);
    nu[k] = mn.value(k, u, nullptr, g.dt);
    la[k] = ml.value(k, u, dw, 0.0);
    if (k == g.n_steps) break;
    const double b = b_.affine[k] + b_.x[k] * x[k] + b_.y[k] * y[k] +
                     b_.z[k] * z[k] + b_.kappa[k] * kp[k] + b_.u[k] * u[k] +
                     b_.mu[k] * mu[k] + b_.nu[k] * nu[k] + b_.lambda[k] * la[k];
    const double s = s_.affine[k] + s_.x[k] * x[k] + s_.y[k] * y[k] +
                     s_.z[k] * z[k] + s_.kappa[k] * kp[k] + s_.u[k] * u[k] +
                     s_.mu[k] * mu[k] + s_.nu[k] * nu[k] + s_.lambda[k] * la[k];
    x[k + 1] = x[k] + b * g.dt + s * dw[k];
    mz.push(x[k], g.dt);
    mk.push(x[k], dw[k]);
    mn.push(u[k], g.dt);
    ml.push(u[k], dw[k]);
  }
}

void ForwardSimulator::run_path_generic(const double* dw,
                                        StateTrajectory& out) const {
  const TimeGrid& g = sys_->grid;
  const int np = g.n_points();
  const int d = g.delay_steps;
  const int n = sys_->n, m = sys_->m;
  out.resize(n, m, np);

  // W values for adapted controls.
  std::vector<double> w(np, 0.0);
  for (int k = 0; k < g.n_steps; ++k) w[k + 1] = w[k] + dw[k];

  MemoryAccumulator mz(&sys_->phi1, &g, n), mk(&sys_->psi1, &g, n);
  MemoryAccumulator mn(&sys_->phi2, &g, m), ml(&sys_->psi2, &g, m);

  StateArgs args;
  args.resize(n, m);

  out.x.col(0) = sys_->xi ? sys_->xi(g.t0) : Eigen::VectorXd::Zero(n);
  for (int k = 0; k < np; ++k) {
    args.t = g.time(k);
    out.u.col(k) = control_->at(k, w.data(), k + 1);
    out.mu.col(k) = (k < d) ? control_->initial(g.time(k) - g.delta)
                            : Eigen::VectorXd(out.u.col(k - d));
    if (k < d) {
      out.y.col(k) =
          sys_->xi ? sys_->xi(g.time(k) - g.delta) : Eigen::VectorXd::Zero(n);
    } else {
      out.y.col(k) = out.x.col(k - d);
    }
    out.z.col(k) = mz.value(k);
    out.kappa.col(k) = mk.value(k);
    out.nu.col(k) = mn.value(k);
    out.lambda.col(k) = ml.value(k);
    if (k == g.n_steps) break;

    args.x = out.x.col(k);
    args.y = out.y.col(k);
    args.z = out.z.col(k);
    args.kappa = out.kappa.col(k);
    args.u = out.u.col(k);
    args.mu = out.mu.col(k);
    args.nu = out.nu.col(k);
    args.lambda = out.lambda.col(k);

    const Eigen::VectorXd b = sys_->drift.eval(args, n);
    const Eigen::VectorXd s = sys_->diffusion.eval(args, n);
    out.x.col(k + 1) = out.x.col(k) + b * g.dt + s * dw[k];

    mz.push(k, out.x.col(k), g.dt);
    mk.push(k, out.x.col(k), dw[k]);
    mn.push(k, out.u.col(k), g.dt);
    ml.push(k, out.u.col(k), dw[k]);
  }
}

std::vector<StateTrajectory> simulate(const DelaySystem& sys,
                                      const ControlProcess& control,
                                      const BrownianEnsemble& noise) {
  ForwardSimulator sim(sys, control);
  std::vector<StateTrajectory> out(noise.n_paths());
  for (int p = 0; p < noise.n_paths(); ++p) {
    sim.run_path(noise.path(p), out[p]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

namespace {

// Rebuild y, z, kappa consistently from traj.x (used between Picard sweeps).
void refresh_state_memories(const DelaySystem& sys, const double* dw,
                            StateTrajectory& traj) {
  const TimeGrid& g = sys.grid;
  const int d = g.delay_steps;
  MemoryAccumulator mz(&sys.phi1, &g, sys.n), mk(&sys.psi1, &g, sys.n);
  for (int k = 0; k < g.n_points(); ++k) {
    if (k < d) {
      traj.y.col(k) =
          sys.xi ? sys.xi(g.time(k) - g.delta) : Eigen::VectorXd::Zero(sys.n);
    } else {
      traj.y.col(k) = traj.x.col(k - d);
    }
    traj.z.col(k) = mz.value(k);
    traj.kappa.col(k) = mk.value(k);
    if (k == g.n_steps) break;
    mz.push(k, traj.x.col(k), g.dt);
    mk.push(k, traj.x.col(k), dw[k]);
  }
}

}  // namespace

std::vector<double> PicardReport::ratios() const {
  std::vector<double> r;
  for (std::size_t i = 1; i < gaps.size(); ++i) r.push_back(gaps[i] / gaps[i - 1]);
  return r;
}

PicardReport picard_solve(const DelaySystem& sys, const ControlProcess& control,
                          const BrownianEnsemble& noise,
                          const PicardOptions& opt,
                          std::vector<StateTrajectory>* out) {
  const TimeGrid& g = sys.grid;
  const double L = opt.L;
  const double Lh = opt.L_hat;
  const double Lb = opt.L_bar < 0.0 ? opt.L : opt.L_bar;
  PicardReport rep;
  rep.beta = 16.0 * L * L * (1.0 + Lh + 2.0 * Lb * Lb * g.T) + 1.0;

  const int P = noise.n_paths();
  const int np = g.n_points();
  std::vector<StateTrajectory> cur(P);

  // Iterate 0: constant state xi(t0); exogenous control arguments are filled
  // once by a zero-diffusion/zero-drift run and never change.
  {
    DelaySystem frozen = sys;
    LinearCoeffs zero;
    frozen.drift = VectorCoefficient::linear(zero);
    frozen.diffusion = VectorCoefficient::linear(zero);
    ForwardSimulator sim(frozen, control);
    for (int p = 0; p < P; ++p) {
      sim.run_path(noise.path(p), cur[p]);
      refresh_state_memories(sys, noise.path(p), cur[p]);
    }
  }

  StateArgs args;
  args.resize(sys.n, sys.m);
  std::vector<StateTrajectory> next = cur;

  for (int it = 0; it < opt.max_iter; ++it) {
    double gap2 = 0.0;
    for (int p = 0; p < P; ++p) {
      const double* dw = noise.path(p);
      const StateTrajectory& prev = cur[p];
      StateTrajectory& nxt = next[p];
      nxt.x.col(0) = prev.x.col(0);
      for (int k = 0; k < g.n_steps; ++k) {
        args.t = g.time(k);
        args.x = prev.x.col(k);
        args.y = prev.y.col(k);
        args.z = prev.z.col(k);
        args.kappa = prev.kappa.col(k);
        args.u = prev.u.col(k);
        args.mu = prev.mu.col(k);
        args.nu = prev.nu.col(k);
        args.lambda = prev.lambda.col(k);
        nxt.x.col(k + 1) = nxt.x.col(k) + sys.drift.eval(args, sys.n) * g.dt +
                           sys.diffusion.eval(args, sys.n) * dw[k];
      }
      double acc = 0.0;
      for (int k = 0; k < np; ++k) {
        acc += std::exp(-rep.beta * g.time(k)) *
               (nxt.x.col(k) - prev.x.col(k)).squaredNorm() * g.dt;
      }
      gap2 += acc;
    }
    rep.gaps.push_back(std::sqrt(gap2 / P));
    rep.iterations = it + 1;
    for (int p = 0; p < P; ++p) {
      cur[p].x = next[p].x;
      cur[p].u = next[p].u;
      cur[p].mu = next[p].mu;
      cur[p].nu = next[p].nu;
      cur[p].lambda = next[p].lambda;
      refresh_state_memories(sys, noise.path(p), cur[p]);
    }
    if (rep.gaps.back() <= opt.tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged) {
    throw NoConvergence("picard_solve: gap " +
                        std::to_string(rep.gaps.back()) + " > tol after " +
                        std::to_string(rep.iterations) + " iterations");
  }
  if (out) *out = std::move(cur);
  return rep;
}

}  // namespace emd
