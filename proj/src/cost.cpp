// SPDX-License-Identifier: MIT

#include "emdelay/cost.hpp"

#include <cmath>
#include <random>

namespace emd {

namespace {

McEstimate stats(const std::vector<double>& samples) {
  McEstimate e;
  e.n_paths = static_cast<int>(samples.size());
  double s = 0.0;
  for (double v : samples) s += v;
  e.mean = s / e.n_paths;
  double var = 0.0;
  for (double v : samples) var += (v - e.mean) * (v - e.mean);
  var /= std::max(1, e.n_paths - 1);
  e.std_error = std::sqrt(var / e.n_paths);
  return e;
}

}  // namespace

double path_cost(const DelaySystem& sys, const StateTrajectory& traj) {
  const TimeGrid& g = sys.grid;
  double acc = 0.0;
  StateArgs a;
  for (int k = 0; k < g.n_steps; ++k) {
    a.t = g.time(k);
    a.x = traj.x.col(k);
    a.y = traj.y.col(k);
    a.z = traj.z.col(k);
    a.kappa = traj.kappa.col(k);
    a.u = traj.u.col(k);
    a.mu = traj.mu.col(k);
    a.nu = traj.nu.col(k);
    a.lambda = traj.lambda.col(k);
    acc += sys.running_cost.eval(a) * g.dt;
  }
  const int N = g.n_steps;
  acc += sys.terminal_cost.eval(traj.x.col(N), traj.y.col(N), traj.z.col(N),
                                traj.kappa.col(N));
  return acc;
}

McEstimate evaluate_cost(const DelaySystem& sys, const ControlProcess& control,
                         const BrownianEnsemble& noise) {
  ForwardSimulator sim(sys, control);
  StateTrajectory traj;
  std::vector<double> samples(noise.n_paths());
  for (int p = 0; p < noise.n_paths(); ++p) {
    sim.run_path(noise.path(p), traj);
    samples[p] = path_cost(sys, traj);
  }
  return stats(samples);
}

McEstimate cost_difference(const DelaySystem& sys, const ControlProcess& u1,
                           const ControlProcess& u2,
                           const BrownianEnsemble& noise) {
  ForwardSimulator s1(sys, u1), s2(sys, u2);
  StateTrajectory t1, t2;
  std::vector<double> samples(noise.n_paths());
  for (int p = 0; p < noise.n_paths(); ++p) {
    s1.run_path(noise.path(p), t1);
    s2.run_path(noise.path(p), t2);
    samples[p] = path_cost(sys, t2) - path_cost(sys, t1);
  }
  return stats(samples);
}

McEstimate gateaux(const DelaySystem& sys, const ControlProcess& u,
                   const Eigen::MatrixXd& v, const BrownianEnsemble& noise,
                   const GateauxOptions& opt) {
  const TimeGrid& g = sys.grid;
  const int P = noise.n_paths();
  std::vector<double> samples(P);
  if (opt.method == GateauxMethod::FiniteDifference) {
    ForwardSimulator base(sys, u);
    ControlProcess u1 = u.perturbed(v, opt.rho);
    ControlProcess u2 = u.perturbed(v, opt.rho / 2.0);
    ForwardSimulator p1(sys, u1), p2(sys, u2);
    StateTrajectory t0, t1, t2;
    for (int p = 0; p < P; ++p) {
      const double* dw = noise.path(p);
      base.run_path(dw, t0);
      const double j0 = path_cost(sys, t0);
      p1.run_path(dw, t1);
      const double d1 = (path_cost(sys, t1) - j0) / opt.rho;
      if (!opt.richardson) {
        samples[p] = d1;
        continue;
      }
      p2.run_path(dw, t2);
      const double d2 = (path_cost(sys, t2) - j0) / (opt.rho / 2.0);
      // First-order bias cancels: D(rho) = D + c rho + O(rho^2).
      samples[p] = 2.0 * d2 - d1;
    }
    return stats(samples);
  }

  // Analytic: first-order expansion of the cost functional along the
  // variational processes,
  //   dJ = E{ int [ <l_x, xhat> + ... + <l_lambda, vlam> ] dt
  //         + <h_x, xhat(T)> + ... + <h_kappa, khat(T)> }.
  ForwardSimulator base(sys, u);
  StateTrajectory star;
  const int d = g.delay_steps;
  for (int p = 0; p < P; ++p) {
    const double* dw = noise.path(p);
    base.run_path(dw, star);
    const VariationalPath var = simulate_variational(sys, star, v, dw);
    double acc = 0.0;
    StateArgs a;
    for (int k = 0; k < g.n_steps; ++k) {
      a.t = g.time(k);
      a.x = star.x.col(k);
      a.y = star.y.col(k);
      a.z = star.z.col(k);
      a.kappa = star.kappa.col(k);
      a.u = star.u.col(k);
      a.mu = star.mu.col(k);
      a.nu = star.nu.col(k);
      a.lambda = star.lambda.col(k);
      const Eigen::VectorXd vmu = (k < d) ? Eigen::VectorXd::Zero(sys.m)
                                          : Eigen::VectorXd(v.col(k - d));
      acc += (sys.running_cost.grad(Arg::X, a, sys.n).dot(var.xhat.col(k)) +
              sys.running_cost.grad(Arg::Y, a, sys.n).dot(var.yhat.col(k)) +
              sys.running_cost.grad(Arg::Z, a, sys.n).dot(var.zhat.col(k)) +
              sys.running_cost.grad(Arg::Kappa, a, sys.n).dot(var.khat.col(k)) +
              sys.running_cost.grad(Arg::U, a, sys.m).dot(v.col(k)) +
              sys.running_cost.grad(Arg::Mu, a, sys.m).dot(vmu) +
              sys.running_cost.grad(Arg::Nu, a, sys.m).dot(var.vnu.col(k)) +
              sys.running_cost.grad(Arg::Lambda, a, sys.m)
                  .dot(var.vlam.col(k))) *
             g.dt;
    }
    const int N = g.n_steps;
    auto hgrad = [&](Arg w) {
      return sys.terminal_cost.grad(w, star.x.col(N), star.y.col(N),
                                    star.z.col(N), star.kappa.col(N));
    };
    acc += hgrad(Arg::X).dot(var.xhat.col(N)) +
           hgrad(Arg::Y).dot(var.yhat.col(N)) +
           hgrad(Arg::Z).dot(var.zhat.col(N)) +
           hgrad(Arg::Kappa).dot(var.khat.col(N));
    samples[p] = acc;
  }
  return stats(samples);
}

ViReport variational_inequality_check(const DelaySystem& sys,
                                      const ControlProcess& u,
                                      const std::vector<Eigen::MatrixXd>& dirs,
                                      const BrownianEnsemble& noise,
                                      double stat_mult,
                                      const GateauxOptions& opt) {
  ViReport rep;
  for (const Eigen::MatrixXd& v : dirs) {
    const McEstimate e = gateaux(sys, u, v, noise, opt);
    DirectionVerdict d;
    d.derivative = e.mean;
    d.std_error = e.std_error;
    if (sys.orientation == Orientation::Minimize) {
      d.violated = e.mean < -stat_mult * e.std_error;
    } else {
      d.violated = e.mean > stat_mult * e.std_error;
    }
    rep.pass = rep.pass && !d.violated;
    rep.directions.push_back(d);
  }
  return rep;
}

std::vector<Eigen::MatrixXd> direction_bank(const TimeGrid& grid, int m,
                                            int count, std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> dirs;
  dirs.reserve(count);
  const int np = grid.n_points();
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 gen(mix_seed(seed, 1000 + i));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    // Random three-term trigonometric polynomial per component,
    // sup-normalized.
    Eigen::MatrixXd v(m, np);
    for (int c = 0; c < m; ++c) {
      const double a1 = unif(gen), a2 = unif(gen), a3 = unif(gen);
      const double f1 = 1.0 + 2.0 * std::floor(3.0 * (unif(gen) + 1.0) / 2.0);
      for (int k = 0; k < np; ++k) {
        const double s =
            (grid.time(k) - grid.t0) / (grid.T - grid.t0);  // in [0,1]
        v(c, k) = a1 + a2 * std::sin(3.14159265358979 * f1 * s) +
                  a3 * std::cos(3.14159265358979 * s);
      }
    }
    const double sup = v.cwiseAbs().maxCoeff();
    if (sup > 0) v /= sup;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace emd
