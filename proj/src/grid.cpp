// SPDX-License-Identifier: MIT

#include "emdelay/grid.hpp"

#include <cmath>
#include <random>

namespace emd {

TimeGrid make_grid(double t0, double T, int n_steps, double delta) {
  if (!(T > t0)) {
    throw InvalidHorizon("make_grid: require T > t0, got t0=" +
                         std::to_string(t0) + " T=" + std::to_string(T));
  }
  if (n_steps <= 0) {
    throw InvalidHorizon("make_grid: require n_steps > 0, got " +
                         std::to_string(n_steps));
  }
  if (delta < 0.0 || delta > T - t0) {
    throw InvalidHorizon("make_grid: require 0 <= delta <= T - t0, got " +
                         std::to_string(delta));
  }
  TimeGrid g;
  g.t0 = t0;
  g.T = T;
  g.n_steps = n_steps;
  g.dt = (T - t0) / n_steps;
  g.delta = delta;
  const double ratio = delta / g.dt;
  const int d = static_cast<int>(std::llround(ratio));
  if (std::abs(delta - d * g.dt) > 1e-12 * (T - t0)) {
    throw NonCommensurateDelay(
        "make_grid: delta=" + std::to_string(delta) +
        " is not an integer multiple of dt=" + std::to_string(g.dt));
  }
  g.delay_steps = d;
  return g;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer applied to seed ^ golden-ratio-spread stream id.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

BrownianEnsemble sample_brownian(const TimeGrid& grid, int n_paths,
                                 std::uint64_t seed) {
  auto data = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n_paths) * grid.n_steps);
  const double sdt = std::sqrt(grid.dt);
  for (int p = 0; p < n_paths; ++p) {
    // One independent generator per path: sampling is order-independent and
    // any path can be regenerated in isolation.
    std::mt19937_64 gen(mix_seed(seed, static_cast<std::uint64_t>(p)));
    std::normal_distribution<double> normal(0.0, 1.0);
    double* row = data->data() + static_cast<std::size_t>(p) * grid.n_steps;
    for (int k = 0; k < grid.n_steps; ++k) row[k] = sdt * normal(gen);
  }
  return BrownianEnsemble(grid, n_paths, seed, std::move(data));
}

void BrownianEnsemble::path_values(int p, std::vector<double>& w) const {
  w.resize(grid_.n_points());
  w[0] = 0.0;
  const double* row = path(p);
  for (int k = 0; k < grid_.n_steps; ++k) w[k + 1] = w[k] + row[k];
}

BrownianEnsemble coarsen(const BrownianEnsemble& fine, int factor) {
  const TimeGrid& fg = fine.grid();
  if (factor <= 0 || fg.n_steps % factor != 0) {
    throw InvalidHorizon("coarsen: factor must divide n_steps");
  }
  TimeGrid cg = make_grid(fg.t0, fg.T, fg.n_steps / factor, fg.delta);
  auto data = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(fine.n_paths()) * cg.n_steps);
  for (int p = 0; p < fine.n_paths(); ++p) {
    const double* row = fine.path(p);
    double* out = data->data() + static_cast<std::size_t>(p) * cg.n_steps;
    for (int k = 0; k < cg.n_steps; ++k) {
      double s = 0.0;
      for (int j = 0; j < factor; ++j) s += row[k * factor + j];
      out[k] = s;
    }
  }
  return BrownianEnsemble(cg, fine.n_paths(), fine.seed(), std::move(data));
}

}  // namespace emd
