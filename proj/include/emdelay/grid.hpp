// SPDX-License-Identifier: MIT
//
// Uniform time grids with a commensurate delay, and seeded Brownian
// increment ensembles.  All downstream schemes (Euler-Maruyama, left-point
// quadrature, left-point Ito sums) consume increments, never path values,
// so the ensemble stores the increments dW(p,k) = W(t_{k+1}) - W(t_k).

#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace emd {

// Thrown by make_grid when delta is not an integer multiple of dt
// (tolerance 1e-12 * (T - t0)).
struct NonCommensurateDelay : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown by make_grid when T <= t0, n_steps <= 0, or delta < 0 or
// delta > T - t0.
struct InvalidHorizon : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TimeGrid {
  double t0 = 0.0;
  double T = 1.0;
  int n_steps = 0;      // number of intervals; grid points are 0..n_steps
  double dt = 0.0;
  double delta = 0.0;   // the delay
  int delay_steps = 0;  // delta / dt, exact integer

  double time(int k) const { return t0 + k * dt; }
  int n_points() const { return n_steps + 1; }
};

TimeGrid make_grid(double t0, double T, int n_steps, double delta);

// splitmix64 mixing used to derive one independent stream per path from
// (seed, path index); path streams do not depend on sampling order.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

class BrownianEnsemble {
 public:
  BrownianEnsemble() = default;
  BrownianEnsemble(TimeGrid grid, int n_paths, std::uint64_t seed,
                   std::shared_ptr<const std::vector<double>> increments)
      : grid_(grid), n_paths_(n_paths), seed_(seed),
        increments_(std::move(increments)) {}

  const TimeGrid& grid() const { return grid_; }
  int n_paths() const { return n_paths_; }
  std::uint64_t seed() const { return seed_; }

  double dw(int path, int k) const {
    return (*increments_)[static_cast<std::size_t>(path) * grid_.n_steps + k];
  }
  // Pointer to the n_steps increments of one path.
  const double* path(int p) const {
    return increments_->data() + static_cast<std::size_t>(p) * grid_.n_steps;
  }
  // Fills w[k] = W(t_k), k = 0..n_steps, with W(t_0) = 0.
  void path_values(int p, std::vector<double>& w) const;

  // A view sharing the identical increments (common random numbers).
  BrownianEnsemble paired() const { return *this; }

  std::shared_ptr<const std::vector<double>> storage() const {
    return increments_;
  }

 private:
  TimeGrid grid_;
  int n_paths_ = 0;
  std::uint64_t seed_ = 0;
  std::shared_ptr<const std::vector<double>> increments_;
};

BrownianEnsemble sample_brownian(const TimeGrid& grid, int n_paths,
                                 std::uint64_t seed);

// Sum consecutive groups of `factor` increments onto the coarser grid with
// n_steps/factor intervals.  Used by refinement studies so that all dt
// levels share one underlying noise.
BrownianEnsemble coarsen(const BrownianEnsemble& fine, int factor);

}  // namespace emd
