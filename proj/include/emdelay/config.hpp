// SPDX-License-Identifier: MIT
//
// JSON run configurations shared by the CLI and the python bindings, plus
// tidy CSV emission for plot data.  Configs are plain records:
//
//   {
//     "grid":   {"t0": 0.0, "T": 1.0, "steps": 100, "delta": 0.1},
//     "mc":     {"paths": 10000, "seed": 42},
//     "system": {"type": "lq" | "game" | "linear", ...}
//   }
//
// Kernels are tagged records, e.g. {"form": "exponential", "c": 1.0,
// "lambda": -0.5}.  Scalar coefficients are numbers.

#pragma once

#include <string>

#include "emdelay/lq.hpp"
#include "json.hpp"

namespace emd {

using Json = nlohmann::json;

// Parse/validation failures carrying the offending field name.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json load_json(const std::string& path);

struct McConfig {
  int paths = 1000;
  std::uint64_t seed = 1;
};

TimeGrid grid_from_json(const Json& j);
McConfig mc_from_json(const Json& j);
KernelSpec kernel_from_json(const Json& j);

LqSpec lq_from_json(const Json& j, const TimeGrid& grid);
GameSpec game_from_json(const Json& j, const TimeGrid& grid);

// Scalar (n = m = 1) linear system record with constant coefficients:
//   "drift"/"diffusion": {"x":..,"y":..,"z":..,"kappa":..,
//                         "u":..,"mu":..,"nu":..,"lambda":..,"affine":..},
//   "cost": same keys (running-cost row), "terminal": state keys,
//   "kernels": {"phi1":{...},"psi1":{...},"phi2":{...},"psi2":{...}},
//   "x0": number.
DelaySystem linear_system_from_json(const Json& j, const TimeGrid& grid);

// {"type":"constant","value":v} or {"type":"affine","a":a,"b":b} for
// u(t) = a + b t; "initial" (default 0) is the segment value on
// [t0 - delta, t0).
ControlProcess control_from_json(const Json& j, const TimeGrid& grid);

// Long-format plot data: one CSV row per (series, x) point with the header
// series,x,y,y_stderr.
struct Series {
  std::string name;
  std::vector<double> x, y, y_stderr;
};
void write_plot_csv(const std::string& path, const std::vector<Series>& data);

void write_json(const std::string& path, const Json& report);

}  // namespace emd
