// SPDX-License-Identifier: MIT
//
// Python bindings for the main operations: grids and Brownian ensembles,
// kernels and the E1 field, forward simulation / cost evaluation, the LQ
// closed form with its verification, and the Clark-Ocone check.  Structured
// inputs reuse the JSON config records of the CLI.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "emdelay/config.hpp"

namespace py = pybind11;
using namespace emd;

namespace {

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

Eigen::MatrixXd increments(const BrownianEnsemble& noise) {
  const int P = noise.n_paths(), N = noise.grid().n_steps;
  Eigen::MatrixXd out(P, N);
  for (int p = 0; p < P; ++p)
    for (int k = 0; k < N; ++k) out(p, k) = noise.dw(p, k);
  return out;
}

}  // namespace

PYBIND11_MODULE(_emdelay, m) {
  m.doc() = "Delay-system simulation, adjoints and optimality checks";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<UnsupportedRegime>(m, "UnsupportedRegime");
  py::register_exception<NonCommensurateDelay>(m, "NonCommensurateDelay");
  py::register_exception<InvalidHorizon>(m, "InvalidHorizon");

  py::class_<TimeGrid>(m, "TimeGrid")
      .def_readonly("t0", &TimeGrid::t0)
      .def_readonly("T", &TimeGrid::T)
      .def_readonly("n_steps", &TimeGrid::n_steps)
      .def_readonly("dt", &TimeGrid::dt)
      .def_readonly("delta", &TimeGrid::delta)
      .def_readonly("delay_steps", &TimeGrid::delay_steps)
      .def("time", &TimeGrid::time)
      .def("n_points", &TimeGrid::n_points);

  m.def("make_grid", &make_grid, py::arg("t0"), py::arg("T"),
        py::arg("n_steps"), py::arg("delta"));

  m.def(
      "brownian_increments",
      [](const TimeGrid& grid, int n_paths, std::uint64_t seed) {
        return increments(sample_brownian(grid, n_paths, seed));
      },
      py::arg("grid"), py::arg("n_paths"), py::arg("seed"),
      "Seeded ensemble of Brownian increments, shape (n_paths, n_steps)");

  m.def(
      "kernel_eval",
      [](const std::string& kernel_json, double t, double s, double t0,
         double T) {
        return kernel_from_json(parse(kernel_json)).eval(t, s, t0, T);
      },
      py::arg("kernel_json"), py::arg("t"), py::arg("s"), py::arg("t0"),
      py::arg("T"));

  m.def(
      "e1_field",
      [](const std::string& kernel_json, const TimeGrid& grid) {
        return build_e1(kernel_from_json(parse(kernel_json)), grid).values;
      },
      py::arg("kernel_json"), py::arg("grid"),
      "E1(t_k, t_j) as a lower-triangular (n_points x n_points) array");

  m.def(
      "lq_closed_form",
      [](const std::string& spec_json, const TimeGrid& grid) {
        return lq_closed_form(lq_from_json(parse(spec_json), grid));
      },
      py::arg("spec_json"), py::arg("grid"));

  m.def(
      "lq_benchmark_closed_form",
      [](const TimeGrid& grid) {
        return lq_closed_form(LqSpec::benchmark(grid));
      },
      py::arg("grid"));

  m.def(
      "lq_verify",
      [](const std::string& spec_json, const TimeGrid& grid, int n_paths,
         std::uint64_t seed) {
        const LqSpec spec = lq_from_json(parse(spec_json), grid);
        const LqVerifyReport r =
            lq_verify_optimality(spec, sample_brownian(grid, n_paths, seed));
        py::dict d;
        d["pass"] = r.pass;
        d["j_star"] = r.j_star;
        d["j_affine"] = r.j_affine;
        d["j_gap"] = r.j_gap;
        d["j_gap_std_error"] = r.j_gap_se;
        d["stationarity_residual"] = r.stationarity.max_abs_interior;
        d["u_star"] = r.u_star;
        return d;
      },
      py::arg("spec_json"), py::arg("grid"), py::arg("n_paths"),
      py::arg("seed"));

  m.def(
      "cost",
      [](const std::string& config_json, const TimeGrid& grid, int n_paths,
         std::uint64_t seed) {
        const Json cfg = parse(config_json);
        const std::string type =
            cfg.at("system").value("type", std::string("linear"));
        DelaySystem sys;
        ControlProcess u;
        if (type == "lq") {
          const LqSpec spec = lq_from_json(cfg.at("system"), grid);
          sys = spec.to_system();
          u = cfg.contains("control")
                  ? control_from_json(cfg["control"], grid)
                  : spec.control_from(lq_closed_form(spec));
        } else {
          sys = linear_system_from_json(cfg.at("system"), grid);
          u = cfg.contains("control") ? control_from_json(cfg["control"], grid)
                                      : ControlProcess::constant(0.0, grid, 1);
        }
        const McEstimate j =
            evaluate_cost(sys, u, sample_brownian(grid, n_paths, seed));
        return py::make_tuple(j.mean, j.std_error);
      },
      py::arg("config_json"), py::arg("grid"), py::arg("n_paths"),
      py::arg("seed"),
      "Monte Carlo cost (mean, std_error) of a config's system + control");

  m.def(
      "clark_ocone_wT_squared",
      [](const TimeGrid& grid, int n_paths, std::uint64_t seed) {
        const PathFunctional F = [](const double* dw, int n) {
          double w = 0.0;
          for (int k = 0; k < n; ++k) w += dw[k];
          return w * w;
        };
        const ClarkOconeReport r =
            clark_ocone_check(F, sample_brownian(grid, n_paths, seed));
        py::dict d;
        d["pass"] = r.pass();
        d["rel_l2_error"] = r.rel_l2_error;
        d["isometry_lhs"] = r.isometry_lhs;
        d["isometry_rhs"] = r.isometry_rhs;
        return d;
      },
      py::arg("grid"), py::arg("n_paths"), py::arg("seed"));
}
