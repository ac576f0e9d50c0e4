// SPDX-License-Identifier: MIT

#include "emdelay/config.hpp"

#include <fstream>

namespace emd {
namespace {

const Json& req(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end())
    throw ConfigError(std::string("missing required field '") + field + "'");
  return *it;
}

double num(const Json& j, const char* field) {
  const Json& v = req(j, field);
  if (!v.is_number())
    throw ConfigError(std::string("field '") + field + "' must be a number");
  return v.get<double>();
}

double num_or(const Json& j, const char* field, double fallback) {
  auto it = j.find(field);
  if (it == j.end()) return fallback;
  if (!it->is_number())
    throw ConfigError(std::string("field '") + field + "' must be a number");
  return it->get<double>();
}

TimeFn fn_or(const Json& j, const char* field, double fallback) {
  const double v = num_or(j, field, fallback);
  return [v](double) { return v; };
}

KernelSpec kernel_or_zero(const Json& j, const char* field) {
  auto it = j.find(field);
  return it == j.end() ? KernelSpec::zero() : kernel_from_json(*it);
}

TimeMat cmat(const Json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) return const_mat(Eigen::MatrixXd());
  if (!it->is_number())
    throw ConfigError(std::string("field '") + field + "' must be a number");
  return const_scalar_mat(it->get<double>());
}

LinearCoeffs coeffs_from(const Json& j) {
  LinearCoeffs c;
  c.x = cmat(j, "x");
  c.y = cmat(j, "y");
  c.z = cmat(j, "z");
  c.kappa = cmat(j, "kappa");
  c.u = cmat(j, "u");
  c.mu = cmat(j, "mu");
  c.nu = cmat(j, "nu");
  c.lambda = cmat(j, "lambda");
  auto it = j.find("affine");
  if (it != j.end()) {
    const double v = it->get<double>();
    c.affine = [v](double) { return Eigen::VectorXd::Constant(1, v); };
  }
  return c;
}

}  // namespace

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

TimeGrid grid_from_json(const Json& j) {
  return make_grid(num_or(j, "t0", 0.0), num(j, "T"),
                   static_cast<int>(num(j, "steps")), num_or(j, "delta", 0.0));
}

McConfig mc_from_json(const Json& j) {
  McConfig mc;
  mc.paths = static_cast<int>(num_or(j, "paths", mc.paths));
  if (mc.paths <= 0) throw ConfigError("field 'paths' must be positive");
  mc.seed = static_cast<std::uint64_t>(num_or(j, "seed", 1.0));
  return mc;
}

KernelSpec kernel_from_json(const Json& j) {
  const std::string form = req(j, "form").get<std::string>();
  if (form == "zero") return KernelSpec::zero();
  if (form == "constant") return KernelSpec::constant(num(j, "c"));
  if (form == "exponential")
    return KernelSpec::exponential(num(j, "c"), num(j, "lambda"));
  if (form == "windowed") {
    const std::string reading =
        j.value("reading", std::string("shifted"));
    if (reading != "shifted" && reading != "literal")
      throw ConfigError("field 'reading' must be 'shifted' or 'literal'");
    return KernelSpec::windowed(kernel_from_json(req(j, "base")),
                                num(j, "delta"),
                                reading == "shifted" ? WindowReading::Shifted
                                                     : WindowReading::Literal);
  }
  throw ConfigError("unknown kernel form '" + form + "'");
}

LqSpec lq_from_json(const Json& j, const TimeGrid& grid) {
  LqSpec s;
  s.grid = grid;
  s.f = fn_or(j, "f", 0.0);
  s.g = fn_or(j, "g", 0.0);
  s.h = fn_or(j, "h", 0.0);
  s.k = fn_or(j, "k", 0.0);
  s.ab = fn_or(j, "ab", 0.0);
  s.bb = fn_or(j, "bb", 0.0);
  s.cb = fn_or(j, "cb", 0.0);
  s.db = fn_or(j, "db", 0.0);
  s.fb = fn_or(j, "fb", 0.0);
  s.gb = fn_or(j, "gb", 0.0);
  s.hb = fn_or(j, "hb", 0.0);
  s.kb = fn_or(j, "kb", 0.0);
  s.r1 = fn_or(j, "r1", 1.0);
  s.r2 = fn_or(j, "r2", 0.0);
  s.x0 = num_or(j, "x0", 0.0);
  s.literal_denominator = j.value("literal_denominator", false);
  const Json kernels = j.value("kernels", Json::object());
  s.phi1 = kernel_or_zero(kernels, "phi1");
  s.psi1 = kernel_or_zero(kernels, "psi1");
  s.phi2 = kernel_or_zero(kernels, "phi2");
  s.psi2 = kernel_or_zero(kernels, "psi2");
  return s;
}

GameSpec game_from_json(const Json& j, const TimeGrid& grid) {
  GameSpec g;
  g.grid = grid;
  g.player1 = lq_from_json(req(j, "player1"), grid);
  g.player2 = lq_from_json(req(j, "player2"), grid);
  return g;
}

DelaySystem linear_system_from_json(const Json& j, const TimeGrid& grid) {
  DelaySystem sys;
  sys.grid = grid;
  sys.n = 1;
  sys.m = 1;
  sys.drift = VectorCoefficient::linear(coeffs_from(req(j, "drift")));
  sys.diffusion = VectorCoefficient::linear(coeffs_from(req(j, "diffusion")));
  sys.running_cost =
      j.contains("cost") ? ScalarCoefficient::linear(coeffs_from(j["cost"]))
                         : ScalarCoefficient::zero();
  if (j.contains("terminal")) {
    const Json& t = j["terminal"];
    auto row = [&](const char* f) {
      return Eigen::RowVectorXd::Constant(1, num_or(t, f, 0.0));
    };
    sys.terminal_cost =
        TerminalCost::linear(row("x"), row("y"), row("z"), row("kappa"));
  } else {
    sys.terminal_cost = TerminalCost::zero();
  }
  const Json kernels = j.value("kernels", Json::object());
  sys.phi1 = kernel_or_zero(kernels, "phi1");
  sys.psi1 = kernel_or_zero(kernels, "psi1");
  sys.phi2 = kernel_or_zero(kernels, "phi2");
  sys.psi2 = kernel_or_zero(kernels, "psi2");
  const double x0 = num_or(j, "x0", 0.0);
  sys.xi = [x0](double) { return Eigen::VectorXd::Constant(1, x0); };
  return sys;
}

ControlProcess control_from_json(const Json& j, const TimeGrid& grid) {
  const std::string type = j.value("type", std::string("constant"));
  const double init = num_or(j, "initial", 0.0);
  auto initial = [init](double) { return init; };
  if (type == "constant") {
    const double v = num_or(j, "value", 0.0);
    return ControlProcess::from_function([v](double) { return v; }, grid,
                                         initial);
  }
  if (type == "affine") {
    const double a = num_or(j, "a", 0.0), b = num_or(j, "b", 0.0);
    return ControlProcess::from_function([a, b](double t) { return a + b * t; },
                                         grid, initial);
  }
  throw ConfigError("unknown control type '" + type + "'");
}

void write_plot_csv(const std::string& path, const std::vector<Series>& data) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << "series,x,y,y_stderr\n";
  out.precision(12);
  for (const Series& s : data)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << s.name << ',' << s.x[i] << ',' << s.y[i] << ','
          << (i < s.y_stderr.size() ? s.y_stderr[i] : 0.0) << '\n';
}

void write_json(const std::string& path, const Json& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  out << report.dump(2) << '\n';
}

}  // namespace emd
