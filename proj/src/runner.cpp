#include "mft/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "mft/dynamics.hpp"
#include "mft/ensemble.hpp"
#include "mft/errors.hpp"
#include "mft/format.hpp"
#include "mft/locality.hpp"
#include "mft/residuals.hpp"

namespace mft {

namespace {

constexpr double kNewtonGate = 1e-3;
constexpr double kResidualGate = 1e-5;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Output {
  std::string summary;
  bool passed = true;
};

class Context {
 public:
  Context(const Scenario& sc, const RunOptions& opt) : sc_(sc), opt_(opt), state_(sc.state()) {}

  const Scenario& scenario() const { return sc_; }
  const MftState& state() const { return state_; }
  std::size_t threads() const { return opt_.threads; }

  std::string header() const {
    return fmt::format("# {}\n# scenario_hash={:016x}\n# seed={}\n# command={}\n# scenario={}\n",
                       kToolVersion, scenario_hash(sc_), sc_.sampler.seed, opt_.command_line,
                       serialize(sc_, -1));
  }

  void write_csv(const std::string& name, const std::string& body,
                 const std::string& plot_body) const {
    write(name, header() + body);
    if (opt_.plots) {
      const std::string stem = name.substr(0, name.rfind('.'));
      write(stem + ".gp", fmt::format("# gnuplot script for {}\nset datafile separator ','\n"
                                      "set key autotitle columnhead\n{}",
                                      name, plot_body));
    }
  }

  void write(const std::string& name, const std::string& content) const {
    std::error_code ec;
    std::filesystem::create_directories(opt_.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + opt_.out_dir + ": " + ec.message());
    const auto path = std::filesystem::path(opt_.out_dir) / name;
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw IoError("cannot write " + path.string());
  }

  std::vector<double> offset_times(double tau) const {
    std::vector<double> t;
    for (double d : sc_.dynamics.delta_offsets) t.push_back(tau + d);
    return t;
  }

 private:
  const Scenario& sc_;
  const RunOptions& opt_;
  MftState state_;
};

std::string columns(const std::string& prefix, std::size_t n) {
  std::string out;
  for (std::size_t i = 1; i <= n; ++i) out += fmt::format(",{}_{}", prefix, i);
  return out;
}

std::string reals(std::span<const double> v) {
  std::string out;
  for (double x : v) out += "," + format_real(x);
  return out;
}

BeableSheet sheet_of(const Context& ctx) {
  const auto& d = ctx.scenario().dynamics;
  const SheetRule rule{d.sheet_rule, ctx.scenario().initial_config()};
  const auto x0 = rule.initial_config(ctx.state(), d.delta_offsets, d.tau0, d.step);
  return integrate_sheet(ctx.state(), d.delta_offsets, x0, d.tau0, d.tau1, d.step);
}

std::string trajectory_csv(const BeableSheet& sheet) {
  const std::size_t n = sheet.particle_count();
  std::string out = "tau" + columns("t", n) + columns("x", n) + "\n";
  for (std::size_t k = 0; k < sheet.tau_grid.size(); ++k) {
    out += format_real(sheet.tau_grid[k]) + reals(sheet.times(k).times) +
           reals(sheet.positions[k]) + "\n";
  }
  return out;
}

Output simulate(const Context& ctx) {
  const BeableSheet sheet = sheet_of(ctx);
  const std::size_t n = sheet.particle_count();
  ctx.write_csv("trajectory.csv", trajectory_csv(sheet),
                fmt::format("set xlabel 'tau'\nplot for [c={}:{}] 'trajectory.csv' using 1:c "
                            "with lines\n",
                            n + 2, 2 * n + 1));
  Output o;
  o.summary += fmt::format("grid_points={}\ntau_final={}\n", sheet.tau_grid.size(),
                           format_real(sheet.tau_grid.back()));
  for (std::size_t i = 0; i < n; ++i) {
    o.summary += fmt::format("x_{}_final={}\n", i + 1, format_real(sheet.positions.back()[i]));
  }
  return o;
}

Output newton_check(const Context& ctx) {
  const BeableSheet sheet = sheet_of(ctx);
  const auto params = ctx.scenario().params<NewtonParams>();
  const auto residual = newton_residual(sheet, ctx.state(), params.fd_step);
  std::string body = "tau,residual\n";
  double worst = 0.0;
  for (std::size_t k = 0; k < residual.size(); ++k) {
    body += format_real(sheet.tau_grid[k + 1]) + "," + format_real(residual[k]) + "\n";
    worst = std::max(worst, residual[k]);
  }
  ctx.write_csv("newton.csv", body,
                "set logscale y\nset xlabel 'tau'\nplot 'newton.csv' using 1:2 with lines\n");
  Output o;
  o.summary = fmt::format("interior_points={}\nmax_newton_residual={}\n", residual.size(),
                          format_real(worst));
  o.passed = worst < kNewtonGate;
  if (!o.passed) o.summary += fmt::format("failure=max residual >= {}\n", kNewtonGate);
  return o;
}

Output residuals(const Context& ctx) {
  const auto params = ctx.scenario().params<ResidualsParams>();
  const std::size_t n = ctx.state().particle_count();
  const auto points =
      random_probe_points(ctx.state(), params.n_points, params.t_max, ctx.scenario().sampler.seed);
  std::string body = "point" + columns("t", n) + columns("x", n) +
                     ",schrodinger,hamilton_jacobi,continuity,schrodinger_half,"
                     "hamilton_jacobi_half,continuity_half\n";
  ResidualSet worst, worst_half;
  const FiniteDifferenceSteps full{params.h, params.h};
  const FiniteDifferenceSteps half{0.5 * params.h, 0.5 * params.h};
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto r = residuals_at(ctx.state(), points[k], full);
    const auto r2 = residuals_at(ctx.state(), points[k], half);
    body += fmt::format("{}{}{},{},{},{},{},{},{}\n", k + 1, reals(points[k].t.times),
                        reals(points[k].x), format_real(r.schrodinger),
                        format_real(r.hamilton_jacobi), format_real(r.continuity),
                        format_real(r2.schrodinger), format_real(r2.hamilton_jacobi),
                        format_real(r2.continuity));
    worst.schrodinger = std::max(worst.schrodinger, r.schrodinger);
    worst.hamilton_jacobi = std::max(worst.hamilton_jacobi, r.hamilton_jacobi);
    worst.continuity = std::max(worst.continuity, r.continuity);
    worst_half.schrodinger = std::max(worst_half.schrodinger, r2.schrodinger);
    worst_half.hamilton_jacobi = std::max(worst_half.hamilton_jacobi, r2.hamilton_jacobi);
    worst_half.continuity = std::max(worst_half.continuity, r2.continuity);
  }
  ctx.write_csv("residuals.csv", body,
                fmt::format("set logscale y\nplot 'residuals.csv' using 1:{} with points, "
                            "'' using 1:{} with points, '' using 1:{} with points\n",
                            2 * n + 2, 2 * n + 3, 2 * n + 4));
  auto order = [](double a, double b) { return b > 0.0 ? std::log2(a / b) : 0.0; };
  Output o;
  o.summary = fmt::format(
      "points={}\nmax_schrodinger={}\nmax_hamilton_jacobi={}\nmax_continuity={}\n"
      "order_schrodinger={}\norder_hamilton_jacobi={}\norder_continuity={}\n",
      points.size(), format_real(worst.schrodinger), format_real(worst.hamilton_jacobi),
      format_real(worst.continuity), format_real(order(worst.schrodinger, worst_half.schrodinger)),
      format_real(order(worst.hamilton_jacobi, worst_half.hamilton_jacobi)),
      format_real(order(worst.continuity, worst_half.continuity)));
  o.passed = worst.schrodinger < kResidualGate && worst.hamilton_jacobi < kResidualGate &&
             worst.continuity < kResidualGate;
  if (!o.passed) o.summary += fmt::format("failure=residual >= {}\n", kResidualGate);
  return o;
}

Output equivariance(const Context& ctx) {
  const auto& d = ctx.scenario().dynamics;
  const auto report = equivariance_test(ctx.state(), d.delta_offsets, d.tau0, d.tau1,
                                        ctx.scenario().sampler, d.step, ctx.threads());
  ctx.write_csv("equivariance.csv", report.ks_csv(),
                "set yrange [0:1]\nplot 'equivariance.csv' using 1:3 with points\n");
  return {report.summary(), report.passed()};
}

Output collapse(const Context& ctx) {
  const auto& d = ctx.scenario().dynamics;
  const auto params = ctx.scenario().params<CollapseParams>();
  CollapseSetup setup;
  setup.offsets = d.delta_offsets;
  setup.tau0 = d.tau0;
  setup.tau1 = d.tau1;
  setup.step = d.step;
  setup.reclassify_span = params.reclassify_span;
  setup.reclassify_checks = params.reclassify_checks;
  setup.dominance = params.dominance;
  const auto report = collapse_statistics(ctx.state(), setup, ctx.scenario().sampler, ctx.threads());
  ctx.write_csv("collapse.csv", report.branch_csv(),
                "set yrange [0:1]\nplot 'collapse.csv' using 1:2:3:4 with yerrorbars, "
                "'' using 1:5 with points\n");
  return {report.summary(), report.passed()};
}

Output sensitivity(const Context& ctx) {
  const auto params = ctx.scenario().params<SensitivityParams>();
  const std::size_t n = ctx.state().particle_count();
  if (n < 2) throw ValidationError("sensitivity needs at least two particles");
  const TimeVector t{params.times.empty() ? ctx.offset_times(ctx.scenario().dynamics.tau0)
                                          : params.times};
  const auto reports = sensitivity_scan(ctx.state(), t, params.i - 1, params.j - 1,
                                        params.lattice, params.span_widths);
  std::string body = "i,j" + columns("x", n) + columns("t", n) + ",dvi_dtj,step\n";
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (const auto& r : reports) {
    body += fmt::format("{},{}{}{},{},{}\n", r.i + 1, r.j + 1, reals(r.x), reals(r.t),
                        format_real(r.value), format_real(r.step));
    worst = std::max(worst, std::abs(r.value));
    if (!r.converged) ++unconverged;
  }
  ctx.write_csv("sensitivity.csv", body,
                fmt::format("plot 'sensitivity.csv' using 0:{} with points\n", 2 * n + 3));
  Output o;
  o.summary = fmt::format("probes={}\nmax_abs_dvi_dtj={}\nunconverged={}\n", reports.size(),
                          format_real(worst), unconverged);
  o.passed = unconverged == 0;
  if (!o.passed) o.summary += "failure=step-halved derivative disagrees by more than 10%\n";
  return o;
}

Output epr_scan(const Context& ctx) {
  const auto params = ctx.scenario().params<EprParams>();
  const double t_ref = params.t_ref.value_or(params.t1_fixed);
  const std::size_t n = ctx.state().particle_count();
  const auto refs = sample_initial(ctx.state(), TimeVector::uniform(n, t_ref),
                                   ctx.scenario().sampler, ctx.threads());
  const auto report = epr_timing_scan(ctx.state(), params.t1_fixed, params.t2_grid, refs, t_ref,
                                      ctx.scenario().dynamics.step, kDominance, ctx.threads());
  ctx.write_csv("epr_scan.csv", report.csv(),
                "plot 'epr_scan.csv' using 2:4 with points\n");
  return {report.summary(), report.passed()};
}

const std::map<std::string, std::function<Output(const Context&)>>& dispatch() {
  static const std::map<std::string, std::function<Output(const Context&)>> table{
      {"simulate", simulate},         {"equivariance", equivariance},
      {"collapse", collapse},         {"sensitivity", sensitivity},
      {"epr-scan", epr_scan},         {"newton-check", newton_check},
      {"residuals", residuals},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"simulate",  "equivariance", "collapse",
                                              "sensitivity", "epr-scan",   "newton-check",
                                              "residuals", "validate"};
  return names;
}

int run(const std::string& command, Scenario scenario, const RunOptions& options,
        std::ostream& out, std::ostream& err) {
  for (const auto& w : scenario.warnings) err << "warning: " << w << "\n";
  if (options.seed) scenario.sampler.seed = *options.seed;
  if (command == "validate") {
    out << fmt::format("scenario={}\nparticles={}\nbranches={}\nscenario_hash={:016x}\nvalid=1\n",
                       scenario.name, scenario.particle_count(), scenario.branches.size(),
                       scenario_hash(scenario));
    return kExitOk;
  }
  const auto it = dispatch().find(command);
  if (it == dispatch().end()) {
    err << "error: unknown command '" << command << "'\n";
    return kExitIoError;
  }
  try {
    const Context ctx(scenario, options);
    Output o = it->second(ctx);
    const std::string summary = fmt::format("command={}\nscenario={}\n", command, scenario.name) +
                                o.summary;
    ctx.write("summary.txt", summary);
    out << summary;
    if (!o.passed) {
      err << "error: statistical gate failed for '" << command << "'\n";
      return kExitGateFailure;
    }
    return kExitOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const NodeStall& e) {
    err << "error: " << e.what() << "\n";
    return kExitGateFailure;
  } catch (const NodeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitGateFailure;
  }
}

}  // namespace mft
