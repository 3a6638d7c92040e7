#include "mft/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mft/errors.hpp"
#include "mft/parallel.hpp"
#include "mft/rk4.hpp"

namespace mft {

namespace {

constexpr double kGaugeTolerance = 1e-12;

void check_offsets(std::span<const double> offsets, std::size_t n) {
  if (offsets.size() != n) {
    throw ValidationError("offset vector length does not match particle count");
  }
  const double sum = std::accumulate(offsets.begin(), offsets.end(), 0.0);
  if (std::abs(sum) > kGaugeTolerance) {
    throw ValidationError("offsets must sum to zero (got " + std::to_string(sum) + ")");
  }
}

}  // namespace

DiagonalChart DiagonalChart::from_times(const TimeVector& t) {
  if (t.size() == 0) throw ValidationError("empty time vector");
  DiagonalChart chart;
  chart.tau = std::accumulate(t.times.begin(), t.times.end(), 0.0) /
              static_cast<double>(t.size());
  chart.offsets.reserve(t.size());
  for (double ti : t.times) chart.offsets.push_back(ti - chart.tau);
  return chart;
}

TimeVector DiagonalChart::times_at(double tau_value) const {
  TimeVector t;
  t.times.reserve(offsets.size());
  for (double d : offsets) t.times.push_back(tau_value + d);
  return t;
}

double DiagonalChart::gauge_error() const {
  return std::abs(std::accumulate(offsets.begin(), offsets.end(), 0.0));
}

TimeVector BeableSheet::times(std::size_t k) const {
  TimeVector t;
  for (double d : offsets) t.times.push_back(tau_grid[k] + d);
  return t;
}

LineFlow::LineFlow(const MftState& state, std::vector<double> anchor,
                   std::vector<double> direction, double lambda0, double lambda1, double step)
    : state_(state),
      anchor_(std::move(anchor)),
      direction_(std::move(direction)),
      lambda0_(lambda0),
      lambda1_(lambda1) {
  if (!(step > 0.0)) throw ValidationError("integration step must be > 0");
  const double span = std::abs(lambda1 - lambda0);
  steps_ = span == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(span / step - 1e-9));
  h_ = steps_ == 0 ? 0.0 : (lambda1 - lambda0) / static_cast<double>(steps_);
  grid_.reserve(steps_ + 1);
  mid_.reserve(steps_);
  for (std::size_t k = 0; k <= steps_; ++k) grid_.push_back(snapshot(lambda(k)));
  for (std::size_t k = 0; k < steps_; ++k) mid_.push_back(snapshot(lambda(k) + 0.5 * h_));
}

double LineFlow::lambda(std::size_t k) const {
  if (k == steps_) return lambda1_;
  return lambda0_ + static_cast<double>(k) * h_;
}

TimeVector LineFlow::times_at(double lambda_value) const {
  TimeVector t;
  t.times.reserve(anchor_.size());
  for (std::size_t i = 0; i < anchor_.size(); ++i) {
    t.times.push_back(anchor_[i] + lambda_value * direction_[i]);
  }
  return t;
}

Snapshot LineFlow::snapshot(double lambda_value) const {
  return state_.at(times_at(lambda_value).times);
}

void LineFlow::field(const Snapshot& snap, const std::vector<double>& x,
                     std::vector<double>& dx) const {
  snap.velocity(x, dx);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= direction_[i];
}

void LineFlow::advance_between(double la, double lb, const Snapshot& start, const Snapshot& end,
                               std::vector<double>& x, int depth) const {
  const Snapshot mid = snapshot(0.5 * (la + lb));
  std::vector<double> trial = x;
  try {
    rk4_step([&](const auto& y, auto& d) { field(start, y, d); },
             [&](const auto& y, auto& d) { field(mid, y, d); },
             [&](const auto& y, auto& d) { field(end, y, d); }, lb - la, trial);
  } catch (const NodeError&) {
    if (depth >= kMaxHalvings) throw NodeStall(la);
    const double lm = 0.5 * (la + lb);
    advance_between(la, lm, start, mid, x, depth + 1);
    advance_between(lm, lb, mid, end, x, depth + 1);
    return;
  }
  x = std::move(trial);
}

void LineFlow::advance(std::size_t k, std::vector<double>& x) const {
  std::vector<double> trial = x;
  try {
    rk4_step([&](const auto& y, auto& d) { field(grid_[k], y, d); },
             [&](const auto& y, auto& d) { field(mid_[k], y, d); },
             [&](const auto& y, auto& d) { field(grid_[k + 1], y, d); }, h_, trial);
  } catch (const NodeError&) {
    const double la = lambda(k);
    const double lm = la + 0.5 * h_;
    const double lb = lambda(k + 1);
    advance_between(la, lm, grid_[k], mid_[k], x, 1);
    advance_between(lm, lb, mid_[k], grid_[k + 1], x, 1);
    return;
  }
  x = std::move(trial);
}

std::optional<std::vector<double>> LineFlow::run(std::vector<double> x) const {
  try {
    for (std::size_t k = 0; k < steps_; ++k) advance(k, x);
  } catch (const NodeStall&) {
    return std::nullopt;
  }
  return x;
}

std::vector<double> velocity_field(const MftState& s, std::span<const double> x,
                                   const TimeVector& t) {
  std::vector<double> v(s.particle_count());
  s.at(t).velocity(x, v);
  return v;
}

namespace {

LineFlow diagonal_flow(const MftState& s, std::span<const double> offsets, double tau0,
                       double tau1, double step) {
  check_offsets(offsets, s.particle_count());
  return LineFlow(s, std::vector<double>(offsets.begin(), offsets.end()),
                  std::vector<double>(offsets.size(), 1.0), tau0, tau1, step);
}

}  // namespace

BeableSheet integrate_sheet(const MftState& s, std::span<const double> offsets,
                            std::span<const double> x0, double tau0, double tau1,
                            double step) {
  if (x0.size() != s.particle_count()) {
    throw ValidationError("initial configuration length does not match particle count");
  }
  const LineFlow flow = diagonal_flow(s, offsets, tau0, tau1, step);
  BeableSheet sheet;
  sheet.offsets.assign(offsets.begin(), offsets.end());
  sheet.tau_grid.reserve(flow.steps() + 1);
  sheet.positions.reserve(flow.steps() + 1);

  std::vector<double> x(x0.begin(), x0.end());
  // Fail fast if the start itself is a node.
  velocity_field(s, x, flow.times_at(tau0));
  sheet.tau_grid.push_back(flow.lambda(0));
  sheet.positions.push_back(x);
  for (std::size_t k = 0; k < flow.steps(); ++k) {
    flow.advance(k, x);
    sheet.tau_grid.push_back(flow.lambda(k + 1));
    sheet.positions.push_back(x);
  }
  return sheet;
}

std::vector<std::optional<std::vector<double>>> propagate_ensemble(
    const MftState& s, std::span<const double> offsets,
    const std::vector<std::vector<double>>& x0, double tau0, double tau1, double step,
    std::size_t threads) {
  const LineFlow flow = diagonal_flow(s, offsets, tau0, tau1, step);
  std::vector<std::optional<std::vector<double>>> out(x0.size());
  parallel_for(x0.size(), threads, [&](std::size_t k) {
    try {
      out[k] = flow.run(x0[k]);
    } catch (const NodeError&) {
      out[k] = std::nullopt;
    }
  });
  return out;
}

namespace {

std::vector<LineFlow> transport_flows(const MftState& s, std::span<const double> offsets,
                                      double tau0, double step) {
  const std::size_t n = s.particle_count();
  check_offsets(offsets, n);
  std::vector<LineFlow> flows;
  std::vector<double> anchor(n, tau0);
  for (std::size_t i = 0; i < n; ++i) {
    if (offsets[i] == 0.0) continue;
    std::vector<double> dir(n, 0.0);
    dir[i] = 1.0;
    std::vector<double> base = anchor;
    base[i] = 0.0;
    flows.emplace_back(s, std::move(base), std::move(dir), tau0, tau0 + offsets[i], step);
    anchor[i] = tau0 + offsets[i];
  }
  return flows;
}

void run_flows(const std::vector<LineFlow>& flows, std::vector<double>& x) {
  for (const auto& flow : flows) {
    for (std::size_t k = 0; k < flow.steps(); ++k) flow.advance(k, x);
  }
}

}  // namespace

std::vector<double> SheetRule::initial_config(const MftState& s,
                                              std::span<const double> offsets, double tau0,
                                              double step) const {
  if (reference.size() != s.particle_count()) {
    throw ValidationError("sheet rule reference length does not match particle count");
  }
  if (kind == SheetRuleKind::Constant) return reference;
  std::vector<double> x = reference;
  run_flows(transport_flows(s, offsets, tau0, step), x);
  return x;
}

BeableMap::BeableMap(const MftState& s, SheetRuleKind kind, double tau0, const TimeVector& t,
                     double step) {
  if (t.size() != s.particle_count()) {
    throw ValidationError("time vector length does not match particle count");
  }
  const DiagonalChart chart = DiagonalChart::from_times(t);
  if (kind == SheetRuleKind::Transport) {
    transport_ = transport_flows(s, chart.offsets, tau0, step);
  }
  diagonal_.push_back(diagonal_flow(s, chart.offsets, tau0, chart.tau, step));
}

std::vector<double> BeableMap::operator()(std::vector<double> reference) const {
  run_flows(transport_, reference);
  run_flows(diagonal_, reference);
  return reference;
}

std::vector<double> beable_at(const MftState& s, const SheetRule& rule, double tau0,
                              const TimeVector& t, double step) {
  if (rule.reference.size() != s.particle_count()) {
    throw ValidationError("sheet rule reference length does not match particle count");
  }
  return BeableMap(s, rule.kind, tau0, t, step)(rule.reference);
}

std::vector<double> newton_residual(const BeableSheet& sheet, const MftState& s,
                                    double fd_step) {
  const std::size_t points = sheet.tau_grid.size();
  if (points < 3) throw ValidationError("newton residual needs at least three grid points");
  const double h = sheet.tau_grid[1] - sheet.tau_grid[0];
  const double dq = fd_step > 0.0 ? fd_step : std::abs(h);
  const std::size_t n = sheet.particle_count();

  std::vector<double> out;
  out.reserve(points - 2);
  for (std::size_t k = 1; k + 1 < points; ++k) {
    const Snapshot snap = s.at(sheet.times(k).times);
    const auto& x = sheet.positions[k];
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double accel =
          (sheet.positions[k + 1][i] - 2.0 * x[i] + sheet.positions[k - 1][i]) / (h * h);
      std::vector<double> xp = x;
      std::vector<double> xm = x;
      xp[i] += dq;
      xm[i] -= dq;
      const double grad_q =
          (quantum_potential(snap, xp) - quantum_potential(snap, xm)) / (2.0 * dq);
      const double m = s.mass(i);
      const double grad_v = s.potential(i).gradient(x[i], m);
      worst = std::max(worst, std::abs(m * accel + grad_v + grad_q));
    }
    out.push_back(worst);
  }
  return out;
}

}  // namespace mft
