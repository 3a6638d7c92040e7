#include "mft/locality.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mft/dynamics.hpp"
#include "mft/errors.hpp"
#include "mft/format.hpp"
#include "mft/parallel.hpp"

namespace mft {

namespace {

class SingleTimeStepper {
 public:
  SingleTimeStepper(const MftState& s, std::size_t n) : s_(s), n_(n) {}

  void velocity(double t, const std::vector<double>& x, std::vector<double>& v) const {
    const Snapshot snap = s_.at(std::vector<double>(n_, t));
    v.resize(n_);
    snap.velocity(x, v);
  }

  // Classic RK4 from t to t + h; on a node the step is split in two halves.
  void step(double t, double h, std::vector<double>& x, int depth) const {
    try {
      std::vector<double> k1, k2, k3, k4, y(n_);
      velocity(t, x, k1);
      for (std::size_t i = 0; i < n_; ++i) y[i] = x[i] + 0.5 * h * k1[i];
      velocity(t + 0.5 * h, y, k2);
      for (std::size_t i = 0; i < n_; ++i) y[i] = x[i] + 0.5 * h * k2[i];
      velocity(t + 0.5 * h, y, k3);
      for (std::size_t i = 0; i < n_; ++i) y[i] = x[i] + h * k3[i];
      velocity(t + h, y, k4);
      for (std::size_t i = 0; i < n_; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    } catch (const NodeError&) {
      if (depth >= kMaxHalvings) throw NodeStall(t);
      step(t, 0.5 * h, x, depth + 1);
      step(t + 0.5 * h, 0.5 * h, x, depth + 1);
    }
  }

 private:
  const MftState& s_;
  std::size_t n_;
};

}  // namespace

Trajectory single_time_oracle(const MftState& s, std::span<const double> x0, double t0,
                              double t1, double step) {
  if (!(step > 0.0)) throw ValidationError("integration step must be > 0");
  const std::size_t n = s.particle_count();
  if (x0.size() != n) throw ValidationError("configuration length does not match particle count");
  const SingleTimeStepper stepper(s, n);
  {
    std::vector<double> v;
    try {
      stepper.velocity(t0, {x0.begin(), x0.end()}, v);
    } catch (const NodeError&) {
      throw NodeStall(t0);
    }
  }
  const double span = std::abs(t1 - t0);
  const auto steps = span == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(span / step - 1e-9));
  const double h = steps == 0 ? 0.0 : (t1 - t0) / static_cast<double>(steps);

  Trajectory out;
  std::vector<double> x(x0.begin(), x0.end());
  out.times.push_back(t0);
  out.positions.push_back(x);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    stepper.step(t, h, x, 0);
    out.times.push_back(k + 1 == steps ? t1 : t0 + static_cast<double>(k + 1) * h);
    out.positions.push_back(x);
  }
  return out;
}

SensitivityReport cross_time_sensitivity(const MftState& s, std::span<const double> x,
                                         const TimeVector& t, std::size_t i, std::size_t j,
                                         double step) {
  const std::size_t n = s.particle_count();
  if (i >= n || j >= n || i == j) throw ValidationError("sensitivity needs distinct particle indices");
  if (x.size() != n || t.size() != n) {
    throw ValidationError("probe point length does not match particle count");
  }
  auto derivative = [&](double h) {
    std::vector<double> tp = t.times;
    std::vector<double> tm = t.times;
    tp[j] += h;
    tm[j] -= h;
    const double vp = s.at(tp).velocity(x, i);
    const double vm = s.at(tm).velocity(x, i);
    return (vp - vm) / (2.0 * h);
  };
  SensitivityReport r;
  r.i = i;
  r.j = j;
  r.x.assign(x.begin(), x.end());
  r.t = t.times;
  r.step = step;
  r.value = derivative(step);
  r.value_half_step = derivative(0.5 * step);
  const double scale = std::max(std::abs(r.value), std::abs(r.value_half_step));
  r.converged = std::abs(r.value - r.value_half_step) <= std::max(0.1 * scale, 1e-9);
  return r;
}

std::vector<SensitivityReport> sensitivity_scan(const MftState& s, const TimeVector& t,
                                                std::size_t i, std::size_t j,
                                                std::size_t lattice, double span_widths) {
  const Snapshot snap = s.at(t.times);
  const std::size_t n = snap.particle_count();
  const std::size_t nb = snap.branch_count();
  std::vector<double> mid(n, 0.0);
  double width = 0.0;
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t q = 0; q < n; ++q) {
      mid[q] += snap.packet(a, q).center / static_cast<double>(nb);
      width = std::max(width, snap.packet(a, q).sigma());
    }
  }
  std::vector<double> axis;
  for (std::size_t k = 0; k < lattice; ++k) {
    const double u = lattice == 1 ? 0.0
                                  : -1.0 + 2.0 * static_cast<double>(k) /
                                               static_cast<double>(lattice - 1);
    axis.push_back(u * span_widths * width);
  }

  std::vector<SensitivityReport> out;
  std::vector<std::size_t> index(n, 0);
  std::vector<double> x(n);
  while (true) {
    for (std::size_t q = 0; q < n; ++q) x[q] = mid[q] + axis[index[q]];
    try {
      out.push_back(cross_time_sensitivity(s, x, t, i, j));
    } catch (const NodeError&) {
    }
    std::size_t q = 0;
    while (q < n && ++index[q] == lattice) index[q++] = 0;
    if (q == n) break;
  }
  return out;
}

std::string EprScanReport::csv() const {
  std::string out = "sample,t2,branch,w_max\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.sample + 1, format_real(r.t2),
                       r.branch ? *r.branch + 1 : 0, format_real(r.w_max));
  }
  return out;
}

std::string EprScanReport::summary() const {
  std::string out = fmt::format("samples={}\nparticle1_overlap={}\n", samples,
                                format_real(particle1_overlap));
  for (std::size_t g = 0; g < t2_grid.size(); ++g) {
    out += fmt::format("t2_{}={}\n", g + 1, format_real(t2_grid[g]));
    for (std::size_t a = 0; a < expected.size(); ++a) {
      out += fmt::format("branch_freq_{}_t2_{}={}\n", a + 1, g + 1,
                         format_real(frequencies[g][a]));
    }
  }
  for (std::size_t a = 0; a < expected.size(); ++a) {
    out += fmt::format("branch_expected_{}={}\n", a + 1, format_real(expected[a]));
  }
  out += fmt::format("flips={}\nunclassified={}\nstalled={}\npassed={}\n", flips, unclassified,
                     stalled, passed() ? 1 : 0);
  for (const auto& f : failures) out += "failure=" + f + "\n";
  return out;
}

EprScanReport epr_timing_scan(const MftState& s, double t1_fixed,
                              std::span<const double> t2_grid,
                              const std::vector<Configuration>& references, double t_ref,
                              double step, double dominance, std::size_t threads) {
  const std::size_t n = s.particle_count();
  if (n < 2) throw ValidationError("epr scan needs at least two particles");
  if (t2_grid.empty()) throw ValidationError("epr scan needs a nonempty t2 grid");

  EprScanReport report;
  report.t2_grid.assign(t2_grid.begin(), t2_grid.end());
  report.expected = born_weights(s);
  report.samples = references.size();
  const std::size_t nb = s.branch_count();
  const std::size_t ns = references.size();

  {
    const Snapshot snap = s.at(TimeVector::uniform(n, t1_fixed).times);
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t b = a + 1; b < nb; ++b) {
        report.particle1_overlap = std::max(
            report.particle1_overlap, magnitude_overlap(snap.packet(a, 0), snap.packet(b, 0)));
      }
    }
    if (!(report.particle1_overlap < kOverlapThreshold)) {
      report.failures.push_back(fmt::format(
          "particle 1 branches still overlap at t1_fixed (overlap {} >= {})",
          report.particle1_overlap, kOverlapThreshold));
    }
  }

  std::vector<std::vector<EprRow>> by_grid(t2_grid.size(), std::vector<EprRow>(ns));
  for (std::size_t g = 0; g < t2_grid.size(); ++g) {
    TimeVector t = TimeVector::uniform(n, t1_fixed);
    t.times[1] = t2_grid[g];
    const BeableMap map(s, SheetRuleKind::Transport, t_ref, t, step);
    const Snapshot snap = s.at(t.times);
    parallel_for(ns, threads, [&](std::size_t k) {
      EprRow& row = by_grid[g][k];
      row.sample = k;
      row.t2 = t2_grid[g];
      try {
        const auto x = map(references[k]);
        const auto w = branch_weights(snap, x);
        row.w_max = *std::max_element(w.begin(), w.end());
        row.branch = classify(w, dominance);
      } catch (const NodeStall&) {
        row.stalled = true;
      } catch (const Unclassifiable&) {
      }
    });
  }

  report.frequencies.assign(t2_grid.size(), std::vector<double>(nb, 0.0));
  for (std::size_t g = 0; g < t2_grid.size(); ++g) {
    std::vector<std::size_t> counts(nb, 0);
    std::size_t used = 0;
    for (const auto& row : by_grid[g]) {
      if (row.stalled) {
        ++report.stalled;
        continue;
      }
      ++used;
      if (row.branch) {
        ++counts[*row.branch];
      } else {
        ++report.unclassified;
      }
    }
    for (std::size_t a = 0; a < nb; ++a) {
      const double f = used == 0 ? 0.0 : static_cast<double>(counts[a]) / static_cast<double>(used);
      report.frequencies[g][a] = f;
      const double p = report.expected[a];
      const double tolerance =
          used == 0 ? 0.0 : 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(used));
      if (std::abs(f - p) > tolerance) {
        report.failures.push_back(fmt::format("t2={} branch {} frequency {} outside 3 sigma of {}",
                                              t2_grid[g], a + 1, f, p));
      }
    }
  }

  for (std::size_t k = 0; k < ns; ++k) {
    bool flipped = false;
    for (std::size_t g = 0; g < t2_grid.size(); ++g) {
      const auto& row = by_grid[g][k];
      if (row.stalled || row.branch != by_grid[0][k].branch) flipped = true;
    }
    if (flipped) ++report.flips;
    for (std::size_t g = 0; g < t2_grid.size(); ++g) report.rows.push_back(by_grid[g][k]);
  }
  if (report.flips > 0) {
    report.failures.push_back(fmt::format("{} samples change classification across t2", report.flips));
  }
  return report;
}

}  // namespace mft
