#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mft/ensemble.hpp"
#include "mft/state.hpp"

namespace mft {

/// Single-time Bohmian trajectory: positions[k] at times[k].
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> positions;
};

/// Ordinary Bohmian integration dx_i/dt = d_i S(X, t * 1) / m_i with its own
/// RK4 loop and node halving. All particle times are equal by construction.
/// Throws NodeStall.
Trajectory single_time_oracle(const MftState& s, std::span<const double> x0, double t0,
                              double t1, double step = 1e-3);

struct SensitivityReport {
  std::size_t i = 0;
  std::size_t j = 0;
  std::vector<double> x;
  std::vector<double> t;
  double value = 0.0;
  double value_half_step = 0.0;
  double step = 0.0;
  bool converged = false;
};

/// dv_i/dt_j by central differences at `step`, re-evaluated at step / 2.
/// Converged when the two agree to 10%, or to 1e-9 absolute where both are tiny.
SensitivityReport cross_time_sensitivity(const MftState& s, std::span<const double> x,
                                         const TimeVector& t, std::size_t i, std::size_t j,
                                         double step = 1e-4);

/// Probe lattice of `lattice` points per coordinate spanning +-span_widths
/// packet widths around the midpoint of the branch centers at T. Probe points
/// at nodes are skipped.
std::vector<SensitivityReport> sensitivity_scan(const MftState& s, const TimeVector& t,
                                                std::size_t i, std::size_t j,
                                                std::size_t lattice = 5,
                                                double span_widths = 2.0);

struct EprRow {
  std::size_t sample = 0;
  double t2 = 0.0;
  /// Empty for unclassified or stalled samples.
  std::optional<std::size_t> branch;
  double w_max = 0.0;
  bool stalled = false;
};

struct EprScanReport {
  std::vector<double> t2_grid;
  std::vector<EprRow> rows;
  /// frequencies[g][a]: share of branch a among non-stalled samples at t2_grid[g].
  std::vector<std::vector<double>> frequencies;
  std::vector<double> expected;
  /// Largest particle-1 overlap integral between branches at t1_fixed.
  double particle1_overlap = 0.0;
  std::size_t samples = 0;
  std::size_t flips = 0;
  std::size_t unclassified = 0;
  std::size_t stalled = 0;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
  /// `sample,t2,branch,w_max` rows; branch 0 marks unclassified or stalled.
  std::string csv() const;
  std::string summary() const;
};

/// For every t2 in the grid, evaluates each sample's beable at
/// T = (t1_fixed, t2, t1_fixed, ...) and classifies it. The references are
/// configurations at t_ref * 1 carried to T with the transport sheet rule.
/// Particle 1's branch packets must be separated (overlap below
/// kOverlapThreshold) at t1_fixed.
EprScanReport epr_timing_scan(const MftState& s, double t1_fixed,
                              std::span<const double> t2_grid,
                              const std::vector<Configuration>& references, double t_ref,
                              double step = 1e-3, double dominance = kDominance,
                              std::size_t threads = 0);

}  // namespace mft
