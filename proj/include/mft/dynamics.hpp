#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mft/state.hpp"

namespace mft {

inline constexpr double kDefaultStep = 1e-3;
inline constexpr int kMaxHalvings = 20;

/// (tau, offsets) coordinates on the space of time vectors: T = tau * 1 + offsets,
/// with tau the mean of the t_i so that the offsets sum to zero.
struct DiagonalChart {
  double tau = 0.0;
  std::vector<double> offsets;

  static DiagonalChart from_times(const TimeVector& t);
  TimeVector times() const { return times_at(tau); }
  TimeVector times_at(double tau) const;
  double gauge_error() const;
};

/// One offset slice of the multi-time beable x_i(T): positions along the
/// diagonal line T(tau) = tau * 1 + offsets on a uniform tau grid.
struct BeableSheet {
  std::vector<double> offsets;
  std::vector<double> tau_grid;
  std::vector<std::vector<double>> positions;

  std::size_t particle_count() const { return offsets.size(); }
  TimeVector times(std::size_t k) const;
};

/// Integrates dX/dlambda = v(X, T(lambda)) along a straight line
/// T(lambda) = anchor + lambda * direction in time space. Only coordinates
/// whose direction component is nonzero move. Steps are uniform; a step that
/// hits a node is halved recursively up to kMaxHalvings times.
class LineFlow {
 public:
  LineFlow(const MftState& state, std::vector<double> anchor, std::vector<double> direction,
           double lambda0, double lambda1, double step);

  std::size_t steps() const { return steps_; }
  double lambda(std::size_t k) const;
  TimeVector times_at(double lambda) const;

  /// Advances x from grid point k to k + 1. Throws NodeStall.
  void advance(std::size_t k, std::vector<double>& x) const;

  /// Final configuration after all steps, or nullopt on NodeStall.
  std::optional<std::vector<double>> run(std::vector<double> x) const;

 private:
  void advance_between(double la, double lb, const Snapshot& start, const Snapshot& end,
                       std::vector<double>& x, int depth) const;
  Snapshot snapshot(double lambda) const;
  void field(const Snapshot& snap, const std::vector<double>& x, std::vector<double>& dx) const;

  const MftState& state_;
  std::vector<double> anchor_;
  std::vector<double> direction_;
  double lambda0_;
  double lambda1_;
  std::size_t steps_;
  double h_;
  std::vector<Snapshot> grid_;
  std::vector<Snapshot> mid_;
};

/// v_i = d_i S / m_i.
std::vector<double> velocity_field(const MftState& s, std::span<const double> x,
                                   const TimeVector& t);

/// Classic RK4 along the diagonal flow with offsets `offsets`, from tau0 to
/// tau1 (either direction). Throws NodeStall when halving is exhausted.
BeableSheet integrate_sheet(const MftState& s, std::span<const double> offsets,
                            std::span<const double> x0, double tau0, double tau1,
                            double step = kDefaultStep);

/// Final positions of many sheets sharing offsets and tau range. Entries are
/// nullopt for samples that stalled at a node. Bit-identical to integrating
/// each sample with integrate_sheet, for any thread count.
std::vector<std::optional<std::vector<double>>> propagate_ensemble(
    const MftState& s, std::span<const double> offsets,
    const std::vector<std::vector<double>>& x0, double tau0, double tau1,
    double step = kDefaultStep, std::size_t threads = 0);

enum class SheetRuleKind {
  /// X0(offsets) = reference for every offset vector.
  Constant,
  /// X0(offsets) = reference carried from tau0 * 1 to tau0 * 1 + offsets by
  /// moving one particle time at a time with dx_i/dt_i = v_i. Each partial
  /// move preserves |Psi|^2, so rho-distributed references stay rho-distributed.
  Transport,
};

/// Initial data of the beable on the transversal slice tau = tau0.
struct SheetRule {
  SheetRuleKind kind = SheetRuleKind::Constant;
  std::vector<double> reference;

  std::vector<double> initial_config(const MftState& s, std::span<const double> offsets,
                                     double tau0, double step = kDefaultStep) const;
};

/// The map reference -> x(T) for one target T, with every flow it needs
/// (transport moves, then the diagonal sheet) precomputed so that many
/// references can share the snapshots.
class BeableMap {
 public:
  BeableMap(const MftState& s, SheetRuleKind kind, double tau0, const TimeVector& t,
            double step = kDefaultStep);

  /// Throws NodeStall.
  std::vector<double> operator()(std::vector<double> reference) const;

 private:
  std::vector<LineFlow> transport_;
  std::vector<LineFlow> diagonal_;
};

/// x(T): decomposes T into (tau, offsets), takes the slice data from `rule`
/// and integrates the offset sheet from tau0 to tau.
std::vector<double> beable_at(const MftState& s, const SheetRule& rule, double tau0,
                              const TimeVector& t, double step = kDefaultStep);

/// max_i |m_i x_i'' + d_i(V_i + Q)| at every interior grid point, with x''
/// from central differences on the sheet and d_i Q by central differences of
/// the quantum potential (fd_step <= 0 selects the sheet's grid step).
std::vector<double> newton_residual(const BeableSheet& sheet, const MftState& s,
                                    double fd_step = 0.0);

}  // namespace mft
