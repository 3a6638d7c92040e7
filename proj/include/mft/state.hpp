#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "mft/packet.hpp"

namespace mft {

/// Relative magnitude below which a configuration counts as a node.
inline constexpr double kNodeThreshold = 1e-12;

/// The multi-time argument T = (t_1, ..., t_n).
struct TimeVector {
  std::vector<double> times;

  static TimeVector uniform(std::size_t n, double t) { return {std::vector<double>(n, t)}; }
  std::size_t size() const { return times.size(); }
  double operator[](std::size_t i) const { return times[i]; }
  operator std::span<const double>() const { return times; }
  friend bool operator==(const TimeVector&, const TimeVector&) = default;
};

/// Psi = exp(log_magnitude + i phase). The phase is unwrapped along the
/// dominant branch rather than reduced to a principal value.
struct Amplitude {
  double log_magnitude = 0.0;
  double phase = 0.0;

  cplx value() const { return std::exp(cplx{log_magnitude, phase}); }
};

/// One product branch psi_1(x_1, t_1) ... psi_n(x_n, t_n).
struct ProductState {
  std::vector<GaussianPacket> packets;

  std::size_t particle_count() const { return packets.size(); }
  friend bool operator==(const ProductState&, const ProductState&) = default;
};

/// Per-particle log-derivatives of Psi at one configuration:
/// gradient[i] = d_i Psi / Psi, laplacian[i] = d_i^2 Psi / Psi.
struct LocalDerivatives {
  cplx log_psi;
  std::vector<cplx> gradient;
  std::vector<cplx> laplacian;
};

class Snapshot;

/// Psi(X, T) = sum_a c_a prod_i psi_ai(x_i, t_i).
class MftState {
 public:
  MftState(std::vector<cplx> coefficients, std::vector<ProductState> branches);

  /// Single-branch product state with unit coefficient.
  static MftState product(ProductState branch);

  std::size_t particle_count() const { return branches_.front().particle_count(); }
  std::size_t branch_count() const { return branches_.size(); }
  const std::vector<cplx>& coefficients() const { return coefficients_; }
  const std::vector<ProductState>& branches() const { return branches_; }
  double mass(std::size_t i) const { return branches_.front().packets[i].mass; }
  const PotentialSpec& potential(std::size_t i) const {
    return branches_.front().packets[i].potential;
  }

  /// <Psi|Psi> from analytic packet overlaps. Each particle's overlaps are
  /// taken at a common time of that particle, so the value is independent of T.
  double norm_squared() const;

  /// Copy rescaled so that norm_squared() == 1.
  MftState normalized() const;

  /// All packets evolved to their particle's time in `times`.
  Snapshot at(std::span<const double> times) const;

  friend bool operator==(const MftState&, const MftState&) = default;

 private:
  std::vector<cplx> coefficients_;
  std::vector<ProductState> branches_;
};

/// The state frozen at one TimeVector. Evaluation at many configurations with
/// the same T reuses the evolved packets.
class Snapshot {
 public:
  Snapshot(const MftState& state, std::span<const double> times);

  std::size_t particle_count() const { return n_; }
  std::size_t branch_count() const { return log_coefficients_.size(); }
  const std::vector<double>& times() const { return times_; }

  /// log Psi; throws NodeError at nodes.
  cplx log_psi(std::span<const double> x) const;

  LocalDerivatives derivatives(std::span<const double> x) const;

  /// Im(d_i Psi / Psi) / m_i for every particle, written into `out`.
  void velocity(std::span<const double> x, std::span<double> out) const;

  /// Im(d_i Psi / Psi) / m_i for one particle.
  double velocity(std::span<const double> x, std::size_t i) const;

  /// log |c_a Psi_a|^2 per branch (-inf for vanishing coefficients).
  std::vector<double> branch_log_weights(std::span<const double> x) const;

  /// Evolved packet of branch `a`, particle `i`.
  const GaussianPacket& packet(std::size_t a, std::size_t i) const { return packets_[a * n_ + i]; }

 private:
  /// Complex log of every branch term c_a Psi_a(X); returns index of the largest.
  std::size_t branch_logs(std::span<const double> x, std::span<cplx> out) const;

  std::size_t n_;
  std::vector<double> times_;
  std::vector<cplx> log_coefficients_;
  std::vector<GaussianPacket> packets_;
  std::vector<double> masses_;
};

Amplitude evaluate_psi(const MftState& s, std::span<const double> x, const TimeVector& t);
double density(const MftState& s, std::span<const double> x, const TimeVector& t);
/// d_i S = Im(d_i Psi / Psi).
double phase_gradient(const MftState& s, std::span<const double> x, const TimeVector& t,
                      std::size_t i);
/// Q = -sum_i (1 / 2 m_i) lap_i R / R.
double quantum_potential(const MftState& s, std::span<const double> x, const TimeVector& t);
double quantum_potential(const Snapshot& snap, std::span<const double> x);

}  // namespace mft
