#pragma once

#include <complex>

namespace mft {

using cplx = std::complex<double>;

enum class PotentialKind { Free, Harmonic };

/// Time-independent external potential of one particle slot.
/// Harmonic means V(x) = m omega^2 x^2 / 2 (natural units, hbar = 1).
struct PotentialSpec {
  PotentialKind kind = PotentialKind::Free;
  double omega = 0.0;

  static PotentialSpec free() { return {}; }
  static PotentialSpec harmonic(double omega) { return {PotentialKind::Harmonic, omega}; }

  void validate() const;
  double value(double x, double mass) const;
  double gradient(double x, double mass) const;

  friend bool operator==(const PotentialSpec& a, const PotentialSpec& b) {
    if (a.kind != b.kind) return false;
    return a.kind == PotentialKind::Free || a.omega == b.omega;
  }
};

/// One-particle Gaussian in Heller form
///
///   psi(x) = N exp(i [A (x - xi)^2 + p (x - xi) + gamma]),   N = (2 Im A / pi)^(1/4)
///
/// with all parameters referring to `ref_time`. Normalization is implied by
/// Im A, so `phase` is purely real.
struct GaussianPacket {
  double mass = 1.0;
  PotentialSpec potential;
  double center = 0.0;
  double momentum = 0.0;
  cplx width_param{0.0, 0.25};
  double phase = 0.0;
  double ref_time = 0.0;

  /// Packet with position standard deviation `sigma` (A = i / (4 sigma^2)).
  static GaussianPacket with_sigma(double mass, PotentialSpec potential, double center,
                                   double momentum, double sigma, double ref_time = 0.0);

  /// Minimum-uncertainty coherent state of a harmonic slot (A = i m omega / 2).
  static GaussianPacket coherent(double mass, double omega, double center, double momentum,
                                 double ref_time = 0.0);

  void validate() const;

  /// Position standard deviation of |psi|^2.
  double sigma() const;
  double log_norm() const;

  /// log psi(x) at ref_time; real part is log|psi|, imaginary part the unwrapped phase.
  cplx log_value(double x) const;
  /// psi'(x) / psi(x)
  cplx log_derivative(double x) const;
  /// psi''(x) / psi(x)
  cplx second_derivative_ratio(double x) const;

  friend bool operator==(const GaussianPacket&, const GaussianPacket&) = default;
};

/// Closed-form Heller propagation of `packet` to time `t` (forward or backward).
GaussianPacket evolve_packet(const GaussianPacket& packet, double t);

/// <a|b> evaluated after bringing both packets to a common time. Both packets
/// must share mass and potential.
cplx overlap(const GaussianPacket& a, const GaussianPacket& b);

/// Integral of |psi_a| |psi_b| for two packets given at the same time.
double magnitude_overlap(const GaussianPacket& a, const GaussianPacket& b);

}  // namespace mft
