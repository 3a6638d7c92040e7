#include "mft/packet.hpp"

#include <cmath>
#include <numbers>

#include "mft/errors.hpp"

namespace mft {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

/// Continuous argument of Q(theta) = cos(theta) + b sin(theta) measured from
/// theta = 0, for Im b > 0. arg Q increases monotonically by exactly pi per
/// half period because Q(theta + pi) = -Q(theta).
double harmonic_unwrapped_arg(double theta, cplx b) {
  const double k = std::floor(theta / kPi);
  const double reduced = theta - k * kPi;
  const cplx q = std::cos(reduced) + b * std::sin(reduced);
  double arg = std::atan2(q.imag(), q.real());
  // The reduced increase lies in [0, pi); values below -pi/2 are wrap-around.
  if (arg < -0.5 * kPi) arg += 2.0 * kPi;
  return k * kPi + arg;
}

}  // namespace

void PotentialSpec::validate() const {
  if (kind == PotentialKind::Harmonic && !(omega > 0.0 && std::isfinite(omega))) {
    throw ValidationError("harmonic potential requires omega > 0");
  }
}

double PotentialSpec::value(double x, double mass) const {
  if (kind == PotentialKind::Free) return 0.0;
  return 0.5 * mass * omega * omega * x * x;
}

double PotentialSpec::gradient(double x, double mass) const {
  if (kind == PotentialKind::Free) return 0.0;
  return mass * omega * omega * x;
}

GaussianPacket GaussianPacket::with_sigma(double mass, PotentialSpec potential, double center,
                                          double momentum, double sigma, double ref_time) {
  GaussianPacket p;
  p.mass = mass;
  p.potential = potential;
  p.center = center;
  p.momentum = momentum;
  p.width_param = cplx{0.0, 1.0 / (4.0 * sigma * sigma)};
  p.ref_time = ref_time;
  p.validate();
  return p;
}

GaussianPacket GaussianPacket::coherent(double mass, double omega, double center,
                                        double momentum, double ref_time) {
  GaussianPacket p;
  p.mass = mass;
  p.potential = PotentialSpec::harmonic(omega);
  p.center = center;
  p.momentum = momentum;
  p.width_param = cplx{0.0, 0.5 * mass * omega};
  p.ref_time = ref_time;
  p.validate();
  return p;
}

void GaussianPacket::validate() const {
  if (!(mass > 0.0 && std::isfinite(mass))) throw ValidationError("packet mass must be > 0");
  potential.validate();
  if (!finite(width_param) || !(width_param.imag() > 0.0)) {
    throw ValidationError("packet width parameter must have Im(A) > 0");
  }
  if (!std::isfinite(center) || !std::isfinite(momentum) || !std::isfinite(phase) ||
      !std::isfinite(ref_time)) {
    throw ValidationError("packet parameters must be finite");
  }
}

double GaussianPacket::sigma() const { return 0.5 / std::sqrt(width_param.imag()); }

double GaussianPacket::log_norm() const {
  return 0.25 * std::log(2.0 * width_param.imag() / kPi);
}

cplx GaussianPacket::log_value(double x) const {
  const double y = x - center;
  return log_norm() + kI * (width_param * (y * y) + momentum * y + phase);
}

cplx GaussianPacket::log_derivative(double x) const {
  const double y = x - center;
  return kI * (2.0 * width_param * y + momentum);
}

cplx GaussianPacket::second_derivative_ratio(double x) const {
  const cplx d = log_derivative(x);
  return 2.0 * kI * width_param + d * d;
}

GaussianPacket evolve_packet(const GaussianPacket& packet, double t) {
  const double tau = t - packet.ref_time;
  if (tau == 0.0) return packet;

  const double m = packet.mass;
  const cplx a0 = packet.width_param;
  GaussianPacket out = packet;
  out.ref_time = t;

  // Width flows as A = P / (2 Q) with (Q, P) following the linearized
  // classical motion from (1, 2 A0); the prefactor contributes -arg(Q) / 2.
  cplx q;
  cplx p;
  double arg_q;
  if (packet.potential.kind == PotentialKind::Free) {
    q = 1.0 + 2.0 * a0 * tau / m;
    p = 2.0 * a0;
    arg_q = std::atan2(q.imag(), q.real());
    out.center = packet.center + packet.momentum * tau / m;
    out.momentum = packet.momentum;
  } else {
    const double w = packet.potential.omega;
    const double theta = w * tau;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const cplx b = 2.0 * a0 / (m * w);
    q = c + b * s;
    p = 2.0 * a0 * c - m * w * s;
    arg_q = harmonic_unwrapped_arg(theta, b);
    out.center = packet.center * c + packet.momentum / (m * w) * s;
    out.momentum = packet.momentum * c - m * w * packet.center * s;
  }
  out.width_param = p / (2.0 * q);
  // Classical action of a homogeneous quadratic Hamiltonian: (p xi - p0 xi0) / 2.
  const double action = 0.5 * (out.momentum * out.center - packet.momentum * packet.center);
  out.phase = packet.phase + action - 0.5 * arg_q;
  return out;
}

cplx overlap(const GaussianPacket& a, const GaussianPacket& b_in) {
  if (a.mass != b_in.mass || !(a.potential == b_in.potential)) {
    throw ValidationError("overlap requires packets of the same particle slot");
  }
  const GaussianPacket b = evolve_packet(b_in, a.ref_time);
  const cplx aa = a.width_param;
  const cplx ab = b.width_param;
  const cplx alpha = kI * (std::conj(aa) - ab);
  const cplx beta = kI * (b.momentum - 2.0 * ab * b.center) -
                    kI * (a.momentum - 2.0 * std::conj(aa) * a.center);
  const cplx c = kI * (ab * b.center * b.center - b.momentum * b.center + b.phase) -
                 kI * (std::conj(aa) * a.center * a.center - a.momentum * a.center + a.phase) +
                 a.log_norm() + b.log_norm();
  return std::sqrt(kPi / alpha) * std::exp(beta * beta / (4.0 * alpha) + c);
}

double magnitude_overlap(const GaussianPacket& a, const GaussianPacket& b) {
  const double ka = a.width_param.imag();
  const double kb = b.width_param.imag();
  const double d = a.center - b.center;
  return std::exp(a.log_norm() + b.log_norm() - ka * kb * d * d / (ka + kb)) *
         std::sqrt(kPi / (ka + kb));
}

}  // namespace mft
