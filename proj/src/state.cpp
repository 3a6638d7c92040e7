#include "mft/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mft/errors.hpp"

namespace mft {

namespace {

constexpr cplx kI{0.0, 1.0};

cplx log_coefficient(cplx c) {
  if (c == cplx{}) return {-std::numeric_limits<double>::infinity(), 0.0};
  return std::log(c);
}

}  // namespace

MftState::MftState(std::vector<cplx> coefficients, std::vector<ProductState> branches)
    : coefficients_(std::move(coefficients)), branches_(std::move(branches)) {
  if (branches_.empty()) throw ValidationError("state needs at least one branch");
  if (coefficients_.size() != branches_.size()) {
    throw ValidationError("coefficient count must equal branch count");
  }
  const std::size_t n = branches_.front().particle_count();
  if (n == 0) throw ValidationError("branches must contain at least one particle");
  bool any_nonzero = false;
  for (std::size_t a = 0; a < branches_.size(); ++a) {
    const cplx c = coefficients_[a];
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw ValidationError("coefficients must be finite");
    }
    any_nonzero = any_nonzero || c != cplx{};
    const auto& packets = branches_[a].packets;
    if (packets.size() != n) {
      throw ValidationError("every branch must have the same particle count");
    }
    for (std::size_t i = 0; i < n; ++i) {
      packets[i].validate();
      const auto& ref = branches_.front().packets[i];
      if (packets[i].mass != ref.mass || !(packets[i].potential == ref.potential)) {
        throw ValidationError("mass and potential must agree across branches for particle " +
                              std::to_string(i + 1));
      }
    }
  }
  if (!any_nonzero) throw ValidationError("at least one coefficient must be nonzero");
}

MftState MftState::product(ProductState branch) {
  return MftState({cplx{1.0, 0.0}}, {std::move(branch)});
}

double MftState::norm_squared() const {
  const std::size_t n = particle_count();
  cplx total{};
  for (std::size_t a = 0; a < branch_count(); ++a) {
    for (std::size_t b = 0; b < branch_count(); ++b) {
      cplx term = std::conj(coefficients_[a]) * coefficients_[b];
      if (term == cplx{}) continue;
      for (std::size_t i = 0; i < n; ++i) {
        term *= overlap(branches_[a].packets[i], branches_[b].packets[i]);
      }
      total += term;
    }
  }
  return total.real();
}

MftState MftState::normalized() const {
  const double scale = 1.0 / std::sqrt(norm_squared());
  std::vector<cplx> c = coefficients_;
  for (auto& v : c) v *= scale;
  return MftState(std::move(c), branches_);
}

Snapshot MftState::at(std::span<const double> times) const { return Snapshot(*this, times); }

Snapshot::Snapshot(const MftState& state, std::span<const double> times)
    : n_(state.particle_count()), times_(times.begin(), times.end()) {
  if (times.size() != n_) {
    throw ValidationError("time vector length " + std::to_string(times.size()) +
                          " does not match particle count " + std::to_string(n_));
  }
  log_coefficients_.reserve(state.branch_count());
  packets_.reserve(state.branch_count() * n_);
  for (std::size_t a = 0; a < state.branch_count(); ++a) {
    log_coefficients_.push_back(log_coefficient(state.coefficients()[a]));
    for (std::size_t i = 0; i < n_; ++i) {
      packets_.push_back(evolve_packet(state.branches()[a].packets[i], times[i]));
    }
  }
  masses_.reserve(n_);
  for (std::size_t i = 0; i < n_; ++i) masses_.push_back(state.mass(i));
}

std::size_t Snapshot::branch_logs(std::span<const double> x, std::span<cplx> out) const {
  if (x.size() != n_) throw ValidationError("configuration length does not match particle count");
  std::size_t best = 0;
  for (std::size_t a = 0; a < log_coefficients_.size(); ++a) {
    cplx l = log_coefficients_[a];
    for (std::size_t i = 0; i < n_; ++i) l += packets_[a * n_ + i].log_value(x[i]);
    out[a] = l;
    if (l.real() > out[best].real()) best = a;
  }
  return best;
}

namespace {

/// Sum of exp(L_a - L_best); throws NodeError when it cancels below threshold.
cplx relative_sum(std::span<const cplx> logs, std::size_t best, std::span<cplx> weights) {
  cplx sum{};
  for (std::size_t a = 0; a < logs.size(); ++a) {
    weights[a] = a == best ? cplx{1.0, 0.0} : std::exp(logs[a] - logs[best]);
    sum += weights[a];
  }
  const double mag = std::abs(sum);
  if (mag < kNodeThreshold) throw NodeError(mag);
  return sum;
}

}  // namespace

cplx Snapshot::log_psi(std::span<const double> x) const {
  const std::size_t nb = branch_count();
  std::vector<cplx> logs(nb);
  std::vector<cplx> weights(nb);
  const std::size_t best = branch_logs(x, logs);
  if (nb == 1) return logs[0];
  const cplx sum = relative_sum(logs, best, weights);
  return logs[best] + std::log(sum);
}

LocalDerivatives Snapshot::derivatives(std::span<const double> x) const {
  const std::size_t nb = branch_count();
  std::vector<cplx> logs(nb);
  std::vector<cplx> weights(nb);
  const std::size_t best = branch_logs(x, logs);
  const cplx sum = relative_sum(logs, best, weights);

  LocalDerivatives d;
  d.log_psi = logs[best] + std::log(sum);
  d.gradient.assign(n_, cplx{});
  d.laplacian.assign(n_, cplx{});
  for (std::size_t a = 0; a < nb; ++a) {
    if (weights[a] == cplx{}) continue;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto& p = packets_[a * n_ + i];
      d.gradient[i] += weights[a] * p.log_derivative(x[i]);
      d.laplacian[i] += weights[a] * p.second_derivative_ratio(x[i]);
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    d.gradient[i] /= sum;
    d.laplacian[i] /= sum;
  }
  return d;
}

void Snapshot::velocity(std::span<const double> x, std::span<double> out) const {
  const std::size_t nb = branch_count();
  if (nb == 1) {
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = packets_[i].log_derivative(x[i]).imag() / masses_[i];
    }
    return;
  }
  std::vector<cplx> logs(nb);
  std::vector<cplx> weights(nb);
  const std::size_t best = branch_logs(x, logs);
  const cplx sum = relative_sum(logs, best, weights);
  for (std::size_t i = 0; i < n_; ++i) {
    cplx g{};
    for (std::size_t a = 0; a < nb; ++a) {
      g += weights[a] * packets_[a * n_ + i].log_derivative(x[i]);
    }
    out[i] = (g / sum).imag() / masses_[i];
  }
}

double Snapshot::velocity(std::span<const double> x, std::size_t i) const {
  std::vector<double> v(n_);
  velocity(x, v);
  return v[i];
}

std::vector<double> Snapshot::branch_log_weights(std::span<const double> x) const {
  std::vector<cplx> logs(branch_count());
  branch_logs(x, logs);
  std::vector<double> out(logs.size());
  for (std::size_t a = 0; a < logs.size(); ++a) out[a] = 2.0 * logs[a].real();
  return out;
}

Amplitude evaluate_psi(const MftState& s, std::span<const double> x, const TimeVector& t) {
  const cplx l = s.at(t).log_psi(x);
  return {l.real(), l.imag()};
}

double density(const MftState& s, std::span<const double> x, const TimeVector& t) {
  const Snapshot snap = s.at(t);
  try {
    return std::exp(2.0 * snap.log_psi(x).real());
  } catch (const NodeError& e) {
    const auto w = snap.branch_log_weights(x);
    const double top = *std::max_element(w.begin(), w.end());
    return std::exp(top) * e.relative_magnitude() * e.relative_magnitude();
  }
}

double phase_gradient(const MftState& s, std::span<const double> x, const TimeVector& t,
                      std::size_t i) {
  return s.at(t).derivatives(x).gradient.at(i).imag();
}

double quantum_potential(const Snapshot& snap, std::span<const double> x) {
  const LocalDerivatives d = snap.derivatives(x);
  double q = 0.0;
  for (std::size_t i = 0; i < d.gradient.size(); ++i) {
    const double grad_s = d.gradient[i].imag();
    const double lap_r_over_r = d.laplacian[i].real() + grad_s * grad_s;
    // Mass is recovered from the packet since Snapshot keeps it per slot.
    q -= lap_r_over_r / (2.0 * snap.packet(0, i).mass);
  }
  return q;
}

double quantum_potential(const MftState& s, std::span<const double> x, const TimeVector& t) {
  return quantum_potential(s.at(t), x);
}

}  // namespace mft
