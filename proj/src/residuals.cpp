#include "mft/residuals.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mft/ensemble.hpp"
#include "mft/errors.hpp"

namespace mft {

namespace {

constexpr cplx kI{0.0, 1.0};

/// Evaluates log Psi relative to a base point so that ratios stay O(1).
class Probe {
 public:
  Probe(const FieldModel& model, std::span<const double> x, std::span<const double> t)
      : model_(model), x_(x.begin(), x.end()), t_(t.begin(), t.end()),
        base_(model.log_psi(x, t)) {}

  /// log(Psi(X + dx e_i, T + dt e_j) / Psi(X, T)); pass i or j == npos to skip.
  cplx log_ratio(std::size_t i, double dx, std::size_t j, double dt) const {
    std::vector<double> x = x_;
    std::vector<double> t = t_;
    if (i < x.size()) x[i] += dx;
    if (j < t.size()) t[j] += dt;
    return model_.log_psi(x, t) - base_;
  }

  cplx ratio_x(std::size_t i, double dx) const { return std::exp(log_ratio(i, dx, npos, 0.0)); }
  cplx ratio_t(std::size_t j, double dt) const { return std::exp(log_ratio(npos, 0.0, j, dt)); }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  const FieldModel& model_;
  std::vector<double> x_;
  std::vector<double> t_;
  cplx base_;
};

}  // namespace

FieldModel FieldModel::of(const MftState& state) {
  FieldModel m;
  m.log_psi = [state](std::span<const double> x, std::span<const double> t) {
    return state.at(t).log_psi(x);
  };
  for (std::size_t i = 0; i < state.particle_count(); ++i) {
    m.masses.push_back(state.mass(i));
    m.potentials.push_back(state.potential(i));
  }
  return m;
}

double schrodinger_residual(const FieldModel& model, std::span<const double> x,
                            std::span<const double> t, std::size_t i,
                            FiniteDifferenceSteps steps) {
  const Probe probe(model, x, t);
  const double hx = steps.space;
  const double ht = steps.time;
  const cplx lap = (probe.ratio_x(i, hx) - 2.0 + probe.ratio_x(i, -hx)) / (hx * hx);
  const cplx dt = (probe.ratio_t(i, ht) - probe.ratio_t(i, -ht)) / (2.0 * ht);
  const double m = model.masses[i];
  const cplx h_psi = -lap / (2.0 * m) + model.potentials[i].value(x[i], m);
  return std::abs(h_psi - kI * dt);
}

double schrodinger_residual(const MftState& state, std::span<const double> x,
                            const TimeVector& t, std::size_t i, FiniteDifferenceSteps steps) {
  return schrodinger_residual(FieldModel::of(state), x, t, i, steps);
}

HjContinuityResidual hj_continuity_residual(const FieldModel& model, std::span<const double> x,
                                            std::span<const double> t,
                                            FiniteDifferenceSteps steps) {
  const Probe probe(model, x, t);
  const double hx = steps.space;
  const double ht = steps.time;
  const std::size_t n = x.size();

  // g = d Psi / Psi, c = d^2 Psi / Psi and e = d_t Psi / Psi from central
  // differences of Psi ratios; then d S = Im g, lap R / R = Re c + (Im g)^2,
  // d^2 S = Im c - 2 Re g Im g, d log R = Re g.
  double hj = 0.0;
  double cont = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = model.masses[i];
    const cplx up = probe.ratio_x(i, hx);
    const cplx down = probe.ratio_x(i, -hx);
    const cplx g = (up - down) / (2.0 * hx);
    const cplx c = (up - 2.0 + down) / (hx * hx);
    const double grad_s = g.imag();
    const double lap_r_over_r = c.real() + grad_s * grad_s;
    const double curv_s = c.imag() - 2.0 * g.real() * g.imag();
    hj += grad_s * grad_s / (2.0 * m) + model.potentials[i].value(x[i], m) - lap_r_over_r / (2.0 * m);
    // d_i(rho v_i) / rho = (2 d_i log R d_i S + d_i^2 S) / m
    cont += (2.0 * g.real() * grad_s + curv_s) / m;
  }
  for (std::size_t j = 0; j < n; ++j) {
    const cplx e = (probe.ratio_t(j, ht) - probe.ratio_t(j, -ht)) / (2.0 * ht);
    hj += e.imag();
    cont += 2.0 * e.real();
  }
  return {std::abs(hj), std::abs(cont)};
}

HjContinuityResidual hj_continuity_residual(const MftState& state, std::span<const double> x,
                                            const TimeVector& t, FiniteDifferenceSteps steps) {
  return hj_continuity_residual(FieldModel::of(state), x, t, steps);
}

}  // namespace mft

namespace mft {

std::vector<ProbePoint> random_probe_points(const MftState& s, std::size_t count, double t_max,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> time(-t_max, t_max);
  const std::size_t n = s.particle_count();

  SamplerConfig cfg;
  cfg.n_samples = 1;
  cfg.burn_in = 200;
  cfg.thinning = 1;
  std::vector<ProbePoint> out;
  while (out.size() < count) {
    ProbePoint p;
    for (std::size_t i = 0; i < n; ++i) p.t.times.push_back(t_max > 0.0 ? time(rng) : 0.0);
    cfg.seed = rng();
    p.x = sample_initial(s, p.t, cfg, 1).front();
    try {
      s.at(p.t.times).log_psi(p.x);
    } catch (const NodeError&) {
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

ResidualSet residuals_at(const MftState& s, const ProbePoint& p, FiniteDifferenceSteps steps) {
  const FieldModel model = FieldModel::of(s);
  ResidualSet r;
  for (std::size_t i = 0; i < s.particle_count(); ++i) {
    r.schrodinger = std::max(r.schrodinger, schrodinger_residual(model, p.x, p.t.times, i, steps));
  }
  const auto hj = hj_continuity_residual(model, p.x, p.t.times, steps);
  r.hamilton_jacobi = hj.hamilton_jacobi;
  r.continuity = hj.continuity;
  return r;
}

}  // namespace mft
