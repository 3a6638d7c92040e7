#pragma once

#include <cstddef>
#include <vector>

namespace mft {

/// One classic fourth-order Runge-Kutta step. The three callables evaluate
/// the field at the start, midpoint and end of the step as f(y, dy), which
/// lets callers cache whatever depends on the stage time alone.
template <class Real, class AtStart, class AtMid, class AtEnd>
void rk4_step(const AtStart& at_start, const AtMid& at_mid, const AtEnd& at_end, Real h,
              std::vector<Real>& y) {
  const std::size_t n = y.size();
  std::vector<Real> k1(n), k2(n), k3(n), k4(n), tmp(n);
  const Real half = h / Real(2);

  at_start(y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + half * k1[i];
  at_mid(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + half * k2[i];
  at_mid(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
  at_end(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += h / Real(6) * (k1[i] + Real(2) * (k2[i] + k3[i]) + k4[i]);
  }
}

/// Fixed-step integration of dy/dt = f(t, y) from t0 to t1 in `steps` equal steps.
template <class Real, class Field>
std::vector<Real> rk4_integrate(const Field& f, std::vector<Real> y, Real t0, Real t1,
                                std::size_t steps) {
  const Real h = (t1 - t0) / Real(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const Real t = t0 + Real(k) * h;
    const Real mid = t + h / Real(2);
    const Real end = t0 + Real(k + 1) * h;
    rk4_step(
        [&](const std::vector<Real>& s, std::vector<Real>& d) { f(t, s, d); },
        [&](const std::vector<Real>& s, std::vector<Real>& d) { f(mid, s, d); },
        [&](const std::vector<Real>& s, std::vector<Real>& d) { f(end, s, d); }, h, y);
  }
  return y;
}

}  // namespace mft
