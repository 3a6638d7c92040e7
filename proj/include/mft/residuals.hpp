#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mft/packet.hpp"
#include "mft/state.hpp"

namespace mft {

struct FiniteDifferenceSteps {
  double space = 1e-3;
  double time = 1e-3;
};

/// Any multi-time wave function given through its complex logarithm, plus the
/// per-particle masses and potentials that define H_i.
struct FieldModel {
  std::function<cplx(std::span<const double> x, std::span<const double> t)> log_psi;
  std::vector<double> masses;
  std::vector<PotentialSpec> potentials;

  static FieldModel of(const MftState& state);
};

/// |H_i Psi - i dPsi/dt_i| / |Psi| with central differences.
double schrodinger_residual(const FieldModel& model, std::span<const double> x,
                            std::span<const double> t, std::size_t i,
                            FiniteDifferenceSteps steps = {});
double schrodinger_residual(const MftState& state, std::span<const double> x,
                            const TimeVector& t, std::size_t i,
                            FiniteDifferenceSteps steps = {});

/// Residuals of the many-time Hamilton-Jacobi equation (absolute, energy
/// units) and of the continuity equation (divided by rho), with d/dT taken as
/// the sum of the partial time derivatives.
struct HjContinuityResidual {
  double hamilton_jacobi = 0.0;
  double continuity = 0.0;
};

HjContinuityResidual hj_continuity_residual(const FieldModel& model, std::span<const double> x,
                                            std::span<const double> t,
                                            FiniteDifferenceSteps steps = {});
HjContinuityResidual hj_continuity_residual(const MftState& state, std::span<const double> x,
                                            const TimeVector& t,
                                            FiniteDifferenceSteps steps = {});

struct ProbePoint {
  std::vector<double> x;
  TimeVector t;
};

/// Random non-node probe points: each t_i uniform in [-t_max, t_max], then X
/// drawn from |Psi(., T)|^2 by a short Metropolis chain.
std::vector<ProbePoint> random_probe_points(const MftState& s, std::size_t count, double t_max,
                                            std::uint64_t seed);

/// All residuals at one point; `schrodinger` is the maximum over particles.
struct ResidualSet {
  double schrodinger = 0.0;
  double hamilton_jacobi = 0.0;
  double continuity = 0.0;
};

ResidualSet residuals_at(const MftState& s, const ProbePoint& p, FiniteDifferenceSteps steps);

}  // namespace mft
