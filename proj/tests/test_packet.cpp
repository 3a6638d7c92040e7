#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mft/packet.hpp"
#include "oracles.hpp"

using namespace mft;

TEST_CASE("free packet spreads like the grid solution") {
  const auto pk = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, 0.0, 1.0);
  oracle::GridSolver grid(-30.0, 30.0, 6001, 1.0, 0.0);
  std::vector<cplx> psi0(grid.x().size());
  for (std::size_t k = 0; k < psi0.size(); ++k) psi0[k] = std::exp(pk.log_value(grid.x()[k]));
  grid.set(psi0);
  grid.evolve(2.0, 1e-3);

  // sigma(t)^2 = 1 + t^2 / 4 for m = sigma0 = 1
  CHECK(grid.variance() == doctest::Approx(2.0).epsilon(1e-4));
  const auto at2 = evolve_packet(pk, 2.0);
  CHECK(at2.sigma() * at2.sigma() == doctest::Approx(2.0).epsilon(1e-12));

  double worst = 0.0;
  for (std::size_t k = 0; k < grid.x().size(); k += 50) {
    const double x = grid.x()[k];
    if (std::fabs(x) > 6.0) continue;
    worst = std::max(worst, std::abs(std::exp(at2.log_value(x)) - grid.psi()[k]));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("coherent state returns after one period") {
  const double omega = 1.3;
  const auto pk = GaussianPacket::coherent(1.0, omega, 1.0, 0.4);
  const double period = 2.0 * std::numbers::pi / omega;
  const auto back = evolve_packet(pk, period);
  CHECK(back.center == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(back.momentum == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(std::abs(back.width_param - pk.width_param) < 1e-10);
  // global phase after a period is exp(-i omega T / 2) = -1
  const double x = 0.7;
  const cplx ratio = std::exp(back.log_value(x) - pk.log_value(x));
  CHECK(std::abs(ratio + 1.0) < 1e-9);

  const auto quarter = evolve_packet(pk, period / 4);
  CHECK(quarter.center == doctest::Approx(0.4 / omega).epsilon(1e-10));
  CHECK(quarter.sigma() == doctest::Approx(pk.sigma()).epsilon(1e-12));
}

TEST_CASE("harmonic packet follows the grid solution") {
  const auto pk = GaussianPacket::with_sigma(1.5, PotentialSpec::harmonic(0.5), 1.0, -0.5, 0.9);
  oracle::GridSolver grid(-20.0, 20.0, 4001, 1.5, 0.5);
  std::vector<cplx> psi0(grid.x().size());
  for (std::size_t k = 0; k < psi0.size(); ++k) psi0[k] = std::exp(pk.log_value(grid.x()[k]));
  grid.set(psi0);
  grid.evolve(3.0, 5e-4);
  const auto at = evolve_packet(pk, 3.0);
  CHECK(grid.mean() == doctest::Approx(at.center).epsilon(1e-4));
  CHECK(grid.variance() == doctest::Approx(at.sigma() * at.sigma()).epsilon(1e-4));
}

TEST_CASE("backward evolution inverts forward evolution") {
  const auto pk = GaussianPacket::with_sigma(2.0, PotentialSpec::harmonic(0.7), -0.3, 1.1, 0.6);
  const auto there = evolve_packet(pk, 4.2);
  const auto back = evolve_packet(there, 0.0);
  CHECK(back.center == doctest::Approx(pk.center).epsilon(1e-12));
  CHECK(back.momentum == doctest::Approx(pk.momentum).epsilon(1e-12));
  CHECK(std::abs(back.log_value(0.1) - pk.log_value(0.1)) < 1e-10);
}

TEST_CASE("overlaps") {
  const auto a = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, 1.0, 2.0);
  CHECK(std::abs(overlap(a, a) - 1.0) < 1e-12);
  CHECK(magnitude_overlap(a, a) == doctest::Approx(1.0));
  auto b = a;
  b.center = 4.0;
  // Bhattacharyya coefficient of two equal-width normals: exp(-d^2 / (8 s^2))
  CHECK(magnitude_overlap(a, b) == doctest::Approx(std::exp(-16.0 / 32.0)).epsilon(1e-12));
  auto c = a;
  c.momentum = -1.0;
  // exp(-sigma^2 dp^2 / 2) with sigma = 2, dp = 2
  CHECK(std::abs(overlap(a, c)) == doctest::Approx(std::exp(-8.0)).epsilon(1e-10));
}

TEST_CASE("invalid packets are rejected") {
  GaussianPacket pk;
  pk.width_param = {0.0, -0.1};
  CHECK_THROWS(pk.validate());
  pk.width_param = {0.0, 0.25};
  pk.mass = 0.0;
  CHECK_THROWS(pk.validate());
  CHECK_THROWS(PotentialSpec::harmonic(-1.0).validate());
}
