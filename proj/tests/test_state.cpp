#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mft/errors.hpp"
#include "mft/state.hpp"
#include "oracles.hpp"

using namespace mft;

namespace {

MftState two_branch_free() {
  const double c = std::sqrt(0.5);
  auto pk = [](double p) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, p, 2.0); };
  return MftState({c, c}, {ProductState{{pk(1.0), pk(-1.0)}}, ProductState{{pk(-1.0), pk(1.0)}}})
      .normalized();
}

MftState three_particle() {
  auto f1 = [](double c, double p) {
    return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), c, p, 3.0);
  };
  auto f2 = [](double c, double p) {
    return GaussianPacket::with_sigma(2.0, PotentialSpec::free(), c, p, 3.0);
  };
  auto h3 = [](double c, double p) { return GaussianPacket::coherent(1.0, 1.0, c, p); };
  return MftState({0.6, cplx{0.0, 0.64}, 0.48},
                  {ProductState{{f1(-0.5, 1.0), f2(0.0, -1.0), h3(0.5, 0.0)}},
                   ProductState{{f1(0.0, -1.0), f2(0.5, 1.0), h3(-0.5, 0.0)}},
                   ProductState{{f1(0.5, 1.0), f2(-0.5, 1.0), h3(0.0, 1.0)}}})
      .normalized();
}

}  // namespace

TEST_CASE("free Gaussian density and quantum potential at the origin") {
  const auto s = MftState::product(
      ProductState{{GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, 0.0, 1.0)}});
  const std::vector<double> x{0.0};
  const auto t = TimeVector::uniform(1, 0.0);
  CHECK(density(s, x, t) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  // Q = -(1/2m) R''/R = 1 / (4 sigma^2) at the center
  CHECK(quantum_potential(s, x, t) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("two-branch free state matches the multiprecision textbook evaluator") {
  const auto s = two_branch_free();
  const std::vector<cplx> coeff = s.coefficients();
  const std::vector<std::vector<oracle::FreeFactor>> br{
      {{1.0, 0.0, 1.0, 2.0}, {1.0, 0.0, -1.0, 2.0}},
      {{1.0, 0.0, -1.0, 2.0}, {1.0, 0.0, 1.0, 2.0}}};
  const std::vector<std::vector<double>> times{{0.0, 0.0}, {1.0, -0.5}, {3.0, 0.7}, {-2.5, 4.0}};
  const std::vector<std::vector<double>> xs{{0.3, -1.2}, {2.0, 1.0}, {-3.1, 0.4}};
  for (const auto& tt : times) {
    for (const auto& x : xs) {
      const cplx ref = oracle::free_state_mp(coeff, br, x, tt);
      const cplx got = evaluate_psi(s, x, TimeVector{tt}).value();
      CHECK(std::abs(got - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("equal times reduce to the single-time wave function") {
  for (const auto& s : {two_branch_free(), three_particle()}) {
    const std::size_t n = s.particle_count();
    for (double t : {0.0, 0.8, -1.7, 2.0}) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = 0.4 * double(i) - 0.3;
      const cplx ref = oracle::single_time_psi(s, x, t);
      const cplx got = evaluate_psi(s, x, TimeVector::uniform(n, t)).value();
      CHECK(std::abs(got - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
    }
  }
}

TEST_CASE("phase gradient agrees with finite differences") {
  const auto s = three_particle();
  const TimeVector t{{0.3, -1.0, 2.2}};
  const std::vector<std::vector<double>> xs{{0.1, 0.2, -0.3}, {1.5, -0.7, 0.9}, {-2.0, 1.0, 0.0}};
  for (const auto& x : xs) {
    for (std::size_t i = 0; i < 3; ++i) {
      const double fd = oracle::phase_gradient_fd(s, x, t, i, 1e-4);
      CHECK(std::fabs(phase_gradient(s, x, t, i) - fd) < 1e-6);
    }
  }
}

TEST_CASE("normalization holds for every time vector") {
  const auto s2 = two_branch_free();
  CHECK(std::fabs(s2.norm_squared() - 1.0) < 1e-12);
  for (const auto& tt : std::vector<std::vector<double>>{{0.0, 0.0}, {2.0, -3.0}, {5.0, 1.0}}) {
    CHECK(std::fabs(oracle::density_integral(s2, TimeVector{tt}, 30.0, 601) - 1.0) < 1e-6);
  }
  const auto s3 = three_particle();
  CHECK(std::fabs(s3.norm_squared() - 1.0) < 1e-12);
  CHECK(std::fabs(oracle::density_integral(s3, TimeVector{{1.0, -0.5, 0.5}}, 30.0, 121) - 1.0) <
        1e-6);
}

TEST_CASE("node detection") {
  // antisymmetric superposition vanishes on x1 = x2
  auto pk = [](double c) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), c, 0.0, 1.0); };
  const MftState s({1.0, -1.0}, {ProductState{{pk(-1.0), pk(1.0)}}, ProductState{{pk(1.0), pk(-1.0)}}});
  const std::vector<double> x{0.3, 0.3};
  CHECK_THROWS_AS(evaluate_psi(s, x, TimeVector::uniform(2, 0.0)), NodeError);
  const std::vector<double> y{0.3, 0.5};
  CHECK_NOTHROW(evaluate_psi(s, y, TimeVector::uniform(2, 0.0)));
}
