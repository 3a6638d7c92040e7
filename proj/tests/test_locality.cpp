#include <doctest.h>

#include <cmath>

#include "mft/locality.hpp"
#include "oracles.hpp"

using namespace mft;

namespace {

MftState entangled() {
  const double c = std::sqrt(0.5);
  auto pk = [](double p) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, p, 2.0); };
  return MftState({c, c}, {ProductState{{pk(1.0), pk(-1.0)}}, ProductState{{pk(-1.0), pk(1.0)}}});
}

}  // namespace

TEST_CASE("product states have no cross-time sensitivity") {
  const auto p1 = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), -1.0, 0.5, 1.0);
  const auto p2 = GaussianPacket::with_sigma(1.5, PotentialSpec::harmonic(0.5), 1.0, -0.5, 0.9);
  const auto s = MftState::product(ProductState{{p1, p2}});
  for (const auto& r : sensitivity_scan(s, TimeVector{{0.3, -0.2}}, 0, 1)) {
    CHECK(std::fabs(r.value) < 1e-9);
    CHECK(r.converged);
  }
}

TEST_CASE("entangled states couple the particle times") {
  const auto s = entangled();
  const auto scan = sensitivity_scan(s, TimeVector::uniform(2, 0.0), 0, 1);
  REQUIRE_FALSE(scan.empty());
  double worst = 0.0;
  for (const auto& r : scan) worst = std::max(worst, std::fabs(r.value));
  CHECK(worst > 1e-3);

  // v_1 and v_2 swap roles under exchanging the particles
  const std::vector<double> x{0.6, -1.3};
  const std::vector<double> xs{-1.3, 0.6};
  const auto a = cross_time_sensitivity(s, x, TimeVector{{0.2, 0.7}}, 0, 1);
  const auto b = cross_time_sensitivity(s, xs, TimeVector{{0.7, 0.2}}, 1, 0);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-8));
  CHECK(a.converged);
}

TEST_CASE("sensitivity agrees with a finite difference of the phase gradient") {
  const auto s = entangled();
  const std::vector<double> x{0.6, -1.3};
  const double h = 1e-3;
  auto v1 = [&](double t2) {
    return oracle::phase_gradient_fd(s, x, TimeVector{{0.2, t2}}, 0, 1e-5);
  };
  const double fd = (v1(0.7 + h) - v1(0.7 - h)) / (2.0 * h);
  const auto r = cross_time_sensitivity(s, x, TimeVector{{0.2, 0.7}}, 0, 1);
  CHECK(r.value == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("single-time oracle in the library agrees with the test oracle") {
  const auto s = entangled();
  const std::vector<double> x0{0.4, -1.1};
  const auto traj = single_time_oracle(s, x0, 0.0, 1.0, 1e-4);
  const std::vector<double> end{1.0};
  const auto ref = oracle::single_time_trajectory(s, x0, 0.0, end);
  CHECK(std::fabs(traj.positions.back()[0] - ref[0][0]) < 1e-8);
  CHECK(std::fabs(traj.positions.back()[1] - ref[0][1]) < 1e-8);
}

TEST_CASE("EPR scan on separated branches") {
  auto pk = [](double p) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, p, 2.0); };
  const MftState s({std::sqrt(0.3), std::sqrt(0.7)},
                   {ProductState{{pk(2.0), pk(-2.0)}}, ProductState{{pk(-2.0), pk(2.0)}}});
  SamplerConfig cfg;
  cfg.n_samples = 200;
  cfg.burn_in = 200;
  const auto refs = sample_initial(s, TimeVector::uniform(2, 12.0), cfg, 1);
  const std::vector<double> grid{0.0, 1.0};
  const auto r = epr_timing_scan(s, 12.0, grid, refs, 12.0, 0.05, kDominance, 1);
  CHECK(r.flips == 0);
  CHECK(r.stalled == 0);
  CHECK(r.particle1_overlap < kOverlapThreshold);
  CHECK(r.rows.size() == 400);
  CHECK(r.csv().rfind("sample,t2,branch,w_max\n", 0) == 0);

  // not separated yet at t1 = 0
  const auto early = epr_timing_scan(s, 0.0, grid, refs, 12.0, 0.05, kDominance, 1);
  CHECK_FALSE(early.passed());
}
