#include <doctest.h>

#include <cmath>

#include "mft/dynamics.hpp"
#include "mft/errors.hpp"
#include "oracles.hpp"

using namespace mft;

namespace {

MftState free_packet() {
  return MftState::product(
      ProductState{{GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, 0.0, 1.0)}});
}

MftState entangled() {
  const double c = std::sqrt(0.5);
  auto pk = [](double p) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, p, 2.0); };
  return MftState({c, c}, {ProductState{{pk(1.0), pk(-1.0)}}, ProductState{{pk(-1.0), pk(1.0)}}});
}

double sup_distance(const BeableSheet& sheet, const std::vector<std::vector<double>>& ref,
                    std::size_t stride) {
  double worst = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    const auto& x = sheet.positions[(k + 1) * stride];
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::fabs(x[i] - ref[k][i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("free packet trajectory is x0 sigma(t) / sigma(0)") {
  const std::vector<double> offsets{0.0};
  const std::vector<double> x0{1.0};
  const auto sheet = integrate_sheet(free_packet(), offsets, x0, 0.0, 2.0);
  CHECK(sheet.positions.back()[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  for (std::size_t k = 0; k < sheet.tau_grid.size(); k += 250) {
    CHECK(std::fabs(sheet.positions[k][0] - oracle::free_trajectory(1.0, sheet.tau_grid[k], 1.0, 1.0)) <
          1e-10);
  }
}

TEST_CASE("quantum force pushes outward from the packet center") {
  const std::vector<double> offsets{0.0};
  for (double x0 : {-1.5, 0.5, 2.0}) {
    const std::vector<double> start{x0};
    const auto sheet = integrate_sheet(free_packet(), offsets, start, 0.0, 0.5, 1e-2);
    const auto& p = sheet.positions;
    const double accel = (p[2][0] - 2.0 * p[1][0] + p[0][0]);
    CHECK(accel * x0 > 0.0);
    CHECK(std::fabs(p.back()[0]) > std::fabs(x0));
  }
}

TEST_CASE("zero offsets reproduce the single-time trajectory") {
  const auto s = entangled();
  const std::vector<double> offsets{0.0, 0.0};
  const std::vector<double> x0{0.4, -1.1};
  // this start passes close to a node, so both sides need the fine step
  const auto sheet = integrate_sheet(s, offsets, x0, 0.0, 2.0, 1e-4);
  std::vector<double> out_times;
  for (int k = 1; k <= 20; ++k) out_times.push_back(0.1 * k);
  const auto ref = oracle::single_time_trajectory(s, x0, 0.0, out_times);
  CHECK(sup_distance(sheet, ref, 1000) < 1e-8);
}

TEST_CASE("product state offsets shift each particle's own time") {
  const auto p1 = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), -1.0, 0.5, 1.0);
  const auto p2 = GaussianPacket::with_sigma(1.5, PotentialSpec::harmonic(0.5), 1.0, -0.5, 0.9);
  const auto s = MftState::product(ProductState{{p1, p2}});
  const std::vector<double> offsets{1.0, -1.0};
  const std::vector<double> x0{-0.5, 1.2};
  const auto sheet = integrate_sheet(s, offsets, x0, 0.0, 2.0);

  const auto one = MftState::product(ProductState{{p1}});
  const auto two = MftState::product(ProductState{{p2}});
  const std::vector<double> t1{3.0};
  const std::vector<double> t2{1.0};
  const std::vector<double> s1{x0[0]};
  const std::vector<double> s2{x0[1]};
  const auto r1 = oracle::single_time_trajectory(one, s1, 1.0, t1);
  const auto r2 = oracle::single_time_trajectory(two, s2, -1.0, t2);
  CHECK(std::fabs(sheet.positions.back()[0] - r1[0][0]) < 1e-8);
  CHECK(std::fabs(sheet.positions.back()[1] - r2[0][0]) < 1e-8);
}

TEST_CASE("coherent state trajectories move with the classical center") {
  const auto pk = GaussianPacket::coherent(1.0, 1.0, 1.0, 0.0);
  const auto s = MftState::product(ProductState{{pk}});
  const std::vector<double> offsets{0.0};
  const std::vector<double> x0{1.3};
  const auto sheet = integrate_sheet(s, offsets, x0, 0.0, 2.0);
  for (std::size_t k = 0; k < sheet.tau_grid.size(); k += 200) {
    CHECK(sheet.positions[k][0] == doctest::Approx(0.3 + std::cos(sheet.tau_grid[k])).epsilon(1e-10));
  }
}

TEST_CASE("integration is reversible") {
  const auto s = entangled();
  const std::vector<double> offsets{0.5, -0.5};
  const std::vector<double> x0{0.7, 0.2};
  const auto fwd = integrate_sheet(s, offsets, x0, 0.0, 1.5);
  const auto back = integrate_sheet(s, offsets, fwd.positions.back(), 1.5, 0.0);
  CHECK(std::fabs(back.positions.back()[0] - x0[0]) < 1e-7);
  CHECK(std::fabs(back.positions.back()[1] - x0[1]) < 1e-7);
}

TEST_CASE("one-dimensional trajectories never cross") {
  auto pk = [](double c, double p) {
    return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), c, p, 0.7);
  };
  const MftState s({std::sqrt(0.5), std::sqrt(0.5)},
                   {ProductState{{pk(-2.0, 1.5)}}, ProductState{{pk(2.0, -1.5)}}});
  const std::vector<double> offsets{0.0};
  std::vector<std::vector<double>> starts;
  for (int k = -6; k <= 6; ++k) starts.push_back({0.5 * k + 0.01});
  const auto end = propagate_ensemble(s, offsets, starts, 0.0, 3.0, 1e-3, 1);
  std::vector<double> finals;
  for (const auto& e : end) {
    if (e) finals.push_back((*e)[0]);
  }
  REQUIRE(finals.size() >= starts.size() - 1);
  for (std::size_t k = 1; k < finals.size(); ++k) CHECK(finals[k] > finals[k - 1]);
}

TEST_CASE("ensemble propagation is bit-identical to single sheets for any thread count") {
  const auto s = entangled();
  const std::vector<double> offsets{0.5, -0.5};
  std::vector<std::vector<double>> starts;
  for (int k = 0; k < 9; ++k) starts.push_back({-2.0 + 0.5 * k, 1.0 - 0.3 * k});
  const auto a = propagate_ensemble(s, offsets, starts, 0.0, 1.0, 1e-2, 1);
  const auto b = propagate_ensemble(s, offsets, starts, 0.0, 1.0, 1e-2, 4);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    REQUIRE(a[k].has_value());
    CHECK(*a[k] == *b[k]);
    CHECK(*a[k] == integrate_sheet(s, offsets, starts[k], 0.0, 1.0, 1e-2).positions.back());
  }
}

TEST_CASE("quantum Newton equation holds on a sheet") {
  const std::vector<double> offsets{0.0};
  const std::vector<double> x0{1.0};
  const auto sheet = integrate_sheet(free_packet(), offsets, x0, 0.0, 2.0);
  const auto r = newton_residual(sheet, free_packet());
  CHECK(*std::max_element(r.begin(), r.end()) < 1e-3);
}

TEST_CASE("diagonal chart") {
  const auto c = DiagonalChart::from_times(TimeVector{{1.0, 2.0, 6.0}});
  CHECK(c.tau == doctest::Approx(3.0));
  CHECK(c.offsets[0] == doctest::Approx(-2.0));
  CHECK(c.gauge_error() < 1e-15);
  CHECK(c.times_at(0.0).times[2] == doctest::Approx(3.0));
}

TEST_CASE("transport sheet rule leaves a product state's particles on their own trajectories") {
  const auto p1 = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, 0.3, 1.0);
  const auto p2 = GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 1.0, -0.2, 1.0);
  const auto s = MftState::product(ProductState{{p1, p2}});
  const std::vector<double> ref{0.5, 0.4};
  const SheetRule rule{SheetRuleKind::Transport, ref};
  const auto x = beable_at(s, rule, 0.0, TimeVector{{2.0, 0.5}});
  const auto one = MftState::product(ProductState{{p1}});
  const auto two = MftState::product(ProductState{{p2}});
  const std::vector<double> t1{2.0};
  const std::vector<double> t2{0.5};
  const std::vector<double> r1{ref[0]};
  const std::vector<double> r2{ref[1]};
  CHECK(std::fabs(x[0] - oracle::single_time_trajectory(one, r1, 0.0, t1)[0][0]) < 1e-8);
  CHECK(std::fabs(x[1] - oracle::single_time_trajectory(two, r2, 0.0, t2)[0][0]) < 1e-8);
}

TEST_CASE("mismatched initial configuration is rejected") {
  const std::vector<double> offsets{0.0};
  const std::vector<double> x0{1.0, 2.0};
  CHECK_THROWS_AS(integrate_sheet(free_packet(), offsets, x0, 0.0, 1.0), ValidationError);
}
