#include <doctest.h>

#include <cmath>
#include <random>

#include "mft/ensemble.hpp"
#include "mft/stats.hpp"

using namespace mft;

namespace {

MftState entangled(double c1, double c2, double p) {
  auto pk = [](double q) { return GaussianPacket::with_sigma(1.0, PotentialSpec::free(), 0.0, q, 2.0); };
  return MftState({c1, c2}, {ProductState{{pk(p), pk(-p)}}, ProductState{{pk(-p), pk(p)}}})
      .normalized();
}

// Exact draws from a marginal by bisection on its CDF.
std::vector<double> inverse_cdf_draws(const MarginalCdf& cdf, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) {
    const double target = u(rng);
    double lo = -60.0, hi = 60.0;
    for (int k = 0; k < 80; ++k) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < target ? lo : hi) = mid;
    }
    v = 0.5 * (lo + hi);
  }
  return out;
}

}  // namespace

TEST_CASE("sampler matches exact draws from the marginals") {
  const auto s = entangled(std::sqrt(0.5), std::sqrt(0.5), 1.0);
  const TimeVector t{{0.5, -0.5}};
  SamplerConfig cfg;
  cfg.n_samples = 3000;
  cfg.burn_in = 200;
  cfg.seed = 9;
  const auto xs = sample_initial(s, t, cfg, 1);
  REQUIRE(xs.size() == 3000);
  for (std::size_t c = 0; c < 2; ++c) {
    MarginalCdf cdf(s, t, c);
    CHECK(std::fabs(cdf.total_mass() - 1.0) < 1e-8);
    std::vector<double> col;
    for (const auto& x : xs) col.push_back(x[c]);
    CHECK(ks_two_sample(col, inverse_cdf_draws(cdf, 3000, 100 + c)).p_value > 0.01);
  }
}

TEST_CASE("sampler output does not depend on the thread count") {
  const auto s = entangled(0.6, 0.8, 1.0);
  SamplerConfig cfg;
  cfg.n_samples = 257;
  cfg.burn_in = 50;
  const auto t = TimeVector::uniform(2, 1.0);
  CHECK(sample_initial(s, t, cfg, 1) == sample_initial(s, t, cfg, 3));
  auto other = cfg;
  other.seed = 43;
  CHECK(sample_initial(s, t, cfg, 1) != sample_initial(s, t, other, 1));
}

TEST_CASE("branch weights") {
  const auto s = entangled(std::sqrt(0.5), std::sqrt(0.5), 1.0);
  const std::vector<double> mid{0.0, 0.0};
  const auto w = branch_weights(s, mid, TimeVector::uniform(2, 0.0));
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(classify(w).has_value());

  const std::vector<double> far{20.0, -20.0};
  const auto w2 = branch_weights(s, far, TimeVector::uniform(2, 10.0));
  CHECK(w2[0] + w2[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(classify(w2) == std::optional<std::size_t>(0));

  const std::vector<double> dom{0.9995, 0.0005};
  CHECK(classify(dom) == std::optional<std::size_t>(0));
  const std::vector<double> weak{0.998, 0.002};
  CHECK_FALSE(classify(weak).has_value());

  const auto born = born_weights(entangled(0.6, 0.8, 1.0));
  CHECK(born[0] == doctest::Approx(0.36));
  CHECK(born[1] == doctest::Approx(0.64));
}

TEST_CASE("branch overlap falls as packets separate") {
  const auto s = entangled(std::sqrt(0.3), std::sqrt(0.7), 2.0);
  CHECK(max_branch_overlap(s, TimeVector::uniform(2, 0.0)) == doctest::Approx(1.0));
  CHECK(max_branch_overlap(s, TimeVector::uniform(2, 12.0)) < kOverlapThreshold);
}

TEST_CASE("small equivariance run") {
  const auto s = entangled(std::sqrt(0.5), std::sqrt(0.5), 1.0);
  SamplerConfig cfg;
  cfg.n_samples = 400;
  cfg.burn_in = 200;
  const std::vector<double> offsets{0.5, -0.5};
  const auto r = equivariance_test(s, offsets, 0.0, 1.0, cfg, 1e-2, 1);
  CHECK(r.samples == 400);
  CHECK(r.excluded == 0);
  REQUIRE(r.ks.size() == 2);
  for (const auto& k : r.ks) CHECK(k.p_value > 1e-3);
  CHECK(r.summary().find("passed=") != std::string::npos);
}

TEST_CASE("small collapse run") {
  const auto s = entangled(std::sqrt(0.3), std::sqrt(0.7), 2.0);
  SamplerConfig cfg;
  cfg.n_samples = 300;
  cfg.burn_in = 200;
  CollapseSetup setup;
  setup.offsets = {0.0, 0.0};
  setup.tau1 = 12.0;
  setup.step = 0.05;
  setup.reclassify_span = 2.0;
  setup.reclassify_checks = 2;
  const auto r = collapse_statistics(s, setup, cfg, 1);
  CHECK(r.flips == 0);
  CHECK(r.unclassified_fraction() < 0.01);
  REQUIRE(r.branches.size() == 2);
  const double sd = std::sqrt(0.3 * 0.7 / 300.0);
  CHECK(std::fabs(r.branches[0].frequency - 0.3) < 3.0 * sd);
  CHECK(r.branches[0].ci_low < r.branches[0].frequency);
  CHECK(r.branch_csv().find("branch,freq,ci_low,ci_high,expected") != std::string::npos);
}
