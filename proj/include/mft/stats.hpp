#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mft {

struct KsOutcome {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// One-sample Kolmogorov-Smirnov test against a continuous CDF
/// (Stephens' small-sample correction on the asymptotic p-value).
KsOutcome ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov test.
KsOutcome ks_two_sample(std::vector<double> a, std::vector<double> b);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for a binomial proportion at z standard deviations.
Interval wilson_interval(std::size_t successes, std::size_t trials, double z);

}  // namespace mft
