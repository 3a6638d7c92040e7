#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mft/state.hpp"

namespace mft {

using Configuration = std::vector<double>;

enum class Proposal { MixtureIndependence };

struct SamplerConfig {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 42;
  std::size_t burn_in = 1000;
  std::size_t thinning = 10;
  Proposal proposal = Proposal::MixtureIndependence;

  void validate() const;
  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

/// Stable 64-bit fingerprint of the state parameters.
std::uint64_t state_hash(const MftState& s);

/// Draws configurations from rho(., t0) = |Psi(., t0)|^2 by independence
/// Metropolis-Hastings with the branch-mixture proposal
/// q(X) = sum_a |c_a|^2 prod_i |psi_ai(x_i, t_i)|^2. Every sample owns a chain
/// driven by its own counter-based random stream keyed by (seed, index); the
/// chain is started from a proposal draw and advanced burn_in + thinning
/// transitions. Output is independent of the thread count.
std::vector<Configuration> sample_initial(const MftState& s, const TimeVector& t0,
                                          const SamplerConfig& cfg, std::size_t threads = 0);

/// CDF of the one-particle marginal of rho(., t), obtained by trapezoid
/// quadrature of the analytic density over every other coordinate.
class MarginalCdf {
 public:
  MarginalCdf(const MftState& s, const TimeVector& t, std::size_t coordinate,
              std::size_t points = 8001);

  double operator()(double x) const;
  /// Quadrature mass before normalization; 1 for a normalized state.
  double total_mass() const { return total_; }

 private:
  double lo_;
  double dx_;
  std::vector<double> cdf_;
  double total_;
};

struct KsEntry {
  std::size_t coordinate = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

struct BranchFrequency {
  std::size_t branch = 0;
  double frequency = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double expected = 0.0;
};

struct EnsembleReport {
  std::vector<KsEntry> ks;
  std::vector<BranchFrequency> branches;
  std::size_t samples = 0;
  std::size_t excluded = 0;
  std::size_t unclassified = 0;
  std::size_t flips = 0;
  std::vector<std::string> failures;
  std::vector<std::pair<std::string, std::string>> metadata;

  bool passed() const { return failures.empty(); }
  double unclassified_fraction() const;

  /// `coordinate,ks_stat,p_value,n` rows.
  std::string ks_csv() const;
  /// `branch,freq,ci_low,ci_high,expected` rows.
  std::string branch_csv() const;
  /// key=value lines.
  std::string summary() const;
};

inline constexpr double kKsGate = 0.01;
inline constexpr double kMaxExcludedFraction = 1e-3;
inline constexpr double kMaxUnclassifiedFraction = 1e-2;
inline constexpr double kDominance = 1.0 - 1e-3;
inline constexpr double kOverlapThreshold = 1e-6;

/// Samples at T(tau0), carries every sample along its offset sheet to tau1
/// and compares each coordinate with the exact marginal at T(tau1).
EnsembleReport equivariance_test(const MftState& s, std::span<const double> offsets,
                                 double tau0, double tau1, const SamplerConfig& cfg,
                                 double step, std::size_t threads = 0);

/// w_a = |c_a Psi_a|^2 / sum_b |c_b Psi_b|^2; throws Unclassifiable when every
/// branch term vanishes.
std::vector<double> branch_weights(const MftState& s, std::span<const double> x,
                                   const TimeVector& t);
std::vector<double> branch_weights(const Snapshot& snap, std::span<const double> x);

/// Index of the branch whose weight reaches `dominance`, if any.
std::optional<std::size_t> classify(std::span<const double> weights,
                                    double dominance = kDominance);

/// Born weights |c_a|^2, normalized to sum to one.
std::vector<double> born_weights(const MftState& s);

/// Largest pairwise integral of |Psi_a| |Psi_b| over configuration space at t.
double max_branch_overlap(const MftState& s, const TimeVector& t);

struct CollapseSetup {
  std::vector<double> offsets;
  double tau0 = 0.0;
  double tau1 = 1.0;
  double step = 1e-3;
  /// Re-classification checkpoints after tau1.
  double reclassify_span = 1.0;
  std::size_t reclassify_checks = 4;
  double dominance = kDominance;
};

/// Samples at T(tau0), evolves to T(tau1), classifies each sample by its
/// dominant branch and compares frequencies with |c_a|^2. Samples are
/// re-classified at later checkpoints and every change counts as a flip.
EnsembleReport collapse_statistics(const MftState& s, const CollapseSetup& setup,
                                   const SamplerConfig& cfg, std::size_t threads = 0);

}  // namespace mft
