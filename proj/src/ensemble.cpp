#include "mft/ensemble.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "mft/dynamics.hpp"
#include "mft/errors.hpp"
#include "mft/format.hpp"
#include "mft/parallel.hpp"
#include "mft/stats.hpp"

namespace mft {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t splitmix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the k-th output of stream (seed, id) is a pure
/// function of (seed, id, k).
class CounterStream {
 public:
  using result_type = std::uint64_t;

  CounterStream(std::uint64_t seed, std::uint64_t id)
      : key_(splitmix(seed ^ splitmix(id + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return splitmix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct MixtureComponent {
  double log_weight;
  std::vector<double> mean;
  std::vector<double> sd;
};

class MixtureProposal {
 public:
  explicit MixtureProposal(const Snapshot& snap, const MftState& s) {
    const auto born = born_weights(s);
    for (std::size_t a = 0; a < snap.branch_count(); ++a) {
      if (born[a] <= 0.0) continue;
      MixtureComponent c{std::log(born[a]), {}, {}};
      for (std::size_t i = 0; i < snap.particle_count(); ++i) {
        c.mean.push_back(snap.packet(a, i).center);
        c.sd.push_back(snap.packet(a, i).sigma());
      }
      cumulative_.push_back((cumulative_.empty() ? 0.0 : cumulative_.back()) + born[a]);
      components_.push_back(std::move(c));
    }
  }

  Configuration draw(CounterStream& rng) const {
    std::uniform_real_distribution<double> uniform(0.0, cumulative_.back());
    const double u = uniform(rng);
    std::size_t a = 0;
    while (a + 1 < cumulative_.size() && u >= cumulative_[a]) ++a;
    const auto& c = components_[a];
    Configuration x(c.mean.size());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = c.mean[i] + c.sd[i] * normal(rng);
    return x;
  }

  double log_density(const Configuration& x) const {
    constexpr double half_log_2pi = 0.91893853320467274178;
    double top = kNegInf;
    std::vector<double> terms;
    terms.reserve(components_.size());
    for (const auto& c : components_) {
      double l = c.log_weight;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double z = (x[i] - c.mean[i]) / c.sd[i];
        l -= 0.5 * z * z + std::log(c.sd[i]) + half_log_2pi;
      }
      terms.push_back(l);
      top = std::max(top, l);
    }
    double sum = 0.0;
    for (double l : terms) sum += std::exp(l - top);
    return top + std::log(sum);
  }

 private:
  std::vector<MixtureComponent> components_;
  std::vector<double> cumulative_;
};

double log_rho(const Snapshot& snap, const Configuration& x) {
  try {
    return 2.0 * snap.log_psi(x).real();
  } catch (const NodeError&) {
    return kNegInf;
  }
}

void hash_bytes(std::uint64_t& h, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int k = 0; k < 8; ++k) {
    h ^= (bits >> (8 * k)) & 0xffU;
    h *= 0x100000001b3ULL;
  }
}

TimeVector offset_times(std::span<const double> offsets, double tau) {
  TimeVector t;
  for (double d : offsets) t.times.push_back(tau + d);
  return t;
}

void add_grid_metadata(EnsembleReport& r, const MftState& s, const SamplerConfig& cfg,
                       double tau0, double tau1, double step) {
  r.metadata.emplace_back("seed", std::to_string(cfg.seed));
  r.metadata.emplace_back("state_hash", fmt::format("{:016x}", state_hash(s)));
  r.metadata.emplace_back("tau0", format_real(tau0));
  r.metadata.emplace_back("tau1", format_real(tau1));
  r.metadata.emplace_back("step", format_real(step));
  r.metadata.emplace_back("n_samples", std::to_string(cfg.n_samples));
}

}  // namespace

void SamplerConfig::validate() const {
  if (n_samples < 1) throw ValidationError("sampler.n_samples must be >= 1");
  if (thinning < 1) throw ValidationError("sampler.thinning must be >= 1");
}

std::uint64_t state_hash(const MftState& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t a = 0; a < s.branch_count(); ++a) {
    hash_bytes(h, s.coefficients()[a].real());
    hash_bytes(h, s.coefficients()[a].imag());
    for (const auto& p : s.branches()[a].packets) {
      for (double v : {p.mass, p.potential.kind == PotentialKind::Free ? 0.0 : p.potential.omega,
                       p.center, p.momentum, p.width_param.real(), p.width_param.imag(),
                       p.phase, p.ref_time}) {
        hash_bytes(h, v);
      }
    }
  }
  return h;
}

std::vector<Configuration> sample_initial(const MftState& s, const TimeVector& t0,
                                          const SamplerConfig& cfg, std::size_t threads) {
  cfg.validate();
  const Snapshot snap = s.at(t0.times);
  const MixtureProposal proposal(snap, s);
  const std::size_t transitions = cfg.burn_in + cfg.thinning;

  std::vector<Configuration> out(cfg.n_samples);
  parallel_for(cfg.n_samples, threads, [&](std::size_t k) {
    CounterStream rng(cfg.seed, k);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Configuration x = proposal.draw(rng);
    double lx = log_rho(snap, x) - proposal.log_density(x);
    for (std::size_t step = 0; step < transitions; ++step) {
      Configuration y = proposal.draw(rng);
      const double ly = log_rho(snap, y) - proposal.log_density(y);
      const double u = uniform(rng);
      if (ly > kNegInf && (lx == kNegInf || std::log(u) < ly - lx)) {
        x = std::move(y);
        lx = ly;
      }
    }
    out[k] = std::move(x);
  });
  return out;
}

MarginalCdf::MarginalCdf(const MftState& s, const TimeVector& t, std::size_t coordinate,
                         std::size_t points) {
  const Snapshot snap = s.at(t.times);
  const std::size_t n = snap.particle_count();
  const std::size_t nb = snap.branch_count();
  constexpr double span = 12.0;

  auto range_of = [&](std::size_t i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t a = 0; a < nb; ++a) {
      const auto& p = snap.packet(a, i);
      lo = std::min(lo, p.center - span * p.sigma());
      hi = std::max(hi, p.center + span * p.sigma());
    }
    return std::pair{lo, hi};
  };

  // Weights conj(c_a) c_b prod_{j != i} <psi_aj|psi_bj> by trapezoid quadrature.
  std::vector<cplx> weight(nb * nb);
  for (std::size_t a = 0; a < nb; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      weight[a * nb + b] = std::conj(s.coefficients()[a]) * s.coefficients()[b];
    }
  }
  constexpr std::size_t inner_points = 4001;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == coordinate) continue;
    const auto [lo, hi] = range_of(j);
    const double h = (hi - lo) / static_cast<double>(inner_points - 1);
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t b = 0; b < nb; ++b) {
        cplx sum{};
        for (std::size_t k = 0; k < inner_points; ++k) {
          const double x = lo + static_cast<double>(k) * h;
          const double w = (k == 0 || k + 1 == inner_points) ? 0.5 : 1.0;
          sum += w * std::exp(std::conj(snap.packet(a, j).log_value(x)) +
                              snap.packet(b, j).log_value(x));
        }
        weight[a * nb + b] *= sum * h;
      }
    }
  }

  const auto [lo, hi] = range_of(coordinate);
  lo_ = lo;
  dx_ = (hi - lo) / static_cast<double>(points - 1);
  std::vector<double> rho(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double x = lo_ + static_cast<double>(k) * dx_;
    cplx v{};
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t b = 0; b < nb; ++b) {
        v += weight[a * nb + b] * std::exp(std::conj(snap.packet(a, coordinate).log_value(x)) +
                                           snap.packet(b, coordinate).log_value(x));
      }
    }
    rho[k] = v.real();
  }
  cdf_.assign(points, 0.0);
  for (std::size_t k = 1; k < points; ++k) {
    cdf_[k] = cdf_[k - 1] + 0.5 * dx_ * (rho[k - 1] + rho[k]);
  }
  total_ = cdf_.back();
  for (double& c : cdf_) c /= total_;
}

double MarginalCdf::operator()(double x) const {
  const double u = (x - lo_) / dx_;
  if (u <= 0.0) return 0.0;
  const auto k = static_cast<std::size_t>(u);
  if (k + 1 >= cdf_.size()) return 1.0;
  const double frac = u - static_cast<double>(k);
  return cdf_[k] + frac * (cdf_[k + 1] - cdf_[k]);
}

double EnsembleReport::unclassified_fraction() const {
  const std::size_t used = samples - excluded;
  return used == 0 ? 0.0 : static_cast<double>(unclassified) / static_cast<double>(used);
}

std::string EnsembleReport::ks_csv() const {
  std::string out = "coordinate,ks_stat,p_value,n\n";
  for (const auto& e : ks) {
    out += fmt::format("{},{},{},{}\n", e.coordinate + 1, format_real(e.statistic),
                       format_real(e.p_value), e.n);
  }
  return out;
}

std::string EnsembleReport::branch_csv() const {
  std::string out = "branch,freq,ci_low,ci_high,expected\n";
  for (const auto& b : branches) {
    out += fmt::format("{},{},{},{},{}\n", b.branch + 1, format_real(b.frequency),
                       format_real(b.ci_low), format_real(b.ci_high), format_real(b.expected));
  }
  return out;
}

std::string EnsembleReport::summary() const {
  std::string out;
  for (const auto& [k, v] : metadata) out += k + "=" + v + "\n";
  out += fmt::format("samples={}\nexcluded={}\n", samples, excluded);
  for (const auto& e : ks) {
    out += fmt::format("ks_stat_{}={}\np_value_{}={}\n", e.coordinate + 1,
                       format_real(e.statistic), e.coordinate + 1, format_real(e.p_value));
  }
  for (const auto& b : branches) {
    out += fmt::format("branch_freq_{}={}\nbranch_expected_{}={}\n", b.branch + 1,
                       format_real(b.frequency), b.branch + 1, format_real(b.expected));
  }
  if (!branches.empty()) {
    out += fmt::format("unclassified_fraction={}\nflips={}\n",
                       format_real(unclassified_fraction()), flips);
  }
  out += fmt::format("passed={}\n", passed() ? 1 : 0);
  for (const auto& f : failures) out += "failure=" + f + "\n";
  return out;
}

EnsembleReport equivariance_test(const MftState& s, std::span<const double> offsets,
                                 double tau0, double tau1, const SamplerConfig& cfg,
                                 double step, std::size_t threads) {
  EnsembleReport report;
  add_grid_metadata(report, s, cfg, tau0, tau1, step);

  const auto samples = sample_initial(s, offset_times(offsets, tau0), cfg, threads);
  const auto finals = propagate_ensemble(s, offsets, samples, tau0, tau1, step, threads);
  report.samples = samples.size();

  std::vector<std::vector<double>> columns(s.particle_count());
  for (const auto& f : finals) {
    if (!f) {
      ++report.excluded;
      continue;
    }
    for (std::size_t i = 0; i < f->size(); ++i) columns[i].push_back((*f)[i]);
  }
  const double excluded_fraction =
      static_cast<double>(report.excluded) / static_cast<double>(report.samples);
  if (excluded_fraction > kMaxExcludedFraction) {
    report.failures.push_back(fmt::format("node-stall exclusions {} exceed 0.1%", report.excluded));
  }

  const TimeVector t1 = offset_times(offsets, tau1);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const MarginalCdf cdf(s, t1, i);
    const std::size_t n = columns[i].size();
    const KsOutcome ks = ks_one_sample(std::move(columns[i]), [&](double x) { return cdf(x); });
    report.ks.push_back({i, ks.statistic, ks.p_value, n});
    if (!(ks.p_value > kKsGate)) {
      report.failures.push_back(
          fmt::format("coordinate {} KS p-value {} <= {}", i + 1, ks.p_value, kKsGate));
    }
  }
  return report;
}

std::vector<double> branch_weights(const Snapshot& snap, std::span<const double> x) {
  std::vector<double> w = snap.branch_log_weights(x);
  const double top = *std::max_element(w.begin(), w.end());
  if (!std::isfinite(top)) throw Unclassifiable("every branch term vanishes");
  double sum = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

std::vector<double> branch_weights(const MftState& s, std::span<const double> x,
                                   const TimeVector& t) {
  return branch_weights(s.at(t.times), x);
}

std::optional<std::size_t> classify(std::span<const double> weights, double dominance) {
  for (std::size_t a = 0; a < weights.size(); ++a) {
    if (weights[a] >= dominance) return a;
  }
  return std::nullopt;
}

std::vector<double> born_weights(const MftState& s) {
  std::vector<double> w;
  double sum = 0.0;
  for (const cplx c : s.coefficients()) {
    w.push_back(std::norm(c));
    sum += w.back();
  }
  for (double& v : w) v /= sum;
  return w;
}

double max_branch_overlap(const MftState& s, const TimeVector& t) {
  const Snapshot snap = s.at(t.times);
  double worst = 0.0;
  for (std::size_t a = 0; a < snap.branch_count(); ++a) {
    for (std::size_t b = a + 1; b < snap.branch_count(); ++b) {
      double prod = 1.0;
      for (std::size_t i = 0; i < snap.particle_count(); ++i) {
        prod *= magnitude_overlap(snap.packet(a, i), snap.packet(b, i));
      }
      worst = std::max(worst, prod);
    }
  }
  return worst;
}

EnsembleReport collapse_statistics(const MftState& s, const CollapseSetup& setup,
                                   const SamplerConfig& cfg, std::size_t threads) {
  EnsembleReport report;
  add_grid_metadata(report, s, cfg, setup.tau0, setup.tau1, setup.step);

  const double overlap = max_branch_overlap(s, offset_times(setup.offsets, setup.tau1));
  report.metadata.emplace_back("max_branch_overlap", format_real(overlap));
  if (!(overlap < kOverlapThreshold)) {
    report.failures.push_back(
        fmt::format("branches still overlap at tau1 (overlap {} >= {})", overlap,
                    kOverlapThreshold));
  }

  const auto samples =
      sample_initial(s, offset_times(setup.offsets, setup.tau0), cfg, threads);
  report.samples = samples.size();
  auto positions =
      propagate_ensemble(s, setup.offsets, samples, setup.tau0, setup.tau1, setup.step, threads);

  const std::size_t nb = s.branch_count();
  std::vector<bool> reached(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) reached[k] = positions[k].has_value();
  std::vector<std::optional<std::size_t>> label(samples.size());
  {
    const Snapshot snap = s.at(offset_times(setup.offsets, setup.tau1).times);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (!positions[k]) continue;
      try {
        label[k] = classify(branch_weights(snap, *positions[k]), setup.dominance);
      } catch (const Unclassifiable&) {
        label[k] = std::nullopt;
      }
    }
  }

  std::vector<bool> flipped(samples.size(), false);
  double tau = setup.tau1;
  for (std::size_t c = 1; c <= setup.reclassify_checks; ++c) {
    const double next = setup.tau1 + setup.reclassify_span * static_cast<double>(c) /
                                         static_cast<double>(setup.reclassify_checks);
    std::vector<std::size_t> alive;
    std::vector<Configuration> current;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      if (positions[k] && label[k]) {
        alive.push_back(k);
        current.push_back(*positions[k]);
      }
    }
    const auto moved = propagate_ensemble(s, setup.offsets, current, tau, next, setup.step,
                                          threads);
    const Snapshot snap = s.at(offset_times(setup.offsets, next).times);
    for (std::size_t q = 0; q < alive.size(); ++q) {
      const std::size_t k = alive[q];
      if (!moved[q]) {
        flipped[k] = true;
        continue;
      }
      positions[k] = moved[q];
      std::optional<std::size_t> again;
      try {
        again = classify(branch_weights(snap, *moved[q]), setup.dominance);
      } catch (const Unclassifiable&) {
      }
      if (again != label[k]) flipped[k] = true;
    }
    tau = next;
  }

  std::vector<std::size_t> counts(nb, 0);
  std::size_t used = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!reached[k]) {
      ++report.excluded;
      continue;
    }
    ++used;
    if (flipped[k]) ++report.flips;
    if (label[k]) {
      ++counts[*label[k]];
    } else {
      ++report.unclassified;
    }
  }

  if (static_cast<double>(report.excluded) / static_cast<double>(report.samples) >
      kMaxExcludedFraction) {
    report.failures.push_back(fmt::format("node-stall exclusions {} exceed 0.1%", report.excluded));
  }
  if (report.unclassified_fraction() > kMaxUnclassifiedFraction) {
    report.failures.push_back(fmt::format("unclassified fraction {} exceeds 1%",
                                          report.unclassified_fraction()));
  }
  if (report.flips > 0) {
    report.failures.push_back(fmt::format("{} classification flips after tau1", report.flips));
  }

  const auto born = born_weights(s);
  constexpr double z = 3.0;
  for (std::size_t a = 0; a < nb; ++a) {
    const double n = static_cast<double>(used);
    const double f = used == 0 ? 0.0 : static_cast<double>(counts[a]) / n;
    const Interval ci = wilson_interval(counts[a], used, z);
    report.branches.push_back({a, f, ci.low, ci.high, born[a]});
    const double tolerance = used == 0 ? 0.0 : z * std::sqrt(born[a] * (1.0 - born[a]) / n);
    if (std::abs(f - born[a]) > tolerance) {
      report.failures.push_back(fmt::format("branch {} frequency {} outside 3 sigma of {}",
                                            a + 1, f, born[a]));
    }
  }
  return report;
}

}  // namespace mft
