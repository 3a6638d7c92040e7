#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mft/dynamics.hpp"
#include "mft/ensemble.hpp"
#include "mft/state.hpp"

namespace mft {

struct ParticleSpec {
  double mass = 1.0;
  PotentialSpec potential;
  int dimension = 1;
  friend bool operator==(const ParticleSpec&, const ParticleSpec&) = default;
};

struct DynamicsSpec {
  std::vector<double> delta_offsets;
  double tau0 = 0.0;
  double tau1 = 1.0;
  double step = kDefaultStep;
  /// Initial configuration (reference of the sheet rule); empty selects the
  /// first branch's packet centers at T(tau0).
  std::vector<double> initial;
  SheetRuleKind sheet_rule = SheetRuleKind::Constant;
  friend bool operator==(const DynamicsSpec&, const DynamicsSpec&) = default;
};

struct ResidualsParams {
  std::size_t n_points = 100;
  double h = 1e-3;
  double t_max = 5.0;
  friend bool operator==(const ResidualsParams&, const ResidualsParams&) = default;
};

struct SensitivityParams {
  /// 1-based particle indices.
  std::size_t i = 1;
  std::size_t j = 2;
  /// Probe times; empty selects T(tau0).
  std::vector<double> times;
  std::size_t lattice = 5;
  double span_widths = 2.0;
  friend bool operator==(const SensitivityParams&, const SensitivityParams&) = default;
};

struct EprParams {
  double t1_fixed = 1.0;
  std::vector<double> t2_grid{0.0, 0.5, 1.0};
  /// Time at which references are sampled; unset selects t1_fixed.
  std::optional<double> t_ref;
  friend bool operator==(const EprParams&, const EprParams&) = default;
};

struct CollapseParams {
  double reclassify_span = 1.0;
  std::size_t reclassify_checks = 4;
  double dominance = kDominance;
  friend bool operator==(const CollapseParams&, const CollapseParams&) = default;
};

struct NewtonParams {
  /// Finite-difference step for grad Q; 0 selects the sheet's grid step.
  double fd_step = 0.0;
  friend bool operator==(const NewtonParams&, const NewtonParams&) = default;
};

using AnalysisParams =
    std::variant<ResidualsParams, SensitivityParams, EprParams, CollapseParams, NewtonParams>;

struct AnalysisRequest {
  AnalysisParams params;
  std::string op() const;
  friend bool operator==(const AnalysisRequest&, const AnalysisRequest&) = default;
};

struct Scenario {
  std::string name;
  std::vector<ParticleSpec> particles;
  std::vector<cplx> coefficients;
  std::vector<ProductState> branches;
  DynamicsSpec dynamics;
  SamplerConfig sampler;
  std::vector<AnalysisRequest> analysis;
  std::string output_dir;
  /// Notes produced while loading (e.g. coefficient rescaling); not serialized.
  std::vector<std::string> warnings;

  MftState state() const { return MftState(coefficients, branches); }
  std::size_t particle_count() const { return particles.size(); }
  std::vector<double> initial_config() const;

  /// Parameters of the first analysis entry of type P, or defaults.
  template <class P>
  P params() const {
    for (const auto& a : analysis) {
      if (const auto* p = std::get_if<P>(&a.params)) return *p;
    }
    return P{};
  }

  friend bool operator==(const Scenario& a, const Scenario& b) {
    return a.name == b.name && a.particles == b.particles && a.coefficients == b.coefficients &&
           a.branches == b.branches && a.dynamics == b.dynamics && a.sampler == b.sampler &&
           a.analysis == b.analysis && a.output_dir == b.output_dir;
  }
};

/// Strict JSON scenario parser. Throws ParseError for malformed text and
/// ValidationError for schema or invariant violations.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);

/// Canonical JSON with every default filled in.
std::string serialize(const Scenario& sc, int indent = 2);

/// FNV-1a of the compact canonical serialization.
std::uint64_t scenario_hash(const Scenario& sc);

}  // namespace mft
