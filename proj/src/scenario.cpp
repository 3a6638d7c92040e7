#include "mft/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mft/errors.hpp"

namespace mft {

namespace {

using json = nlohmann::json;

constexpr double kCoefficientTolerance = 1e-6;
constexpr double kRescaleFloor = 1e-14;

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ValidationError(path + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(path + " must be finite");
  return v;
}

std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && j.get<long long>() < 0 &&
                                 !j.is_number_unsigned())) {
    throw ValidationError(path + " must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ValidationError(path + " must be a string");
  return j.get<std::string>();
}

std::vector<double> as_reals(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path + " must be an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(as_number(j[k], fmt::format("{}[{}]", path, k)));
  }
  return out;
}

cplx as_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {as_number(j, path), 0.0};
  const auto v = as_reals(j, path);
  if (v.size() != 2) throw ValidationError(path + " must be a number or [re, im]");
  return {v[0], v[1]};
}

/// Object reader that rejects keys it was never asked about.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ValidationError(path_ + " must be an object");
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) throw ValidationError("missing required key " + at(key));
    return *v;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    return v ? as_number(*v, at(key)) : fallback;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const json* v = find(key);
    return v ? as_count(*v, at(key)) : fallback;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.contains(key)) throw ValidationError("unknown key " + at(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t k = 0; k + 1 < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

PotentialSpec parse_potential(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string kind = as_string(f.require("kind"), f.at("kind"));
  PotentialSpec p;
  if (kind == "free") {
    p = PotentialSpec::free();
  } else if (kind == "harmonic") {
    p = PotentialSpec::harmonic(as_number(f.require("omega"), f.at("omega")));
  } else {
    throw ValidationError(f.at("kind") + " must be \"free\" or \"harmonic\"");
  }
  if (p.kind == PotentialKind::Free) f.find("omega");
  f.finish();
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return p;
}

ParticleSpec parse_particle(const json& j, const std::string& path) {
  Fields f(j, path);
  ParticleSpec p;
  p.mass = as_number(f.require("mass"), f.at("mass"));
  if (!(p.mass > 0.0)) throw ValidationError(f.at("mass") + " must be > 0");
  if (const json* v = f.find("potential")) p.potential = parse_potential(*v, f.at("potential"));
  p.dimension = static_cast<int>(f.count("dimension", 1));
  if (p.dimension != 1) throw ValidationError(f.at("dimension") + " must be 1");
  f.finish();
  return p;
}

GaussianPacket parse_packet(const json& j, const std::string& path, const ParticleSpec& particle) {
  Fields f(j, path);
  GaussianPacket p;
  p.mass = particle.mass;
  p.potential = particle.potential;
  p.center = as_number(f.require("center"), f.at("center"));
  p.momentum = f.number("momentum", 0.0);
  p.phase = f.number("phase", 0.0);
  p.ref_time = f.number("ref_time", 0.0);
  const json* sigma = f.find("sigma");
  const json* width = f.find("width_param");
  if ((sigma == nullptr) == (width == nullptr)) {
    throw ValidationError(path + " needs exactly one of sigma or width_param");
  }
  if (sigma != nullptr) {
    const double s = as_number(*sigma, f.at("sigma"));
    if (!(s > 0.0)) throw ValidationError(f.at("sigma") + " must be > 0");
    p.width_param = cplx{0.0, 1.0 / (4.0 * s * s)};
  } else {
    p.width_param = as_complex(*width, f.at("width_param"));
  }
  f.finish();
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return p;
}

DynamicsSpec parse_dynamics(const json& j, std::size_t n) {
  Fields f(j, "dynamics");
  DynamicsSpec d;
  d.delta_offsets = std::vector<double>(n, 0.0);
  if (const json* v = f.find("delta_offsets")) d.delta_offsets = as_reals(*v, f.at("delta_offsets"));
  d.tau0 = f.number("tau0", d.tau0);
  d.tau1 = f.number("tau1", d.tau1);
  d.step = f.number("step", d.step);
  if (const json* v = f.find("initial")) d.initial = as_reals(*v, f.at("initial"));
  if (const json* v = f.find("sheet_rule")) {
    const std::string rule = as_string(*v, f.at("sheet_rule"));
    if (rule == "constant") {
      d.sheet_rule = SheetRuleKind::Constant;
    } else if (rule == "transport") {
      d.sheet_rule = SheetRuleKind::Transport;
    } else {
      throw ValidationError("dynamics.sheet_rule must be \"constant\" or \"transport\"");
    }
  }
  f.finish();
  if (d.delta_offsets.size() != n) {
    throw ValidationError("dynamics.delta_offsets length must equal the particle count");
  }
  const double sum = std::accumulate(d.delta_offsets.begin(), d.delta_offsets.end(), 0.0);
  if (std::abs(sum) > 1e-12) throw ValidationError("dynamics.delta_offsets must sum to zero");
  if (!(d.step > 0.0)) throw ValidationError("dynamics.step must be > 0");
  if (!d.initial.empty() && d.initial.size() != n) {
    throw ValidationError("dynamics.initial length must equal the particle count");
  }
  return d;
}

SamplerConfig parse_sampler(const json& j) {
  Fields f(j, "sampler");
  SamplerConfig c;
  c.n_samples = f.count("n_samples", c.n_samples);
  if (const json* v = f.find("seed")) {
    if (!v->is_number_unsigned()) throw ValidationError("sampler.seed must be an unsigned integer");
    c.seed = v->get<std::uint64_t>();
  }
  c.burn_in = f.count("burn_in", c.burn_in);
  c.thinning = f.count("thinning", c.thinning);
  if (const json* v = f.find("proposal")) {
    if (as_string(*v, f.at("proposal")) != "mixture_independence") {
      throw ValidationError("sampler.proposal must be \"mixture_independence\"");
    }
  }
  f.finish();
  c.validate();
  return c;
}

AnalysisRequest parse_analysis(const json& j, const std::string& path, std::size_t n) {
  Fields f(j, path);
  const std::string op = as_string(f.require("op"), f.at("op"));
  static const json empty = json::object();
  const json* pj = f.find("params");
  Fields p(pj ? *pj : empty, f.at("params"));
  f.finish();

  AnalysisRequest req;
  if (op == "residuals") {
    ResidualsParams r;
    r.n_points = p.count("n_points", r.n_points);
    r.h = p.number("h", r.h);
    r.t_max = p.number("t_max", r.t_max);
    if (r.n_points < 1) throw ValidationError(p.at("n_points") + " must be >= 1");
    if (!(r.h > 0.0)) throw ValidationError(p.at("h") + " must be > 0");
    if (!(r.t_max >= 0.0)) throw ValidationError(p.at("t_max") + " must be >= 0");
    req.params = r;
  } else if (op == "sensitivity") {
    SensitivityParams r;
    r.i = p.count("i", r.i);
    r.j = p.count("j", r.j);
    if (const json* v = p.find("times")) r.times = as_reals(*v, p.at("times"));
    r.lattice = p.count("lattice", r.lattice);
    r.span_widths = p.number("span_widths", r.span_widths);
    if (r.i < 1 || r.i > n || r.j < 1 || r.j > n || r.i == r.j) {
      throw ValidationError(path + " needs distinct particle indices i, j in 1.." +
                            std::to_string(n));
    }
    if (!r.times.empty() && r.times.size() != n) {
      throw ValidationError(p.at("times") + " length must equal the particle count");
    }
    if (r.lattice < 1) throw ValidationError(p.at("lattice") + " must be >= 1");
    req.params = r;
  } else if (op == "epr-scan") {
    EprParams r;
    r.t1_fixed = p.number("t1_fixed", r.t1_fixed);
    if (const json* v = p.find("t2_grid")) r.t2_grid = as_reals(*v, p.at("t2_grid"));
    if (const json* v = p.find("t_ref")) r.t_ref = as_number(*v, p.at("t_ref"));
    if (r.t2_grid.empty()) throw ValidationError(p.at("t2_grid") + " must not be empty");
    if (n < 2) throw ValidationError(path + " needs at least two particles");
    req.params = r;
  } else if (op == "collapse") {
    CollapseParams r;
    r.reclassify_span = p.number("reclassify_span", r.reclassify_span);
    r.reclassify_checks = p.count("reclassify_checks", r.reclassify_checks);
    r.dominance = p.number("dominance", r.dominance);
    if (!(r.reclassify_span >= 0.0)) throw ValidationError(p.at("reclassify_span") + " must be >= 0");
    if (!(r.dominance > 0.5 && r.dominance <= 1.0)) {
      throw ValidationError(p.at("dominance") + " must lie in (0.5, 1]");
    }
    req.params = r;
  } else if (op == "newton-check") {
    NewtonParams r;
    r.fd_step = p.number("fd_step", r.fd_step);
    if (!(r.fd_step >= 0.0)) throw ValidationError(p.at("fd_step") + " must be >= 0");
    req.params = r;
  } else {
    throw ValidationError(f.at("op") + " names an unknown analysis \"" + op + "\"");
  }
  p.finish();
  return req;
}

json complex_json(cplx c) { return json::array({c.real(), c.imag()}); }

json analysis_json(const AnalysisRequest& a) {
  json params = json::object();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ResidualsParams>) {
          params = {{"n_points", p.n_points}, {"h", p.h}, {"t_max", p.t_max}};
        } else if constexpr (std::is_same_v<P, SensitivityParams>) {
          params = {{"i", p.i}, {"j", p.j}, {"lattice", p.lattice}, {"span_widths", p.span_widths}};
          if (!p.times.empty()) params["times"] = p.times;
        } else if constexpr (std::is_same_v<P, EprParams>) {
          params = {{"t1_fixed", p.t1_fixed}, {"t2_grid", p.t2_grid}};
          if (p.t_ref) params["t_ref"] = *p.t_ref;
        } else if constexpr (std::is_same_v<P, CollapseParams>) {
          params = {{"reclassify_span", p.reclassify_span},
                    {"reclassify_checks", p.reclassify_checks},
                    {"dominance", p.dominance}};
        } else {
          params = {{"fd_step", p.fd_step}};
        }
      },
      a.params);
  return {{"op", a.op()}, {"params", params}};
}

json to_json(const Scenario& sc) {
  json particles = json::array();
  for (const auto& p : sc.particles) {
    json pot = {{"kind", p.potential.kind == PotentialKind::Free ? "free" : "harmonic"}};
    if (p.potential.kind == PotentialKind::Harmonic) pot["omega"] = p.potential.omega;
    particles.push_back({{"mass", p.mass}, {"potential", pot}, {"dimension", p.dimension}});
  }
  json branches = json::array();
  for (std::size_t a = 0; a < sc.branches.size(); ++a) {
    json packets = json::array();
    for (const auto& q : sc.branches[a].packets) {
      packets.push_back({{"center", q.center},
                         {"momentum", q.momentum},
                         {"width_param", complex_json(q.width_param)},
                         {"phase", q.phase},
                         {"ref_time", q.ref_time}});
    }
    branches.push_back({{"coefficient", complex_json(sc.coefficients[a])}, {"packets", packets}});
  }
  json dynamics = {{"delta_offsets", sc.dynamics.delta_offsets},
                   {"tau0", sc.dynamics.tau0},
                   {"tau1", sc.dynamics.tau1},
                   {"step", sc.dynamics.step},
                   {"sheet_rule", sc.dynamics.sheet_rule == SheetRuleKind::Constant ? "constant"
                                                                                     : "transport"}};
  if (!sc.dynamics.initial.empty()) dynamics["initial"] = sc.dynamics.initial;
  json sampler = {{"n_samples", sc.sampler.n_samples},
                  {"seed", sc.sampler.seed},
                  {"burn_in", sc.sampler.burn_in},
                  {"thinning", sc.sampler.thinning},
                  {"proposal", "mixture_independence"}};
  json analysis = json::array();
  for (const auto& a : sc.analysis) analysis.push_back(analysis_json(a));
  return {{"name", sc.name},
          {"state", {{"particles", particles}, {"branches", branches}}},
          {"dynamics", dynamics},
          {"sampler", sampler},
          {"analysis", analysis},
          {"output_dir", sc.output_dir}};
}

}  // namespace

std::string AnalysisRequest::op() const {
  static constexpr const char* names[] = {"residuals", "sensitivity", "epr-scan", "collapse",
                                          "newton-check"};
  return names[params.index()];
}

std::vector<double> Scenario::initial_config() const {
  if (!dynamics.initial.empty()) return dynamics.initial;
  std::vector<double> times;
  for (double d : dynamics.delta_offsets) times.push_back(dynamics.tau0 + d);
  const Snapshot snap = state().at(times);
  std::vector<double> x;
  for (std::size_t i = 0; i < particles.size(); ++i) x.push_back(snap.packet(0, i).center);
  return x;
}

Scenario parse_scenario(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, column] = line_column(text, e.byte);
    throw ParseError(fmt::format("line {}, column {}: {}", line, column, e.what()), line, column);
  }

  Scenario sc;
  Fields top(root, "scenario");
  sc.name = as_string(top.require("name"), "name");

  Fields state(top.require("state"), "state");
  const json& particles = state.require("particles");
  if (!particles.is_array() || particles.empty()) {
    throw ValidationError("state.particles must be a nonempty array");
  }
  for (std::size_t i = 0; i < particles.size(); ++i) {
    sc.particles.push_back(parse_particle(particles[i], fmt::format("state.particles[{}]", i)));
  }
  const std::size_t n = sc.particles.size();
  const json& branches = state.require("branches");
  if (!branches.is_array() || branches.empty()) {
    throw ValidationError("state.branches must be a nonempty array");
  }
  for (std::size_t a = 0; a < branches.size(); ++a) {
    const std::string path = fmt::format("state.branches[{}]", a);
    Fields b(branches[a], path);
    sc.coefficients.push_back(as_complex(b.require("coefficient"), b.at("coefficient")));
    const json& packets = b.require("packets");
    if (!packets.is_array() || packets.size() != n) {
      throw ValidationError(fmt::format("{}.packets must list one packet per particle ({} expected)",
                                        path, n));
    }
    ProductState product;
    for (std::size_t i = 0; i < n; ++i) {
      product.packets.push_back(
          parse_packet(packets[i], fmt::format("{}.packets[{}]", path, i), sc.particles[i]));
    }
    sc.branches.push_back(std::move(product));
    b.finish();
  }
  state.finish();

  const double norm = sc.state().norm_squared();
  const double deviation = std::abs(norm - 1.0);
  if (deviation > kCoefficientTolerance) {
    throw ValidationError(
        fmt::format("coefficients are not normalized: <Psi|Psi> = {:.17g}", norm));
  }
  if (deviation > kRescaleFloor) {
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& c : sc.coefficients) c *= scale;
    sc.warnings.push_back(fmt::format("coefficients rescaled: <Psi|Psi> was {:.17g}", norm));
  }

  const json* dynamics = top.find("dynamics");
  sc.dynamics = parse_dynamics(dynamics ? *dynamics : json::object(), n);
  if (const json* v = top.find("sampler")) sc.sampler = parse_sampler(*v);
  if (const json* v = top.find("analysis")) {
    if (!v->is_array()) throw ValidationError("analysis must be an array");
    for (std::size_t k = 0; k < v->size(); ++k) {
      sc.analysis.push_back(parse_analysis((*v)[k], fmt::format("analysis[{}]", k), n));
    }
  }
  if (const json* v = top.find("output_dir")) sc.output_dir = as_string(*v, "output_dir");
  top.finish();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string serialize(const Scenario& sc, int indent) { return to_json(sc).dump(indent); }

std::uint64_t scenario_hash(const Scenario& sc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : serialize(sc, -1)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mft
