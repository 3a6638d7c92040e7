#include <doctest.h>

#include <filesystem>
#include <string>

#include "mft/errors.hpp"
#include "mft/scenario.hpp"

using namespace mft;

namespace {

const char* kMinimal = R"({
  "name": "mini",
  "state": {
    "particles": [{"mass": 1.0, "potential": {"kind": "free"}}],
    "branches": [{"coefficient": 1.0, "packets": [{"center": 0.0, "momentum": 0.0, "sigma": 1.0}]}]
  }
})";

std::string two_branch(const std::string& c1, const std::string& c2) {
  return R"({"name": "pair", "state": {
    "particles": [{"mass": 1.0, "potential": {"kind": "free"}}],
    "branches": [
      {"coefficient": )" + c1 + R"(, "packets": [{"center": -10.0, "momentum": 0.0, "sigma": 1.0}]},
      {"coefficient": )" + c2 + R"(, "packets": [{"center": 10.0, "momentum": 0.0, "sigma": 1.0}]}]}})";
}

}  // namespace

TEST_CASE("defaults are filled in") {
  const auto sc = parse_scenario(kMinimal);
  CHECK(sc.sampler.seed == 42);
  CHECK(sc.sampler.n_samples == 10000);
  CHECK(sc.dynamics.step == 1e-3);
  CHECK(sc.params<ResidualsParams>().h == 1e-3);
  CHECK(sc.dynamics.sheet_rule == SheetRuleKind::Constant);
  CHECK(sc.initial_config() == std::vector<double>{0.0});
}

TEST_CASE("serialization round-trips and the hash follows the content") {
  for (const auto& entry : std::filesystem::directory_iterator(MFT_SCENARIO_DIR)) {
    const auto sc = load_scenario(entry.path().string());
    const auto again = parse_scenario(serialize(sc));
    CHECK(again == sc);
    CHECK(scenario_hash(again) == scenario_hash(sc));
    CHECK(serialize(again) == serialize(sc));
  }
  auto sc = parse_scenario(kMinimal);
  const auto h = scenario_hash(sc);
  sc.sampler.seed = 43;
  CHECK(scenario_hash(sc) != h);
}

TEST_CASE("coefficients are checked against the state norm") {
  CHECK_NOTHROW(parse_scenario(two_branch("0.6", "0.8")));
  CHECK_NOTHROW(parse_scenario(two_branch("[0.6, 0.0]", "[0.0, 0.8]")));
  CHECK_THROWS_AS(parse_scenario(two_branch("0.6", "0.9")), ValidationError);
  const auto sc = parse_scenario(two_branch("0.6", "0.80000000000001"));
  CHECK_FALSE(sc.warnings.empty());
  CHECK(sc.state().norm_squared() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("schema violations") {
  std::string bad = kMinimal;
  bad.replace(bad.find("\"name\""), 6, "\"nmae\"");
  CHECK_THROWS_AS(parse_scenario(bad), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"name": "x", "state": {"particles": [], "branches": []}})"),
                  ValidationError);
  std::string both = kMinimal;
  both.replace(both.find("\"sigma\": 1.0"), 12, R"("sigma": 1.0, "width_param": [0.0, 0.25])");
  CHECK_THROWS_AS(parse_scenario(both), ValidationError);
  std::string neg = kMinimal;
  neg.replace(neg.find("\"mass\": 1.0"), 11, "\"mass\": -1.0");
  CHECK_THROWS_AS(parse_scenario(neg), ValidationError);
}

TEST_CASE("parse errors report line and column") {
  const std::string text = "{\n  \"name\": \"x\",\n  \"state\": [1, 2,, 3]\n}";
  try {
    parse_scenario(text);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() >= 17);
    CHECK(e.column() <= 18);
  }
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), std::exception);
}
