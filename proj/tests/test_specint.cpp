#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fake_client.hpp"
#include "s2c/errors.hpp"
#include "s2c/specint.hpp"
#include "support.hpp"

namespace s2c {
namespace {

using nlohmann::json;
using testing::Gen;

std::string read_fixture(const std::string& name) {
  std::ifstream in(testing::fixture(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RequirementText req(std::string text) { return {std::move(text), RequirementSource::user}; }

void expect_entry(const json& e, double target, double slack, const char* priority) {
  EXPECT_EQ(e.at("target").get<double>(), target);
  EXPECT_EQ(e.at("slack").get<double>(), slack);
  EXPECT_EQ(e.at("priority").get<std::string>(), priority);
}

TEST(ParseRules, NN1RequirementExact) {
  const SpecParse r = parse_rules(
      {read_fixture("nn1_requirement.txt"), RequirementSource::fixture});
  EXPECT_FALSE(r.warning);
  EXPECT_FALSE(r.fallback);
  expect_entry(r.spec.at("settling_time"), 16.0, 2.0, "medium");
  expect_entry(r.spec.at("overshoot"), 0.1, 0.05, "high");
  expect_entry(r.spec.at("h_infinity_norm"), 20.0, 2.0, "high");
  EXPECT_EQ(r.spec.at("decay_rate").at("target").get<double>(), 0.25);
}

TEST(ParseRules, NoKeywordsGivesDefaultsWithWarning) {
  const SpecParse r = parse_rules(req("design a controller"));
  EXPECT_TRUE(r.warning);
  expect_entry(r.spec.at("h_infinity_norm"), 10.0, 1.0, "medium");
  expect_entry(r.spec.at("settling_time"), 5.0, 1.0, "medium");
  expect_entry(r.spec.at("overshoot"), 0.20, 0.05, "low");
  EXPECT_FALSE(r.spec.contains("decay_rate"));
}

TEST(ParseRules, PercentOvershootIsHighPriorityFraction) {
  const SpecParse r = parse_rules(req("overshoot below 5%"));
  EXPECT_DOUBLE_EQ(r.spec.at("overshoot").at("target").get<double>(), 0.05);
  EXPECT_EQ(r.spec.at("overshoot").at("priority"), "high");
  EXPECT_FALSE(r.warning);
}

TEST(ParseRules, QualitativeWordsUseRangeMidpoints) {
  const SpecParse r =
      parse_rules(req("A fast and smooth response that strongly rejects disturbances."));
  EXPECT_DOUBLE_EQ(r.spec.at("settling_time").at("target").get<double>(), 2.5);
  EXPECT_DOUBLE_EQ(r.spec.at("overshoot").at("target").get<double>(), 0.075);
  EXPECT_DOUBLE_EQ(r.spec.at("h_infinity_norm").at("target").get<double>(), 1.75);
}

TEST(ParseRules, Deterministic) {
  const std::string t = read_fixture("nn1_requirement.txt");
  EXPECT_EQ(parse_rules(req(t)).spec.dump(), parse_rules(req(t)).spec.dump());
}

// Random byte strings and shuffled requirement fragments never throw and
// always give a document that converts into a valid SpecSet.
TEST(ParseRules, TotalOnFuzzedText) {
  Gen g(31);
  const std::vector<std::string> words = {
      "settling", "time", "overshoot", "H-infinity", "norm", "decay", "rate",
      "α", "≥", "<", "less", "than", "below", "under", "%", "s", "seconds",
      "tolerance", "priority", "high", "low", "0", "-3", "1e400", "nan",
      "16", "0.25", "200%", "fast", "smooth", ";", ".", "(", ")", "strongly",
      "reject", "ms", "minutes", "γ", "inf", "2s", "--", "\xff", "\n"};
  const PlantModel plant = testing::scalar_plant(-1, 1, 1, 1);
  for (int k = 0; k < 2000; ++k) {
    std::string text;
    if (k % 2 == 0) {
      const int len = g.integer(0, 40);
      for (int i = 0; i < len; ++i) {
        text += words[static_cast<std::size_t>(g.integer(0, static_cast<int>(words.size()) - 1))];
        text += ' ';
      }
    } else {
      const int len = g.integer(0, 80);
      for (int i = 0; i < len; ++i) text += static_cast<char>(g.integer(1, 255));
    }
    SpecParse r;
    ASSERT_NO_THROW(r = parse_rules(req(text))) << "case " << k;
    ASSERT_NO_THROW(validate_spec_json(r.spec)) << "case " << k;
    SpecSet s;
    ASSERT_NO_THROW(s = to_specset(r.spec, plant)) << "case " << k << ": " << r.spec.dump();
    EXPECT_NO_THROW(s.validate());
  }
}

TEST(ToSpecSet, ExplicitDecayRateWins) {
  const SpecParse r = parse_rules(req(read_fixture("nn1_requirement.txt")));
  const SpecSet s = to_specset(r.spec, testing::scalar_plant(-1, 1, 1, 1));
  EXPECT_DOUBLE_EQ(s.alpha(), 0.25);
  EXPECT_EQ(s.hinf_min, 0.0);
  EXPECT_EQ(s.hinf.target, 20.0);
  EXPECT_EQ(s.settling_time.target, 16.0);
}

TEST(ToSpecSet, AlphaFromSettlingWithoutDecayRate) {
  json j = parse_rules(req(read_fixture("nn1_requirement.txt"))).spec;
  j.erase("decay_rate");
  EXPECT_DOUBLE_EQ(to_specset(j, testing::scalar_plant(-1, 1, 1, 1)).alpha(), 0.24375);
}

TEST(ToSpecSet, NonPositiveSettlingIsRangeError) {
  json j = parse_rules(req("design a controller")).spec;
  j["settling_time"]["target"] = 0.0;
  EXPECT_THROW(to_specset(j, testing::scalar_plant(-1, 1, 1, 1)), DomainError);
}

TEST(ValidateSpecJson, ShapeAndRange) {
  EXPECT_THROW(validate_spec_json(json::array()), ParseError);
  EXPECT_THROW(validate_spec_json(json{{"settling_time", {{"target", 3}}}}), ParseError);
  EXPECT_THROW(validate_spec_json(json{{"h_infinity_norm", {{"target", "x"}}}}),
               ParseError);
  EXPECT_THROW(validate_spec_json(json{{"h_infinity_norm", {{"target", -1}}}}),
               DomainError);
  const json filled = validate_spec_json(json{{"h_infinity_norm", {{"target", 7}}}});
  EXPECT_TRUE(filled.contains("settling_time"));
  EXPECT_TRUE(filled.contains("overshoot"));
}

TEST(ParseLlm, ValidReplyIsAdopted) {
  const std::string reply =
      "Here is the spec:\n```json\n"
      R"({"settling_time": {"target": 16.0, "priority": "medium", "slack": 2.0},
          "overshoot": {"target": 0.1, "priority": "high", "slack": 0.05},
          "h_infinity_norm": {"target": 20.0, "priority": "high", "slack": 2.0},
          "decay_rate": {"target": 0.25}})"
      "\n```\n";
  testing::ScriptedClient client({reply});
  const SpecParse r = parse_llm(req("anything"), client);
  EXPECT_FALSE(r.fallback);
  expect_entry(r.spec.at("overshoot"), 0.1, 0.05, "high");
  EXPECT_EQ(r.spec.at("decay_rate").at("target").get<double>(), 0.25);
  ASSERT_EQ(client.call_count(), 1u);
  EXPECT_EQ(client.exchanges()[0].system, llm::specint_prompt());
  EXPECT_EQ(client.exchanges()[0].user, "anything");
}

TEST(ParseLlm, ProseReplyFallsBack) {
  testing::ScriptedClient client({"I cannot help"});
  const SpecParse r = parse_llm(req("overshoot below 5%"), client);
  EXPECT_TRUE(r.fallback);
  EXPECT_DOUBLE_EQ(r.spec.at("overshoot").at("target").get<double>(), 0.05);
}

TEST(ParseLlm, NegativeSettlingFallsBack) {
  testing::ScriptedClient client(
      {R"({"h_infinity_norm": {"target": 5}, "settling_time": {"target": -3}})"});
  EXPECT_TRUE(parse_llm(req("design a controller"), client).fallback);
}

TEST(ParseLlm, TransportFailureFallsBack) {
  testing::ScriptedClient client({""});
  EXPECT_TRUE(parse_llm(req("design a controller"), client).fallback);
}

TEST(ParseLlm, NeverThrowsWithAdversarialClient) {
  testing::AdversarialClient client(99);
  const PlantModel plant = testing::scalar_plant(-1, 1, 1, 1);
  for (int k = 0; k < 1000; ++k) {
    SpecParse r;
    ASSERT_NO_THROW(r = parse_llm(req("settling under 8 s"), client));
    ASSERT_NO_THROW(to_specset(r.spec, plant).validate()) << r.spec.dump();
  }
}

TEST(SpecIntPrompt, IsShippedAndNonEmpty) {
  EXPECT_NE(llm::specint_prompt().find("h_infinity_norm"), std::string::npos);
}

}  // namespace
}  // namespace s2c
