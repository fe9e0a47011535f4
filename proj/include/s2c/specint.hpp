#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/llm.hpp"
#include "s2c/model.hpp"

namespace s2c {

enum class RequirementSource { user, fixture };

struct RequirementText {
  std::string text;
  RequirementSource source = RequirementSource::user;
};

/// Specification document with h_infinity_norm, settling_time and overshoot
/// entries ({target, priority, slack}) and an optional decay_rate {target}.
struct SpecParse {
  nlohmann::json spec;
  /// The rule path replaced a failed LLM extraction.
  bool fallback = false;
  /// Nothing in the text was recognised; every entry is a default.
  bool warning = false;
};

/// Defaults for entries the text does not mention.
struct SpecDefaults {
  static constexpr double kHinfTarget = 10.0;
  static constexpr double kHinfSlack = 1.0;
  static constexpr double kSettlingTarget = 5.0;
  static constexpr double kSettlingSlack = 1.0;
  static constexpr double kOvershootTarget = 0.20;
  static constexpr double kOvershootSlack = 0.05;
};

/// Deterministic keyword/number extraction. Total: never throws and always
/// returns a document accepted by validate_spec_json.
SpecParse parse_rules(const RequirementText& req);

/// Sends the SpecInt system prompt and the requirement to `client`, takes
/// the first JSON object of the reply and validates it. Any failure returns
/// parse_rules(req) with fallback set.
SpecParse parse_llm(const RequirementText& req, llm::LlmClient& client);

/// Checks the document shape and ranges and fills absent settling/overshoot
/// entries with defaults. Throws ParseError for a wrong shape and DomainError
/// for out-of-range values.
nlohmann::json validate_spec_json(const nlohmann::json& j);

/// SpecSet with hinf_min = 0. Throws DomainError for non-positive targets.
SpecSet to_specset(const nlohmann::json& j, const PlantModel& plant);

}  // namespace s2c
