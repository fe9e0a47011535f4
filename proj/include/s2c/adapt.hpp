#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/llm.hpp"
#include "s2c/model.hpp"
#include "s2c/verify.hpp"

namespace s2c {

enum class AdaptSource { llm, heuristic };

const char* to_string(AdaptSource s);

/// Invariants: gamma_floor_after == updated_specs.hinf_min, it never drops
/// below the incoming floor and never exceeds 0.9 * updated gamma target.
struct AdaptDecision {
  SpecSet updated_specs;
  double gamma_floor_after = 0.0;
  std::string rationale;
  AdaptSource source = AdaptSource::heuristic;
};

/// Floor base fraction of the gamma target and history multiplier per
/// severity.
struct FloorRule {
  double base_fraction;
  double multiplier;
};
FloorRule floor_rule(Severity s);

/// Guardrail over the settling/overshoot violations in `violations` (other
/// kinds are ignored; with none left the floor is returned unchanged):
///   base = f(severity) * target, hist = gamma_last * m(severity) *
///   (1 + 0.1 * min(iter - 1, 5)), result = min(0.9 target, max(floor, base,
///   hist)).
double update_gamma_floor(const SpecSet& specs,
                          const std::vector<Violation>& violations,
                          double gamma_last, int iter);

/// Adjustment scale by iteration: 0.5 for 1..3, 1.0 for 4..7, 2.0 from 8.
double phase_factor(int iter);

struct AdaptOptions {
  /// Disables the guardrail (floor held at its incoming value).
  bool floor_enabled = true;
};

/// Deterministic refinement with f = phase_factor(iter):
///   overshoot violated: settling target *= 1 + 0.175 f, overshoot target
///     *= 1 - 0.075 f;
///   settling violated alone: settling target *= 1 + 0.175 f;
///   hinf violated: gamma target *= 1 - 0.125 f, kept >= floor / 0.9.
/// The floor update follows on the refined specs. With no violations the
/// specs are returned unchanged.
AdaptDecision refine_heuristic(const SpecSet& specs,
                               const std::vector<Violation>& violations,
                               int iter, double gamma_last,
                               const AdaptOptions& opts = {});

/// gamma target *= 1.25, slack of the lower-priority time-domain entry
/// *= 1.5 (overshoot on ties), floor capped at 0.9 * new target.
SpecSet relax_on_infeasible(const SpecSet& specs);

/// Asks the model for an {"updates": {...}} object, applies it, re-validates
/// and then runs the floor update. Falls back to refine_heuristic on any
/// transport, parsing or validation failure, or when an update lowers the
/// floor. Never throws.
AdaptDecision refine_llm(const SpecSet& specs,
                         const std::vector<Violation>& violations,
                         const nlohmann::json& memory_digest, int iter,
                         double gamma_last, llm::LlmClient& client,
                         const AdaptOptions& opts = {});

/// User message sent by refine_llm (exposed for tests).
std::string adapt_user_prompt(const SpecSet& specs,
                              const std::vector<Violation>& violations,
                              const nlohmann::json& memory_digest, int iter);

/// Applies an "updates" object; throws ParseError or DomainError when it is
/// malformed, breaks a SpecSet invariant or lowers the floor.
SpecSet apply_updates(const SpecSet& specs, const nlohmann::json& updates);

nlohmann::json to_json(const AdaptDecision& d);

}  // namespace s2c
