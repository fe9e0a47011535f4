#include "s2c/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c {

namespace {

bool is_transient(ViolationKind k) {
  return k == ViolationKind::settling_time || k == ViolationKind::overshoot;
}

bool has(const std::vector<Violation>& v, ViolationKind k) {
  return std::any_of(v.begin(), v.end(),
                     [k](const Violation& x) { return x.kind == k; });
}

int rank(Priority p) { return static_cast<int>(p); }

double number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) throw ParseError(std::string(what) + " must be numeric");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw DomainError(std::string(what) + " not finite");
  return v;
}

void apply_entry(SpecEntry& e, const nlohmann::json& u, const char* name) {
  if (!u.is_object()) throw ParseError(std::string(name) + " not an object");
  if (u.contains("target")) e.target = number(u.at("target"), name);
  if (u.contains("slack")) e.slack = number(u.at("slack"), name);
  if (u.contains("priority")) {
    if (!u.at("priority").is_string()) {
      throw ParseError(std::string(name) + ".priority must be a string");
    }
    e.priority = priority_from_string(u.at("priority").get<std::string>());
  }
}

}  // namespace

const char* to_string(AdaptSource s) {
  return s == AdaptSource::llm ? "llm" : "heuristic";
}

FloorRule floor_rule(Severity s) {
  switch (s) {
    case Severity::low:
      return {0.05, 1.2};
    case Severity::medium:
      return {0.10, 2.0};
    case Severity::high:
      return {0.20, 5.0};
    case Severity::critical:
      return {0.20, 10.0};
  }
  return {0.20, 10.0};
}

double update_gamma_floor(const SpecSet& specs,
                          const std::vector<Violation>& violations,
                          double gamma_last, int iter) {
  bool any = false;
  Severity worst = Severity::low;
  for (const auto& v : violations) {
    if (!is_transient(v.kind)) continue;
    any = true;
    worst = std::max(worst, v.severity);
  }
  const double floor = specs.hinf_min;
  const double cap = specs.floor_cap();
  if (!any) return std::min(floor, cap);
  const FloorRule rule = floor_rule(worst);
  const double base = rule.base_fraction * specs.hinf.target;
  const double last =
      std::isfinite(gamma_last) && gamma_last > 0.0 ? gamma_last : 0.0;
  const int i = std::max(iter, 1);
  const double hist = last * rule.multiplier * (1.0 + 0.1 * std::min(i - 1, 5));
  return std::min(cap, std::max({floor, base, hist}));
}

double phase_factor(int iter) {
  if (iter <= 3) return 0.5;
  if (iter <= 7) return 1.0;
  return 2.0;
}

AdaptDecision refine_heuristic(const SpecSet& specs,
                               const std::vector<Violation>& violations,
                               int iter, double gamma_last,
                               const AdaptOptions& opts) {
  AdaptDecision d;
  d.source = AdaptSource::heuristic;
  d.updated_specs = specs;
  d.gamma_floor_after = specs.hinf_min;
  if (violations.empty()) {
    d.rationale = "no violations";
    return d;
  }
  SpecSet& s = d.updated_specs;
  const double f = phase_factor(iter);
  std::ostringstream why;
  why << "phase factor " << f << ";";
  const bool os = has(violations, ViolationKind::overshoot);
  const bool ts = has(violations, ViolationKind::settling_time);
  if (os) {
    s.settling_time.target *= 1.0 + 0.175 * f;
    s.overshoot.target *= 1.0 - 0.075 * f;
    why << " overshoot: relax settling, tighten overshoot;";
  } else if (ts) {
    s.settling_time.target *= 1.0 + 0.175 * f;
    why << " settling: relax settling;";
  }
  if (has(violations, ViolationKind::hinf)) {
    s.hinf.target =
        std::max(s.hinf.target * (1.0 - 0.125 * f), s.hinf_min / 0.9);
    why << " hinf: tighten gamma target;";
  }
  if (opts.floor_enabled) {
    s.hinf_min = update_gamma_floor(s, violations, gamma_last, iter);
    why << " floor " << s.hinf_min;
  }
  d.gamma_floor_after = s.hinf_min;
  d.rationale = why.str();
  return d;
}

SpecSet relax_on_infeasible(const SpecSet& specs) {
  SpecSet s = specs;
  s.hinf.target *= 1.25;
  if (rank(s.settling_time.priority) < rank(s.overshoot.priority)) {
    s.settling_time.slack *= 1.5;
  } else {
    s.overshoot.slack *= 1.5;
  }
  s.hinf_min = std::min(s.hinf_min, s.floor_cap());
  return s;
}

SpecSet apply_updates(const SpecSet& specs, const nlohmann::json& updates) {
  if (!updates.is_object()) throw ParseError("updates must be an object");
  SpecSet s = specs;
  if (updates.contains("h_infinity_norm")) {
    const auto& u = updates.at("h_infinity_norm");
    apply_entry(s.hinf, u, "h_infinity_norm");
    if (u.contains("min")) s.hinf_min = number(u.at("min"), "min");
  }
  if (updates.contains("settling_time")) {
    apply_entry(s.settling_time, updates.at("settling_time"), "settling_time");
  }
  if (updates.contains("overshoot")) {
    apply_entry(s.overshoot, updates.at("overshoot"), "overshoot");
  }
  if (updates.contains("decay_rate")) {
    const auto& u = updates.at("decay_rate");
    if (!u.is_object() || !u.contains("target")) {
      throw ParseError("decay_rate update needs a target");
    }
    s.decay_rate = number(u.at("target"), "decay_rate");
  }
  if (s.hinf_min < specs.hinf_min) {
    throw DomainError("update lowers the gamma floor");
  }
  s.validate();
  return s;
}

std::string adapt_user_prompt(const SpecSet& specs,
                              const std::vector<Violation>& violations,
                              const nlohmann::json& memory_digest, int iter) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : violations) v.push_back(to_json(x));
  nlohmann::json msg = {{"iteration", iter},
                        {"current_specs", specset_to_json(specs)},
                        {"violations", v},
                        {"recent_designs", memory_digest}};
  std::ostringstream out;
  out << "VERIFICATION FEEDBACK:\n"
      << msg.dump(2) << "\n\n"
      << "Respond with one JSON object of the form\n"
      << "{\"diagnosis\": {...}, \"updates\": {\"settling_time\": "
         "{\"target\": <float>, \"slack\": <float>}, \"overshoot\": "
         "{\"target\": <float>, \"slack\": <float>}, \"h_infinity_norm\": "
         "{\"target\": <float>, \"min\": <float>}}}\n"
      << "Only include fields you change. The h_infinity_norm min must not "
         "decrease.\n";
  return out.str();
}

AdaptDecision refine_llm(const SpecSet& specs,
                         const std::vector<Violation>& violations,
                         const nlohmann::json& memory_digest, int iter,
                         double gamma_last, llm::LlmClient& client,
                         const AdaptOptions& opts) {
  if (violations.empty()) {
    return refine_heuristic(specs, violations, iter, gamma_last, opts);
  }
  try {
    const std::string reply = client.complete(
        llm::adapt_prompt(),
        adapt_user_prompt(specs, violations, memory_digest, iter));
    const nlohmann::json doc = llm::extract_json(reply);
    if (!doc.contains("updates")) throw ParseError("reply lacks updates");
    AdaptDecision d;
    d.source = AdaptSource::llm;
    d.updated_specs = apply_updates(specs, doc.at("updates"));
    if (!opts.floor_enabled) {
      d.updated_specs.hinf_min = specs.hinf_min;
    } else {
      d.updated_specs.hinf_min = update_gamma_floor(
          d.updated_specs, violations, gamma_last, iter);
    }
    d.updated_specs.validate();
    d.gamma_floor_after = d.updated_specs.hinf_min;
    if (doc.contains("diagnosis")) {
      d.rationale = doc.at("diagnosis").dump();
    } else {
      d.rationale = "model updates applied";
    }
    return d;
  } catch (const std::exception& e) {
    AdaptDecision d =
        refine_heuristic(specs, violations, iter, gamma_last, opts);
    d.rationale = std::string("model reply rejected (") + e.what() + "); " +
                  d.rationale;
    return d;
  }
}

nlohmann::json to_json(const AdaptDecision& d) {
  return {{"updated_specs", specset_to_json(d.updated_specs)},
          {"gamma_floor_after", real_to_json(d.gamma_floor_after)},
          {"rationale", d.rationale},
          {"source", to_string(d.source)}};
}

}  // namespace s2c
