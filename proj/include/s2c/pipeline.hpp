#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/adapt.hpp"
#include "s2c/llm.hpp"
#include "s2c/model.hpp"
#include "s2c/specint.hpp"
#include "s2c/synthesis.hpp"
#include "s2c/verify.hpp"

namespace s2c {

/// One successfully synthesized and verified design.
struct DesignRecord {
  int iteration = 0;
  SpecSet specs_snapshot;
  SynthesisCertificate certificate;
  VerificationReport report;
  std::optional<AdaptDecision> adapt;
};

/// Ring buffer of the most recent designs; evicts oldest first.
class DesignMemory {
 public:
  static constexpr std::size_t kCapacity = 20;

  void add(DesignRecord r);
  /// Attaches the adaptation taken after the newest record.
  void set_last_adapt(AdaptDecision d);
  const std::deque<DesignRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  /// Compact summary of the newest `k` records for adaptation prompts.
  nlohmann::json digest(std::size_t k) const;

 private:
  std::deque<DesignRecord> records_;
};

/// Every iteration, including failed syntheses that leave no record.
struct AttemptRecord {
  int iteration = 0;
  SynthesisStatus status = SynthesisStatus::failure;
  double gamma_target = 0.0;
  double gamma_floor = 0.0;
  double alpha = 0.0;
  std::optional<double> gamma;
  std::size_t violation_count = 0;
};

/// Fields are absent when the design they describe does not exist.
struct MetricSet {
  bool success = false;
  std::optional<double> gamma;
  std::optional<double> gamma_over_target;
  std::optional<double> decay_sat;
  std::optional<double> disturbance_rejection;
  std::optional<double> settling_median_s;
  std::optional<double> overshoot_median;
};

struct RunConfig {
  int max_iter = 10;
  std::uint64_t seed = 42;
  /// Model backend for extraction and adaptation; rules and heuristics are
  /// used when null.
  llm::LlmClient* client = nullptr;
  bool floor_enabled = true;
  McConfig mc;
  SynthesisOptions synthesis;
};

struct RunResult {
  MatrixXd K;
  SynthesisCertificate certificate;
  bool converged = false;
  /// Iteration index at which all checks passed.
  std::optional<int> converged_at;
  int iterations_used = 0;
  /// The final design came from select_best rather than convergence.
  bool fallback_selected = false;
  DesignMemory history;
  std::vector<AttemptRecord> attempts;
  DesignRecord final_record;
  MetricSet metrics;
  SpecParse spec_parse;
  SpecSet original_specs;
  /// Continuous-time plant the design was computed for.
  PlantModel plant;
};

/// Extraction, then up to max_iter rounds of synthesis, verification and
/// adaptation. Discrete plants are converted with tustin_d2c first. An
/// infeasible round relaxes the specs and consumes the iteration. Metrics are
/// taken against the extracted (unadapted) specs. Throws PipelineError when
/// no round produced a design.
RunResult run(const PlantModel& p, const RequirementText& req,
              const RunConfig& cfg = {});

/// The same loop starting from given specs.
RunResult run_with_specs(const PlantModel& p, const SpecSet& specs,
                         const RunConfig& cfg = {});

/// Fewest violations, then lowest gamma, then earliest iteration. Throws
/// PipelineError on an empty memory.
const DesignRecord& select_best(const DesignMemory& memory);

/// Throws PipelineError unless the certificate status is success.
MetricSet compute_metrics(const DesignRecord& rec, const SpecSet& specs);

enum class Method { brl, brl_alpha, s2c_nofloor, s2c_full, lqr_h2 };

const char* to_string(Method m);
/// Throws ParseError for unknown names.
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

struct BaselineResult {
  Method method = Method::brl;
  MetricSet metrics;
  int iterations = 0;
  bool converged = false;
  std::string error;
  /// Present for the s2c methods.
  std::optional<RunResult> run;
};

/// brl and brl_alpha: one synthesis (alpha = 0, alpha = specs.alpha()).
/// s2c_nofloor and s2c_full: run_with_specs without and with the floor.
/// lqr_h2: CARE gain with Q = Cz^T Cz, R = I; gamma reports its achieved
/// closed-loop norm since no certificate exists. Errors become
/// success = false.
BaselineResult run_baseline(const PlantModel& p, const SpecSet& specs,
                            Method method, const RunConfig& cfg = {});

nlohmann::json to_json(const MetricSet& m);
nlohmann::json to_json(const AttemptRecord& a);
nlohmann::json to_json(const DesignRecord& r);

inline constexpr int kRunReportSchemaVersion = 1;
nlohmann::json run_report(const RunResult& r);

}  // namespace s2c
