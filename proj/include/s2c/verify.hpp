#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/analysis.hpp"
#include "s2c/model.hpp"

namespace s2c {

struct McConfig {
  int n_trials = 50;
  double horizon_s = 20.0;
  double dt_s = 0.01;
  std::uint64_t seed = 42;
};

/// Settling times are +inf for trials that never settle or diverge.
struct McStats {
  int n_trials = 0;
  double settling_time_median_s = 0.0;
  double settling_time_max_s = 0.0;
  double overshoot_median = 0.0;
  double overshoot_max = 0.0;
  int diverged_count = 0;
  std::uint64_t seed = 0;
  bool operator==(const McStats&) const = default;
};

/// State norm above which a trial counts as diverged.
inline constexpr double kDivergenceNorm = 1e6;

/// Free response x' = Acl x from unit-norm initial states. Trial i draws a
/// standard normal vector from an engine seeded with (seed, i) and normalizes
/// it. Stepping is exact: x_{k+1} = expm(Acl dt) x_k. Throws DomainError for
/// non-positive configuration values.
McStats monte_carlo(const MatrixXd& Acl, const McConfig& cfg = {});

/// Same for A + B K.
McStats monte_carlo(const PlantModel& p, const MatrixXd& K,
                    const McConfig& cfg = {});

/// Settling time and overshoot of one sampled norm trajectory
/// (norms[k] = |x(k dt)|).
struct TrialMetrics {
  double settling_time_s;
  double overshoot;
};
TrialMetrics trial_metrics(const std::vector<double>& norms, double dt);

/// State feedback (K is m x n): disturbance_rejection of the closed loop
/// (Cz + Dz K)(sI - A - BK)^{-1} E. Output feedback (K is m x ny, requires
/// Cy): Ms, Mt and margins of the loop u = -K y. Throws DimensionError when K
/// fits neither shape.
FreqMetrics freq_check(const PlantModel& p, const MatrixXd& K);

enum class ViolationKind { settling_time, overshoot, hinf, infeasible_synthesis };
enum class Severity { low, medium, high, critical };

const char* to_string(ViolationKind k);
const char* to_string(Severity s);

/// r = (measured - target) / max(|target|, 1e-9): r <= 0.1 low, <= 0.5
/// medium, <= 2 high, otherwise critical.
Severity classify_severity(double measured, double target);

struct Violation {
  ViolationKind kind;
  double measured;
  double target;
  Severity severity;
};

/// Settling and overshoot violations compare the medians against
/// target + slack; the H-infinity check uses the bare target.
std::vector<Violation> check(const McStats& mc, const FreqMetrics& freq,
                             const SpecSet& specs);

struct VerificationReport {
  McStats mc;
  FreqMetrics freq;
  std::vector<Violation> violations;
};

VerificationReport verify_design(const PlantModel& p, const MatrixXd& K,
                                 const SpecSet& specs,
                                 const McConfig& cfg = {});

nlohmann::json to_json(const McStats& mc);
nlohmann::json to_json(const FreqMetrics& f);
nlohmann::json to_json(const Violation& v);
nlohmann::json to_json(const VerificationReport& r);

}  // namespace s2c
