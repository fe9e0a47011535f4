#include "s2c/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  if (k == 0) return 0.0;
  if (k % 2 == 1) return v[k / 2];
  return 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

VectorXd initial_state(Eigen::Index n, std::uint64_t seed, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd x(n);
  do {
    for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
  } while (x.norm() == 0.0);
  return x / x.norm();
}

}  // namespace

TrialMetrics trial_metrics(const std::vector<double>& norms, double dt) {
  if (norms.empty()) return {kInf, 0.0};
  const double x0 = norms.front();
  const double peak = *std::max_element(norms.begin(), norms.end());
  const double threshold = 0.02 * peak;
  // Walk back from the end to the first sample of the final run below the
  // threshold.
  std::size_t k = norms.size();
  while (k > 0 && norms[k - 1] <= threshold) --k;
  const double settling =
      k == norms.size() ? kInf : static_cast<double>(k) * dt;
  const double overshoot = x0 > 0.0 ? std::max(0.0, (peak - x0) / x0) : 0.0;
  return {settling, overshoot};
}

McStats monte_carlo(const MatrixXd& Acl, const McConfig& cfg) {
  if (cfg.n_trials <= 0 || !(cfg.horizon_s > 0.0) || !(cfg.dt_s > 0.0)) {
    throw DomainError("Monte Carlo configuration values must be positive");
  }
  if (Acl.rows() != Acl.cols() || Acl.rows() == 0) {
    throw DimensionError("closed-loop matrix must be square and non-empty");
  }
  const Eigen::Index n = Acl.rows();
  const auto steps = static_cast<int>(std::llround(cfg.horizon_s / cfg.dt_s));
  const MatrixXd Phi = expm(Acl * cfg.dt_s);

  std::vector<double> settling(static_cast<std::size_t>(cfg.n_trials));
  std::vector<double> overshoot(static_cast<std::size_t>(cfg.n_trials));
  McStats out;
  out.n_trials = cfg.n_trials;
  out.seed = cfg.seed;
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(steps) + 1);
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    VectorXd x = initial_state(n, cfg.seed, trial);
    norms.clear();
    norms.push_back(x.norm());
    bool diverged = false;
    for (int k = 0; k < steps; ++k) {
      x = Phi * x;
      const double r = x.norm();
      norms.push_back(r);
      if (!(r <= kDivergenceNorm)) {
        diverged = true;
        break;
      }
    }
    TrialMetrics m = trial_metrics(norms, cfg.dt_s);
    if (diverged) {
      ++out.diverged_count;
      m.settling_time_s = kInf;
    }
    settling[static_cast<std::size_t>(trial)] = m.settling_time_s;
    overshoot[static_cast<std::size_t>(trial)] = m.overshoot;
  }
  out.settling_time_median_s = median(settling);
  out.settling_time_max_s = *std::max_element(settling.begin(), settling.end());
  out.overshoot_median = median(overshoot);
  out.overshoot_max = *std::max_element(overshoot.begin(), overshoot.end());
  return out;
}

McStats monte_carlo(const PlantModel& p, const MatrixXd& K,
                    const McConfig& cfg) {
  if (K.rows() != p.inputs() || K.cols() != p.states()) {
    throw DimensionError("state-feedback gain must be m x n");
  }
  return monte_carlo(MatrixXd(p.A + p.B * K), cfg);
}

FreqMetrics freq_check(const PlantModel& p, const MatrixXd& K) {
  if (K.rows() != p.inputs()) {
    throw DimensionError("gain must have one row per input");
  }
  if (K.cols() == p.states()) {
    const ChannelMatrices ch = alias_matrices(p);
    FreqMetrics f;
    f.controller_type = ControllerType::state_fb;
    const MatrixXd Ccl = ch.Cz + ch.Dz * K;
    f.disturbance_rejection =
        hinf_norm(p.A + p.B * K, ch.E, Ccl,
                  MatrixXd::Zero(Ccl.rows(), ch.E.cols()));
    return f;
  }
  if (p.Cy && K.cols() == p.Cy->rows()) {
    return loop_margins(LoopPlant{p.A, p.B, *p.Cy}, K);
  }
  throw DimensionError("gain matches neither state nor output feedback");
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::settling_time:
      return "settling_time";
    case ViolationKind::overshoot:
      return "overshoot";
    case ViolationKind::hinf:
      return "hinf";
    case ViolationKind::infeasible_synthesis:
      return "infeasible_synthesis";
  }
  return "hinf";
}

const char* to_string(Severity s) {
  switch (s) {
    case Severity::low:
      return "low";
    case Severity::medium:
      return "medium";
    case Severity::high:
      return "high";
    case Severity::critical:
      return "critical";
  }
  return "critical";
}

Severity classify_severity(double measured, double target) {
  const double r = (measured - target) / std::max(std::abs(target), 1e-9);
  if (r <= 0.10) return Severity::low;
  if (r <= 0.50) return Severity::medium;
  if (r <= 2.0) return Severity::high;
  return Severity::critical;
}

std::vector<Violation> check(const McStats& mc, const FreqMetrics& freq,
                             const SpecSet& specs) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind kind, double measured, double target) {
    out.push_back({kind, measured, target, classify_severity(measured, target)});
  };
  const double ts = specs.settling_time.target;
  if (mc.settling_time_median_s > ts + specs.settling_time.slack) {
    add(ViolationKind::settling_time, mc.settling_time_median_s, ts);
  }
  const double os = specs.overshoot.target;
  if (mc.overshoot_median > os + specs.overshoot.slack) {
    add(ViolationKind::overshoot, mc.overshoot_median, os);
  }
  if (freq.controller_type == ControllerType::state_fb &&
      freq.disturbance_rejection &&
      !(*freq.disturbance_rejection <= specs.hinf.target)) {
    add(ViolationKind::hinf, *freq.disturbance_rejection, specs.hinf.target);
  }
  return out;
}

VerificationReport verify_design(const PlantModel& p, const MatrixXd& K,
                                 const SpecSet& specs, const McConfig& cfg) {
  VerificationReport r;
  r.mc = monte_carlo(p, K, cfg);
  r.freq = freq_check(p, K);
  r.violations = check(r.mc, r.freq, specs);
  return r;
}

nlohmann::json to_json(const McStats& mc) {
  return {{"n_trials", mc.n_trials},
          {"settling_time_median_s", real_to_json(mc.settling_time_median_s)},
          {"settling_time_max_s", real_to_json(mc.settling_time_max_s)},
          {"overshoot_median", real_to_json(mc.overshoot_median)},
          {"overshoot_max", real_to_json(mc.overshoot_max)},
          {"diverged_count", mc.diverged_count},
          {"seed", mc.seed}};
}

nlohmann::json to_json(const FreqMetrics& f) {
  nlohmann::json j;
  j["controller_type"] =
      f.controller_type == ControllerType::state_fb ? "state_fb" : "output_fb";
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = real_to_json(*v);
  };
  opt("disturbance_rejection", f.disturbance_rejection);
  opt("Ms", f.Ms);
  opt("Mt", f.Mt);
  opt("GM_dB", f.GM_dB);
  opt("PM_deg", f.PM_deg);
  return j;
}

nlohmann::json to_json(const Violation& v) {
  return {{"kind", to_string(v.kind)},
          {"measured", real_to_json(v.measured)},
          {"target", real_to_json(v.target)},
          {"severity", to_string(v.severity)}};
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations) v.push_back(to_json(x));
  return {{"mc", to_json(r.mc)}, {"freq", to_json(r.freq)}, {"violations", v}};
}

}  // namespace s2c
