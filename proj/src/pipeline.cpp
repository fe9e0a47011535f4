#include "s2c/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c {

namespace {

PlantModel continuous_plant(const PlantModel& p) {
  p.validate();
  return p.domain == TimeDomain::discrete ? tustin_d2c(p) : p;
}

McConfig mc_config(const RunConfig& cfg) {
  McConfig mc = cfg.mc;
  mc.seed = cfg.seed;
  return mc;
}

nlohmann::json opt_real(const std::optional<double>& v) {
  return v ? real_to_json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void DesignMemory::add(DesignRecord r) {
  if (records_.size() == kCapacity) records_.pop_front();
  records_.push_back(std::move(r));
}

void DesignMemory::set_last_adapt(AdaptDecision d) {
  if (!records_.empty()) records_.back().adapt = std::move(d);
}

nlohmann::json DesignMemory::digest(std::size_t k) const {
  nlohmann::json out = nlohmann::json::array();
  const std::size_t start = records_.size() > k ? records_.size() - k : 0;
  for (std::size_t i = start; i < records_.size(); ++i) {
    const DesignRecord& r = records_[i];
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : r.report.violations) v.push_back(to_json(x));
    out.push_back(
        {{"iteration", r.iteration},
         {"gamma", r.certificate.gamma},
         {"gamma_min", r.specs_snapshot.hinf_min},
         {"max_real_part",
          real_to_json(r.certificate.closed_loop_spectrum.max_real_part)},
         {"settling_median_s",
          real_to_json(r.report.mc.settling_time_median_s)},
         {"overshoot_median", real_to_json(r.report.mc.overshoot_median)},
         {"violations", v}});
  }
  return out;
}

const DesignRecord& select_best(const DesignMemory& memory) {
  if (memory.empty()) throw PipelineError("no design available to select");
  const auto& recs = memory.records();
  auto key = [](const DesignRecord& r) {
    return std::make_tuple(r.report.violations.size(), r.certificate.gamma,
                           r.iteration);
  };
  return *std::min_element(recs.begin(), recs.end(),
                           [&](const DesignRecord& a, const DesignRecord& b) {
                             return key(a) < key(b);
                           });
}

MetricSet compute_metrics(const DesignRecord& rec, const SpecSet& specs) {
  if (rec.certificate.status != SynthesisStatus::success) {
    throw PipelineError("metrics need a successful certificate");
  }
  MetricSet m;
  m.success = true;
  m.gamma = rec.certificate.gamma;
  m.gamma_over_target = rec.certificate.gamma / specs.hinf.target;
  const double alpha = specs.alpha();
  if (alpha > 0.0) {
    m.decay_sat = -rec.certificate.closed_loop_spectrum.max_real_part / alpha;
  }
  m.disturbance_rejection = rec.report.freq.disturbance_rejection;
  m.settling_median_s = rec.report.mc.settling_time_median_s;
  m.overshoot_median = rec.report.mc.overshoot_median;
  return m;
}

RunResult run_with_specs(const PlantModel& plant, const SpecSet& specs,
                         const RunConfig& cfg) {
  if (cfg.max_iter < 1) throw DomainError("max_iter must be at least 1");
  specs.validate();
  RunResult out;
  out.plant = continuous_plant(plant);
  out.original_specs = specs;
  const PlantModel& p = out.plant;
  const McConfig mc = mc_config(cfg);
  const AdaptOptions adapt_opts{cfg.floor_enabled};

  SpecSet s = specs;
  for (int i = 0; i < cfg.max_iter; ++i) {
    out.iterations_used = i + 1;
    const SynthesisCertificate cert = synthesize(p, s, cfg.synthesis);
    AttemptRecord attempt{i,           cert.status, s.hinf.target,
                          s.hinf_min,  cert.alpha,  std::nullopt, 0};
    if (cert.status != SynthesisStatus::success) {
      out.attempts.push_back(attempt);
      s = relax_on_infeasible(s);
      continue;
    }
    DesignRecord rec;
    rec.iteration = i;
    rec.specs_snapshot = s;
    rec.certificate = cert;
    rec.report = verify_design(p, cert.K, s, mc);
    attempt.gamma = cert.gamma;
    attempt.violation_count = rec.report.violations.size();
    out.attempts.push_back(attempt);
    const std::vector<Violation> violations = rec.report.violations;
    out.history.add(std::move(rec));
    if (violations.empty()) {
      out.converged = true;
      out.converged_at = i;
      break;
    }
    if (i + 1 == cfg.max_iter) break;
    const int next = i + 1;
    AdaptDecision d =
        cfg.client
            ? refine_llm(s, violations, out.history.digest(3), next,
                         cert.gamma, *cfg.client, adapt_opts)
            : refine_heuristic(s, violations, next, cert.gamma, adapt_opts);
    s = d.updated_specs;
    out.history.set_last_adapt(std::move(d));
  }

  if (out.history.empty()) {
    throw PipelineError("every iteration failed synthesis; no design found");
  }
  out.final_record = out.converged ? out.history.records().back()
                                   : select_best(out.history);
  out.fallback_selected = !out.converged;
  out.certificate = out.final_record.certificate;
  out.K = out.certificate.K;
  out.metrics = compute_metrics(out.final_record, specs);
  return out;
}

RunResult run(const PlantModel& p, const RequirementText& req,
              const RunConfig& cfg) {
  p.validate();
  SpecParse parsed =
      cfg.client ? parse_llm(req, *cfg.client) : parse_rules(req);
  const SpecSet specs = to_specset(parsed.spec, p);
  RunResult out = run_with_specs(p, specs, cfg);
  out.spec_parse = std::move(parsed);
  return out;
}

const char* to_string(Method m) {
  switch (m) {
    case Method::brl:
      return "brl";
    case Method::brl_alpha:
      return "brl_alpha";
    case Method::s2c_nofloor:
      return "s2c_nofloor";
    case Method::s2c_full:
      return "s2c_full";
    case Method::lqr_h2:
      return "lqr_h2";
  }
  return "brl";
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods()) {
    if (s == to_string(m)) return m;
  }
  throw ParseError("unknown method '" + s + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> kAll = {Method::brl, Method::brl_alpha,
                                           Method::s2c_nofloor,
                                           Method::s2c_full, Method::lqr_h2};
  return kAll;
}

BaselineResult run_baseline(const PlantModel& plant, const SpecSet& specs,
                            Method method, const RunConfig& cfg) {
  BaselineResult out;
  out.method = method;
  try {
    const PlantModel p = continuous_plant(plant);
    switch (method) {
      case Method::brl:
      case Method::brl_alpha: {
        const double alpha = method == Method::brl ? 0.0 : specs.alpha();
        out.iterations = 1;
        DesignRecord rec;
        rec.specs_snapshot = specs;
        rec.certificate = synthesize(p, specs, alpha, cfg.synthesis);
        if (rec.certificate.status != SynthesisStatus::success) {
          out.error = std::string("synthesis ") +
                      to_string(rec.certificate.status);
          break;
        }
        rec.report = verify_design(p, rec.certificate.K, specs, mc_config(cfg));
        out.converged = rec.report.violations.empty();
        out.metrics = compute_metrics(rec, specs);
        break;
      }
      case Method::s2c_nofloor:
      case Method::s2c_full: {
        RunConfig c = cfg;
        c.floor_enabled = method == Method::s2c_full;
        RunResult r = run_with_specs(p, specs, c);
        out.iterations = r.iterations_used;
        out.converged = r.converged;
        out.metrics = r.metrics;
        out.run = std::move(r);
        break;
      }
      case Method::lqr_h2: {
        out.iterations = 1;
        const ChannelMatrices ch = alias_matrices(p);
        const MatrixXd Q = ch.Cz.transpose() * ch.Cz;
        const MatrixXd R = MatrixXd::Identity(p.inputs(), p.inputs());
        const MatrixXd K = care_lqr(p.A, p.B, Q, R);
        const Spectrum spec = eigvals(p.A + p.B * K);
        if (!(spec.max_real_part < 0.0)) {
          out.error = "LQR gain is not stabilizing";
          break;
        }
        const VerificationReport rep =
            verify_design(p, K, specs, mc_config(cfg));
        out.converged = rep.violations.empty();
        MetricSet m;
        m.success = true;
        m.disturbance_rejection = rep.freq.disturbance_rejection;
        m.gamma = m.disturbance_rejection;
        if (m.gamma) m.gamma_over_target = *m.gamma / specs.hinf.target;
        if (specs.alpha() > 0.0) {
          m.decay_sat = -spec.max_real_part / specs.alpha();
        }
        m.settling_median_s = rep.mc.settling_time_median_s;
        m.overshoot_median = rep.mc.overshoot_median;
        out.metrics = m;
        break;
      }
    }
  } catch (const std::exception& e) {
    out.metrics = MetricSet{};
    out.converged = false;
    out.error = e.what();
  }
  return out;
}

nlohmann::json to_json(const MetricSet& m) {
  return {{"success", m.success},
          {"gamma", opt_real(m.gamma)},
          {"gamma_over_target", opt_real(m.gamma_over_target)},
          {"decay_sat", opt_real(m.decay_sat)},
          {"disturbance_rejection", opt_real(m.disturbance_rejection)},
          {"settling_median_s", opt_real(m.settling_median_s)},
          {"overshoot_median", opt_real(m.overshoot_median)}};
}

nlohmann::json to_json(const AttemptRecord& a) {
  return {{"iteration", a.iteration},
          {"status", to_string(a.status)},
          {"gamma_target", a.gamma_target},
          {"gamma_min", a.gamma_floor},
          {"alpha", real_to_json(a.alpha)},
          {"gamma", opt_real(a.gamma)},
          {"violation_count", a.violation_count}};
}

nlohmann::json to_json(const DesignRecord& r) {
  nlohmann::json j = {{"iteration", r.iteration},
                      {"specs", specset_to_json(r.specs_snapshot)},
                      {"certificate", to_json(r.certificate)},
                      {"report", to_json(r.report)}};
  j["adapt"] = r.adapt ? to_json(*r.adapt) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json run_report(const RunResult& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& rec : r.history.records()) history.push_back(to_json(rec));
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : r.attempts) attempts.push_back(to_json(a));
  return {{"schema_version", kRunReportSchemaVersion},
          {"plant", r.plant.name},
          {"converged", r.converged},
          {"converged_at", r.converged_at ? nlohmann::json(*r.converged_at)
                                          : nlohmann::json(nullptr)},
          {"iterations_used", r.iterations_used},
          {"fallback_selected", r.fallback_selected},
          {"spec_extraction",
           {{"spec", r.spec_parse.spec},
            {"fallback", r.spec_parse.fallback},
            {"warning", r.spec_parse.warning}}},
          {"original_specs", specset_to_json(r.original_specs)},
          {"attempts", attempts},
          {"history", history},
          {"final", to_json(r.final_record)},
          {"metrics", to_json(r.metrics)}};
}

}  // namespace s2c
