#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fake_client.hpp"
#include "s2c/errors.hpp"
#include "s2c/pipeline.hpp"
#include "support.hpp"

namespace s2c {
namespace {

using testing::Gen;

std::string read_fixture(const std::string& name) {
  std::ifstream in(testing::fixture(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DesignRecord record(int iteration, std::size_t violations, double gamma) {
  DesignRecord r;
  r.iteration = iteration;
  r.certificate.status = SynthesisStatus::success;
  r.certificate.gamma = gamma;
  r.report.violations.assign(violations, Violation{ViolationKind::overshoot, 1, 0.5,
                                                   Severity::high});
  return r;
}

TEST(SelectBest, FewestViolationsThenLowestGamma) {
  DesignMemory m;
  m.add(record(0, 2, 14.6));
  m.add(record(1, 1, 18.0));
  m.add(record(2, 1, 17.5));
  const DesignRecord& best = select_best(m);
  EXPECT_EQ(best.iteration, 2);
  EXPECT_EQ(best.certificate.gamma, 17.5);
}

TEST(SelectBest, SingleAndTieBreak) {
  DesignMemory m;
  m.add(record(2, 1, 5.0));
  EXPECT_EQ(select_best(m).iteration, 2);
  m.add(record(5, 1, 5.0));
  EXPECT_EQ(select_best(m).iteration, 2);
}

TEST(SelectBest, EmptyThrows) {
  EXPECT_THROW(select_best(DesignMemory{}), PipelineError);
}

TEST(DesignMemory, CapacityAndOldestFirstEviction) {
  DesignMemory m;
  for (int i = 0; i < 27; ++i) {
    m.add(record(i, 0, 1.0));
    EXPECT_LE(m.size(), DesignMemory::kCapacity);
  }
  EXPECT_EQ(m.size(), 20u);
  EXPECT_EQ(m.records().front().iteration, 7);
  EXPECT_EQ(m.records().back().iteration, 26);
  EXPECT_EQ(m.digest(3).size(), 3u);
}

TEST(ComputeMetrics, GammaRatioAndDecaySat) {
  DesignRecord r = record(0, 0, 18.0);
  r.certificate.closed_loop_spectrum.max_real_part = -0.31;
  r.report.freq.disturbance_rejection = 5.61;
  SpecSet s = testing::make_specs(20.0, 16.0);
  const MetricSet m = compute_metrics(r, s);
  EXPECT_DOUBLE_EQ(*m.gamma_over_target, 0.9);
  EXPECT_NEAR(*m.decay_sat, 0.31 / 0.24375, 1e-12);
  EXPECT_NEAR(*m.decay_sat, 1.27, 0.005);
  EXPECT_EQ(*m.disturbance_rejection, 5.61);
  r.certificate.status = SynthesisStatus::infeasible;
  EXPECT_THROW(compute_metrics(r, s), PipelineError);
}

TEST(Run, StableScalarConvergesFirstIteration) {
  const PlantModel p = testing::scalar_plant(-1, 1, 1, 1);
  const RunResult r = run_with_specs(p, testing::make_specs(10.0, 16.0));
  EXPECT_TRUE(r.converged);
  ASSERT_TRUE(r.converged_at.has_value());
  EXPECT_EQ(*r.converged_at, 0);
  EXPECT_EQ(r.iterations_used, 1);
  EXPECT_TRUE(r.final_record.report.violations.empty());
  EXPECT_FALSE(r.fallback_selected);
  EXPECT_TRUE(r.metrics.success);
}

TEST(Run, UnstabilizableThrows) {
  const PlantModel p = testing::scalar_plant(1, 0, 1, 1);
  EXPECT_THROW(run_with_specs(p, testing::make_specs(10.0, 16.0)), PipelineError);
}

TEST(Run, DiscretePlantIsConverted) {
  const PlantModel d = load_plant(testing::fixture("discrete_ts1.json"));
  const RunResult r = run(d, {"Settling time under 8 seconds.", RequirementSource::user});
  EXPECT_EQ(r.plant.domain, TimeDomain::continuous);
  EXPECT_TRUE(r.metrics.success);
}

TEST(Run, BitDeterministic) {
  const PlantModel p = load_plant(testing::fixture("nn1_like.json"));
  const RequirementText req{read_fixture("nn1_requirement.txt"), RequirementSource::fixture};
  EXPECT_EQ(run_report(run(p, req)).dump(), run_report(run(p, req)).dump());
}

TEST(Run, NullClientMatchesRulePath) {
  // A "{}" reply fails schema validation, so extraction falls back to rules
  // and adaptation to heuristics: the design is unchanged.
  const PlantModel p = load_plant(testing::fixture("nn1_like.json"));
  const RequirementText req{read_fixture("nn1_requirement.txt"), RequirementSource::fixture};
  llm::NullClient null;
  RunConfig cfg;
  cfg.client = &null;
  const RunResult a = run(p, req, cfg);
  const RunResult b = run(p, req);
  EXPECT_TRUE(a.spec_parse.fallback);
  EXPECT_EQ(a.K, b.K);
  EXPECT_EQ(a.certificate.gamma, b.certificate.gamma);
}

TEST(Run, NN1FloorTraceReachesEighteen) {
  const PlantModel p = load_plant(testing::fixture("nn1_like.json"));
  const RunResult r =
      run(p, {read_fixture("nn1_requirement.txt"), RequirementSource::fixture});
  ASSERT_GE(r.attempts.size(), 2u);
  EXPECT_EQ(r.attempts[0].gamma_floor, 0.0);
  EXPECT_EQ(r.attempts[0].gamma_target, 20.0);
  EXPECT_DOUBLE_EQ(r.attempts[0].alpha, 0.25);
  EXPECT_EQ(r.attempts[1].gamma_floor, 18.0);
  ASSERT_TRUE(r.attempts[1].gamma.has_value());
  EXPECT_NEAR(*r.attempts[1].gamma, 18.0, 18.0 * 1e-6);
  for (std::size_t i = 1; i < r.attempts.size(); ++i) {
    EXPECT_GE(r.attempts[i].gamma_floor, r.attempts[i - 1].gamma_floor);
  }
}

TEST(Run, MemoryBoundedForLongRuns) {
  const PlantModel p = load_plant(testing::fixture("nn1_like.json"));
  RunConfig cfg;
  cfg.max_iter = 25;
  cfg.mc.n_trials = 10;
  const RunResult r =
      run(p, {read_fixture("nn1_requirement.txt"), RequirementSource::fixture}, cfg);
  EXPECT_LE(r.history.size(), DesignMemory::kCapacity);
  EXPECT_LE(r.iterations_used, 25);
  if (!r.converged) {
    EXPECT_TRUE(r.fallback_selected);
  }
}

// Random plants through the full loop: termination, convergence contract,
// nondecreasing floor and the soundness chain of the final certificate.
TEST(Run, LoopInvariantsOnRandomPlants) {
  Gen g(321);
  for (int k = 0; k < 12; ++k) {
    const PlantModel p = g.plant(g.integer(2, 4), 1);
    RunConfig cfg;
    cfg.max_iter = 6;
    cfg.mc.n_trials = 10;
    RunResult r;
    try {
      r = run_with_specs(p, testing::make_specs(g.uniform(5, 40), g.uniform(4, 20)), cfg);
    } catch (const PipelineError&) {
      continue;
    }
    SCOPED_TRACE("plant " + std::to_string(k));
    EXPECT_LE(r.iterations_used, cfg.max_iter);
    if (r.converged) {
      EXPECT_TRUE(r.final_record.report.violations.empty());
    }
    for (std::size_t i = 1; i < r.attempts.size(); ++i) {
      EXPECT_GE(r.attempts[i].gamma_floor, r.attempts[i - 1].gamma_floor);
    }
    const SynthesisCertificate& c = r.certificate;
    ASSERT_EQ(c.status, SynthesisStatus::success);
    EXPECT_LT(testing::max_sym_eig(assemble_psi(r.plant, c.P, c.Y, c.gamma)), 0.0);
    EXPECT_LE(closed_loop_hinf(r.plant, c.K), c.gamma * 1.001);
  }
}

TEST(Baseline, LqrScalarGain) {
  // A = 0, B = 1, Q = R = 1: X = 1, K = -1, closed loop 1/(s+1).
  const PlantModel p = testing::scalar_plant(0, 1, 1, 1);
  const BaselineResult b = run_baseline(p, testing::make_specs(10.0, 16.0), Method::lqr_h2);
  ASSERT_TRUE(b.metrics.success) << b.error;
  EXPECT_NEAR(*b.metrics.disturbance_rejection, 1.0, 1e-6);
  EXPECT_NEAR(*b.metrics.gamma, 1.0, 1e-6);
  EXPECT_NEAR(*b.metrics.decay_sat, 1.0 / 0.24375, 1e-6);
}

TEST(Baseline, BrlOnUnstabilizableFails) {
  const PlantModel p = testing::scalar_plant(1, 0, 1, 1);
  for (Method m : all_methods()) {
    const BaselineResult b = run_baseline(p, testing::make_specs(10.0, 16.0), m);
    EXPECT_FALSE(b.metrics.success) << to_string(m);
    EXPECT_FALSE(b.error.empty()) << to_string(m);
  }
}

TEST(Baseline, MethodNames) {
  for (Method m : all_methods()) EXPECT_EQ(method_from_string(to_string(m)), m);
  EXPECT_THROW(method_from_string("pid"), ParseError);
}

TEST(Baseline, BrlAlphaRespectsDecay) {
  const PlantModel p = load_plant(testing::fixture("nn1_like.json"));
  const SpecSet s = testing::make_specs(50.0, 8.0);
  const BaselineResult brl = run_baseline(p, s, Method::brl);
  const BaselineResult alpha = run_baseline(p, s, Method::brl_alpha);
  ASSERT_TRUE(brl.metrics.success);
  ASSERT_TRUE(alpha.metrics.success);
  EXPECT_GE(*alpha.metrics.decay_sat, 1.0);
  EXPECT_LE(*brl.metrics.gamma, *alpha.metrics.gamma * (1 + 1e-6));
}

TEST(RunReport, SchemaVersionAndFields) {
  const RunResult r =
      run_with_specs(testing::scalar_plant(-1, 1, 1, 1), testing::make_specs(10.0, 16.0));
  const nlohmann::json j = run_report(r);
  EXPECT_EQ(j.at("schema_version"), kRunReportSchemaVersion);
  EXPECT_TRUE(j.contains("attempts"));
  EXPECT_TRUE(j.contains("metrics"));
  EXPECT_EQ(j.at("converged_at"), 0);
}

}  // namespace
}  // namespace s2c
