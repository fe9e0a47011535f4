#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/pipeline.hpp"

namespace s2c::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
/// pipeline only: a design was emitted but did not meet every check.
inline constexpr int kExitFallback = 2;

/// Entry point; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

int cmd_pipeline(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err);
int cmd_bench(const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err);
int cmd_d2c(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int cmd_gen_suite(const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err);

struct SuiteProblem {
  std::string name;
  std::filesystem::path plant;
  std::filesystem::path req;
};

/// {"problems": [{"name", "plant", "req"}]}; relative paths resolve against
/// the suite file's directory. Throws ParseError for a malformed or empty
/// suite and for unresolvable files.
std::vector<SuiteProblem> load_suite(const std::filesystem::path& path);

struct BenchRow {
  std::string problem;
  Method method = Method::brl;
  BaselineResult result;
};

struct BenchOptions {
  std::vector<Method> methods;
  std::uint64_t seed = 42;
  int max_iter = 10;
  int jobs = 1;
  bool llm = false;
};

/// Runs every (problem, method) pair; rows are ordered problem-major in
/// suite order. Per-row failures are recorded, never thrown.
std::vector<BenchRow> run_bench(const std::vector<SuiteProblem>& suite,
                                const BenchOptions& opts);

/// CSV with the columns problem, method, success, iterations, gamma,
/// gamma_over_target, decay_sat, dist_rej, settling_median,
/// overshoot_median.
std::string aggregate_csv(const std::vector<BenchRow>& rows);

/// Per-method success rate, converged-within-6 rate and medians of
/// disturbance rejection (also normalised by the brl median), gamma ratio
/// and decay satisfaction. Medians use the rows where the value exists.
nlohmann::json aggregate_report(const std::vector<BenchRow>& rows,
                                const std::vector<Method>& methods);

/// Median of the present values; nullopt when there are none.
std::optional<double> median_of(std::vector<double> v);

struct GenSuiteOptions {
  int count = 14;
  std::uint64_t seed = 42;
  int n_min = 2;
  int n_max = 4;
  int m_min = 1;
  int m_max = 2;
  double unstable_frac = 2.0 / 14.0;
};

/// Parses "n:2..4,m:1..2" into the dimension ranges of `o`.
void parse_dims(const std::string& spec, GenSuiteOptions& o);
/// "a/b" or a decimal in [0, 1].
double parse_fraction(const std::string& s);

/// Random controllable plants: Gaussian A, B, E; z = [x; u]; exactly
/// round(count * unstable_frac) of them shifted to have max Re lambda(A) > 0,
/// the rest shifted to be Hurwitz.
std::vector<PlantModel> generate_plants(const GenSuiteOptions& o);

/// Requirement text written next to generated suites.
const char* default_requirement();

}  // namespace s2c::cli
