#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "s2c/analysis.hpp"
#include "s2c/model.hpp"
#include "s2c/sdp.hpp"

namespace s2c {

enum class SynthesisStatus { success, infeasible, failure };

const char* to_string(SynthesisStatus s);

/// State-feedback design u = K x with the data that certifies it.
/// On success: psi_max_eig < 0, decay_lmi_max_eig < 0, lambda_min(P) >= 0.1,
/// A + BK Hurwitz, K = Y P^{-1}, hinf_min <= gamma <= hinf target.
struct SynthesisCertificate {
  MatrixXd K;
  MatrixXd P;
  MatrixXd Y;
  double gamma = 0.0;
  double alpha = 0.0;
  Spectrum closed_loop_spectrum;
  double psi_max_eig = 0.0;
  double decay_lmi_max_eig = 0.0;
  SynthesisStatus status = SynthesisStatus::failure;
  int solver_iterations = 0;
  std::string message;
};

/// [[sym(AP+BY), E, (Cz P + Dz Y)^T], [E^T, -gamma I, 0], [Cz P + Dz Y, 0, -gamma I]]
MatrixXd assemble_psi(const PlantModel& p, const MatrixXd& P, const MatrixXd& Y,
                      double gamma);

/// sym(AP+BY) + 2 alpha P.
MatrixXd assemble_decay(const PlantModel& p, const MatrixXd& P,
                        const MatrixXd& Y, double alpha);

/// Lower bound on lambda_min(P).
inline constexpr double kConditioningFloor = 0.1;

struct SynthesisOptions {
  double tol = 1e-8;
  int max_bisections = 60;
  sdp::SolverSettings solver;
};

/// Minimises gamma in [specs.hinf_min, specs.hinf.target] subject to Psi < 0,
/// the decay block < 0 with alpha = specs.alpha(), and P >= 0.1 I.
/// Throws DomainError for discrete plants.
SynthesisCertificate synthesize(const PlantModel& p, const SpecSet& specs,
                                const SynthesisOptions& opts = {});

/// Same, with an explicit decay rate in place of specs.alpha().
SynthesisCertificate synthesize(const PlantModel& p, const SpecSet& specs,
                                double alpha,
                                const SynthesisOptions& opts = {});

nlohmann::json to_json(const Spectrum& s);
nlohmann::json to_json(const SynthesisCertificate& c);

/// Closed-loop norm from w to z: ||(Cz + Dz K)(sI - (A + BK))^{-1} E||_inf.
double closed_loop_hinf(const PlantModel& p, const MatrixXd& K);

}  // namespace s2c
