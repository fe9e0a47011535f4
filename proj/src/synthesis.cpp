#include "s2c/synthesis.hpp"

#include <cmath>

#include "s2c/errors.hpp"
#include "s2c/json_io.hpp"

namespace s2c {

namespace {

void check_dims(const PlantModel& p, const MatrixXd& P, const MatrixXd& Y) {
  const Eigen::Index n = p.states();
  if (P.rows() != n || P.cols() != n) {
    throw DimensionError("P must be n x n");
  }
  if (Y.rows() != p.inputs() || Y.cols() != n) {
    throw DimensionError("Y must be m x n");
  }
}

double max_sym_eig(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_sym_eig(const MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (S + S.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

const char* to_string(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::success:
      return "success";
    case SynthesisStatus::infeasible:
      return "infeasible";
    case SynthesisStatus::failure:
      return "failure";
  }
  return "failure";
}

MatrixXd assemble_psi(const PlantModel& p, const MatrixXd& P, const MatrixXd& Y,
                      double gamma) {
  check_dims(p, P, Y);
  const ChannelMatrices ch = alias_matrices(p);
  const Eigen::Index n = p.states();
  const Eigen::Index w = ch.E.cols();
  const Eigen::Index z = ch.Cz.rows();
  const MatrixXd AP = p.A * P + p.B * Y;
  const MatrixXd CP = ch.Cz * P + ch.Dz * Y;

  MatrixXd psi = MatrixXd::Zero(n + w + z, n + w + z);
  psi.topLeftCorner(n, n) = AP + AP.transpose();
  psi.block(0, n, n, w) = ch.E;
  psi.block(n, 0, w, n) = ch.E.transpose();
  psi.block(0, n + w, n, z) = CP.transpose();
  psi.block(n + w, 0, z, n) = CP;
  psi.block(n, n, w, w).diagonal().setConstant(-gamma);
  psi.block(n + w, n + w, z, z).diagonal().setConstant(-gamma);
  return psi;
}

MatrixXd assemble_decay(const PlantModel& p, const MatrixXd& P,
                        const MatrixXd& Y, double alpha) {
  check_dims(p, P, Y);
  if (!(alpha >= 0.0)) throw DomainError("decay rate must be non-negative");
  const MatrixXd AP = p.A * P + p.B * Y;
  return AP + AP.transpose() + 2.0 * alpha * P;
}

double closed_loop_hinf(const PlantModel& p, const MatrixXd& K) {
  const ChannelMatrices ch = alias_matrices(p);
  const MatrixXd Acl = p.A + p.B * K;
  const MatrixXd Ccl = ch.Cz + ch.Dz * K;
  return hinf_norm(Acl, ch.E, Ccl, MatrixXd::Zero(Ccl.rows(), ch.E.cols()));
}

SynthesisCertificate synthesize(const PlantModel& p, const SpecSet& specs,
                                const SynthesisOptions& opts) {
  return synthesize(p, specs, specs.alpha(), opts);
}

SynthesisCertificate synthesize(const PlantModel& p, const SpecSet& specs,
                                double alpha, const SynthesisOptions& opts) {
  if (p.domain != TimeDomain::continuous) {
    throw DomainError("synthesis expects a continuous plant");
  }
  p.validate();
  specs.validate();
  if (!(std::isfinite(alpha) && alpha >= 0.0)) {
    throw DomainError("decay rate must be non-negative");
  }

  const Eigen::Index n = p.states();
  sdp::LmiProblem prob(n, p.inputs());
  prob.gamma_min = specs.hinf_min;
  prob.gamma_target = specs.hinf.target;
  prob.add_block("psi", sdp::BlockKind::strict,
                 [&p](const MatrixXd& P, const MatrixXd& Y, double g) {
                   return assemble_psi(p, P, Y, g);
                 });
  prob.add_block("decay", sdp::BlockKind::strict,
                 [&p, alpha](const MatrixXd& P, const MatrixXd& Y, double) {
                   return assemble_decay(p, P, Y, alpha);
                 });
  prob.add_block("conditioning", sdp::BlockKind::bound,
                 [n](const MatrixXd& P, const MatrixXd&, double) {
                   return MatrixXd(kConditioningFloor *
                                       MatrixXd::Identity(n, n) -
                                   P);
                 });

  const sdp::SdpSolution sol =
      sdp::solve(prob, opts.tol, opts.max_bisections, opts.solver);

  SynthesisCertificate cert;
  cert.alpha = alpha;
  cert.solver_iterations = sol.iterations;
  if (sol.status == sdp::SdpStatus::infeasible) {
    cert.status = SynthesisStatus::infeasible;
    cert.message = "LMI infeasible on the gamma bracket";
    return cert;
  }
  if (sol.status == sdp::SdpStatus::numerical_failure) {
    cert.status = SynthesisStatus::failure;
    cert.message = "solver reported numerical failure";
    return cert;
  }

  cert.P = sol.P;
  cert.Y = sol.Y;
  cert.gamma = sol.gamma;
  // K = Y P^{-1}.
  const Eigen::LLT<MatrixXd> llt(sol.P);
  cert.K = llt.solve(sol.Y.transpose()).transpose();
  cert.psi_max_eig = max_sym_eig(assemble_psi(p, cert.P, cert.Y, cert.gamma));
  cert.decay_lmi_max_eig =
      max_sym_eig(assemble_decay(p, cert.P, cert.Y, alpha));
  cert.closed_loop_spectrum = eigvals(p.A + p.B * cert.K);

  const bool ok = llt.info() == Eigen::Success && cert.psi_max_eig < 0.0 &&
                  cert.decay_lmi_max_eig < 0.0 &&
                  min_sym_eig(cert.P) >= kConditioningFloor - 1e-6 &&
                  cert.closed_loop_spectrum.max_real_part < 0.0 &&
                  cert.K.allFinite();
  if (!ok) {
    cert.status = SynthesisStatus::failure;
    cert.message = "certificate recheck failed";
    cert.K.resize(0, 0);
    return cert;
  }
  cert.status = SynthesisStatus::success;
  return cert;
}

nlohmann::json to_json(const Spectrum& s) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& l : s.eigenvalues) ev.push_back({l.real(), l.imag()});
  return {{"eigenvalues", ev},
          {"max_real_part", real_to_json(s.max_real_part)}};
}

nlohmann::json to_json(const SynthesisCertificate& c) {
  nlohmann::json j;
  j["status"] = to_string(c.status);
  j["alpha"] = real_to_json(c.alpha);
  j["solver_iterations"] = c.solver_iterations;
  if (!c.message.empty()) j["message"] = c.message;
  if (c.status != SynthesisStatus::success) return j;
  j["gamma"] = c.gamma;
  j["K"] = matrix_to_json(c.K);
  j["P"] = matrix_to_json(c.P);
  j["Y"] = matrix_to_json(c.Y);
  j["psi_max_eig"] = c.psi_max_eig;
  j["decay_lmi_max_eig"] = c.decay_lmi_max_eig;
  j["closed_loop_spectrum"] = to_json(c.closed_loop_spectrum);
  return j;
}

}  // namespace s2c
