#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace s2c::sdp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Maps a candidate (P, Y, gamma) to a symmetric block. Must be affine in
/// (P, Y, gamma).
using BlockFn =
    std::function<MatrixXd(const MatrixXd& P, const MatrixXd& Y, double gamma)>;

enum class BlockKind {
  /// Required F <= -eps_cert I. Shifted by the phase-one slack t.
  strict,
  /// Required F <= 0. Kept strictly feasible by its own barrier term and
  /// never shifted (used for P >= 0.1 I).
  bound,
};

/// Affine block F(x, gamma) = F0 + sum_i x_i F_i + gamma G, sampled once from
/// the evaluator so the solver never needs to know how the block is built.
struct AffineBlock {
  std::string name;
  BlockKind kind = BlockKind::strict;
  MatrixXd constant;
  std::vector<MatrixXd> coeffs;
  MatrixXd gamma_coeff;
  BlockFn evaluate;
};

/// minimize gamma over symmetric P (n x n), Y (m x n), gamma, subject to a
/// list of block constraints and gamma_min <= gamma <= gamma_target.
class LmiProblem {
 public:
  LmiProblem(Eigen::Index n, Eigen::Index m) : n_(n), m_(m) {}

  void add_block(std::string name, BlockKind kind, BlockFn fn);

  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  Eigen::Index num_vars() const { return n_ * (n_ + 1) / 2 + m_ * n_; }
  const std::vector<AffineBlock>& blocks() const { return blocks_; }

  /// Decision vector <-> matrices. P is parameterised by its upper triangle.
  VectorXd pack(const MatrixXd& P, const MatrixXd& Y) const;
  MatrixXd unpack_P(const VectorXd& x) const;
  MatrixXd unpack_Y(const VectorXd& x) const;

  double gamma_min = 0.0;
  double gamma_target = 1.0;
  /// Strict-inequality margin: "F < 0" is certified as F <= -eps_cert I.
  double eps_cert = 1e-7;

 private:
  Eigen::Index n_;
  Eigen::Index m_;
  std::vector<AffineBlock> blocks_;
};

enum class SdpStatus { optimal, feasible, infeasible, numerical_failure };

const char* to_string(SdpStatus s);

struct SdpSolution {
  MatrixXd P;
  MatrixXd Y;
  double gamma = 0.0;
  SdpStatus status = SdpStatus::infeasible;
  /// Max eigenvalue of each block at the returned point, in block order.
  std::vector<double> residuals;
  /// Newton steps summed over every feasibility solve.
  int iterations = 0;
  int bisections = 0;
};

struct SolverSettings {
  /// Newton-step cap for one feasibility solve.
  int max_newton = 200;
  /// Radius of the trust ball around the starting point (P = I, Y = 0) that
  /// keeps the barrier problem bounded.
  double radius = 1e4;
  double barrier_growth = 10.0;
};

/// Bisection on gamma over [max(gamma_min, eps_cert), gamma_target]; each
/// level is decided by a phase-one barrier method minimising the common
/// slack t of the strict blocks, started from P = I, Y = 0 and stopped as
/// soon as every strict block is below -eps_cert I. The returned point is
/// re-evaluated block by block before its status is set.
SdpSolution solve(const LmiProblem& prob, double tol, int max_bisections,
                  const SolverSettings& settings = {});

/// Result of the phase-one problem at a fixed gamma.
struct PhaseOneResult {
  bool feasible = false;
  bool failed = false;
  VectorXd x;
  double t = 0.0;
  /// Lower bound on the minimal slack (valid once the path is centred).
  double lower_bound = 0.0;
  int newton_steps = 0;
};

PhaseOneResult phase_one(const LmiProblem& prob, double gamma,
                         const SolverSettings& settings = {});

/// Max eigenvalue of every block evaluated through its original evaluator.
std::vector<double> block_residuals(const LmiProblem& prob, const MatrixXd& P,
                                    const MatrixXd& Y, double gamma);

}  // namespace s2c::sdp
