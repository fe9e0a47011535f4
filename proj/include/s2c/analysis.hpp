#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace s2c {

using Eigen::MatrixXd;

struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;
  double max_real_part = 0.0;
};

/// Eigenvalues of a square real matrix, ordered by decreasing real part.
/// Throws ConvergenceError if the Schur iteration fails.
Spectrum eigvals(const MatrixXd& M);

/// max Re(lambda) < 0.
bool is_hurwitz(const MatrixXd& A);

/// Largest singular value; zero for empty matrices.
double sigma_max(const MatrixXd& M);

/// H-infinity norm of C (sI - A)^{-1} B + D, by gamma bisection on the
/// Hamiltonian imaginary-axis test. Relative accuracy 1e-6. Returns +inf
/// when A is not Hurwitz.
double hinf_norm(const MatrixXd& A, const MatrixXd& Bin, const MatrixXd& Cout,
                 const MatrixXd& Dthru);

/// sigma_max(C (j w I - A)^{-1} B + D).
double gain_at(const MatrixXd& A, const MatrixXd& Bin, const MatrixXd& Cout,
               const MatrixXd& Dthru, double omega);

/// Matrix exponential. Throws Error when the result overflows.
MatrixXd expm(const MatrixXd& M);

enum class ControllerType { state_fb, output_fb };

struct FreqMetrics {
  ControllerType controller_type = ControllerType::state_fb;
  std::optional<double> disturbance_rejection;
  std::optional<double> Ms;
  std::optional<double> Mt;
  std::optional<double> GM_dB;
  std::optional<double> PM_deg;
};

/// Open-loop data G(s) = C (sI - A)^{-1} B for output-feedback analysis.
struct LoopPlant {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
};

/// Loop analysis for static output feedback u = -K y, L = G K.
/// Ms = ||(I+L)^{-1}||, Mt = ||L (I+L)^{-1}||; gain and phase margins are
/// taken channel by channel on the diagonal of L and the worst is reported.
/// Throws DimensionError when K is not n_u x n_y.
FreqMetrics loop_margins(const LoopPlant& g, const MatrixXd& K);

/// Continuous-time LQR gain for u = K x, K = -R^{-1} B^T X with X the
/// stabilizing CARE solution, computed from the stable invariant subspace of
/// the Hamiltonian (matrix sign function). Throws ConvergenceError when no
/// stabilizing solution exists.
MatrixXd care_lqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                  const MatrixXd& R);

/// Stabilizing CARE solution X (same algorithm as care_lqr).
MatrixXd care_solve(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R);

}  // namespace s2c
