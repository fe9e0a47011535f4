#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "s2c/model.hpp"

namespace s2c::testing {

using Eigen::MatrixXd;

#ifndef S2C_FIXTURE_DIR
#error "S2C_FIXTURE_DIR must point at tests/fixtures"
#endif

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(S2C_FIXTURE_DIR) / name;
}

/// Seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  int integer(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }

  MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
    MatrixXd M(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) M(i, j) = normal();
    }
    return M;
  }

  /// Gaussian matrix shifted so that max Re(lambda) = -margin.
  MatrixXd stable(Eigen::Index n, double margin) {
    MatrixXd A = matrix(n, n);
    const double re = Eigen::EigenSolver<MatrixXd>(A, false)
                          .eigenvalues()
                          .real()
                          .maxCoeff();
    A -= (re + margin) * MatrixXd::Identity(n, n);
    return A;
  }

  /// Gaussian matrix scaled to spectral radius `rho`.
  MatrixXd with_radius(Eigen::Index n, double rho) {
    MatrixXd A = matrix(n, n);
    const double r = Eigen::EigenSolver<MatrixXd>(A, false)
                         .eigenvalues()
                         .cwiseAbs()
                         .maxCoeff();
    return A * (rho / r);
  }

  /// Continuous plant with z = [x; u]; A has max Re(lambda) in
  /// [-1, 0.5] so both stable and mildly unstable plants occur.
  PlantModel plant(Eigen::Index n, Eigen::Index m) {
    PlantModel p;
    p.name = "random";
    p.A = matrix(n, n);
    const double re = Eigen::EigenSolver<MatrixXd>(p.A, false)
                          .eigenvalues()
                          .real()
                          .maxCoeff();
    p.A -= (re - uniform(-1.0, 0.5)) * MatrixXd::Identity(n, n);
    p.B = matrix(n, m);
    p.E = matrix(n, integer(1, static_cast<int>(n)));
    p.Cz = MatrixXd::Zero(n + m, n);
    p.Cz.topRows(n).setIdentity();
    p.Dz = MatrixXd::Zero(n + m, m);
    p.Dz.bottomRows(m).setIdentity();
    return p;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Peak of sigma_max(C (j w I - A)^{-1} B + D) over 10^4 log-spaced
/// frequencies in [1e-4, 1e4], plus w = 0.
inline double dense_grid_hinf(const MatrixXd& A, const MatrixXd& B,
                              const MatrixXd& C, const MatrixXd& D) {
  using cd = std::complex<double>;
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXcd Ac = A.cast<cd>();
  auto gain = [&](double w) {
    const Eigen::MatrixXcd M =
        cd(0.0, w) * Eigen::MatrixXcd::Identity(n, n) - Ac;
    const Eigen::MatrixXcd G =
        C.cast<cd>() * M.partialPivLu().solve(B.cast<cd>()) + D.cast<cd>();
    return Eigen::JacobiSVD<Eigen::MatrixXcd>(G).singularValues()(0);
  };
  double best = gain(0.0);
  constexpr int kPoints = 10000;
  for (int k = 0; k < kPoints; ++k) {
    const double w = std::pow(10.0, -4.0 + 8.0 * k / (kPoints - 1));
    best = std::max(best, gain(w));
  }
  return best;
}

/// Continuous-to-discrete bilinear map A_d = (I + A Ts/2)(I - A Ts/2)^{-1}.
inline MatrixXd bilinear_c2d(const MatrixXd& Ac, double ts) {
  const MatrixXd I = MatrixXd::Identity(Ac.rows(), Ac.cols());
  const MatrixXd L = I + 0.5 * ts * Ac;
  const MatrixXd R = I - 0.5 * ts * Ac;
  return R.transpose().partialPivLu().solve(L.transpose()).transpose();
}

inline double max_sym_eig(const MatrixXd& S) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose()),
                                                 Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

inline double min_sym_eig(const MatrixXd& S) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (S + S.transpose()),
                                                 Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

inline PlantModel scalar_plant(double a, double b, double e, double c,
                               double d = 0.0) {
  PlantModel p;
  p.name = "scalar";
  p.A = MatrixXd::Constant(1, 1, a);
  p.B = MatrixXd::Constant(1, 1, b);
  p.E = MatrixXd::Constant(1, 1, e);
  p.Cz = MatrixXd::Constant(1, 1, c);
  p.Dz = MatrixXd::Constant(1, 1, d);
  return p;
}

inline SpecSet make_specs(double gamma_target, double settling,
                          double gamma_min = 0.0) {
  SpecSet s;
  s.hinf = {gamma_target, 1.0, Priority::high};
  s.hinf_min = gamma_min;
  s.settling_time = {settling, 1.0, Priority::medium};
  s.overshoot = {0.2, 0.05, Priority::low};
  return s;
}

}  // namespace s2c::testing
