#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>

#include "s2c/analysis.hpp"
#include "s2c/errors.hpp"
#include "support.hpp"

namespace s2c {
namespace {

using testing::Gen;
using Complex = std::complex<double>;

TEST(Eigvals, Diagonal) {
  MatrixXd M(2, 2);
  M << -1, 0, 0, -2;
  const Spectrum s = eigvals(M);
  ASSERT_EQ(s.eigenvalues.size(), 2u);
  EXPECT_DOUBLE_EQ(s.max_real_part, -1.0);
  EXPECT_NEAR(s.eigenvalues[0].real(), -1.0, 1e-14);
  EXPECT_NEAR(s.eigenvalues[1].real(), -2.0, 1e-14);
}

TEST(Eigvals, Rotation) {
  MatrixXd M(2, 2);
  M << 0, 1, -1, 0;
  const Spectrum s = eigvals(M);
  EXPECT_NEAR(s.max_real_part, 0.0, 1e-14);
  for (const auto& l : s.eigenvalues) EXPECT_NEAR(std::abs(l.imag()), 1.0, 1e-14);
  EXPECT_FALSE(is_hurwitz(M));
}

// Characteristic polynomial by the Faddeev-LeVerrier recursion; its
// companion matrix has the same spectrum as M.
std::vector<double> char_poly(const MatrixXd& M) {
  const Eigen::Index n = M.rows();
  std::vector<double> c(n + 1, 0.0);
  c[n] = 1.0;
  MatrixXd Mk = MatrixXd::Zero(n, n);
  const MatrixXd I = MatrixXd::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    Mk = M * Mk + c[n - k + 1] * I;
    c[n - k] = -(M * Mk).trace() / static_cast<double>(k);
  }
  return c;
}

TEST(Eigvals, MatchesCompanionMatrixRoots) {
  Gen g(11);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd M = g.matrix(5, 5);
    const std::vector<double> c = char_poly(M);
    MatrixXd C = MatrixXd::Zero(5, 5);
    C.bottomLeftCorner(4, 4).setIdentity();
    for (int i = 0; i < 5; ++i) C(i, 4) = -c[i];
    const Spectrum a = eigvals(M);
    const Spectrum b = eigvals(C);
    ASSERT_EQ(a.eigenvalues.size(), 5u);
    for (const Complex& l : a.eigenvalues) {
      double best = 1e300;
      for (const Complex& r : b.eigenvalues) best = std::min(best, std::abs(l - r));
      EXPECT_LT(best, 1e-6) << "trial " << trial;
    }
    EXPECT_NEAR(a.max_real_part, b.max_real_part, 1e-6);
  }
}

TEST(Eigvals, EigenpairResidual) {
  Gen g(12);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd M = g.matrix(6, 6);
    const Spectrum s = eigvals(M);
    const Eigen::MatrixXcd Mc = M.cast<Complex>();
    for (const Complex& l : s.eigenvalues) {
      // Smallest singular value of M - l I bounds the eigenpair residual.
      const Eigen::MatrixXcd S = Mc - l * Eigen::MatrixXcd::Identity(6, 6);
      const double smin =
          Eigen::JacobiSVD<Eigen::MatrixXcd>(S).singularValues()(5);
      EXPECT_LE(smin, 1e-8 * M.norm());
    }
  }
}

TEST(Eigvals, MaxRealPartInvariantUnderSimilarity) {
  Gen g(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = g.integer(2, 6);
    const MatrixXd M = g.matrix(n, n);
    MatrixXd T = g.matrix(n, n) + 3.0 * MatrixXd::Identity(n, n);
    const Eigen::JacobiSVD<MatrixXd> svd(T);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (cond > 100.0) continue;
    const MatrixXd S = T * M * T.inverse();
    EXPECT_NEAR(eigvals(M).max_real_part, eigvals(S).max_real_part, 1e-8);
  }
}

TEST(HinfNorm, FirstOrderLagIsOne) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  EXPECT_NEAR(hinf_norm(-one, one, one, MatrixXd::Zero(1, 1)), 1.0, 1e-6);
}

TEST(HinfNorm, StaticGain) {
  const MatrixXd A = -MatrixXd::Identity(2, 2);
  EXPECT_DOUBLE_EQ(hinf_norm(A, MatrixXd::Zero(2, 1), MatrixXd::Zero(1, 2),
                             MatrixXd::Constant(1, 1, -3.5)),
                   3.5);
}

TEST(HinfNorm, UnstableIsInfinite) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  EXPECT_TRUE(std::isinf(hinf_norm(one, one, one, MatrixXd::Zero(1, 1))));
}

TEST(HinfNorm, LightlyDampedResonance) {
  // 1 / (s^2 + 2 z s + 1) peaks at 1 / (2 z sqrt(1 - z^2)).
  const double z = 0.05;
  MatrixXd A(2, 2);
  A << 0, 1, -1, -2 * z;
  MatrixXd B(2, 1);
  B << 0, 1;
  MatrixXd C(1, 2);
  C << 1, 0;
  const double exact = 1.0 / (2 * z * std::sqrt(1 - z * z));
  EXPECT_NEAR(hinf_norm(A, B, C, MatrixXd::Zero(1, 1)) / exact, 1.0, 1e-6);
}

TEST(HinfNorm, AgreesWithDenseGridOn100RandomSystems) {
  Gen g(31);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = g.integer(1, 5);
    const int m = g.integer(1, 3);
    const int p = g.integer(1, 3);
    const MatrixXd A = g.stable(n, g.uniform(0.05, 1.0));
    const MatrixXd B = g.matrix(n, m);
    const MatrixXd C = g.matrix(p, n);
    const MatrixXd D = trial % 2 ? g.matrix(p, m) : MatrixXd::Zero(p, m);
    const double bisect = hinf_norm(A, B, C, D);
    const double grid = testing::dense_grid_hinf(A, B, C, D);
    // The grid can only under-estimate the peak.
    EXPECT_LE(grid, bisect * (1 + 1e-6)) << "trial " << trial;
    EXPECT_NEAR(bisect / grid, 1.0, 1e-3) << "trial " << trial;
  }
}

TEST(GainAt, MatchesScalarClosedForm) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  for (double w : {0.0, 0.5, 1.0, 10.0}) {
    EXPECT_NEAR(gain_at(-one, one, one, MatrixXd::Zero(1, 1), w),
                1.0 / std::sqrt(1 + w * w), 1e-14);
  }
}

TEST(Expm, ZeroIsIdentity) {
  EXPECT_TRUE(expm(MatrixXd::Zero(3, 3)).isApprox(MatrixXd::Identity(3, 3)));
}

TEST(Expm, Diagonal) {
  const Eigen::Vector3d a(-1.5, 0.25, 2.0);
  const MatrixXd E = expm(a.asDiagonal().toDenseMatrix());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(E(i, i) / std::exp(a(i)), 1.0, 1e-12);
  EXPECT_NEAR(E(0, 1), 0.0, 1e-15);
}

TEST(Expm, GroupInverse) {
  Gen g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd M = g.matrix(3, 3);
    EXPECT_LT((expm(M) * expm(-M) - MatrixXd::Identity(3, 3)).norm(), 1e-8);
  }
}

TEST(Expm, RotationGenerator) {
  MatrixXd M(2, 2);
  M << 0, -0.7, 0.7, 0;
  const MatrixXd E = expm(M);
  EXPECT_NEAR(E(0, 0), std::cos(0.7), 1e-14);
  EXPECT_NEAR(E(1, 0), std::sin(0.7), 1e-14);
}

TEST(LoopMargins, IntegratorHasNinetyDegreesPhaseMargin) {
  const LoopPlant g{MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1),
                    MatrixXd::Ones(1, 1)};
  const FreqMetrics f = loop_margins(g, MatrixXd::Ones(1, 1));
  EXPECT_EQ(f.controller_type, ControllerType::output_fb);
  ASSERT_TRUE(f.PM_deg.has_value());
  EXPECT_NEAR(*f.PM_deg, 90.0, 1e-6);
  EXPECT_FALSE(f.disturbance_rejection.has_value());
}

TEST(LoopMargins, ZeroLoop) {
  const LoopPlant g{-MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                    MatrixXd::Ones(1, 1)};
  const FreqMetrics f = loop_margins(g, MatrixXd::Zero(1, 1));
  EXPECT_NEAR(*f.Ms, 1.0, 1e-9);
  EXPECT_NEAR(*f.Mt, 0.0, 1e-12);
}

TEST(LoopMargins, FirstOrderLoopHasInfiniteGainMargin) {
  const LoopPlant g{-MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1),
                    MatrixXd::Ones(1, 1)};
  const FreqMetrics f = loop_margins(g, MatrixXd::Constant(1, 1, 2.0));
  ASSERT_TRUE(f.GM_dB.has_value());
  EXPECT_TRUE(std::isinf(*f.GM_dB) && *f.GM_dB > 0);
  // L = 2/(s+1): S = (s+1)/(s+3) peaks at 1, T = 2/(s+3) peaks at 2/3.
  EXPECT_NEAR(*f.Ms, 1.0, 1e-6);
  EXPECT_NEAR(*f.Mt, 2.0 / 3.0, 1e-6);
  // |L| = 1 at w = sqrt(3); phase -60 deg.
  EXPECT_NEAR(*f.PM_deg, 120.0, 1e-6);
}

TEST(LoopMargins, StateFeedbackShapeRejected) {
  const LoopPlant g{-MatrixXd::Identity(2, 2), MatrixXd::Ones(2, 1),
                    MatrixXd::Ones(1, 2)};
  EXPECT_THROW(loop_margins(g, MatrixXd::Ones(1, 2)), DimensionError);
}

TEST(Care, ScalarIntegrator) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  EXPECT_NEAR(care_solve(MatrixXd::Zero(1, 1), one, one, one)(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(care_lqr(MatrixXd::Zero(1, 1), one, one, one)(0, 0), -1.0, 1e-10);
}

TEST(Care, StableWithZeroWeightGivesZeroGain) {
  Gen g(3);
  const MatrixXd A = g.stable(3, 0.5);
  const MatrixXd K =
      care_lqr(A, g.matrix(3, 1), MatrixXd::Zero(3, 3), MatrixXd::Identity(1, 1));
  EXPECT_LT(K.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Care, ResidualAndStabilityOnRandomPairs) {
  Gen g(17);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = g.integer(2, 5);
    const int m = g.integer(1, 2);
    const MatrixXd A = g.matrix(n, n);
    const MatrixXd B = g.matrix(n, m);
    const MatrixXd Cq = g.matrix(n, n);
    const MatrixXd Q = Cq.transpose() * Cq;
    const MatrixXd R = MatrixXd::Identity(m, m);
    const MatrixXd X = care_solve(A, B, Q, R);
    const MatrixXd res = A.transpose() * X + X * A -
                         X * B * R.inverse() * B.transpose() * X + Q;
    EXPECT_LE(res.norm(), 1e-8 * std::max(1.0, X.norm())) << "trial " << trial;
    const MatrixXd K = care_lqr(A, B, Q, R);
    EXPECT_TRUE(is_hurwitz(A + B * K)) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Care, UnstabilizablePairThrows) {
  EXPECT_THROW(care_lqr(MatrixXd::Ones(1, 1), MatrixXd::Zero(1, 1),
                        MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)),
               ConvergenceError);
}

}  // namespace
}  // namespace s2c
