#include "s2c/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include <unsupported/Eigen/MatrixFunctions>

#include "s2c/errors.hpp"

namespace s2c {

namespace {

using Complex = std::complex<double>;
using MatrixXcd = Eigen::MatrixXcd;

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXcd frequency_response(const MatrixXd& A, const MatrixXd& B,
                             const MatrixXd& C, const MatrixXd& D,
                             double omega) {
  MatrixXcd M = -A.cast<Complex>();
  M.diagonal().array() += Complex(0.0, omega);
  MatrixXcd G = C.cast<Complex>() *
                Eigen::PartialPivLU<MatrixXcd>(M).solve(B.cast<Complex>());
  if (D.size() != 0) G += D.cast<Complex>();
  return G;
}

double sigma_max_c(const MatrixXcd& G) {
  if (G.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXcd> svd(G);
  return svd.singularValues()(0);
}

// Frequencies of the imaginary-axis eigenvalues of the Hamiltonian built for
// level gamma; empty when gamma exceeds the norm.
std::vector<double> imaginary_axis_frequencies(const MatrixXd& A,
                                               const MatrixXd& B,
                                               const MatrixXd& C,
                                               const MatrixXd& D,
                                               double gamma) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  const Eigen::Index p = C.rows();
  MatrixXd Dm = D.size() == 0 ? MatrixXd::Zero(p, m) : D;
  const MatrixXd R =
      gamma * gamma * MatrixXd::Identity(m, m) - Dm.transpose() * Dm;
  const Eigen::LDLT<MatrixXd> R_ldlt(R);
  const MatrixXd Ahat = A + B * R_ldlt.solve(Dm.transpose() * C);
  MatrixXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = Ahat;
  H.topRightCorner(n, n) = B * R_ldlt.solve(B.transpose());
  H.bottomLeftCorner(n, n) =
      -C.transpose() *
      (MatrixXd::Identity(p, p) + Dm * R_ldlt.solve(Dm.transpose())) * C;
  H.bottomRightCorner(n, n) = -Ahat.transpose();

  Eigen::EigenSolver<MatrixXd> es(H, false);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("Hamiltonian eigenvalue iteration failed");
  }
  const double threshold = 1e-7 * std::max(H.norm(), 1e-300);
  std::vector<double> freqs;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const Complex l = es.eigenvalues()(i);
    if (std::abs(l.real()) <= threshold && l.imag() >= 0.0) {
      freqs.push_back(l.imag());
    }
  }
  return freqs;
}

// Golden-section maximum of f on log(w) over [w / 1.5, 1.5 w] (or
// [0, 1e-3] at w = 0).
double local_peak(const std::function<double(double)>& f, double w) {
  if (w <= 0.0) return std::max(f(0.0), f(1e-3));
  constexpr double kRatio = 0.6180339887498949;
  double a = std::log(w / 1.5);
  double b = std::log(1.5 * w);
  double c = b - kRatio * (b - a);
  double d = a + kRatio * (b - a);
  double fc = f(std::exp(c));
  double fd = f(std::exp(d));
  for (int k = 0; k < 60; ++k) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kRatio * (b - a);
      fc = f(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kRatio * (b - a);
      fd = f(std::exp(d));
    }
  }
  return std::max(fc, fd);
}

}  // namespace

Spectrum eigvals(const MatrixXd& M) {
  if (M.rows() != M.cols()) throw DimensionError("eigvals: matrix not square");
  Spectrum s;
  if (M.rows() == 0) {
    s.max_real_part = -kInf;
    return s;
  }
  if (!M.allFinite()) throw DomainError("eigvals: non-finite entries");
  Eigen::EigenSolver<MatrixXd> es(M, false);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("eigvals: Schur iteration did not converge");
  }
  const auto& ev = es.eigenvalues();
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
            [](const Complex& a, const Complex& b) {
              if (a.real() != b.real()) return a.real() > b.real();
              return a.imag() > b.imag();
            });
  s.max_real_part = s.eigenvalues.front().real();
  return s;
}

bool is_hurwitz(const MatrixXd& A) { return eigvals(A).max_real_part < 0.0; }

double sigma_max(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

double gain_at(const MatrixXd& A, const MatrixXd& Bin, const MatrixXd& Cout,
               const MatrixXd& Dthru, double omega) {
  return sigma_max_c(frequency_response(A, Bin, Cout, Dthru, omega));
}

double hinf_norm(const MatrixXd& A, const MatrixXd& Bin, const MatrixXd& Cout,
                 const MatrixXd& Dthru) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Bin.rows() != n || Cout.cols() != n) {
    throw DimensionError("hinf_norm: inconsistent dimensions");
  }
  if (Dthru.size() != 0 &&
      (Dthru.rows() != Cout.rows() || Dthru.cols() != Bin.cols())) {
    throw DimensionError("hinf_norm: feedthrough has the wrong shape");
  }
  const double d_gain = sigma_max(Dthru);
  if (n == 0 || Bin.isZero(0.0) || Cout.isZero(0.0)) return d_gain;

  const Spectrum spec = eigvals(A);
  if (!(spec.max_real_part < 0.0)) return kInf;

  // Lower bound from a coarse grid plus the pole frequencies.
  std::vector<double> probes{0.0};
  constexpr int kGrid = 60;
  for (int i = 0; i < kGrid; ++i) {
    probes.push_back(std::pow(10.0, -4.0 + 8.0 * i / (kGrid - 1)));
  }
  for (const auto& l : spec.eigenvalues) {
    probes.push_back(std::abs(l.imag()));
    probes.push_back(std::abs(l));
  }
  double lo = d_gain;
  for (double w : probes) lo = std::max(lo, gain_at(A, Bin, Cout, Dthru, w));
  if (lo == 0.0) return 0.0;

  // Largest gain found at the crossing frequencies of level gamma, at the
  // midpoints between consecutive crossings and at a local maximum near
  // each crossing; nullopt when the Hamiltonian has no imaginary-axis
  // eigenvalue (gamma is then an upper bound).
  auto probe = [&](double gamma) -> std::optional<double> {
    std::vector<double> freqs =
        imaginary_axis_frequencies(A, Bin, Cout, Dthru, gamma);
    if (freqs.empty()) return std::nullopt;
    std::sort(freqs.begin(), freqs.end());
    auto g = [&](double w) { return gain_at(A, Bin, Cout, Dthru, w); };
    double best = 0.0;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      best = std::max(best, g(freqs[i]));
      if (i + 1 < freqs.size()) {
        best = std::max(best, g(0.5 * (freqs[i] + freqs[i + 1])));
      }
      best = std::max(best, local_peak(g, freqs[i]));
    }
    return best;
  };

  double hi = 2.0 * lo;
  for (int k = 0; k < 200; ++k) {
    const auto found = probe(hi);
    if (!found) break;
    lo = std::max(lo, *found);
    hi = 2.0 * std::max(hi, lo);
  }

  constexpr double kRelTol = 2e-7;
  for (int k = 0; k < 200 && hi - lo > kRelTol * lo; ++k) {
    const double gamma = 0.5 * (lo + hi);
    const auto found = probe(gamma);
    if (found && *found > lo) {
      lo = *found;
      if (lo >= hi) hi = lo * (1.0 + kRelTol);
    } else {
      // No crossing, or a crossing whose neighbourhood never reaches the
      // current lower bound (an eigenvalue numerically off the axis).
      hi = gamma;
    }
  }
  return 0.5 * (lo + hi);
}

MatrixXd expm(const MatrixXd& M) {
  if (M.rows() != M.cols()) throw DimensionError("expm: matrix not square");
  MatrixXd out = M.exp();
  if (!out.allFinite()) throw Error("expm: result overflowed");
  return out;
}

namespace {

struct Crossings {
  std::vector<double> gain;   // |L| = 1
  std::vector<double> phase;  // L real and negative
};

Crossings find_crossings(const std::function<Complex(double)>& L) {
  constexpr int kGrid = 4000;
  auto w_at = [](int i) { return std::pow(10.0, -4.0 + 8.0 * i / (kGrid - 1)); };
  auto refine = [&](double a, double b, auto&& f) {
    double fa = f(a);
    for (int k = 0; k < 80; ++k) {
      const double mid = std::sqrt(a * b);
      const double fm = f(mid);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    return std::sqrt(a * b);
  };
  auto mag = [&](double w) { return std::abs(L(w)) - 1.0; };
  auto imag = [&](double w) { return L(w).imag(); };

  Crossings c;
  double w0 = w_at(0);
  double m0 = mag(w0);
  double i0 = imag(w0);
  for (int i = 1; i < kGrid; ++i) {
    const double w1 = w_at(i);
    const double m1 = mag(w1);
    const double i1 = imag(w1);
    if ((m0 < 0.0) != (m1 < 0.0)) c.gain.push_back(refine(w0, w1, mag));
    if ((i0 < 0.0) != (i1 < 0.0)) {
      const double w = refine(w0, w1, imag);
      if (L(w).real() < 0.0) c.phase.push_back(w);
    }
    w0 = w1;
    m0 = m1;
    i0 = i1;
  }
  return c;
}

}  // namespace

FreqMetrics loop_margins(const LoopPlant& g, const MatrixXd& K) {
  const Eigen::Index n = g.A.rows();
  const Eigen::Index m = g.B.cols();
  const Eigen::Index ny = g.C.rows();
  if (g.B.rows() != n || g.C.cols() != n) {
    throw DimensionError("loop_margins: inconsistent plant dimensions");
  }
  if (K.rows() != m || K.cols() != ny) {
    throw DimensionError(
        "loop_margins: controller is not output-feedback shaped");
  }

  FreqMetrics fm;
  fm.controller_type = ControllerType::output_fb;

  // u = -K y closes the loop on A - B K C.
  const MatrixXd Acl = g.A - g.B * K * g.C;
  const MatrixXd BK = g.B * K;
  fm.Ms = hinf_norm(Acl, BK, -g.C, MatrixXd::Identity(ny, ny));
  fm.Mt = hinf_norm(Acl, BK, g.C, MatrixXd::Zero(ny, ny));

  double gm = kInf;
  double pm = kInf;
  for (Eigen::Index ch = 0; ch < ny; ++ch) {
    auto L = [&](double w) -> Complex {
      MatrixXcd M = -g.A.cast<Complex>();
      M.diagonal().array() += Complex(0.0, w);
      const Eigen::VectorXcd col = Eigen::PartialPivLU<MatrixXcd>(M).solve(
          (g.B * K.col(ch)).cast<Complex>());
      return (g.C.row(ch).cast<Complex>() * col)(0);
    };
    const Crossings c = find_crossings(L);
    for (double w : c.phase) {
      gm = std::min(gm, -20.0 * std::log10(std::abs(L(w))));
    }
    for (double w : c.gain) {
      double deg = std::arg(L(w)) * 180.0 / M_PI;
      if (deg > 0.0) deg -= 360.0;
      pm = std::min(pm, 180.0 + deg);
    }
  }
  fm.GM_dB = gm;
  fm.PM_deg = pm;
  return fm;
}

MatrixXd care_solve(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                    const MatrixXd& R) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m) {
    throw DimensionError("care: inconsistent dimensions");
  }
  if (!Q.isApprox(Q.transpose(), 1e-10) && !(Q - Q.transpose()).isZero(1e-12)) {
    throw DomainError("care: Q must be symmetric");
  }
  const Eigen::LLT<MatrixXd> R_llt(R);
  if (R_llt.info() != Eigen::Success) {
    throw DomainError("care: R must be positive definite");
  }

  MatrixXd H(2 * n, 2 * n);
  H << A, -B * R_llt.solve(B.transpose()), -Q, -A.transpose();

  // Newton iteration for sign(H) with determinant scaling.
  MatrixXd Z = H;
  const double order = static_cast<double>(2 * n);
  bool converged = false;
  for (int k = 0; k < 100; ++k) {
    const Eigen::PartialPivLU<MatrixXd> lu(Z);
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0) || !std::isfinite(det)) {
      throw ConvergenceError(
          "care: Hamiltonian has eigenvalues on the imaginary axis");
    }
    const double c = std::pow(det, -1.0 / order);
    const MatrixXd Znext = 0.5 * (c * Z + lu.inverse() / c);
    const double change = (Znext - Z).norm();
    Z = Znext;
    if (change <= 1e-13 * Z.norm()) {
      converged = true;
      break;
    }
  }
  if (!converged || !Z.allFinite()) {
    throw ConvergenceError("care: sign iteration did not converge");
  }

  const MatrixXd I = MatrixXd::Identity(n, n);
  MatrixXd lhs(2 * n, n);
  MatrixXd rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + I;
  rhs << -(Z.topLeftCorner(n, n) + I), -Z.bottomLeftCorner(n, n);
  MatrixXd X = lhs.colPivHouseholderQr().solve(rhs);
  X = 0.5 * (X + X.transpose()).eval();
  if (!X.allFinite()) throw ConvergenceError("care: no stabilizing solution");

  const MatrixXd K = -R_llt.solve(B.transpose() * X);
  if (!is_hurwitz(A + B * K)) {
    throw ConvergenceError("care: no stabilizing solution (A, B) unstabilizable");
  }
  return X;
}

MatrixXd care_lqr(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                  const MatrixXd& R) {
  const MatrixXd X = care_solve(A, B, Q, R);
  return -Eigen::LLT<MatrixXd>(R).solve(B.transpose() * X);
}

}  // namespace s2c
