#include "s2c/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "s2c/errors.hpp"

namespace s2c::sdp {

namespace {

MatrixXd symmetrize(const MatrixXd& M) { return 0.5 * (M + M.transpose()); }

double max_eig(const MatrixXd& S) {
  if (S.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(S),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

// Barrier state for one phase-one solve at fixed gamma. Decision vector
// z = (x, t); strict blocks contribute -log det(t I - F), bound blocks
// -log det(-F), and the trust ball -log(r^2 - |x - x0|^2).
class PhaseOne {
 public:
  PhaseOne(const LmiProblem& prob, double gamma, const SolverSettings& s)
      : prob_(prob), settings_(s) {
    const Eigen::Index n = prob.n();
    x0_ = prob.pack(MatrixXd::Identity(n, n), MatrixXd::Zero(prob.m(), n));
    nx_ = x0_.size();
    for (const auto& b : prob.blocks()) {
      Fixed f;
      f.block = &b;
      f.base = b.constant + gamma * b.gamma_coeff;
      f.active.resize(static_cast<std::size_t>(nx_));
      for (Eigen::Index i = 0; i < nx_; ++i) {
        f.active[static_cast<std::size_t>(i)] =
            !b.coeffs[static_cast<std::size_t>(i)].isZero(0.0);
      }
      theta_ += static_cast<double>(b.constant.rows());
      if (b.kind == BlockKind::strict) {
        theta_strict_ += static_cast<double>(b.constant.rows());
      }
      fixed_.push_back(std::move(f));
    }
    theta_ += 1.0;  // trust ball
  }

  PhaseOneResult run() {
    PhaseOneResult res;
    VectorXd x = x0_;
    res.x = x;

    double lam = -std::numeric_limits<double>::infinity();
    for (const auto& f : fixed_) {
      const MatrixXd F = value(f, x);
      if (f.block->kind == BlockKind::strict) {
        lam = std::max(lam, max_eig(F));
      } else if (max_eig(F) >= 0.0) {
        res.failed = true;  // start point must satisfy the bound blocks
        return res;
      }
    }
    if (certified(x)) {
      res.feasible = true;
      res.t = lam;
      res.lower_bound = -std::numeric_limits<double>::infinity();
      return res;
    }
    const double delta0 = std::max(1.0, 0.1 * std::abs(lam));
    double t = lam + delta0;
    double s = theta_strict_ > 0.0 ? theta_strict_ / delta0 : 1.0;
    const double eps = prob_.eps_cert;

    VectorXd z(nx_ + 1);
    z << x, t;
    int steps = 0;
    for (int outer = 0; outer < 200; ++outer) {
      // Centre for the current barrier weight.
      for (;;) {
        if (steps >= settings_.max_newton) {
          res.x = z.head(nx_);
          res.t = z(nx_);
          res.newton_steps = steps;
          res.lower_bound = -std::numeric_limits<double>::infinity();
          return res;
        }
        VectorXd g;
        MatrixXd H;
        if (!derivatives(z, s, g, H)) {
          res.failed = true;
          res.newton_steps = steps;
          return res;
        }
        Eigen::LDLT<MatrixXd> ldlt(H);
        VectorXd dz = ldlt.solve(-g);
        if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
          H.diagonal().array() += 1e-10 * std::max(1.0, H.diagonal().maxCoeff());
          dz = Eigen::LDLT<MatrixXd>(H).solve(-g);
        }
        if (!dz.allFinite()) {
          res.failed = true;
          res.newton_steps = steps;
          return res;
        }
        const double decrement = -g.dot(dz);
        if (decrement * 0.5 <= 1e-9) break;

        const auto phi0 = value_at(z, s);
        double step = 1.0;
        bool accepted = false;
        for (int k = 0; k < 80; ++k) {
          const VectorXd trial = z + step * dz;
          const auto phi = value_at(trial, s);
          if (phi && *phi <= *phi0 - 0.01 * step * decrement) {
            z = trial;
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        ++steps;
        if (!accepted) {
          // No descent available at machine precision: treat as centred.
          break;
        }
        if (certified(z.head(nx_))) {
          res.feasible = true;
          res.x = z.head(nx_);
          res.t = z(nx_);
          res.newton_steps = steps;
          return res;
        }
      }
      const double gap = theta_ / s;
      res.x = z.head(nx_);
      res.t = z(nx_);
      res.lower_bound = z(nx_) - gap;
      res.newton_steps = steps;
      if (res.lower_bound > -eps) return res;  // provably no t below -eps
      if (gap < 1e-3 * eps) return res;
      s *= settings_.barrier_growth;
    }
    return res;
  }

 private:
  struct Fixed {
    const AffineBlock* block = nullptr;
    MatrixXd base;
    std::vector<bool> active;
  };

  MatrixXd value(const Fixed& f, const VectorXd& x) const {
    MatrixXd F = f.base;
    for (Eigen::Index i = 0; i < nx_; ++i) {
      if (f.active[static_cast<std::size_t>(i)] && x(i) != 0.0) {
        F.noalias() += x(i) * f.block->coeffs[static_cast<std::size_t>(i)];
      }
    }
    return F;
  }

  bool certified(const VectorXd& x) const {
    for (const auto& f : fixed_) {
      if (f.block->kind != BlockKind::strict) continue;
      MatrixXd S = -value(f, x);
      S.diagonal().array() -= prob_.eps_cert;
      Eigen::LLT<MatrixXd> llt(S);
      if (llt.info() != Eigen::Success) return false;
    }
    return true;
  }

  // Slack matrix of a block at z, or nullopt when not positive definite.
  std::optional<Eigen::LLT<MatrixXd>> slack(const Fixed& f, const VectorXd& z,
                                            MatrixXd* S_out = nullptr) const {
    MatrixXd S = -value(f, z.head(nx_));
    if (f.block->kind == BlockKind::strict) S.diagonal().array() += z(nx_);
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return std::nullopt;
    if (S_out) *S_out = std::move(S);
    return llt;
  }

  std::optional<double> value_at(const VectorXd& z, double s) const {
    if (!z.allFinite()) return std::nullopt;
    double phi = s * z(nx_);
    for (const auto& f : fixed_) {
      const auto llt = slack(f, z);
      if (!llt) return std::nullopt;
      const auto& L = llt->matrixLLT();
      phi -= 2.0 * L.diagonal().array().log().sum();
    }
    const double r = settings_.radius * settings_.radius -
                     (z.head(nx_) - x0_).squaredNorm();
    if (!(r > 0.0)) return std::nullopt;
    phi -= std::log(r);
    return phi;
  }

  bool derivatives(const VectorXd& z, double s, VectorXd& g,
                   MatrixXd& H) const {
    const Eigen::Index nz = nx_ + 1;
    g = VectorXd::Zero(nz);
    H = MatrixXd::Zero(nz, nz);
    g(nx_) = s;
    std::vector<MatrixXd> M(static_cast<std::size_t>(nz));
    std::vector<Eigen::Index> used;
    for (const auto& f : fixed_) {
      const auto llt = slack(f, z);
      if (!llt) return false;
      const Eigen::Index d = f.base.rows();
      const MatrixXd W = llt->solve(MatrixXd::Identity(d, d));
      used.clear();
      // dS/dx_i = -F_i, dS/dt = I for strict blocks.
      for (Eigen::Index i = 0; i < nx_; ++i) {
        if (!f.active[static_cast<std::size_t>(i)]) continue;
        M[static_cast<std::size_t>(i)] =
            -(W * f.block->coeffs[static_cast<std::size_t>(i)]);
        used.push_back(i);
      }
      if (f.block->kind == BlockKind::strict) {
        M[static_cast<std::size_t>(nx_)] = W;
        used.push_back(nx_);
      }
      for (std::size_t a = 0; a < used.size(); ++a) {
        const MatrixXd& Ma = M[static_cast<std::size_t>(used[a])];
        g(used[a]) -= Ma.trace();
        for (std::size_t b = a; b < used.size(); ++b) {
          const MatrixXd& Mb = M[static_cast<std::size_t>(used[b])];
          const double h = (Ma.array() * Mb.transpose().array()).sum();
          H(used[a], used[b]) += h;
          if (a != b) H(used[b], used[a]) += h;
        }
      }
    }
    const VectorXd dx = z.head(nx_) - x0_;
    const double r = settings_.radius * settings_.radius - dx.squaredNorm();
    if (!(r > 0.0)) return false;
    g.head(nx_) += 2.0 * dx / r;
    H.topLeftCorner(nx_, nx_).diagonal().array() += 2.0 / r;
    H.topLeftCorner(nx_, nx_) += (4.0 / (r * r)) * dx * dx.transpose();
    return g.allFinite() && H.allFinite();
  }

  const LmiProblem& prob_;
  SolverSettings settings_;
  VectorXd x0_;
  Eigen::Index nx_ = 0;
  std::vector<Fixed> fixed_;
  double theta_ = 0.0;
  double theta_strict_ = 0.0;
};

}  // namespace

void LmiProblem::add_block(std::string name, BlockKind kind, BlockFn fn) {
  const MatrixXd P0 = MatrixXd::Zero(n_, n_);
  const MatrixXd Y0 = MatrixXd::Zero(m_, n_);
  AffineBlock b;
  b.name = std::move(name);
  b.kind = kind;
  b.constant = symmetrize(fn(P0, Y0, 0.0));
  if (b.constant.rows() != b.constant.cols()) {
    throw DimensionError("LMI block '" + b.name + "' is not square");
  }
  b.gamma_coeff = symmetrize(fn(P0, Y0, 1.0)) - b.constant;
  const Eigen::Index nv = num_vars();
  b.coeffs.reserve(static_cast<std::size_t>(nv));
  for (Eigen::Index i = 0; i < nv; ++i) {
    VectorXd e = VectorXd::Zero(nv);
    e(i) = 1.0;
    b.coeffs.push_back(symmetrize(fn(unpack_P(e), unpack_Y(e), 0.0)) -
                       b.constant);
  }
  b.evaluate = std::move(fn);
  blocks_.push_back(std::move(b));
}

VectorXd LmiProblem::pack(const MatrixXd& P, const MatrixXd& Y) const {
  VectorXd x(num_vars());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = i; j < n_; ++j) x(k++) = P(i, j);
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    for (Eigen::Index j = 0; j < n_; ++j) x(k++) = Y(i, j);
  }
  return x;
}

MatrixXd LmiProblem::unpack_P(const VectorXd& x) const {
  MatrixXd P(n_, n_);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (Eigen::Index j = i; j < n_; ++j) {
      P(i, j) = x(k);
      P(j, i) = x(k);
      ++k;
    }
  }
  return P;
}

MatrixXd LmiProblem::unpack_Y(const VectorXd& x) const {
  MatrixXd Y(m_, n_);
  Eigen::Index k = n_ * (n_ + 1) / 2;
  for (Eigen::Index i = 0; i < m_; ++i) {
    for (Eigen::Index j = 0; j < n_; ++j) Y(i, j) = x(k++);
  }
  return Y;
}

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::optimal:
      return "optimal";
    case SdpStatus::feasible:
      return "feasible";
    case SdpStatus::infeasible:
      return "infeasible";
    case SdpStatus::numerical_failure:
      return "numerical_failure";
  }
  return "numerical_failure";
}

std::vector<double> block_residuals(const LmiProblem& prob, const MatrixXd& P,
                                    const MatrixXd& Y, double gamma) {
  std::vector<double> out;
  out.reserve(prob.blocks().size());
  for (const auto& b : prob.blocks()) {
    out.push_back(max_eig(b.evaluate(P, Y, gamma)));
  }
  return out;
}

PhaseOneResult phase_one(const LmiProblem& prob, double gamma,
                         const SolverSettings& settings) {
  return PhaseOne(prob, gamma, settings).run();
}

SdpSolution solve(const LmiProblem& prob, double tol, int max_bisections,
                  const SolverSettings& settings) {
  if (!(tol > 0.0)) throw DomainError("sdp::solve: tolerance must be positive");
  SdpSolution sol;
  const double eps = prob.eps_cert;
  const double floor = std::max(prob.gamma_min, eps);
  if (!std::isfinite(prob.gamma_target) || prob.gamma_target < floor) {
    sol.status = SdpStatus::infeasible;
    return sol;
  }

  auto run = [&](double gamma) {
    PhaseOneResult r = phase_one(prob, gamma, settings);
    sol.iterations += r.newton_steps;
    return r;
  };

  const PhaseOneResult top = run(prob.gamma_target);
  if (!top.feasible) {
    sol.status = top.failed ? SdpStatus::numerical_failure
                            : SdpStatus::infeasible;
    return sol;
  }
  double best_gamma = prob.gamma_target;
  VectorXd best_x = top.x;
  bool converged = false;

  // Feasibility is monotone in gamma, so when the floor itself is feasible it
  // is the optimum.
  const bool floor_active = prob.gamma_min > eps;
  if (floor_active && prob.gamma_min < prob.gamma_target) {
    const PhaseOneResult at_floor = run(prob.gamma_min);
    if (at_floor.feasible) {
      best_gamma = prob.gamma_min;
      best_x = at_floor.x;
      converged = true;
    }
  } else if (floor_active) {
    converged = true;  // gamma_min == gamma_target
  }

  if (!converged) {
    // The grid [eps, gamma_target] does not depend on gamma_min; levels at
    // or below an infeasible floor are skipped without solving.
    double lo = eps;
    double hi = prob.gamma_target;
    while (sol.bisections < max_bisections) {
      if (hi - lo <= tol * std::max(1.0, hi)) {
        converged = true;
        break;
      }
      const double mid = 0.5 * (lo + hi);
      ++sol.bisections;
      if (floor_active && mid <= prob.gamma_min) {
        lo = mid;
        continue;
      }
      const PhaseOneResult r = run(mid);
      if (r.feasible) {
        hi = mid;
        best_gamma = mid;
        best_x = r.x;
      } else {
        lo = mid;
      }
    }
    if (!converged && hi - lo <= tol * std::max(1.0, hi)) converged = true;
  }

  sol.P = prob.unpack_P(best_x);
  sol.Y = prob.unpack_Y(best_x);
  sol.gamma = best_gamma;
  sol.residuals = block_residuals(prob, sol.P, sol.Y, sol.gamma);

  bool certified = true;
  for (std::size_t i = 0; i < prob.blocks().size(); ++i) {
    const double limit =
        prob.blocks()[i].kind == BlockKind::strict ? -0.5 * eps : 1e-6;
    if (!(sol.residuals[i] <= limit)) certified = false;
  }
  if (!certified) {
    sol.status = SdpStatus::numerical_failure;
  } else {
    sol.status = converged ? SdpStatus::optimal : SdpStatus::feasible;
  }
  return sol;
}

}  // namespace s2c::sdp
