#include "koopman_hjb/lyap.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace koopman_hjb {

LyapunovSolver::LyapunovSolver(const Eigen::MatrixXd& A) : A_(A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("LyapunovSolver: A must be square");
  if (!A.allFinite()) throw std::invalid_argument("LyapunovSolver: A has non-finite entries");
  const Eigen::Index n = A.rows();
  if (n == 0) return;
  Eigen::RealSchur<Eigen::MatrixXd> schur(A, true);
  if (schur.info() != Eigen::Success) {
    throw std::runtime_error("LyapunovSolver: real Schur decomposition did not converge");
  }
  T_ = schur.matrixT();
  U_ = schur.matrixU();
  for (Eigen::Index i = 0; i < n;) {
    const bool pair = i + 1 < n && T_(i + 1, i) != 0.0;
    block_start_.push_back(static_cast<int>(i));
    block_size_.push_back(pair ? 2 : 1);
    i += pair ? 2 : 1;
  }
}

Eigen::VectorXcd LyapunovSolver::eigenvalues() const {
  Eigen::VectorXcd ev(A_.rows());
  for (std::size_t b = 0; b < block_start_.size(); ++b) {
    const int i = block_start_[b];
    if (block_size_[b] == 1) {
      ev[i] = T_(i, i);
      continue;
    }
    const double a = T_(i, i);
    const double bb = T_(i, i + 1);
    const double c = T_(i + 1, i);
    const double d = T_(i + 1, i + 1);
    const double mean = 0.5 * (a + d);
    const std::complex<double> disc =
        std::sqrt(std::complex<double>(0.25 * (a - d) * (a - d) + bb * c, 0.0));
    ev[i] = mean + disc;
    ev[i + 1] = mean - disc;
  }
  return ev;
}

double LyapunovSolver::spectral_abscissa() const {
  if (A_.size() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues().real().maxCoeff();
}

double LyapunovSolver::min_pair_sum() const {
  const Eigen::VectorXcd ev = eigenvalues();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    for (Eigen::Index j = i; j < ev.size(); ++j) {
      best = std::min(best, std::abs(ev[i] + ev[j]));
    }
  }
  return best;
}

Eigen::MatrixXd LyapunovSolver::solve_once(const Eigen::MatrixXd& Q) const {
  const Eigen::Index n = A_.rows();
  const Eigen::MatrixXd C = -(U_.transpose() * Q * U_);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, n);
  const double scale = std::max(1.0, T_.norm());

  // Column blocks of Y left to right; inside a column, row blocks top down:
  // T_IIᵀ Y_IJ + Y_IJ T_JJ = C_IJ − Σ_{K<I} T_KIᵀ Y_KJ − Σ_{K<J} Y_IK T_KJ.
  for (std::size_t jb = 0; jb < block_start_.size(); ++jb) {
    const int c = block_start_[jb];
    const int s = block_size_[jb];
    Eigen::MatrixXd rhs = C.middleCols(c, s);
    if (c > 0) rhs.noalias() -= Y.leftCols(c) * T_.block(0, c, c, s);
    const Eigen::MatrixXd Tjj = T_.block(c, c, s, s);
    for (std::size_t ib = 0; ib < block_start_.size(); ++ib) {
      const int r = block_start_[ib];
      const int t = block_size_[ib];
      Eigen::MatrixXd rhs_i = rhs.middleRows(r, t);
      if (r > 0) rhs_i.noalias() -= T_.block(0, r, r, t).transpose() * Y.block(0, c, r, s);
      const Eigen::MatrixXd Tii = T_.block(r, r, t, t);
      if (t == 1 && s == 1) {
        const double denom = Tii(0, 0) + Tjj(0, 0);
        if (std::abs(denom) <= 64.0 * std::numeric_limits<double>::epsilon() * scale) {
          throw SpectralOverlapError("solve_lyapunov: eigenvalues of A and -A overlap",
                                     min_pair_sum());
        }
        Y(r, c) = rhs_i(0, 0) / denom;
        continue;
      }
      // (I_s ⊗ T_iiᵀ + T_jjᵀ ⊗ I_t) vec(Z) = vec(rhs_i)
      const int m = t * s;
      Eigen::Matrix4d K = Eigen::Matrix4d::Zero();
      for (int q = 0; q < s; ++q) {
        for (int p = 0; p < t; ++p) {
          const int row = q * t + p;
          for (int pp = 0; pp < t; ++pp) K(row, q * t + pp) += Tii(pp, p);
          for (int qq = 0; qq < s; ++qq) K(row, qq * t + p) += Tjj(qq, q);
        }
      }
      Eigen::Vector4d v = Eigen::Vector4d::Zero();
      for (int q = 0; q < s; ++q) {
        for (int p = 0; p < t; ++p) v[q * t + p] = rhs_i(p, q);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(K.topLeftCorner(m, m));
      if (!lu.isInvertible() ||
          std::abs(lu.determinant()) <=
              std::pow(64.0 * std::numeric_limits<double>::epsilon() * scale, m)) {
        throw SpectralOverlapError("solve_lyapunov: eigenvalues of A and -A overlap",
                                   min_pair_sum());
      }
      const Eigen::VectorXd z = lu.solve(v.head(m));
      for (int q = 0; q < s; ++q) {
        for (int p = 0; p < t; ++p) Y(r + p, c + q) = z[q * t + p];
      }
    }
  }
  Eigen::MatrixXd X = U_ * Y * U_.transpose();
  return 0.5 * (X + X.transpose());
}

Eigen::MatrixXd LyapunovSolver::solve(const Eigen::MatrixXd& Q, int refinement_steps) const {
  if (Q.rows() != A_.rows() || Q.cols() != A_.cols()) {
    throw std::invalid_argument("solve_lyapunov: Q must match A");
  }
  if (A_.size() == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::MatrixXd Qs = 0.5 * (Q + Q.transpose());
  Eigen::MatrixXd X = solve_once(Qs);
  double res = lyapunov_residual(A_, X, Qs);
  for (int step = 0; step < refinement_steps; ++step) {
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() *
                         (Qs.norm() + 2.0 * A_.norm() * X.norm());
    if (res <= floor) break;
    const Eigen::MatrixXd R = A_.transpose() * X + X * A_ + Qs;
    const Eigen::MatrixXd candidate = X + solve_once(R);
    const double res_candidate = lyapunov_residual(A_, candidate, Qs);
    if (!(res_candidate < res)) break;
    X = candidate;
    res = res_candidate;
  }
  return X;
}

Eigen::MatrixXd solve_lyapunov(const LyapunovProblem& p) {
  return LyapunovSolver(p.A).solve(p.Q);
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
  return LyapunovSolver(A).solve(Q);
}

double lyapunov_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Q) {
  return (A.transpose() * X + X * A + Q).norm();
}

double spectral_abscissa(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_abscissa: eigenvalue iteration failed");
  }
  return es.eigenvalues().real().maxCoeff();
}

// ---------------------------------------------------------------------------

double riccati_residual(const RiccatiProblem& p, const Eigen::MatrixXd& P) {
  const Eigen::VectorXd PB = P * p.B;
  return (p.A.transpose() * P + P * p.A - PB * PB.transpose() + p.Q).norm();
}

namespace {

Eigen::RowVectorXd initial_gain(const RiccatiProblem& p, double shift_margin) {
  const Eigen::Index d = p.A.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(p.A, false);
  const Eigen::VectorXd re = es.eigenvalues().real();
  if (re.maxCoeff() < 0.0) return Eigen::RowVectorXd::Zero(d);

  const double mu = std::max(0.0, -re.minCoeff()) + shift_margin;
  const Eigen::MatrixXd M = p.A + mu * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd Z =
      LyapunovSolver(-M.transpose()).solve(2.0 * p.B * p.B.transpose());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Z);
  if (!lu.isInvertible()) {
    throw std::runtime_error("solve_are: no stabilizing initialization found ((A, B) not controllable)");
  }
  Eigen::RowVectorXd K = lu.solve(p.B).transpose();  // Bᵀ Z⁻¹ (Z symmetric)
  if (spectral_abscissa(p.A - p.B * K) >= 0.0) {
    throw std::runtime_error("solve_are: no stabilizing initialization found");
  }
  return K;
}

}  // namespace

RiccatiSolution solve_are(const RiccatiProblem& p, double tol, int max_iter,
                          double shift_margin) {
  const Eigen::Index d = p.A.rows();
  if (p.A.cols() != d || p.B.size() != d || p.Q.rows() != d || p.Q.cols() != d) {
    throw std::invalid_argument("solve_are: dimension mismatch");
  }
  const RiccatiProblem prob{p.A, p.B, 0.5 * (p.Q + p.Q.transpose())};
  Eigen::RowVectorXd K = initial_gain(prob, shift_margin);
  const double target = tol * (1.0 + prob.Q.norm());

  RiccatiSolution out;
  int stalled = 0;
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::MatrixXd Acl = prob.A - prob.B * K;
    const Eigen::MatrixXd P = LyapunovSolver(Acl).solve(prob.Q + K.transpose() * K);
    out.P = P;
    out.iterations = it;
    out.residual = riccati_residual(prob, P);
    out.residual_history.push_back(out.residual);
    K = prob.B.transpose() * P;
    if (out.residual <= target) {
      // One polishing step; kept only if it lowers the residual.
      const LyapunovSolver polish(prob.A - prob.B * K);
      if (polish.is_hurwitz()) {
        const Eigen::MatrixXd P1 = polish.solve(prob.Q + K.transpose() * K);
        const double r1 = riccati_residual(prob, P1);
        if (r1 < out.residual) {
          out.P = P1;
          out.residual = r1;
          K = prob.B.transpose() * P1;
        }
      }
      out.closed_loop_abscissa = spectral_abscissa(prob.A - prob.B * K);
      if (out.closed_loop_abscissa >= 0.0) {
        throw std::runtime_error("solve_are: converged solution is not stabilizing");
      }
      return out;
    }
    if (it > 1 && out.residual >= out.residual_history[it - 2]) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }
  }
  std::ostringstream msg;
  msg << "solve_are: Newton-Kleinman iteration stagnated (residual " << out.residual
      << " after " << out.iterations << " steps)";
  throw std::runtime_error(msg.str());
}

}  // namespace koopman_hjb
