#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace koopman_hjb {

/// Raised when λ_i(A) + λ_j(A) ≈ 0 for some pair, so AᵀX + XA + Q = 0 has no
/// unique solution.
class SpectralOverlapError : public std::runtime_error {
 public:
  SpectralOverlapError(const std::string& what, double min_pair_sum)
      : std::runtime_error(what), min_pair_sum_(min_pair_sum) {}
  double min_pair_sum() const { return min_pair_sum_; }

 private:
  double min_pair_sum_;
};

/// Bartels–Stewart solver for AᵀX + XA + Q = 0. The real Schur form of A is
/// computed once; any number of right-hand sides can then be solved.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const Eigen::MatrixXd& A);

  const Eigen::MatrixXd& matrix() const { return A_; }
  Eigen::VectorXcd eigenvalues() const;
  double spectral_abscissa() const;
  bool is_hurwitz() const { return spectral_abscissa() < 0.0; }
  /// min_{i,j} |λ_i + λ_j|
  double min_pair_sum() const;

  /// Symmetric X with AᵀX + XA + Q = 0 (Q is symmetrized first). Applies up to
  /// `refinement_steps` residual corrections.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& Q, int refinement_steps = 2) const;

 private:
  Eigen::MatrixXd solve_once(const Eigen::MatrixXd& Q) const;

  Eigen::MatrixXd A_;
  Eigen::MatrixXd T_;  // quasi-upper-triangular Schur factor
  Eigen::MatrixXd U_;  // orthogonal, A = U T Uᵀ
  std::vector<int> block_start_;
  std::vector<int> block_size_;
};

struct LyapunovProblem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Q;
};

Eigen::MatrixXd solve_lyapunov(const LyapunovProblem& p);
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q);

/// ||AᵀX + XA + Q||_F
double lyapunov_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Q);

double spectral_abscissa(const Eigen::MatrixXd& A);

struct RiccatiProblem {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  Eigen::MatrixXd Q;
};

struct RiccatiSolution {
  Eigen::MatrixXd P;
  int iterations = 0;
  double residual = 0.0;                 // ||AᵀP + PA − PBBᵀP + Q||_F
  std::vector<double> residual_history;  // one entry per Newton step
  double closed_loop_abscissa = 0.0;     // of A − BBᵀP
};

/// ||AᵀP + PA − PBBᵀP + Q||_F
double riccati_residual(const RiccatiProblem& p, const Eigen::MatrixXd& P);

/// Newton–Kleinman iteration for AᵀP + PA − PBBᵀP + Q = 0 with unit input
/// weight. A non-Hurwitz A is first stabilized by a shifted Lyapunov solve
/// (Bass): (A + μI)Z + Z(A + μI)ᵀ = 2BBᵀ, K₀ = BᵀZ⁻¹, where μ exceeds
/// −min Re λ(A) by `shift_margin`.
RiccatiSolution solve_are(const RiccatiProblem& p, double tol = 1e-10, int max_iter = 50,
                          double shift_margin = 1.0);

}  // namespace koopman_hjb
