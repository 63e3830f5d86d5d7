#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/assembly.hpp"
#include "koopman_hjb/lyap.hpp"

namespace koopman_hjb {

enum class Damping { off, backtracking };
enum class InitKind { zero, lqr_lift };

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;  // ||A_clᵀS + S A_cl + κκᵀ + C̃ᵀC̃||_F at the accepted iterate
  double change = 0.0;    // ||S⁺ − S||_F / ||S⁺||_F
  double abscissa = 0.0;  // spectral abscissa of A_cl(S⁺)
  double damping = 1.0;   // accepted θ
};

struct SolveTrace {
  std::vector<IterationRecord> records;
  bool converged = false;
};

struct SolverConfig {
  double tol = 1e-9;
  int max_iter = 50;
  Damping damping = Damping::backtracking;
  double sigma_clip = 1e-12;
  InitKind init = InitKind::lqr_lift;
  /// Called after every accepted iterate.
  std::function<void(const IterationRecord&)> on_iteration;

  void validate() const;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, SolveTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

/// The closed loop stayed unstable down to the smallest damping factor.
class UnstabilizableError : public std::runtime_error {
 public:
  UnstabilizableError(const std::string& what, SolveTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

/// Feedback-dependent data at a given S.
struct ClosedLoop {
  Eigen::VectorXd u_nodes;
  Eigen::VectorXd kappa;  // H_X coordinates of the feedback
  Eigen::MatrixXd A;      // (F + Σκ_kF_k)ᵀ M⁻¹
};

ClosedLoop closed_loop(const AssembledOperators& ops, const Eigen::MatrixXd& S);

/// ||A_cl(S)ᵀS + S A_cl(S) + κ(S)κ(S)ᵀ + C̃ᵀC̃||_F, S symmetrized first.
double equation_residual(const AssembledOperators& ops, const Eigen::MatrixXd& S);

/// Stabilizing solution of the Riccati equation of the linearization at 0.
RiccatiSolution linearized_riccati(const ControlAffineSystem& sys);

/// Coordinates of z ↦ zᵀPz in the orthonormal family: L P Lᵀ.
Eigen::MatrixXd lqr_lift(const AssembledOperators& ops, const Eigen::MatrixXd& P);

struct ValueSolution {
  Eigen::MatrixXd S;
  SolveTrace trace;
};

/// Fixed-point iteration: freeze the feedback of the current S, solve the
/// resulting Lyapunov equation, damp until the next closed loop is Hurwitz.
ValueSolution solve_value_equation(const AssembledOperators& ops, const SolverConfig& cfg);
ValueSolution solve_value_equation(const AssembledOperators& ops, const SolverConfig& cfg,
                                   const Eigen::MatrixXd& S0);

struct ValueAndGradientAt {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// v(z) = Σ σ_i p_i(z)² with p_i = Σ_k a_i[k] v_k.
class SosValueModel {
 public:
  SosValueModel(RieszBasis riesz, PolyField b, Eigen::VectorXd sigmas, Eigen::MatrixXd coeffs);

  const Eigen::VectorXd& sigmas() const { return sigmas_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  const RieszBasis& riesz() const { return riesz_; }
  const PolyField& bfield() const { return b_; }
  int n_modes() const { return static_cast<int>(sigmas_.size()); }

  /// Most negative eigenvalue seen at extraction (0 if none).
  double min_eigenvalue = 0.0;
  /// Set when that eigenvalue is below −1e-6 σ_max.
  bool negative_warning = false;

  /// Throws std::domain_error outside Ω.
  double value(const Eigen::VectorXd& z) const;
  ValueAndGradientAt value_and_gradient(const Eigen::VectorXd& z) const;
  /// u*(z) = −½ b(z)ᵀ∇v(z).
  double feedback(const Eigen::VectorXd& z) const;
  /// The modes p_i(z), unscaled.
  Eigen::VectorXd modes(const Eigen::VectorXd& z) const;

  /// The leading `k` modes only.
  SosValueModel truncated(int k) const;
  /// Every σ multiplied by `factor` (> 0).
  SosValueModel scaled(double factor) const;

 private:
  void check_point(const Eigen::VectorXd& z) const;

  RieszBasis riesz_;
  PolyField b_;
  Eigen::VectorXd sigmas_;
  Eigen::MatrixXd coeffs_;   // N x m
  Eigen::MatrixXd factors_;  // n_raw x m, R a_i √σ_i
};

double evaluate_value(const SosValueModel& model, const Eigen::VectorXd& z);
double evaluate_feedback(const SosValueModel& model, const Eigen::VectorXd& z);

/// Eigen-decomposition S = Σ σ_i a_i a_iᵀ keeping σ_i > sigma_clip, descending.
SosValueModel sos_extract(const Eigen::MatrixXd& S, const SolverConfig& cfg,
                          const RieszBasis& riesz, const PolyField& b);

}  // namespace koopman_hjb
