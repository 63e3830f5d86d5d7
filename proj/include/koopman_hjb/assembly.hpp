#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "koopman_hjb/basis.hpp"
#include "koopman_hjb/kernels.hpp"
#include "koopman_hjb/spaces.hpp"
#include "koopman_hjb/system.hpp"

namespace koopman_hjb {

/// Galerkin images of the lifted operators on an orthonormal family v = Rᵀφ.
///
/// All node-level data is kept in raw spline form (`table`, `bgrad`); the
/// coordinate matrices are congruences Rᵀ(·)R of raw quadrature sums.
struct AssembledOperators {
  RieszBasis riesz;
  QuadratureGrid quad;
  WeightSpec weight;
  ControlAffineSystem system;

  RawTable table;
  Eigen::VectorXd measure;  // w(x_q)² ω_q
  LocalField bgrad;         // b(x_q)ᵀ∇φ_a(x_q), raw local layout

  Eigen::MatrixXd M;              // ⟨v_i, v_j⟩_X
  Eigen::LLT<Eigen::MatrixXd> M_chol;
  Eigen::MatrixXd F;              // ⟨v_i, fᵀ∇v_j⟩_X
  Eigen::MatrixXd W;              // r x N, ⟨v_i, c_l⟩_X
  Eigen::MatrixXd C_tilde;        // W M⁻¹
  Eigen::MatrixXd observable_term;  // C̃ᵀC̃
  Eigen::MatrixXd linear_coords;    // N x d, H_Y coordinates of z ↦ z_k

  int n() const { return static_cast<int>(M.rows()); }
  const Eigen::MatrixXd& transform() const { return riesz.transform; }
  /// Solves M x = rhs.
  Eigen::MatrixXd solve_M(const Eigen::MatrixXd& rhs) const { return M_chol.solve(rhs); }
};

AssembledOperators assemble(const RieszBasis& riesz, const QuadratureGrid& quad,
                            const WeightSpec& w, const ControlAffineSystem& sys);

/// Σ_q v_i u(x_q) (bᵀ∇v_j)(x_q) w² ω_q, i.e. Σ_k κ_k Γ_{ijk} for u = Σ κ_k v_k.
Eigen::MatrixXd contract_control(const AssembledOperators& ops,
                                 const Eigen::VectorXd& u_nodes);

/// u(x_q) = −Σ_{mn} S_mn v_m(x_q) (bᵀ∇v_n)(x_q) = −½ bᵀ∇v_S at every node.
Eigen::VectorXd feedback_nodes(const AssembledOperators& ops, const Eigen::MatrixXd& S);

/// κ with M κ = (⟨v_k, u⟩_X)_k.
Eigen::VectorXd project_feedback(const AssembledOperators& ops,
                                 const Eigen::VectorXd& u_nodes);

/// Values of Σ_k coeffs_k v_k at the quadrature nodes.
Eigen::VectorXd node_values(const AssembledOperators& ops, const Eigen::VectorXd& coeffs);

/// `field` evaluated at every quadrature node (dim_out x n_nodes).
Eigen::MatrixXd field_at_nodes(const PolyField& field, const QuadratureGrid& quad);

}  // namespace koopman_hjb
