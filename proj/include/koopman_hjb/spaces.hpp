#pragma once

#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/basis.hpp"
#include "koopman_hjb/kernels.hpp"

namespace koopman_hjb {

enum class WeightKind { inverse_norm, constant };

/// w(x) = 1 / max(||x||, floor) for inverse_norm, w ≡ 1 for constant.
struct WeightSpec {
  WeightKind kind = WeightKind::inverse_norm;
  double floor = 0.0;

  bool singular_at_origin() const {
    return kind == WeightKind::inverse_norm && floor == 0.0;
  }
  bool operator==(const WeightSpec&) const = default;
};

double weight_eval(const WeightSpec& spec, const Eigen::VectorXd& x);

/// w(x_q)^2 * quadrature weight, per node. Throws on non-finite entries.
Eigen::VectorXd weighted_measure(const QuadratureGrid& grid, const WeightSpec& w);

/// H_X Gram of the raw splines: Σ_q φ_i φ_j w² ω_q.
Eigen::MatrixXd gram_HX(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                        const WeightSpec& w);
Eigen::MatrixXd gram_HX(const RawTable& table, const Eigen::VectorXd& measure);

/// H_Y Gram of the raw splines: weighted values plus unweighted gradients.
Eigen::MatrixXd gram_HY(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                        const WeightSpec& w);
Eigen::MatrixXd gram_HY(const RawTable& table, const Eigen::VectorXd& measure,
                        const Eigen::VectorXd& quad_weights);

/// R = L^{-T} for G = L Lᵀ, so that Rᵀ G R = I. Throws with the smallest
/// eigenvalue when G is not positive definite.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& gram);

/// Columns span {Σ c_j φ_j : Σ c_j φ_j(0) = 0}: each raw function minus a
/// multiple of the pivot function (largest value at the origin).
Eigen::MatrixXd origin_constraint(const TensorSplineBasis& raw);

/// H_Y-orthonormal family v = Rᵀ φ, i.e. v_i = Σ_j R(j, i) φ_j.
struct RieszBasis {
  TensorSplineBasis raw;
  Eigen::MatrixXd transform;  // n_raw x n
  bool vanishes_at_origin = false;

  int n() const { return static_cast<int>(transform.cols()); }
};

/// Orthonormalizes the raw splines in H_Y; with `vanish_at_origin` (and the
/// origin inside the domain) the family is first restricted to functions
/// vanishing at the origin.
RieszBasis make_riesz_basis(const TensorSplineBasis& raw, const RawTable& table,
                            const Eigen::VectorXd& measure,
                            const Eigen::VectorXd& quad_weights,
                            bool vanish_at_origin);
RieszBasis make_riesz_basis(const TensorSplineBasis& raw, const QuadratureGrid& quad,
                            const WeightSpec& w, bool vanish_at_origin);

/// Dense tabulation of the orthonormal family at the quadrature nodes.
struct NodeTable {
  Eigen::MatrixXd values;                  // node x basis
  std::vector<Eigen::MatrixXd> gradients;  // per axis, node x basis
  Eigen::VectorXd w2;
  Eigen::VectorXd quad_weights;
};

NodeTable tabulate(const RieszBasis& riesz, const QuadratureGrid& quad,
                   const WeightSpec& w);
/// Same, for an explicit raw → coordinate transform.
NodeTable tabulate(const TensorSplineBasis& raw, const Eigen::MatrixXd& transform,
                   const QuadratureGrid& quad, const WeightSpec& w);

}  // namespace koopman_hjb
