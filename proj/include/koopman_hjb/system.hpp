#pragma once

#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/basis.hpp"

namespace koopman_hjb {

struct Monomial {
  std::vector<int> exponents;
  double coeff = 0.0;

  bool operator==(const Monomial&) const = default;
};

struct FieldEval {
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;  // dim_out x dim_in
};

/// Vector-valued polynomial map ℝ^dim_in → ℝ^dim_out given as monomial lists,
/// one list per output component. Evaluation and Jacobian are exact.
class PolyField {
 public:
  PolyField() = default;
  PolyField(int dim_in, std::vector<std::vector<Monomial>> components);

  /// The constant map x ↦ c.
  static PolyField constant(int dim_in, const Eigen::VectorXd& c);
  /// The linear map x ↦ A x.
  static PolyField linear(const Eigen::MatrixXd& A);

  int dim_in() const { return dim_in_; }
  int dim_out() const { return static_cast<int>(components_.size()); }
  const std::vector<std::vector<Monomial>>& components() const { return components_; }

  Eigen::VectorXd value(const Eigen::VectorXd& x) const;
  int max_degree() const;
  /// Highest total degree that carries a nonzero coefficient, or -1.
  int max_nonzero_degree() const;
  /// Every nonzero monomial has total degree exactly `degree`.
  bool homogeneous_of_degree(int degree) const;

  bool operator==(const PolyField&) const = default;

 private:
  int dim_in_ = 0;
  std::vector<std::vector<Monomial>> components_;
};

FieldEval eval_field(const PolyField& field, const Eigen::VectorXd& x);

/// ẋ = f(x) + b(x) u with running cost ||c(x)||² + u².
class ControlAffineSystem {
 public:
  /// Throws unless f: ℝ^d→ℝ^d, b: ℝ^d→ℝ^d, c: ℝ^d→ℝ^r, f(0) = 0, c(0) = 0.
  ControlAffineSystem(PolyField f, PolyField b, PolyField c, BoxDomain domain);

  const PolyField& f() const { return f_; }
  const PolyField& b() const { return b_; }
  const PolyField& c() const { return c_; }
  const BoxDomain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int n_observables() const { return c_.dim_out(); }
  /// f linear, b constant, c linear.
  bool is_linear() const;

  bool operator==(const ControlAffineSystem&) const = default;

 private:
  PolyField f_;
  PolyField b_;
  PolyField c_;
  BoxDomain domain_;
};

struct VanDerPolParameters {
  double mu = 2.0;      // nonlinear damping
  double eta = 2.2;     // friction
  double alpha = 0.15;  // cubic boundary term
  double gamma = 4.0;   // input gain
};

/// Modified Van der Pol oscillator on [-3, 3]²:
/// f = (x₂ − α x₁³, −μ(x₁² − 1)x₂ − x₁ − η x₂), b = (0, γ), c = (x₁, x₂).
ControlAffineSystem vanderpol_preset(const VanDerPolParameters& params = {});

/// f(x) = A x, b ≡ b, c(x) = C x.
ControlAffineSystem linear_preset(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                  const Eigen::MatrixXd& C, const BoxDomain& domain);

struct TangentReport {
  double max_inner_product = 0.0;  // max of ν(x)ᵀ f(x) over the samples
  std::vector<Eigen::VectorXd> violating_points;  // samples with ν(x)ᵀ f(x) >= 0
  bool b_vanishes_on_boundary = false;
  int n_samples = 0;

  bool satisfied() const { return violating_points.empty(); }
};

TangentReport check_tangent_condition(const ControlAffineSystem& sys, int samples_per_face);

struct Linearization {
  Eigen::MatrixXd A0;  // Df(0)
  Eigen::VectorXd b0;  // b(0)
  Eigen::MatrixXd C0;  // Dc(0), r x d
  Eigen::MatrixXd Q;   // C0ᵀ C0
};

Linearization linearize(const ControlAffineSystem& sys);

}  // namespace koopman_hjb
