#pragma once

// Run configurations shared by the test suites and the acceptance binary.

#include <cmath>

#include <Eigen/Dense>

#include "koopman_hjb/config.hpp"

namespace koopman_hjb::testing {

inline RunConfig linear_config(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& C,
                               double half_width) {
  RunConfig cfg;
  const int d = static_cast<int>(A.rows());
  cfg.lower.assign(d, -half_width);
  cfg.upper.assign(d, half_width);
  cfg.n_grid = 10;
  cfg.degree = 3;
  cfg.system.kind = SystemKind::linear;
  cfg.system.A = A;
  cfg.system.b = b;
  cfg.system.C = C;
  return cfg;
}

/// ẋ = −x + u, c = x on (−1, 1).
inline RunConfig lqr_scalar_config() {
  return linear_config(Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::VectorXd::Ones(1),
                       Eigen::MatrixXd::Ones(1, 1), 1.0);
}

/// Double integrator with c = x on (−1, 1)².
inline RunConfig double_integrator_config() {
  Eigen::Matrix2d A;
  A << 0.0, 1.0, 0.0, 0.0;
  return linear_config(A, Eigen::Vector2d(0.0, 1.0), Eigen::Matrix2d::Identity(), 1.0);
}

/// Van der Pol preset at the desk resolution n_grid = 15, degree = 3.
inline RunConfig vanderpol_desk_config() {
  RunConfig cfg;
  cfg.n_grid = 15;
  cfg.degree = 3;
  cfg.max_iter = 25;
  return cfg;
}

/// Van der Pol preset at the full resolution n_grid = 31, degree = 5.
inline RunConfig vanderpol_full_config() {
  RunConfig cfg;
  cfg.n_grid = 31;
  cfg.degree = 5;
  return cfg;
}

inline double sqrt2m1() { return std::sqrt(2.0) - 1.0; }

inline Eigen::Matrix2d double_integrator_P() {
  const double r3 = std::sqrt(3.0);
  Eigen::Matrix2d P;
  P << r3, 1.0, 1.0, r3;
  return P;
}

}  // namespace koopman_hjb::testing
