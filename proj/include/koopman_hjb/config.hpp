#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/solver.hpp"
#include "koopman_hjb/spaces.hpp"
#include "koopman_hjb/system.hpp"
#include "koopman_hjb/validate.hpp"

namespace koopman_hjb {

/// Invalid configuration: parse failure, unknown key, bad value. `line` is
/// 1-based when known, 0 otherwise.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class SystemKind { vanderpol, linear, polynomial };

struct SystemSpec {
  SystemKind kind = SystemKind::vanderpol;
  VanDerPolParameters vanderpol;
  Eigen::MatrixXd A;  // linear
  Eigen::VectorXd b;
  Eigen::MatrixXd C;
  PolyField f_poly;  // polynomial
  PolyField b_poly;
  PolyField c_poly;

  bool operator==(const SystemSpec& o) const;
};

struct RunConfig {
  std::vector<double> lower{-3.0, -3.0};
  std::vector<double> upper{3.0, 3.0};
  WeightSpec weight;
  int n_grid = 15;
  int degree = 3;
  bool vanish_at_origin = true;
  std::optional<int> quad_order;  // default degree + 3
  bool split_at_origin = true;
  SystemSpec system;
  int tangent_samples = 200;  // boundary samples per face

  double tol = 1e-9;
  int max_iter = 50;
  InitKind init = InitKind::lqr_lift;
  Damping damping = Damping::backtracking;
  double sigma_clip = 1e-12;

  ValidationSettings validation;
  ValidationThresholds thresholds;
  double lqr_tolerance = 1e-4;

  std::string output_directory = "out";
  bool emit_svg = false;
  int grid_points = 41;  // per axis in value_grid.csv

  int quadrature_order() const { return quad_order.value_or(degree + 3); }
  SolverConfig solver_config() const;
  BoxDomain domain() const { return BoxDomain(lower, upper); }
  ControlAffineSystem build_system() const;

  bool operator==(const RunConfig& o) const;
};

/// Parses JSON text. Unknown keys and invalid values raise ConfigError.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
/// Canonical JSON; parse_config(to_json(c)) == c.
std::string to_json(const RunConfig& cfg);

}  // namespace koopman_hjb
