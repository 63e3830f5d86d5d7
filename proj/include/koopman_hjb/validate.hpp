#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "koopman_hjb/assembly.hpp"
#include "koopman_hjb/solver.hpp"
#include "koopman_hjb/system.hpp"

namespace koopman_hjb {

enum class StopReason { reached_origin, final_time, left_domain };

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> controls;
  std::vector<double> running_cost;  // ∫₀ᵗ ||c||² + u² ds at each recorded time
  StopReason stop = StopReason::final_time;
  double tail_estimate = 0.0;        // v(x(T)), zero after leaving the domain

  bool exited() const { return stop == StopReason::left_domain; }
  double cost() const { return running_cost.empty() ? 0.0 : running_cost.back(); }
  double total_cost() const { return cost() + tail_estimate; }
};

struct SimulationOptions {
  double t_final = 30.0;
  double rtol = 1e-8;
  double atol = 1e-12;
  double origin_radius = 1e-8;
};

/// Adaptive Dormand–Prince integration of ẋ = f(x) + b(x) u*(x) with the running
/// cost carried as an extra state.
Trajectory simulate_closed_loop(const ControlAffineSystem& sys, const SosValueModel& model,
                                const Eigen::VectorXd& z0, const SimulationOptions& opts);

/// Largest increase of v along the recorded states (≤ 0 for a monotone trajectory).
double max_value_increase(const SosValueModel& model, const Trajectory& traj);

struct HjbStatistics {
  std::vector<double> residuals;   // ∇vᵀf + ||c||² − ¼(bᵀ∇v)²
  std::vector<double> normalized;  // |residual| / (||c||² + 1e-12)
  double max_abs = 0.0;
  double median_abs = 0.0;
  double max_normalized = 0.0;
  double median_normalized = 0.0;
};

HjbStatistics hjb_residual(const ControlAffineSystem& sys, const SosValueModel& model,
                           const std::vector<Eigen::VectorXd>& points);

/// g^d cell-centred points on the box [lower, upper].
std::vector<Eigen::VectorXd> box_sample_grid(const std::vector<double>& lower,
                                             const std::vector<double>& upper, int g);

struct HessianCheck {
  Eigen::MatrixXd hessian;    // central-difference D²v(0)
  Eigen::MatrixXd reference;  // 2P̂
  double step = 0.0;
  double rel_gap = 0.0;
};

HessianCheck hessian_check(const ControlAffineSystem& sys, const SosValueModel& model);
/// Same, against a given P̂.
HessianCheck hessian_check(const SosValueModel& model, const Eigen::MatrixXd& P_hat);

struct DecayReport {
  std::vector<double> sigmas;
  std::vector<double> tail_sums;  // T(N) = Σ_{i≥N} σ_i, N = 1..m
  int noise_floor_index = 0;      // 1-based first i with σ_i < 1e-12 σ₁; m+1 if none
  double slope = 0.0;             // LS slope of log T(N) vs log N before the floor
};

DecayReport decay_report(const std::vector<double>& sigmas);
DecayReport decay_report(const SosValueModel& model);

struct StabilityReport {
  double omega_bound = 0.0;           // −½ λ_min(P̂^{-1/2} ĈᵀĈ P̂^{-1/2})
  double discrete_abscissa = 0.0;     // of A_cl(S)
  double linearized_abscissa = 0.0;   // of A0 − b0 b0ᵀ P̂
  bool discrete_hurwitz = false;
  bool decay_guaranteed = false;      // omega_bound < 0
};

StabilityReport stability_report(const ControlAffineSystem& sys, const AssembledOperators& ops,
                                 const Eigen::MatrixXd& S);

struct CostSample {
  Eigen::VectorXd z0;
  double simulated_cost = 0.0;  // running cost plus tail estimate
  double value = 0.0;
  double rel_gap = 0.0;
  double max_value_increase = 0.0;
  StopReason stop = StopReason::final_time;
};

struct ValidationSettings {
  int n_trajectories = 10;
  SimulationOptions simulation;
  int hjb_sample_grid = 21;
  std::vector<double> hjb_lower;  // empty: [-1, 1]^d clipped to Ω
  std::vector<double> hjb_upper;
  int candidate_grid = 41;        // initial-state candidates per axis
};

/// HJB sample points: a cell-centred grid on the configured box.
std::vector<Eigen::VectorXd> hjb_sample_points(const ValidationSettings& settings,
                                               const BoxDomain& dom);

struct ValidationThresholds {
  double cost_gap = 0.05;
  double hjb_median = 0.05;
  double hessian_gap = 0.1;
};

struct ValidationReport {
  std::vector<CostSample> cost_vs_value;
  HjbStatistics hjb;
  std::optional<HessianCheck> hessian;
  std::optional<StabilityReport> stability;
  std::optional<DecayReport> decay;

  double max_cost_gap() const;
  bool passes(const ValidationThresholds& t) const;
};

/// Initial states: candidates on a grid over Ω with v ≥ 0.1 max v, thinned to
/// `n` evenly spaced picks.
std::vector<Eigen::VectorXd> select_initial_states(const SosValueModel& model, int n,
                                                   int candidate_grid);

/// Runs every check; `ops`/`S` enable the stability report.
ValidationReport validate_model(const ControlAffineSystem& sys, const SosValueModel& model,
                                const ValidationSettings& settings,
                                const AssembledOperators* ops = nullptr,
                                const Eigen::MatrixXd* S = nullptr);

}  // namespace koopman_hjb
