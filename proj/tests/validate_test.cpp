#include "koopman_hjb/validate.hpp"

#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "koopman_hjb/pipeline.hpp"

namespace koopman_hjb {
namespace {

struct Solved {
  RunConfig cfg;
  ControlAffineSystem sys;
  Discretization disc;
  ValueSolution sol;
  SosValueModel model;
};

std::unique_ptr<Solved> solve(const RunConfig& cfg) {
  const ControlAffineSystem sys = cfg.build_system();
  Discretization disc = discretize(cfg, sys);
  ValueSolution sol = solve_value_equation(disc.ops, cfg.solver_config());
  SosValueModel model = sos_extract(sol.S, cfg.solver_config(), disc.riesz, sys.b());
  return std::make_unique<Solved>(Solved{cfg, sys, std::move(disc), std::move(sol), std::move(model)});
}

SosValueModel empty_model(const ControlAffineSystem& sys) {
  const auto raw = TensorSplineBasis::uniform(sys.domain(), 3, 2);
  const auto quad = build_quadrature_grid(raw, 5, true);
  RieszBasis riesz = make_riesz_basis(raw, quad, WeightSpec{}, true);
  const int n = riesz.n();
  return SosValueModel(std::move(riesz), sys.b(), Eigen::VectorXd(0), Eigen::MatrixXd(n, 0));
}

ControlAffineSystem stable_scalar(double half_width, bool observed) {
  const BoxDomain dom({-half_width}, {half_width});
  const PolyField c = observed ? PolyField::linear(Eigen::MatrixXd::Ones(1, 1)) : PolyField(1, {{}});
  return ControlAffineSystem(PolyField::linear(-Eigen::MatrixXd::Ones(1, 1)),
                             PolyField::constant(1, Eigen::VectorXd::Ones(1)), c, dom);
}

TEST(SimulationTest, OpenLoopDecayCost) {
  const ControlAffineSystem sys = stable_scalar(2.0, true);
  const Trajectory tr = simulate_closed_loop(sys, empty_model(sys), Eigen::VectorXd::Ones(1), {});
  EXPECT_EQ(tr.stop, StopReason::reached_origin);
  EXPECT_NEAR(tr.total_cost(), 0.5, 0.5e-6);
  for (std::size_t i = 0; i < tr.times.size(); i += 7) {
    EXPECT_NEAR(tr.states[i][0], std::exp(-tr.times[i]), 1e-7);
  }
  for (std::size_t i = 1; i < tr.times.size(); ++i) EXPECT_GT(tr.times[i], tr.times[i - 1]);
}

TEST(SimulationTest, EquilibriumStays) {
  const ControlAffineSystem sys = stable_scalar(2.0, true);
  const Trajectory tr = simulate_closed_loop(sys, empty_model(sys), Eigen::VectorXd::Zero(1), {});
  EXPECT_EQ(tr.total_cost(), 0.0);
  for (const auto& x : tr.states) EXPECT_EQ(x[0], 0.0);
}

TEST(SimulationTest, RejectsStartOutside) {
  const ControlAffineSystem sys = stable_scalar(1.0, true);
  EXPECT_THROW(simulate_closed_loop(sys, empty_model(sys), Eigen::VectorXd::Constant(1, 1.5), {}),
               std::domain_error);
}

TEST(HjbResidualTest, ZeroModelZeroObservables) {
  const ControlAffineSystem sys = stable_scalar(1.0, false);
  const HjbStatistics h = hjb_residual(sys, empty_model(sys), box_sample_grid({-1.0}, {1.0}, 11));
  EXPECT_EQ(h.max_abs, 0.0);
  EXPECT_EQ(h.median_normalized, 0.0);
}

TEST(BoxSampleGridTest, CellCentred) {
  const auto pts = box_sample_grid({-1.0, 0.0}, {1.0, 2.0}, 4);
  ASSERT_EQ(pts.size(), 16u);
  EXPECT_DOUBLE_EQ(pts[0][0], -0.75);
  EXPECT_DOUBLE_EQ(pts[0][1], 0.25);
  EXPECT_DOUBLE_EQ(pts[15][0], 0.75);
  EXPECT_DOUBLE_EQ(pts[15][1], 1.75);
}

TEST(DecayReportTest, QuarticSpectrumTail) {
  std::vector<double> s(2000);
  for (int i = 0; i < 2000; ++i) s[i] = std::pow(i + 1.0, -4.0);
  const DecayReport r = decay_report(s);
  EXPECT_NEAR(r.slope, -3.0, 0.1);
  EXPECT_EQ(r.noise_floor_index, 1001);  // i⁻⁴ < 1e-12 from i = 1001
  EXPECT_NEAR(r.tail_sums[0], std::pow(M_PI, 4) / 90.0, 1e-9);
}

TEST(DecayReportTest, FloorDetection) {
  const std::vector<double> s{1.0, 1e-2, 1e-4, 1e-6, 1e-8, 1e-13, 1e-13};
  const DecayReport r = decay_report(s);
  EXPECT_EQ(r.noise_floor_index, 6);
  EXPECT_LT(r.slope, 0.0);
}

TEST(DecayReportTest, TooFewModes) {
  try {
    decay_report(std::vector<double>{1.0});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("too few modes"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------

class LqrValidationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { run_ = solve(testing::lqr_scalar_config()).release(); }
  static void TearDownTestSuite() { delete run_; }
  static Solved* run_;
};
Solved* LqrValidationTest::run_ = nullptr;

TEST_F(LqrValidationTest, SimulatedCostFromUnitState) {
  const Trajectory tr = simulate_closed_loop(run_->sys, run_->model, Eigen::VectorXd::Ones(1), {});
  EXPECT_NEAR(tr.total_cost(), testing::sqrt2m1(), 1e-3 * testing::sqrt2m1());
  EXPECT_LE(max_value_increase(run_->model, tr), 1e-9);
}

TEST_F(LqrValidationTest, HjbResidualVanishes) {
  const HjbStatistics h = hjb_residual(run_->sys, run_->model, box_sample_grid({-1.0}, {1.0}, 50));
  EXPECT_LE(h.max_abs, 1e-6);
  EXPECT_LE(h.median_normalized, 1e-6);
}

TEST_F(LqrValidationTest, HessianMatchesRiccati) {
  const HessianCheck h = hessian_check(run_->sys, run_->model);
  EXPECT_LE(h.rel_gap, 1e-3);
  EXPECT_NEAR(h.reference(0, 0), 2.0 * testing::sqrt2m1(), 1e-12);
  const HessianCheck h2 = hessian_check(run_->model.scaled(2.0), 0.5 * h.reference);
  EXPECT_NEAR(h2.hessian(0, 0), 2.0 * h.hessian(0, 0), 1e-12 * std::abs(h.hessian(0, 0)));
}

TEST_F(LqrValidationTest, StabilityFigures) {
  const StabilityReport s = stability_report(run_->sys, run_->disc.ops, run_->sol.S);
  const double p = testing::sqrt2m1();
  EXPECT_NEAR(s.linearized_abscissa, -std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(s.omega_bound, -0.5 / p, 1e-10);
  EXPECT_TRUE(s.discrete_hurwitz);
  EXPECT_TRUE(s.decay_guaranteed);
}

TEST(StabilityReportTest, UnobservedSystemHasNoGuarantee) {
  const ControlAffineSystem sys = stable_scalar(1.0, false);
  const auto raw = TensorSplineBasis::uniform(sys.domain(), 6, 3);
  const auto quad = build_quadrature_grid(raw, 6, true);
  const auto ops = assemble(make_riesz_basis(raw, quad, WeightSpec{}, true), quad, WeightSpec{}, sys);
  const StabilityReport s = stability_report(sys, ops, Eigen::MatrixXd::Zero(ops.n(), ops.n()));
  EXPECT_EQ(s.omega_bound, 0.0);
  EXPECT_FALSE(s.decay_guaranteed);
}

// ---------------------------------------------------------------------------

class VanDerPolValidationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    run_ = solve(testing::vanderpol_desk_config()).release();
    report_ = new ValidationReport(
        validate_model(run_->sys, run_->model, run_->cfg.validation, &run_->disc.ops, &run_->sol.S));
  }
  static void TearDownTestSuite() {
    delete report_;
    delete run_;
  }
  static Solved* run_;
  static ValidationReport* report_;
};
Solved* VanDerPolValidationTest::run_ = nullptr;
ValidationReport* VanDerPolValidationTest::report_ = nullptr;

TEST_F(VanDerPolValidationTest, InitialStatesCarryLargeValues) {
  const auto z0 = select_initial_states(run_->model, 10, 41);
  ASSERT_EQ(z0.size(), 10u);
  double vmax = 0.0;
  for (const auto& z : domain_grid(run_->sys.domain(), 41)) vmax = std::max(vmax, run_->model.value(z));
  for (const auto& z : z0) EXPECT_GE(run_->model.value(z), 0.1 * vmax);
}

TEST_F(VanDerPolValidationTest, CostMatchesValue) {
  ASSERT_EQ(report_->cost_vs_value.size(), 10u);
  for (const auto& c : report_->cost_vs_value) {
    EXPECT_GE(c.simulated_cost, 0.0);
    EXPECT_LE(c.rel_gap, 0.05);
    EXPECT_NE(c.stop, StopReason::left_domain);
    EXPECT_LE(c.max_value_increase, 1e-6 * c.value);
  }
}

TEST_F(VanDerPolValidationTest, HjbAndHessianAndDecay) {
  EXPECT_LE(report_->hjb.median_normalized, 0.05);
  ASSERT_TRUE(report_->hessian.has_value());
  EXPECT_LE(report_->hessian->rel_gap, 0.1);
  ASSERT_TRUE(report_->stability.has_value());
  EXPECT_TRUE(report_->stability->discrete_hurwitz);
  EXPECT_LT(report_->stability->linearized_abscissa, 0.0);
  ASSERT_TRUE(report_->decay.has_value());
  EXPECT_LE(report_->decay->slope, -2.0);
  EXPECT_TRUE(report_->passes({}));
}

TEST_F(VanDerPolValidationTest, TruncatedModelFailsCostCheck) {
  ValidationSettings s = run_->cfg.validation;
  s.n_trajectories = 3;
  const ValidationReport r = validate_model(run_->sys, run_->model.truncated(1), s);
  EXPECT_GT(r.max_cost_gap(), 0.05);
  EXPECT_FALSE(r.passes({}));
}

}  // namespace
}  // namespace koopman_hjb
