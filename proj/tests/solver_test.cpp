#include "koopman_hjb/solver.hpp"

#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "koopman_hjb/pipeline.hpp"
#include "koopman_hjb/validate.hpp"
#include "oracles.hpp"

namespace koopman_hjb {
namespace {

/// One-dimensional orthonormal family with exactly `n` members.
RieszBasis family_of_size(int n) {
  const auto raw = TensorSplineBasis::uniform(BoxDomain({-1.0}, {1.0}), n, 2);
  const auto quad = build_quadrature_grid(raw, 5, true);
  return make_riesz_basis(raw, quad, WeightSpec{}, true);
}

const PolyField kUnitInput = PolyField::constant(1, Eigen::VectorXd::Ones(1));

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

// ---------------------------------------------------------------------------

TEST(SosExtractTest, Identity) {
  const SosValueModel m = sos_extract(Eigen::MatrixXd::Identity(2, 2), {}, family_of_size(2), kUnitInput);
  ASSERT_EQ(m.n_modes(), 2);
  EXPECT_DOUBLE_EQ(m.sigmas()[0], 1.0);
  EXPECT_DOUBLE_EQ(m.sigmas()[1], 1.0);
  EXPECT_LE((m.coeffs().transpose() * m.coeffs() - Eigen::Matrix2d::Identity()).norm(), 1e-15);
}

TEST(SosExtractTest, DropsZeroEigenvalue) {
  const Eigen::MatrixXd S = Eigen::Vector3d(3.0, 1.0, 0.0).asDiagonal();
  const SosValueModel m = sos_extract(S, {}, family_of_size(3), kUnitInput);
  ASSERT_EQ(m.n_modes(), 2);
  EXPECT_DOUBLE_EQ(m.sigmas()[0], 3.0);
  EXPECT_DOUBLE_EQ(m.sigmas()[1], 1.0);
  EXPECT_EQ(m.coeffs().col(0), Eigen::Vector3d::UnitX());
  EXPECT_EQ(m.coeffs().col(1), Eigen::Vector3d::UnitY());
  EXPECT_FALSE(m.negative_warning);
}

TEST(SosExtractTest, ReconstructionRoundTrip) {
  std::mt19937 rng(14);
  const Eigen::MatrixXd S = testing::random_spd(10, rng, 0.01);
  const SosValueModel m = sos_extract(S, {}, family_of_size(10), kUnitInput);
  EXPECT_LE((reconstruct(m) - S).norm(), 1e-12 * S.norm());
  for (int i = 1; i < m.n_modes(); ++i) EXPECT_GE(m.sigmas()[i - 1], m.sigmas()[i]);
}

TEST(SosExtractTest, NegativeEigenvalueWarning) {
  const Eigen::MatrixXd S = Eigen::Vector2d(1.0, -1e-3).asDiagonal();
  const SosValueModel m = sos_extract(S, {}, family_of_size(2), kUnitInput);
  EXPECT_TRUE(m.negative_warning);
  EXPECT_DOUBLE_EQ(m.min_eigenvalue, -1e-3);
  EXPECT_EQ(m.n_modes(), 1);
}

TEST(SosValueModelTest, EmptyModelIsZero) {
  const SosValueModel m(family_of_size(4), kUnitInput, Eigen::VectorXd(0), Eigen::MatrixXd(4, 0));
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 0.3);
  EXPECT_EQ(evaluate_value(m, z), 0.0);
  EXPECT_EQ(evaluate_feedback(m, z), 0.0);
  EXPECT_THROW(m.value(Eigen::VectorXd::Constant(1, 1.5)), std::domain_error);
}

TEST(SosValueModelTest, ScaledAndTruncated) {
  std::mt19937 rng(15);
  const SosValueModel m = sos_extract(testing::random_spd(6, rng), {}, family_of_size(6), kUnitInput);
  const Eigen::VectorXd z = Eigen::VectorXd::Constant(1, -0.42);
  EXPECT_NEAR(m.scaled(2.0).value(z), 2.0 * m.value(z), 1e-14);
  const SosValueModel t = m.truncated(1);
  EXPECT_EQ(t.n_modes(), 1);
  EXPECT_NEAR(t.value(z), m.sigmas()[0] * std::pow(m.modes(z)[0], 2), 1e-14);
}

TEST(SolverConfigTest, Validation) {
  SolverConfig c;
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.max_iter = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------

class LqrScalarTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { run_ = solve(testing::lqr_scalar_config()).release(); }
  static void TearDownTestSuite() { delete run_; }
  static Solved* run_;
};
Solved* LqrScalarTest::run_ = nullptr;

TEST_F(LqrScalarTest, ValueAndFeedbackMatchRiccati) {
  const double p = testing::sqrt2m1();
  double ev = 0.0, vmax = 0.0, eu = 0.0, umax = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double z = -1.0 + 2.0 * i / 99.0;
    const Eigen::VectorXd zz = Eigen::VectorXd::Constant(1, z);
    ev = std::max(ev, std::abs(evaluate_value(run_->model, zz) - p * z * z));
    eu = std::max(eu, std::abs(evaluate_feedback(run_->model, zz) + p * z));
    vmax = std::max(vmax, p * z * z);
    umax = std::max(umax, p * std::abs(z));
  }
  EXPECT_LE(ev / vmax, 1e-4);
  EXPECT_LE(eu / umax, 1e-3);
}

TEST_F(LqrScalarTest, ResidualWithinTolerance) {
  const auto& ops = run_->disc.ops;
  const double tol = run_->cfg.tol;
  EXPECT_TRUE(run_->sol.trace.converged);
  EXPECT_LE(equation_residual(ops, run_->sol.S), 10.0 * tol * (1.0 + ops.observable_term.norm()));
}

TEST_F(LqrScalarTest, ResidualAtZeroIsObservableTerm) {
  const auto& ops = run_->disc.ops;
  EXPECT_EQ(equation_residual(ops, Eigen::MatrixXd::Zero(ops.n(), ops.n())), ops.observable_term.norm());
}

TEST_F(LqrScalarTest, ResidualUsesSymmetricPart) {
  const auto& ops = run_->disc.ops;
  const Eigen::MatrixXd skew = Eigen::MatrixXd::Random(ops.n(), ops.n());
  const Eigen::MatrixXd S0 = 0.5 * run_->sol.S;
  const Eigen::MatrixXd S = S0 + 0.1 * (skew - skew.transpose());
  const double r0 = equation_residual(ops, S0);
  EXPECT_GT(r0, 1e-3);
  EXPECT_NEAR(equation_residual(ops, S), r0, 1e-12 * r0);
}

TEST_F(LqrScalarTest, FixedPointIsStationary) {
  SolverConfig one = run_->cfg.solver_config();
  one.max_iter = 1;
  const ValueSolution again = solve_value_equation(run_->disc.ops, one, run_->sol.S);
  EXPECT_LE(again.trace.records.front().change, run_->cfg.tol);
}

// The feedback −½bᵀ∇v minimizes the pointwise Hamiltonian ∇vᵀ(f + bu) + ||c||² + u²;
// the opposite sign makes it strictly positive and the closed loop costlier.
TEST_F(LqrScalarTest, FeedbackSignMinimizesHamiltonian) {
  const auto& m = run_->model;
  const auto& sys = run_->sys;
  for (double z : {-0.8, -0.3, 0.25, 0.9}) {
    const Eigen::VectorXd zz = Eigen::VectorXd::Constant(1, z);
    const auto vg = m.value_and_gradient(zz);
    const double bg = sys.b().value(zz).dot(vg.gradient);
    const double drift = vg.gradient.dot(sys.f().value(zz)) + sys.c().value(zz).squaredNorm();
    const double u = evaluate_feedback(m, zz);
    EXPECT_LT(u * z, 0.0);
    EXPECT_NEAR(drift + bg * u + u * u, 0.0, 1e-8);
    EXPECT_GT(drift - bg * u + u * u, 0.5 * bg * bg);
  }
}

// ---------------------------------------------------------------------------

class VanDerPolDeskTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { run_ = solve(testing::vanderpol_desk_config()).release(); }
  static void TearDownTestSuite() { delete run_; }
  static Solved* run_;
};
Solved* VanDerPolDeskTest::run_ = nullptr;

TEST_F(VanDerPolDeskTest, Converges) {
  const SolveTrace& tr = run_->sol.trace;
  EXPECT_TRUE(tr.converged);
  EXPECT_LE(tr.records.size(), 20u);
  EXPECT_LE(tr.records.back().change, 1e-9);
  EXPECT_LT(tr.records.back().abscissa, 0.0);
  const auto& ops = run_->disc.ops;
  EXPECT_LE(equation_residual(ops, run_->sol.S), 10.0 * 1e-9 * (1.0 + ops.observable_term.norm()));
}

TEST_F(VanDerPolDeskTest, AcceptedValueMatrixIsPositive) {
  const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(run_->sol.S).eigenvalues().minCoeff();
  EXPECT_GE(lo, -1e-6 * run_->model.sigmas()[0]);
  EXPECT_FALSE(run_->model.negative_warning);
}

TEST_F(VanDerPolDeskTest, ValueVanishesAtOrigin) {
  double vmax = 0.0;
  for (const auto& z : domain_grid(run_->sys.domain(), 21)) vmax = std::max(vmax, run_->model.value(z));
  EXPECT_LE(run_->model.value(Eigen::Vector2d::Zero()), 1e-6 * vmax);
}

TEST_F(VanDerPolDeskTest, FeedbackIsHalfInputDerivative) {
  std::mt19937 rng(16);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double h = 1e-5;
  for (int n = 0; n < 20; ++n) {
    const Eigen::Vector2d z(u(rng), u(rng));
    Eigen::Vector2d g;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e[k] = h;
      g[k] = (run_->model.value(z + e) - run_->model.value(z - e)) / (2 * h);
    }
    const double ref = -0.5 * run_->sys.b().value(z).dot(g);
    EXPECT_NEAR(evaluate_feedback(run_->model, z), ref, 1e-5 * std::max(1.0, std::abs(ref)));
  }
}

TEST_F(VanDerPolDeskTest, FixedPointIsStationary) {
  SolverConfig one = run_->cfg.solver_config();
  one.max_iter = 1;
  const ValueSolution again = solve_value_equation(run_->disc.ops, one, run_->sol.S);
  EXPECT_LE(again.trace.records.front().change, run_->cfg.tol);
}

TEST_F(VanDerPolDeskTest, IterationCapRaisesWithTrace) {
  SolverConfig cfg = run_->cfg.solver_config();
  cfg.max_iter = 2;
  try {
    solve_value_equation(run_->disc.ops, cfg);
    FAIL() << "expected NonConvergenceError";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.trace().records.size(), 2u);
    EXPECT_FALSE(e.trace().converged);
  }
}

// ---------------------------------------------------------------------------

TEST(SolverEdgeCaseTest, ZeroObservablesGiveZeroValue) {
  const BoxDomain dom({-1.0}, {1.0});
  const PolyField zero_c(1, {{}});
  const ControlAffineSystem sys(PolyField::linear(Eigen::MatrixXd::Constant(1, 1, -1.0)), kUnitInput, zero_c, dom);
  const auto raw = TensorSplineBasis::uniform(dom, 8, 3);
  const auto quad = build_quadrature_grid(raw, 6, true);
  const auto ops = assemble(make_riesz_basis(raw, quad, WeightSpec{}, true), quad, WeightSpec{}, sys);
  EXPECT_EQ(ops.W.norm(), 0.0);
  SolverConfig cfg;
  cfg.init = InitKind::zero;
  const ValueSolution sol = solve_value_equation(ops, cfg);
  EXPECT_EQ(sol.S.norm(), 0.0);
  EXPECT_TRUE(sol.trace.converged);
}

TEST(SolverEdgeCaseTest, UnstableWithoutInputIsUnstabilizable) {
  const BoxDomain dom({-1.0}, {1.0});
  const auto sys = linear_preset(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Ones(1, 1), dom);
  const auto raw = TensorSplineBasis::uniform(dom, 6, 2);
  const auto quad = build_quadrature_grid(raw, 5, true);
  const auto ops = assemble(make_riesz_basis(raw, quad, WeightSpec{}, true), quad, WeightSpec{}, sys);
  SolverConfig cfg;
  cfg.init = InitKind::zero;
  EXPECT_THROW(solve_value_equation(ops, cfg), UnstabilizableError);
}

}  // namespace
}  // namespace koopman_hjb
