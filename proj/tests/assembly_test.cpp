#include "koopman_hjb/assembly.hpp"

#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace koopman_hjb {
namespace {

// f from the Van der Pol preset with a state-dependent input channel, so Γ is
// not degenerate.
ControlAffineSystem small_system() {
  const ControlAffineSystem vdp = vanderpol_preset();
  const PolyField b(2, {{{{0, 0}, 1.0}, {{0, 2}, 0.5}}, {{{1, 0}, 1.0}, {{0, 0}, -0.3}}});
  return ControlAffineSystem(vdp.f(), b, vdp.c(), vdp.domain());
}

class SmallAssemblyTest : public ::testing::Test {
 protected:
  SmallAssemblyTest()
      : sys_(small_system()),
        raw_(TensorSplineBasis::uniform(sys_.domain(), 2, 2)),
        quad_(build_quadrature_grid(raw_, 5, true)),
        riesz_(make_riesz_basis(raw_, quad_, w_, true)),
        ops_(assemble(riesz_, quad_, w_, sys_)),
        table_(tabulate(riesz_, quad_, w_)),
        gamma_(testing::explicit_gamma(table_, field_at_nodes(sys_.b(), quad_))) {}

  Eigen::MatrixXd contract_explicit(const Eigen::VectorXd& kappa) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ops_.n(), ops_.n());
    for (int k = 0; k < ops_.n(); ++k) out += kappa[k] * gamma_[k];
    return out;
  }

  WeightSpec w_;
  ControlAffineSystem sys_;
  TensorSplineBasis raw_;
  QuadratureGrid quad_;
  RieszBasis riesz_;
  AssembledOperators ops_;
  NodeTable table_;
  std::vector<Eigen::MatrixXd> gamma_;
};

TEST_F(SmallAssemblyTest, SizeIsSmall) { EXPECT_EQ(ops_.n(), 8); }

TEST_F(SmallAssemblyTest, MassIsCongruentHxGram) {
  const Eigen::MatrixXd R = riesz_.transform;
  const Eigen::MatrixXd ref = R.transpose() * gram_HX(raw_, quad_, w_) * R;
  EXPECT_LE((ops_.M - ref).norm(), 1e-12 * ref.norm());
  EXPECT_EQ(ops_.M_chol.info(), Eigen::Success);
}

TEST_F(SmallAssemblyTest, DriftAndObservablesFromDenseTable) {
  const Eigen::VectorXd meas = table_.w2.cwiseProduct(table_.quad_weights);
  const Eigen::MatrixXd fn = field_at_nodes(sys_.f(), quad_);
  const Eigen::MatrixXd cn = field_at_nodes(sys_.c(), quad_);
  Eigen::MatrixXd fgrad = fn.row(0).transpose().asDiagonal() * table_.gradients[0];
  fgrad += fn.row(1).transpose().asDiagonal() * table_.gradients[1];
  const Eigen::MatrixXd F = table_.values.transpose() * meas.asDiagonal() * fgrad;
  const Eigen::MatrixXd W = cn * meas.asDiagonal() * table_.values;
  EXPECT_LE((ops_.F - F).norm(), 1e-12 * F.norm());
  EXPECT_LE((ops_.W - W).norm(), 1e-12 * W.norm());
  EXPECT_LE((ops_.C_tilde * ops_.M - ops_.W).norm(), 1e-10 * W.norm());
  EXPECT_LE((ops_.observable_term - ops_.C_tilde.transpose() * ops_.C_tilde).norm(), 1e-14);
}

TEST_F(SmallAssemblyTest, GammaSymmetricInOuterIndices) {
  double worst = 0.0;
  for (int i = 0; i < ops_.n(); ++i) {
    for (int j = 0; j < ops_.n(); ++j) {
      for (int k = 0; k < ops_.n(); ++k) worst = std::max(worst, std::abs(gamma_[k](i, j) - gamma_[i](k, j)));
    }
  }
  EXPECT_LE(worst, 1e-12);
}

TEST_F(SmallAssemblyTest, ContractionMatchesExplicitTensor) {
  std::mt19937 rng(12);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd kappa(ops_.n());
    for (auto& k : kappa) k = g(rng);
    const Eigen::MatrixXd got = contract_control(ops_, node_values(ops_, kappa));
    const Eigen::MatrixXd ref = contract_explicit(kappa);
    EXPECT_LE((got - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
  }
  // The constant control is not in the span; compare against the triple sum directly.
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(quad_.n_nodes());
  const Eigen::MatrixXd bn = field_at_nodes(sys_.b(), quad_);
  Eigen::MatrixXd bgrad = bn.row(0).transpose().asDiagonal() * table_.gradients[0];
  bgrad += bn.row(1).transpose().asDiagonal() * table_.gradients[1];
  const Eigen::MatrixXd ref1 =
      table_.values.transpose() * table_.w2.cwiseProduct(table_.quad_weights).asDiagonal() * bgrad;
  EXPECT_LE((contract_control(ops_, one) - ref1).norm(), 1e-12 * ref1.norm());
}

TEST_F(SmallAssemblyTest, ContractionIsLinear) {
  const Eigen::VectorXd u = Eigen::VectorXd::Random(quad_.n_nodes());
  const Eigen::VectorXd v = Eigen::VectorXd::Random(quad_.n_nodes());
  const Eigen::MatrixXd lhs = contract_control(ops_, u + v);
  const Eigen::MatrixXd rhs = contract_control(ops_, u) + contract_control(ops_, v);
  EXPECT_LE((lhs - rhs).norm(), 1e-13 * lhs.norm());
  EXPECT_EQ(contract_control(ops_, Eigen::VectorXd::Zero(quad_.n_nodes())).norm(), 0.0);
}

TEST_F(SmallAssemblyTest, FeedbackOfValueMatchesExplicitPaths) {
  std::mt19937 rng(13);
  const Eigen::MatrixXd S = testing::random_spd(ops_.n(), rng, 0.0);
  const Eigen::VectorXd u = feedback_nodes(ops_, S);
  const Eigen::MatrixXd bn = field_at_nodes(sys_.b(), quad_);
  Eigen::MatrixXd bgrad = bn.row(0).transpose().asDiagonal() * table_.gradients[0];
  bgrad += bn.row(1).transpose().asDiagonal() * table_.gradients[1];
  const Eigen::VectorXd u_ref = -(table_.values * S).cwiseProduct(bgrad).rowwise().sum();
  EXPECT_LE((u - u_ref).norm(), 1e-12 * u_ref.norm());

  // Σ_mn S_mn paths through Γ for the projected part of the feedback.
  const Eigen::VectorXd kappa = project_feedback(ops_, u);
  const Eigen::MatrixXd got = contract_control(ops_, node_values(ops_, kappa));
  EXPECT_LE((got - contract_explicit(kappa)).norm(), 1e-12 * got.norm());
  // Bilinear in S.
  EXPECT_LE((feedback_nodes(ops_, 2.5 * S) - 2.5 * u).norm(), 1e-13 * u.norm());
  EXPECT_EQ(feedback_nodes(ops_, Eigen::MatrixXd::Zero(ops_.n(), ops_.n())).norm(), 0.0);
}

TEST_F(SmallAssemblyTest, ProjectionReproducesBasisElements) {
  const Eigen::VectorXd e3 = Eigen::VectorXd::Unit(ops_.n(), 3);
  EXPECT_LE((project_feedback(ops_, table_.values.col(3)) - e3).norm(), 1e-10);
  EXPECT_EQ(project_feedback(ops_, Eigen::VectorXd::Zero(quad_.n_nodes())).norm(), 0.0);

  const Eigen::VectorXd u = Eigen::VectorXd::Random(quad_.n_nodes());
  const Eigen::VectorXd k1 = project_feedback(ops_, u);
  const Eigen::VectorXd k2 = project_feedback(ops_, node_values(ops_, k1));
  EXPECT_LE((k1 - k2).norm(), 1e-10 * std::max(1.0, k1.norm()));
}

TEST_F(SmallAssemblyTest, InvariantUnderCellReordering) {
  QuadratureGrid rev = quad_;
  std::reverse(rev.cells.begin(), rev.cells.end());
  int pos = 0;
  for (auto& c : rev.cells) {
    const int len = c.end - c.begin;
    rev.nodes.middleCols(pos, len) = quad_.nodes.middleCols(c.begin, len);
    rev.weights.segment(pos, len) = quad_.weights.segment(c.begin, len);
    c.begin = pos;
    c.end = pos + len;
    pos += len;
  }
  const AssembledOperators r = assemble(riesz_, rev, w_, sys_);
  EXPECT_LE((r.M - ops_.M).norm(), 1e-13 * ops_.M.norm());
  EXPECT_LE((r.F - ops_.F).norm(), 1e-13 * ops_.F.norm());
  EXPECT_LE((r.W - ops_.W).norm(), 1e-13 * ops_.W.norm());
}

TEST(LinearAssemblyTest, ZeroDriftGivesZeroF) {
  const BoxDomain dom({-1.0, -1.0}, {1.0, 1.0});
  const auto sys = linear_preset(Eigen::Matrix2d::Zero(), Eigen::Vector2d(0.0, 1.0), Eigen::Matrix2d::Identity(), dom);
  const auto raw = TensorSplineBasis::uniform(dom, 4, 2);
  const auto quad = build_quadrature_grid(raw, 5, true);
  const WeightSpec w;
  const auto ops = assemble(make_riesz_basis(raw, quad, w, true), quad, w, sys);
  EXPECT_EQ(ops.F.norm(), 0.0);
}

// Single function v₁ ∝ x on a symmetric interval: F = a·M and the feedback of
// v = p x² is −p b x.
TEST(LinearAssemblyTest, ScalarIdentityBasis) {
  const BoxDomain dom({-1.0}, {1.0});
  const double a = -0.7, b = 1.3;
  const auto sys = linear_preset(Eigen::MatrixXd::Constant(1, 1, a), Eigen::VectorXd::Constant(1, b),
                                 Eigen::MatrixXd::Ones(1, 1), dom);
  const auto raw = TensorSplineBasis::uniform(dom, 2, 1);
  const WeightSpec w{WeightKind::constant, 0.0};
  const auto quad = build_quadrature_grid(raw, 4);
  const auto ops = assemble(make_riesz_basis(raw, quad, w, true), quad, w, sys);
  ASSERT_EQ(ops.n(), 1);
  EXPECT_NEAR(ops.F(0, 0), a * ops.M(0, 0), 1e-14);

  const NodeTable t = tabulate(ops.riesz, quad, w);
  const double c = t.gradients[0](0, 0);  // v₁ = c·x
  const double p = 0.8;
  const Eigen::MatrixXd S = Eigen::MatrixXd::Constant(1, 1, p / (c * c));
  const Eigen::VectorXd u = feedback_nodes(ops, S);
  for (int q = 0; q < quad.n_nodes(); ++q) EXPECT_NEAR(u[q], -p * b * quad.nodes(0, q), 1e-14);
  // Sign: where bᵀ∇v > 0 the feedback is negative.
  for (int q = 0; q < quad.n_nodes(); ++q) {
    if (quad.nodes(0, q) > 0.0) EXPECT_LT(u[q], 0.0);
  }
}

}  // namespace
}  // namespace koopman_hjb
