#include "koopman_hjb/config.hpp"

#include <filesystem>

#include <gtest/gtest.h>

namespace koopman_hjb {
namespace {

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string error_text(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ConfigTest, DefaultsFromEmptyObject) {
  const RunConfig c = parse_config("{\"domain\": {\"lower\": [-3, -3], \"upper\": [3, 3]}}");
  EXPECT_EQ(c.system.kind, SystemKind::vanderpol);
  EXPECT_EQ(c.n_grid, 15);
  EXPECT_EQ(c.degree, 3);
  EXPECT_EQ(c.quadrature_order(), 6);
  EXPECT_EQ(c.tol, 1e-9);
  EXPECT_EQ(c.max_iter, 50);
  EXPECT_EQ(c.weight.kind, WeightKind::inverse_norm);
  EXPECT_EQ(c.weight.floor, 0.0);
  EXPECT_EQ(c.tangent_samples, 200);
}

TEST(ConfigTest, ShippedConfigsRoundTrip) {
  const std::filesystem::path dir = KOOPMAN_HJB_CONFIG_DIR;
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    const RunConfig c = load_config(entry.path().string());
    EXPECT_EQ(parse_config(to_json(c)), c) << entry.path();
  }
  EXPECT_GE(seen, 4);
}

TEST(ConfigTest, PolynomialSystemRoundTrip) {
  const std::string text = R"({
  "domain": {"lower": [-1, -2], "upper": [1, 2]},
  "weight": {"kind": "constant"},
  "basis": {"n_grid": 8, "degree": 2, "vanish_at_origin": false},
  "quadrature": {"order": 7, "split_at_origin": false},
  "system": {
    "preset": "polynomial",
    "tangent_samples": 50,
    "f": [[{"coeff": -1.0, "exponents": [1, 0]}, {"coeff": 0.5, "exponents": [0, 3]}],
          [{"coeff": -2.0, "exponents": [0, 1]}]],
    "b": [[{"coeff": 0.0, "exponents": [0, 0]}], [{"coeff": 1.0, "exponents": [0, 0]}]],
    "c": [[{"coeff": 1.0, "exponents": [1, 0]}]]
  },
  "solver": {"tol": 1e-8, "max_iter": 12, "init": "zero", "damping": "off", "sigma_clip": 0},
  "validate": {"n_trajectories": 4, "t_final": 12.5, "rtol": 1e-7, "hjb_sample_grid": 9,
               "hjb_box": {"lower": [-0.5, -0.5], "upper": [0.5, 0.5]}, "candidate_grid": 11,
               "cost_gap": 0.1, "hjb_median": 0.2, "hessian_gap": 0.3, "lqr_tolerance": 0.01},
  "output": {"directory": "somewhere", "emit_svg": true, "grid_points": 7}
})";
  const RunConfig c = parse_config(text);
  EXPECT_EQ(c.system.kind, SystemKind::polynomial);
  EXPECT_EQ(c.quadrature_order(), 7);
  EXPECT_FALSE(c.vanish_at_origin);
  EXPECT_EQ(c.tangent_samples, 50);
  EXPECT_EQ(c.init, InitKind::zero);
  EXPECT_EQ(c.damping, Damping::off);
  EXPECT_EQ(c.validation.hjb_lower, (std::vector<double>{-0.5, -0.5}));
  EXPECT_EQ(c.thresholds.hessian_gap, 0.3);
  EXPECT_EQ(parse_config(to_json(c)), c);
  const ControlAffineSystem sys = c.build_system();
  EXPECT_DOUBLE_EQ(sys.f().value(Eigen::Vector2d(1.0, 2.0))[0], -1.0 + 0.5 * 8.0);
}

TEST(ConfigTest, UnknownKeyReportsLine) {
  const std::string text = "{\n  \"domain\": {\"lower\": [-1], \"upper\": [1]},\n  \"basis\": {\n    \"n_gird\": 4\n  }\n}";
  EXPECT_EQ(error_line(text), 4);
  EXPECT_NE(error_text(text).find("n_gird"), std::string::npos);
  EXPECT_EQ(error_line("{\"domain\": {\"lower\": [-1], \"upper\": [1]},\n\"extra\": 1}"), 2);
}

TEST(ConfigTest, SyntaxErrorReportsLine) {
  const std::string text = "{\n  \"domain\": {\"lower\": [-1], \"upper\": [1]},\n  \"basis\": {\"n_grid\": 4,}\n}";
  EXPECT_EQ(error_line(text), 3);
}

TEST(ConfigTest, InvalidValues) {
  const std::string dom = "\"domain\": {\"lower\": [-1], \"upper\": [1]}";
  EXPECT_GT(error_line("{" + dom + ",\n\"basis\": {\"n_grid\": 1}}"), 0);
  EXPECT_FALSE(error_text("{" + dom + ", \"basis\": {\"degree\": 0}}").empty());
  EXPECT_FALSE(error_text("{\"domain\": {\"lower\": [1], \"upper\": [-1]}}").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"solver\": {\"tol\": -1}}").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"solver\": {\"init\": \"warm\"}}").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"system\": {\"preset\": \"pendulum\"}}").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"system\": {\"preset\": \"linear\", \"A\": [[-1]]}}").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"basis\": {\"n_grid\": \"ten\"}}").empty());
  EXPECT_FALSE(error_text("[1, 2]").empty());
  EXPECT_FALSE(error_text("{" + dom + ", \"system\": {\"preset\": \"vanderpol\", \"tangent_samples\": 1}}").empty());
}

TEST(ConfigTest, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

}  // namespace
}  // namespace koopman_hjb
