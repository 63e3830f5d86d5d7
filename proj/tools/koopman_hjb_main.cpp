#include <iostream>

#include <CLI11.hpp>

#include "koopman_hjb/commands.hpp"
#include "koopman_hjb/kernels.hpp"

int main(int argc, char** argv) {
  using namespace koopman_hjb;
  CLI::App app{"Sum-of-squares value functions and feedback laws for control-affine systems"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string out_dir;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.directory)");
  };

  CLI::App* solve = app.add_subcommand("solve", "solve the value equation and write CSV artifacts");
  common(solve);
  solve->add_flag("--allow-boundary", opts.allow_boundary, "proceed when the tangent condition fails");
  solve->add_flag("--svg", opts.svg, "render decay.svg and value.svg");

  CLI::App* validate = app.add_subcommand("validate", "check a solved model against simulations and the HJB equation");
  common(validate);
  std::string model_dir;
  int modes = -1;
  validate->add_option("--model", model_dir, "directory holding sos_model.csv (default: output directory)");
  validate->add_option("--modes", modes, "keep only the leading K modes")->check(CLI::NonNegativeNumber);

  CLI::App* lqr = app.add_subcommand("lqr-check", "compare the pipeline with the Riccati solution on a linear system");
  common(lqr);

  CLI::App* plot = app.add_subcommand("plot", "render SVG figures from a run directory");
  std::string run_dir;
  plot->add_option("run_dir", run_dir, "directory with singular_values.csv and value_grid.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (!model_dir.empty()) opts.model_dir = model_dir;
  if (modes >= 0) opts.modes = modes;
  configure_threads_from_env();

  try {
    if (*solve) return cmd_solve(opts, std::cout, std::cerr);
    if (*validate) return cmd_validate(opts, std::cout, std::cerr);
    if (*lqr) return cmd_lqr_check(opts, std::cout, std::cerr);
    return cmd_plot(run_dir, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInternalError;
  }
}
