#pragma once

#include <iosfwd>
#include <optional>
#include <string>

namespace koopman_hjb {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidationFailed = 1,
  kExitConfigError = 2,
  kExitTangentViolation = 3,
  kExitNonConvergence = 4,
  kExitInternalError = 5,
};

struct CommandOptions {
  std::string config_path;
  std::optional<std::string> out_dir;    // overrides output.directory
  bool allow_boundary = false;           // proceed despite a tangent-condition violation
  bool svg = false;                      // also render plots after solve
  std::optional<std::string> model_dir;  // validate: where sos_model.csv lives
  std::optional<int> modes;              // validate: keep only the leading modes
};

int cmd_solve(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_lqr_check(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_plot(const std::string& run_dir, std::ostream& out, std::ostream& err);

}  // namespace koopman_hjb
