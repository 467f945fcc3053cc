#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wdrc {

// Dimension mismatches, violated constructor invariants, bad arguments.
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// The penalty weight is too small: the inner maximization stops being
// concave during value iteration.
struct InfeasiblePenalty : std::runtime_error {
  InfeasiblePenalty(std::string msg, int iteration_, double min_eig_)
      : std::runtime_error(std::move(msg)),
        iteration(iteration_),
        min_eig(min_eig_) {}
  int iteration;
  double min_eig;
};

struct NonConvergence : std::runtime_error {
  NonConvergence(std::string msg, double residual_)
      : std::runtime_error(std::move(msg)), residual(residual_) {}
  double residual;
};

struct NumericalConditioning : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A trajectory left the guarded state region; carries the offending step.
struct RolloutDivergence : std::runtime_error {
  RolloutDivergence(std::string msg, int step_)
      : std::runtime_error(std::move(msg)), step(step_) {}
  int step;
};

// Regression data does not pin down the parameter vector.
struct ExcitationError : std::runtime_error {
  ExcitationError(std::string msg, double condition_)
      : std::runtime_error(std::move(msg)), condition(condition_) {}
  double condition;
};

// A fitted Q-function lost the convex-concave structure needed for
// policy extraction.
struct SaddleStructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grid optimizer hit its bounds; widen the search box.
struct GridBoundsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Accumulates every violation found while validating a config file.
struct ConfigError : std::runtime_error {
  explicit ConfigError(std::vector<std::string> violations_)
      : std::runtime_error(join(violations_)),
        violations(std::move(violations_)) {}
  std::vector<std::string> violations;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
      if (!out.empty()) out += "\n";
      out += s;
    }
    return out;
  }
};

}  // namespace wdrc
