#pragma once

#include <stdexcept>

namespace escore {

// Error taxonomy mirrored by the CLI exit codes: config 2, data 3, numeric 4.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the stated domain of a numerical routine.
struct domain_error : numeric_error {
  using numeric_error::numeric_error;
};
// Score undefined for the requested parameters (e.g. CRPS at gamma >= 1).
struct nonexistence_error : numeric_error {
  using numeric_error::numeric_error;
};
// Weight or sample degenerate: the pairwise kernel expectation vanishes.
struct degenerate_error : numeric_error {
  using numeric_error::numeric_error;
};
// Iterative scheme did not reach the requested tolerance.
struct convergence_error : numeric_error {
  using numeric_error::numeric_error;
};

}  // namespace escore
