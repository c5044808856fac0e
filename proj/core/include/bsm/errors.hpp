#ifndef BSM_ERRORS_HPP
#define BSM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bsm {

// Parameter outside its mathematical domain (negative scale, rho >= 1, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numerical failure: Cholesky breakdown, non-PSD matrix, degenerate chain.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (bad permutation, inconsistent dimensions, ...).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse: an operation was called outside its contract.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bsm

#endif
