#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace eoslab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated a documented precondition (non-minimum input,
/// off-manifold matrices, bad window request, ...).
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& msg) : Error(msg) {}
};

/// An iterate left the finite range. Carries the last finite state so the
/// caller can report partial results instead of crashing.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::size_t last_finite_step,
                  std::vector<double> last_finite_state)
      : Error(msg),
        last_finite_step(last_finite_step),
        last_finite_state(std::move(last_finite_state)) {}

  std::size_t last_finite_step;
  std::vector<double> last_finite_state;
};

/// An iterative method hit its iteration cap. Carries the last estimate.
class NonConvergedError : public Error {
 public:
  NonConvergedError(const std::string& msg, double last_estimate, int iters)
      : Error(msg), last_estimate(last_estimate), iters(iters) {}

  double last_estimate;
  int iters;
};

}  // namespace eoslab
