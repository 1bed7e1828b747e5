#pragma once

// Fixed-step explicit integration over a window grid.  Every window is split
// into steps_per_window equal steps, so window boundaries are hit exactly and
// the right-hand side sees a constant control inside each window.  All
// intermediate states are ordinary taped tensors, so gradients flow through
// the unrolled steps.

#include <cstddef>
#include <functional>
#include <span>

#include "stgnrde/model.hpp"

namespace stgnrde {

enum class Method { euler, rk4 };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct SolveSpec {
  Method method = Method::rk4;
  std::size_t steps_per_window = 2;

  void validate() const;
};

// Right-hand side evaluated inside window `window`.
using WindowRhs = std::function<HiddenState(const HiddenState& state, std::size_t window)>;

// Integrates from boundaries.front() to boundaries.back().  Throws
// NumericError naming the window and step when the state stops being finite.
HiddenState integrate(const HiddenState& init, std::span<const double> boundaries,
                      const SolveSpec& spec, const WindowRhs& rhs);

// Model system: within window i the control is controls[i] / divisors[i].
HiddenState integrate(const GraphRde& model, const HiddenState& init, const ModelInput& input,
                      const SolveSpec& spec);

struct ConvergenceResult {
  double order = 0.0;
  std::vector<double> step_sizes;
  std::vector<double> errors;
};

// Least-squares slope of log(error) against log(h) on z' = -z over [0, 1],
// h = 1/4 ... 1/64.
ConvergenceResult convergence_order(Method method);

}  // namespace stgnrde
