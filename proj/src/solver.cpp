#include "stgnrde/solver.hpp"

#include <cmath>
#include <string>

#include "stgnrde/error.hpp"

namespace stgnrde {

std::string to_string(Method m) { return m == Method::euler ? "euler" : "rk4"; }

Method parse_method(const std::string& s) {
  if (s == "euler") return Method::euler;
  if (s == "rk4") return Method::rk4;
  throw ConfigError("unknown solver method '" + s + "' (expected euler|rk4)");
}

void SolveSpec::validate() const {
  if (steps_per_window < 1) throw ConfigError("steps_per_window must be >= 1");
}

HiddenState integrate(const HiddenState& init, std::span<const double> boundaries,
                      const SolveSpec& spec, const WindowRhs& rhs) {
  spec.validate();
  if (boundaries.size() < 2) throw ContractError("integration needs at least one window");
  HiddenState state = init;
  for (std::size_t w = 0; w + 1 < boundaries.size(); ++w) {
    const double h = (boundaries[w + 1] - boundaries[w]) / static_cast<double>(spec.steps_per_window);
    auto f = [&](const HiddenState& s) { return rhs(s, w); };
    for (std::size_t step = 0; step < spec.steps_per_window; ++step) {
      try {
        if (spec.method == Method::euler) {
          state = axpy(state, f(state), h);
        } else {
          HiddenState k1 = f(state);
          HiddenState k2 = f(axpy(state, k1, h / 2.0));
          HiddenState k3 = f(axpy(state, k2, h / 2.0));
          HiddenState k4 = f(axpy(state, k3, h));
          HiddenState acc = axpy(k1, k2, 2.0);
          acc = axpy(acc, k3, 2.0);
          acc = axpy(acc, k4, 1.0);
          state = axpy(state, acc, h / 6.0);
        }
      } catch (const NumericError& e) {
        throw NumericError("state blew up in window " + std::to_string(w) + ", step " +
                           std::to_string(step) + " (t = " +
                           std::to_string(boundaries[w] + static_cast<double>(step) * h) +
                           "): " + e.what());
      }
    }
  }
  return state;
}

HiddenState integrate(const GraphRde& model, const HiddenState& init, const ModelInput& input,
                      const SolveSpec& spec) {
  if (input.controls.empty() || input.controls.size() != input.divisors.size() ||
      input.boundaries.size() != input.controls.size() + 1) {
    throw ContractError("model input needs one control and divisor per window");
  }
  return integrate(init, input.boundaries, spec, [&](const HiddenState& s, std::size_t w) {
    return model.rhs(s, input.controls[w], input.divisors[w]);
  });
}

ConvergenceResult convergence_order(Method method) {
  ConvergenceResult result;
  const double exact = std::exp(-1.0);
  const double boundaries[] = {0.0, 1.0};
  for (std::size_t steps = 4; steps <= 64; steps *= 2) {
    HiddenState init;
    init.z = Tensor::scalar(1.0);
    SolveSpec spec{method, steps};
    HiddenState out = integrate(init, boundaries, spec, [](const HiddenState& s, std::size_t) {
      HiddenState d;
      d.z = scale(*s.z, -1.0);
      return d;
    });
    result.step_sizes.push_back(1.0 / static_cast<double>(steps));
    result.errors.push_back(std::fabs(out.z->item() - exact));
  }
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(result.errors.size());
  for (std::size_t i = 0; i < result.errors.size(); ++i) {
    mx += std::log(result.step_sizes[i]);
    my += std::log(result.errors[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < result.errors.size(); ++i) {
    double dx = std::log(result.step_sizes[i]) - mx;
    sxy += dx * (std::log(result.errors[i]) - my);
    sxx += dx * dx;
  }
  result.order = sxy / sxx;
  return result;
}

}  // namespace stgnrde
