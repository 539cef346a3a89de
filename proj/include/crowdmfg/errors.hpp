#pragma once

#include <stdexcept>
#include <string>

namespace crowdmfg {

// Failure of an iterative or stepping solver, carrying enough context for a
// machine-readable failure record (which component, which step, how far off).
class SolverError : public std::runtime_error {
  public:
    SolverError(std::string component_, long iteration_, double residual_, const std::string& msg)
        : std::runtime_error(component_ + ": " + msg),
          component(std::move(component_)),
          iteration(iteration_),
          residual(residual_) {}

    std::string component;
    long iteration;
    double residual;
};

}  // namespace crowdmfg
