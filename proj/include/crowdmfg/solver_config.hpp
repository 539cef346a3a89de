#pragma once

#include <stdexcept>

namespace crowdmfg {

struct SolverConfig {
    double dt = 0.1;               // time step of the state/control grid
    double T = 3.0;                // horizon
    double newton_tol = 1e-6;      // L2 residual bound for the implicit step
    int newton_max_iter = 50;
    double tau = 1.0;              // descent step size (initial size with Armijo)
    double descent_tol = 1e-6;     // relative objective-change tolerance
    int descent_max_iter = 500;
    bool armijo = true;            // backtracking line search; false = fixed tau

    int n_steps() const {
        const long k = static_cast<long>(T / dt + 0.5);
        return static_cast<int>(k);
    }

    void validate() const {
        if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be > 0");
        if (!(T > 0.0)) throw std::invalid_argument("SolverConfig: T must be > 0");
        if (!(newton_tol > 0.0)) throw std::invalid_argument("SolverConfig: newton_tol must be > 0");
        if (newton_max_iter < 1)
            throw std::invalid_argument("SolverConfig: newton_max_iter must be >= 1");
        if (!(tau > 0.0)) throw std::invalid_argument("SolverConfig: tau must be > 0");
        if (!(descent_tol > 0.0))
            throw std::invalid_argument("SolverConfig: descent_tol must be > 0");
        if (descent_max_iter < 1)
            throw std::invalid_argument("SolverConfig: descent_max_iter must be >= 1");
    }
};

}  // namespace crowdmfg
