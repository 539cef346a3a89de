#pragma once

// First-order upwind Eikonal solver |dphi/dx| = cost(x) with phi = 0 on the
// exit endpoints, by Gauss-Seidel fast sweeping. In one dimension the two
// alternating sweeps (left-to-right, right-to-left) reach the fixed point.

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"

namespace crowdmfg {

struct EikonalProblem {
    Grid grid;
    std::vector<double> cost;  // per-cell positive slowness
    bool exit_left = false;
    bool exit_right = false;
};

// Cost field 1/f(rho) with f capped below at f_floor to keep the slowness
// finite where the density saturates.
inline EikonalProblem make_eikonal_problem(const Grid& grid, const std::vector<double>& rho,
                                           const ModelSpec& spec, double f_floor = 1e-6) {
    EikonalProblem p;
    p.grid = grid;
    p.exit_left = grid.left == BoundaryTag::Exit;
    p.exit_right = grid.right == BoundaryTag::Exit;
    p.cost.resize(rho.size());
    for (size_t i = 0; i < rho.size(); ++i) {
        const double f = std::max(hughes_f(spec, rho[i]), f_floor);
        p.cost[i] = 1.0 / f;
    }
    return p;
}

inline Field solve_eikonal(const EikonalProblem& p, int* sweeps_used = nullptr) {
    const int n = p.grid.n_cells;
    const double h = p.grid.h;
    if (static_cast<int>(p.cost.size()) != n)
        throw std::invalid_argument("solve_eikonal: cost size does not match grid");
    if (!p.exit_left && !p.exit_right)
        throw std::invalid_argument("solve_eikonal: no exit endpoint, phi is unbounded");
    for (int i = 0; i < n; ++i)
        if (!(p.cost[static_cast<size_t>(i)] > 0.0))
            throw std::invalid_argument("solve_eikonal: non-positive cost at cell " +
                                        std::to_string(i));

    const double inf = std::numeric_limits<double>::infinity();
    Field phi(p.grid, inf);

    // Candidate from one upwind side; the exit boundary sits half a cell away.
    auto from_left = [&](int i) {
        if (i == 0) return p.exit_left ? 0.5 * h * p.cost[0] : inf;
        return phi[i - 1] + h * p.cost[static_cast<size_t>(i)];
    };
    auto from_right = [&](int i) {
        if (i == n - 1)
            return p.exit_right ? 0.5 * h * p.cost[static_cast<size_t>(n - 1)] : inf;
        return phi[i + 1] + h * p.cost[static_cast<size_t>(i)];
    };

    int sweeps = 0;
    const int max_sweeps = 8;
    for (; sweeps < max_sweeps; ++sweeps) {
        bool changed = false;
        if (sweeps % 2 == 0) {
            for (int i = 0; i < n; ++i) {
                const double cand = std::min(from_left(i), from_right(i));
                if (cand < phi[i]) phi[i] = cand, changed = true;
            }
        } else {
            for (int i = n - 1; i >= 0; --i) {
                const double cand = std::min(from_left(i), from_right(i));
                if (cand < phi[i]) phi[i] = cand, changed = true;
            }
        }
        if (!changed) break;
    }
    if (sweeps >= max_sweeps)
        throw SolverError("eikonal", sweeps, 0.0, "sweeping did not reach a fixed point");
    if (sweeps_used) *sweeps_used = sweeps;
    return phi;
}

}  // namespace crowdmfg
