#pragma once

// Discrete adjoint of the implicit forward scheme paired with the trapezoid
// time quadrature of the cost. Each backward step reuses the exact transpose
// of the forward Jacobian, so objective pairings hold to round-off for
// perturbations supported away from the time endpoints.
//
// The terminal condition is phi(T) = 0. The half-weight of the trapezoid rule
// at t = T produces an O(dt) auxiliary multiplier that seeds the backward
// sweep; it is an artifact of the quadrature, so the returned trajectory
// stores an exact zero at frame K and the auxiliary value only feeds the
// k = K-1 solve.

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "forward.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solver_config.hpp"
#include "tridiag.hpp"

namespace crowdmfg {

namespace detail {

// Running-cost derivative with respect to rho:
//   a_i = 1/2 F'(rho_i) v_i^2 + 1/2 E'(rho_i).
inline std::vector<double> cost_density_drho(const ModelSpec& spec, const std::vector<double>& rho,
                                             const std::vector<double>& v) {
    std::vector<double> a(rho.size());
    for (size_t i = 0; i < rho.size(); ++i) {
        const double dF = eval_mobility_derivative(spec, MobilityRole::F, rho[i]);
        const double dE = eval_energy(spec, rho[i]).second;
        a[i] = 0.5 * dF * v[i] * v[i] + 0.5 * dE;
    }
    return a;
}

inline std::vector<double> adjoint_backward_step(const Grid& grid, const ModelSpec& spec,
                                                 const SolverConfig& cfg,
                                                 const std::vector<double>& rho_frame,
                                                 const std::vector<double>& v_frame,
                                                 const std::vector<double>& rhs, long step_index) {
    Tridiagonal A(grid.n_cells);
    assemble_spatial(grid, spec, rho_frame, v_frame, nullptr, &A);
    Tridiagonal At = A.transposed();
    for (int i = 0; i < grid.n_cells; ++i) At.diag[static_cast<size_t>(i)] += 1.0 / cfg.dt;
    try {
        return solve_tridiagonal(At, rhs);
    } catch (const std::runtime_error& e) {
        throw SolverError("adjoint", step_index, 0.0, e.what());
    }
}

}  // namespace detail

// Backward sweep over the stored forward states. rho and v must both carry
// K+1 frames on the cfg time lattice; the result has the same shape.
inline Trajectory adjoint_solve(const Trajectory& rho, const Trajectory& v, const ModelSpec& spec,
                                const SolverConfig& cfg) {
    spec.validate();
    cfg.validate();
    const int K = cfg.n_steps();
    const Grid& grid = rho.grid;
    if (!(grid == v.grid))
        throw std::invalid_argument("adjoint_solve: rho and v live on different grids");
    if (rho.n_frames() != K + 1 || v.n_frames() != K + 1)
        throw std::invalid_argument("adjoint_solve: need K+1 frames of rho and v");

    const int n = grid.n_cells;
    std::vector<std::vector<double>> phi(static_cast<size_t>(K + 1),
                                         std::vector<double>(static_cast<size_t>(n), 0.0));

    // Auxiliary terminal multiplier from the half trapezoid weight at t = T:
    //   (I/dt + A_K^T) carry = -1/2 a^K.
    std::vector<double> a = detail::cost_density_drho(spec, rho.frame(K), v.frame(K));
    std::vector<double> rhs(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) rhs[static_cast<size_t>(i)] = -0.5 * a[static_cast<size_t>(i)];
    std::vector<double> carry =
        detail::adjoint_backward_step(grid, spec, cfg, rho.frame(K), v.frame(K), rhs, K);

    // (I/dt + A_k^T) phi^k = phi^{k+1}/dt - a^k, k = K-1 .. 0.
    for (int k = K - 1; k >= 0; --k) {
        a = detail::cost_density_drho(spec, rho.frame(k), v.frame(k));
        for (int i = 0; i < n; ++i) {
            const size_t si = static_cast<size_t>(i);
            rhs[si] = carry[si] / cfg.dt - a[si];
        }
        carry = detail::adjoint_backward_step(grid, spec, cfg, rho.frame(k), v.frame(k), rhs, k);
        phi[static_cast<size_t>(k)] = carry;
    }

    Trajectory out = make_trajectory(grid, cfg.dt);
    for (int k = 0; k <= K; ++k) out.append(rho.times[static_cast<size_t>(k)], phi[static_cast<size_t>(k)]);
    return out;
}

}  // namespace crowdmfg
