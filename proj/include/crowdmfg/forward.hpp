#pragma once

// Implicit Euler solver for the controlled continuity equation
//   d rho/dt + d/dx( F(rho) v ) = sigma^2/2 d2 rho/dx2
// with zero total flux through walls and the Robin outflux beta*rho through
// exits. The advective face flux is the average of the two adjacent cell
// momenta, (F(rho_l) v_l + F(rho_r) v_r)/2. That choice is second-order and,
// unlike averaging F and v separately, its velocity transpose collapses by
// summation by parts to the centered-gradient form the optimizer descends
// along, so the two agree across density fronts and not just where rho is
// smooth. Together with the implicit diffusion the scheme keeps the solution
// inside [0, rho_max] whenever the mesh Peclet number h*|v F'|/sigma^2 <= 1.
// Each step is solved by damped Newton on the residual
//   A_i = (rho_i - rho_i^prev)/dt + (flux_{i+1} - flux_i)/h
// down to ||A||_{L2} <= newton_tol.

#include <cmath>
#include <cstdio>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solver_config.hpp"
#include "tridiag.hpp"

namespace crowdmfg {

namespace detail {

// Face fluxes of the spatial operator and (optionally) the tridiagonal
// Jacobian of its cell divergence with respect to rho. The adjoint solver
// reuses the exact transpose of this Jacobian, so the two stay consistent.
inline void assemble_spatial(const Grid& grid, const ModelSpec& spec,
                             const std::vector<double>& rho, const std::vector<double>& v,
                             std::vector<double>* flux_out, Tridiagonal* jac_out) {
    const int n = grid.n_cells;
    const double h = grid.h;
    const double nu = 0.5 * spec.sigma * spec.sigma;

    std::vector<double> flux(static_cast<size_t>(n + 1), 0.0);
    // d flux_f / d rho_left, d flux_f / d rho_right
    std::vector<double> dfl(static_cast<size_t>(n + 1), 0.0), dfr(static_cast<size_t>(n + 1), 0.0);

    for (int f = 1; f < n; ++f) {
        const size_t sl = static_cast<size_t>(f - 1), sr = static_cast<size_t>(f);
        const double Fl = eval_mobility(spec, MobilityRole::F, rho[sl]);
        const double Fr = eval_mobility(spec, MobilityRole::F, rho[sr]);
        flux[sr] = 0.5 * (Fl * v[sl] + Fr * v[sr]) - nu * (rho[sr] - rho[sl]) / h;
        if (jac_out) {
            dfl[sr] = 0.5 * v[sl] * eval_mobility_derivative(spec, MobilityRole::F, rho[sl]) + nu / h;
            dfr[sr] = 0.5 * v[sr] * eval_mobility_derivative(spec, MobilityRole::F, rho[sr]) - nu / h;
        }
    }
    if (grid.left == BoundaryTag::Exit) {
        flux[0] = -spec.beta * rho[0];
        dfr[0] = -spec.beta;
    }
    if (grid.right == BoundaryTag::Exit) {
        flux[static_cast<size_t>(n)] = spec.beta * rho[static_cast<size_t>(n - 1)];
        dfl[static_cast<size_t>(n)] = spec.beta;
    }

    if (flux_out) *flux_out = flux;
    if (jac_out) {
        Tridiagonal J(n);
        for (int i = 0; i < n; ++i) {
            const size_t si = static_cast<size_t>(i);
            // Row i depends on flux_i (left face: dfl -> rho_{i-1}, dfr -> rho_i)
            // and flux_{i+1} (right face: dfl -> rho_i, dfr -> rho_{i+1}).
            J.diag[si] = (dfl[si + 1] - dfr[si]) / h;
            if (i > 0) J.lower[si] = -dfl[si] / h;
            if (i + 1 < n) J.upper[si] = dfr[si + 1] / h;
        }
        *jac_out = J;
    }
}

inline std::vector<double> divergence(const Grid& grid, const std::vector<double>& flux) {
    const int n = grid.n_cells;
    std::vector<double> div(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        div[static_cast<size_t>(i)] =
            (flux[static_cast<size_t>(i + 1)] - flux[static_cast<size_t>(i)]) / grid.h;
    return div;
}

inline double l2_norm(const Grid& grid, const std::vector<double>& r) {
    double s = 0.0;
    for (double x : r) s += x * x;
    return std::sqrt(s * grid.h);
}

}  // namespace detail

namespace detail {

// Damped Newton for one implicit step with the given velocity frame and
// initial guess. Returns false if the residual cannot be pushed under
// newton_tol within the iteration budget.
inline bool newton_step(const Grid& grid, const ModelSpec& spec, const SolverConfig& cfg,
                        const std::vector<double>& rho_prev, const std::vector<double>& v_frame,
                        std::vector<double>& x, long step_index) {
    const int n = grid.n_cells;

    auto residual = [&](const std::vector<double>& rho, Tridiagonal* jac) {
        std::vector<double> flux;
        assemble_spatial(grid, spec, rho, v_frame, &flux, jac);
        std::vector<double> r = divergence(grid, flux);
        for (int i = 0; i < n; ++i)
            r[static_cast<size_t>(i)] +=
                (rho[static_cast<size_t>(i)] - rho_prev[static_cast<size_t>(i)]) / cfg.dt;
        return r;
    };

    Tridiagonal J(n);
    std::vector<double> r = residual(x, &J);
    double norm = l2_norm(grid, r);

    for (int iter = 0; iter < cfg.newton_max_iter; ++iter) {
        if (norm <= cfg.newton_tol) return true;
        for (int i = 0; i < n; ++i) J.diag[static_cast<size_t>(i)] += 1.0 / cfg.dt;
        std::vector<double> neg_r(r.size());
        for (size_t i = 0; i < r.size(); ++i) neg_r[i] = -r[i];
        std::vector<double> delta;
        try {
            delta = solve_tridiagonal(J, std::move(neg_r));
        } catch (const std::runtime_error& e) {
            throw SolverError("forward", step_index, norm, e.what());
        }

        // Damped update: halve the step until the residual stops growing.
        double lambda = 1.0;
        std::vector<double> x_new(static_cast<size_t>(n));
        std::vector<double> r_new;
        double norm_new = 0.0;
        for (int halvings = 0;; ++halvings) {
            for (int i = 0; i < n; ++i)
                x_new[static_cast<size_t>(i)] =
                    x[static_cast<size_t>(i)] + lambda * delta[static_cast<size_t>(i)];
            r_new = residual(x_new, &J);
            norm_new = l2_norm(grid, r_new);
            if (norm_new <= norm || halvings >= 20) break;
            lambda *= 0.5;
        }
        x = x_new;
        r = r_new;
        norm = norm_new;
    }
    return norm <= cfg.newton_tol;
}

}  // namespace detail

// One implicit step: solves for rho_new given rho_prev and the velocity frame
// that drives the step. Throws SolverError if Newton fails to converge.
//
// Plain damped Newton from rho_prev stalls at sharp vacuum fronts, where the
// truncated mobility kinks the residual exactly at rho = 0. The system itself
// is still solvable (the advective part is bounded, the implicit diffusion
// dominates), so on a stall the step is re-solved by continuation in the
// advective strength: the flux is linear in v, so theta*v poses the same
// scheme with a weaker drive, and walking theta up to 1 hands Newton a chain
// of nearby warm starts. Only the theta = 1 solution is ever returned.
inline std::vector<double> forward_step(const Grid& grid, const ModelSpec& spec,
                                        const SolverConfig& cfg,
                                        const std::vector<double>& rho_prev,
                                        const std::vector<double>& v_frame, long step_index) {
    std::vector<double> x = rho_prev;
    if (detail::newton_step(grid, spec, cfg, rho_prev, v_frame, x, step_index)) return x;

    std::vector<double> scaled(v_frame.size());
    auto solve_at = [&](double theta, std::vector<double>& state) {
        for (size_t i = 0; i < v_frame.size(); ++i) scaled[i] = theta * v_frame[i];
        return detail::newton_step(grid, spec, cfg, rho_prev, scaled, state, step_index);
    };

    double theta = 0.0, dtheta = 0.5;
    x = rho_prev;
    if (!solve_at(0.0, x)) {
        // Even the advection-free step failed; nothing further to try.
        char tol[32];
        std::snprintf(tol, sizeof tol, "%g", cfg.newton_tol);
        throw SolverError("forward", step_index, 0.0,
                          std::string("Newton did not reach tolerance ") + tol);
    }
    while (theta < 1.0) {
        const double trial = std::min(1.0, theta + dtheta);
        std::vector<double> x_trial = x;
        if (solve_at(trial, x_trial)) {
            theta = trial;
            x = std::move(x_trial);
            dtheta *= 2.0;
        } else {
            dtheta *= 0.5;
            if (dtheta < 1.0 / 1024.0) {
                char tol[32];
                std::snprintf(tol, sizeof tol, "%g", cfg.newton_tol);
                throw SolverError("forward", step_index, 0.0,
                                  std::string("Newton did not reach tolerance ") + tol);
            }
        }
    }
    return x;
}

// Full forward solve; v must carry one frame per time node of the cfg grid
// (frame k+1 drives the step from t_k to t_{k+1}).
inline Trajectory forward_solve(const Trajectory& v, const Field& rho0, const ModelSpec& spec,
                                const SolverConfig& cfg) {
    spec.validate();
    cfg.validate();
    const int K = cfg.n_steps();
    if (!(rho0.grid == v.grid))
        throw std::invalid_argument("forward_solve: v and rho0 live on different grids");
    if (v.n_frames() != K + 1)
        throw std::invalid_argument("forward_solve: v has " + std::to_string(v.n_frames()) +
                                    " frames, need " + std::to_string(K + 1));
    if (std::abs(v.dt - cfg.dt) > 1e-12 * std::max(1.0, cfg.dt))
        throw std::invalid_argument("forward_solve: v time step differs from cfg.dt");

    Trajectory rho = make_trajectory(rho0.grid, cfg.dt);
    rho.append(0.0, rho0.values);
    std::vector<double> cur = rho0.values;
    for (int k = 0; k < K; ++k) {
        cur = forward_step(rho0.grid, spec, cfg, cur, v.frame(k + 1), k);
        rho.append((k + 1) * cfg.dt, cur);
    }
    return rho;
}

}  // namespace crowdmfg
