#pragma once

// Objective, reduced gradient and the steepest-descent outer loop.
//
// The cost I(rho, v) = sum_k w_k dt h sum_i [ 1/2 F(rho) v^2 + 1/2 E(rho) ]
// uses trapezoid weights in time (w_0 = w_K = 1/2) and midpoint in space.
// Its reduced gradient with respect to v is the Lagrange stationarity field
// F(rho) v - G(rho) grad_h phi, with phi from the discrete adjoint sweep.

#include <cmath>
#include <limits>
#include <vector>

#include "adjoint.hpp"
#include "eikonal.hpp"
#include "errors.hpp"
#include "forward.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solver_config.hpp"

namespace crowdmfg {

namespace detail {

inline double trapezoid_weight(int k, int last) { return (k == 0 || k == last) ? 0.5 : 1.0; }

inline void require_aligned(const Trajectory& a, const Trajectory& b, const char* who) {
    if (!(a.grid == b.grid) || a.n_frames() != b.n_frames() ||
        std::abs(a.dt - b.dt) > 1e-12 * std::max(1.0, a.dt))
        throw std::invalid_argument(std::string(who) + ": trajectories are not aligned");
}

}  // namespace detail

// Space-time L2 inner product with the same trapezoid/midpoint weights as the
// objective, so pairings against the gradient match finite differences of it.
inline double space_time_inner(const Trajectory& a, const Trajectory& b) {
    detail::require_aligned(a, b, "space_time_inner");
    const int last = a.n_frames() - 1;
    double s = 0.0;
    for (int k = 0; k <= last; ++k) {
        const std::vector<double>& fa = a.frame(k);
        const std::vector<double>& fb = b.frame(k);
        double fs = 0.0;
        for (size_t i = 0; i < fa.size(); ++i) fs += fa[i] * fb[i];
        s += detail::trapezoid_weight(k, last) * fs;
    }
    return s * a.dt * a.grid.h;
}

inline double space_time_norm(const Trajectory& a) { return std::sqrt(space_time_inner(a, a)); }

// Total cost of a state/control pair. With momentum_form, the second
// trajectory is read as the momentum j and the kinetic term is 1/2 K(j, rho);
// the infinite branch of K propagates to an IEEE +inf return value.
inline double evaluate_objective(const Trajectory& rho, const Trajectory& v, const ModelSpec& spec,
                                 bool momentum_form = false) {
    detail::require_aligned(rho, v, "evaluate_objective");
    const int last = rho.n_frames() - 1;
    double total = 0.0;
    for (int k = 0; k <= last; ++k) {
        const std::vector<double>& r = rho.frame(k);
        const std::vector<double>& w = v.frame(k);
        double fs = 0.0;
        for (size_t i = 0; i < r.size(); ++i) {
            const double kinetic = momentum_form
                                       ? eval_K(spec, w[i], r[i])
                                       : eval_mobility(spec, MobilityRole::F, r[i]) * w[i] * w[i];
            fs += 0.5 * kinetic + 0.5 * eval_energy(spec, r[i]).first;
        }
        total += detail::trapezoid_weight(k, last) * fs;
    }
    return total * rho.dt * rho.grid.h;
}

// Stationarity field F(rho) v - G(rho) grad_h phi, frame by frame.
inline Trajectory gradient_field(const Trajectory& rho, const Trajectory& phi, const Trajectory& v,
                                 const ModelSpec& spec) {
    detail::require_aligned(rho, phi, "gradient_field");
    detail::require_aligned(rho, v, "gradient_field");
    const Grid& grid = rho.grid;
    Trajectory g = make_trajectory(grid, rho.dt);
    for (int k = 0; k < rho.n_frames(); ++k) {
        const std::vector<double>& r = rho.frame(k);
        const std::vector<double>& w = v.frame(k);
        std::vector<double> dphi = cell_gradient(grid, phi.frame(k));
        std::vector<double> gk(r.size());
        for (size_t i = 0; i < r.size(); ++i)
            gk[i] = eval_mobility(spec, MobilityRole::F, r[i]) * w[i] -
                    eval_mobility(spec, MobilityRole::G, r[i]) * dphi[i];
        g.append(rho.times[static_cast<size_t>(k)], std::move(gk));
    }
    return g;
}

// Greedy-evacuation initialization: phi_H from the Eikonal solve at the
// initial density, v = (G/F) grad(-phi_H), read as v = -grad_h phi_H since
// F = G throughout (the continuous extension of the ratio where F vanishes).
// The sign matters: phi_H is the positive distance-to-exit, while the
// optimality relation pairs v with the gradient of a value-like potential,
// which carries the opposite orientation. The + sign would push the crowd
// into the room's center and jam it past rho_max, where the implicit step
// has no admissible solution. Domains without exits have no Eikonal
// potential; they start from v = 0.
inline Trajectory initial_velocity(const Field& rho0, const ModelSpec& spec,
                                   const SolverConfig& cfg) {
    const Grid& grid = rho0.grid;
    std::vector<double> v0(static_cast<size_t>(grid.n_cells), 0.0);
    if (grid.has_exit()) {
        Field phi_h = solve_eikonal(make_eikonal_problem(grid, rho0.values, spec));
        v0 = cell_gradient(grid, phi_h.values);
        for (double& x : v0) x = -x;
    }
    return constant_trajectory(grid, cfg.dt, cfg.n_steps() + 1, v0);
}

struct DescentReport {
    Trajectory rho, v, phi;
    std::vector<double> objective_history;      // one entry per recorded iterate
    std::vector<double> gradient_norm_history;  // space-time L2 of the gradient field
    std::vector<double> step_history;           // accepted step size (0 for the initial iterate)
    bool converged = false;
    int iterations = 0;
};

namespace detail {

struct DescentState {
    Trajectory rho, phi, g;
    double objective = 0.0;
    double gradient_norm = 0.0;
};

inline DescentState evaluate_iterate(const Trajectory& v, const Field& rho0, const ModelSpec& spec,
                                     const SolverConfig& cfg) {
    DescentState s;
    s.rho = forward_solve(v, rho0, spec, cfg);
    s.objective = evaluate_objective(s.rho, v, spec);
    s.phi = adjoint_solve(s.rho, v, spec, cfg);
    s.g = gradient_field(s.rho, s.phi, v, spec);
    s.gradient_norm = space_time_norm(s.g);
    return s;
}

inline Trajectory axpy(const Trajectory& v, double c, const Trajectory& d) {
    Trajectory out = make_trajectory(v.grid, v.dt);
    for (int k = 0; k < v.n_frames(); ++k) {
        const std::vector<double>& a = v.frame(k);
        const std::vector<double>& b = d.frame(k);
        std::vector<double> f(a.size());
        for (size_t i = 0; i < a.size(); ++i) f[i] = a[i] + c * b[i];
        out.append(v.times[static_cast<size_t>(k)], std::move(f));
    }
    return out;
}

}  // namespace detail

// Steepest descent v <- v - tau * (F(rho)v - G(rho) grad phi). With armijo on,
// tau backtracks until the sufficient-decrease test holds (and is allowed to
// grow again after clean steps), so objective_history is non-increasing. The
// run counts as converged once the relative objective change drops below
// descent_tol while the gradient norm is small against 1 + ||v||.
inline DescentReport run_descent(const Field& rho0, const ModelSpec& spec,
                                 const SolverConfig& cfg) {
    spec.validate();
    cfg.validate();
    constexpr double kSufficientDecrease = 1e-4;
    constexpr int kMaxBacktracks = 30;

    DescentReport rep;
    Trajectory v = initial_velocity(rho0, spec, cfg);
    // The greedy field scales like the Eikonal slowness 1/f(rho0), so near-jam
    // data push it far outside the envelope where the implicit step is
    // solvable. A starting point whose state equation has no solution is
    // worthless; halve the amplitude until the forward solve accepts it.
    detail::DescentState cur;
    for (int shrink = 0;; ++shrink) {
        try {
            cur = detail::evaluate_iterate(v, rho0, spec, cfg);
            break;
        } catch (const SolverError&) {
            if (shrink >= 60) throw;
            for (int k = 0; k < v.n_frames(); ++k)
                for (double& x : v.frames[static_cast<size_t>(k)]) x *= 0.5;
        }
    }
    rep.objective_history.push_back(cur.objective);
    rep.gradient_norm_history.push_back(cur.gradient_norm);
    rep.step_history.push_back(0.0);

    double tau = cfg.tau;
    const double tau_cap = cfg.tau * 1024.0;

    while (true) {
        const size_t m = rep.objective_history.size();
        const double vnorm = space_time_norm(v);
        const bool stationary = cur.gradient_norm <= 10.0 * cfg.descent_tol * (1.0 + vnorm);
        if (stationary) {
            const double prev = m >= 2 ? rep.objective_history[m - 2] : 0.0;
            const double rel_change =
                m >= 2 ? std::abs(cur.objective - prev) / std::max(std::abs(prev), 1e-300) : 0.0;
            if (m == 1 || rel_change < cfg.descent_tol) {
                rep.converged = true;
                break;
            }
        }
        if (static_cast<int>(m) > cfg.descent_max_iter) break;

        // Backtracking line search along -g; trials only need the forward
        // solve, the adjoint runs once on the accepted iterate.
        const double slope = -space_time_inner(cur.g, cur.g);
        double step = cfg.armijo ? tau : cfg.tau;
        Trajectory v_try, rho_try;
        double obj_try = 0.0;
        bool accepted = false;
        int backtracks = 0;
        for (; backtracks <= kMaxBacktracks; ++backtracks) {
            v_try = detail::axpy(v, -step, cur.g);
            try {
                rho_try = forward_solve(v_try, rho0, spec, cfg);
            } catch (const SolverError&) {
                // The trial control left the envelope where the implicit step
                // is solvable; that is an infinitely bad trial point, so keep
                // backtracking instead of aborting the whole run.
                step *= 0.5;
                continue;
            }
            obj_try = evaluate_objective(rho_try, v_try, spec);
            if (!cfg.armijo || obj_try <= cur.objective + kSufficientDecrease * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no decrease along -g at any tried step: stop where we are
        if (cfg.armijo) tau = (backtracks == 0) ? std::min(step * 2.0, tau_cap) : step;

        v = v_try;
        cur.rho = std::move(rho_try);
        cur.objective = obj_try;
        cur.phi = adjoint_solve(cur.rho, v, spec, cfg);
        cur.g = gradient_field(cur.rho, cur.phi, v, spec);
        cur.gradient_norm = space_time_norm(cur.g);
        rep.objective_history.push_back(cur.objective);
        rep.gradient_norm_history.push_back(cur.gradient_norm);
        rep.step_history.push_back(step);
    }

    rep.rho = cur.rho;
    rep.phi = cur.phi;
    rep.v = v;
    rep.iterations = static_cast<int>(rep.objective_history.size());
    return rep;
}

// Smooth space-time perturbation vanishing at the two boundary cells and at
// the first and last time frames, where the discrete pairing identity does
// not apply (v at t=0 never enters the implicit dynamics, and the terminal
// trapezoid half-weight is folded into the adjoint seed).
inline Trajectory windowed_perturbation(const Grid& grid, const SolverConfig& cfg) {
    const int K = cfg.n_steps();
    const int n = grid.n_cells;
    const double pi = 3.14159265358979323846;
    std::vector<double> w(static_cast<size_t>(n), 0.0);
    for (int i = 2; i + 2 < n; ++i) {
        const double s = static_cast<double>(i - 2) / static_cast<double>(n - 5);
        w[static_cast<size_t>(i)] = std::sin(pi * s) * std::sin(pi * s);
    }
    Trajectory dv = make_trajectory(grid, cfg.dt);
    for (int k = 0; k <= K; ++k) {
        // exact zero at both endpoints; sin(pi) alone leaves ~1e-16 residue
        const double st = (k == 0 || k == K)
                              ? 0.0
                              : std::sin(pi * static_cast<double>(k) / static_cast<double>(K));
        std::vector<double> f(w);
        for (double& x : f) x *= st * st;
        dv.append(k * cfg.dt, std::move(f));
    }
    return dv;
}

// windowed_perturbation modulated by 1 + 0.8 sin(pi (x - c)/L): the plain
// window is even in space, and even probes nearly cancel against the odd
// part of F v - G grad phi, leaving a tiny directional derivative that the
// consistency floor then swamps in relative terms.
inline Trajectory probe_perturbation(const Grid& grid, const SolverConfig& cfg) {
    const double pi = 3.14159265358979323846;
    const double c = 0.5 * (grid.x_min + grid.x_max);
    const double L = 0.5 * (grid.x_max - grid.x_min);
    Trajectory dv = windowed_perturbation(grid, cfg);
    for (int k = 0; k < dv.n_frames(); ++k) {
        std::vector<double>& f = dv.frames[static_cast<size_t>(k)];
        for (int i = 0; i < grid.n_cells; ++i)
            f[static_cast<size_t>(i)] *= 1.0 + 0.8 * std::sin(pi * (grid.center(i) - c) / L);
    }
    return dv;
}

// Greedy field scaled back into the envelope where the implicit scheme is
// second-order clean: h |v| max|F'| <= sigma^2. At full Eikonal strength the
// cell Peclet number reaches ~10 on coarse grids and the consistency floor
// of the pairing identity grows to O(10^-1).
inline Trajectory probe_base_velocity(const Field& rho0, const ModelSpec& spec,
                                      const SolverConfig& cfg) {
    Trajectory v = initial_velocity(rho0, spec, cfg);
    double vmax = 0.0;
    for (double x : v.frame(0)) vmax = std::max(vmax, std::abs(x));
    double fpmax = 0.0;
    for (int s = 0; s <= 32; ++s)
        fpmax = std::max(fpmax, std::abs(eval_mobility_derivative(
                                    spec, MobilityRole::F, spec.rho_max * s / 32.0)));
    const double denom = rho0.grid.h * vmax * fpmax;
    if (spec.sigma > 0.0 && denom > 0.0) {
        const double scale = std::min(1.0, spec.sigma * spec.sigma / denom);
        for (int k = 0; k < v.n_frames(); ++k)
            for (double& x : v.frames[static_cast<size_t>(k)]) x *= scale;
    }
    return v;
}

struct GradientCheckRow {
    double eps = 0.0;
    double finite_difference = 0.0;  // [I(v + eps dv) - I(v - eps dv)] / (2 eps)
    double pairing = 0.0;            // <gradient_field, dv>
    double relative_error = 0.0;
};

// Central-difference validation of the reduced gradient around base_v (the
// Scheme initialization when none is given). Perturbations supported away
// from the time endpoints probe the round-off-exact part of the pairing.
inline std::vector<GradientCheckRow> check_gradient(const Field& rho0, const ModelSpec& spec,
                                                    const SolverConfig& cfg,
                                                    const Trajectory& perturbation,
                                                    const std::vector<double>& steps,
                                                    const Trajectory* base_v = nullptr) {
    Trajectory v = base_v ? *base_v : initial_velocity(rho0, spec, cfg);
    detail::require_aligned(v, perturbation, "check_gradient");

    Trajectory rho = forward_solve(v, rho0, spec, cfg);
    Trajectory phi = adjoint_solve(rho, v, spec, cfg);
    Trajectory g = gradient_field(rho, phi, v, spec);
    const double pairing = space_time_inner(g, perturbation);

    std::vector<GradientCheckRow> table;
    for (double eps : steps) {
        Trajectory vp = detail::axpy(v, eps, perturbation);
        Trajectory vm = detail::axpy(v, -eps, perturbation);
        const double ip = evaluate_objective(forward_solve(vp, rho0, spec, cfg), vp, spec);
        const double im = evaluate_objective(forward_solve(vm, rho0, spec, cfg), vm, spec);
        GradientCheckRow row;
        row.eps = eps;
        row.finite_difference = (ip - im) / (2.0 * eps);
        row.pairing = pairing;
        const double scale =
            std::max({std::abs(row.finite_difference), std::abs(pairing), 1e-300});
        row.relative_error = std::abs(row.finite_difference - pairing) / scale;
        table.push_back(row);
    }
    return table;
}

}  // namespace crowdmfg
