#pragma once

// Classical Hughes baseline: the density follows the conservative flux
// -rho f(rho)^2 dphi/dx plus sigma^2/2 diffusion, with phi re-solved from the
// Eikonal equation (cost 1/f(rho)) before every explicit step. The advective
// face flux is an Engquist-Osher splitting of g(rho) = rho f(rho)^2, which is
// monotone and therefore keeps rho inside [0, rho_max] under the CFL bound.

#include <algorithm>
#include <cmath>
#include <vector>

#include "eikonal.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "solver_config.hpp"

namespace crowdmfg {

namespace detail {

// g(rho) = rho f(rho)^2 and its increasing/decreasing envelope split at the
// critical point rho_max/3. Outside [0, rho_max] g is extended by zero.
inline double hughes_g(const ModelSpec& s, double rho) {
    if (rho < 0.0 || rho > s.rho_max) return 0.0;
    const double f = s.rho_max - rho;
    return rho * f * f;
}

inline double hughes_g_up(const ModelSpec& s, double rho) {
    const double rc = s.rho_max / 3.0;
    return hughes_g(s, std::clamp(rho, 0.0, rc));
}

inline double hughes_g_down(const ModelSpec& s, double rho) {
    const double rc = s.rho_max / 3.0;
    return hughes_g(s, std::clamp(rho, rc, s.rho_max)) - hughes_g(s, rc);
}

// Engquist-Osher numerical flux for w * g(rho) at a face with left/right
// states (rl, rr); monotone in both arguments for either sign of w.
inline double hughes_eo_flux(const ModelSpec& s, double w, double rl, double rr) {
    if (w >= 0.0) return w * (hughes_g_up(s, rl) + hughes_g_down(s, rr));
    return w * (hughes_g_down(s, rl) + hughes_g_up(s, rr));
}

}  // namespace detail

// One explicit step of duration dt. phi is the current Eikonal solution on the
// same grid. Throws SolverError when dt violates the CFL bound (never clips).
inline std::vector<double> hughes_step(const Grid& grid, const std::vector<double>& rho,
                                       const std::vector<double>& phi, const ModelSpec& spec,
                                       double dt, long step_index = -1) {
    const int n = grid.n_cells;
    const double h = grid.h;
    const double nu = 0.5 * spec.sigma * spec.sigma;

    // Geometric face velocity factor w = -dphi/dx; wave speeds are bounded by
    // |w| * max|g'| with max|g'| = rho_max^2 attained at vacuum.
    double w_abs_max = 0.0;
    std::vector<double> w(static_cast<size_t>(n + 1), 0.0);
    for (int f = 1; f < n; ++f) {
        w[static_cast<size_t>(f)] =
            -(phi[static_cast<size_t>(f)] - phi[static_cast<size_t>(f - 1)]) / h;
        w_abs_max = std::max(w_abs_max, std::abs(w[static_cast<size_t>(f)]));
    }
    const double g_slope = spec.rho_max * spec.rho_max;
    const double speed = std::max(w_abs_max * g_slope, grid.has_exit() ? spec.beta : 0.0);
    const double dt_adv = speed > 0.0 ? h / (2.0 * speed) : std::numeric_limits<double>::infinity();
    const double dt_diff =
        spec.sigma > 0.0 ? h * h / (2.0 * spec.sigma * spec.sigma)
                         : std::numeric_limits<double>::infinity();
    const double dt_max = std::min(dt_adv, dt_diff);
    if (dt > dt_max)
        throw SolverError("hughes", step_index, dt,
                          "CFL violation: dt > " + std::to_string(dt_max));

    // Total face fluxes; walls carry none, exits drain beta * rho of the
    // adjacent cell (the Robin closure, advection and diffusion combined).
    std::vector<double> flux(static_cast<size_t>(n + 1), 0.0);
    for (int f = 1; f < n; ++f) {
        const double rl = rho[static_cast<size_t>(f - 1)], rr = rho[static_cast<size_t>(f)];
        flux[static_cast<size_t>(f)] =
            detail::hughes_eo_flux(spec, w[static_cast<size_t>(f)], rl, rr) - nu * (rr - rl) / h;
    }
    if (grid.left == BoundaryTag::Exit) flux[0] = -spec.beta * rho[0];
    if (grid.right == BoundaryTag::Exit)
        flux[static_cast<size_t>(n)] = spec.beta * rho[static_cast<size_t>(n - 1)];

    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] =
            rho[static_cast<size_t>(i)] -
            dt / h * (flux[static_cast<size_t>(i + 1)] - flux[static_cast<size_t>(i)]);
    return out;
}

struct ProbeSeries {
    std::vector<double> positions;            // requested probe locations
    std::vector<double> times;
    // channel -> [time][probe]; channels are rho, phi, v, j as available
    std::vector<std::vector<double>> rho, phi, v, j;
};

struct HughesRun {
    Trajectory rho;
    Trajectory phi;
    ProbeSeries probes;
};

struct HughesOptions {
    int record_every = 1;                  // frame recording stride (probes record every step)
    std::vector<double> probe_positions;
};

// Alternates Eikonal solve and explicit step from t = 0 to cfg.T.
inline HughesRun run_hughes(const Field& rho0, const ModelSpec& spec, const SolverConfig& cfg,
                            const HughesOptions& opts = {}) {
    spec.validate();
    const Grid& grid = rho0.grid;
    const long steps = static_cast<long>(std::llround(cfg.T / cfg.dt));
    if (steps < 1 || std::abs(steps * cfg.dt - cfg.T) > 1e-9 * std::max(1.0, cfg.T))
        throw std::invalid_argument("run_hughes: T must be a positive multiple of dt");
    const int stride = std::max(1, opts.record_every);

    HughesRun run;
    run.rho = make_trajectory(grid, cfg.dt * stride);
    run.phi = make_trajectory(grid, cfg.dt * stride);
    run.probes.positions = opts.probe_positions;
    const size_t np = opts.probe_positions.size();
    std::vector<int> probe_cells(np);
    for (size_t p = 0; p < np; ++p) probe_cells[p] = grid.nearest_cell(opts.probe_positions[p]);

    std::vector<double> rho = rho0.values;
    Field phi = solve_eikonal(make_eikonal_problem(grid, rho, spec));

    auto record_probes = [&](double t) {
        if (np == 0) return;
        run.probes.times.push_back(t);
        const auto grad = cell_gradient(grid, phi.values);
        std::vector<double> pr(np), pp(np), pv(np), pj(np);
        for (size_t p = 0; p < np; ++p) {
            const int i = probe_cells[p];
            const double f = hughes_f(spec, rho[static_cast<size_t>(i)]);
            const double vel = -f * f * grad[static_cast<size_t>(i)];
            pr[p] = rho[static_cast<size_t>(i)];
            pp[p] = phi[i];
            pv[p] = vel;
            pj[p] = rho[static_cast<size_t>(i)] * vel;
        }
        run.probes.rho.push_back(std::move(pr));
        run.probes.phi.push_back(std::move(pp));
        run.probes.v.push_back(std::move(pv));
        run.probes.j.push_back(std::move(pj));
    };

    run.rho.append(0.0, rho);
    run.phi.append(0.0, phi.values);
    record_probes(0.0);

    for (long k = 0; k < steps; ++k) {
        rho = hughes_step(grid, rho, phi.values, spec, cfg.dt, k);
        phi = solve_eikonal(make_eikonal_problem(grid, rho, spec));
        const double t = (k + 1) * cfg.dt;
        record_probes(t);
        if ((k + 1) % stride == 0) {
            run.rho.append(t, rho);
            run.phi.append(t, phi.values);
        }
    }
    return run;
}

}  // namespace crowdmfg
