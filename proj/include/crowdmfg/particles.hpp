#pragma once

// Stochastic-particle oracle: Euler-Maruyama integration of
//   dX = v(X, t) dt + sigma dW
// against the cell-centered velocity trajectory (piecewise constant in time,
// linear in space). Two boundary modes bracket the Robin exits of the
// continuum model: reflect-all (beta = 0) and absorb-at-exits (beta -> inf).
//
// Reproducibility: every particle owns an mt19937_64 seeded by a splitmix64
// hash of (seed, particle index), and Gaussian increments come from an
// explicit Box-Muller transform. Output is therefore bit-identical for a
// fixed seed regardless of how particles are partitioned across threads.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "grid.hpp"
#include "model.hpp"

namespace crowdmfg {

enum class ParticleBoundary { ReflectAll, AbsorbAtExits };

struct ParticleEnsemble {
    std::vector<double> positions;          // final position (last value before exit if absorbed)
    std::vector<std::uint8_t> alive;        // 1 while inside the domain at t = T
    std::vector<double> exit_times;         // recorded exit time; horizon T for survivors
    std::vector<double> kinetic_integrals;  // int_0^{min(T_exit, T)} |v(X(t), t)|^2 dt
    std::uint64_t seed = 0;
    double sigma = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t particle_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 1));
}

inline double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw in (0, 1); never returns 0, so log() below is safe.
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
}

inline double gaussian(std::mt19937_64& rng) {
    const double u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Linear interpolation between cell centers, constant beyond the outer ones.
inline double sample_linear(const Grid& grid, const std::vector<double>& cells, double x) {
    const int n = grid.n_cells;
    if (n == 1) return cells[0];
    const double s = (x - grid.center(0)) / grid.h;
    if (s <= 0.0) return cells[0];
    if (s >= n - 1) return cells[static_cast<size_t>(n - 1)];
    const int i = static_cast<int>(s);
    const double w = s - i;
    return (1.0 - w) * cells[static_cast<size_t>(i)] + w * cells[static_cast<size_t>(i + 1)];
}

}  // namespace detail

// Runs N particles from a sample of rho0 up to the horizon of v, recording an
// empirical density frame on the time lattice of v (histogram over the grid,
// normalized so sum rho_i h = alive fraction x initial mass). dt_sde must
// divide the frame spacing v.dt.
inline std::pair<Trajectory, ParticleEnsemble> simulate_particles(
    const Trajectory& v, const Field& rho0, const ModelSpec& spec, long n_particles,
    double dt_sde, std::uint64_t seed, ParticleBoundary mode, int n_threads = 1) {
    const Grid& grid = rho0.grid;
    if (!(grid == v.grid))
        throw std::invalid_argument("simulate_particles: v and rho0 live on different grids");
    if (n_particles < 1) throw std::invalid_argument("simulate_particles: need N >= 1");
    if (!(dt_sde > 0.0)) throw std::invalid_argument("simulate_particles: dt_sde must be > 0");
    if (v.n_frames() < 2) throw std::invalid_argument("simulate_particles: v needs >= 2 frames");
    const long sub_steps = std::lround(v.dt / dt_sde);
    if (sub_steps < 1 || std::abs(sub_steps * dt_sde - v.dt) > 1e-9 * v.dt)
        throw std::invalid_argument("simulate_particles: dt_sde must divide the frame spacing");
    const double mass0 = total_mass(grid, rho0.values);
    if (!(mass0 > 0.0))
        throw std::invalid_argument("simulate_particles: initial density carries no mass");

    // Cell CDF for inverse-transform sampling of the initial positions.
    const int n = grid.n_cells;
    std::vector<double> cdf(static_cast<size_t>(n), 0.0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += std::max(rho0.values[static_cast<size_t>(i)], 0.0) * grid.h;
        cdf[static_cast<size_t>(i)] = acc / mass0;
    }
    cdf[static_cast<size_t>(n - 1)] = 1.0;

    const int n_frames = v.n_frames();
    const bool absorb_left = mode == ParticleBoundary::AbsorbAtExits && grid.left == BoundaryTag::Exit;
    const bool absorb_right = mode == ParticleBoundary::AbsorbAtExits && grid.right == BoundaryTag::Exit;
    const double horizon = v.times.back();

    ParticleEnsemble ens;
    ens.positions.assign(static_cast<size_t>(n_particles), 0.0);
    ens.alive.assign(static_cast<size_t>(n_particles), 1);
    ens.exit_times.assign(static_cast<size_t>(n_particles), horizon);
    ens.kinetic_integrals.assign(static_cast<size_t>(n_particles), 0.0);
    ens.seed = seed;
    ens.sigma = spec.sigma;

    // Per-thread integer histograms, one row per recorded frame; summed after
    // the join, so counts do not depend on the partitioning.
    if (n_threads < 1) n_threads = 1;
    if (static_cast<long>(n_threads) > n_particles) n_threads = static_cast<int>(n_particles);
    std::vector<std::vector<std::vector<long>>> counts(
        static_cast<size_t>(n_threads),
        std::vector<std::vector<long>>(static_cast<size_t>(n_frames),
                                       std::vector<long>(static_cast<size_t>(n), 0)));

    auto worker = [&](int tid, long lo, long hi) {
        std::vector<std::vector<long>>& hist = counts[static_cast<size_t>(tid)];
        for (long p = lo; p < hi; ++p) {
            std::mt19937_64 rng(detail::particle_seed(seed, static_cast<std::uint64_t>(p)));

            // Initial position: pick the cell by the CDF, then uniform in it.
            const double u = detail::uniform01(rng);
            int cell = 0;
            while (cell + 1 < n && cdf[static_cast<size_t>(cell)] < u) ++cell;
            double x = grid.x_min + cell * grid.h + detail::uniform01(rng) * grid.h;

            bool alive = true;
            double kinetic = 0.0;
            hist[0][static_cast<size_t>(grid.nearest_cell(x))] += 1;

            for (int k = 0; k + 1 < n_frames && alive; ++k) {
                const std::vector<double>& vk = v.frame(k);
                for (long s = 0; s < sub_steps; ++s) {
                    const double vel = detail::sample_linear(grid, vk, x);
                    kinetic += vel * vel * dt_sde;
                    x += vel * dt_sde + spec.sigma * std::sqrt(dt_sde) * detail::gaussian(rng);
                    if ((absorb_left && x <= grid.x_min) || (absorb_right && x >= grid.x_max)) {
                        alive = false;
                        ens.exit_times[static_cast<size_t>(p)] =
                            v.times[static_cast<size_t>(k)] + (s + 1) * dt_sde;
                        break;
                    }
                    while (x < grid.x_min || x > grid.x_max) {
                        if (x < grid.x_min) x = 2.0 * grid.x_min - x;
                        if (x > grid.x_max) x = 2.0 * grid.x_max - x;
                    }
                }
                if (alive) hist[static_cast<size_t>(k + 1)][static_cast<size_t>(grid.nearest_cell(x))] += 1;
            }
            ens.positions[static_cast<size_t>(p)] = x;
            ens.alive[static_cast<size_t>(p)] = alive ? 1 : 0;
            ens.kinetic_integrals[static_cast<size_t>(p)] = kinetic;
        }
    };

    if (n_threads == 1) {
        worker(0, 0, n_particles);
    } else {
        std::vector<std::thread> pool;
        const long chunk = (n_particles + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            const long lo = t * chunk, hi = std::min<long>(n_particles, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back(worker, t, lo, hi);
        }
        for (std::thread& th : pool) th.join();
    }

    Trajectory density = make_trajectory(grid, v.dt);
    const double scale = mass0 / (static_cast<double>(n_particles) * grid.h);
    for (int k = 0; k < n_frames; ++k) {
        std::vector<double> frame(static_cast<size_t>(n), 0.0);
        for (int t = 0; t < n_threads; ++t)
            for (int i = 0; i < n; ++i)
                frame[static_cast<size_t>(i)] +=
                    static_cast<double>(counts[static_cast<size_t>(t)][static_cast<size_t>(k)]
                                              [static_cast<size_t>(i)]);
        for (double& c : frame) c *= scale;
        density.append(v.times[static_cast<size_t>(k)], std::move(frame));
    }
    return {std::move(density), std::move(ens)};
}

// Monte Carlo estimate of the microscopic cost: mean over particles of
// 1/2 int |v|^2 dt + (alpha/2) T_exit, survivors truncated at the horizon.
// The path integral was accumulated during simulation; v only fixes the
// horizon for the survivors.
inline double empirical_cost(const ParticleEnsemble& ens, const Trajectory& v, double alpha) {
    if (ens.positions.empty()) throw std::invalid_argument("empirical_cost: empty ensemble");
    const double horizon = v.times.back();
    double s = 0.0;
    for (size_t p = 0; p < ens.positions.size(); ++p) {
        const double t_exit = ens.alive[p] ? horizon : ens.exit_times[p];
        s += 0.5 * ens.kinetic_integrals[p] + 0.5 * alpha * t_exit;
    }
    return s / static_cast<double>(ens.positions.size());
}

}  // namespace crowdmfg
