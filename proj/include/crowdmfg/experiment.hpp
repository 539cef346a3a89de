#pragma once

// Experiment orchestration: builds the grid and initial datum from an
// ExperimentConfig, dispatches to the solvers, and emits CSV/SVG artifacts
// plus a JSON manifest referencing every written file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "config.hpp"
#include "descent.hpp"
#include "errors.hpp"
#include "forward.hpp"
#include "hughes.hpp"
#include "io.hpp"
#include "particles.hpp"

namespace crowdmfg {

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> files;
    std::string failure_message;
};

namespace detail {

inline std::string join_path(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    return dir.back() == '/' ? dir + name : dir + "/" + name;
}

inline std::vector<int> plot_frames(const Trajectory& t) {
    std::vector<int> idx;
    const int n = t.n_frames();
    const int want = std::min(6, n);
    for (int k = 0; k < want; ++k) idx.push_back((k * (n - 1)) / std::max(1, want - 1));
    idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    return idx;
}

inline std::vector<std::pair<std::string, std::string>> manifest_parameters(
    const ExperimentConfig& cfg) {
    auto num = [](double x) { return fmt_g15(x); };
    std::vector<std::pair<std::string, std::string>> p;
    p.emplace_back("grid.x_min", num(cfg.x_min));
    p.emplace_back("grid.x_max", num(cfg.x_max));
    p.emplace_back("grid.n_cells", std::to_string(cfg.n_cells));
    p.emplace_back("model.sigma", num(cfg.model.sigma));
    p.emplace_back("model.beta", num(cfg.model.beta));
    p.emplace_back("model.alpha", num(cfg.model.alpha));
    p.emplace_back("model.a", num(cfg.model.a));
    p.emplace_back("model.rho_max", num(cfg.model.rho_max));
    p.emplace_back("model.mobility", cfg.model.mobility == MobilityPreset::LinearDensity
                                         ? "linear_density"
                                         : cfg.model.mobility == MobilityPreset::HughesCubic
                                               ? "hughes_cubic"
                                               : "custom_tabulated");
    p.emplace_back("model.energy",
                   cfg.model.energy == EnergyPreset::Linear ? "linear" : "exponential");
    p.emplace_back("solver.dt", num(cfg.solver.dt));
    p.emplace_back("solver.T", num(cfg.solver.T));
    p.emplace_back("solver.newton_tol", num(cfg.solver.newton_tol));
    p.emplace_back("solver.tau", num(cfg.solver.tau));
    p.emplace_back("solver.descent_tol", num(cfg.solver.descent_tol));
    p.emplace_back("solver.armijo", cfg.solver.armijo ? "true" : "false");
    return p;
}

// Hughes runs obey an explicit CFL bound, so the configured dt is subdivided
// until the run goes through; recorded frames stay on the configured lattice.
inline HughesRun run_hughes_substepped(const Field& rho0, const ExperimentConfig& cfg) {
    const Grid& grid = rho0.grid;
    double speed = cfg.model.beta;
    {
        Field phi = solve_eikonal(make_eikonal_problem(grid, rho0.values, cfg.model));
        for (double g : cell_gradient(grid, phi.values))
            speed = std::max(speed, std::abs(g) * cfg.model.rho_max * cfg.model.rho_max);
    }
    double dt_safe = 0.45 * grid.h / std::max(speed, 1e-12);
    if (cfg.model.sigma > 0.0)
        dt_safe = std::min(dt_safe, 0.45 * grid.h * grid.h / (cfg.model.sigma * cfg.model.sigma));
    long m = std::max(1L, std::lround(std::ceil(cfg.solver.dt / dt_safe)));

    for (int attempt = 0; attempt < 16; ++attempt) {
        SolverConfig sub = cfg.solver;
        sub.dt = cfg.solver.dt / static_cast<double>(m);
        HughesOptions opts;
        opts.record_every = static_cast<int>(m);
        opts.probe_positions = cfg.probes;
        try {
            return run_hughes(rho0, cfg.model, sub, opts);
        } catch (const SolverError&) {
            m *= 2;  // CFL violated mid-run (speeds grew); retry finer
        }
    }
    throw SolverError("hughes", -1, 0.0, "no stable time step found after 16 refinements");
}

struct MfgArtifacts {
    DescentReport report;
    std::vector<std::string> files;
};

inline MfgArtifacts run_mfg_member(const ExperimentConfig& cfg, const std::string& dir) {
    const Field rho0 = build_initial_datum(cfg);
    MfgArtifacts out;
    out.report = run_descent(rho0, cfg.model, cfg.solver);
    const DescentReport& rep = out.report;

    Trajectory j = make_trajectory(rep.rho.grid, rep.rho.dt);
    for (int k = 0; k < rep.rho.n_frames(); ++k) {
        std::vector<double> jk(rep.rho.frame(k).size());
        for (size_t i = 0; i < jk.size(); ++i)
            jk[i] = eval_mobility(cfg.model, MobilityRole::F, rep.rho.frame(k)[i]) *
                    rep.v.frame(k)[i];
        j.append(rep.rho.times[static_cast<size_t>(k)], std::move(jk));
    }

    const std::string frames = join_path(dir, "frames.csv");
    write_frame_csv(frames, rep.rho, &rep.phi, &rep.v, &j);
    out.files.push_back(frames);
    const std::string history = join_path(dir, "history.csv");
    write_history_csv(history, rep);
    out.files.push_back(history);
    if (!cfg.probes.empty()) {
        const std::string probes = join_path(dir, "probes.csv");
        write_probe_csv(probes, make_probe_series(rep.rho, rep.phi, rep.v, cfg.model, cfg.probes));
        out.files.push_back(probes);
    }
    const std::string svg = join_path(dir, "rho.svg");
    write_svg(svg, rep.rho, plot_frames(rep.rho), "mean-field density");
    out.files.push_back(svg);
    return out;
}

inline std::vector<std::string> run_hughes_member(const ExperimentConfig& cfg,
                                                  const std::string& dir) {
    const Field rho0 = build_initial_datum(cfg);
    HughesRun run = run_hughes_substepped(rho0, cfg);
    std::vector<std::string> files;
    const std::string frames = join_path(dir, "frames.csv");
    write_frame_csv(frames, run.rho, &run.phi);
    files.push_back(frames);
    if (!cfg.probes.empty()) {
        const std::string probes = join_path(dir, "probes.csv");
        write_probe_csv(probes, run.probes);
        files.push_back(probes);
    }
    const std::string svg = join_path(dir, "rho.svg");
    write_svg(svg, run.rho, plot_frames(run.rho), "hughes density");
    files.push_back(svg);
    return files;
}

// Single-frame extract in the standard schema, for cross-run comparisons.
inline std::string write_frame_extract(const std::string& dir, const Trajectory& rho, double t) {
    Trajectory one = make_trajectory(rho.grid, rho.dt);
    one.append(rho.times[static_cast<size_t>(rho.frame_at(t, 1e-6))], rho.frame(rho.frame_at(t, 1e-6)));
    const std::string path = join_path(dir, "frame_t" + fmt_g15(t) + ".csv");
    write_frame_csv(path, one);
    return path;
}

inline std::vector<std::string> run_oracle_member(const ExperimentConfig& cfg,
                                                  const std::string& dir) {
    const Field rho0 = build_initial_datum(cfg);
    const int K = cfg.solver.n_steps();

    Trajectory v;
    if (cfg.oracle_descent_velocity) {
        v = run_descent(rho0, cfg.model, cfg.solver).v;
    } else {
        v = constant_trajectory(rho0.grid, cfg.solver.dt, K + 1,
                                std::vector<double>(static_cast<size_t>(rho0.grid.n_cells), 0.0));
    }

    ModelSpec continuum = cfg.model;
    if (cfg.oracle_mode() == ParticleBoundary::ReflectAll) continuum.beta = 0.0;
    Trajectory rho_cont = forward_solve(v, rho0, continuum, cfg.solver);

    double dt_sde = cfg.dt_sde > 0.0 ? cfg.dt_sde : cfg.solver.dt / 10.0;
    const long sub = std::max(1L, std::lround(cfg.solver.dt / dt_sde));
    dt_sde = cfg.solver.dt / static_cast<double>(sub);
    auto [rho_emp, ensemble] = simulate_particles(v, rho0, cfg.model, cfg.particles, dt_sde,
                                                  cfg.seed, cfg.oracle_mode(), cfg.threads);

    std::vector<std::string> files;
    const std::string cont = join_path(dir, "continuum.csv");
    write_frame_csv(cont, rho_cont);
    files.push_back(cont);
    const std::string emp = join_path(dir, "empirical.csv");
    write_frame_csv(emp, rho_emp);
    files.push_back(emp);

    // Per-frame discrepancy against the binomial sampling bound
    // B = M0 sum_i sqrt(p_i (1 - p_i) / N), p_i from the continuum frame.
    const double mass0 = total_mass(rho0.grid, rho0.values);
    const std::string disc = join_path(dir, "discrepancy.csv");
    {
        std::ofstream out = open_out(disc);
        out << "t,l1_distance,sampling_bound,ratio\n";
        for (int k = 0; k < rho_cont.n_frames(); ++k) {
            double l1 = 0.0, bound = 0.0;
            const double mass_k = total_mass(rho_cont.grid, rho_cont.frame(k));
            for (int i = 0; i < rho_cont.grid.n_cells; ++i) {
                const size_t si = static_cast<size_t>(i);
                l1 += std::abs(rho_emp.frame(k)[si] - rho_cont.frame(k)[si]) * rho_cont.grid.h;
                const double p =
                    std::clamp(rho_cont.frame(k)[si] * rho_cont.grid.h / std::max(mass_k, 1e-300),
                               0.0, 1.0);
                bound += std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.particles));
            }
            bound *= mass0;
            out << fmt_g15(rho_cont.times[static_cast<size_t>(k)]) << ',' << fmt_g15(l1) << ','
                << fmt_g15(bound) << ',' << fmt_g15(bound > 0.0 ? l1 / bound : 0.0) << '\n';
        }
    }
    files.push_back(disc);

    const std::string summary = join_path(dir, "summary.csv");
    {
        long alive = 0;
        for (std::uint8_t a : ensemble.alive) alive += a;
        std::ofstream out = open_out(summary);
        out << "key,value\n";
        out << "particles," << cfg.particles << '\n';
        out << "seed," << cfg.seed << '\n';
        out << "dt_sde," << fmt_g15(dt_sde) << '\n';
        out << "alive_fraction," << fmt_g15(static_cast<double>(alive) /
                                            static_cast<double>(cfg.particles)) << '\n';
        out << "empirical_cost," << fmt_g15(empirical_cost(ensemble, v, cfg.model.alpha)) << '\n';
    }
    files.push_back(summary);
    return files;
}

}  // namespace detail

// Runs the configured experiment, writing everything below cfg.output_dir and
// a manifest referencing each emitted file. Returns nonzero (and writes a
// failure record) when a solver fails or a descent does not converge.
inline RunResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& config_source = "") {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    std::string experiment_name;
    bool converged = true;

    try {
        switch (cfg.experiment) {
            case ExperimentKind::Hughes: {
                experiment_name = "hughes";
                res.files = detail::run_hughes_member(cfg, cfg.output_dir);
                break;
            }
            case ExperimentKind::Mfg: {
                experiment_name = "mfg";
                detail::MfgArtifacts a = detail::run_mfg_member(cfg, cfg.output_dir);
                res.files = a.files;
                converged = a.report.converged;
                if (!converged) res.failure_message = "descent did not converge";
                break;
            }
            case ExperimentKind::Compare: {
                experiment_name = "compare";
                std::vector<std::string> hf =
                    detail::run_hughes_member(cfg, detail::join_path(cfg.output_dir, "hughes"));
                res.files.insert(res.files.end(), hf.begin(), hf.end());
                detail::MfgArtifacts a =
                    detail::run_mfg_member(cfg, detail::join_path(cfg.output_dir, "mfg"));
                res.files.insert(res.files.end(), a.files.begin(), a.files.end());
                converged = a.report.converged;
                if (!converged) res.failure_message = "descent did not converge";
                break;
            }
            case ExperimentKind::BetaSweep: {
                experiment_name = "beta_sweep";
                const size_t n = cfg.betas.size();
                std::vector<detail::MfgArtifacts> arts(n);
                std::vector<std::string> errors(n);
                std::vector<std::thread> pool;
                for (size_t b = 0; b < n; ++b) {
                    pool.emplace_back([&, b]() {
                        try {
                            ExperimentConfig member = cfg;
                            member.model.beta = cfg.betas[b];
                            arts[b] = detail::run_mfg_member(
                                member, detail::join_path(cfg.output_dir,
                                                          "beta_" + detail::fmt_g15(cfg.betas[b])));
                        } catch (const std::exception& e) {
                            errors[b] = e.what();
                        }
                    });
                }
                for (std::thread& th : pool) th.join();
                for (size_t b = 0; b < n; ++b) {
                    if (!errors[b].empty()) throw std::runtime_error(errors[b]);
                    res.files.insert(res.files.end(), arts[b].files.begin(), arts[b].files.end());
                    if (!arts[b].report.converged) {
                        converged = false;
                        res.failure_message = "descent did not converge for beta = " +
                                              detail::fmt_g15(cfg.betas[b]);
                    }
                    const std::string dir =
                        detail::join_path(cfg.output_dir, "beta_" + detail::fmt_g15(cfg.betas[b]));
                    for (double t : cfg.compare_times)
                        res.files.push_back(detail::write_frame_extract(dir, arts[b].report.rho, t));
                }
                break;
            }
            case ExperimentKind::EnergyCompare: {
                experiment_name = "energy_compare";
                std::vector<detail::MfgArtifacts> arts(2);
                std::vector<std::string> errors(2);
                std::vector<std::thread> pool;
                const char* names[2] = {"energy_linear", "energy_exponential"};
                for (int m = 0; m < 2; ++m) {
                    pool.emplace_back([&, m]() {
                        try {
                            ExperimentConfig member = cfg;
                            member.model.energy =
                                m == 0 ? EnergyPreset::Linear : EnergyPreset::Exponential;
                            arts[static_cast<size_t>(m)] = detail::run_mfg_member(
                                member, detail::join_path(cfg.output_dir, names[m]));
                        } catch (const std::exception& e) {
                            errors[static_cast<size_t>(m)] = e.what();
                        }
                    });
                }
                for (std::thread& th : pool) th.join();
                for (int m = 0; m < 2; ++m) {
                    if (!errors[static_cast<size_t>(m)].empty())
                        throw std::runtime_error(errors[static_cast<size_t>(m)]);
                    const detail::MfgArtifacts& a = arts[static_cast<size_t>(m)];
                    res.files.insert(res.files.end(), a.files.begin(), a.files.end());
                    if (!a.report.converged) {
                        converged = false;
                        res.failure_message = std::string("descent did not converge for ") +
                                              names[m];
                    }
                }
                const std::string mass_path = detail::join_path(cfg.output_dir,
                                                                "remaining_mass.csv");
                {
                    std::ofstream out = detail::open_out(mass_path);
                    out << "t,mass_linear,mass_exponential\n";
                    const Trajectory& rl = arts[0].report.rho;
                    const Trajectory& re = arts[1].report.rho;
                    for (int k = 0; k < rl.n_frames(); ++k)
                        out << detail::fmt_g15(rl.times[static_cast<size_t>(k)]) << ','
                            << detail::fmt_g15(total_mass(rl.grid, rl.frame(k))) << ','
                            << detail::fmt_g15(total_mass(re.grid, re.frame(k))) << '\n';
                }
                res.files.push_back(mass_path);
                break;
            }
            case ExperimentKind::Oracle: {
                experiment_name = "oracle";
                res.files = detail::run_oracle_member(cfg, cfg.output_dir);
                break;
            }
        }
    } catch (const SolverError& e) {
        const std::string rec = detail::join_path(cfg.output_dir, "failure.json");
        write_failure_record(rec, e.component, e.iteration, e.residual, e.what());
        res.files.push_back(rec);
        res.exit_code = 2;
        res.failure_message = e.what();
    } catch (const std::exception& e) {
        const std::string rec = detail::join_path(cfg.output_dir, "failure.json");
        write_failure_record(rec, "experiment", -1, 0.0, e.what());
        res.files.push_back(rec);
        res.exit_code = 2;
        res.failure_message = e.what();
    }

    if (res.exit_code == 0 && !converged) {
        const std::string rec = detail::join_path(cfg.output_dir, "failure.json");
        write_failure_record(rec, "descent", -1, 0.0, res.failure_message);
        res.files.push_back(rec);
        res.exit_code = 1;
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string manifest = detail::join_path(cfg.output_dir, "manifest.json");
    std::vector<std::pair<std::string, std::string>> inputs;
    inputs.emplace_back("config", config_source);
    inputs.emplace_back("seed", std::to_string(cfg.seed));
    inputs.emplace_back("threads", std::to_string(cfg.threads));
    std::vector<std::string> listed = res.files;
    write_manifest(manifest, experiment_name, detail::manifest_parameters(cfg), inputs, listed,
                   wall);
    res.files.push_back(manifest);
    return res;
}

}  // namespace crowdmfg
