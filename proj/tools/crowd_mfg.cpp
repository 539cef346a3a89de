// crowd-mfg: command line front end.
//
//   crowd-mfg run <config> [--output-dir DIR] [--seed N] [--threads N]
//   crowd-mfg check-gradient <config>

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include <crowdmfg/crowdmfg.hpp>

namespace {

int cmd_run(const std::string& config_path, const std::string& output_dir, long seed_override,
            int threads_override) {
    crowdmfg::ExperimentConfig cfg = crowdmfg::load_config_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (threads_override > 0) cfg.threads = threads_override;

    crowdmfg::RunResult res = crowdmfg::run_experiment(cfg, config_path);
    for (const std::string& f : res.files) std::printf("wrote %s\n", f.c_str());
    if (res.exit_code != 0)
        std::fprintf(stderr, "run failed: %s\n", res.failure_message.c_str());
    return res.exit_code;
}

int cmd_check_gradient(const std::string& config_path) {
    crowdmfg::ExperimentConfig cfg = crowdmfg::load_config_file(config_path);
    const crowdmfg::Field rho0 = crowdmfg::build_initial_datum(cfg);
    const crowdmfg::Trajectory dv = crowdmfg::probe_perturbation(rho0.grid, cfg.solver);
    const crowdmfg::Trajectory base = crowdmfg::probe_base_velocity(rho0, cfg.model, cfg.solver);
    const std::vector<double> steps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};

    const auto table = crowdmfg::check_gradient(rho0, cfg.model, cfg.solver, dv, steps, &base);
    std::printf("%-12s %-22s %-22s %-12s\n", "eps", "finite_difference", "pairing", "rel_error");
    double best = 1.0;
    for (const crowdmfg::GradientCheckRow& row : table) {
        std::printf("%-12.3e %-22.15e %-22.15e %-12.3e\n", row.eps, row.finite_difference,
                    row.pairing, row.relative_error);
        best = std::min(best, row.relative_error);
    }
    if (best >= 1e-3) {
        std::fprintf(stderr, "gradient check failed: best relative error %.3e >= 1e-3\n", best);
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"macroscopic fast-exit crowd dynamics: mean-field optimal control solvers"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    long seed = -1;
    int threads = 0;

    CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--output-dir", output_dir, "override output_dir from the config");
    run->add_option("--seed", seed, "override the oracle RNG seed");
    run->add_option("--threads", threads, "override the worker thread count");

    std::string cg_config;
    CLI::App* cg = app.add_subcommand("check-gradient",
                                      "finite-difference validation of the reduced gradient");
    cg->add_option("config", cg_config, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, output_dir, seed, threads);
        return cmd_check_gradient(cg_config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
