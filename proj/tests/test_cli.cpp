#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#ifndef CROWDMFG_CLI_PATH
#error "CROWDMFG_CLI_PATH must point at the crowd-mfg binary"
#endif

namespace {

const char* kScratch = "cli_test_scratch";

struct ScratchDir {
    ScratchDir() {
        std::filesystem::remove_all(kScratch);
        std::filesystem::create_directories(kScratch);
    }
    ~ScratchDir() { std::filesystem::remove_all(kScratch); }
    std::string operator/(const std::string& name) const {
        return std::string(kScratch) + "/" + name;
    }
};

int run_cli(const std::string& args, const std::string& log) {
    const std::string cmd =
        std::string(CROWDMFG_CLI_PATH) + " " + args + " >" + log + " 2>&1";
    const int ret = std::system(cmd.c_str());
    if (ret == -1) return -1;
    return WIFEXITED(ret) ? WEXITSTATUS(ret) : -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
}

}  // namespace

TEST_CASE("a classical run writes frames, probes and a manifest") {
    ScratchDir dir;
    const std::string cfg = dir / "hughes.cfg";
    write_file(cfg,
               "experiment = hughes\n"
               "grid.n_cells = 60\n"
               "solver.dt = 0.05\n"
               "solver.T = 0.5\n"
               "initial_datum = bump(-0.3, 0.3, 0.6)\n"
               "probes = 0.35\n");
    const std::string out = dir / "out_hughes";
    const int code = run_cli("run " + cfg + " --output-dir " + out, dir / "log.txt");
    CAPTURE(slurp(dir / "log.txt"));
    REQUIRE(code == 0);

    CHECK(std::filesystem::exists(out + "/frames.csv"));
    CHECK(std::filesystem::exists(out + "/probes.csv"));
    CHECK(std::filesystem::exists(out + "/rho.svg"));
    REQUIRE(std::filesystem::exists(out + "/manifest.json"));

    nlohmann::json m = nlohmann::json::parse(slurp(out + "/manifest.json"));
    CHECK(m["experiment"] == "hughes");
    CHECK(m["files"].size() >= 3);
    CHECK(m["wall_time_seconds"].is_number());

    const std::string log = slurp(dir / "log.txt");
    CHECK(log.find("wrote") != std::string::npos);
    CHECK(log.find("manifest.json") != std::string::npos);
}

TEST_CASE("a mean-field run converges and reports its history") {
    ScratchDir dir;
    const std::string cfg = dir / "mfg.cfg";
    write_file(cfg,
               "experiment = mfg\n"
               "grid.n_cells = 50\n"
               "solver.dt = 0.1\n"
               "solver.T = 0.5\n"
               "solver.descent_tol = 5e-3\n"
               "solver.descent_max_iter = 400\n"
               "initial_datum = bump(-0.3, 0.3, 0.5)\n");
    const std::string out = dir / "out_mfg";
    const int code = run_cli("run " + cfg + " --output-dir " + out, dir / "log.txt");
    CAPTURE(slurp(dir / "log.txt"));
    REQUIRE(code == 0);
    CHECK(std::filesystem::exists(out + "/frames.csv"));
    REQUIRE(std::filesystem::exists(out + "/history.csv"));

    std::ifstream hist(out + "/history.csv");
    std::string line;
    REQUIRE(std::getline(hist, line));
    CHECK(line == "iteration,objective,gradient_norm,step");
    int rows = 0;
    while (std::getline(hist, line)) ++rows;
    CHECK(rows >= 1);
}

TEST_CASE("identical runs produce byte-identical outputs") {
    ScratchDir dir;
    const std::string cfg = dir / "o.cfg";
    write_file(cfg,
               "experiment = oracle\n"
               "grid.n_cells = 40\n"
               "solver.dt = 0.1\n"
               "solver.T = 0.5\n"
               "oracle.particles = 2000\n"
               "oracle.dt_sde = 0.01\n"
               "initial_datum = bump(-0.4, 0.4, 0.5)\n");
    const std::string o1 = dir / "a", o2 = dir / "b", o3 = dir / "c";
    REQUIRE(run_cli("run " + cfg + " --output-dir " + o1 + " --seed 5", dir / "l1.txt") == 0);
    REQUIRE(run_cli("run " + cfg + " --output-dir " + o2 + " --seed 5 --threads 3",
                    dir / "l2.txt") == 0);
    REQUIRE(run_cli("run " + cfg + " --output-dir " + o3 + " --seed 6", dir / "l3.txt") == 0);

    CHECK(slurp(o1 + "/empirical.csv") == slurp(o2 + "/empirical.csv"));
    CHECK(slurp(o1 + "/continuum.csv") == slurp(o2 + "/continuum.csv"));
    CHECK(slurp(o1 + "/empirical.csv") != slurp(o3 + "/empirical.csv"));
    CHECK(std::filesystem::exists(o1 + "/discrepancy.csv"));
    CHECK(std::filesystem::exists(o1 + "/summary.csv"));
}

TEST_CASE("bad inputs exit nonzero with a readable message") {
    ScratchDir dir;
    CHECK(run_cli("run " + (dir / "nope.cfg"), dir / "l1.txt") != 0);

    const std::string cfg = dir / "bad.cfg";
    write_file(cfg, "experiment = mfg\ninitial_datum = constant(0.3)\nsolver.dt = -1\n");
    CHECK(run_cli("run " + cfg, dir / "l2.txt") != 0);
    const std::string log = slurp(dir / "l2.txt");
    CHECK(log.find("solver.dt") != std::string::npos);

    CHECK(run_cli("frobnicate", dir / "l3.txt") != 0);
}

TEST_CASE("the gradient check passes on the reference setup") {
    ScratchDir dir;
    const std::string cfg = dir / "gc.cfg";
    write_file(cfg,
               "experiment = mfg\n"
               "grid.n_cells = 50\n"
               "solver.dt = 0.1\n"
               "solver.T = 1.0\n"
               "solver.newton_tol = 1e-10\n"
               "model.mobility = linear_density\n"
               "model.sigma = 0.1\n"
               "model.beta = 1\n"
               "initial_datum = bump(-0.5, 0.5, 0.4)\n");
    const int code = run_cli("check-gradient " + cfg, dir / "log.txt");
    CAPTURE(slurp(dir / "log.txt"));
    CHECK(code == 0);
    const std::string log = slurp(dir / "log.txt");
    CHECK(log.find("eps") != std::string::npos);
}
