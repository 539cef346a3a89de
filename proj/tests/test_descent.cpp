#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <crowdmfg/descent.hpp>

using namespace crowdmfg;

namespace {

Field gaussian_bump(const Grid& g, double height, double center, double width) {
    std::vector<double> r(static_cast<size_t>(g.n_cells));
    for (int i = 0; i < g.n_cells; ++i) {
        const double x = g.center(i) - center;
        r[static_cast<size_t>(i)] = height * std::exp(-x * x / (width * width));
    }
    return Field(g, std::move(r));
}

}  // namespace

TEST_CASE("an empty room is optimal immediately") {
    Grid g = build_grid(-1.0, 1.0, 30);
    ModelSpec spec;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 1.0;
    Field rho0(g, 0.0);
    DescentReport rep = run_descent(rho0, spec, cfg);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    REQUIRE(rep.objective_history.size() == 1);
    CHECK(rep.objective_history[0] == 0.0);
    CHECK(rep.gradient_norm_history[0] == 0.0);
    CHECK(rep.step_history[0] == 0.0);
}

TEST_CASE("walls with no exit start from a resting control") {
    Grid g = build_grid(-1.0, 1.0, 20, BoundaryTag::Wall, BoundaryTag::Wall);
    ModelSpec spec;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 0.5;
    Field rho0(g, 0.3);
    Trajectory v = initial_velocity(rho0, spec, cfg);
    for (int k = 0; k < v.n_frames(); ++k)
        for (double x : v.frame(k)) CHECK(x == 0.0);
}

TEST_CASE("line search keeps the objective non-increasing") {
    Grid g = build_grid(-1.0, 1.0, 50);
    ModelSpec spec;
    spec.mobility = MobilityPreset::HughesCubic;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 1.0;
    cfg.descent_tol = 1e-10;  // force the loop to run out its budget
    cfg.descent_max_iter = 12;
    Field rho0 = gaussian_bump(g, 0.7, 0.2, 0.3);
    DescentReport rep = run_descent(rho0, spec, cfg);

    const auto& obj = rep.objective_history;
    REQUIRE(obj.size() >= 2);
    CHECK(obj.size() == rep.gradient_norm_history.size());
    CHECK(obj.size() == rep.step_history.size());
    CHECK(static_cast<int>(obj.size()) == rep.iterations);
    for (size_t k = 1; k < obj.size(); ++k) CHECK(obj[k] <= obj[k - 1] + 1e-12);
    CHECK(obj.back() < obj.front());
    for (size_t k = 1; k < rep.step_history.size(); ++k) CHECK(rep.step_history[k] > 0.0);
}

TEST_CASE("converged runs satisfy the stationarity bound") {
    Grid g = build_grid(-1.0, 1.0, 40);
    ModelSpec spec;
    spec.mobility = MobilityPreset::HughesCubic;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 1.0;
    cfg.descent_tol = 1e-3;
    cfg.descent_max_iter = 400;
    Field rho0 = gaussian_bump(g, 0.5, 0.0, 0.35);
    DescentReport rep = run_descent(rho0, spec, cfg);
    REQUIRE(rep.converged);
    const double vnorm = space_time_norm(rep.v);
    CHECK(rep.gradient_norm_history.back() <= 10.0 * cfg.descent_tol * (1.0 + vnorm));
    CHECK(rep.rho.n_frames() == cfg.n_steps() + 1);
    CHECK(rep.phi.n_frames() == cfg.n_steps() + 1);
    CHECK(rep.v.n_frames() == cfg.n_steps() + 1);
}

TEST_CASE("a symmetric room keeps a symmetric optimum") {
    const int n = 48;
    Grid g = build_grid(-1.0, 1.0, n);
    ModelSpec spec;
    spec.mobility = MobilityPreset::HughesCubic;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 1.0;
    cfg.descent_max_iter = 10;
    cfg.descent_tol = 1e-10;
    Field rho0 = gaussian_bump(g, 0.6, 0.0, 0.3);
    DescentReport rep = run_descent(rho0, spec, cfg);
    for (int k = 0; k < rep.rho.n_frames(); ++k) {
        const std::vector<double>& r = rep.rho.frame(k);
        const std::vector<double>& v = rep.v.frame(k);
        for (int i = 0; i < n / 2; ++i) {
            CHECK(std::abs(r[static_cast<size_t>(i)] - r[static_cast<size_t>(n - 1 - i)]) < 1e-7);
            CHECK(std::abs(v[static_cast<size_t>(i)] + v[static_cast<size_t>(n - 1 - i)]) < 1e-7);
        }
    }
}

TEST_CASE("fixed-step mode uses the configured step every iteration") {
    Grid g = build_grid(-1.0, 1.0, 30);
    ModelSpec spec;
    SolverConfig cfg;
    cfg.dt = 0.1;
    cfg.T = 0.5;
    cfg.armijo = false;
    cfg.tau = 0.01;
    cfg.descent_max_iter = 4;
    cfg.descent_tol = 1e-12;
    Field rho0 = gaussian_bump(g, 0.4, 0.1, 0.3);
    DescentReport rep = run_descent(rho0, spec, cfg);
    REQUIRE(rep.step_history.size() >= 2);
    for (size_t k = 1; k < rep.step_history.size(); ++k)
        CHECK(rep.step_history[k] == cfg.tau);
}
