#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <crowdmfg/particles.hpp>

using namespace crowdmfg;

namespace {

Trajectory constant_velocity(const Grid& g, double dt, int frames, double value) {
    return constant_trajectory(g, dt, frames, std::vector<double>(static_cast<size_t>(g.n_cells), value));
}

double frame_mass(const Grid& g, const std::vector<double>& f) { return total_mass(g, f); }

}  // namespace

TEST_CASE("frozen particles never move and pay only the exit cost") {
    Grid g = build_grid(-1.0, 1.0, 20);
    ModelSpec spec;
    spec.sigma = 0.0;
    Field rho0(g, 0.5);
    Trajectory v = constant_velocity(g, 0.1, 11, 0.0);
    auto [density, ens] = simulate_particles(v, rho0, spec, 4000, 0.05, 7, ParticleBoundary::AbsorbAtExits);

    for (int k = 1; k < density.n_frames(); ++k) CHECK(density.frame(k) == density.frame(0));
    for (auto a : ens.alive) CHECK(a == 1);
    for (double kin : ens.kinetic_integrals) CHECK(kin == 0.0);
    const double alpha = 3.0;
    CHECK(empirical_cost(ens, v, alpha) == Catch::Approx(0.5 * alpha * 1.0).epsilon(1e-12));
}

TEST_CASE("reflecting walls conserve the empirical mass exactly") {
    Grid g = build_grid(-1.0, 1.0, 30);
    ModelSpec spec;
    spec.sigma = 0.4;
    Field rho0(g, 0.0);
    for (int i = 10; i < 20; ++i) rho0[i] = 0.9;
    const double mass0 = total_mass(g, rho0.values);
    Trajectory v = constant_velocity(g, 0.1, 6, 0.3);
    auto [density, ens] = simulate_particles(v, rho0, spec, 5000, 0.02, 11, ParticleBoundary::ReflectAll);
    for (int k = 0; k < density.n_frames(); ++k)
        CHECK(frame_mass(g, density.frame(k)) == Catch::Approx(mass0).epsilon(1e-12));
    for (auto a : ens.alive) CHECK(a == 1);
}

TEST_CASE("histogram mass equals the surviving fraction of the initial mass") {
    Grid g = build_grid(-1.0, 1.0, 25);
    ModelSpec spec;
    spec.sigma = 0.2;
    Field rho0(g, 0.5);
    const double mass0 = total_mass(g, rho0.values);
    const long N = 6000;
    Trajectory v = constant_velocity(g, 0.1, 11, 0.8);  // steady drift into the right exit
    auto [density, ens] = simulate_particles(v, rho0, spec, N, 0.02, 3, ParticleBoundary::AbsorbAtExits);

    long alive_count = 0;
    for (auto a : ens.alive) alive_count += a;
    CHECK(alive_count < N);  // the drift really evacuates part of the crowd
    const double expected = mass0 * static_cast<double>(alive_count) / static_cast<double>(N);
    CHECK(frame_mass(g, density.frame(density.n_frames() - 1)) ==
          Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("results are bit-identical across repeats and thread counts") {
    Grid g = build_grid(-1.0, 1.0, 20);
    ModelSpec spec;
    spec.sigma = 0.25;
    Field rho0(g, 0.0);
    for (int i = 4; i < 16; ++i) rho0[i] = 0.6;
    Trajectory v = constant_velocity(g, 0.1, 6, 0.4);

    auto [d1, e1] = simulate_particles(v, rho0, spec, 3001, 0.02, 99, ParticleBoundary::AbsorbAtExits, 1);
    auto [d2, e2] = simulate_particles(v, rho0, spec, 3001, 0.02, 99, ParticleBoundary::AbsorbAtExits, 3);
    auto [d3, e3] = simulate_particles(v, rho0, spec, 3001, 0.02, 99, ParticleBoundary::AbsorbAtExits, 1);

    for (int k = 0; k < d1.n_frames(); ++k) {
        CHECK(d1.frame(k) == d2.frame(k));
        CHECK(d1.frame(k) == d3.frame(k));
    }
    CHECK(e1.positions == e2.positions);
    CHECK(e1.exit_times == e2.exit_times);
    CHECK(e1.kinetic_integrals == e2.kinetic_integrals);
    CHECK(e1.alive == e2.alive);

    auto [d4, e4] = simulate_particles(v, rho0, spec, 3001, 0.02, 100, ParticleBoundary::AbsorbAtExits, 1);
    CHECK(e1.positions != e4.positions);  // the seed actually matters
}

TEST_CASE("a ballistic particle exits on schedule with the right path cost") {
    const int n = 40;
    Grid g = build_grid(-1.0, 1.0, n);
    ModelSpec spec;
    spec.sigma = 0.0;
    Field rho0(g, 0.0);
    rho0[n / 2] = 1.0;  // start somewhere in the cell just right of the center
    const double dt_sde = 0.001;
    Trajectory v = constant_velocity(g, 0.1, 31, 0.5);
    auto [density, ens] = simulate_particles(v, rho0, spec, 1, dt_sde, 5, ParticleBoundary::AbsorbAtExits);

    REQUIRE(ens.alive.size() == 1);
    CHECK(ens.alive[0] == 0);
    // started inside cell n/2 = [0, h), so the crossing time is near (1 - x0)/0.5
    const double t_max = (1.0 - 0.0) / 0.5, t_min = (1.0 - g.h) / 0.5;
    CHECK(ens.exit_times[0] >= t_min - 1e-12);
    CHECK(ens.exit_times[0] <= t_max + dt_sde + 1e-12);
    CHECK(ens.kinetic_integrals[0] == Catch::Approx(0.25 * ens.exit_times[0]).epsilon(1e-10));
    const double alpha = 2.0;
    CHECK(empirical_cost(ens, v, alpha) ==
          Catch::Approx(0.5 * ens.kinetic_integrals[0] + 0.5 * alpha * ens.exit_times[0])
              .epsilon(1e-12));
}

TEST_CASE("a uniform crowd between reflecting walls stays uniform in law") {
    const int n = 50;
    Grid g = build_grid(-1.0, 1.0, n);
    ModelSpec spec;
    spec.sigma = 0.3;
    Field rho0(g, 0.5);
    const double mass0 = total_mass(g, rho0.values);
    const long N = 20000;
    Trajectory v = constant_velocity(g, 0.1, 11, 0.0);
    auto [density, ens] = simulate_particles(v, rho0, spec, N, 0.01, 17, ParticleBoundary::ReflectAll);

    const std::vector<double>& last = density.frame(density.n_frames() - 1);
    const double p = 1.0 / static_cast<double>(n);
    double l1 = 0.0, bound = 0.0;
    for (int i = 0; i < n; ++i) {
        l1 += std::abs(last[static_cast<size_t>(i)] - 0.5) * g.h;
        bound += mass0 * std::sqrt(p * (1.0 - p) / static_cast<double>(N));
    }
    CHECK(l1 < 3.0 * bound);
}

TEST_CASE("invalid sampling setups are rejected") {
    Grid g = build_grid(-1.0, 1.0, 10);
    ModelSpec spec;
    Field rho0(g, 0.5);
    Trajectory v = constant_velocity(g, 0.1, 3, 0.0);
    CHECK_THROWS_AS(simulate_particles(v, rho0, spec, 0, 0.01, 1, ParticleBoundary::ReflectAll),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_particles(v, rho0, spec, 10, 0.03, 1, ParticleBoundary::ReflectAll),
                    std::invalid_argument);
    CHECK_THROWS_AS(simulate_particles(v, rho0, spec, 10, -0.01, 1, ParticleBoundary::ReflectAll),
                    std::invalid_argument);
    Field empty(g, 0.0);
    CHECK_THROWS_AS(simulate_particles(v, empty, spec, 10, 0.01, 1, ParticleBoundary::ReflectAll),
                    std::invalid_argument);
    Trajectory one = constant_velocity(g, 0.1, 1, 0.0);
    CHECK_THROWS_AS(simulate_particles(one, rho0, spec, 10, 0.01, 1, ParticleBoundary::ReflectAll),
                    std::invalid_argument);
}
