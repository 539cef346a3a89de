#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <queue>
#include <random>
#include <vector>

#include <crowdmfg/eikonal.hpp>

using namespace crowdmfg;

namespace {

// Independent shortest-path oracle on the same update graph the sweeping
// solver relaxes: entering cell i costs h * cost_i from either neighbor, and
// an exit endpoint seeds its boundary cell at half that distance.
std::vector<double> dijkstra_oracle(const EikonalProblem& p) {
    const int n = p.grid.n_cells;
    const double h = p.grid.h;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<size_t>(n), inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> q;
    if (p.exit_left) {
        dist[0] = 0.5 * h * p.cost[0];
        q.emplace(dist[0], 0);
    }
    if (p.exit_right) {
        const size_t last = static_cast<size_t>(n - 1);
        if (0.5 * h * p.cost[last] < dist[last]) dist[last] = 0.5 * h * p.cost[last];
        q.emplace(dist[last], n - 1);
    }
    while (!q.empty()) {
        const auto [d, i] = q.top();
        q.pop();
        if (d > dist[static_cast<size_t>(i)]) continue;
        for (int j : {i - 1, i + 1}) {
            if (j < 0 || j >= n) continue;
            const double nd = d + h * p.cost[static_cast<size_t>(j)];
            if (nd < dist[static_cast<size_t>(j)]) {
                dist[static_cast<size_t>(j)] = nd;
                q.emplace(nd, j);
            }
        }
    }
    return dist;
}

}  // namespace

TEST_CASE("unit cost reproduces the distance to the nearest exit exactly") {
    for (int n : {100, 200, 400}) {
        Grid g = build_grid(-1.0, 1.0, n);
        EikonalProblem p;
        p.grid = g;
        p.cost.assign(static_cast<size_t>(n), 1.0);
        p.exit_left = p.exit_right = true;
        int sweeps = -1;
        Field phi = solve_eikonal(p, &sweeps);
        double err = 0.0;
        for (int i = 0; i < n; ++i)
            err = std::max(err, std::abs(phi[i] - (1.0 - std::abs(g.center(i)))));
        CHECK(err < 1e-13);
        CHECK(sweeps <= 2);
    }
}

TEST_CASE("random costs agree with the shortest-path oracle") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.2, 5.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 60);
        const bool left = trial % 3 != 0;
        const bool right = trial % 3 != 1;
        Grid g = build_grid(-1.0, 1.0, n, left ? BoundaryTag::Exit : BoundaryTag::Wall,
                            right ? BoundaryTag::Exit : BoundaryTag::Wall);
        EikonalProblem p;
        p.grid = g;
        p.exit_left = left;
        p.exit_right = right;
        p.cost.resize(static_cast<size_t>(n));
        for (double& c : p.cost) c = u(rng);

        Field phi = solve_eikonal(p);
        const std::vector<double> oracle = dijkstra_oracle(p);
        for (int i = 0; i < n; ++i)
            CHECK(phi[i] == Catch::Approx(oracle[static_cast<size_t>(i)]).epsilon(1e-13));
    }
}

TEST_CASE("single exit gives a monotone potential") {
    const int n = 50;
    Grid g = build_grid(-1.0, 1.0, n, BoundaryTag::Exit, BoundaryTag::Wall);
    EikonalProblem p;
    p.grid = g;
    p.exit_left = true;
    p.exit_right = false;
    p.cost.assign(static_cast<size_t>(n), 2.0);
    Field phi = solve_eikonal(p);
    for (int i = 1; i < n; ++i) CHECK(phi[i] > phi[i - 1]);
    CHECK(phi[0] == Catch::Approx(0.5 * g.h * 2.0));
}

TEST_CASE("problem construction from a density field") {
    Grid g = build_grid(-1.0, 1.0, 10);
    std::vector<double> rho(10, 0.5);
    ModelSpec spec;
    EikonalProblem p = make_eikonal_problem(g, rho, spec);
    CHECK(p.exit_left);
    CHECK(p.exit_right);
    CHECK(p.cost[0] == Catch::Approx(2.0));  // 1 / (1 - 0.5)

    // Saturated density hits the slowness cap instead of dividing by zero.
    rho.assign(10, 1.0);
    p = make_eikonal_problem(g, rho, spec);
    CHECK(p.cost[0] == Catch::Approx(1e6));
}

TEST_CASE("invalid problems are rejected") {
    Grid g = build_grid(-1.0, 1.0, 5, BoundaryTag::Wall, BoundaryTag::Wall);
    EikonalProblem p;
    p.grid = g;
    p.cost.assign(5, 1.0);
    p.exit_left = p.exit_right = false;
    CHECK_THROWS_AS(solve_eikonal(p), std::invalid_argument);

    p.exit_left = true;
    p.cost[2] = 0.0;
    CHECK_THROWS_AS(solve_eikonal(p), std::invalid_argument);

    p.cost.assign(3, 1.0);
    CHECK_THROWS_AS(solve_eikonal(p), std::invalid_argument);
}
