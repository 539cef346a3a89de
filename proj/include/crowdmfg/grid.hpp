#pragma once

// Cell-centered 1D finite volume grid on [x_min, x_max] plus the small value
// types shared by every solver: a Field (one value per cell) and a Trajectory
// (uniformly spaced time frames of such values).

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdmfg {

enum class BoundaryTag { Exit, Wall };

struct Grid {
    double x_min = -1.0;
    double x_max = 1.0;
    int n_cells = 0;
    double h = 0.0;
    BoundaryTag left = BoundaryTag::Exit;
    BoundaryTag right = BoundaryTag::Exit;

    double center(int i) const { return x_min + (i + 0.5) * h; }

    // Index of the cell whose center is closest to x (ties resolve upward).
    int nearest_cell(double x) const {
        int i = static_cast<int>(std::lround((x - x_min) / h - 0.5));
        if (i < 0) i = 0;
        if (i >= n_cells) i = n_cells - 1;
        return i;
    }

    bool has_exit() const { return left == BoundaryTag::Exit || right == BoundaryTag::Exit; }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.x_min == b.x_min && a.x_max == b.x_max && a.n_cells == b.n_cells &&
               a.left == b.left && a.right == b.right;
    }
};

inline Grid build_grid(double x_min, double x_max, int n_cells,
                       BoundaryTag left = BoundaryTag::Exit,
                       BoundaryTag right = BoundaryTag::Exit) {
    if (!(x_min < x_max))
        throw std::invalid_argument("build_grid: x_min must be < x_max, got [" +
                                    std::to_string(x_min) + ", " + std::to_string(x_max) + "]");
    if (n_cells < 2)
        throw std::invalid_argument("build_grid: need at least 2 cells, got " +
                                    std::to_string(n_cells));
    Grid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.n_cells = n_cells;
    g.h = (x_max - x_min) / n_cells;
    g.left = left;
    g.right = right;
    return g;
}

struct Field {
    Grid grid;
    std::vector<double> values;

    Field() = default;
    explicit Field(const Grid& g, double fill = 0.0)
        : grid(g), values(static_cast<size_t>(g.n_cells), fill) {}
    Field(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (static_cast<int>(values.size()) != g.n_cells)
            throw std::invalid_argument("Field: value count does not match grid");
    }

    double& operator[](int i) { return values[static_cast<size_t>(i)]; }
    double operator[](int i) const { return values[static_cast<size_t>(i)]; }
    int size() const { return grid.n_cells; }
};

// Frames at times t_k = t0 + k*dt, one vector of cell values per frame.
struct Trajectory {
    Grid grid;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<std::vector<double>> frames;

    int n_frames() const { return static_cast<int>(frames.size()); }

    std::vector<double>& frame(int k) { return frames[static_cast<size_t>(k)]; }
    const std::vector<double>& frame(int k) const { return frames[static_cast<size_t>(k)]; }

    void append(double t, std::vector<double> values) {
        if (static_cast<int>(values.size()) != grid.n_cells)
            throw std::invalid_argument("Trajectory: frame size does not match grid");
        if (!times.empty() && !(t > times.back()))
            throw std::invalid_argument("Trajectory: times must be strictly increasing");
        times.push_back(t);
        frames.push_back(std::move(values));
    }

    // Frame index for time t; requires t to sit on the stored time lattice.
    int frame_at(double t, double tol = 1e-9) const {
        for (int k = 0; k < n_frames(); ++k)
            if (std::abs(times[static_cast<size_t>(k)] - t) <= tol) return k;
        throw std::invalid_argument("Trajectory: no frame at t=" + std::to_string(t));
    }
};

inline Trajectory make_trajectory(const Grid& g, double dt) {
    Trajectory tr;
    tr.grid = g;
    tr.dt = dt;
    return tr;
}

// Constant-in-time trajectory holding the same cell values at every frame.
inline Trajectory constant_trajectory(const Grid& g, double dt, int n_frames,
                                      const std::vector<double>& values) {
    Trajectory tr = make_trajectory(g, dt);
    for (int k = 0; k < n_frames; ++k) tr.append(k == 0 ? 0.0 : k * dt, values);
    return tr;
}

// Centered gradient at cell centers, one-sided at the two boundary cells.
inline std::vector<double> cell_gradient(const Grid& g, const std::vector<double>& u) {
    const int n = g.n_cells;
    std::vector<double> d(static_cast<size_t>(n), 0.0);
    if (n < 2) return d;
    d[0] = (u[1] - u[0]) / g.h;
    d[static_cast<size_t>(n - 1)] = (u[static_cast<size_t>(n - 1)] - u[static_cast<size_t>(n - 2)]) / g.h;
    for (int i = 1; i + 1 < n; ++i)
        d[static_cast<size_t>(i)] =
            (u[static_cast<size_t>(i + 1)] - u[static_cast<size_t>(i - 1)]) / (2.0 * g.h);
    return d;
}

inline double total_mass(const Grid& g, const std::vector<double>& rho) {
    double m = 0.0;
    for (double r : rho) m += r;
    return m * g.h;
}

}  // namespace crowdmfg
