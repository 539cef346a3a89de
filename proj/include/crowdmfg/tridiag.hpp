#pragma once

// Tridiagonal direct solver (LU with partial pivoting, O(n)). Pivoting keeps
// the elimination stable when advection makes rows lose diagonal dominance.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdmfg {

struct Tridiagonal {
    // Row i: lower[i]*x[i-1] + diag[i]*x[i] + upper[i]*x[i+1] (lower[0] and
    // upper[n-1] are ignored).
    std::vector<double> lower, diag, upper;

    explicit Tridiagonal(int n = 0)
        : lower(static_cast<size_t>(n), 0.0),
          diag(static_cast<size_t>(n), 0.0),
          upper(static_cast<size_t>(n), 0.0) {}

    int size() const { return static_cast<int>(diag.size()); }

    Tridiagonal transposed() const {
        const int n = size();
        Tridiagonal t(n);
        for (int i = 0; i < n; ++i) {
            t.diag[static_cast<size_t>(i)] = diag[static_cast<size_t>(i)];
            if (i > 0) t.lower[static_cast<size_t>(i)] = upper[static_cast<size_t>(i - 1)];
            if (i + 1 < n) t.upper[static_cast<size_t>(i)] = lower[static_cast<size_t>(i + 1)];
        }
        return t;
    }
};

// Solves A x = rhs; throws std::runtime_error on a (numerically) singular pivot.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& A, std::vector<double> rhs) {
    const int n = A.size();
    if (static_cast<int>(rhs.size()) != n)
        throw std::invalid_argument("solve_tridiagonal: size mismatch");
    std::vector<double> a = A.lower, b = A.diag, c = A.upper;
    std::vector<double> d(static_cast<size_t>(n), 0.0);  // second superdiagonal fill-in

    double scale = 0.0;
    for (int i = 0; i < n; ++i)
        scale = std::max({scale, std::abs(a[static_cast<size_t>(i)]),
                          std::abs(b[static_cast<size_t>(i)]), std::abs(c[static_cast<size_t>(i)])});
    const double tiny = 1e-300 + 1e-15 * scale;

    for (int i = 0; i + 1 < n; ++i) {
        const size_t si = static_cast<size_t>(i), sj = si + 1;
        if (std::abs(b[si]) < std::abs(a[sj])) {
            std::swap(b[si], a[sj]);
            std::swap(c[si], b[sj]);
            std::swap(d[si], c[sj]);
            std::swap(rhs[si], rhs[sj]);
        }
        if (std::abs(b[si]) <= tiny)
            throw std::runtime_error("solve_tridiagonal: singular pivot at row " + std::to_string(i));
        const double m = a[sj] / b[si];
        b[sj] -= m * c[si];
        c[sj] -= m * d[si];
        rhs[sj] -= m * rhs[si];
    }
    if (std::abs(b[static_cast<size_t>(n - 1)]) <= tiny)
        throw std::runtime_error("solve_tridiagonal: singular pivot at last row");

    std::vector<double> x(static_cast<size_t>(n), 0.0);
    for (int i = n - 1; i >= 0; --i) {
        const size_t si = static_cast<size_t>(i);
        double v = rhs[si];
        if (i + 1 < n) v -= c[si] * x[si + 1];
        if (i + 2 < n) v -= d[si] * x[si + 2];
        x[si] = v / b[si];
    }
    return x;
}

}  // namespace crowdmfg
