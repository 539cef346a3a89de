#pragma once

// Constitutive laws of the crowd model: the mobility triple (F, G, H) with
// H = G^2/F, the running-cost densities E, and the momentum-form integrand K.
// All mobilities are extended by zero outside [0, rho_max]; under the standing
// assumption used throughout, F = G = H (one function drives all three roles).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdmfg {

enum class MobilityPreset {
    LinearDensity,   // F = G = rho
    HughesCubic,     // F = G = rho * (rho_max - rho)^2
    CustomTabulated  // cubic-spline interpolant of sampled values on [0, rho_max]
};

enum class EnergyPreset {
    Linear,      // E = alpha * rho
    Exponential  // E = exp(a * rho)
};

enum class MobilityRole { F, G, H };

// Natural cubic spline on uniform samples over [0, rho_max].
struct MobilityTable {
    std::vector<double> values;  // samples at rho_j = j * rho_max / (m - 1)
    std::vector<double> second;  // spline second derivatives at the knots
    double rho_max = 1.0;

    double knot_spacing() const {
        return rho_max / static_cast<double>(values.size() - 1);
    }
};

inline MobilityTable make_mobility_table(std::vector<double> samples, double rho_max) {
    if (samples.size() < 4)
        throw std::invalid_argument("make_mobility_table: need at least 4 samples");
    MobilityTable t;
    t.values = std::move(samples);
    t.rho_max = rho_max;
    const int m = static_cast<int>(t.values.size());
    const double dh = t.knot_spacing();
    // Natural spline: tridiagonal solve for second derivatives.
    std::vector<double> rhs(static_cast<size_t>(m), 0.0), c(static_cast<size_t>(m), 0.0);
    t.second.assign(static_cast<size_t>(m), 0.0);
    for (int j = 1; j + 1 < m; ++j)
        rhs[static_cast<size_t>(j)] =
            6.0 * (t.values[static_cast<size_t>(j + 1)] - 2.0 * t.values[static_cast<size_t>(j)] +
                   t.values[static_cast<size_t>(j - 1)]) /
            (dh * dh);
    // Thomas sweep on the interior rows (diag 4, off-diag 1 after scaling).
    for (int j = 1; j + 1 < m; ++j) {
        double piv = 4.0 - (j > 1 ? c[static_cast<size_t>(j - 1)] : 0.0);
        c[static_cast<size_t>(j)] = 1.0 / piv;
        rhs[static_cast<size_t>(j)] =
            (rhs[static_cast<size_t>(j)] - (j > 1 ? rhs[static_cast<size_t>(j - 1)] : 0.0)) / piv;
    }
    for (int j = m - 2; j >= 1; --j)
        t.second[static_cast<size_t>(j)] =
            rhs[static_cast<size_t>(j)] - c[static_cast<size_t>(j)] * t.second[static_cast<size_t>(j + 1)];
    return t;
}

struct ModelSpec {
    MobilityPreset mobility = MobilityPreset::HughesCubic;
    EnergyPreset energy = EnergyPreset::Linear;
    double sigma = 0.1;    // noise level; diffusion coefficient is sigma^2/2
    double beta = 1.0;     // exit permeability in the Robin condition
    double alpha = 3.0;    // weight of the linear running cost E = alpha*rho
    double a = 3.0;        // rate of the exponential running cost E = exp(a*rho)
    double rho_max = 1.0;  // saturation density
    MobilityTable table;   // used only by CustomTabulated

    void validate() const {
        if (sigma < 0.0) throw std::invalid_argument("ModelSpec: sigma must be >= 0");
        if (beta < 0.0) throw std::invalid_argument("ModelSpec: beta must be >= 0");
        if (alpha <= 0.0) throw std::invalid_argument("ModelSpec: alpha must be > 0");
        if (rho_max <= 0.0) throw std::invalid_argument("ModelSpec: rho_max must be > 0");
        if (mobility == MobilityPreset::CustomTabulated && table.values.size() < 4)
            throw std::invalid_argument("ModelSpec: custom mobility requires a table");
    }
};

namespace detail {

inline double spline_eval(const MobilityTable& t, double rho, bool derivative) {
    const int m = static_cast<int>(t.values.size());
    const double dh = t.knot_spacing();
    int j = static_cast<int>(rho / dh);
    if (j < 0) j = 0;
    if (j > m - 2) j = m - 2;
    const double xl = j * dh;
    const double A = (xl + dh - rho) / dh, B = (rho - xl) / dh;
    const double yl = t.values[static_cast<size_t>(j)], yr = t.values[static_cast<size_t>(j + 1)];
    const double sl = t.second[static_cast<size_t>(j)], sr = t.second[static_cast<size_t>(j + 1)];
    if (!derivative)
        return A * yl + B * yr +
               ((A * A * A - A) * sl + (B * B * B - B) * sr) * dh * dh / 6.0;
    return (yr - yl) / dh + ((3.0 * B * B - 1.0) * sr - (3.0 * A * A - 1.0) * sl) * dh / 6.0;
}

}  // namespace detail

// Mobility value; exactly zero outside [0, rho_max].
inline double eval_mobility(const ModelSpec& spec, MobilityRole /*role*/, double rho) {
    if (rho < 0.0 || rho > spec.rho_max) return 0.0;
    switch (spec.mobility) {
        case MobilityPreset::LinearDensity:
            return rho;
        case MobilityPreset::HughesCubic: {
            const double f = spec.rho_max - rho;
            return rho * f * f;
        }
        case MobilityPreset::CustomTabulated:
            return detail::spline_eval(spec.table, rho, false);
    }
    return 0.0;
}

// Analytic derivative of the preset on the closed interval [0, rho_max]
// (one-sided at the ends); zero outside.
inline double eval_mobility_derivative(const ModelSpec& spec, MobilityRole /*role*/, double rho) {
    if (rho < 0.0 || rho > spec.rho_max) return 0.0;
    switch (spec.mobility) {
        case MobilityPreset::LinearDensity:
            return 1.0;
        case MobilityPreset::HughesCubic:
            return (spec.rho_max - rho) * (spec.rho_max - 3.0 * rho);
        case MobilityPreset::CustomTabulated:
            return detail::spline_eval(spec.table, rho, true);
    }
    return 0.0;
}

// Running cost density and its derivative, as a pair (E, E').
inline std::pair<double, double> eval_energy(const ModelSpec& spec, double rho) {
    switch (spec.energy) {
        case EnergyPreset::Linear:
            return {spec.alpha * rho, spec.alpha};
        case EnergyPreset::Exponential: {
            const double e = std::exp(spec.a * rho);
            return {e, spec.a * e};
        }
    }
    return {0.0, 0.0};
}

// Momentum-form integrand K(j, rho) = j^2 / H(rho), with the degenerate cases
// K(0, rho) = 0 and K(j != 0, rho with H = 0) = +infinity. The infinite branch
// is a distinguished IEEE +inf return value, not a fault.
inline double eval_K(const ModelSpec& spec, double j, double rho) {
    const double H = eval_mobility(spec, MobilityRole::H, rho);
    if (H > 0.0) return j * j / H;
    if (j == 0.0) return 0.0;
    return std::numeric_limits<double>::infinity();
}

// Hughes congestion factor f(rho) = rho_max - rho, shared by the Eikonal cost
// and the classical flux rho f(rho)^2.
inline double hughes_f(const ModelSpec& spec, double rho) { return spec.rho_max - rho; }

}  // namespace crowdmfg
