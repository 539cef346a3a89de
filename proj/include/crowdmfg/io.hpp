#pragma once

// Data emission: the shared frame/probe CSV schema `t,x,rho,phi,v,j` (rows
// ordered by t then x, >= 12 significant digits, absent channels left empty),
// descent-history CSV, a JSON run manifest, and minimal SVG line plots.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "descent.hpp"
#include "grid.hpp"
#include "hughes.hpp"

namespace crowdmfg {

namespace detail {

inline std::string fmt_g15(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.15g", x);
    return buf;
}

inline void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

inline std::ofstream open_out(const std::string& path) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

}  // namespace detail

// One row per (frame, cell). Channels other than rho are optional; pass
// nullptr to leave the column empty.
inline void write_frame_csv(const std::string& path, const Trajectory& rho,
                            const Trajectory* phi = nullptr, const Trajectory* v = nullptr,
                            const Trajectory* j = nullptr) {
    if (rho.n_frames() == 0) throw std::invalid_argument("write_frame_csv: empty trajectory");
    for (const Trajectory* c : {phi, v, j})
        if (c && (c->n_frames() != rho.n_frames() || !(c->grid == rho.grid)))
            throw std::invalid_argument("write_frame_csv: channel not aligned with rho");
    std::ofstream out = detail::open_out(path);
    out << "t,x,rho,phi,v,j\n";
    const Grid& grid = rho.grid;
    for (int k = 0; k < rho.n_frames(); ++k) {
        const std::string t = detail::fmt_g15(rho.times[static_cast<size_t>(k)]);
        for (int i = 0; i < grid.n_cells; ++i) {
            out << t << ',' << detail::fmt_g15(grid.center(i)) << ','
                << detail::fmt_g15(rho.frame(k)[static_cast<size_t>(i)]) << ',';
            if (phi) out << detail::fmt_g15(phi->frame(k)[static_cast<size_t>(i)]);
            out << ',';
            if (v) out << detail::fmt_g15(v->frame(k)[static_cast<size_t>(i)]);
            out << ',';
            if (j) out << detail::fmt_g15(j->frame(k)[static_cast<size_t>(i)]);
            out << '\n';
        }
    }
}

// Same schema, one row per (time, probe).
inline void write_probe_csv(const std::string& path, const ProbeSeries& probes) {
    std::ofstream out = detail::open_out(path);
    out << "t,x,rho,phi,v,j\n";
    for (size_t k = 0; k < probes.times.size(); ++k) {
        for (size_t p = 0; p < probes.positions.size(); ++p) {
            out << detail::fmt_g15(probes.times[k]) << ',' << detail::fmt_g15(probes.positions[p])
                << ',' << detail::fmt_g15(probes.rho[k][p]) << ','
                << detail::fmt_g15(probes.phi[k][p]) << ',' << detail::fmt_g15(probes.v[k][p])
                << ',' << detail::fmt_g15(probes.j[k][p]) << '\n';
        }
    }
}

inline void write_history_csv(const std::string& path, const DescentReport& rep) {
    std::ofstream out = detail::open_out(path);
    out << "iteration,objective,gradient_norm,step\n";
    for (size_t m = 0; m < rep.objective_history.size(); ++m)
        out << m << ',' << detail::fmt_g15(rep.objective_history[m]) << ','
            << detail::fmt_g15(rep.gradient_norm_history[m]) << ','
            << detail::fmt_g15(rep.step_history[m]) << '\n';
}

struct FrameTable {
    std::vector<double> t, x;
    std::vector<std::optional<double>> rho, phi, v, j;
};

// Round-trip reader for the frame/probe schema.
inline FrameTable read_frame_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "t,x,rho,phi,v,j")
        throw std::runtime_error(path + ": unexpected CSV header");
    FrameTable table;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        cells.resize(6);
        auto opt = [&](int c) -> std::optional<double> {
            if (cells[static_cast<size_t>(c)].empty()) return std::nullopt;
            return std::stod(cells[static_cast<size_t>(c)]);
        };
        table.t.push_back(std::stod(cells[0]));
        table.x.push_back(std::stod(cells[1]));
        table.rho.push_back(opt(2));
        table.phi.push_back(opt(3));
        table.v.push_back(opt(4));
        table.j.push_back(opt(5));
    }
    return table;
}

// Nearest-cell probe sampling of mean-field trajectories; j = F(rho) v.
inline ProbeSeries make_probe_series(const Trajectory& rho, const Trajectory& phi,
                                     const Trajectory& v, const ModelSpec& spec,
                                     const std::vector<double>& positions) {
    ProbeSeries ps;
    ps.positions = positions;
    const Grid& grid = rho.grid;
    std::vector<int> cells(positions.size());
    for (size_t p = 0; p < positions.size(); ++p) cells[p] = grid.nearest_cell(positions[p]);
    for (int k = 0; k < rho.n_frames(); ++k) {
        ps.times.push_back(rho.times[static_cast<size_t>(k)]);
        std::vector<double> pr(positions.size()), pp(positions.size()), pv(positions.size()),
            pj(positions.size());
        for (size_t p = 0; p < positions.size(); ++p) {
            const size_t i = static_cast<size_t>(cells[p]);
            pr[p] = rho.frame(k)[i];
            pp[p] = phi.frame(k)[i];
            pv[p] = v.frame(k)[i];
            pj[p] = eval_mobility(spec, MobilityRole::F, pr[p]) * pv[p];
        }
        ps.rho.push_back(std::move(pr));
        ps.phi.push_back(std::move(pp));
        ps.v.push_back(std::move(pv));
        ps.j.push_back(std::move(pj));
    }
    return ps;
}

// Run manifest: every emitted file plus the inputs and parameters that
// produced it. `parameters` is a flat key -> string map.
inline void write_manifest(const std::string& path, const std::string& experiment,
                           const std::vector<std::pair<std::string, std::string>>& parameters,
                           const std::vector<std::pair<std::string, std::string>>& inputs,
                           const std::vector<std::string>& files, double wall_time_seconds) {
    nlohmann::json m;
    m["experiment"] = experiment;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : parameters) params[k] = v;
    m["parameters"] = params;
    nlohmann::json ins = nlohmann::json::object();
    for (const auto& [k, v] : inputs) ins[k] = v;
    m["inputs"] = ins;
    m["files"] = files;
    m["wall_time_seconds"] = wall_time_seconds;
    std::ofstream out = detail::open_out(path);
    out << m.dump(2) << '\n';
}

// Machine-readable failure record for nonzero exits.
inline void write_failure_record(const std::string& path, const std::string& component,
                                 long iteration, double residual, const std::string& message) {
    nlohmann::json f;
    f["component"] = component;
    f["iteration"] = iteration;
    f["residual"] = residual;
    f["message"] = message;
    std::ofstream out = detail::open_out(path);
    out << f.dump(2) << '\n';
}

// Convenience line plot: one polyline per selected frame of the trajectory.
inline void write_svg(const std::string& path, const Trajectory& traj,
                      const std::vector<int>& frame_indices, const std::string& title) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf"};
    const int W = 640, H = 400, ml = 50, mr = 15, mt = 30, mb = 35;
    const Grid& grid = traj.grid;

    double lo = 0.0, hi = 1e-12;
    for (int idx : frame_indices)
        for (double y : traj.frame(idx)) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    const double span = hi - lo;

    std::ofstream out = detail::open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">"
        << title << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
        << H - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
        << "\" stroke=\"black\"/>\n";
    int color = 0;
    for (int idx : frame_indices) {
        out << "<polyline fill=\"none\" stroke=\"" << palette[color % 7] << "\" points=\"";
        for (int i = 0; i < grid.n_cells; ++i) {
            const double fx = (grid.center(i) - grid.x_min) / (grid.x_max - grid.x_min);
            const double fy = (traj.frame(idx)[static_cast<size_t>(i)] - lo) / span;
            out << detail::fmt_g15(ml + fx * (W - ml - mr)) << ','
                << detail::fmt_g15(H - mb - fy * (H - mt - mb)) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << W - mr - 80 << "\" y=\"" << mt + 14 * (color + 1)
            << "\" font-size=\"11\" fill=\"" << palette[color % 7] << "\">t = "
            << detail::fmt_g15(traj.times[static_cast<size_t>(idx)]) << "</text>\n";
        ++color;
    }
    out << "</svg>\n";
}

}  // namespace crowdmfg
