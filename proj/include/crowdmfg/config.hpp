#pragma once

// Experiment configuration: flat `section.key = value` text with `#` comments,
// environment overrides of the form CROWDMFG_<SECTION>_<KEY>, and the built-in
// initial-datum presets. Every parse or validation error names the offending
// key and line.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"
#include "model.hpp"
#include "particles.hpp"
#include "solver_config.hpp"

namespace crowdmfg {

enum class ExperimentKind { Hughes, Mfg, Compare, Oracle, BetaSweep, EnergyCompare };

enum class DatumKind { Constant, ThreeGroups, Bump, Tabulated };

struct InitialDatum {
    DatumKind kind = DatumKind::Constant;
    double constant = 0.0;
    double lo = 0.0, hi = 0.0, height = 0.0;  // bump support and amplitude
    std::string file;                         // tabulated cell values
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Hughes;

    double x_min = -1.0, x_max = 1.0;
    int n_cells = 100;
    BoundaryTag left = BoundaryTag::Exit, right = BoundaryTag::Exit;

    ModelSpec model;
    SolverConfig solver;
    InitialDatum datum;

    std::vector<double> probes;
    std::string output_dir = "out";

    // oracle block
    long particles = 100000;
    double dt_sde = 0.0;  // 0: pick solver.dt / 10
    std::uint64_t seed = 0;
    int threads = 1;
    bool oracle_absorb = false;  // default mode follows beta: 0 -> reflect, else absorb
    bool oracle_mode_set = false;
    bool oracle_descent_velocity = false;  // drive particles with the converged mean-field v

    // sweep block
    std::vector<double> betas{0.1, 1.0, 10.0};
    std::vector<double> compare_times{0.1, 0.7, 1.5};

    Grid make_grid() const { return build_grid(x_min, x_max, n_cells, left, right); }

    ParticleBoundary oracle_mode() const {
        if (oracle_mode_set)
            return oracle_absorb ? ParticleBoundary::AbsorbAtExits : ParticleBoundary::ReflectAll;
        return model.beta == 0.0 ? ParticleBoundary::ReflectAll : ParticleBoundary::AbsorbAtExits;
    }
};

class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

struct ConfigEntry {
    std::string value;
    int line = 0;       // 0 for environment overrides
    bool used = false;
};

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline std::string where(const ConfigEntry& e) {
    return e.line > 0 ? "line " + std::to_string(e.line) : "environment override";
}

class ConfigMap {
  public:
    explicit ConfigMap(const std::string& text) {
        std::istringstream in(text);
        std::string raw;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            std::string s = raw;
            const size_t hash = s.find('#');
            if (hash != std::string::npos) s = s.substr(0, hash);
            s = trim(s);
            if (s.empty()) continue;
            const size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line) +
                                  ": expected `key = value`, got `" + trim(raw) + "`");
            const std::string key = trim(s.substr(0, eq));
            const std::string value = trim(s.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line) + ": empty key");
            if (entries_.count(key))
                throw ConfigError("config line " + std::to_string(line) + ": duplicate key `" +
                                  key + "` (first set on line " +
                                  std::to_string(entries_[key].line) + ")");
            entries_[key] = ConfigEntry{value, line, false};
        }
        apply_env_overrides();
    }

    const ConfigEntry* find(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    bool get_string(const std::string& key, std::string& out) {
        const ConfigEntry* e = find(key);
        if (!e) return false;
        out = e->value;
        return true;
    }

    bool get_double(const std::string& key, double& out) {
        const ConfigEntry* e = find(key);
        if (!e) return false;
        out = parse_double(key, *e, e->value);
        return true;
    }

    bool get_int(const std::string& key, long& out) {
        const ConfigEntry* e = find(key);
        if (!e) return false;
        try {
            size_t pos = 0;
            out = std::stol(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing text");
        } catch (const std::exception&) {
            throw ConfigError("config " + where(*e) + ": `" + key + "` expects an integer, got `" +
                              e->value + "`");
        }
        return true;
    }

    bool get_bool(const std::string& key, bool& out) {
        const ConfigEntry* e = find(key);
        if (!e) return false;
        std::string v = e->value;
        for (char& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (v == "true" || v == "on" || v == "1")
            out = true;
        else if (v == "false" || v == "off" || v == "0")
            out = false;
        else
            throw ConfigError("config " + where(*e) + ": `" + key + "` expects a boolean, got `" +
                              e->value + "`");
        return true;
    }

    bool get_double_list(const std::string& key, std::vector<double>& out) {
        const ConfigEntry* e = find(key);
        if (!e) return false;
        out.clear();
        std::string item;
        std::istringstream in(e->value);
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            out.push_back(parse_double(key, *e, item));
        }
        return true;
    }

    void reject_unknown() const {
        for (const auto& [key, e] : entries_)
            if (!e.used)
                throw ConfigError("config " + where(e) + ": unknown key `" + key + "`");
    }

    static double parse_double(const std::string& key, const ConfigEntry& e,
                               const std::string& text) {
        try {
            size_t pos = 0;
            const double x = std::stod(text, &pos);
            if (pos != text.size()) throw std::invalid_argument("trailing text");
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config " + where(e) + ": `" + key + "` expects a number, got `" +
                              text + "`");
        }
    }

  private:
    void apply_env_overrides() {
        // Every key `section.key` may be overridden by CROWDMFG_SECTION_KEY;
        // top-level keys by CROWDMFG_KEY.
        static const char* overridable[] = {
            "experiment", "initial_datum", "probes", "output_dir",
            "grid.x_min", "grid.x_max", "grid.n_cells", "grid.left", "grid.right",
            "model.mobility", "model.energy", "model.sigma", "model.beta", "model.alpha",
            "model.a", "model.rho_max", "model.mobility_table",
            "solver.dt", "solver.T", "solver.newton_tol", "solver.newton_max_iter",
            "solver.tau", "solver.descent_tol", "solver.descent_max_iter", "solver.armijo",
            "oracle.particles", "oracle.dt_sde", "oracle.seed", "oracle.threads", "oracle.mode",
            "oracle.velocity", "sweep.betas", "sweep.times"};
        for (const char* key : overridable) {
            std::string env = "CROWDMFG_";
            for (const char* c = key; *c; ++c)
                env += (*c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
            if (const char* v = std::getenv(env.c_str()))
                entries_[key] = ConfigEntry{std::string(v), 0, false};
        }
    }

    std::map<std::string, ConfigEntry> entries_;
};

// Parses `name` or `name(arg, ...)`.
inline void split_call(const std::string& text, std::string& name, std::vector<std::string>& args) {
    args.clear();
    const size_t open = text.find('(');
    if (open == std::string::npos) {
        name = trim(text);
        return;
    }
    if (text.back() != ')')
        throw ConfigError("config: malformed value `" + text + "` (missing `)`)");
    name = trim(text.substr(0, open));
    std::string inner = text.substr(open + 1, text.size() - open - 2);
    std::string item;
    std::istringstream in(inner);
    while (std::getline(in, item, ',')) args.push_back(trim(item));
}

inline void fail_key(const std::string& key, const ConfigEntry& e, const std::string& msg) {
    throw ConfigError("config " + where(e) + ": `" + key + "` " + msg);
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    detail::ConfigMap map(text);
    ExperimentConfig cfg;

    {
        const detail::ConfigEntry* e = map.find("experiment");
        if (!e) throw ConfigError("config: missing required key `experiment`");
        if (e->value == "hughes")
            cfg.experiment = ExperimentKind::Hughes;
        else if (e->value == "mfg")
            cfg.experiment = ExperimentKind::Mfg;
        else if (e->value == "compare")
            cfg.experiment = ExperimentKind::Compare;
        else if (e->value == "oracle")
            cfg.experiment = ExperimentKind::Oracle;
        else if (e->value == "beta_sweep")
            cfg.experiment = ExperimentKind::BetaSweep;
        else if (e->value == "energy_compare")
            cfg.experiment = ExperimentKind::EnergyCompare;
        else
            detail::fail_key("experiment", *e,
                             "must be one of hughes, mfg, compare, oracle, beta_sweep, "
                             "energy_compare; got `" + e->value + "`");
    }

    map.get_double("grid.x_min", cfg.x_min);
    map.get_double("grid.x_max", cfg.x_max);
    long n = cfg.n_cells;
    if (map.get_int("grid.n_cells", n)) cfg.n_cells = static_cast<int>(n);
    auto parse_tag = [&](const char* key, BoundaryTag& tag) {
        const detail::ConfigEntry* e = map.find(key);
        if (!e) return;
        if (e->value == "exit")
            tag = BoundaryTag::Exit;
        else if (e->value == "wall")
            tag = BoundaryTag::Wall;
        else
            detail::fail_key(key, *e, "must be `exit` or `wall`, got `" + e->value + "`");
    };
    parse_tag("grid.left", cfg.left);
    parse_tag("grid.right", cfg.right);

    {
        const detail::ConfigEntry* e = map.find("model.mobility");
        if (e) {
            if (e->value == "linear_density")
                cfg.model.mobility = MobilityPreset::LinearDensity;
            else if (e->value == "hughes_cubic")
                cfg.model.mobility = MobilityPreset::HughesCubic;
            else if (e->value == "custom_tabulated")
                cfg.model.mobility = MobilityPreset::CustomTabulated;
            else
                detail::fail_key("model.mobility", *e,
                                 "must be linear_density, hughes_cubic or custom_tabulated");
        }
    }
    {
        const detail::ConfigEntry* e = map.find("model.energy");
        if (e) {
            if (e->value == "linear")
                cfg.model.energy = EnergyPreset::Linear;
            else if (e->value == "exponential")
                cfg.model.energy = EnergyPreset::Exponential;
            else
                detail::fail_key("model.energy", *e, "must be linear or exponential");
        }
    }
    map.get_double("model.sigma", cfg.model.sigma);
    map.get_double("model.beta", cfg.model.beta);
    map.get_double("model.alpha", cfg.model.alpha);
    map.get_double("model.a", cfg.model.a);
    map.get_double("model.rho_max", cfg.model.rho_max);
    {
        std::string path;
        if (map.get_string("model.mobility_table", path)) {
            std::ifstream in(path);
            if (!in)
                throw ConfigError("config: `model.mobility_table` file not readable: " + path);
            std::vector<double> samples;
            double x = 0.0;
            while (in >> x) {
                samples.push_back(x);
                if (in.peek() == ',') in.get();
            }
            cfg.model.table = make_mobility_table(std::move(samples), cfg.model.rho_max);
        }
    }

    map.get_double("solver.dt", cfg.solver.dt);
    map.get_double("solver.T", cfg.solver.T);
    map.get_double("solver.newton_tol", cfg.solver.newton_tol);
    long it = cfg.solver.newton_max_iter;
    if (map.get_int("solver.newton_max_iter", it)) cfg.solver.newton_max_iter = static_cast<int>(it);
    map.get_double("solver.tau", cfg.solver.tau);
    map.get_double("solver.descent_tol", cfg.solver.descent_tol);
    it = cfg.solver.descent_max_iter;
    if (map.get_int("solver.descent_max_iter", it)) cfg.solver.descent_max_iter = static_cast<int>(it);
    map.get_bool("solver.armijo", cfg.solver.armijo);

    {
        const detail::ConfigEntry* e = map.find("initial_datum");
        if (!e) throw ConfigError("config: missing required key `initial_datum`");
        std::string name;
        std::vector<std::string> args;
        detail::split_call(e->value, name, args);
        if (name == "constant") {
            if (args.size() != 1)
                detail::fail_key("initial_datum", *e, "constant takes one argument: constant(c)");
            cfg.datum.kind = DatumKind::Constant;
            cfg.datum.constant = detail::ConfigMap::parse_double("initial_datum", *e, args[0]);
        } else if (name == "three_groups") {
            if (!args.empty())
                detail::fail_key("initial_datum", *e, "three_groups takes no arguments");
            cfg.datum.kind = DatumKind::ThreeGroups;
        } else if (name == "bump") {
            if (args.size() != 3)
                detail::fail_key("initial_datum", *e, "bump takes bump(lo, hi, height)");
            cfg.datum.kind = DatumKind::Bump;
            cfg.datum.lo = detail::ConfigMap::parse_double("initial_datum", *e, args[0]);
            cfg.datum.hi = detail::ConfigMap::parse_double("initial_datum", *e, args[1]);
            cfg.datum.height = detail::ConfigMap::parse_double("initial_datum", *e, args[2]);
            if (!(cfg.datum.lo < cfg.datum.hi))
                detail::fail_key("initial_datum", *e, "bump needs lo < hi");
        } else if (name == "tabulated") {
            if (args.size() != 1)
                detail::fail_key("initial_datum", *e, "tabulated takes tabulated(file)");
            cfg.datum.kind = DatumKind::Tabulated;
            cfg.datum.file = args[0];
            std::ifstream in(cfg.datum.file);
            if (!in)
                detail::fail_key("initial_datum", *e, "file not readable: " + cfg.datum.file);
        } else {
            detail::fail_key("initial_datum", *e,
                             "must be constant(c), three_groups, bump(lo, hi, height) or "
                             "tabulated(file)");
        }
    }

    map.get_double_list("probes", cfg.probes);
    map.get_string("output_dir", cfg.output_dir);

    long particles = cfg.particles;
    if (map.get_int("oracle.particles", particles)) cfg.particles = particles;
    map.get_double("oracle.dt_sde", cfg.dt_sde);
    long seed = 0;
    if (map.get_int("oracle.seed", seed)) cfg.seed = static_cast<std::uint64_t>(seed);
    long threads = cfg.threads;
    if (map.get_int("oracle.threads", threads)) cfg.threads = static_cast<int>(threads);
    {
        const detail::ConfigEntry* e = map.find("oracle.mode");
        if (e) {
            cfg.oracle_mode_set = true;
            if (e->value == "reflect")
                cfg.oracle_absorb = false;
            else if (e->value == "absorb")
                cfg.oracle_absorb = true;
            else
                detail::fail_key("oracle.mode", *e, "must be `reflect` or `absorb`");
        }
    }
    {
        const detail::ConfigEntry* e = map.find("oracle.velocity");
        if (e) {
            if (e->value == "zero")
                cfg.oracle_descent_velocity = false;
            else if (e->value == "descent")
                cfg.oracle_descent_velocity = true;
            else
                detail::fail_key("oracle.velocity", *e, "must be `zero` or `descent`");
        }
    }
    map.get_double_list("sweep.betas", cfg.betas);
    map.get_double_list("sweep.times", cfg.compare_times);

    map.reject_unknown();

    // Validation, naming the key the way it appears in the file.
    auto require = [](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError("config: `" + key + "` " + msg);
    };
    require(cfg.x_min < cfg.x_max, "grid.x_min", "must be < grid.x_max");
    require(cfg.n_cells >= 2, "grid.n_cells", "must be at least 2");
    require(cfg.solver.dt > 0.0, "solver.dt", "must be > 0");
    require(cfg.solver.T > 0.0, "solver.T", "must be > 0");
    require(cfg.solver.newton_tol > 0.0, "solver.newton_tol", "must be > 0");
    require(cfg.solver.newton_max_iter > 0, "solver.newton_max_iter", "must be > 0");
    require(cfg.solver.tau > 0.0, "solver.tau", "must be > 0");
    require(cfg.solver.descent_tol > 0.0, "solver.descent_tol", "must be > 0");
    require(cfg.solver.descent_max_iter > 0, "solver.descent_max_iter", "must be > 0");
    require(cfg.model.sigma >= 0.0, "model.sigma", "must be >= 0");
    require(cfg.model.beta >= 0.0, "model.beta", "must be >= 0");
    require(cfg.model.alpha > 0.0, "model.alpha", "must be > 0");
    require(cfg.model.rho_max > 0.0, "model.rho_max", "must be > 0");
    require(cfg.particles >= 1, "oracle.particles", "must be >= 1");
    require(cfg.dt_sde >= 0.0, "oracle.dt_sde", "must be >= 0");
    require(cfg.threads >= 1, "oracle.threads", "must be >= 1");
    for (double p : cfg.probes)
        require(p >= cfg.x_min && p <= cfg.x_max, "probes", "positions must lie in the domain");
    if (cfg.datum.kind == DatumKind::Constant)
        require(cfg.datum.constant >= 0.0 && cfg.datum.constant <= cfg.model.rho_max,
                "initial_datum", "constant must lie in [0, rho_max]");
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// Materializes the configured initial datum on the configured grid.
inline Field build_initial_datum(const ExperimentConfig& cfg) {
    const Grid grid = cfg.make_grid();
    Field rho0(grid, 0.0);
    switch (cfg.datum.kind) {
        case DatumKind::Constant:
            for (int i = 0; i < grid.n_cells; ++i) rho0[i] = cfg.datum.constant;
            break;
        case DatumKind::ThreeGroups:
            // Three crowds of different densities, the middle one between two
            // exits at unequal distances.
            for (int i = 0; i < grid.n_cells; ++i) {
                const double x = grid.center(i);
                if (x >= -0.8 && x <= -0.6)
                    rho0[i] = 0.8;
                else if (x >= -0.3 && x <= 0.3)
                    rho0[i] = 0.6;
                else if (x >= 0.4 && x <= 0.8)
                    rho0[i] = 0.95;
            }
            break;
        case DatumKind::Bump:
            for (int i = 0; i < grid.n_cells; ++i) {
                const double x = grid.center(i);
                if (x >= cfg.datum.lo && x <= cfg.datum.hi) rho0[i] = cfg.datum.height;
            }
            break;
        case DatumKind::Tabulated: {
            std::ifstream in(cfg.datum.file);
            if (!in) throw ConfigError("cannot open tabulated datum: " + cfg.datum.file);
            std::vector<double> vals;
            double x = 0.0;
            while (in >> x) {
                vals.push_back(x);
                if (in.peek() == ',') in.get();
            }
            if (static_cast<int>(vals.size()) != grid.n_cells)
                throw ConfigError("tabulated datum has " + std::to_string(vals.size()) +
                                  " values, grid has " + std::to_string(grid.n_cells) + " cells");
            rho0.values = std::move(vals);
            break;
        }
    }
    return rho0;
}

}  // namespace crowdmfg
