#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/ifs.hpp"

namespace rcm {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_numbers(const std::string& text) {
    std::istringstream is(text);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (!end || *end != '\0') throw ArgumentError("config", "not a number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fractal spec text
//
//   preset = sierpinski-gasket
// or
//   dim = 2
//   beta = 2
//   U = 1 0 0 1; gamma = 0 0        (one row per map, U row-major)

struct FractalText {
    std::optional<std::string> preset;
    int dim = 0;
    double beta = 0.0;
    std::vector<Similitude> maps;

    bool empty() const { return !preset && dim == 0 && beta == 0.0 && maps.empty(); }
};

/// Handles one fractal key; returns false if `key` is not a fractal key.
inline bool apply_fractal_key(FractalText& f, const std::string& key, const std::string& value) {
    if (key == "preset") {
        f.preset = value;
        return true;
    }
    if (key == "dim") {
        const auto v = detail::parse_numbers(value);
        if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0])) throw ArgumentError("config", "dim must be a positive integer");
        f.dim = static_cast<int>(v[0]);
        return true;
    }
    if (key == "beta") {
        const auto v = detail::parse_numbers(value);
        if (v.size() != 1) throw ArgumentError("config", "beta takes one number");
        f.beta = v[0];
        return true;
    }
    if (key == "U") {
        const auto semi = value.find(';');
        if (semi == std::string::npos) throw ArgumentError("config", "map row needs 'U = ...; gamma = ...'");
        const std::string rest = detail::trim(value.substr(semi + 1));
        const auto eq = rest.find('=');
        const std::string gk = eq == std::string::npos ? "" : detail::trim(rest.substr(0, eq));
        if (gk != "gamma" && gk != "\xce\xb3") throw ArgumentError("config", "map row needs '; gamma = ...'");
        if (f.dim < 1) throw ArgumentError("config", "dim must be set before the map rows");
        const auto u = detail::parse_numbers(value.substr(0, semi));
        const auto g = detail::parse_numbers(rest.substr(eq + 1));
        const auto d = static_cast<std::size_t>(f.dim);
        if (u.size() != d * d) throw ArgumentError("config", "U needs " + std::to_string(d * d) + " entries");
        if (g.size() != d) throw ArgumentError("config", "gamma needs " + std::to_string(d) + " entries");
        Similitude s{Eigen::MatrixXd(f.dim, f.dim), Eigen::VectorXd(f.dim)};
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c)
                s.rotation(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = u[r * d + c];
            s.shift(static_cast<Eigen::Index>(r)) = g[r];
        }
        f.maps.push_back(std::move(s));
        return true;
    }
    return false;
}

inline IFSSpec resolve_fractal(const FractalText& f) {
    if (f.preset) {
        if (f.dim || f.beta != 0.0 || !f.maps.empty())
            throw ArgumentError("config", "give either a preset or explicit maps, not both");
        auto s = presets::by_name(*f.preset);
        if (!s) throw ArgumentError("config", "unknown preset '" + *f.preset + "'");
        return *s;
    }
    IFSSpec s;
    s.dim = f.dim;
    s.beta = f.beta;
    s.maps = f.maps;
    s.validate();
    return s;
}

/// Serializes a spec in the grammar above (exact round trip of the doubles).
inline std::string fractal_to_text(const IFSSpec& spec) {
    if (!spec.preset_name.empty()) return "preset = " + spec.preset_name + "\n";
    std::ostringstream os;
    os << "dim = " << spec.dim << "\nbeta = " << detail::format_double(spec.beta) << "\n";
    for (const auto& m : spec.maps) {
        os << "U =";
        for (int r = 0; r < spec.dim; ++r)
            for (int c = 0; c < spec.dim; ++c) os << ' ' << detail::format_double(m.rotation(r, c));
        os << "; gamma =";
        for (int r = 0; r < spec.dim; ++r) os << ' ' << detail::format_double(m.shift(r));
        os << '\n';
    }
    return os.str();
}

inline IFSSpec parse_fractal_text(const std::string& text, const std::string& source = "<fractal>") {
    FractalText f;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        try {
            if (!apply_fractal_key(f, key, detail::trim(t.substr(eq + 1))))
                throw ParseError(source, lineno, "unknown key '" + key + "'");
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source, lineno, e.what());
        }
    }
    try {
        return resolve_fractal(f);
    } catch (const Error& e) {
        throw ParseError(source, lineno, e.what());
    }
}

inline IFSSpec load_fractal(const std::string& name_or_path) {
    if (auto s = presets::by_name(name_or_path)) return *s;
    std::ifstream in(name_or_path);
    if (!in) throw ArgumentError("config", "'" + name_or_path + "' is neither a preset nor a readable spec file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_fractal_text(ss.str(), name_or_path);
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class Experiment { build, renorm, homogenize, walk, fin };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::build: return "build";
        case Experiment::renorm: return "renorm";
        case Experiment::homogenize: return "homogenize";
        case Experiment::walk: return "walk";
        case Experiment::fin: return "fin";
    }
    return "";
}

inline Experiment parse_experiment(const std::string& s) {
    for (auto e : {Experiment::build, Experiment::renorm, Experiment::homogenize, Experiment::walk, Experiment::fin})
        if (to_string(e) == s) return e;
    throw ArgumentError("config", "unknown experiment '" + s + "' (build, renorm, homogenize, walk, fin)");
}

/// Levels as "1-5", "2,3,5" or a single number.
inline std::vector<std::size_t> parse_levels(const std::string& text) {
    std::vector<std::size_t> out;
    auto number = [&](const std::string& s) {
        const std::string t = detail::trim(s);
        if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
            throw ArgumentError("config", "bad level list '" + text + "'");
        return static_cast<std::size_t>(std::stoul(t));
    };
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(number(part));
        } else {
            const auto a = number(part.substr(0, dash));
            const auto b = number(part.substr(dash + 1));
            if (b < a) throw ArgumentError("config", "bad level range '" + part + "'");
            for (auto l = a; l <= b; ++l) out.push_back(l);
        }
    }
    if (out.empty()) throw ArgumentError("config", "empty level list");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] <= out[i - 1]) throw ArgumentError("config", "levels must be increasing");
    return out;
}

inline std::string levels_to_string(const std::vector<std::size_t>& levels) {
    std::string s;
    for (std::size_t i = 0; i < levels.size(); ++i) s += (i ? "," : "") + std::to_string(levels[i]);
    return s;
}

struct ExperimentConfig {
    Experiment experiment = Experiment::renorm;
    std::string fractal = "sierpinski-gasket";
    FractalText inline_fractal;
    std::string law = "pareto";  // pareto | constant | invariant
    double alpha = 0.5;
    double lower_bound = 1.0;
    std::vector<std::size_t> levels;  // empty: experiment default
    std::size_t trials = 0;           // 0: experiment default
    std::uint64_t seed = 1;
    std::string statistic = "median";
    std::string mode = "csrw";
    std::string out = "out";
    unsigned threads = 1;
    double cutoff = 1e-3;
    std::size_t depth = 0;
    double tol = 1e-12;
    std::size_t max_iter = 10000;
    std::size_t starts = 0;
    bool oracle = false;

    IFSSpec spec() const { return inline_fractal.empty() ? load_fractal(fractal) : resolve_fractal(inline_fractal); }

    /// Fills experiment-dependent defaults and checks ranges.
    void finalize() {
        if (levels.empty()) {
            switch (experiment) {
                case Experiment::build: levels = {3}; break;
                case Experiment::renorm: levels = {1}; break;
                case Experiment::homogenize: levels = {1, 2, 3, 4, 5}; break;
                case Experiment::walk: levels = {1, 2, 3, 4, 5}; break;
                case Experiment::fin: levels = {2, 3, 4, 5}; break;
            }
        }
        if (trials == 0 && !explicit_trials) {
            switch (experiment) {
                case Experiment::homogenize: trials = 200; break;
                case Experiment::walk: trials = 500; break;
                case Experiment::fin: trials = 1000; break;
                default: trials = 1; break;
            }
        }
        validate();
    }

    void validate() const {
        if (law != "pareto" && law != "constant" && law != "invariant")
            throw ArgumentError("config", "law must be pareto, constant or invariant");
        if (law == "pareto" && !(alpha > 0.0 && alpha < 1.0))
            throw ArgumentError("config", "alpha must lie in (0, 1), got " + detail::format_double(alpha));
        if (!(lower_bound > 0.0)) throw ArgumentError("config", "lower_bound must be positive");
        if (mode != "vsrw" && mode != "csrw") throw ArgumentError("config", "mode must be vsrw or csrw");
        if (threads < 1) throw ArgumentError("config", "threads must be >= 1");
        if (!(cutoff > 0.0)) throw ArgumentError("config", "cutoff must be positive");
        if (!(tol > 0.0)) throw ArgumentError("config", "tol must be positive");
        if (experiment == Experiment::walk || experiment == Experiment::homogenize || experiment == Experiment::fin)
            if (trials < 1 && !oracle) throw ArgumentError("config", "trials must be >= 1");
        if (experiment == Experiment::fin && trials < 100) throw ArgumentError("config", "fin needs at least 100 trials");
        if ((experiment == Experiment::walk || experiment == Experiment::fin) && levels.size() < 3)
            throw ArgumentError("config", "scaling fits need at least 3 levels");
        if (experiment == Experiment::build && levels.size() != 1) throw ArgumentError("config", "build takes a single level");
    }

    bool explicit_trials = false;
};

/// Every key accepted in config files and as --key flags.
inline const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> keys = {"experiment", "fractal",   "law",   "alpha",     "lower_bound",
                                                  "levels",     "level",     "trials", "seed",     "statistic",
                                                  "mode",       "out",       "threads", "cutoff",  "depth",
                                                  "tol",        "max_iter",  "starts", "oracle"};
    return keys;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (v.empty() || !end || *end != '\0') throw ArgumentError("config", key + " expects a number, got '" + v + "'");
    return x;
}

inline std::uint64_t to_unsigned(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw ArgumentError("config", key + " expects a nonnegative integer, got '" + v + "'");
    return std::stoull(v);
}

}  // namespace detail

/// Sets one key; returns false for unknown keys.
inline bool apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
    if (key == "experiment") c.experiment = parse_experiment(v);
    else if (key == "fractal") c.fractal = v;
    else if (key == "law") c.law = v;
    else if (key == "alpha") c.alpha = detail::to_double(key, v);
    else if (key == "lower_bound") c.lower_bound = detail::to_double(key, v);
    else if (key == "levels") c.levels = parse_levels(v);
    else if (key == "level") {
        const auto n = detail::to_unsigned(key, v);
        c.levels.clear();
        if (c.experiment == Experiment::build) c.levels = {n};
        else for (std::size_t l = 1; l <= n; ++l) c.levels.push_back(l);
    }
    else if (key == "trials") {
        c.trials = detail::to_unsigned(key, v);
        c.explicit_trials = true;
    }
    else if (key == "seed") c.seed = detail::to_unsigned(key, v);
    else if (key == "statistic") c.statistic = v;
    else if (key == "mode") c.mode = v;
    else if (key == "out") c.out = v;
    else if (key == "threads") c.threads = static_cast<unsigned>(detail::to_unsigned(key, v));
    else if (key == "cutoff") c.cutoff = detail::to_double(key, v);
    else if (key == "depth") c.depth = detail::to_unsigned(key, v);
    else if (key == "tol") c.tol = detail::to_double(key, v);
    else if (key == "max_iter") c.max_iter = detail::to_unsigned(key, v);
    else if (key == "starts") c.starts = detail::to_unsigned(key, v);
    else if (key == "oracle") {
        if (v != "true" && v != "false") throw ArgumentError("config", "oracle expects true or false");
        c.oracle = v == "true";
    }
    else return apply_fractal_key(c.inline_fractal, key, v);
    return true;
}

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

/// Parses `key = value` lines ('#' starts a comment). Fractal keys are
/// accepted too, so a config file can carry its own IFS.
inline std::vector<ConfigEntry> parse_config_text(const std::string& text, const std::string& source) {
    std::vector<ConfigEntry> out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    ExperimentConfig probe;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line.substr(0, line.find('#')));
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source, lineno, "expected 'key = value'");
        ConfigEntry e{detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)), lineno};
        if (e.key.empty()) throw ParseError(source, lineno, "missing key");
        try {
            if (!apply_key(probe, e.key, e.value)) throw ParseError(source, lineno, "unknown key '" + e.key + "'");
        } catch (const ParseError&) {
            throw;
        } catch (const Error& err) {
            throw ParseError(source, lineno, err.what());
        }
        out.push_back(std::move(e));
    }
    return out;
}

/// A value given both in the config file and as a flag; the flag wins.
struct Override {
    std::string key;
    std::string file_value;
    std::string flag_value;
};

struct ResolvedConfig {
    ExperimentConfig config;
    std::vector<Override> overrides;
    std::vector<std::pair<std::string, std::string>> file_entries;
    std::vector<std::pair<std::string, std::string>> flag_entries;
};

/// Defaults, then file entries, then flags (in that order of precedence).
inline ResolvedConfig resolve_config(const std::vector<ConfigEntry>& file, const std::string& source,
                                     const std::vector<std::pair<std::string, std::string>>& flags) {
    ResolvedConfig r;
    // The experiment decides how `level` expands, so set it first.
    auto set_experiment = [&](const std::string& v) { r.config.experiment = parse_experiment(v); };
    for (const auto& e : file)
        if (e.key == "experiment") set_experiment(e.value);
    for (const auto& [k, v] : flags)
        if (k == "experiment") set_experiment(v);
    for (const auto& e : file) {
        try {
            apply_key(r.config, e.key, e.value);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& err) {
            throw ParseError(source, e.line, err.what());
        }
        r.file_entries.emplace_back(e.key, e.value);
    }
    for (const auto& [k, v] : flags) {
        if (!apply_key(r.config, k, v)) throw ArgumentError("config", "unknown flag --" + k);
        r.flag_entries.emplace_back(k, v);
        for (const auto& e : file)
            if (e.key == k && e.value != v) r.overrides.push_back({k, e.value, v});
    }
    r.config.finalize();
    return r;
}

inline ResolvedConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& flags) {
    std::vector<ConfigEntry> entries;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ArgumentError("config", "cannot read config file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        entries = parse_config_text(ss.str(), path);
    }
    return resolve_config(entries, path.empty() ? "<flags>" : path, flags);
}

/// Fully resolved key/value listing, defaults included, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> config_listing(const ExperimentConfig& c) {
    std::vector<std::pair<std::string, std::string>> out = {
        {"experiment", to_string(c.experiment)},
        {"law", c.law},
        {"alpha", detail::format_double(c.alpha)},
        {"lower_bound", detail::format_double(c.lower_bound)},
        {"levels", levels_to_string(c.levels)},
        {"trials", std::to_string(c.trials)},
        {"seed", std::to_string(c.seed)},
        {"statistic", c.statistic},
        {"mode", c.mode},
        {"out", c.out},
        {"threads", std::to_string(c.threads)},
        {"cutoff", detail::format_double(c.cutoff)},
        {"depth", std::to_string(c.depth)},
        {"tol", detail::format_double(c.tol)},
        {"max_iter", std::to_string(c.max_iter)},
        {"starts", std::to_string(c.starts)},
        {"oracle", c.oracle ? "true" : "false"},
    };
    if (c.inline_fractal.empty()) out.insert(out.begin() + 1, {"fractal", c.fractal});
    return out;
}

}  // namespace rcm
