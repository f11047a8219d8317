#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcm/config.hpp"
#include "rcm/environment.hpp"
#include "rcm/fin.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/homogenization.hpp"
#include "rcm/renormalization.hpp"
#include "rcm/scaling.hpp"
#include "rcm/stats.hpp"
#include "rcm/svg.hpp"

namespace rcm {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitPropertyFailed = 2 };

inline std::string checksum_hex(const std::string& bytes) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(bytes);
    return os.str();
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ArgumentError("experiments_cli", "cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Collects the artifacts of one run; every file goes through here so the
/// manifest can checksum it.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& bytes) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) throw ArgumentError("experiments_cli", "cannot write " + (dir_ / name).string());
        out << bytes;
        files_.emplace_back(name, checksum_hex(bytes));
    }

    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

namespace detail {

inline std::string num(double v) { return format_double(v); }

inline std::string iso_time(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline ConductanceLaw make_law(const ExperimentConfig& c, const IFSSpec& spec) {
    if (c.law == "pareto") return ConductanceLaw::pareto(c.alpha, c.lower_bound);
    if (c.law == "constant") return ConductanceLaw::constant(c.lower_bound);
    return ConductanceLaw::pattern(find_fixed_point(spec, c.tol, c.max_iter).q_pairs);
}

inline WalkMode make_mode(const std::string& m) { return m == "vsrw" ? WalkMode::vsrw : WalkMode::csrw; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiments. Each writes its artifacts and a summary block, and returns an
// exit code.

inline int run_build(const ExperimentConfig& c, const IFSSpec& spec, ArtifactWriter& w, std::ostream& log) {
    const std::size_t n = c.levels.front();
    const FractalGraph g = build_graph(spec, n);
    std::ostringstream v;
    v << "vertex";
    for (int d = 0; d < spec.dim; ++d) v << ",x" << (d + 1);
    v << '\n';
    for (std::size_t i = 0; i < g.vertex_count(); ++i) {
        v << i;
        for (int d = 0; d < spec.dim; ++d) v << ',' << detail::num(g.coordinate(static_cast<int>(i))(d));
        v << '\n';
    }
    w.write("vertices.csv", v.str());
    std::ostringstream e;
    e << "edge,u,v,cell,pair\n";
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        const auto& ed = g.edges()[i];
        e << i << ',' << ed.u << ',' << ed.v << ',' << g.cell_word(n, ed.cell).to_string() << ',' << ed.pair << '\n';
    }
    w.write("edges.csv", e.str());

    const auto check_level = std::min<std::size_t>(std::max<std::size_t>(n, 1), 2);
    const auto nest = verify_nesting(spec, check_level);
    const auto sym = verify_symmetry(spec, check_level);
    log << "level = " << n << "\nvertices = " << g.vertex_count() << "\nedges = " << g.edges().size()
        << "\nboundary = " << g.boundary_size() << "\nnesting = "
        << (nest.checked ? (nest.passed() ? "ok" : "violated") : "unchecked") << "\nsymmetry = "
        << (sym.passed() ? "ok" : "violated") << '\n';
    if (n <= 4) {
        const auto result = find_fixed_point(spec, c.tol, c.max_iter);
        std::ostringstream k;
        deterministic_resistance(spec, n, result).write_csv(k);
        w.write("resistance.csv", k.str());
    }
    return (nest.checked && !nest.passed()) || !sym.passed() ? kExitPropertyFailed : kExitOk;
}

inline int run_renorm(const ExperimentConfig& c, const IFSSpec& spec, ArtifactWriter& w, std::ostream& log) {
    const auto r = find_fixed_point(spec, c.tol, c.max_iter);
    const auto pairs = boundary_pairs(r.boundary);
    std::ostringstream block;
    block << "rho = " << detail::num(r.rho) << "\niterations = " << r.iterations << "\nresidual = " << detail::num(r.residual)
          << "\nrho_spread = " << detail::num(r.rho_spread) << "\nq_star =";
    for (double q : r.q_pairs) block << ' ' << detail::num(q);
    block << '\n';
    int code = kExitOk;
    if (c.starts > 0) {
        const auto all = multi_start_fixed_points(spec, c.starts, c.seed, c.tol, c.max_iter);
        double spread = 0.0;
        for (const auto& s : all)
            for (std::size_t p = 0; p < s.q_pairs.size(); ++p) spread = std::max(spread, std::abs(s.q_pairs[p] - r.q_pairs[p]));
        block << "starts = " << c.starts << "\nmax_start_deviation = " << detail::num(spread) << '\n';
        if (spread > 1e-6) code = kExitPropertyFailed;
    }
    log << block.str();
    w.write("renorm.txt", block.str());
    std::ostringstream csv;
    csv << "a,b,q\n";
    for (std::size_t p = 0; p < pairs.size(); ++p) csv << pairs[p].first << ',' << pairs[p].second << ',' << detail::num(r.q_pairs[p]) << '\n';
    w.write("renorm.csv", csv.str());
    return code;
}

inline std::vector<PlotSeries> scaling_plot(const ScalingReport& r) {
    PlotSeries measured{"measured " + r.statistic.name(), {}, true, true, false};
    PlotSeries fitted{"fit slope " + detail::tick_label(r.fitted_log_slope), {}, false, true, false};
    PlotSeries predicted{"predicted slope " + detail::tick_label(r.predicted_log_slope), {}, false, true, true};
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        const double n = static_cast<double>(r.levels[i]);
        measured.points.emplace_back(n, r.values[i]);
        fitted.points.emplace_back(n, std::exp(r.intercept + r.fitted_log_slope * n));
        predicted.points.emplace_back(n, r.constant_estimate * std::exp(r.predicted_log_slope * n));
    }
    return {measured, fitted, predicted};
}

inline int run_walk(const ExperimentConfig& c, const IFSSpec& spec, ArtifactWriter& w, std::ostream& log) {
    ScalingOptions opt;
    opt.levels = c.levels;
    opt.trials = c.trials;
    opt.statistic = stats::Statistic::parse(c.statistic);
    opt.seed = c.seed;
    opt.threads = c.threads;
    opt.oracle = c.oracle;
    const auto law = detail::make_law(c, spec);
    const auto r = scaling_experiment(spec, law, detail::make_mode(c.mode), opt);

    std::ostringstream ct;
    ct << "level,trial,time,jumps\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i)
        for (std::size_t t = 0; t < r.samples[i].size(); ++t)
            ct << r.levels[i] << ',' << t << ',' << detail::num(r.samples[i][t].time) << ',' << r.samples[i][t].jumps << '\n';
    w.write("crossing_times.csv", ct.str());

    std::ostringstream sr;
    sr << "level,statistic,value,fitted_value,reference_value,fitted_log_slope,predicted_log_slope\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        const double n = static_cast<double>(r.levels[i]);
        sr << r.levels[i] << ',' << r.statistic.name() << ',' << detail::num(r.values[i]) << ','
           << detail::num(std::exp(r.intercept + r.fitted_log_slope * n)) << ','
           << detail::num(r.constant_estimate * std::exp(r.predicted_log_slope * n)) << ','
           << detail::num(r.fitted_log_slope) << ',' << detail::num(r.predicted_log_slope) << '\n';
    }
    w.write("scaling_report.csv", sr.str());
    PlotOptions po{c.mode + " crossing time", "level n", r.statistic.name() + " crossing time", true};
    w.write("scaling.svg", render_svg(scaling_plot(r), po));

    log << "mode = " << c.mode << "\nstatistic = " << r.statistic.name() << "\nfitted_log_slope = "
        << detail::num(r.fitted_log_slope) << "\npredicted_log_slope = " << detail::num(r.predicted_log_slope)
        << "\nrelative_error = " << detail::num(r.relative_slope_error()) << "\nconstant_estimate = "
        << detail::num(r.constant_estimate) << "\nmonotone = " << (r.monotone ? "yes" : "no") << '\n';
    return r.monotone ? kExitOk : kExitPropertyFailed;
}

inline int run_homogenize(const ExperimentConfig& c, const IFSSpec& spec, ArtifactWriter& w, std::ostream& log) {
    HomogenizationOptions opt;
    opt.levels = c.levels;
    opt.trials = c.trials;
    opt.seed = c.seed;
    opt.threads = c.threads;
    const auto law = detail::make_law(c, spec);
    const auto r = run_homogenization(spec, law, opt);

    std::ostringstream rows;
    rows << "level,trial,D_n,c_hat\n";
    for (const auto& row : r.rows)
        rows << row.level << ',' << row.trial << ',' << detail::num(row.d_coarse) << ',' << detail::num(r.scale.c_hat) << '\n';
    w.write("homog_report.csv", rows.str());

    std::ostringstream sum;
    sum << "level,median_D_n,upper_quartile_D_n,median_D_n_fine,var_R01\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i)
        sum << r.levels[i] << ',' << detail::num(r.median_d[i]) << ',' << detail::num(r.upper_quartile_d[i]) << ','
            << detail::num(r.median_d_fine[i]) << ',' << detail::num(r.r01_variance[i]) << '\n';
    w.write("homog_summary.csv", sum.str());

    PlotSeries med{"median D_n", {}, true, true, false};
    PlotSeries uq{"upper quartile", {}, true, true, true};
    bool positive = true;
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        med.points.emplace_back(static_cast<double>(r.levels[i]), r.median_d[i]);
        uq.points.emplace_back(static_cast<double>(r.levels[i]), r.upper_quartile_d[i]);
        positive = positive && r.median_d[i] > 0.0 && r.upper_quartile_d[i] > 0.0;
    }
    PlotOptions po{"sup distance to the deterministic resistance", "level n", "D_n", positive};
    w.write("homog.svg", render_svg({med, uq}, po));

    log << "c_hat = " << detail::num(r.scale.c_hat) << "\nc_hat_bootstrap_sd = " << detail::num(r.scale.bootstrap_sd)
        << "\nupper_constant = " << detail::num(r.upper_constant) << "\nmedian_D_n =";
    for (double d : r.median_d) log << ' ' << detail::num(d);
    log << "\nstrictly_decreasing = " << (r.strictly_decreasing() ? "yes" : "no")
        << "\nhalved = " << (r.halved() ? "yes" : "no") << "\nupper_bound_held = " << (r.bound_held() ? "yes" : "no")
        << '\n';
    return r.trend_ok() && r.bound_held() ? kExitOk : kExitPropertyFailed;
}

inline int run_fin(const ExperimentConfig& c, const IFSSpec& spec, ArtifactWriter& w, std::ostream& log) {
    FinOptions opt;
    opt.levels = c.levels;
    opt.trials = c.trials;
    opt.cutoff = c.cutoff;
    opt.depth = c.depth;
    opt.seed = c.seed;
    opt.threads = c.threads;
    const auto law = detail::make_law(c, spec);
    const auto r = fin_stabilization_check(spec, law, opt);

    std::ostringstream dist;
    dist << "level,trial,family,time\n";
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        for (std::size_t t = 0; t < r.csrw[i].size(); ++t)
            dist << r.levels[i] << ',' << t << ",csrw," << detail::num(r.csrw[i][t]) << '\n';
        for (std::size_t t = 0; t < r.time_changed[i].size(); ++t)
            dist << r.levels[i] << ',' << t << ",time_changed," << detail::num(r.time_changed[i][t]) << '\n';
    }
    w.write("fin_distributions.csv", dist.str());

    const double ne = static_cast<double>(c.trials) / 2.0;  // effective size of two equal samples
    std::ostringstream ks;
    ks << "comparison,level_a,level_b,ks,p_value\n";
    PlotSeries pc{"csrw", {}, true, true, false};
    PlotSeries pt{"time changed", {}, true, true, true};
    for (std::size_t i = 0; i < r.ks_csrw.size(); ++i) {
        ks << "csrw," << r.levels[i] << ',' << r.levels[i + 1] << ',' << detail::num(r.ks_csrw[i]) << ','
           << detail::num(stats::ks_p_value(r.ks_csrw[i], ne)) << '\n';
        pc.points.emplace_back(static_cast<double>(r.levels[i + 1]), r.ks_csrw[i]);
    }
    for (std::size_t i = 0; i < r.ks_time_changed.size(); ++i) {
        ks << "time_changed," << r.levels[i] << ',' << r.levels[i + 1] << ',' << detail::num(r.ks_time_changed[i]) << ','
           << detail::num(stats::ks_p_value(r.ks_time_changed[i], ne)) << '\n';
        pt.points.emplace_back(static_cast<double>(r.levels[i + 1]), r.ks_time_changed[i]);
    }
    ks << "cross_median_normalized," << r.levels.back() << ',' << r.levels.back() << ',' << detail::num(r.ks_cross_top)
       << ',' << detail::num(stats::ks_p_value(r.ks_cross_top, ne)) << '\n';
    w.write("ks_report.csv", ks.str());
    PlotOptions po{"consecutive-level KS distance", "finer level", "KS distance", false};
    w.write("fin_ks.svg", render_svg({pc, pt}, po));

    log << "ks_csrw =";
    for (double d : r.ks_csrw) log << ' ' << detail::num(d);
    log << "\nks_time_changed =";
    for (double d : r.ks_time_changed) log << ' ' << detail::num(d);
    log << "\nks_cross_top = " << detail::num(r.ks_cross_top) << "\nzero_time_trials = " << r.zero_time_trials
        << "\ncsrw_weakly_decreasing = " << (r.csrw_decreasing() ? "yes" : "no") << '\n';
    return r.csrw_decreasing() ? kExitOk : kExitPropertyFailed;
}

// ---------------------------------------------------------------------------
// Manifest

inline nlohmann::ordered_json make_manifest(const ResolvedConfig& rc, const IFSSpec& spec, const ArtifactWriter& w,
                                            const std::string& started, const std::string& finished, int code) {
    nlohmann::ordered_json m;
    m["version"] = kVersion;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_listing(rc.config)) cfg[k] = v;
    m["config"] = cfg;
    m["fractal_spec"] = fractal_to_text(spec);
    m["seed"] = rc.config.seed;
    nlohmann::ordered_json ov = nlohmann::ordered_json::array();
    for (const auto& o : rc.overrides) ov.push_back({{"key", o.key}, {"file", o.file_value}, {"flag", o.flag_value}});
    m["overrides"] = ov;
    m["started"] = started;
    m["finished"] = finished;
    m["exit_code"] = code;
    nlohmann::ordered_json art = nlohmann::ordered_json::object();
    for (const auto& [name, sum] : w.files()) art[name] = sum;
    m["artifacts"] = art;
    return m;
}

/// Runs the configured experiment, writes artifacts and then manifest.json.
inline int dispatch(const ResolvedConfig& rc, std::ostream& log) {
    const ExperimentConfig& c = rc.config;
    const auto started = detail::iso_time(std::chrono::system_clock::now());
    const IFSSpec spec = c.spec();
    ArtifactWriter w(c.out);
    int code = kExitOk;
    switch (c.experiment) {
        case Experiment::build: code = run_build(c, spec, w, log); break;
        case Experiment::renorm: code = run_renorm(c, spec, w, log); break;
        case Experiment::homogenize: code = run_homogenize(c, spec, w, log); break;
        case Experiment::walk: code = run_walk(c, spec, w, log); break;
        case Experiment::fin: code = run_fin(c, spec, w, log); break;
    }
    const auto finished = detail::iso_time(std::chrono::system_clock::now());
    std::ofstream(std::filesystem::path(c.out) / "manifest.json") << make_manifest(rc, spec, w, started, finished, code).dump(2) << '\n';
    return code;
}

/// Config flags reconstructing a manifest's run; `out` and `threads` may be
/// replaced.
inline std::vector<std::pair<std::string, std::string>> manifest_flags(const nlohmann::json& m) {
    std::vector<std::pair<std::string, std::string>> flags;
    for (const auto& [k, v] : m.at("config").items())
        if (k != "fractal") flags.emplace_back(k, v.get<std::string>());
    std::istringstream spec(m.at("fractal_spec").get<std::string>());
    std::string line;
    while (std::getline(spec, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) flags.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    return flags;
}

struct ReplayOutcome {
    int code = kExitOk;
    std::vector<std::string> mismatched;
};

/// Re-runs a manifest into `out` and compares artifact checksums.
inline ReplayOutcome replay(const std::string& manifest_path, const std::string& out, std::optional<unsigned> threads,
                            std::ostream& log) {
    const auto m = nlohmann::json::parse(read_file(manifest_path));
    auto flags = manifest_flags(m);
    for (auto& [k, v] : flags) {
        if (k == "out") v = out;
        if (k == "threads" && threads) v = std::to_string(*threads);
    }
    const ResolvedConfig rc = resolve_config({}, manifest_path, flags);
    ReplayOutcome r;
    const int code = dispatch(rc, log);
    for (const auto& [name, sum] : m.at("artifacts").items()) {
        const auto p = std::filesystem::path(out) / name;
        if (!std::filesystem::exists(p) || checksum_hex(read_file(p)) != sum.get<std::string>()) r.mismatched.push_back(name);
    }
    r.code = !r.mismatched.empty() ? kExitPropertyFailed : code;
    return r;
}

}  // namespace rcm
