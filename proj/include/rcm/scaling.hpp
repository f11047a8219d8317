#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/error.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/parallel.hpp"
#include "rcm/renormalization.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

struct CrossingSample {
    double time = 0.0;
    std::uint64_t jumps = 0;
};

struct ScalingReport {
    WalkMode mode = WalkMode::csrw;
    std::vector<std::size_t> levels;
    stats::Statistic statistic;
    std::vector<double> values;
    std::vector<std::vector<CrossingSample>> samples;  // per level, by trial
    double fitted_log_slope = 0.0;
    double intercept = 0.0;
    double predicted_log_slope = 0.0;
    /// exp(mean_n(log value_n - n * predicted)): the time-scale constant the
    /// prediction leaves free.
    double constant_estimate = 0.0;
    bool monotone = false;

    double relative_slope_error() const {
        return std::abs(fitted_log_slope - predicted_log_slope) / predicted_log_slope;
    }
};

struct ScalingOptions {
    std::vector<std::size_t> levels;
    std::size_t trials = 1;
    stats::Statistic statistic;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Replace Monte Carlo by the exact expected crossing time on one
    /// environment per level (meaningful for deterministic laws).
    bool oracle = false;
};

/// The targets of the crossing observable: V_0 without the marked point 0.
inline std::vector<int> crossing_targets(const FractalGraph& g) {
    std::vector<int> t;
    for (std::size_t v = 1; v < g.boundary_size(); ++v) t.push_back(static_cast<int>(v));
    return t;
}

inline ConductanceField trial_environment(std::shared_ptr<const FractalGraph> graph, const ConductanceLaw& law,
                                          std::uint64_t seed, std::uint64_t trial) {
    Engine rng = SeededStream{seed, trial, graph->level(), "environment"}.engine();
    return sample_environment(std::move(graph), law, rng);
}

/// One annealed sample: fresh environment, one walk from 0 to V_0 \ {0}.
inline CrossingSample crossing_sample(std::shared_ptr<const FractalGraph> graph, const ConductanceLaw& law, WalkMode mode,
                                      std::uint64_t seed, std::uint64_t trial) {
    const std::size_t level = graph->level();
    const auto targets = crossing_targets(*graph);
    const WalkNetwork net(trial_environment(std::move(graph), law, seed, trial).network());
    WalkConfig cfg;
    cfg.mode = mode;
    cfg.start = 0;
    cfg.hit_set = targets;
    auto streams = WalkStreams::from(seed, trial, level);
    const auto r = simulate(net, cfg, streams);
    return {r.elapsed_time, r.jumps};
}

/// Predicted log growth per level of the crossing time: log(rho N) for the
/// VSRW and for light-tailed laws, log(rho N^{1/alpha}) for the CSRW under
/// an alpha-stable cell-sum tail.
inline double predicted_log_slope(double rho, std::size_t maps, WalkMode mode, const ConductanceLaw& law) {
    const double n = static_cast<double>(maps);
    if (mode == WalkMode::csrw && law.family == LawFamily::pareto) return std::log(rho) + std::log(n) / law.alpha;
    return std::log(rho * n);
}

inline ScalingReport scaling_experiment(const IFSSpec& spec, const ConductanceLaw& law, WalkMode mode,
                                        const ScalingOptions& opt) {
    if (opt.levels.size() < 3) throw ArgumentError("walk_simulator", "scaling fit needs at least 3 levels");
    if (mode == WalkMode::time_changed) throw ArgumentError("walk_simulator", "scaling experiment runs the VSRW or CSRW");
    if (!opt.oracle && opt.trials < 1) throw ArgumentError("walk_simulator", "trials must be >= 1");
    law.validate();
    const RenormResult renorm = find_fixed_point(spec);

    ScalingReport rep;
    rep.mode = mode;
    rep.levels = opt.levels;
    rep.statistic = opt.statistic;
    rep.predicted_log_slope = predicted_log_slope(renorm.rho, spec.size(), mode, law);
    for (std::size_t level : opt.levels) {
        auto graph = std::make_shared<const FractalGraph>(build_graph(spec, level));
        if (opt.oracle) {
            const Network net = trial_environment(graph, law, opt.seed, 0).network();
            const double t = crossing_oracle(net, speed_measure(net, mode), 0, crossing_targets(*graph));
            rep.samples.push_back({{t, 0}});
            rep.values.push_back(t);
            continue;
        }
        std::vector<CrossingSample> out(opt.trials);
        parallel_for(opt.trials, opt.threads, [&](std::size_t t) { out[t] = crossing_sample(graph, law, mode, opt.seed, t); });
        std::vector<double> times;
        for (const auto& s : out) times.push_back(s.time);
        rep.values.push_back(opt.statistic(times));
        rep.samples.push_back(std::move(out));
    }

    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < rep.levels.size(); ++i) {
        if (!(rep.values[i] > 0.0)) throw ArgumentError("walk_simulator", "degenerate fit: non-positive crossing statistic");
        x.push_back(static_cast<double>(rep.levels[i]));
        y.push_back(std::log(rep.values[i]));
    }
    const auto fit = stats::least_squares(x, y);
    rep.fitted_log_slope = fit.slope;
    rep.intercept = fit.intercept;
    double offset = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) offset += y[i] - x[i] * rep.predicted_log_slope;
    rep.constant_estimate = std::exp(offset / static_cast<double>(x.size()));
    rep.monotone = stats::strictly_increasing(rep.values);
    return rep;
}

}  // namespace rcm
