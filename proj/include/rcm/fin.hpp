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
#include "rcm/scaling.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace rcm {

/// Assigns each atom to the nearest vertex of its level-n cell (the cell of
/// the length-n prefix of its word); ties go to the lowest vertex index.
inline std::vector<double> project_traps(const TrapMeasure& measure, const FractalGraph& graph) {
    const std::size_t n = graph.level();
    if (measure.depth < n) throw ArgumentError("fin_timechange", "trap words are shallower than the graph level");
    const IFSSpec& spec = graph.spec();
    std::vector<double> theta(graph.vertex_count(), 0.0);
    for (const auto& atom : measure.atoms) {
        const Point x = atom.word.apply(spec, Point::Zero(spec.dim));
        const auto cell = graph.cell(n, atom.word.prefix(n).index(spec.size()));
        int best = -1;
        double best_d = 0.0;
        for (int v : cell) {
            const double d = (graph.coordinate(v) - x).squaredNorm();
            if (best < 0 || d < best_d || (d == best_d && v < best)) {
                best = v;
                best_d = d;
            }
        }
        theta[static_cast<std::size_t>(best)] += atom.mass;
    }
    return theta;
}

/// Jump chain of a base field with holding means theta(x) / nu(x).
struct TimeChangedSetup {
    WalkNetwork base;
    std::vector<double> theta;

    TimeChangedSetup(const Network& net, std::vector<double> masses) : base(net), theta(std::move(masses)) {
        if (theta.size() != base.vertex_count()) throw ArgumentError("fin_timechange", "trap masses do not match the graph");
        double total = 0.0;
        for (double t : theta) {
            if (!(t >= 0.0)) throw ArgumentError("fin_timechange", "trap masses must be nonnegative");
            total += t;
        }
        if (!(total > 0.0)) throw ArgumentError("fin_timechange", "trap measure has no mass");
    }
};

inline WalkResult simulate_time_changed(const TimeChangedSetup& setup, const WalkConfig& cfg, WalkStreams& streams) {
    if (cfg.mode != WalkMode::time_changed) throw ArgumentError("fin_timechange", "simulate_time_changed needs mode time_changed");
    return simulate_walk(setup.base, holding_means(setup.base, WalkMode::time_changed, setup.theta), cfg, streams);
}

struct FinOptions {
    std::vector<std::size_t> levels;
    std::size_t trials = 100;
    double cutoff = 1e-3;
    std::size_t depth = 0;  // 0: twice the level
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct FinReport {
    std::vector<std::size_t> levels;
    /// Rescaled crossing times per level, by trial.
    std::vector<std::vector<double>> csrw;
    std::vector<std::vector<double>> time_changed;
    std::vector<double> csrw_scale;  // divisor applied per level
    std::vector<double> time_changed_scale;
    /// KS distance between level i and level i+1.
    std::vector<double> ks_csrw;
    std::vector<double> ks_time_changed;
    /// Top level, both families divided by their medians.
    double ks_cross_top = 0.0;
    std::size_t zero_time_trials = 0;

    bool csrw_decreasing() const { return stats::weakly_decreasing(ks_csrw); }
    bool time_changed_decreasing() const { return stats::weakly_decreasing(ks_time_changed); }
};

namespace detail {

inline std::vector<double> median_normalized(std::vector<double> x) {
    const double m = stats::median(x);
    if (!(m > 0.0)) throw ArgumentError("fin_timechange", "median crossing time is zero");
    for (auto& v : x) v /= m;
    return x;
}

}  // namespace detail

/// Annealed CSRW crossing times under `law`, rescaled by the predicted time
/// scale, next to time-changed walks on the invariant deterministic field
/// with projected Poisson trap measures, rescaled by rho^n.
inline FinReport fin_stabilization_check(const IFSSpec& spec, const ConductanceLaw& law, const FinOptions& opt) {
    if (opt.levels.size() < 3) throw ArgumentError("fin_timechange", "stabilization check needs at least 3 levels");
    if (opt.trials < 100) throw ArgumentError("fin_timechange", "stabilization check needs at least 100 trials");
    const double alpha = law.family == LawFamily::pareto ? law.alpha : 0.5;
    const RenormResult renorm = find_fixed_point(spec);
    const double csrw_slope = predicted_log_slope(renorm.rho, spec.size(), WalkMode::csrw, law);

    FinReport rep;
    rep.levels = opt.levels;
    for (std::size_t level : opt.levels) {
        auto graph = std::make_shared<const FractalGraph>(build_graph(spec, level));
        const double csrw_scale = std::exp(csrw_slope * static_cast<double>(level));
        const double tc_scale = std::pow(renorm.rho, static_cast<double>(level));
        const Network base = pattern_field(graph, renorm.q_pairs, 1.0).network();
        const auto targets = crossing_targets(*graph);
        const std::size_t depth = opt.depth ? opt.depth : 2 * level;

        std::vector<double> c(opt.trials);
        std::vector<double> tc(opt.trials);
        std::vector<char> zero(opt.trials, 0);
        parallel_for(opt.trials, opt.threads, [&](std::size_t t) {
            c[t] = crossing_sample(graph, law, WalkMode::csrw, opt.seed, t).time / csrw_scale;
            Engine rng = SeededStream{opt.seed, t, level, "traps"}.engine();
            const auto traps = sample_trap_measure(spec, alpha, opt.cutoff, depth, rng);
            auto theta = project_traps(traps, *graph);
            double total = 0.0;
            for (double v : theta) total += v;
            if (!(total > 0.0)) {
                zero[t] = 1;
                tc[t] = 0.0;
                return;
            }
            const TimeChangedSetup setup(base, std::move(theta));
            WalkConfig cfg;
            cfg.mode = WalkMode::time_changed;
            cfg.hit_set = targets;
            auto streams = WalkStreams::from(opt.seed ^ 0x9e3779b97f4a7c15ULL, t, level);
            const auto r = simulate_time_changed(setup, cfg, streams);
            zero[t] = r.elapsed_time == 0.0;
            tc[t] = r.elapsed_time / tc_scale;
        });
        for (char z : zero) rep.zero_time_trials += static_cast<std::size_t>(z);
        rep.csrw.push_back(std::move(c));
        rep.time_changed.push_back(std::move(tc));
        rep.csrw_scale.push_back(csrw_scale);
        rep.time_changed_scale.push_back(tc_scale);
    }
    for (std::size_t i = 0; i + 1 < rep.levels.size(); ++i) {
        rep.ks_csrw.push_back(stats::ks_distance(rep.csrw[i], rep.csrw[i + 1]));
        rep.ks_time_changed.push_back(stats::ks_distance(rep.time_changed[i], rep.time_changed[i + 1]));
    }
    rep.ks_cross_top = stats::ks_distance(detail::median_normalized(rep.csrw.back()),
                                          detail::median_normalized(rep.time_changed.back()));
    return rep;
}

}  // namespace rcm
