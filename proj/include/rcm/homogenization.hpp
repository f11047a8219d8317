#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/error.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/hierarchical.hpp"
#include "rcm/parallel.hpp"
#include "rcm/renormalization.hpp"
#include "rcm/resistance.hpp"
#include "rcm/stats.hpp"

namespace rcm {

/// R_n^omega: resistances of the level-n field with conductance
/// c_hat * rho^n * omega_e on every edge (the convention of
/// deterministic_resistance).
inline ResistanceKernel random_resistance(const ConductanceField& field, const RenormResult& result, double c_hat) {
    if (!(c_hat > 0.0)) throw ArgumentError("homogenization_experiment", "c_hat must be positive");
    const double factor = c_hat * std::pow(result.rho, static_cast<double>(field.graph->level()));
    return pairwise_resistance(field.scaled(factor).network());
}

/// Same kernel restricted to V_k, by eliminating cell interiors.
inline ResistanceKernel random_resistance(const ConductanceField& field, const RenormResult& result, double c_hat,
                                          std::size_t k, const CellTemplate& tmpl) {
    if (!(c_hat > 0.0)) throw ArgumentError("homogenization_experiment", "c_hat must be positive");
    const double factor = c_hat * std::pow(result.rho, static_cast<double>(field.graph->level()));
    return hierarchical_resistance(field.scaled(factor), k, &tmpl);
}

/// Constant C with R_n^omega <= C R_n entrywise whenever every weight is at
/// least `lower_bound` (Rayleigh monotonicity against rho^n q).
inline double resistance_upper_constant(const RenormResult& result, double c_hat, double lower_bound) {
    return *std::max_element(result.q_pairs.begin(), result.q_pairs.end()) / (c_hat * lower_bound);
}

struct ScaleEstimate {
    double c_hat = 0.0;
    double bootstrap_sd = 0.0;
    std::vector<double> ratios;  // trial-major, V_0 pairs minor
};

inline constexpr std::size_t kBootstrapReplicates = 200;

/// c_hat := median over trials and V_0 pairs of R^raw(x,y) / R(x,y), where
/// R^raw carries conductances rho^n * omega, so that dividing R^raw by c_hat
/// lands on R. Bootstrap over trials gives the spread.
inline ScaleEstimate estimate_c(const IFSSpec& spec, const RenormResult& result, const ConductanceLaw& law,
                                std::size_t n_ref, std::size_t trials, std::uint64_t seed, unsigned threads = 1) {
    if (n_ref < 2) throw ArgumentError("homogenization_experiment", "n_ref must be >= 2");
    if (trials < 100) throw ArgumentError("homogenization_experiment", "estimate_c needs at least 100 trials");
    auto graph = std::make_shared<const FractalGraph>(build_graph(spec, n_ref));
    const CellTemplate tmpl = CellTemplate::from(spec);
    const auto det = deterministic_resistance(spec, 0, result);
    const auto pairs = graph->pairs();
    const std::size_t np = pairs.size();

    ScaleEstimate est;
    est.ratios.assign(trials * np, 0.0);
    parallel_for(trials, threads, [&](std::size_t t) {
        Engine rng = SeededStream{seed, t, n_ref, "c-estimate"}.engine();
        const auto field = sample_environment(graph, law, rng);
        const auto raw = random_resistance(field, result, 1.0, 0, tmpl);
        for (std::size_t p = 0; p < np; ++p)
            est.ratios[t * np + p] = raw(pairs[p].first, pairs[p].second) / det(pairs[p].first, pairs[p].second);
    });
    est.c_hat = stats::median(est.ratios);

    Engine boot = SeededStream{seed, 0, n_ref, "c-bootstrap"}.engine();
    std::vector<double> reps;
    std::vector<double> resample(est.ratios.size());
    for (std::size_t b = 0; b < kBootstrapReplicates; ++b) {
        for (std::size_t t = 0; t < trials; ++t) {
            const auto pick = static_cast<std::size_t>(uniform01(boot) * static_cast<double>(trials));
            for (std::size_t p = 0; p < np; ++p) resample[t * np + p] = est.ratios[pick * np + p];
        }
        reps.push_back(stats::median(resample));
    }
    est.bootstrap_sd = std::sqrt(stats::variance(reps));
    return est;
}

struct HomogenizationOptions {
    std::vector<std::size_t> levels;
    std::size_t trials = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t coarse_level = 2;        // comparison set V_k with k = min(n, coarse_level)
    std::size_t full_sup_max_level = 3;  // full V_n sup up to this level
    std::size_t sampled_vertices = 16;   // random vertices for the V_n sup above it
    std::size_t scale_trials = 200;
};

struct HomogenizationRow {
    std::size_t level = 0;
    std::size_t trial = 0;
    double d_coarse = 0.0;  // sup over V_k
    double d_fine = 0.0;    // sup over V_n, or over sampled vertices
    double r01 = 0.0;       // R_n^omega between the first two points of V_0
    bool bound_ok = true;
};

struct HomogenizationReport {
    std::vector<std::size_t> levels;
    std::vector<HomogenizationRow> rows;  // level-major, trial-minor
    std::vector<double> median_d;
    std::vector<double> upper_quartile_d;
    std::vector<double> median_d_fine;
    std::vector<double> r01_variance;
    ScaleEstimate scale;
    double upper_constant = 0.0;
    std::size_t trials = 0;
    std::uint64_t seed = 0;

    bool strictly_decreasing() const { return stats::strictly_decreasing(median_d); }
    bool halved() const { return median_d.back() <= 0.5 * median_d.front(); }
    bool bound_held() const {
        return std::all_of(rows.begin(), rows.end(), [](const HomogenizationRow& r) { return r.bound_ok; });
    }
    /// True when both medians vanish identically (degenerate laws).
    bool trend_ok() const {
        if (median_d.front() == 0.0 || *std::max_element(median_d.begin(), median_d.end()) < 1e-10) return true;
        return strictly_decreasing() && halved();
    }
};

namespace detail {

inline double sup_distance(const ResistanceKernel& a, const ResistanceKernel& b, std::span<const int> subset) {
    double d = 0.0;
    for (std::size_t i = 0; i < subset.size(); ++i)
        for (std::size_t j = i + 1; j < subset.size(); ++j)
            d = std::max(d, std::abs(a(subset[i], subset[j]) - b(subset[i], subset[j])));
    return d;
}

inline bool below(const ResistanceKernel& r, const ResistanceKernel& det, std::span<const int> subset, double c) {
    for (std::size_t i = 0; i < subset.size(); ++i)
        for (std::size_t j = i + 1; j < subset.size(); ++j)
            if (r(subset[i], subset[j]) > c * det(subset[i], subset[j]) * (1.0 + 1e-9)) return false;
    return true;
}

inline std::vector<int> prefix(std::size_t count) {
    std::vector<int> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = static_cast<int>(i);
    return v;
}

}  // namespace detail

inline HomogenizationReport run_homogenization(const IFSSpec& spec, const ConductanceLaw& law,
                                               const HomogenizationOptions& opt) {
    if (opt.levels.empty()) throw ArgumentError("homogenization_experiment", "no levels requested");
    if (opt.trials < 1) throw ArgumentError("homogenization_experiment", "trials must be >= 1");
    law.validate();
    const RenormResult result = find_fixed_point(spec);
    const CellTemplate tmpl = CellTemplate::from(spec);
    const std::size_t top = *std::max_element(opt.levels.begin(), opt.levels.end());

    HomogenizationReport rep;
    rep.levels = opt.levels;
    rep.trials = opt.trials;
    rep.seed = opt.seed;
    rep.scale = estimate_c(spec, result, law, std::max<std::size_t>(top, 2), std::max<std::size_t>(opt.scale_trials, 100),
                           opt.seed, opt.threads);
    rep.upper_constant = resistance_upper_constant(result, rep.scale.c_hat, law.lower_bound);

    for (std::size_t n : opt.levels) {
        auto graph = std::make_shared<const FractalGraph>(build_graph(spec, n));
        const std::size_t k = std::min(n, opt.coarse_level);
        const auto coarse_set = detail::prefix(graph->vertex_count_at(k));
        const bool full = n <= opt.full_sup_max_level;
        const auto det = deterministic_resistance(spec, n, result);

        std::vector<HomogenizationRow> rows(opt.trials);
        parallel_for(opt.trials, opt.threads, [&](std::size_t t) {
            Engine rng = SeededStream{opt.seed, t, n, "environment"}.engine();
            const auto field = sample_environment(graph, law, rng);
            HomogenizationRow& row = rows[t];
            row.level = n;
            row.trial = t;
            const auto coarse = random_resistance(field, result, rep.scale.c_hat, k, tmpl);
            row.d_coarse = detail::sup_distance(coarse, det, coarse_set);
            row.r01 = coarse(0, 1);
            row.bound_ok = detail::below(coarse, det, coarse_set, rep.upper_constant);

            std::vector<int> fine_set;
            if (full) {
                fine_set = detail::prefix(graph->vertex_count());
            } else {
                Engine pick = SeededStream{opt.seed, t, n, "sup-sample"}.engine();
                std::vector<int> all = detail::prefix(graph->vertex_count());
                for (std::size_t i = 0; i < opt.sampled_vertices && i < all.size(); ++i) {
                    const auto j = i + static_cast<std::size_t>(uniform01(pick) * static_cast<double>(all.size() - i));
                    std::swap(all[i], all[j]);
                    fine_set.push_back(all[i]);
                }
                std::sort(fine_set.begin(), fine_set.end());
            }
            const double factor = rep.scale.c_hat * std::pow(result.rho, static_cast<double>(n));
            const auto fine = pairwise_resistance(field.scaled(factor).network(), fine_set);
            row.d_fine = detail::sup_distance(fine, det, fine_set);
            row.bound_ok = row.bound_ok && detail::below(fine, det, fine_set, rep.upper_constant);
        });

        std::vector<double> d, df, r;
        for (const auto& row : rows) {
            d.push_back(row.d_coarse);
            df.push_back(row.d_fine);
            r.push_back(row.r01);
        }
        rep.median_d.push_back(stats::median(d));
        rep.upper_quartile_d.push_back(stats::quantile(d, 0.75));
        rep.median_d_fine.push_back(stats::median(df));
        rep.r01_variance.push_back(r.size() > 1 ? stats::variance(r) : 0.0);
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    return rep;
}

}  // namespace rcm
