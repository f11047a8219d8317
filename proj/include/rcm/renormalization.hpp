#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rcm/conductance.hpp"
#include "rcm/error.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/hierarchical.hpp"
#include "rcm/random.hpp"
#include "rcm/resistance.hpp"

namespace rcm {

/// Invariant boundary conductances q* on V_0 and the resistance scale rho.
///
/// q_pairs follows FractalGraph::pairs() order and is scaled so that the mean
/// row sum of the conductance matrix is 1; for the shipped presets every row
/// sums to 1, so q* is itself a stochastic matrix.
struct RenormResult {
    std::vector<double> q_pairs;
    std::size_t boundary = 0;
    double rho = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;
    double rho_spread = 0.0;
    std::vector<double> residual_history;

    BoundaryForm q_star() const {
        BoundaryForm f;
        const auto nb = static_cast<Eigen::Index>(boundary);
        f.conductance = Eigen::MatrixXd::Zero(nb, nb);
        const auto pairs = boundary_pairs(boundary);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            f.conductance(pairs[p].first, pairs[p].second) = q_pairs[p];
            f.conductance(pairs[p].second, pairs[p].first) = q_pairs[p];
        }
        for (std::size_t a = 0; a < boundary; ++a) f.vertices.push_back(static_cast<int>(a));
        return f;
    }

    /// Jump chain of q*: P(x, y) = q_xy / sum_z q_xz.
    Eigen::MatrixXd transition_matrix() const {
        Eigen::MatrixXd p = q_star().conductance;
        for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
        return p;
    }
};

inline std::vector<double> pairs_from_form(const BoundaryForm& q) {
    std::vector<double> out;
    for (const auto& [a, b] : boundary_pairs(q.size())) out.push_back(q.conductance(a, b));
    return out;
}

/// One replicate-and-trace step on per-pair conductances.
inline std::vector<double> renorm_map(const CellTemplate& t, std::span<const double> q) {
    if (q.size() != t.pair_count())
        throw ArgumentError("renormalization", "boundary form has " + std::to_string(q.size()) + " pairs, expected " +
                                                   std::to_string(t.pair_count()));
    std::vector<double> children;
    children.reserve(t.maps * q.size());
    for (std::size_t i = 0; i < t.maps; ++i) children.insert(children.end(), q.begin(), q.end());
    std::vector<double> out(q.size());
    t.trace_children(children, out);
    return out;
}

/// Puts q on every 1-cell (through each cell's V_0 labelling) and traces
/// G_1 back onto V_0.
inline BoundaryForm renorm_map(const IFSSpec& spec, const BoundaryForm& q) {
    const CellTemplate t = CellTemplate::from(spec);
    if (q.size() != t.boundary)
        throw ArgumentError("renormalization", "boundary form on " + std::to_string(q.size()) +
                                                   " vertices cannot be matched to |V_0| = " + std::to_string(t.boundary));
    if (!q.connected()) throw ArgumentError("renormalization", "boundary form is not connected");
    const auto out = renorm_map(t, pairs_from_form(q));
    BoundaryForm f = q;
    f.conductance.setZero();
    const auto pairs = boundary_pairs(t.boundary);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        f.conductance(pairs[p].first, pairs[p].second) = out[p];
        f.conductance(pairs[p].second, pairs[p].first) = out[p];
    }
    return f;
}

namespace detail {

inline double first_positive(std::span<const double> q) {
    for (double v : q)
        if (v > 0.0) return v;
    throw ArgumentError("renormalization", "boundary form has no positive conductance");
}

}  // namespace detail

inline constexpr double kDefaultRenormTolerance = 1e-12;
inline constexpr std::size_t kDefaultRenormMaxIter = 10000;

/// Iterates q -> normalize(renorm_map(q)) until successive normalized forms
/// agree to `tol` (max-norm) and the entrywise ratios q / renorm_map(q) agree
/// to `tol`; rho is their mean.
inline RenormResult find_fixed_point(const IFSSpec& spec, double tol = kDefaultRenormTolerance,
                                     std::size_t max_iter = kDefaultRenormMaxIter,
                                     std::optional<std::vector<double>> start = std::nullopt) {
    if (!(tol > 0.0)) throw ArgumentError("renormalization", "tolerance must be positive");
    if (max_iter == 0) throw ArgumentError("renormalization", "max_iter must be positive");
    const CellTemplate t = CellTemplate::from(spec);
    std::vector<double> q = start.value_or(std::vector<double>(t.pair_count(), 1.0));
    if (q.size() != t.pair_count()) throw ArgumentError("renormalization", "starting form has the wrong size");
    {
        const double s = detail::first_positive(q);
        for (auto& v : q) v /= s;
    }

    RenormResult r;
    r.boundary = t.boundary;
    std::size_t converged_for = 0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        const auto out = renorm_map(t, q);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t p = 0; p < q.size(); ++p) {
            if (!(q[p] > 0.0)) continue;
            const double ratio = q[p] / out[p];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            sum += ratio;
            ++cnt;
        }
        const double s = detail::first_positive(out);
        double residual = 0.0;
        std::vector<double> next(out.size());
        for (std::size_t p = 0; p < out.size(); ++p) {
            next[p] = out[p] / s;
            residual = std::max(residual, std::abs(next[p] - q[p]));
        }
        r.residual_history.push_back(residual);
        r.iterations = it;
        r.residual = residual;
        r.rho = sum / static_cast<double>(cnt);
        r.rho_spread = hi - lo;
        q = std::move(next);
        if (residual < tol) {
            if (r.rho_spread < tol) break;
            if (++converged_for > 100)
                throw ConvergenceError("renormalization",
                                       "iteration converged to a non-scalar fixed point (rho spread " +
                                           std::to_string(r.rho_spread) + ")",
                                       residual);
        }
        if (it == max_iter)
            throw ConvergenceError("renormalization", "no convergence in " + std::to_string(max_iter) + " iterations",
                                   residual);
    }

    double row_total = 0.0;
    for (double v : q) row_total += 2.0 * v;
    const double scale = static_cast<double>(t.boundary) / row_total;
    for (auto& v : q) v *= scale;
    r.q_pairs = std::move(q);
    if (!(r.rho > 1.0)) throw ConvergenceError("renormalization", "resistance scale factor is not above 1", r.residual);
    return r;
}

/// Permutations of V_0 generated by the bisector reflections of V_0 pairs
/// that map V_0 onto itself, identity included.
inline std::vector<std::vector<int>> boundary_symmetry_group(const IFSSpec& spec) {
    const auto v0 = essential_fixed_points(spec);
    const int nb = static_cast<int>(v0.size());
    std::vector<int> identity(static_cast<std::size_t>(nb));
    for (int i = 0; i < nb; ++i) identity[static_cast<std::size_t>(i)] = i;
    std::vector<std::vector<int>> generators;
    for (int x = 0; x < nb; ++x)
        for (int y = x + 1; y < nb; ++y) {
            const Point mid = (v0[x] + v0[y]) / 2.0;
            const Point normal = (v0[x] - v0[y]).normalized();
            std::vector<int> perm(static_cast<std::size_t>(nb), -1);
            for (int i = 0; i < nb; ++i) {
                const Point z = v0[i] - 2.0 * (v0[i] - mid).dot(normal) * normal;
                for (int j = 0; j < nb; ++j)
                    if ((v0[j] - z).norm() < 1e-9) perm[static_cast<std::size_t>(i)] = j;
            }
            if (std::find(perm.begin(), perm.end(), -1) == perm.end()) generators.push_back(std::move(perm));
        }
    std::vector<std::vector<int>> group = {identity};
    for (std::size_t k = 0; k < group.size(); ++k)
        for (const auto& g : generators) {
            std::vector<int> next(static_cast<std::size_t>(nb));
            for (int i = 0; i < nb; ++i) next[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(group[k][static_cast<std::size_t>(i)])];
            if (std::find(group.begin(), group.end(), next) == group.end()) group.push_back(std::move(next));
        }
    return group;
}

/// Fixed-point searches from random starting forms that are positive and
/// invariant under the V_0 symmetries, to probe uniqueness.
inline std::vector<RenormResult> multi_start_fixed_points(const IFSSpec& spec, std::size_t starts, std::uint64_t seed,
                                                          double tol = kDefaultRenormTolerance,
                                                          std::size_t max_iter = kDefaultRenormMaxIter) {
    const std::size_t nb = essential_fixed_points(spec).size();
    const auto pairs = boundary_pairs(nb);
    const std::size_t np = pairs.size();
    const auto group = boundary_symmetry_group(spec);
    auto symmetrize = [&](const std::vector<double>& q) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nb));
        for (const auto& g : group)
            for (std::size_t p = 0; p < np; ++p) {
                const int a = g[static_cast<std::size_t>(pairs[p].first)];
                const int b = g[static_cast<std::size_t>(pairs[p].second)];
                m(a, b) += q[p];
                m(b, a) += q[p];
            }
        std::vector<double> out(np);
        for (std::size_t p = 0; p < np; ++p) out[p] = m(pairs[p].first, pairs[p].second) / static_cast<double>(group.size());
        return out;
    };
    std::vector<RenormResult> out;
    for (std::size_t s = 0; s < starts; ++s) {
        Engine rng = SeededStream{seed, s, 0, "renorm-start"}.engine();
        std::vector<double> q(np);
        for (auto& v : q) v = 0.1 + 0.9 * uniform01(rng);
        q = symmetrize(q);
        out.push_back(find_fixed_point(spec, tol, max_iter, q));
    }
    return out;
}

/// Conductance rho^n * q*_{ab} on the edge between psi_w(x_a) and psi_w(x_b)
/// of every n-cell w; resistances then contract by 1/rho per level.
inline ConductanceField deterministic_field(std::shared_ptr<const FractalGraph> graph, const RenormResult& result) {
    const double factor = std::pow(result.rho, static_cast<double>(graph->level()));
    return pattern_field(std::move(graph), result.q_pairs, factor);
}

/// R_n on all of V_n.
inline ResistanceKernel deterministic_resistance(const IFSSpec& spec, std::size_t n, const RenormResult& result) {
    auto graph = std::make_shared<const FractalGraph>(build_graph(spec, n));
    return pairwise_resistance(deterministic_field(graph, result).network());
}

}  // namespace rcm
