#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rcm/conductance.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/resistance.hpp"

namespace rcm {

/// The level-1 picture of one cell: how the N children's boundary points are
/// identified inside their parent. By self-similarity it is the same for every
/// cell at every level, which is what makes cell-by-cell elimination exact.
struct CellTemplate {
    std::size_t maps = 0;
    std::size_t boundary = 0;        // |V_0|
    std::size_t local_vertices = 0;  // |V_1|
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> child_local;  // child i, boundary index a -> local vertex

    static CellTemplate from(const IFSSpec& spec) {
        const FractalGraph g1 = build_graph(spec, 1);
        CellTemplate t;
        t.maps = spec.size();
        t.boundary = g1.boundary_size();
        t.local_vertices = g1.vertex_count();
        t.pairs = g1.pairs();
        for (std::size_t i = 0; i < t.maps; ++i)
            for (int v : g1.cell(1, i)) t.child_local.push_back(v);
        return t;
    }

    std::size_t pair_count() const noexcept { return pairs.size(); }

    /// Laplacian on V_1 of the children carrying the given per-pair
    /// conductances (children laid out one after another).
    Eigen::MatrixXd child_laplacian(std::span<const double> children) const {
        const auto n = static_cast<Eigen::Index>(local_vertices);
        Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
        const std::size_t np = pairs.size();
        for (std::size_t i = 0; i < maps; ++i)
            for (std::size_t p = 0; p < np; ++p) {
                const double w = children[i * np + p];
                const int u = child_local[i * boundary + static_cast<std::size_t>(pairs[p].first)];
                const int v = child_local[i * boundary + static_cast<std::size_t>(pairs[p].second)];
                lap(u, u) += w;
                lap(v, v) += w;
                lap(u, v) -= w;
                lap(v, u) -= w;
            }
        return lap;
    }

    /// Traces the children network onto the parent's boundary and writes the
    /// resulting per-pair conductances into `parent`.
    void trace_children(std::span<const double> children, std::span<double> parent) const {
        std::vector<int> keep(boundary);
        for (std::size_t a = 0; a < boundary; ++a) keep[a] = static_cast<int>(a);
        const Eigen::MatrixXd c =
            detail::conductances_from_laplacian(detail::schur_complement(child_laplacian(children), keep));
        for (std::size_t p = 0; p < pairs.size(); ++p) parent[p] = c(pairs[p].first, pairs[p].second);
    }
};

/// Eliminates cell interiors level by level: per-pair conductances of the N^n
/// level-n cells (cell-major) become those of the N^k level-k cells whose
/// network has the same trace on V_k. O(N^n) small dense eliminations.
inline std::vector<double> coarsen_cell_conductances(const CellTemplate& t, std::span<const double> weights,
                                                     std::size_t n, std::size_t k) {
    if (k > n) throw ArgumentError("resistance_network", "cannot coarsen to a finer level");
    const std::size_t np = t.pair_count();
    std::vector<double> current(weights.begin(), weights.end());
    std::size_t cells = current.size() / np;
    for (std::size_t level = n; level > k; --level) {
        const std::size_t parents = cells / t.maps;
        std::vector<double> next(parents * np);
        for (std::size_t p = 0; p < parents; ++p)
            t.trace_children(std::span<const double>(current).subspan(p * t.maps * np, t.maps * np),
                             std::span<double>(next).subspan(p * np, np));
        current = std::move(next);
        cells = parents;
    }
    return current;
}

/// Network on V_k (the first |V_k| vertices of `g`) carrying per-pair
/// conductances for each level-k cell.
inline Network coarse_network(const FractalGraph& g, std::span<const double> cell_conductances, std::size_t k) {
    const auto& pairs = g.pairs();
    std::vector<WeightedEdge> edges;
    for (std::size_t c = 0; c < g.cell_count(k); ++c) {
        auto cv = g.cell(k, c);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const double w = cell_conductances[c * pairs.size() + p];
            if (w > 0.0)
                edges.push_back({cv[static_cast<std::size_t>(pairs[p].first)], cv[static_cast<std::size_t>(pairs[p].second)], w});
        }
    }
    return Network(g.vertex_count_at(k), std::move(edges));
}

/// Resistance kernel on V_k of a level-n field, via hierarchical elimination.
inline ResistanceKernel hierarchical_resistance(const ConductanceField& field, std::size_t k,
                                                const CellTemplate* tmpl = nullptr) {
    const FractalGraph& g = *field.graph;
    const CellTemplate local = tmpl ? CellTemplate{} : CellTemplate::from(g.spec());
    const CellTemplate& t = tmpl ? *tmpl : local;
    const auto coarse = coarsen_cell_conductances(t, field.weights, g.level(), k);
    return pairwise_resistance(coarse_network(g, coarse, k));
}

}  // namespace rcm
