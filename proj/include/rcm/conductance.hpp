#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/resistance.hpp"

namespace rcm {

enum class FieldOrigin { deterministic, random, scaled };

/// Edge weights on a fractal graph, one per entry of graph->edges().
struct ConductanceField {
    std::shared_ptr<const FractalGraph> graph;
    std::vector<double> weights;
    FieldOrigin origin = FieldOrigin::deterministic;
    double scale = 1.0;

    ConductanceField() = default;
    ConductanceField(std::shared_ptr<const FractalGraph> g, std::vector<double> w,
                     FieldOrigin o = FieldOrigin::deterministic, double s = 1.0)
        : graph(std::move(g)), weights(std::move(w)), origin(o), scale(s) {
        validate();
    }

    void validate() const {
        if (!graph) throw ArgumentError("resistance_network", "conductance field without a graph");
        if (weights.size() != graph->edges().size())
            throw ArgumentError("resistance_network", "expected " + std::to_string(graph->edges().size()) +
                                                          " weights, got " + std::to_string(weights.size()));
        for (std::size_t e = 0; e < weights.size(); ++e)
            if (!(weights[e] > 0.0) || !std::isfinite(weights[e]))
                throw ArgumentError("resistance_network", "weight of edge " + std::to_string(e) + " is not strictly positive");
    }

    Network network() const {
        std::vector<WeightedEdge> edges;
        edges.reserve(weights.size());
        const auto& ge = graph->edges();
        for (std::size_t e = 0; e < ge.size(); ++e) edges.push_back({ge[e].u, ge[e].v, weights[e]});
        return Network(graph->vertex_count(), std::move(edges));
    }

    ConductanceField scaled(double factor) const {
        std::vector<double> w = weights;
        for (auto& x : w) x *= factor;
        return ConductanceField(graph, std::move(w), FieldOrigin::scaled, scale * factor);
    }
};

/// Field that puts the conductance pattern `per_pair` (one value per V_0 pair)
/// on every cell, multiplied by `factor`.
inline ConductanceField pattern_field(std::shared_ptr<const FractalGraph> graph, const std::vector<double>& per_pair,
                                      double factor = 1.0) {
    if (per_pair.size() != graph->pairs().size())
        throw ArgumentError("resistance_network", "pattern has the wrong number of pairs");
    std::vector<double> w(graph->edges().size());
    for (std::size_t e = 0; e < w.size(); ++e) w[e] = factor * per_pair[static_cast<std::size_t>(graph->edges()[e].pair)];
    return ConductanceField(std::move(graph), std::move(w), FieldOrigin::deterministic, factor);
}

}  // namespace rcm
