#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "rcm/conductance.hpp"
#include "rcm/error.hpp"
#include "rcm/fractal_graph.hpp"
#include "rcm/ifs.hpp"
#include "rcm/random.hpp"

namespace rcm {

enum class LawFamily { pareto, constant, custom };

/// Law of the |E_0| weights of one cell; cells are independent copies.
///
/// Note on constants: `lower_bound` is the almost-sure floor on every weight;
/// `tail_constant()` is the limit of u^alpha P(cell sum > u); the resistance
/// normalization is a separate estimated quantity (see homogenization.hpp).
struct ConductanceLaw {
    LawFamily family = LawFamily::pareto;
    double alpha = 0.5;
    double lower_bound = 1.0;
    /// For LawFamily::custom: fills one cell's weights (pair order). Allows
    /// dependence between the weights of a cell.
    std::function<void(Engine&, std::span<double>)> cell_law;

    /// i.i.d. per edge, P(w > u) = (u / lower_bound)^(-alpha) for u >= lower_bound.
    static ConductanceLaw pareto(double alpha, double lower_bound = 1.0) {
        ConductanceLaw law;
        law.family = LawFamily::pareto;
        law.alpha = alpha;
        law.lower_bound = lower_bound;
        law.validate();
        return law;
    }

    /// Point mass: every weight equals `value`.
    static ConductanceLaw constant(double value = 1.0) {
        ConductanceLaw law;
        law.family = LawFamily::constant;
        law.lower_bound = value;
        law.validate();
        return law;
    }

    /// Deterministic cell pattern, e.g. the invariant conductances q*.
    static ConductanceLaw pattern(std::vector<double> per_pair) {
        ConductanceLaw law;
        law.family = LawFamily::custom;
        law.lower_bound = *std::min_element(per_pair.begin(), per_pair.end());
        law.cell_law = [q = std::move(per_pair)](Engine&, std::span<double> out) {
            if (out.size() != q.size()) throw ArgumentError("random_environment", "pattern law has the wrong size");
            std::copy(q.begin(), q.end(), out.begin());
        };
        law.validate();
        return law;
    }

    void validate() const {
        if (!(lower_bound > 0.0)) throw ArgumentError("random_environment", "lower bound must be positive");
        if (family == LawFamily::pareto && !(alpha > 0.0 && alpha < 1.0))
            throw ArgumentError("random_environment", "alpha must lie in (0, 1), got " + std::to_string(alpha));
        if (family == LawFamily::custom && !cell_law) throw ArgumentError("random_environment", "custom law without a cell sampler");
    }

    /// lim u^alpha P(sum of the |E_0| weights of a cell > u), for the Pareto
    /// family: the tail constants of independent summands add.
    double tail_constant(std::size_t edges_per_cell) const {
        if (family != LawFamily::pareto) return 0.0;
        return static_cast<double>(edges_per_cell) * std::pow(lower_bound, alpha);
    }

    void sample_cell(Engine& rng, std::span<double> out) const {
        switch (family) {
            case LawFamily::pareto:
                for (auto& w : out) w = rcm::pareto(rng, alpha, lower_bound);
                break;
            case LawFamily::constant:
                std::fill(out.begin(), out.end(), lower_bound);
                break;
            case LawFamily::custom:
                cell_law(rng, out);
                break;
        }
    }
};

/// Independent copies of the cell law on every n-cell, in cell order.
inline ConductanceField sample_environment(std::shared_ptr<const FractalGraph> graph, const ConductanceLaw& law, Engine& rng) {
    law.validate();
    const std::size_t np = graph->pairs().size();
    std::vector<double> w(graph->edges().size());
    for (std::size_t c = 0; c < graph->cell_count(); ++c) law.sample_cell(rng, std::span<double>(w).subspan(c * np, np));
    for (double x : w)
        if (!(x >= law.lower_bound))
            throw ArgumentError("random_environment", "sampled weight below the lower bound");
    return ConductanceField(std::move(graph), std::move(w), FieldOrigin::random);
}

/// nu(x): total conductance at x.
inline std::vector<double> nu_measure(const ConductanceField& field) { return field.network().vertex_measure(); }

/// CSV rows (cell word, edge index within cell, weight).
inline void write_environment_csv(std::ostream& os, const ConductanceField& field) {
    const auto& g = *field.graph;
    const std::size_t np = g.pairs().size();
    os << "cell,edge,weight\n";
    std::ostringstream cell;
    for (std::size_t e = 0; e < field.weights.size(); ++e) {
        cell.str("");
        cell << std::setprecision(17) << field.weights[e];
        os << g.cell_word(g.level(), e / np).to_string() << ',' << (e % np) << ',' << cell.str() << '\n';
    }
}

inline ConductanceField read_environment_csv(std::istream& is, std::shared_ptr<const FractalGraph> graph) {
    const std::size_t np = graph->pairs().size();
    std::vector<double> w(graph->edges().size(), 0.0);
    std::vector<char> set(w.size(), 0);
    std::string line;
    std::getline(is, line);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string word, edge, weight;
        if (!std::getline(ss, word, ',') || !std::getline(ss, edge, ',') || !std::getline(ss, weight, ','))
            throw ParseError("environment", lineno, "expected cell,edge,weight");
        const CellWord cw = CellWord::parse(word);
        if (cw.level() != graph->level()) throw ParseError("environment", lineno, "cell word has the wrong level");
        const std::size_t idx = cw.index(graph->map_count()) * np + std::stoul(edge);
        if (idx >= w.size()) throw ParseError("environment", lineno, "edge out of range");
        w[idx] = std::strtod(weight.c_str(), nullptr);
        set[idx] = 1;
    }
    if (std::find(set.begin(), set.end(), 0) != set.end()) throw ArgumentError("random_environment", "environment CSV is incomplete");
    return ConductanceField(std::move(graph), std::move(w), FieldOrigin::random);
}

// ---------------------------------------------------------------------------
// Poisson trap measure

struct TrapAtom {
    double mass = 0.0;
    CellWord word;  // location psi_word(0), resolved lazily
};

/// Finite truncation of sum_i v_i delta_{x_i}: the atoms with v_i >= cutoff.
struct TrapMeasure {
    std::vector<TrapAtom> atoms;
    double cutoff = 0.0;
    double alpha = 0.0;
    std::size_t depth = 0;

    double total_mass() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.mass;
        return s;
    }

    Point location(const IFSSpec& spec, std::size_t i) const {
        return atoms[i].word.apply(spec, Point::Zero(spec.dim));
    }

    void write_csv(std::ostream& os) const {
        os << "word,v\n";
        std::ostringstream cell;
        for (const auto& a : atoms) {
            cell.str("");
            cell << std::setprecision(17) << a.mass;
            os << a.word.to_string() << ',' << cell.str() << '\n';
        }
    }
};

/// Poisson point process with intensity alpha v^{-1-alpha} dv mu(dx)
/// restricted to v >= cutoff: Poisson(cutoff^{-alpha}) atoms, Pareto sizes
/// above the cutoff, locations drawn from mu at word depth `depth`.
inline TrapMeasure sample_trap_measure(const IFSSpec& spec, double alpha, double cutoff, std::size_t depth, Engine& rng) {
    if (!(cutoff > 0.0)) throw ArgumentError("random_environment", "cutoff must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("random_environment", "alpha must lie in (0, 1)");
    if (depth < 1) throw ArgumentError("random_environment", "trap locations need depth >= 1");
    TrapMeasure m;
    m.cutoff = cutoff;
    m.alpha = alpha;
    m.depth = depth;
    const std::uint64_t count = poisson(rng, std::pow(cutoff, -alpha));
    m.atoms.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const double v = pareto(rng, alpha, cutoff);
        m.atoms.push_back({v, random_word(spec.size(), depth, rng)});
    }
    return m;
}

struct TailEstimate {
    double alpha = 0.0;
    double standard_error = 0.0;
    bool degenerate = false;  // top order statistics all equal
};

/// Hill estimator from the k largest samples: k / sum log(X_(i) / X_(k+1)).
inline TailEstimate tail_estimate(std::span<const double> samples, std::size_t k) {
    if (k < 2) throw ArgumentError("random_environment", "Hill estimator needs k >= 2");
    if (k >= samples.size()) throw ArgumentError("random_environment", "k must be smaller than the sample count");
    std::vector<double> s(samples.begin(), samples.end());
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k), s.end(), std::greater<>());
    const double threshold = s[k];
    if (!(threshold > 0.0)) throw ArgumentError("random_environment", "Hill estimator needs positive samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::log(s[i] / threshold);
    TailEstimate t;
    if (!(sum > 0.0)) {
        t.degenerate = true;
        t.alpha = std::numeric_limits<double>::infinity();
        t.standard_error = std::numeric_limits<double>::infinity();
        return t;
    }
    t.alpha = static_cast<double>(k) / sum;
    t.standard_error = t.alpha / std::sqrt(static_cast<double>(k));
    return t;
}

}  // namespace rcm
