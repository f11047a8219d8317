#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/ifs.hpp"

namespace rcm {

/// Grid spacing for vertex identification at level n.
inline double canonical_spacing(double beta, std::size_t level) {
    return 1e-9 * std::pow(beta, -static_cast<double>(level));
}

namespace detail {

struct GridKeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& key) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (auto k : key) h = splitmix64(h ^ static_cast<std::uint64_t>(k));
        return static_cast<std::size_t>(h);
    }
};

/// Point set with identification on a grid of spacing h. Points within h
/// (max-norm) of a stored point resolve to it; points in a neighbouring bin
/// that are further than h but closer than 2h indicate a precision problem.
class PointIndex {
public:
    PointIndex(int dim, double spacing) : dim_(dim), h_(spacing) {}

    std::optional<int> find(const Point& p) const {
        auto hit = search(p);
        if (hit.near) return hit.id;
        return std::nullopt;
    }

    /// Returns (id, inserted).
    std::pair<int, bool> insert(const Point& p) {
        auto hit = search(p);
        if (hit.near) return {hit.id, false};
        if (hit.ambiguous)
            throw PrecisionError("ifs_fractal",
                                 "vertex canonicalization collision: point within 2h of vertex " +
                                     std::to_string(hit.id) + " but not identified with it (h=" +
                                     std::to_string(h_) + ")");
        const int id = static_cast<int>(points_.size());
        points_.push_back(p);
        bins_[key(p)].push_back(id);
        return {id, true};
    }

    const std::vector<Point>& points() const noexcept { return points_; }

private:
    struct Hit {
        int id = -1;
        bool near = false;
        bool ambiguous = false;
    };

    std::vector<std::int64_t> key(const Point& p) const {
        std::vector<std::int64_t> k(static_cast<std::size_t>(dim_));
        for (int d = 0; d < dim_; ++d) k[static_cast<std::size_t>(d)] = std::llround(p[d] / h_);
        return k;
    }

    Hit search(const Point& p) const {
        Hit hit;
        const auto base = key(p);
        std::vector<std::int64_t> probe(base.size());
        // a point within 2h can sit two bins away
        const int combos = static_cast<int>(std::pow(5, dim_));
        for (int c = 0; c < combos; ++c) {
            int code = c;
            for (std::size_t d = 0; d < base.size(); ++d) {
                probe[d] = base[d] + (code % 5) - 2;
                code /= 5;
            }
            auto it = bins_.find(probe);
            if (it == bins_.end()) continue;
            for (int id : it->second) {
                const double dist = (points_[static_cast<std::size_t>(id)] - p).cwiseAbs().maxCoeff();
                if (dist <= h_) return {id, true, false};
                if (dist <= 2.0 * h_) hit = {id, false, true};
            }
        }
        return hit;
    }

    int dim_;
    double h_;
    std::vector<Point> points_;
    std::unordered_map<std::vector<std::int64_t>, std::vector<int>, GridKeyHash> bins_;
};

}  // namespace detail

struct VertexAddress {
    CellWord word;
    int boundary_index = 0;
};

struct GraphEdge {
    int u = 0;
    int v = 0;
    std::size_t cell = 0;  // index of the level-n cell containing the edge
    int pair = 0;          // index into FractalGraph::pairs()
};

/// Level-n approximation G_n of a nested fractal.
///
/// Vertices are numbered in order of first appearance while sweeping levels
/// 0, 1, ..., n, so V_k is exactly the index prefix [0, |V_k|) for every k <= n
/// and V_0 (in essential_fixed_points order) occupies [0, |V_0|). Cells of each
/// level are stored in lexicographic word order; edges are listed cell-major,
/// one per unordered pair of V_0 indices.
class FractalGraph {
public:
    const IFSSpec& spec() const noexcept { return spec_; }
    std::size_t level() const noexcept { return level_; }
    std::size_t map_count() const noexcept { return spec_.size(); }
    std::size_t boundary_size() const noexcept { return v0_.size(); }
    const std::vector<Point>& v0() const noexcept { return v0_; }

    /// Unordered pairs (a, b), a < b, of V_0 indices; the edge template of one cell.
    const std::vector<std::pair<int, int>>& pairs() const noexcept { return pairs_; }

    std::size_t vertex_count() const noexcept { return coords_.size(); }
    std::size_t vertex_count_at(std::size_t k) const { return level_sizes_.at(k); }
    const Point& coordinate(int v) const { return coords_[static_cast<std::size_t>(v)]; }
    const std::vector<Point>& coordinates() const noexcept { return coords_; }
    const std::vector<VertexAddress>& addresses(int v) const { return addresses_[static_cast<std::size_t>(v)]; }

    std::vector<int> boundary() const {
        std::vector<int> b(v0_.size());
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<int>(i);
        return b;
    }

    std::size_t cell_count(std::size_t k) const {
        return cell_vertices_.at(k).size() / v0_.size();
    }
    std::size_t cell_count() const { return cell_count(level_); }

    /// Vertex ids psi_w(V_0[0]), ..., psi_w(V_0[|V_0|-1]) of the cell with
    /// lexicographic index `idx` at level k.
    std::span<const int> cell(std::size_t k, std::size_t idx) const {
        const auto& cv = cell_vertices_.at(k);
        return {cv.data() + idx * v0_.size(), v0_.size()};
    }
    std::span<const int> cell(std::size_t idx) const { return cell(level_, idx); }

    CellWord cell_word(std::size_t k, std::size_t idx) const {
        return CellWord::from_index(idx, k, map_count());
    }

    const std::vector<GraphEdge>& edges() const noexcept { return edges_; }

    std::optional<int> find_vertex(const Point& p) const { return index_.find(p); }

    friend FractalGraph build_graph(const IFSSpec& spec, std::size_t n);

private:
    FractalGraph(IFSSpec spec, std::size_t level)
        : spec_(std::move(spec)), level_(level),
          index_(spec_.dim, canonical_spacing(spec_.beta, level)) {}

    IFSSpec spec_;
    std::size_t level_;
    std::vector<Point> v0_;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<Point> coords_;
    std::vector<std::vector<VertexAddress>> addresses_;
    std::vector<std::size_t> level_sizes_;
    std::vector<std::vector<int>> cell_vertices_;
    std::vector<GraphEdge> edges_;
    detail::PointIndex index_;
};

inline std::vector<std::pair<int, int>> boundary_pairs(std::size_t boundary_size) {
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < boundary_size; ++a)
        for (std::size_t b = a + 1; b < boundary_size; ++b)
            pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
    return pairs;
}

inline FractalGraph build_graph(const IFSSpec& spec, std::size_t n) {
    FractalGraph g(spec, n);
    g.v0_ = essential_fixed_points(spec);
    g.pairs_ = boundary_pairs(g.v0_.size());
    const std::size_t nmaps = spec.size();
    const std::size_t nb = g.v0_.size();

    std::vector<AffineMap> maps{AffineMap::identity(spec.dim)};
    std::vector<char> touched;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k > 0) {
            std::vector<AffineMap> next;
            next.reserve(maps.size() * nmaps);
            for (const auto& m : maps)
                for (std::size_t i = 0; i < nmaps; ++i) next.push_back(m.compose(spec.affine(i)));
            maps = std::move(next);
        }
        auto& cells = g.cell_vertices_.emplace_back(maps.size() * nb);
        touched.assign(g.index_.points().size(), 0);
        for (std::size_t c = 0; c < maps.size(); ++c) {
            for (std::size_t a = 0; a < nb; ++a) {
                auto [id, inserted] = g.index_.insert(maps[c](g.v0_[a]));
                cells[c * nb + a] = id;
                if (inserted) {
                    touched.push_back(1);
                } else {
                    touched[static_cast<std::size_t>(id)] = 1;
                }
            }
        }
        if (std::find(touched.begin(), touched.end(), 0) != touched.end())
            throw InvalidFractalError("ifs_fractal", "V_" + std::to_string(k - 1) + " is not contained in V_" + std::to_string(k));
        g.level_sizes_.push_back(g.index_.points().size());
    }

    g.coords_ = g.index_.points();
    if (g.coords_[0].cwiseAbs().maxCoeff() > canonical_spacing(spec.beta, n))
        throw InvalidFractalError("ifs_fractal", "vertex 0 is not the origin");

    g.addresses_.resize(g.coords_.size());
    const auto& top = g.cell_vertices_.back();
    const std::size_t ncells = top.size() / nb;
    for (std::size_t c = 0; c < ncells; ++c) {
        const CellWord w = CellWord::from_index(c, n, nmaps);
        for (std::size_t a = 0; a < nb; ++a)
            g.addresses_[static_cast<std::size_t>(top[c * nb + a])].push_back({w, static_cast<int>(a)});
    }

    g.edges_.reserve(ncells * g.pairs_.size());
    for (std::size_t c = 0; c < ncells; ++c)
        for (std::size_t p = 0; p < g.pairs_.size(); ++p)
            g.edges_.push_back({top[c * nb + static_cast<std::size_t>(g.pairs_[p].first)],
                                top[c * nb + static_cast<std::size_t>(g.pairs_[p].second)], c, static_cast<int>(p)});

    // connectivity
    std::vector<std::vector<int>> adj(g.coords_.size());
    for (const auto& e : g.edges_) {
        adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        adj[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    std::vector<char> seen(g.coords_.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++reached;
                q.push(v);
            }
    }
    if (reached != g.coords_.size())
        throw InvalidFractalError("ifs_fractal", "G_" + std::to_string(n) + " is not connected");
    return g;
}

// ---------------------------------------------------------------------------
// Finite-level axiom checks

struct NestingViolation {
    CellWord first;
    CellWord second;
    std::string detail;
};

struct NestingReport {
    std::size_t level = 0;
    bool checked = true;  // false when the ambient dimension is not supported
    std::string note;
    std::vector<NestingViolation> violations;

    bool passed() const noexcept { return checked && violations.empty(); }
};

namespace detail {

using Vec2 = Eigen::Vector2d;

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a - o).x() * (b - o).y() - (a - o).y() * (b - o).x();
}

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts, double tol) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    std::vector<Vec2> uniq;
    for (const auto& p : pts)
        if (uniq.empty() || (p - uniq.back()).norm() > tol) uniq.push_back(p);
    if (uniq.size() <= 2) return uniq;
    std::vector<Vec2> hull(2 * uniq.size());
    std::size_t k = 0;
    for (const auto& p : uniq) {
        while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= tol * tol) --k;
        hull[k++] = p;
    }
    for (std::size_t i = uniq.size() - 1, t = k + 1; i-- > 0;) {
        const auto& p = uniq[i];
        while (k >= t && cross2(hull[k - 2], hull[k - 1], p) <= tol * tol) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    if (hull.size() < 2) return {uniq.front(), uniq.back()};
    return hull;
}

inline double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

inline bool hull_contains(const std::vector<Vec2>& hull, const Vec2& p, double tol) {
    if (hull.size() == 1) return (p - hull[0]).norm() <= tol;
    if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]) <= tol;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Vec2& a = hull[i];
        const Vec2& b = hull[(i + 1) % hull.size()];
        const double signed_dist = cross2(a, b, p) / (b - a).norm();
        if (signed_dist < -tol) return false;
    }
    return true;
}

inline std::vector<std::pair<Vec2, Vec2>> hull_edges(const std::vector<Vec2>& hull) {
    std::vector<std::pair<Vec2, Vec2>> e;
    if (hull.size() == 2) e.emplace_back(hull[0], hull[1]);
    if (hull.size() >= 3)
        for (std::size_t i = 0; i < hull.size(); ++i) e.emplace_back(hull[i], hull[(i + 1) % hull.size()]);
    return e;
}

/// Appends proper crossing points of two segments (overlaps of collinear
/// segments are picked up by the endpoint containment tests).
inline void segment_crossings(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, std::vector<Vec2>& out) {
    const Vec2 r = b - a;
    const Vec2 s = d - c;
    const double denom = r.x() * s.y() - r.y() * s.x();
    if (std::abs(denom) <= 1e-15 * r.norm() * s.norm()) return;
    const Vec2 ca = c - a;
    const double t = (ca.x() * s.y() - ca.y() * s.x()) / denom;
    const double u = (ca.x() * r.y() - ca.y() * r.x()) / denom;
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) out.push_back(a + t * r);
}

/// Candidate points spanning hull(P) ∩ hull(Q): their convex hull is the
/// intersection.
inline std::vector<Vec2> hull_intersection_points(const std::vector<Vec2>& p, const std::vector<Vec2>& q, double tol) {
    std::vector<Vec2> out;
    for (const auto& x : p)
        if (hull_contains(q, x, tol)) out.push_back(x);
    for (const auto& x : q)
        if (hull_contains(p, x, tol)) out.push_back(x);
    for (const auto& [a, b] : hull_edges(p))
        for (const auto& [c, d] : hull_edges(q)) segment_crossings(a, b, c, d, out);
    return out;
}

}  // namespace detail

/// Checks, for all pairs of distinct level-n cells, that the convex hulls of
/// their vertex sets meet at most in a single shared vertex. Supported for
/// ambient dimensions 1 and 2.
inline NestingReport verify_nesting(const IFSSpec& spec, std::size_t n) {
    if (n < 1) throw ArgumentError("ifs_fractal", "verify_nesting needs level >= 1");
    NestingReport report;
    report.level = n;
    if (spec.dim > 2) {
        report.checked = false;
        report.note = "nesting check implemented for ambient dimension <= 2 only";
        return report;
    }
    const FractalGraph g = build_graph(spec, n);
    const double tol = 1e-9 * std::pow(spec.beta, -static_cast<double>(n));
    const std::size_t ncells = g.cell_count();

    auto to2 = [&](int v) {
        const Point& p = g.coordinate(v);
        return detail::Vec2(p[0], spec.dim == 2 ? p[1] : 0.0);
    };

    std::vector<std::vector<detail::Vec2>> hulls(ncells);
    std::vector<Eigen::Vector4d> boxes(ncells);
    for (std::size_t c = 0; c < ncells; ++c) {
        std::vector<detail::Vec2> pts;
        for (int v : g.cell(c)) pts.push_back(to2(v));
        hulls[c] = detail::convex_hull(pts, tol);
        Eigen::Vector4d box(1e300, 1e300, -1e300, -1e300);
        for (const auto& p : pts) {
            box[0] = std::min(box[0], p.x());
            box[1] = std::min(box[1], p.y());
            box[2] = std::max(box[2], p.x());
            box[3] = std::max(box[3], p.y());
        }
        boxes[c] = box;
    }

    for (std::size_t a = 0; a < ncells; ++a) {
        for (std::size_t b = a + 1; b < ncells; ++b) {
            if (boxes[a][0] > boxes[b][2] + tol || boxes[b][0] > boxes[a][2] + tol ||
                boxes[a][1] > boxes[b][3] + tol || boxes[b][1] > boxes[a][3] + tol)
                continue;
            std::vector<int> shared;
            for (int u : g.cell(a))
                for (int v : g.cell(b))
                    if (u == v) shared.push_back(u);
            const auto pts = detail::hull_intersection_points(hulls[a], hulls[b], tol);
            if (pts.empty()) continue;
            std::string problem;
            if (shared.size() >= 2) {
                problem = "cells share " + std::to_string(shared.size()) + " vertices, so their hulls share a segment";
            } else {
                bool single_shared = !shared.empty();
                for (const auto& p : pts)
                    single_shared = single_shared && (p - to2(shared[0])).norm() <= 10.0 * tol;
                if (!single_shared) problem = "hulls overlap away from shared vertices";
            }
            if (!problem.empty())
                report.violations.push_back({g.cell_word(n, a), g.cell_word(n, b), problem});
        }
    }
    return report;
}

struct SymmetryViolation {
    int x = 0;  // V_0 indices of the reflected pair
    int y = 0;
    std::size_t level = 0;
    CellWord cell;
    std::string detail;
};

struct SymmetryReport {
    std::size_t level = 0;
    std::size_t reflections_checked = 0;
    std::vector<SymmetryViolation> violations;

    bool passed() const noexcept { return violations.empty(); }
};

/// For every pair x != y in V_0, reflects each k-cell (k <= n) across the
/// perpendicular bisector of x and y and checks that the image is again a
/// k-cell, and the same cell whenever the cell straddles the hyperplane.
inline SymmetryReport verify_symmetry(const IFSSpec& spec, std::size_t n) {
    const FractalGraph g = build_graph(spec, n);
    const double tol = 1e-9 * std::pow(spec.beta, -static_cast<double>(n));
    SymmetryReport report;
    report.level = n;
    const std::size_t nb = g.boundary_size();

    std::vector<std::map<std::vector<int>, std::size_t>> cell_sets(n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t c = 0; c < g.cell_count(k); ++c) {
            auto cv = g.cell(k, c);
            std::vector<int> key(cv.begin(), cv.end());
            std::sort(key.begin(), key.end());
            cell_sets[k].emplace(std::move(key), c);
        }

    for (std::size_t x = 0; x < nb; ++x) {
        for (std::size_t y = x + 1; y < nb; ++y) {
            ++report.reflections_checked;
            const Point mid = (g.v0()[x] + g.v0()[y]) / 2.0;
            const Point normal = (g.v0()[x] - g.v0()[y]).normalized();
            auto reflect = [&](const Point& z) -> Point { return z - 2.0 * (z - mid).dot(normal) * normal; };
            bool pair_failed = false;
            for (std::size_t k = 0; k <= n && !pair_failed; ++k) {
                for (std::size_t c = 0; c < g.cell_count(k) && !pair_failed; ++c) {
                    std::vector<int> image;
                    bool above = false;
                    bool below = false;
                    for (int v : g.cell(k, c)) {
                        const double side = (g.coordinate(v) - mid).dot(normal);
                        above = above || side > tol;
                        below = below || side < -tol;
                        auto hit = g.find_vertex(reflect(g.coordinate(v)));
                        if (!hit) break;
                        image.push_back(*hit);
                    }
                    std::string problem;
                    if (image.size() != nb) {
                        problem = "reflected cell vertex is not a vertex of G_" + std::to_string(n);
                    } else {
                        std::sort(image.begin(), image.end());
                        auto it = cell_sets[k].find(image);
                        if (it == cell_sets[k].end())
                            problem = "reflected cell is not a cell";
                        else if (above && below && it->second != c)
                            problem = "cell straddling the bisector is not mapped to itself";
                    }
                    if (!problem.empty()) {
                        report.violations.push_back({static_cast<int>(x), static_cast<int>(y), k, g.cell_word(k, c), problem});
                        pair_failed = true;
                    }
                }
            }
        }
    }
    return report;
}

}  // namespace rcm
