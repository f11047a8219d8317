#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcm/error.hpp"

namespace rcm {

/// Off-diagonal Schur entries above -kClampTolerance are treated as zero.
inline constexpr double kClampTolerance = 1e-12;

struct WeightedEdge {
    int u = 0;
    int v = 0;
    double weight = 0.0;
};

/// Finite electrical network: vertices 0..n-1, undirected edges with strictly
/// positive conductances. Parallel edges add.
class Network {
public:
    Network() = default;
    Network(std::size_t vertex_count, std::vector<WeightedEdge> edges)
        : n_(vertex_count), edges_(std::move(edges)) {
        validate();
    }

    std::size_t vertex_count() const noexcept { return n_; }
    const std::vector<WeightedEdge>& edges() const noexcept { return edges_; }

    /// nu(x) = sum of conductances of edges at x.
    std::vector<double> vertex_measure() const {
        std::vector<double> nu(n_, 0.0);
        for (const auto& e : edges_) {
            nu[static_cast<std::size_t>(e.u)] += e.weight;
            nu[static_cast<std::size_t>(e.v)] += e.weight;
        }
        return nu;
    }

    Eigen::MatrixXd laplacian() const {
        const auto n = static_cast<Eigen::Index>(n_);
        Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
        for (const auto& e : edges_) {
            lap(e.u, e.u) += e.weight;
            lap(e.v, e.v) += e.weight;
            lap(e.u, e.v) -= e.weight;
            lap(e.v, e.u) -= e.weight;
        }
        return lap;
    }

    std::vector<std::vector<int>> adjacency() const {
        std::vector<std::vector<int>> adj(n_);
        for (const auto& e : edges_) {
            adj[static_cast<std::size_t>(e.u)].push_back(e.v);
            adj[static_cast<std::size_t>(e.v)].push_back(e.u);
        }
        return adj;
    }

    /// Vertices reachable from any of `sources`.
    std::vector<char> reachable_from(std::span<const int> sources) const {
        const auto adj = adjacency();
        std::vector<char> seen(n_, 0);
        std::queue<int> q;
        for (int s : sources) {
            if (!seen[static_cast<std::size_t>(s)]) {
                seen[static_cast<std::size_t>(s)] = 1;
                q.push(s);
            }
        }
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v : adj[static_cast<std::size_t>(u)])
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    q.push(v);
                }
        }
        return seen;
    }

private:
    void validate() const {
        for (const auto& e : edges_) {
            if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n_ || static_cast<std::size_t>(e.v) >= n_)
                throw ArgumentError("resistance_network", "edge endpoint out of range");
            if (e.u == e.v) throw ArgumentError("resistance_network", "self-loop at vertex " + std::to_string(e.u));
            if (!(e.weight > 0.0) || !std::isfinite(e.weight))
                throw ArgumentError("resistance_network", "conductances must be finite and strictly positive");
        }
    }

    std::size_t n_ = 0;
    std::vector<WeightedEdge> edges_;
};

/// Dirichlet energy sum over unordered edges of w_e (f(u) - f(v))^2.
///
/// This equals the double sum 1/2 sum_{x,y} c_xy (f(x) - f(y))^2 over ordered
/// pairs, with c_xy the total conductance between x and y.
inline double energy(const Network& net, std::span<const double> f) {
    if (f.size() != net.vertex_count())
        throw ArgumentError("resistance_network", "function has " + std::to_string(f.size()) + " values for " +
                                                      std::to_string(net.vertex_count()) + " vertices");
    double total = 0.0;
    for (const auto& e : net.edges()) {
        const double d = f[static_cast<std::size_t>(e.u)] - f[static_cast<std::size_t>(e.v)];
        total += e.weight * d * d;
    }
    return total;
}

/// Complete network on an ordered vertex subset, stored as a symmetric
/// conductance matrix with zero diagonal.
struct BoundaryForm {
    std::vector<int> vertices;
    Eigen::MatrixXd conductance;

    std::size_t size() const noexcept { return vertices.size(); }

    double energy(std::span<const double> f) const {
        if (f.size() != vertices.size()) throw ArgumentError("resistance_network", "boundary function size mismatch");
        double total = 0.0;
        for (Eigen::Index i = 0; i < conductance.rows(); ++i)
            for (Eigen::Index j = i + 1; j < conductance.cols(); ++j) {
                const double d = f[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(j)];
                total += conductance(i, j) * d * d;
            }
        return total;
    }

    /// Network on local indices 0..size()-1 (zero conductances dropped).
    Network as_network() const {
        std::vector<WeightedEdge> edges;
        for (Eigen::Index i = 0; i < conductance.rows(); ++i)
            for (Eigen::Index j = i + 1; j < conductance.cols(); ++j)
                if (conductance(i, j) > 0.0) edges.push_back({static_cast<int>(i), static_cast<int>(j), conductance(i, j)});
        return Network(vertices.size(), std::move(edges));
    }

    bool connected() const {
        if (vertices.empty()) return false;
        const int start = 0;
        return std::ranges::all_of(as_network().reachable_from(std::span<const int>(&start, 1)), [](char c) { return c != 0; });
    }
};

namespace detail {

/// Schur complement of `lap` onto the index set `keep`; the rest is
/// eliminated. Returns the reduced Laplacian.
inline Eigen::MatrixXd schur_complement(const Eigen::MatrixXd& lap, std::span<const int> keep) {
    const auto n = lap.rows();
    std::vector<char> is_kept(static_cast<std::size_t>(n), 0);
    for (int k : keep) is_kept[static_cast<std::size_t>(k)] = 1;
    std::vector<int> elim;
    for (Eigen::Index i = 0; i < n; ++i)
        if (!is_kept[static_cast<std::size_t>(i)]) elim.push_back(static_cast<int>(i));
    const auto nb = static_cast<Eigen::Index>(keep.size());
    const auto ni = static_cast<Eigen::Index>(elim.size());
    Eigen::MatrixXd lbb(nb, nb);
    for (Eigen::Index a = 0; a < nb; ++a)
        for (Eigen::Index b = 0; b < nb; ++b) lbb(a, b) = lap(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
    if (ni == 0) return lbb;
    Eigen::MatrixXd lii(ni, ni);
    Eigen::MatrixXd lib(ni, nb);
    for (Eigen::Index a = 0; a < ni; ++a) {
        for (Eigen::Index b = 0; b < ni; ++b) lii(a, b) = lap(elim[static_cast<std::size_t>(a)], elim[static_cast<std::size_t>(b)]);
        for (Eigen::Index b = 0; b < nb; ++b) lib(a, b) = lap(elim[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(b)]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(lii);
    if (llt.info() != Eigen::Success)
        throw SingularTraceError("resistance_network", "interior block is singular");
    return lbb - lib.transpose() * llt.solve(lib);
}

/// Converts a reduced Laplacian to boundary conductances, clamping tiny
/// negative values produced by rounding.
inline Eigen::MatrixXd conductances_from_laplacian(const Eigen::MatrixXd& lap) {
    Eigen::MatrixXd c = -lap;
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        c(i, i) = 0.0;
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            if (i == j) continue;
            if (c(i, j) < 0.0) {
                if (c(i, j) < -kClampTolerance)
                    throw PrecisionError("resistance_network", "negative trace conductance " + std::to_string(c(i, j)));
                c(i, j) = 0.0;
            }
        }
    }
    return (c + c.transpose()) / 2.0;
}

inline void require_vertex(const Network& net, int v) {
    if (v < 0 || static_cast<std::size_t>(v) >= net.vertex_count())
        throw ArgumentError("resistance_network", "vertex " + std::to_string(v) + " out of range");
}

inline void require_connected(const Network& net) {
    const int start = 0;
    if (net.vertex_count() == 0) throw ArgumentError("resistance_network", "empty network");
    auto seen = net.reachable_from(std::span<const int>(&start, 1));
    if (!std::ranges::all_of(seen, [](char c) { return c != 0; }))
        throw SingularTraceError("resistance_network", "network is disconnected");
}

}  // namespace detail

/// Trace of the network onto `boundary`: the complete network on the boundary
/// whose energy is the infimum of the full energy over extensions.
inline BoundaryForm trace_to(const Network& net, std::span<const int> boundary) {
    if (boundary.empty()) throw ArgumentError("resistance_network", "trace onto an empty vertex set");
    for (int b : boundary) detail::require_vertex(net, b);
    auto seen = net.reachable_from(boundary);
    for (std::size_t v = 0; v < seen.size(); ++v)
        if (!seen[v])
            throw SingularTraceError("resistance_network", "vertex " + std::to_string(v) + " is not connected to the boundary");
    BoundaryForm out;
    out.vertices.assign(boundary.begin(), boundary.end());
    out.conductance = detail::conductances_from_laplacian(detail::schur_complement(net.laplacian(), boundary));
    return out;
}

enum class ResistanceMethod { solve, trace };

/// R(x, y) = 1 / inf{ energy(f) : f(x) = 1, f(y) = 0 }; zero when x == y.
inline double effective_resistance(const Network& net, int x, int y, ResistanceMethod method = ResistanceMethod::solve) {
    detail::require_vertex(net, x);
    detail::require_vertex(net, y);
    if (x == y) return 0.0;
    if (method == ResistanceMethod::trace) {
        const int pair[2] = {x, y};
        const auto form = trace_to(net, pair);
        return 1.0 / form.conductance(0, 1);
    }
    detail::require_connected(net);
    // ground y, inject unit current at x
    const auto n = static_cast<Eigen::Index>(net.vertex_count());
    const Eigen::MatrixXd lap = net.laplacian();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != y) keep.push_back(i);
    const Eigen::MatrixXd reduced = lap(keep, keep);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n - 1);
    const auto xi = static_cast<Eigen::Index>(std::find(keep.begin(), keep.end(), x) - keep.begin());
    rhs[xi] = 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success) throw SingularTraceError("resistance_network", "grounded Laplacian is singular");
    return llt.solve(rhs)[xi];
}

/// Pairwise effective resistances on an ordered vertex subset.
struct ResistanceKernel {
    std::vector<int> support;
    Eigen::MatrixXd matrix;

    std::size_t size() const noexcept { return support.size(); }

    std::size_t position(int v) const {
        auto it = std::find(support.begin(), support.end(), v);
        if (it == support.end()) throw ArgumentError("resistance_network", "vertex " + std::to_string(v) + " not in kernel support");
        return static_cast<std::size_t>(it - support.begin());
    }

    double operator()(int x, int y) const {
        return matrix(static_cast<Eigen::Index>(position(x)), static_cast<Eigen::Index>(position(y)));
    }

    ResistanceKernel restrict_to(std::span<const int> subset) const {
        ResistanceKernel out;
        out.support.assign(subset.begin(), subset.end());
        const auto m = static_cast<Eigen::Index>(subset.size());
        out.matrix.resize(m, m);
        std::vector<Eigen::Index> pos;
        for (int v : subset) pos.push_back(static_cast<Eigen::Index>(position(v)));
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = 0; b < m; ++b) out.matrix(a, b) = matrix(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
        return out;
    }

    /// Checks symmetry, R(x,y) = 0 iff x = y, and the triangle inequality.
    /// Returns a description of the first failure, if any.
    std::optional<std::string> metric_violation(double tol = 1e-10) const {
        const auto m = matrix.rows();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::abs(matrix(i, i)) > tol) return "nonzero diagonal at " + std::to_string(support[static_cast<std::size_t>(i)]);
            for (Eigen::Index j = 0; j < m; ++j) {
                if (std::abs(matrix(i, j) - matrix(j, i)) > tol) return "asymmetric entry";
                if (i != j && !(matrix(i, j) > tol)) return "non-positive distance between distinct vertices";
                for (Eigen::Index k = 0; k < m; ++k)
                    if (matrix(i, k) > matrix(i, j) + matrix(j, k) + tol) return "triangle inequality fails";
            }
        }
        return std::nullopt;
    }

    /// CSV: header row of labels "v<id>", then one row per support vertex.
    /// Values are written with 17 significant digits and round-trip exactly.
    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < support.size(); ++i) os << (i ? "," : "") << 'v' << support[i];
        os << '\n';
        std::ostringstream cell;
        for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
            for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
                cell.str("");
                cell << std::setprecision(17) << matrix(i, j);
                os << (j ? "," : "") << cell.str();
            }
            os << '\n';
        }
    }

    static ResistanceKernel read_csv(std::istream& is) {
        ResistanceKernel k;
        std::string line;
        if (!std::getline(is, line)) throw ArgumentError("resistance_network", "empty kernel CSV");
        std::stringstream header(line);
        std::string tok;
        while (std::getline(header, tok, ',')) {
            if (tok.size() < 2 || tok[0] != 'v') throw ArgumentError("resistance_network", "bad kernel label '" + tok + "'");
            k.support.push_back(std::stoi(tok.substr(1)));
        }
        const auto m = static_cast<Eigen::Index>(k.support.size());
        k.matrix.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!std::getline(is, line)) throw ArgumentError("resistance_network", "kernel CSV truncated");
            std::stringstream row(line);
            for (Eigen::Index j = 0; j < m; ++j) {
                if (!std::getline(row, tok, ',')) throw ArgumentError("resistance_network", "kernel CSV row too short");
                k.matrix(i, j) = std::strtod(tok.c_str(), nullptr);
            }
        }
        return k;
    }
};

/// All pairwise resistances on `subset` from one factorization of the
/// Laplacian grounded at subset[0].
inline ResistanceKernel pairwise_resistance(const Network& net, std::span<const int> subset) {
    if (subset.empty()) throw ArgumentError("resistance_network", "empty subset");
    for (int v : subset) detail::require_vertex(net, v);
    detail::require_connected(net);
    ResistanceKernel k;
    k.support.assign(subset.begin(), subset.end());
    const auto m = static_cast<Eigen::Index>(subset.size());
    k.matrix = Eigen::MatrixXd::Zero(m, m);
    if (m == 1) return k;

    const auto n = static_cast<Eigen::Index>(net.vertex_count());
    const int ground = subset[0];
    std::vector<Eigen::Index> keep;
    std::vector<Eigen::Index> local(static_cast<std::size_t>(n), -1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != ground) {
            local[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(keep.size());
            keep.push_back(i);
        }
    const Eigen::MatrixXd lap = net.laplacian();
    Eigen::LLT<Eigen::MatrixXd> llt(lap(keep, keep));
    if (llt.info() != Eigen::Success) throw SingularTraceError("resistance_network", "grounded Laplacian is singular");
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n - 1, m);
    for (Eigen::Index a = 0; a < m; ++a) {
        const int v = subset[static_cast<std::size_t>(a)];
        if (v != ground) rhs(local[static_cast<std::size_t>(v)], a) = 1.0;
    }
    const Eigen::MatrixXd green = llt.solve(rhs);  // columns: potentials
    auto g = [&](Eigen::Index a, Eigen::Index b) -> double {
        const int va = subset[static_cast<std::size_t>(a)];
        const int vb = subset[static_cast<std::size_t>(b)];
        if (va == ground || vb == ground) return 0.0;
        return green(local[static_cast<std::size_t>(va)], b);
    };
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = a + 1; b < m; ++b) {
            const double r = (subset[static_cast<std::size_t>(a)] == subset[static_cast<std::size_t>(b)])
                                 ? 0.0
                                 : g(a, a) + g(b, b) - g(a, b) - g(b, a);
            k.matrix(a, b) = r;
            k.matrix(b, a) = r;
        }
    return k;
}

inline ResistanceKernel pairwise_resistance(const Network& net) {
    std::vector<int> all(net.vertex_count());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return pairwise_resistance(net, all);
}

/// Occupation density of the process killed at x:
/// g_x(y, z) = (R(x,y) + R(x,z) - R(y,z)) / 2, clamped at zero.
inline double green_kernel(const ResistanceKernel& kernel, int x, int y, int z) {
    const double g = (kernel(x, y) + kernel(x, z) - kernel(y, z)) / 2.0;
    return g < 0.0 && g > -kClampTolerance ? 0.0 : std::max(g, 0.0);
}

/// Expected time for the walk with speed measure theta (mean holding time
/// theta(v) / nu(v) at v, jump chain of the network) to first hit
/// `targets`, from every vertex. Zero on the targets.
inline Eigen::VectorXd mean_crossing_times(const Network& net, std::span<const double> theta, std::span<const int> targets) {
    if (theta.size() != net.vertex_count()) throw ArgumentError("resistance_network", "speed measure size mismatch");
    if (targets.empty()) throw ArgumentError("resistance_network", "no targets");
    for (int t : targets) detail::require_vertex(net, t);
    auto seen = net.reachable_from(targets);
    const auto n = static_cast<Eigen::Index>(net.vertex_count());
    std::vector<char> is_target(static_cast<std::size_t>(n), 0);
    for (int t : targets) is_target[static_cast<std::size_t>(t)] = 1;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (is_target[static_cast<std::size_t>(i)]) continue;
        if (!seen[static_cast<std::size_t>(i)])
            throw SingularTraceError("resistance_network", "targets unreachable from vertex " + std::to_string(i));
        free.push_back(i);
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    if (free.empty()) return out;
    const Eigen::MatrixXd lap = net.laplacian();
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(free.size()));
    for (std::size_t a = 0; a < free.size(); ++a) rhs[static_cast<Eigen::Index>(a)] = theta[static_cast<std::size_t>(free[a])];
    Eigen::LLT<Eigen::MatrixXd> llt(lap(free, free));
    if (llt.info() != Eigen::Success) throw SingularTraceError("resistance_network", "killed generator is singular");
    const Eigen::VectorXd h = llt.solve(rhs);
    for (std::size_t a = 0; a < free.size(); ++a) out[free[a]] = h[static_cast<Eigen::Index>(a)];
    return out;
}

struct HittingTime {
    double via_green = 0.0;  // sum_z g_x(y, z) theta(z)
    double via_solve = 0.0;  // killed-chain linear system
};

/// E_y[sigma_x] for the theta-speed walk, computed two independent ways.
inline HittingTime expected_hitting_time(const Network& net, std::span<const double> theta, int y, int x) {
    detail::require_vertex(net, x);
    detail::require_vertex(net, y);
    if (x == y) throw ArgumentError("resistance_network", "start and target coincide");
    HittingTime out;
    const int target[1] = {x};
    out.via_solve = mean_crossing_times(net, theta, target)[y];
    const auto kernel = pairwise_resistance(net);
    for (std::size_t z = 0; z < net.vertex_count(); ++z) {
        if (theta[z] == 0.0) continue;
        out.via_green += green_kernel(kernel, x, y, static_cast<int>(z)) * theta[z];
    }
    return out;
}

}  // namespace rcm
