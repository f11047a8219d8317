#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/random.hpp"
#include "rcm/resistance.hpp"

namespace rcm {

enum class WalkMode {
    vsrw,          // jump rate w_xy, mean holding 1 / nu(x)
    csrw,          // unit mean holding
    time_changed,  // mean holding theta(x) / nu(x); zero mass is instantaneous
};

enum class RecordMode { hitting_time_only, path_skeleton };

struct WalkConfig {
    WalkMode mode = WalkMode::csrw;
    int start = 0;
    std::vector<int> hit_set;
    std::optional<double> time_horizon;
    std::optional<std::uint64_t> jump_budget;
    RecordMode record = RecordMode::hitting_time_only;
    std::size_t stride = 1;
    /// Speed measure for WalkMode::time_changed.
    std::vector<double> theta;
    /// Collapse back-and-forth runs across a dominant edge into one exactly
    /// sampled event. Ignored when a horizon or jump budget is set.
    bool compress_traps = true;

    void validate() const {
        if (hit_set.empty() && !time_horizon && !jump_budget)
            throw ArgumentError("walk_simulator", "walk needs a stopping condition");
        if (stride < 1) throw ArgumentError("walk_simulator", "skeleton stride must be >= 1");
        if (time_horizon && !(*time_horizon >= 0.0)) throw ArgumentError("walk_simulator", "negative time horizon");
    }
};

struct WalkResult {
    double elapsed_time = 0.0;
    std::uint64_t jumps = 0;
    std::optional<int> exit_vertex;
    /// (time, vertex) at the start and after every `stride`-th event; a
    /// compressed trap excursion counts as one event.
    std::vector<std::pair<double, int>> skeleton;
    bool zero_time = false;  // target reached without accumulating time
};

/// Independent engines for the jump chain and for the holding clocks. Two
/// walks sharing a jump engine seed follow the same vertex sequence whatever
/// their clocks.
struct WalkStreams {
    Engine jumps;
    Engine clock;

    static WalkStreams from(std::uint64_t seed, std::uint64_t trial, std::uint64_t level = 0) {
        return {SeededStream{seed, trial, level, "walk-jumps"}.engine(), SeededStream{seed, trial, level, "walk-clock"}.engine()};
    }
};

/// Adjacency view of a network prepared for simulation: parallel edges merged,
/// per-vertex total conductance, and for every vertex the partner across an
/// edge that carries at least half the conductance at both ends (if any).
class WalkNetwork {
public:
    explicit WalkNetwork(const Network& net) : n_(net.vertex_count()) {
        std::vector<std::vector<std::pair<int, double>>> adj(n_);
        for (const auto& e : net.edges()) {
            merge(adj[static_cast<std::size_t>(e.u)], e.v, e.weight);
            merge(adj[static_cast<std::size_t>(e.v)], e.u, e.weight);
        }
        offsets_.assign(n_ + 1, 0);
        for (std::size_t v = 0; v < n_; ++v) offsets_[v + 1] = offsets_[v] + adj[v].size();
        neighbors_.reserve(offsets_.back());
        weights_.reserve(offsets_.back());
        nu_.assign(n_, 0.0);
        for (std::size_t v = 0; v < n_; ++v)
            for (auto [u, w] : adj[v]) {
                neighbors_.push_back(u);
                weights_.push_back(w);
                nu_[v] += w;
            }
        partner_.assign(n_, -1);
        partner_weight_.assign(n_, 0.0);
        rest_.assign(n_, 0.0);
        for (std::size_t v = 0; v < n_; ++v) {
            std::size_t best = offsets_[v];
            for (std::size_t s = offsets_[v]; s < offsets_[v + 1]; ++s)
                if (weights_[s] > weights_[best]) best = s;
            if (offsets_[v] == offsets_[v + 1]) continue;
            double rest = 0.0;
            for (std::size_t s = offsets_[v]; s < offsets_[v + 1]; ++s)
                if (s != best) rest += weights_[s];
            partner_[v] = neighbors_[best];
            partner_weight_[v] = weights_[best];
            rest_[v] = rest;
        }
        for (std::size_t v = 0; v < n_; ++v) {
            const int p = partner_[v];
            const bool dominant = p >= 0 && partner_[static_cast<std::size_t>(p)] == static_cast<int>(v) &&
                                  partner_weight_[v] >= rest_[v] && partner_weight_[v] >= rest_[static_cast<std::size_t>(p)];
            if (!dominant) partner_[v] = -1;
        }
    }

    std::size_t vertex_count() const noexcept { return n_; }
    const std::vector<double>& nu() const noexcept { return nu_; }

    std::span<const int> neighbors(int v) const {
        return {neighbors_.data() + offsets_[static_cast<std::size_t>(v)], offsets_[static_cast<std::size_t>(v) + 1] - offsets_[static_cast<std::size_t>(v)]};
    }
    std::span<const double> weights(int v) const {
        return {weights_.data() + offsets_[static_cast<std::size_t>(v)], offsets_[static_cast<std::size_t>(v) + 1] - offsets_[static_cast<std::size_t>(v)]};
    }

    int trap_partner(int v) const { return partner_[static_cast<std::size_t>(v)]; }
    double trap_weight(int v) const { return partner_weight_[static_cast<std::size_t>(v)]; }
    /// Conductance at v not on the edge to its trap partner.
    double trap_rest(int v) const { return rest_[static_cast<std::size_t>(v)]; }

    /// Neighbour chosen with probability w / (total - excluded weight).
    int pick(int v, double u, int exclude = -1) const {
        const auto nb = neighbors(v);
        const auto w = weights(v);
        double total = 0.0;
        for (std::size_t s = 0; s < nb.size(); ++s)
            if (nb[s] != exclude) total += w[s];
        double target = u * total;
        int last = -1;
        for (std::size_t s = 0; s < nb.size(); ++s) {
            if (nb[s] == exclude) continue;
            last = nb[s];
            if (target < w[s]) return nb[s];
            target -= w[s];
        }
        return last;
    }

    std::vector<char> can_reach(std::span<const int> targets) const {
        std::vector<char> seen(n_, 0);
        std::vector<int> stack(targets.begin(), targets.end());
        for (int t : targets) seen[static_cast<std::size_t>(t)] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int v : neighbors(u))
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
        }
        return seen;
    }

private:
    static void merge(std::vector<std::pair<int, double>>& list, int v, double w) {
        for (auto& [u, x] : list)
            if (u == v) {
                x += w;
                return;
            }
        list.emplace_back(v, w);
    }

    std::size_t n_;
    std::vector<std::size_t> offsets_;
    std::vector<int> neighbors_;
    std::vector<double> weights_;
    std::vector<double> nu_;
    std::vector<int> partner_;
    std::vector<double> partner_weight_;
    std::vector<double> rest_;
};

/// Mean holding time per vertex for a walk mode.
inline std::vector<double> holding_means(const WalkNetwork& net, WalkMode mode, std::span<const double> theta = {}) {
    const auto& nu = net.nu();
    std::vector<double> m(nu.size(), 1.0);
    switch (mode) {
        case WalkMode::vsrw:
            for (std::size_t v = 0; v < m.size(); ++v) m[v] = 1.0 / nu[v];
            break;
        case WalkMode::csrw:
            break;
        case WalkMode::time_changed:
            if (theta.size() != m.size()) throw ArgumentError("walk_simulator", "speed measure size mismatch");
            for (std::size_t v = 0; v < m.size(); ++v) {
                if (!(theta[v] >= 0.0)) throw ArgumentError("walk_simulator", "negative speed measure");
                m[v] = theta[v] / nu[v];
            }
            break;
    }
    return m;
}

/// Event loop shared by every walk mode: exact exponential clocks, the jump
/// chain of the network, and exact collapse of trap excursions.
///
/// A trap excursion across a dominant edge {x, y} alternates x, y, x, ...
/// until it leaves. With a = w/nu(x), b = w/nu(y) the number C of complete
/// x->y->x cycles is geometric with P(C >= k) = (ab)^k, after which the walk
/// leaves from x with probability (1-a)/(1-ab) or from y otherwise. The clock
/// adds Gamma(K_x)*m(x) + Gamma(K_y)*m(y) for the K_x, K_y holds at each end.
inline WalkResult simulate_walk(const WalkNetwork& net, std::span<const double> mean_hold, const WalkConfig& cfg,
                                WalkStreams& streams) {
    cfg.validate();
    const auto n = net.vertex_count();
    if (cfg.start < 0 || static_cast<std::size_t>(cfg.start) >= n)
        throw ArgumentError("walk_simulator", "start vertex out of range");
    if (!(net.nu()[static_cast<std::size_t>(cfg.start)] > 0.0))
        throw ArgumentError("walk_simulator", "start vertex is isolated");
    std::vector<char> is_target(n, 0);
    for (int t : cfg.hit_set) {
        if (t < 0 || static_cast<std::size_t>(t) >= n) throw ArgumentError("walk_simulator", "target out of range");
        is_target[static_cast<std::size_t>(t)] = 1;
    }
    const bool bounded = cfg.time_horizon || cfg.jump_budget;
    if (!bounded && !net.can_reach(cfg.hit_set)[static_cast<std::size_t>(cfg.start)])
        throw SingularTraceError("walk_simulator", "targets unreachable from the start vertex");
    const bool compress = cfg.compress_traps && !bounded;
    const bool skeleton = cfg.record == RecordMode::path_skeleton;

    WalkResult r;
    int x = cfg.start;
    double t = 0.0;
    std::uint64_t events = 0;
    if (skeleton) r.skeleton.emplace_back(0.0, x);
    if (is_target[static_cast<std::size_t>(x)]) {
        r.exit_vertex = x;
        r.zero_time = true;
        return r;
    }
    while (true) {
        if (cfg.jump_budget && r.jumps >= *cfg.jump_budget) break;
        const int y = compress ? net.trap_partner(x) : -1;
        int next = -1;
        if (y >= 0 && !is_target[static_cast<std::size_t>(y)]) {
            const double w = net.trap_weight(x);
            const double nux = net.nu()[static_cast<std::size_t>(x)];
            const double nuy = net.nu()[static_cast<std::size_t>(y)];
            const double leave_x = net.trap_rest(x) / nux;  // 1 - a
            const double leave_y = net.trap_rest(y) / nuy;  // 1 - b
            const double a = w / nux;
            const double escape = leave_x + a * leave_y;  // 1 - ab
            const double cycles = std::floor(std::log(uniform_open0(streams.jumps)) / std::log1p(-escape));
            const bool exit_at_x = uniform01(streams.jumps) * escape < leave_x;
            const double holds_x = cycles + 1.0;
            const double holds_y = exit_at_x ? cycles : cycles + 1.0;
            const int from = exit_at_x ? x : y;
            next = net.pick(from, uniform01(streams.jumps), exit_at_x ? y : x);
            const double gx = standard_gamma(streams.clock, holds_x);
            const double gy = standard_gamma(streams.clock, holds_y);
            t += gx * mean_hold[static_cast<std::size_t>(x)] + gy * mean_hold[static_cast<std::size_t>(y)];
            r.jumps += static_cast<std::uint64_t>(2.0 * cycles) + (exit_at_x ? 1 : 2);
        } else {
            const double hold = standard_exponential(streams.clock) * mean_hold[static_cast<std::size_t>(x)];
            if (cfg.time_horizon && t + hold > *cfg.time_horizon) {
                t = *cfg.time_horizon;
                break;
            }
            t += hold;
            next = net.pick(x, uniform01(streams.jumps));
            ++r.jumps;
        }
        x = next;
        ++events;
        if (skeleton && events % cfg.stride == 0) r.skeleton.emplace_back(t, x);
        if (is_target[static_cast<std::size_t>(x)]) {
            r.exit_vertex = x;
            break;
        }
    }
    r.elapsed_time = t;
    r.zero_time = r.exit_vertex.has_value() && t == 0.0;
    return r;
}

inline WalkResult simulate_vsrw(const WalkNetwork& net, const WalkConfig& cfg, WalkStreams& streams) {
    if (cfg.mode != WalkMode::vsrw) throw ArgumentError("walk_simulator", "simulate_vsrw needs mode vsrw");
    return simulate_walk(net, holding_means(net, WalkMode::vsrw), cfg, streams);
}

inline WalkResult simulate_csrw(const WalkNetwork& net, const WalkConfig& cfg, WalkStreams& streams) {
    if (cfg.mode != WalkMode::csrw) throw ArgumentError("walk_simulator", "simulate_csrw needs mode csrw");
    return simulate_walk(net, holding_means(net, WalkMode::csrw), cfg, streams);
}

/// Dispatches on cfg.mode.
inline WalkResult simulate(const WalkNetwork& net, const WalkConfig& cfg, WalkStreams& streams) {
    return simulate_walk(net, holding_means(net, cfg.mode, cfg.theta), cfg, streams);
}

/// Speed measure whose theta-walk is the given mode: counting measure for
/// the VSRW, nu for the CSRW.
inline std::vector<double> speed_measure(const Network& net, WalkMode mode) {
    if (mode == WalkMode::vsrw) return std::vector<double>(net.vertex_count(), 1.0);
    if (mode == WalkMode::csrw) return net.vertex_measure();
    throw ArgumentError("walk_simulator", "time-changed walks carry their own speed measure");
}

/// Exact expected time to hit `targets` from `start` for the theta-speed walk
/// (mean holding theta(v)/nu(v)): one linear solve L_II h = theta_I on the
/// non-target vertices.
inline double crossing_oracle(const Network& net, std::span<const double> theta, int start, std::span<const int> targets) {
    return mean_crossing_times(net, theta, targets)[start];
}

}  // namespace rcm
