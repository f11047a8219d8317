#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "rcm/scaling.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

using namespace rcm;

namespace {

std::shared_ptr<const FractalGraph> gasket(std::size_t n) {
    return std::make_shared<const FractalGraph>(build_graph(presets::sierpinski_gasket(), n));
}

Network unit_gasket(std::size_t n) { return pattern_field(gasket(n), {1.0, 1.0, 1.0}).network(); }

Network pareto_gasket(std::size_t n, std::uint64_t seed) {
    Engine rng = SeededStream{seed, 0, n, "environment"}.engine();
    return sample_environment(gasket(n), ConductanceLaw::pareto(0.5), rng).network();
}

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
};

Moments crossing_moments(const Network& net, WalkMode mode, std::span<const int> targets, std::size_t runs,
                         std::uint64_t seed, bool compress = true) {
    const WalkNetwork wn(net);
    WalkConfig cfg;
    cfg.mode = mode;
    cfg.hit_set.assign(targets.begin(), targets.end());
    cfg.compress_traps = compress;
    std::vector<double> t(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        auto s = WalkStreams::from(seed, i);
        t[i] = simulate(wn, cfg, s).elapsed_time;
    }
    return {stats::mean(t), std::sqrt(stats::variance(t) / static_cast<double>(runs))};
}

}  // namespace

TEST(Walk, TwoVertexHoldingIsExponential) {
    const double w = 2.5;
    const WalkNetwork net(Network(2, {{0, 1, w}}));
    WalkConfig cfg;
    cfg.mode = WalkMode::vsrw;
    cfg.hit_set = {1};
    const std::size_t runs = 100000;
    std::vector<double> t(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        auto s = WalkStreams::from(1, i);
        const auto r = simulate_vsrw(net, cfg, s);
        EXPECT_EQ(r.jumps, 1u);
        t[i] = r.elapsed_time;
    }
    EXPECT_NEAR(stats::mean(t), 1.0 / w, 3.0 / w / std::sqrt(static_cast<double>(runs)));
    const double d = stats::ks_distance(t, [w](double x) { return 1.0 - std::exp(-w * x); });
    EXPECT_LT(d, 1.36 / std::sqrt(static_cast<double>(runs)));
}

TEST(Walk, VsrwOnGasketMatchesOracle) {
    const auto net = unit_gasket(1);
    const std::vector<int> targets = {1, 2};
    const double oracle = crossing_oracle(net, speed_measure(net, WalkMode::vsrw), 0, targets);
    const auto m = crossing_moments(net, WalkMode::vsrw, targets, 100000, 2);
    EXPECT_NEAR(m.mean, oracle, 3 * m.sd);
}

TEST(Walk, CsrwOnTriangleAndGasket) {
    const std::vector<int> targets = {1, 2};
    const auto tri = crossing_moments(Network(3, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}}), WalkMode::csrw, targets, 100000, 3);
    EXPECT_NEAR(tri.mean, 1.0, 3 * tri.sd);
    const auto g = crossing_moments(unit_gasket(1), WalkMode::csrw, targets, 100000, 4);
    EXPECT_NEAR(g.mean, 5.0, 3 * g.sd);
}

TEST(Walk, ZeroJumpBudget) {
    const WalkNetwork net(unit_gasket(2));
    WalkConfig cfg;
    cfg.start = 4;
    cfg.jump_budget = 0;
    cfg.record = RecordMode::path_skeleton;
    auto s = WalkStreams::from(1, 0);
    const auto r = simulate(net, cfg, s);
    EXPECT_EQ(r.elapsed_time, 0.0);
    EXPECT_EQ(r.jumps, 0u);
    EXPECT_FALSE(r.exit_vertex.has_value());
    ASSERT_EQ(r.skeleton.size(), 1u);
    EXPECT_EQ(r.skeleton.front().second, 4);
}

TEST(Walk, TimeHorizonStopsTheClock) {
    const WalkNetwork net(unit_gasket(3));
    WalkConfig cfg;
    cfg.time_horizon = 7.5;
    for (std::uint64_t i = 0; i < 50; ++i) {
        auto s = WalkStreams::from(5, i);
        const auto r = simulate(net, cfg, s);
        EXPECT_EQ(r.elapsed_time, 7.5);
        EXPECT_GT(r.jumps, 0u);
    }
}

TEST(Walk, StartOnTargetIsZeroTime) {
    const WalkNetwork net(unit_gasket(1));
    WalkConfig cfg;
    cfg.start = 1;
    cfg.hit_set = {1, 2};
    auto s = WalkStreams::from(1, 0);
    const auto r = simulate(net, cfg, s);
    EXPECT_TRUE(r.zero_time);
    EXPECT_EQ(r.exit_vertex, 1);
}

TEST(Walk, CoupledChainsVisitTheSameVertices) {
    const WalkNetwork net(pareto_gasket(3, 6));
    const auto targets = crossing_targets(*gasket(3));
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        WalkConfig cfg;
        cfg.hit_set = targets;
        cfg.record = RecordMode::path_skeleton;
        cfg.mode = WalkMode::vsrw;
        auto a = WalkStreams::from(6, trial);
        const auto v = simulate_vsrw(net, cfg, a);
        cfg.mode = WalkMode::csrw;
        auto b = WalkStreams::from(6, trial);
        b.clock = SeededStream{99, trial, 0, "other-clock"}.engine();
        const auto c = simulate_csrw(net, cfg, b);
        ASSERT_EQ(v.skeleton.size(), c.skeleton.size());
        for (std::size_t i = 0; i < v.skeleton.size(); ++i) EXPECT_EQ(v.skeleton[i].second, c.skeleton[i].second);
        EXPECT_EQ(v.jumps, c.jumps);
        EXPECT_EQ(v.exit_vertex, c.exit_vertex);
    }
}

TEST(Walk, SkeletonStrideThins) {
    const WalkNetwork net(unit_gasket(3));
    WalkConfig cfg;
    cfg.jump_budget = 100;
    cfg.record = RecordMode::path_skeleton;
    cfg.stride = 10;
    auto s = WalkStreams::from(2, 0);
    const auto r = simulate(net, cfg, s);
    EXPECT_EQ(r.skeleton.size(), 11u);
    for (std::size_t i = 1; i < r.skeleton.size(); ++i) EXPECT_GE(r.skeleton[i].first, r.skeleton[i - 1].first);
}

TEST(Walk, CompressionPreservesTheLaw) {
    const auto net = pareto_gasket(2, 7);
    const auto targets = crossing_targets(*gasket(2));
    const WalkNetwork wn(net);
    int traps = 0;
    for (std::size_t v = 0; v < wn.vertex_count(); ++v) traps += wn.trap_partner(static_cast<int>(v)) >= 0;
    ASSERT_GT(traps, 0);
    for (WalkMode mode : {WalkMode::vsrw, WalkMode::csrw}) {
        const double oracle = crossing_oracle(net, speed_measure(net, mode), 0, targets);
        const auto on = crossing_moments(net, mode, targets, 10000, 8, true);
        const auto off = crossing_moments(net, mode, targets, 4000, 9, false);
        EXPECT_NEAR(on.mean, oracle, 4 * on.sd);
        EXPECT_NEAR(off.mean, oracle, 4 * off.sd);
    }
}

TEST(Walk, Errors) {
    const WalkNetwork isolated(Network(3, {{0, 1, 1.0}}));
    WalkConfig cfg;
    cfg.hit_set = {1};
    cfg.start = 2;
    auto s = WalkStreams::from(1, 0);
    EXPECT_THROW(simulate(isolated, cfg, s), ArgumentError);
    cfg.start = 5;
    EXPECT_THROW(simulate(isolated, cfg, s), ArgumentError);
    cfg.start = 0;
    cfg.hit_set = {2};
    EXPECT_THROW(simulate(isolated, cfg, s), SingularTraceError);
    cfg.hit_set.clear();
    EXPECT_THROW(simulate(isolated, cfg, s), ArgumentError);
    cfg.hit_set = {1};
    cfg.mode = WalkMode::vsrw;
    EXPECT_THROW(simulate_csrw(isolated, cfg, s), ArgumentError);
}

TEST(Oracle, UnitGasketDecimatesByFive) {
    double previous = 0.0;
    for (std::size_t n = 1; n <= 6; ++n) {
        const auto net = unit_gasket(n);
        const double t = crossing_oracle(net, speed_measure(net, WalkMode::csrw), 0, crossing_targets(*gasket(n)));
        if (n > 1) EXPECT_NEAR(t / previous, 5.0, 1e-9) << n;
        else EXPECT_NEAR(t, 5.0, 1e-12);
        previous = t;
    }
}

TEST(Oracle, SingleEdgeAndTriangle) {
    const Network edge(2, {{0, 1, 4.0}});
    const int one[1] = {1};
    EXPECT_NEAR(crossing_oracle(edge, speed_measure(edge, WalkMode::vsrw), 0, one), 0.25, 1e-15);

    // weights a = w01, b = w12, c = w02; target {2} from 0, VSRW holding 1 / nu
    const double a = 1.3, b = 0.4, c = 2.2;
    const Network tri(3, {{0, 1, a}, {1, 2, b}, {0, 2, c}});
    // h0 = 1/(a+c) + a/(a+c) h1,  h1 = 1/(a+b) + a/(a+b) h0
    const double p01 = a / (a + c), p10 = a / (a + b);
    const double h0 = (1.0 / (a + c) + p01 / (a + b)) / (1.0 - p01 * p10);
    const int two[1] = {2};
    EXPECT_NEAR(crossing_oracle(tri, speed_measure(tri, WalkMode::vsrw), 0, two), h0, 1e-14);
}

TEST(Scaling, PredictedSlopes) {
    EXPECT_NEAR(predicted_log_slope(5.0 / 3.0, 3, WalkMode::vsrw, ConductanceLaw::pareto(0.5)), std::log(5.0), 1e-15);
    EXPECT_NEAR(predicted_log_slope(5.0 / 3.0, 3, WalkMode::csrw, ConductanceLaw::pareto(0.5)), std::log(15.0), 1e-15);
    EXPECT_NEAR(predicted_log_slope(5.0 / 3.0, 3, WalkMode::csrw, ConductanceLaw::constant()), std::log(5.0), 1e-15);
}

TEST(Scaling, UnitWeightOracleSlopeIsLogFive) {
    ScalingOptions opt;
    opt.levels = {1, 2, 3, 4};
    opt.oracle = true;
    const auto rep = scaling_experiment(presets::sierpinski_gasket(), ConductanceLaw::constant(), WalkMode::csrw, opt);
    EXPECT_NEAR(rep.fitted_log_slope, std::log(5.0), 1e-9);
    EXPECT_LT(rep.relative_slope_error(), 1e-9);
    EXPECT_NEAR(rep.constant_estimate, 1.0, 1e-9);
    EXPECT_TRUE(rep.monotone);
}

TEST(Scaling, MonteCarloMatchesUnitDecimation) {
    ScalingOptions opt;
    opt.levels = {1, 2, 3};
    opt.trials = 2000;
    opt.statistic = stats::Statistic::parse("mean");
    opt.seed = 3;
    const auto rep = scaling_experiment(presets::sierpinski_gasket(), ConductanceLaw::constant(), WalkMode::csrw, opt);
    EXPECT_NEAR(rep.fitted_log_slope, std::log(5.0), 0.1);
}

TEST(Scaling, ThreadCountDoesNotChangeResults) {
    ScalingOptions opt;
    opt.levels = {1, 2, 3};
    opt.trials = 40;
    opt.seed = 11;
    opt.threads = 1;
    const auto a = scaling_experiment(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), WalkMode::csrw, opt);
    opt.threads = 3;
    const auto b = scaling_experiment(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), WalkMode::csrw, opt);
    EXPECT_EQ(a.values, b.values);
    for (std::size_t l = 0; l < a.samples.size(); ++l)
        for (std::size_t t = 0; t < a.samples[l].size(); ++t) EXPECT_EQ(a.samples[l][t].time, b.samples[l][t].time);
}

TEST(Scaling, NeedsThreeLevels) {
    ScalingOptions opt;
    opt.levels = {1, 2};
    opt.trials = 10;
    EXPECT_THROW(scaling_experiment(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), WalkMode::csrw, opt),
                 ArgumentError);
}
