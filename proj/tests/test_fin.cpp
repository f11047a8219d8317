#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numeric>

#include "rcm/fin.hpp"

using namespace rcm;

namespace {

std::shared_ptr<const FractalGraph> gasket(std::size_t n) {
    return std::make_shared<const FractalGraph>(build_graph(presets::sierpinski_gasket(), n));
}

TrapMeasure single_atom(CellWord word, double mass) {
    TrapMeasure m;
    m.cutoff = mass;
    m.alpha = 0.5;
    m.depth = word.level();
    m.atoms.push_back({mass, std::move(word)});
    return m;
}

}  // namespace

TEST(Projection, AtomOnAVertexKeepsItsMass) {
    auto g = gasket(2);
    // psi_{1,0}(0) is the vertex x_1 / 2 of G_2; deeper words with trailing
    // zeros name the same point
    for (std::size_t extra = 0; extra < 3; ++extra) {
        CellWord w{{1, 0}};
        for (std::size_t k = 0; k < extra; ++k) w.letters.push_back(0);
        const auto theta = project_traps(single_atom(w, 2.5), *g);
        const auto hit = g->find_vertex(w.apply(g->spec(), Point::Zero(2)));
        ASSERT_TRUE(hit.has_value());
        EXPECT_EQ(theta[static_cast<std::size_t>(*hit)], 2.5);
        EXPECT_EQ(std::accumulate(theta.begin(), theta.end(), 0.0), 2.5);
    }
}

TEST(Projection, ConservesMass) {
    const auto spec = presets::sierpinski_gasket();
    for (std::size_t n = 1; n <= 4; ++n) {
        auto g = gasket(n);
        Engine rng = SeededStream{1, n, n, "traps"}.engine();
        const auto m = sample_trap_measure(spec, 0.5, 1e-4, 2 * n, rng);
        const auto theta = project_traps(m, *g);
        // per-vertex sums regroup the same addends
        EXPECT_NEAR(std::accumulate(theta.begin(), theta.end(), 0.0), m.total_mass(), 1e-12 * m.total_mass());
    }
}

TEST(Projection, FineThenCoarseMatchesDirect) {
    // projecting to G_3 and then to the nearest vertex of the enclosing
    // 2-cell agrees with direct projection unless the G_3 vertex is
    // equidistant from two corners of that cell
    const auto spec = presets::sierpinski_gasket();
    auto coarse = gasket(2);
    auto fine = gasket(3);
    Engine rng = SeededStream{2, 0, 0, "traps"}.engine();
    const auto m = sample_trap_measure(spec, 0.5, 1e-5, 6, rng);
    ASSERT_GT(m.atoms.size(), 100u);
    std::size_t agree = 0;
    for (const auto& atom : m.atoms) {
        const auto one = single_atom(atom.word, atom.mass);
        const auto t_fine = project_traps(one, *fine);
        const auto t_coarse = project_traps(one, *coarse);
        const Point x = fine->coordinate(static_cast<int>(std::max_element(t_fine.begin(), t_fine.end()) - t_fine.begin()));
        const int direct = static_cast<int>(std::max_element(t_coarse.begin(), t_coarse.end()) - t_coarse.begin());
        const auto cell = coarse->cell(2, atom.word.prefix(2).index(spec.size()));
        std::vector<double> d;
        for (int u : cell) d.push_back((coarse->coordinate(u) - x).norm());
        const auto nearest = std::min_element(d.begin(), d.end()) - d.begin();
        const int via_fine = cell[static_cast<std::size_t>(nearest)];
        if (via_fine == direct) {
            ++agree;
            continue;
        }
        std::sort(d.begin(), d.end());
        EXPECT_NEAR(d[0], d[1], 1e-12);
    }
    EXPECT_GT(agree, 0u);
}

TEST(Projection, ShallowWordsAreRejected) {
    EXPECT_THROW(project_traps(single_atom(CellWord{{1}}, 1.0), *gasket(2)), ArgumentError);
}

TEST(TimeChanged, NuSpeedReproducesCsrwPathwise) {
    Engine rng = SeededStream{3, 0, 3, "environment"}.engine();
    const auto net = sample_environment(gasket(3), ConductanceLaw::pareto(0.5), rng).network();
    const TimeChangedSetup setup(net, net.vertex_measure());
    const WalkNetwork plain(net);
    const auto targets = crossing_targets(*gasket(3));
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        WalkConfig cfg;
        cfg.hit_set = targets;
        cfg.record = RecordMode::path_skeleton;
        cfg.mode = WalkMode::time_changed;
        auto a = WalkStreams::from(3, trial);
        const auto tc = simulate_time_changed(setup, cfg, a);
        cfg.mode = WalkMode::csrw;
        auto b = WalkStreams::from(3, trial);
        const auto c = simulate_csrw(plain, cfg, b);
        ASSERT_EQ(tc.skeleton.size(), c.skeleton.size());
        for (std::size_t i = 0; i < c.skeleton.size(); ++i) {
            EXPECT_EQ(tc.skeleton[i].second, c.skeleton[i].second);
            EXPECT_NEAR(tc.skeleton[i].first, c.skeleton[i].first, 1e-12 * (1.0 + c.skeleton[i].first));
        }
    }
}

TEST(TimeChanged, SingleEdgeMassAtStart) {
    const double w = 2.0, mass = 3.0;
    const TimeChangedSetup setup(Network(2, {{0, 1, w}}), {mass, 0.0});
    WalkConfig cfg;
    cfg.mode = WalkMode::time_changed;
    cfg.hit_set = {1};
    const std::size_t runs = 50000;
    std::vector<double> t(runs);
    for (std::size_t i = 0; i < runs; ++i) {
        auto s = WalkStreams::from(4, i);
        t[i] = simulate_time_changed(setup, cfg, s).elapsed_time;
    }
    EXPECT_NEAR(stats::mean(t), mass / w, 3 * (mass / w) / std::sqrt(static_cast<double>(runs)));
    EXPECT_LT(stats::ks_distance(t, [&](double x) { return 1.0 - std::exp(-x * w / mass); }), 1.36 / std::sqrt(static_cast<double>(runs)));
}

TEST(TimeChanged, ZeroMassPathIsInstantaneous) {
    // all mass sits away from the path 0 -> 1
    const TimeChangedSetup setup(Network(3, {{0, 1, 1.0}, {1, 2, 1.0}}), {0.0, 0.0, 1.0});
    WalkConfig cfg;
    cfg.mode = WalkMode::time_changed;
    cfg.hit_set = {1};
    auto s = WalkStreams::from(5, 0);
    const auto r = simulate_time_changed(setup, cfg, s);
    EXPECT_TRUE(r.zero_time);
    EXPECT_EQ(r.jumps, 1u);
}

TEST(TimeChanged, OracleIsLinearInTheta) {
    Engine rng = SeededStream{6, 0, 0, "linear"}.engine();
    for (int trial = 0; trial < 20; ++trial) {
        const auto net = sample_environment(gasket(2), ConductanceLaw::pareto(0.5), rng).network();
        std::vector<double> a(net.vertex_count()), b(net.vertex_count()), sum(net.vertex_count()), twice(net.vertex_count());
        for (std::size_t v = 0; v < a.size(); ++v) {
            a[v] = uniform01(rng);
            b[v] = uniform01(rng) < 0.5 ? 0.0 : uniform01(rng);
            sum[v] = a[v] + b[v];
            twice[v] = 2 * a[v];
        }
        const int targets[2] = {1, 2};
        const double ta = crossing_oracle(net, a, 0, targets);
        const double tb = crossing_oracle(net, b, 0, targets);
        EXPECT_NEAR(crossing_oracle(net, sum, 0, targets), ta + tb, 1e-8 * (ta + tb));
        EXPECT_NEAR(crossing_oracle(net, twice, 0, targets), 2 * ta, 1e-8 * ta);
    }
}

TEST(TimeChanged, SetupErrors) {
    const Network net(2, {{0, 1, 1.0}});
    EXPECT_THROW(TimeChangedSetup(net, {0.0, 0.0}), ArgumentError);
    EXPECT_THROW(TimeChangedSetup(net, {1.0, -0.5}), ArgumentError);
    EXPECT_THROW(TimeChangedSetup(net, {1.0}), ArgumentError);
    const TimeChangedSetup ok(net, {1.0, 1.0});
    WalkConfig cfg;
    cfg.hit_set = {1};
    auto s = WalkStreams::from(1, 0);
    EXPECT_THROW(simulate_time_changed(ok, cfg, s), ArgumentError);
}

TEST(FinCheck, RefusesSmallInputs) {
    FinOptions opt;
    opt.levels = {2};
    EXPECT_THROW(fin_stabilization_check(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), opt), ArgumentError);
    opt.levels = {1, 2, 3};
    opt.trials = 99;
    EXPECT_THROW(fin_stabilization_check(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), opt), ArgumentError);
}

TEST(FinCheck, UnitWeightControlStabilizes) {
    FinOptions opt;
    opt.levels = {1, 2, 3, 4};
    opt.trials = 1000;
    opt.seed = 7;
    const auto rep = fin_stabilization_check(presets::sierpinski_gasket(), ConductanceLaw::constant(), opt);
    ASSERT_EQ(rep.ks_csrw.size(), 3u);
    EXPECT_LT(rep.ks_csrw.back(), rep.ks_csrw.front());
    for (std::size_t i = 0; i < rep.levels.size(); ++i)
        EXPECT_DOUBLE_EQ(rep.csrw_scale[i], std::pow(5.0, static_cast<double>(rep.levels[i])));
}

TEST(FinCheck, ThreadCountDoesNotChangeResults) {
    FinOptions opt;
    opt.levels = {1, 2, 3};
    opt.trials = 100;
    opt.seed = 8;
    opt.threads = 1;
    const auto a = fin_stabilization_check(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), opt);
    opt.threads = 4;
    const auto b = fin_stabilization_check(presets::sierpinski_gasket(), ConductanceLaw::pareto(0.5), opt);
    EXPECT_EQ(a.csrw, b.csrw);
    EXPECT_EQ(a.time_changed, b.time_changed);
    EXPECT_EQ(a.ks_cross_top, b.ks_cross_top);
}
