#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

#include "rcm/environment.hpp"
#include "rcm/stats.hpp"

using namespace rcm;
using namespace rcm::stats;

namespace {

std::shared_ptr<const FractalGraph> gasket(std::size_t n) {
    return std::make_shared<const FractalGraph>(build_graph(presets::sierpinski_gasket(), n));
}

}  // namespace

TEST(Environment, DegenerateLaw) {
    Engine rng(1);
    const auto f = sample_environment(gasket(3), ConductanceLaw::constant(1.0), rng);
    for (double w : f.weights) EXPECT_EQ(w, 1.0);
}

TEST(Environment, LawValidation) {
    EXPECT_THROW(ConductanceLaw::pareto(1.0), ArgumentError);
    EXPECT_THROW(ConductanceLaw::pareto(0.0), ArgumentError);
    EXPECT_THROW(ConductanceLaw::pareto(0.5, 0.0), ArgumentError);
    EXPECT_THROW(ConductanceLaw::constant(-1.0), ArgumentError);
}

TEST(Environment, ParetoTail) {
    Engine rng = SeededStream{1, 0, 0, "tail"}.engine();
    const std::size_t n = 1000000;
    std::vector<double> x(n);
    for (auto& v : x) v = pareto(rng, 0.5, 1.0);
    for (double u : {2.0, 10.0, 100.0, 1000.0}) {
        const double p = static_cast<double>(std::count_if(x.begin(), x.end(), [u](double v) { return v > u; })) / static_cast<double>(n);
        const double exact = std::pow(u, -0.5);
        const double sigma = std::sqrt(exact * (1 - exact) / static_cast<double>(n));
        EXPECT_NEAR(p, exact, 3 * sigma) << u;
    }
}

TEST(Environment, CellSumTailConstant) {
    auto g = gasket(0);
    const auto law = ConductanceLaw::pareto(0.5);
    EXPECT_DOUBLE_EQ(law.tail_constant(3), 3.0);
    Engine rng = SeededStream{2, 0, 0, "cells"}.engine();
    const std::size_t cells = 1000000;
    const double u = 1000.0;
    std::size_t above = 0;
    double w[3];
    for (std::size_t c = 0; c < cells; ++c) {
        law.sample_cell(rng, w);
        above += w[0] + w[1] + w[2] > u;
    }
    const double scaled = std::sqrt(u) * static_cast<double>(above) / static_cast<double>(cells);
    EXPECT_NEAR(scaled, 3.0, 0.3);
}

TEST(Environment, LowerBoundIsExact) {
    Engine rng = SeededStream{3, 0, 0, "floor"}.engine();
    const auto f = sample_environment(gasket(5), ConductanceLaw::pareto(0.3, 2.5), rng);
    EXPECT_GE(*std::min_element(f.weights.begin(), f.weights.end()), 2.5);
}

TEST(Environment, CustomCellLawKeepsDependence) {
    ConductanceLaw law;
    law.family = LawFamily::custom;
    law.lower_bound = 1.0;
    law.cell_law = [](Engine& rng, std::span<double> out) {
        const double w = pareto(rng, 0.5, 1.0);
        std::fill(out.begin(), out.end(), w);
    };
    Engine rng(4);
    const auto f = sample_environment(gasket(2), law, rng);
    for (std::size_t c = 0; c < 9; ++c) {
        EXPECT_EQ(f.weights[3 * c], f.weights[3 * c + 1]);
        EXPECT_EQ(f.weights[3 * c], f.weights[3 * c + 2]);
    }
}

TEST(Environment, Reproducible) {
    Engine a = SeededStream{9, 4, 3, "environment"}.engine();
    Engine b = SeededStream{9, 4, 3, "environment"}.engine();
    Engine c = SeededStream{9, 5, 3, "environment"}.engine();
    const auto law = ConductanceLaw::pareto(0.5);
    const auto fa = sample_environment(gasket(3), law, a);
    const auto fb = sample_environment(gasket(3), law, b);
    const auto fc = sample_environment(gasket(3), law, c);
    EXPECT_EQ(fa.weights, fb.weights);
    EXPECT_NE(fa.weights, fc.weights);
}

TEST(Environment, CellsAreIndependent) {
    // correlation of log cell sums over adjacent cell pairs
    Engine rng = SeededStream{5, 0, 0, "indep"}.engine();
    const auto f = sample_environment(gasket(6), ConductanceLaw::pareto(0.5), rng);
    const std::size_t pairs = f.graph->cell_count() / 2;
    std::vector<double> a(pairs), b(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        const auto* w = &f.weights[6 * p];
        a[p] = std::log(w[0] + w[1] + w[2]);
        b[p] = std::log(w[3] + w[4] + w[5]);
    }
    const double ma = mean(a), mb = mean(b);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t p = 0; p < pairs; ++p) {
        sab += (a[p] - ma) * (b[p] - mb);
        saa += (a[p] - ma) * (a[p] - ma);
        sbb += (b[p] - mb) * (b[p] - mb);
    }
    EXPECT_LT(std::abs(sab / std::sqrt(saa * sbb)), 3.0 / std::sqrt(static_cast<double>(pairs)));
}

TEST(Nu, GasketLevelOne) {
    Engine rng(1);
    const auto nu = nu_measure(sample_environment(gasket(1), ConductanceLaw::constant(1.0), rng));
    for (int v = 0; v < 3; ++v) EXPECT_EQ(nu[static_cast<std::size_t>(v)], 2.0);
    for (int v = 3; v < 6; ++v) EXPECT_EQ(nu[static_cast<std::size_t>(v)], 4.0);
}

TEST(Nu, HandshakeIdentity) {
    Engine rng(2);
    const auto f = sample_environment(gasket(4), ConductanceLaw::pareto(0.7), rng);
    const auto nu = nu_measure(f);
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    const double edges = std::accumulate(f.weights.begin(), f.weights.end(), 0.0);
    EXPECT_NEAR(total, 2 * edges, 1e-10 * total);
    const Network single(2, {{0, 1, 3.5}});
    EXPECT_EQ(single.vertex_measure(), (std::vector<double>{3.5, 3.5}));
}

TEST(Environment, CsvRoundTripIsExact) {
    Engine rng(3);
    auto g = gasket(3);
    const auto f = sample_environment(g, ConductanceLaw::pareto(0.5), rng);
    std::stringstream ss;
    write_environment_csv(ss, f);
    const auto back = read_environment_csv(ss, g);
    EXPECT_EQ(back.weights, f.weights);
}

TEST(Environment, CsvRejectsWrongGraph) {
    Engine rng(3);
    const auto f = sample_environment(gasket(2), ConductanceLaw::pareto(0.5), rng);
    std::stringstream ss;
    write_environment_csv(ss, f);
    EXPECT_ANY_THROW(read_environment_csv(ss, gasket(3)));
}

TEST(Traps, MeanCountAtUnitCutoff) {
    const auto spec = presets::sierpinski_gasket();
    const int reps = 20000;
    double total = 0;
    for (int r = 0; r < reps; ++r) {
        Engine rng = SeededStream{6, static_cast<std::uint64_t>(r), 0, "traps"}.engine();
        total += static_cast<double>(sample_trap_measure(spec, 0.5, 1.0, 4, rng).atoms.size());
    }
    EXPECT_NEAR(total / reps, 1.0, 4.0 / std::sqrt(reps));
}

TEST(Traps, CountIsPoisson) {
    const auto spec = presets::sierpinski_gasket();
    const int reps = 20000;
    std::vector<double> counts;
    for (int r = 0; r < reps; ++r) {
        Engine rng = SeededStream{7, static_cast<std::uint64_t>(r), 0, "traps"}.engine();
        counts.push_back(static_cast<double>(sample_trap_measure(spec, 0.5, 0.01, 2, rng).atoms.size()));
    }
    EXPECT_NEAR(mean(counts), 10.0, 4 * std::sqrt(10.0 / reps));
    EXPECT_NEAR(variance(counts), 10.0, 0.5);
}

TEST(Traps, SizesAreParetoAboveTheCutoff) {
    const auto spec = presets::sierpinski_gasket();
    std::vector<double> ratios;
    for (std::uint64_t r = 0; ratios.size() < 10000; ++r) {
        Engine rng = SeededStream{8, r, 0, "traps"}.engine();
        for (const auto& a : sample_trap_measure(spec, 0.5, 0.01, 3, rng).atoms) {
            EXPECT_GE(a.mass, 0.01);
            EXPECT_EQ(a.word.level(), 3u);
            ratios.push_back(a.mass / 0.01);
        }
    }
    const double d = ks_distance(ratios, [](double x) { return x < 1 ? 0.0 : 1.0 - 1.0 / std::sqrt(x); });
    EXPECT_LT(d, 1.36 / std::sqrt(static_cast<double>(ratios.size())));
}

TEST(Traps, MassInLowestOctave) {
    // E[mass of atoms with v in [e, 2e]] = int_e^{2e} alpha v^{-alpha} dv
    const auto spec = presets::sierpinski_gasket();
    const double alpha = 0.5, eps = 0.01;
    const double expected = alpha / (1 - alpha) * (std::pow(2 * eps, 1 - alpha) - std::pow(eps, 1 - alpha));
    const int reps = 20000;
    std::vector<double> mass(reps, 0.0);
    for (int r = 0; r < reps; ++r) {
        Engine rng = SeededStream{9, static_cast<std::uint64_t>(r), 0, "traps"}.engine();
        for (const auto& a : sample_trap_measure(spec, alpha, eps, 2, rng).atoms)
            if (a.mass <= 2 * eps) mass[static_cast<std::size_t>(r)] += a.mass;
    }
    EXPECT_NEAR(mean(mass), expected, 4 * std::sqrt(variance(mass) / reps));
}

TEST(Traps, Errors) {
    Engine rng(1);
    EXPECT_THROW(sample_trap_measure(presets::sierpinski_gasket(), 0.5, 0.0, 2, rng), ArgumentError);
    EXPECT_THROW(sample_trap_measure(presets::sierpinski_gasket(), 0.5, 0.1, 0, rng), ArgumentError);
}

TEST(Hill, RecoversAlpha) {
    for (double alpha : {0.5, 0.8}) {
        Engine rng = SeededStream{10, 0, 0, "hill"}.engine();
        std::vector<double> x(100000);
        for (auto& v : x) v = pareto(rng, alpha, 1.0);
        const auto t = tail_estimate(x, 1000);
        EXPECT_FALSE(t.degenerate);
        EXPECT_NEAR(t.alpha, alpha, 3 * alpha / std::sqrt(1000.0));
        EXPECT_NEAR(t.standard_error, t.alpha / std::sqrt(1000.0), 1e-15);
    }
}

TEST(Hill, DegenerateAndErrors) {
    const std::vector<double> flat(100, 2.0);
    EXPECT_TRUE(tail_estimate(flat, 10).degenerate);
    EXPECT_THROW(tail_estimate(flat, 1), ArgumentError);
    EXPECT_THROW(tail_estimate(flat, 100), ArgumentError);
}
