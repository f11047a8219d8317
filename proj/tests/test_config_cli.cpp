#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rcm/experiments.hpp"

using namespace rcm;
namespace fs = std::filesystem;

namespace {

using Flags = std::vector<std::pair<std::string, std::string>>;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rcm_test_" + name);
    fs::remove_all(p);
    return p;
}

int run(Flags flags, std::string* log_out = nullptr) {
    std::ostringstream log;
    const int code = dispatch(resolve_config({}, "<test>", flags), log);
    if (log_out) *log_out = log.str();
    return code;
}

}  // namespace

TEST(Config, DefaultsFromFlags) {
    const auto rc = resolve_config({}, "<flags>", {{"fractal", "sierpinski-gasket"}, {"experiment", "renorm"}});
    EXPECT_EQ(rc.config.experiment, Experiment::renorm);
    EXPECT_EQ(rc.config.seed, 1u);
    EXPECT_EQ(rc.config.spec().size(), 3u);
    const auto walk = resolve_config({}, "<flags>", {{"experiment", "walk"}});
    EXPECT_EQ(walk.config.levels, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
    EXPECT_EQ(walk.config.trials, 500u);
}

TEST(Config, AlphaOutOfRange) {
    const auto entries = parse_config_text("experiment = walk\nalpha = 1.5\n", "cfg");
    EXPECT_THROW(resolve_config(entries, "cfg", {}), ArgumentError);
}

TEST(Config, UnknownKeyReportsTheLine) {
    try {
        parse_config_text("seed = 3\n\n# comment\nsede = 4\n", "run.cfg");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("run.cfg"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find('4'), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_config_text("seed 3\n", "x"), ParseError);
    EXPECT_THROW(parse_config_text("trials = -2\n", "x"), ParseError);
    EXPECT_THROW(resolve_config({}, "x", {{"bogus", "1"}}), ArgumentError);
}

TEST(Config, FlagBeatsFileAndIsRecorded) {
    const auto entries = parse_config_text("experiment = renorm\nseed = 5\n", "cfg");
    const auto rc = resolve_config(entries, "cfg", {{"seed", "9"}});
    EXPECT_EQ(rc.config.seed, 9u);
    ASSERT_EQ(rc.overrides.size(), 1u);
    EXPECT_EQ(rc.overrides[0].file_value, "5");
    EXPECT_EQ(rc.overrides[0].flag_value, "9");
}

TEST(Config, Levels) {
    EXPECT_EQ(parse_levels("2-4"), (std::vector<std::size_t>{2, 3, 4}));
    EXPECT_EQ(parse_levels("1,3,5"), (std::vector<std::size_t>{1, 3, 5}));
    EXPECT_EQ(parse_levels(levels_to_string(parse_levels("2-4"))), parse_levels("2-4"));
    EXPECT_ANY_THROW(parse_levels("3,2"));
    EXPECT_ANY_THROW(parse_levels("x"));
}

TEST(Config, RangeChecks) {
    EXPECT_THROW(resolve_config({}, "x", {{"experiment", "walk"}, {"trials", "0"}}), ArgumentError);
    EXPECT_THROW(resolve_config({}, "x", {{"experiment", "fin"}, {"trials", "50"}}), ArgumentError);
    EXPECT_THROW(resolve_config({}, "x", {{"experiment", "walk"}, {"levels", "1,2"}}), ArgumentError);
    EXPECT_THROW(resolve_config({}, "x", {{"experiment", "walk"}, {"mode", "lazy"}}), ArgumentError);
}

TEST(Fractal, TextRoundTrip) {
    for (const auto& spec : {presets::sierpinski_gasket(), presets::vicsek_2d()}) {
        const auto back = parse_fractal_text(fractal_to_text(spec));
        ASSERT_EQ(back.size(), spec.size());
        EXPECT_EQ(back.beta, spec.beta);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            EXPECT_EQ(back.maps[i].rotation, spec.maps[i].rotation);
            EXPECT_EQ(back.maps[i].shift, spec.maps[i].shift);
        }
    }
    EXPECT_THROW(parse_fractal_text("dim = 2\nbeta = 2\nU = 1 0 0 1; gamma = 0\n"), ParseError);
    EXPECT_ANY_THROW(load_fractal("no-such-fractal"));
}

TEST(Svg, DeterministicAndStrict) {
    const std::vector<PlotSeries> s = {{"a", {{1, 2}, {2, 4}, {3, 8}}}, {"ref", {{1, 2}, {3, 8}}, false, true, true}};
    PlotOptions opt;
    opt.log_y = true;
    const auto one = render_svg(s, opt);
    EXPECT_EQ(one, render_svg(s, opt));
    EXPECT_NE(one.find("<svg"), std::string::npos);
    EXPECT_NE(one.find("stroke-dasharray"), std::string::npos);
    const auto single = render_svg({{"p", {{1, 1}}}});
    EXPECT_NE(single.find("<circle"), std::string::npos);
    EXPECT_THROW(render_svg({{"bad", {{1, std::nan("")}}}}), ArgumentError);
    EXPECT_THROW(render_svg({{"neg", {{1, -1.0}}}}, opt), ArgumentError);
    EXPECT_THROW(render_svg({}), ArgumentError);
}

TEST(Cli, RenormPrintsTheScaleFactor) {
    const auto dir = scratch("renorm");
    std::string log;
    EXPECT_EQ(run({{"experiment", "renorm"}, {"out", dir.string()}}, &log), kExitOk);
    EXPECT_NE(log.find("rho"), std::string::npos);
    EXPECT_NE(log.find("rho = 1.666666666666667\n"), std::string::npos) << log;
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    EXPECT_TRUE(fs::exists(dir / "renorm.csv"));
}

TEST(Cli, BuildWritesTheGraph) {
    const auto dir = scratch("build");
    EXPECT_EQ(run({{"experiment", "build"}, {"level", "2"}, {"out", dir.string()}}), kExitOk);
    const auto vertices = read_file(dir / "vertices.csv");
    EXPECT_EQ(std::count(vertices.begin(), vertices.end(), '\n'), 16);  // header + 15
    const auto edges = read_file(dir / "edges.csv");
    EXPECT_EQ(std::count(edges.begin(), edges.end(), '\n'), 28);
}

TEST(Cli, DegenerateHomogenizationHasZeroRows) {
    const auto dir = scratch("homog");
    EXPECT_EQ(run({{"experiment", "homogenize"}, {"law", "invariant"}, {"levels", "1-3"}, {"trials", "5"}, {"out", dir.string()}}),
              kExitOk);
    std::istringstream csv(read_file(dir / "homog_report.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line.rfind("level,trial,D_n", 0), 0u);
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        const auto a = line.find(',', line.find(',') + 1);
        EXPECT_LT(std::stod(line.substr(a + 1)), 1e-10) << line;
        ++rows;
    }
    EXPECT_EQ(rows, 15u);
}

TEST(Cli, WalkOutputsAreByteIdenticalAcrossThreadCounts) {
    const auto a = scratch("walk_a");
    const auto b = scratch("walk_b");
    const Flags base = {{"experiment", "walk"}, {"levels", "1-3"}, {"trials", "40"}, {"seed", "4"}};
    Flags fa = base, fb = base;
    fa.emplace_back("out", a.string());
    fa.emplace_back("threads", "1");
    fb.emplace_back("out", b.string());
    fb.emplace_back("threads", "3");
    const int ca = run(fa);
    const int cb = run(fb);
    EXPECT_EQ(ca, cb);
    for (const char* f : {"crossing_times.csv", "scaling_report.csv", "scaling.svg"})
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
}

TEST(Cli, ManifestReplayReproducesChecksums) {
    const auto dir = scratch("replay_src");
    const auto again = scratch("replay_dst");
    const int code = run({{"experiment", "fin"}, {"levels", "1-3"}, {"trials", "100"}, {"seed", "2"}, {"out", dir.string()}});
    EXPECT_NE(code, kExitError);
    const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m.at("exit_code").get<int>(), code);
    EXPECT_EQ(m.at("artifacts").size(), 3u);
    std::ostringstream log;
    const auto r = replay((dir / "manifest.json").string(), again.string(), 2u, log);
    EXPECT_TRUE(r.mismatched.empty());
    EXPECT_EQ(r.code, code);
}

TEST(Cli, ReplayDetectsTampering) {
    const auto dir = scratch("tamper_src");
    const auto again = scratch("tamper_dst");
    ASSERT_EQ(run({{"experiment", "renorm"}, {"out", dir.string()}}), kExitOk);
    auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    m["artifacts"]["renorm.csv"] = "0000000000000000";
    std::ofstream(dir / "manifest.json") << m.dump(2);
    std::ostringstream log;
    const auto r = replay((dir / "manifest.json").string(), again.string(), std::nullopt, log);
    EXPECT_EQ(r.mismatched, (std::vector<std::string>{"renorm.csv"}));
    EXPECT_EQ(r.code, kExitPropertyFailed);
}
