#include <deque>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcm/experiments.hpp"

namespace {

struct FlagSet {
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void add(CLI::App& app, const std::string& key, const std::string& names, const std::string& help) {
        options.emplace_back(key, app.add_option(names, values[key], help));
    }

    void collect(std::vector<std::pair<std::string, std::string>>& out) const {
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) out.emplace_back(key, values.at(key));
    }
};

int report_error(const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rcm::kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random conductance models on nested fractal graphs"};
    app.require_subcommand(1);
    app.fallthrough();

    FlagSet global;
    std::string config_path;
    app.add_option("--config", config_path, "Config file of 'key = value' lines");
    global.add(app, "seed", "--seed", "Master seed");
    global.add(app, "threads", "--threads", "Worker threads (output does not depend on it)");
    global.add(app, "out", "--out", "Output directory");
    global.add(app, "fractal", "--fractal", "Preset name or fractal spec file");

    struct Sub {
        rcm::Experiment experiment;
        const char* help;
        std::vector<std::pair<std::string, std::string>> flags;  // key, names
    };
    const std::vector<std::pair<std::string, std::string>> law_flags = {
        {"law", "--law"}, {"alpha", "--alpha"}, {"lower_bound", "--lower-bound"}};
    std::vector<Sub> subs = {
        {rcm::Experiment::build, "Build G_n and write vertices, edges and resistances", {{"level", "--level"}}},
        {rcm::Experiment::renorm, "Find the invariant boundary conductances and rho",
         {{"tol", "--tol"}, {"max_iter", "--max-iter"}, {"starts", "--starts"}}},
        {rcm::Experiment::homogenize, "Random resistances against the deterministic limit",
         {{"levels", "--levels"}, {"trials", "--trials"}}},
        {rcm::Experiment::walk, "Crossing-time scaling of the VSRW or CSRW",
         {{"level", "--level"}, {"levels", "--levels"}, {"mode", "--mode"}, {"trials", "--trials"},
          {"statistic", "--stat,--statistic"}, {"oracle", "--oracle"}}},
        {rcm::Experiment::fin, "Stabilization of rescaled crossing-time laws",
         {{"levels", "--levels"}, {"trials", "--trials"}, {"cutoff", "--cutoff"}, {"depth", "--depth"}}},
    };

    // deque: options keep pointers into each FlagSet
    std::deque<std::pair<CLI::App*, FlagSet>> parsed;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(rcm::to_string(s.experiment), s.help);
        FlagSet& fs = parsed.emplace_back(sub, FlagSet{}).second;
        for (const auto& [key, names] : s.flags) fs.add(*sub, key, names, key);
        if (s.experiment == rcm::Experiment::homogenize || s.experiment == rcm::Experiment::walk ||
            s.experiment == rcm::Experiment::fin)
            for (const auto& [key, names] : law_flags) fs.add(*sub, key, names, key);
    }
    CLI::App* run = app.add_subcommand("run", "Run the experiment named in --config or --experiment");
    FlagSet& run_flags = parsed.emplace_back(run, FlagSet{}).second;
    for (const auto& key : rcm::experiment_keys())
        if (key != "seed" && key != "threads" && key != "out" && key != "fractal")
            run_flags.add(*run, key, "--" + key, key);

    CLI::App* rep = app.add_subcommand("replay", "Re-run a manifest and verify artifact checksums");
    std::string manifest;
    std::string replay_out;
    unsigned replay_threads = 0;
    rep->add_option("manifest", manifest, "manifest.json of an earlier run")->required();
    rep->add_option("--into", replay_out, "Output directory for the re-run")->required();
    rep->add_option("--threads", replay_threads, "Worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : rcm::kExitError;
    }

    try {
        if (rep->parsed()) {
            const auto r = rcm::replay(manifest, replay_out,
                                       replay_threads ? std::optional<unsigned>(replay_threads) : std::nullopt, std::cout);
            for (const auto& m : r.mismatched) std::cout << "checksum mismatch: " << m << '\n';
            if (r.mismatched.empty()) std::cout << "replay = identical\n";
            return r.code;
        }
        std::vector<std::pair<std::string, std::string>> flags;
        for (const auto& [sub, fs] : parsed) {
            if (!sub->parsed()) continue;
            if (sub != run) flags.emplace_back("experiment", sub->get_name());
            global.collect(flags);
            fs.collect(flags);
        }
        const auto rc = rcm::load_config(config_path, flags);
        for (const auto& o : rc.overrides)
            std::cerr << "note: --" << o.key << " = " << o.flag_value << " overrides config value " << o.file_value << '\n';
        return rcm::dispatch(rc, std::cout);
    } catch (const std::exception& e) {
        return report_error(e);
    }
}
