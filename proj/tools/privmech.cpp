#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "privmech/privmech.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::uint64_t trials = 0;
    bool trials_set = false;
    unsigned threads = 0;
    bool threads_set = false;
    std::string out_dir;
    bool check = false;
};

int run(const std::string& mechanism, const CliOverrides& cli) {
    privmech::ExperimentConfig cfg = privmech::load_config_file(cli.config_path);
    if (cfg.mechanism != mechanism)
        throw privmech::ConfigError("mechanism", "config declares '" + cfg.mechanism +
                                                     "' but the '" + mechanism +
                                                     "' subcommand was invoked");
    if (cli.seed_set) cfg.seed = cli.seed;
    if (cli.trials_set) cfg.trials = cli.trials;
    if (cli.threads_set) cfg.threads = cli.threads;
    if (!cli.out_dir.empty()) cfg.out_dir = cli.out_dir;

    const privmech::Report rep = privmech::run_experiment(cfg);
    for (const auto& r : rep.records)
        std::printf("%-44s %.10g  (stderr %.3g, ci95 %.3g, trials %llu)\n", r.label.c_str(),
                    r.estimate, r.std_error, r.ci95, static_cast<unsigned long long>(r.trials));
    for (const auto& w : rep.warnings) std::printf("warning: %s\n", w.c_str());
    std::printf("wrote %s/results.csv\n", cfg.out_dir.c_str());

    if (!rep.check_failures.empty()) {
        for (const auto& f : rep.check_failures) std::fprintf(stderr, "check failed: %s\n", f.c_str());
        if (cli.check) return 3;
    } else if (cli.check) {
        std::printf("all checks passed\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"privacy-aware selling mechanisms: simulation and verification"};
    app.require_subcommand(1);

    CliOverrides cli;
    std::string mechanism;
    for (const char* name : {"optimal", "dutch", "prophet", "market", "audit"}) {
        CLI::App* sub = app.add_subcommand(name, std::string("run the '") + name + "' experiment");
        sub->add_option("--config", cli.config_path, "experiment config file (JSON)")->required();
        sub->add_option("--seed", cli.seed, "override the config seed")
            ->each([&](const std::string&) { cli.seed_set = true; });
        sub->add_option("--trials", cli.trials, "override the config trial count")
            ->each([&](const std::string&) { cli.trials_set = true; });
        sub->add_option("--threads", cli.threads, "worker threads (0 = hardware)")
            ->each([&](const std::string&) { cli.threads_set = true; });
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_flag("--check", cli.check, "exit 3 when an acceptance property fails");
        sub->callback([&, name] { mechanism = name; });
    }

    CLI11_PARSE(app, argc, argv);

    try {
        return run(mechanism, cli);
    } catch (const privmech::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
