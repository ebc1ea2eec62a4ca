#include <CLI11.hpp>
#include <iostream>

#include "mlqmc/cli.h"

int main(int argc, char** argv) {
    CLI::App app{"Nested MLMC estimation of large-loss probabilities"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<unsigned> threads;
    for (const char* name : {"calibrate", "convergence", "complexity", "estimate", "eta"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override run.seed");
        sub->add_option("--out", out_dir, "override run.out_dir");
        sub->add_option("--threads", threads, "override run.threads")->check(CLI::PositiveNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return mlqmc::cli::kExitConfig;
    }

    mlqmc::cli::ExperimentConfig cfg;
    try {
        cfg = mlqmc::cli::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return mlqmc::cli::kExitConfig;
    }
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (threads) cfg.threads = *threads;
    return mlqmc::cli::run_command(app.get_subcommands().front()->get_name(), cfg, std::cout, std::cerr);
}
