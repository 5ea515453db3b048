#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdlab/config.hpp"
#include "fdlab/errors.hpp"
#include "fdlab/runner.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int jobs = 1;
    CLI::Option* seed_opt = nullptr;
};

void add_tuning_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--jobs", args.jobs, "worker threads (default 1)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
    args.seed_opt = cmd->add_option("--seed", args.seed,
                                    "master seed (overrides config and FDLAB_SEED)");
}

fdlab::ExperimentConfig resolve_config(const CommonArgs& args) {
    fdlab::ExperimentConfig cfg = fdlab::load_config(args.config_path);
    fdlab::apply_env_seed(cfg);
    if (args.seed_opt && args.seed_opt->count() > 0) fdlab::set_master_seed(cfg, args.seed);
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fdlab: gradient-flow laboratory for linear feature tuning"};
    app.require_subcommand(1);

    CommonArgs run_args, sweep_args, verify_args;
    std::vector<std::string> suites;

    CLI::App* run_cmd = app.add_subcommand("run", "build instances, integrate, write reports");
    run_cmd->add_option("config", run_args.config_path, "TOML configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    add_tuning_flags(run_cmd, run_args);

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "sweep one parameter over a value grid");
    sweep_cmd->add_option("config", sweep_args.config_path, "TOML configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    add_tuning_flags(sweep_cmd, sweep_args);

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run verification suites and write JSON reports");
    verify_cmd->add_option("--suite", suites, "suite id or 'all' (repeatable)")
        ->expected(-1);
    verify_cmd->add_option("--config", verify_args.config_path, "TOML configuration file")
        ->check(CLI::ExistingFile);
    add_tuning_flags(verify_cmd, verify_args);

    CLI::App* defaults_cmd =
        app.add_subcommand("print-defaults", "print the default configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a configuration error
    }

    try {
        if (defaults_cmd->parsed()) {
            std::cout << fdlab::default_toml();
            return 0;
        }
        if (run_cmd->parsed())
            return fdlab::run_experiment(resolve_config(run_args), run_args.jobs, std::cout);
        if (sweep_cmd->parsed())
            return fdlab::run_sweep(resolve_config(sweep_args), sweep_args.jobs, std::cout);
        if (verify_cmd->parsed()) {
            if (suites.empty()) suites = {"all"};
            return fdlab::run_verify(resolve_config(verify_args), suites, verify_args.jobs,
                                     std::cout);
        }
    } catch (const fdlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const fdlab::NumericalBlowup& e) {
        std::cerr << "numerical blowup: " << e.what() << "\n";
        return 3;
    } catch (const fdlab::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
