#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdlab/flow.hpp"
#include "fdlab/harness.hpp"
#include "fdlab/problem.hpp"

namespace fdlab {

enum class Method { kFineTune, kLinearProbe, kLpThenFineTune };

const char* method_name(Method m);            // "FT" / "LP" / "LPFT"
Method method_from_name(const std::string&);  // throws ConfigError

struct SweepConfig {
    std::string parameter = "eps";  // eps, n, m, k, d, w_norm, head_sigma_sq
    std::vector<double> values{0.2, 0.1, 0.05, 0.02, 0.01};
    int seeds = 5;
};

struct ExperimentConfig {
    std::string output_dir = "out";
    std::uint64_t master_seed = 0;
    std::vector<Method> methods{Method::kFineTune, Method::kLinearProbe,
                                Method::kLpThenFineTune};
    int instance_count = 1;
    InstanceConfig instance;    // seed field mirrors master_seed after loading
    IntegratorConfig integrator;
    VerificationConfig verify;  // seed field mirrors master_seed after loading
    // Suites to execute during `run`; empty means trajectories only. The
    // `verify` subcommand takes its suite list from the command line instead.
    std::vector<std::string> suites;
    SweepConfig sweep;
};

// Parse and validate a config file. Unknown keys, malformed values, and
// violated constraints all throw ConfigError naming the offender. An empty
// path yields the defaults.
ExperimentConfig load_config(const std::string& path);

// Same, from an in-memory TOML string.
ExperimentConfig load_config_text(const std::string& text);

// If FDLAB_SEED is set in the environment, override the master seed (and the
// seeds mirrored into the instance/verify sections). A malformed value
// throws ConfigError.
void apply_env_seed(ExperimentConfig& cfg);

// Set the master seed explicitly (CLI flag; takes precedence over both the
// file and the environment).
void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed);

// Canonical TOML rendering of a configuration. Parsing it back yields the
// same configuration; the run manifest hashes this text.
std::string render_toml(const ExperimentConfig& cfg);

// The default configuration, rendered as a parseable TOML document.
// Invariant: load_config_text(default_toml()) reproduces the defaults.
std::string default_toml();

}  // namespace fdlab
