#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fdlab/config.hpp"

namespace fdlab {

// Orchestration behind the CLI subcommands. Each call writes its outputs
// (CSV / JSON / markdown plus a manifest.json) under cfg.output_dir, logs a
// short progress line per unit of work to `out`, and returns the process
// exit code: 0 success, 1 verification failure. Configuration and numerical
// failures propagate as exceptions for the caller to map onto exit codes.
int run_experiment(const ExperimentConfig& cfg, int jobs, std::ostream& out);
int run_sweep(const ExperimentConfig& cfg, int jobs, std::ostream& out);
int run_verify(const ExperimentConfig& cfg, const std::vector<std::string>& suites, int jobs,
               std::ostream& out);

// FNV-1a (64-bit) over a byte string; manifests store it as 16 hex digits.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace fdlab
