#pragma once

// Experiment configuration files and the subcommands of the mlqmc tool.
//
// Config format: flat `key = value` lines with three prefixes.
//   portfolio.file             portfolio description, relative to the config file
//   coupling.<name>.kind       crude | antithetic | smoothed | smoothed_antithetic
//   coupling.<name>.inner      mc | rqmc
//   coupling.<name>.factor     cholesky | gpca
//   coupling.<name>.k0, .r     sigmoid schedule (smoothed kinds)
//   coupling.<name>.m0         inner samples at level 0
//   run.*                      command parameters, see ExperimentConfig

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlqmc/coupling.h"
#include "mlqmc/market.h"

namespace mlqmc::cli {

struct CouplingSpec {
    std::string name;
    coupling::CouplingConfig config;  // threshold is filled in by the command
};

struct ExperimentConfig {
    std::string portfolio_path;
    market::Portfolio portfolio;
    std::vector<CouplingSpec> couplings;  // sorted by name

    std::vector<double> eps;
    int l_max = 7;
    std::uint64_t n_per_level = 100000;
    int batches = 20;
    int repeats = 3;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    unsigned threads = 1;
    std::uint64_t warmup = 10000;
    int max_level = 14;

    double target_prob = 0.3;
    double threshold_fraction = 0.2;
    std::optional<double> threshold;  // overrides calibration
    std::optional<double> reference;  // theta for RMSE; analytic when d = 1

    std::vector<std::uint64_t> eta_m;  // default 2^5 .. 2^12
    int eta_replicates = 64;
    int eta_scenarios = 16;
    coupling::InnerSampling eta_inner = coupling::InnerSampling::rqmc;
};

/// Strict parser: unknown keys, bad values and missing files throw
/// coupling::ConfigurationError.
ExperimentConfig parse_config(std::istream& in, const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);

/// Exit statuses of run_command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNonConvergence = 1;
inline constexpr int kExitConfig = 2;

/// Threshold used by the commands: run.threshold if set, else calibrated.
double resolve_threshold(const ExperimentConfig& cfg);

/// Dispatches calibrate | convergence | complexity | estimate | eta. Human
/// readable output goes to `out`, diagnostics to `err`; tables are written as
/// CSV under cfg.out_dir.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace mlqmc::cli
