#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace netpanel {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitValidation = 2,
    kExitLeakage = 3,
    kExitNonConvergence = 4,
};

struct RunConfig {
    std::string subcommand;
    /// Adjacency files in temporal order.
    std::vector<std::string> waves;
    /// Node covariate CSVs and name=path dyadic matrices.
    std::vector<std::string> covariates;
    std::string spec;
    std::optional<std::uint64_t> seed;
    std::size_t nsim = 1000;
    std::optional<std::size_t> burnin;
    std::optional<std::size_t> thin;
    /// Retained states per MCMC-MLE iteration.
    std::optional<std::size_t> samples;
    std::string out = ".";
    bool allow_leakage = false;
    std::string model = "tergm";
};

/// Canonical JSON of the config without the output directory.
std::string canonical_config(const RunConfig& config);

/// Runs one subcommand, writing artifacts into config.out. Messages go to `log`.
int run(const RunConfig& config, std::ostream& log);

}  // namespace netpanel
