#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "netpanel/estimate.hpp"
#include "netpanel/random.hpp"
#include "netpanel/statistics.hpp"

namespace netpanel {

struct TergmModel {
    std::vector<TermSpec> terms;
    std::vector<double> theta;

    void validate() const;
};

/// Proposal counts for the tie-toggle chain. Defaults follow the
/// MCMC.samplesize / MCMC.interval settings of the reference analysis.
struct McmcConfig {
    std::size_t burn_in = 48000;
    std::size_t thinning = 3000;
    std::size_t sample_size = 5000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// theta . s(ctx), the unnormalised log probability.
double log_weight(const TergmModel& model, const StatisticContext& ctx);

/// Metropolis-Hastings over uniformly proposed ordered-dyad toggles, started
/// from `init`; keeps sample_size states after burn_in, thinning apart.
std::vector<Network> sample(const TergmModel& model, const CovariateTable& covariates, const Network& previous,
                            const McmcConfig& cfg, const Network& init);

/// Statistics of the retained states of one chain (rows = samples).
struct ChainSample {
    Eigen::MatrixXd statistics;
    std::size_t boundary_hits = 0;  // retained states with no ties or all ties
    std::size_t accepted = 0;
    std::size_t proposals = 0;
};

ChainSample sample_statistics(const TermEvaluator& evaluator, std::span<const double> theta,
                              const Network& previous, const Network& init, const McmcConfig& cfg, Rng& rng);

/// Runs `proposals` Metropolis-Hastings steps in place on `state`.
void run_chain(const TermEvaluator& evaluator, std::span<const double> theta, const Network& previous,
               Network& state, std::size_t proposals, Rng& rng);

/// Exact law over every digraph on n <= 4 nodes.
struct ExactDistribution {
    std::vector<Network> graphs;
    std::vector<double> probabilities;

    /// Expected statistic vector under the distribution.
    std::vector<double> expectation(const TermEvaluator& evaluator, const Network& previous) const;
    /// Index of `net` in `graphs` (graphs are enumerated by their off-diagonal bit pattern).
    std::size_t index_of(const Network& net) const;
};

ExactDistribution exact_distribution(const TergmModel& model, const CovariateTable& covariates,
                                     const Network& previous);

struct EstimationOptions {
    int max_iterations = 30;
    double tratio_tolerance = 0.1;
    double max_step = 0.5;        // sup-norm cap on a Newton step
    double min_ess_fraction = 0.1;  // resample below this effective sample size
    int inner_steps = 8;
    double degeneracy_fraction = 0.1;
    /// Cap on the sample size, as a multiple of McmcConfig::sample_size,
    /// once the t-ratios are within three times the tolerance.
    std::size_t max_sample_growth = 4;
};

/// Logistic regression of x_ij(t) on change statistics, pooled over transitions.
struct MpleResult {
    Eigen::VectorXd theta;
    bool converged = false;
    bool separation = false;
    int iterations = 0;
};

/// One transition's inputs: dependent network, previous network and bound covariates.
struct Transition {
    WaveIndex dependent_wave = 0;
    CovariateTable covariates;
};

std::vector<Transition> bind_transitions(const Panel& panel, std::span<const TermSpec> terms,
                                         std::span<const DerivedDeclaration> derived);

MpleResult mple(std::span<const TermSpec> terms, const Panel& panel, std::span<const Transition> transitions);

/// MCMC maximum likelihood, pooling the transitions of the panel, each
/// conditioned on its observed previous wave.
ParameterEstimate estimate(std::span<const TermSpec> terms, const Panel& panel,
                           std::span<const DerivedDeclaration> derived, const McmcConfig& cfg,
                           const EstimationOptions& options = {});

}  // namespace netpanel
