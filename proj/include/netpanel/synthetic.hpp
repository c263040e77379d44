#pragma once

#include <cstdint>
#include <vector>

#include "netpanel/saom.hpp"
#include "netpanel/tergm.hpp"

namespace netpanel {

/// Bernoulli digraph with independent ties.
Network random_digraph(std::size_t n, double density, Rng& rng);

/// Panel whose first wave is Bernoulli(initial_density) and each later wave
/// is the state of a tie-toggle chain under `model`, conditioned on the wave
/// before, after `proposals_per_wave` steps started from that wave.
Panel simulate_tergm_panel(const TergmModel& model, const CovariateTable& covariates, std::size_t n,
                           std::size_t waves, double initial_density, std::size_t proposals_per_wave,
                           std::uint64_t seed);

/// Panel from an actor-oriented model: Bernoulli first wave, then one
/// simulated period per rate.
Panel simulate_saom_panel(const SaomModel& model, const CovariateTable& covariates, std::size_t n,
                          double initial_density, std::uint64_t seed);

/// Classroom-like panel with sex and same-class covariates. Tie formation
/// also depends on latent popularity and activity scores that are not
/// returned, so degrees are heterogeneous in ways the observed covariates
/// cannot explain.
struct ClassroomOptions {
    std::size_t n = 26;
    std::size_t waves = 4;
    std::size_t classes = 3;
    double edges = -3.2;
    double mutual = 1.6;
    double gwesp = 0.5;
    double same_sex = 0.8;
    double same_class = 0.6;
    double popularity = 0.9;
    double activity = 0.7;
    double stability = 1.6;
    double initial_density = 0.15;
    std::size_t proposals_per_wave = 40000;
    /// Waves simulated and dropped before the first returned wave.
    std::size_t warmup_waves = 4;
};

struct Classroom {
    Panel panel;
    /// Generating model, including the hidden "latent_pop" and "latent_act" terms.
    TergmModel truth;
    CovariateTable truth_covariates;
};

Classroom simulate_classroom(const ClassroomOptions& options, std::uint64_t seed);

}  // namespace netpanel
