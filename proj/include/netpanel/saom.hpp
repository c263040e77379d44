#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpanel/estimate.hpp"
#include "netpanel/random.hpp"
#include "netpanel/statistics.hpp"

namespace netpanel {

enum class SaomEffectKind {
    Outdegree,
    Reciprocity,
    TransitiveTies,
    GwespTransitive,
    GwespCyclic,
    IndegreePopularitySqrt,
    OutdegreePopularity,
    OutdegreeActivitySqrt,
    Ego,
    Alter,
    Same,
    Dyadic,
};

inline constexpr SaomEffectKind kAllSaomEffects[] = {
    SaomEffectKind::Outdegree,       SaomEffectKind::Reciprocity,
    SaomEffectKind::TransitiveTies,  SaomEffectKind::GwespTransitive,
    SaomEffectKind::GwespCyclic,     SaomEffectKind::IndegreePopularitySqrt,
    SaomEffectKind::OutdegreePopularity, SaomEffectKind::OutdegreeActivitySqrt,
    SaomEffectKind::Ego,             SaomEffectKind::Alter,
    SaomEffectKind::Same,            SaomEffectKind::Dyadic,
};

std::string to_string(SaomEffectKind kind);
SaomEffectKind parse_saom_effect(const std::string& name);
bool is_covariate_effect(SaomEffectKind kind) noexcept;

struct SaomEffect {
    SaomEffectKind kind = SaomEffectKind::Outdegree;
    std::string attr;
    std::optional<double> decay;

    double effective_decay() const noexcept { return decay.value_or(kDefaultDecay); }
    std::string label() const;

    friend bool operator==(const SaomEffect&, const SaomEffect&) = default;
};

/// Actor-oriented model with one rate per period and a linear objective
/// function f_i(x) = sum_k beta_k s_ik(x).
struct SaomModel {
    std::vector<double> rates;
    std::vector<SaomEffect> effects;
    std::vector<double> beta;

    void validate() const;
};

/// Mirrors the TERGM term of the same row in the comparison table:
/// edges -> outdegree, mutual -> reciprocity, gwesp_otp -> gwesp transitive,
/// gwesp_itp -> gwesp cyclic, gw_indegree -> indegree popularity (sqrt),
/// twopath -> outdegree popularity, gw_outdegree -> outdegree activity (sqrt),
/// node_ofactor/node_ocov -> ego, node_ifactor/node_icov -> alter,
/// node_match -> same, edge_cov -> dyadic. memory_stability has no effect
/// (the rate plays that role). Other terms throw ValidationError.
std::vector<SaomEffect> saom_effects_from_terms(std::span<const TermSpec> terms);

/// Covariates used by the effects, resolved as static (predetermined) values
/// for the period ending at `dependent_wave`.
CovariateTable bind_saom_covariates(const Panel& panel, std::span<const SaomEffect> effects, WaveIndex dependent_wave);

struct ObjectiveContext {
    NodeIndex actor = 0;
    const Network& current;
    const CovariateTable& covariates;
};

/// Objective of `candidate` from the actor's perspective. The candidate may
/// differ from ctx.current in at most one outgoing tie of the actor.
double objective(const SaomModel& model, const ObjectiveContext& ctx, const Network& candidate);

/// Effects with their covariates resolved; evaluates actor statistics and
/// the change from toggling one outgoing tie.
class SaomEvaluator {
public:
    SaomEvaluator(std::vector<SaomEffect> effects, const CovariateTable& covariates, std::size_t n);

    std::size_t size() const noexcept { return effects_.size(); }
    const std::vector<SaomEffect>& effects() const noexcept { return effects_; }

    double actor_statistic(std::size_t k, const Network& x, NodeIndex i) const;
    /// s_ik(x with x_ij = 1) - s_ik(x with x_ij = 0).
    double actor_change(std::size_t k, const Network& x, NodeIndex i, NodeIndex j) const;
    /// actor_change for every effect and every receiver j at once, sharing
    /// the two-path counts of the actor; out[j * size() + k], zero for j == i.
    void option_changes(const Network& x, NodeIndex i, std::vector<double>& out) const;
    /// sum_i s_ik(x) for every effect.
    std::vector<double> network_statistics(const Network& x) const;

private:
    struct Bound {
        const std::vector<double>* values = nullptr;  // ego / alter
        std::vector<double> indicator;                // ego / alter on a factor
        const std::vector<int>* codes = nullptr;      // same
        const DyadMatrix* dyad = nullptr;
        double ratio = 0.0;
        double scale = 1.0;
        std::vector<double> powers;  // ratio^k, k = 0..n
    };
    const std::vector<double>& node_values(std::size_t k) const;

    std::vector<SaomEffect> effects_;
    std::vector<Bound> bound_;
    // sqrt(d) and d^1.5 for d = 0..n
    std::vector<double> sqrt_;
    std::vector<double> pow15_;
};

/// Multinomial-logit choice over "no change" (index 0) and toggling the tie
/// to each other node; probabilities[j + 1] belongs to the toggle of (actor, j)
/// and is 0 for j == actor.
std::vector<double> choice_probabilities(const SaomEvaluator& evaluator, std::span<const double> beta,
                                         const Network& x, NodeIndex actor);

/// One period of the continuous-time mini-step process starting at `start`.
/// The number of mini-steps is Poisson(n * rate).
Network simulate_period(const SaomModel& model, const CovariateTable& covariates, const Network& start,
                        std::uint64_t seed, std::size_t period = 0);
Network simulate_period(const SaomEvaluator& evaluator, std::span<const double> beta, double rate,
                        const Network& start, Rng& rng);

int hamming_distance(const Network& a, const Network& b);

struct SaomConfig {
    std::uint64_t seed = 1;
    int phase1_iterations = 50;
    int phase2_subphases = 4;
    double initial_gain = 0.2;
    int phase3_iterations = 2000;
    /// Phase 3 simulations that also carry finite-difference runs for the
    /// derivative matrix; the rest only feed the statistic covariance.
    int phase3_derivative_iterations = 200;
    double diagonalize = 0.2;
    double rate_epsilon = 0.1;
    double effect_epsilon = 0.1;
    int max_restarts = 4;
    double tratio_tolerance = 0.1;
    /// Condition number above which the derivative matrix is reported as singular.
    double max_condition = 1e8;
};

struct SaomFit {
    SaomModel model;
    /// Parameters ordered as (rates..., beta...).
    ParameterEstimate estimate;
};

/// Method-of-moments estimation by Robbins-Monro stochastic approximation.
/// Targets are per-period Hamming distances for the rates and end-of-period
/// effect statistics summed over periods for beta.
SaomFit estimate_mom(std::span<const SaomEffect> effects, const Panel& panel, const SaomConfig& cfg = {});

}  // namespace netpanel
