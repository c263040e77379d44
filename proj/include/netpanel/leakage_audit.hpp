#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpanel/evaluation.hpp"
#include "netpanel/tergm.hpp"

namespace netpanel {

enum class Severity { Tautological, Circular, LaggedSafe, Endogenous };

std::string to_string(Severity s);

struct AuditFinding {
    TermSpec term;
    Severity severity = Severity::Endogenous;
    std::string explanation;
    /// Wave the term reads, when it reads one.
    std::optional<WaveIndex> source_wave;
    WaveIndex dependent_wave = 0;
};

/// One finding per term, in order. A covariate term whose attribute is not
/// a declared derived attribute and is read from the dependent wave (or
/// later) has unknown provenance and is reported as Circular.
std::vector<AuditFinding> classify(std::span<const TermSpec> spec, std::span<const DerivedDeclaration> derived,
                                   WaveIndex dependent_wave);

/// True when a finding is Tautological or Circular.
bool is_leaking(const AuditFinding& f) noexcept;

struct ArmSummary {
    double mean_density = 0.0;
    double sd_density = 0.0;
    std::vector<double> mean_indegree;
    std::vector<double> mean_outdegree;
};

struct ProbeResult {
    std::string covariate;
    double constant = 0.0;
    ArmSummary baseline;
    ArmSummary perturbed;
    double divergence = 0.0;
    /// Divergence expected between two independent baseline arms.
    double noise = 0.0;
    bool uses_covariate = false;
};

/// |difference of mean density| + largest per-node shift of mean in- or outdegree.
double divergence(const ArmSummary& a, const ArmSummary& b);

ArmSummary summarize(std::span<const Network> sims);

struct ProbeInput {
    const TergmModel& model;
    std::span<const DerivedDeclaration> derived;
    const HoldoutSplit& split;
    /// Covariate replaced by the constant in the perturbed arm.
    std::string covariate;
    /// Wave whose values are replaced; defaults to the test wave.
    std::optional<WaveIndex> wave;
    double constant = 10.0;
    std::size_t nsim = 500;
    McmcConfig mcmc;
    /// Further covariates set to the same constant in the perturbed arm.
    std::vector<std::string> together = {};
};

/// Simulates the test wave with the covariate as stored and with it
/// replaced by a constant. The baseline arm is two independent half-size
/// chains; their divergence, scaled to full-size arms, is the noise level.
/// Throws ValidationError when the covariate is neither in the panel nor a
/// declared derived attribute.
ProbeResult perturbation_probe(const ProbeInput& input);

}  // namespace netpanel
