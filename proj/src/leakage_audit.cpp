#include "netpanel/leakage_audit.hpp"

#include <algorithm>
#include <cmath>

#include "netpanel/parallel.hpp"

namespace netpanel {

std::string to_string(Severity s) {
    switch (s) {
        case Severity::Tautological: return "Tautological";
        case Severity::Circular: return "Circular";
        case Severity::LaggedSafe: return "LaggedSafe";
        case Severity::Endogenous: return "Endogenous";
    }
    return "unknown";
}

bool is_leaking(const AuditFinding& f) noexcept {
    return f.severity == Severity::Tautological || f.severity == Severity::Circular;
}

namespace {

bool is_incoming(TermKind k) { return k == TermKind::NodeIcov || k == TermKind::NodeIfactor; }
bool is_outgoing(TermKind k) { return k == TermKind::NodeOcov || k == TermKind::NodeOfactor; }

std::string wave_name(WaveIndex w) { return "wave " + std::to_string(w + 1); }

}  // namespace

std::vector<AuditFinding> classify(std::span<const TermSpec> spec, std::span<const DerivedDeclaration> derived,
                                   WaveIndex dependent_wave) {
    std::vector<AuditFinding> out;
    for (const auto& t : spec) {
        validate_term(t);
        AuditFinding f;
        f.term = t;
        f.dependent_wave = dependent_wave;
        if (is_structural(t.kind)) {
            f.severity = Severity::Endogenous;
            f.explanation = "structural statistic of the dependent network";
        } else if (t.kind == TermKind::MemoryStability) {
            f.severity = Severity::LaggedSafe;
            f.source_wave = dependent_wave - 1;
            f.explanation = "memory term on the previous wave";
        } else if (t.kind == TermKind::EdgeCov) {
            f.severity = Severity::LaggedSafe;
            f.explanation = "static dyadic covariate '" + t.attr + "'";
        } else {
            const WaveIndex source = covariate_source_wave(t, dependent_wave);
            f.source_wave = source;
            const auto decl = std::find_if(derived.begin(), derived.end(),
                                           [&](const DerivedDeclaration& d) { return d.name == t.attr; });
            const bool reads_future = source >= dependent_wave;
            if (!reads_future) {
                f.severity = Severity::LaggedSafe;
                f.explanation = "'" + t.attr + "' is read from " + wave_name(source) + ", before dependent " +
                                wave_name(dependent_wave);
            } else if (decl == derived.end()) {
                f.severity = Severity::Circular;
                f.explanation = "unknown provenance: '" + t.attr + "' is read from " + wave_name(source) +
                                " and may be computed from the dependent network";
            } else {
                const bool in_transform = decl->transform == AttributeTransform::SqrtIndegree;
                const bool same_margin = (in_transform && is_incoming(t.kind)) || (!in_transform && is_outgoing(t.kind));
                f.severity = same_margin ? Severity::Tautological : Severity::Circular;
                f.explanation = "'" + t.attr + "' is " + to_string(decl->transform) + " of " + wave_name(source) +
                                (source == dependent_wave ? ", the dependent wave" : ", after the dependent wave") +
                                (same_margin ? ", feeding the same degree margin" : ", feeding another margin");
            }
        }
        out.push_back(std::move(f));
    }
    return out;
}

ArmSummary summarize(std::span<const Network> sims) {
    ArmSummary s;
    if (sims.empty()) return s;
    const std::size_t n = sims.front().size();
    s.mean_indegree.assign(n, 0.0);
    s.mean_outdegree.assign(n, 0.0);
    double sum = 0, sq = 0;
    for (const auto& g : sims) {
        const double d = g.density();
        sum += d;
        sq += d * d;
        for (NodeIndex i = 0; i < n; ++i) {
            s.mean_indegree[i] += g.indegree(i);
            s.mean_outdegree[i] += g.outdegree(i);
        }
    }
    const auto m = static_cast<double>(sims.size());
    s.mean_density = sum / m;
    s.sd_density = sims.size() > 1 ? std::sqrt(std::max(0.0, (sq - m * s.mean_density * s.mean_density) / (m - 1))) : 0.0;
    for (NodeIndex i = 0; i < n; ++i) {
        s.mean_indegree[i] /= m;
        s.mean_outdegree[i] /= m;
    }
    return s;
}

double divergence(const ArmSummary& a, const ArmSummary& b) {
    double shift = 0.0;
    for (std::size_t i = 0; i < a.mean_indegree.size(); ++i) {
        shift = std::max(shift, std::abs(a.mean_indegree[i] - b.mean_indegree[i]));
        shift = std::max(shift, std::abs(a.mean_outdegree[i] - b.mean_outdegree[i]));
    }
    return std::abs(a.mean_density - b.mean_density) + shift;
}

ProbeResult perturbation_probe(const ProbeInput& in) {
    const Panel& source = in.split.covariate_source;
    std::vector<std::string> names{in.covariate};
    names.insert(names.end(), in.together.begin(), in.together.end());
    const std::size_t n = source.node_count();
    std::vector<CovariateOverride> overrides;
    for (const auto& name : names) {
        const bool known = source.node_covariates.count(name) != 0 ||
                           std::any_of(in.derived.begin(), in.derived.end(),
                                       [&](const DerivedDeclaration& d) { return d.name == name; });
        if (!known) throw ValidationError("covariate '" + name + "' not found");
        overrides.push_back({name, in.wave.value_or(in.split.test_wave), std::vector<double>(n, in.constant)});
    }
    if (in.nsim < 4) throw ValidationError("the probe needs nsim >= 4");
    const std::size_t half = in.nsim / 2;

    struct Arm {
        std::size_t nsim;
        std::uint64_t seed;
        bool perturbed;
    };
    const Arm arms[] = {{half, derive_seed(in.mcmc.seed, {1}), false},
                        {in.nsim - half, derive_seed(in.mcmc.seed, {2}), false},
                        {in.nsim, derive_seed(in.mcmc.seed, {3}), true}};
    auto sims = parallel_map(3, [&](std::size_t k) {
        McmcConfig cfg = in.mcmc;
        cfg.seed = arms[k].seed;
        return predict_wave(in.model, in.derived, in.split, arms[k].nsim, cfg,
                            arms[k].perturbed ? std::span<const CovariateOverride>(overrides)
                                              : std::span<const CovariateOverride>());
    });

    ProbeResult r;
    r.covariate = in.covariate;
    for (const auto& name : in.together) r.covariate += "+" + name;
    r.constant = in.constant;
    const ArmSummary a = summarize(sims[0]);
    const ArmSummary b = summarize(sims[1]);
    std::vector<Network> baseline = std::move(sims[0]);
    baseline.insert(baseline.end(), sims[1].begin(), sims[1].end());
    r.baseline = summarize(baseline);
    r.perturbed = summarize(sims[2]);
    r.divergence = divergence(r.baseline, r.perturbed);
    // Two half-size arms differ by sqrt(2) times more than two full-size ones.
    r.noise = divergence(a, b) / std::sqrt(2.0);
    r.uses_covariate = r.divergence > 3.0 * r.noise;
    return r;
}

}  // namespace netpanel
