#include "netpanel/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>

namespace netpanel {

using nlohmann::json;

std::string to_string(ModelFamily f) { return f == ModelFamily::Tergm ? "tergm" : "saom"; }

ModelFamily parse_family(const std::string& name) {
    if (name == "tergm") return ModelFamily::Tergm;
    if (name == "saom") return ModelFamily::Saom;
    throw ValidationError("unknown model '" + name + "' (expected tergm or saom)");
}

McmcConfig prediction_mcmc(const PipelineOptions& o, std::uint64_t stream) {
    McmcConfig c;
    c.burn_in = o.predict_burn_in;
    c.thinning = o.predict_thinning;
    c.sample_size = std::max<std::size_t>(o.nsim, 1);
    c.seed = derive_seed(o.seed, {2, stream});
    return c;
}

FitResult fit_model(const ModelSpec& spec, const Panel& panel, ModelFamily family, const PipelineOptions& o) {
    FitResult r;
    r.family = family;
    if (family == ModelFamily::Tergm) {
        r.tergm.terms = spec.terms;
        if (spec.has_all_coefficients()) {
            const auto p = static_cast<Eigen::Index>(spec.terms.size());
            const double nan = std::numeric_limits<double>::quiet_NaN();
            for (const auto& c : spec.coefficients) r.tergm.theta.push_back(*c);
            for (const auto& t : spec.terms) r.estimate.labels.push_back(t.label());
            r.estimate.theta_hat = Eigen::Map<const Eigen::VectorXd>(r.tergm.theta.data(), p);
            r.estimate.standard_errors = Eigen::VectorXd::Constant(p, nan);
            r.estimate.covariance = Eigen::MatrixXd::Constant(p, p, nan);
            r.estimate.convergence_tratios = Eigen::VectorXd::Zero(p);
            r.estimate.converged = true;
            r.estimate.diagnostics.push_back("coefficients taken from the spec; nothing estimated");
            return r;
        }
        McmcConfig cfg = o.estimation_mcmc;
        cfg.seed = derive_seed(o.seed, {1});
        r.estimate = estimate(spec.terms, panel, spec.derived, cfg, o.estimation);
        r.tergm.theta.assign(r.estimate.theta_hat.data(), r.estimate.theta_hat.data() + r.estimate.theta_hat.size());
    } else {
        SaomConfig cfg = o.saom;
        cfg.seed = derive_seed(o.seed, {3});
        auto fit = estimate_mom(spec.actor_effects(), panel, cfg);
        r.estimate = std::move(fit.estimate);
        r.saom = std::move(fit.model);
    }
    return r;
}

GofRun run_gof(const Panel& panel, const ModelSpec& spec, ModelFamily family, const PipelineOptions& o) {
    const WaveIndex test = panel.wave_count() - 1;
    // SAOM effects read covariates from the wave before each period, so only
    // the TERGM terms can reach into the held-out wave.
    const auto split = family == ModelFamily::Tergm
                           ? holdout_split(panel, test, spec.terms, spec.derived, o.allow_leakage)
                           : holdout_split(panel, test, {}, {}, false);
    GofRun run;
    run.leaked_terms = split.leaked_terms;
    run.fit = fit_model(spec, split.training, family, o);
    std::vector<Network> sims;
    if (family == ModelFamily::Tergm) {
        sims = predict_wave(run.fit.tergm, spec.derived, split, o.nsim, prediction_mcmc(o, 0));
    } else {
        sims = predict_wave(run.fit.saom, split, o.nsim, derive_seed(o.seed, {2, 0}));
    }
    run.report = score(sims, split.test);
    run.report.warnings = split.warnings;
    return run;
}

std::vector<ProbeResult> probe_leaks(const Panel& panel, const ModelSpec& spec, const PipelineOptions& o) {
    const WaveIndex test = panel.wave_count() - 1;
    std::set<std::string> attrs;
    for (const auto& f : classify(spec.terms, spec.derived, test)) {
        if (!is_leaking(f)) continue;
        if (std::any_of(spec.derived.begin(), spec.derived.end(),
                        [&](const DerivedDeclaration& d) { return d.name == f.term.attr; })) {
            attrs.insert(f.term.attr);
        }
    }
    std::vector<ProbeResult> out;
    if (attrs.empty()) return out;
    const auto split = holdout_split(panel, test, spec.terms, spec.derived, true);
    const FitResult fit = fit_model(spec, split.training, ModelFamily::Tergm, o);
    std::uint64_t stream = 10;
    for (const auto& a : attrs) {
        ProbeInput in{fit.tergm, spec.derived, split, a, std::nullopt, 10.0, std::max<std::size_t>(o.nsim, 4),
                      prediction_mcmc(o, stream++)};
        out.push_back(perturbation_probe(in));
    }
    if (attrs.size() > 1) {
        // all of them at once
        const std::vector<std::string> rest(std::next(attrs.begin()), attrs.end());
        out.push_back(perturbation_probe({fit.tergm, spec.derived, split, *attrs.begin(), std::nullopt, 10.0,
                                          std::max<std::size_t>(o.nsim, 4), prediction_mcmc(o, stream), rest}));
    }
    return out;
}

// Reports ----------------------------------------------------------------------------

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vec(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

json envelope_json(const Envelope& e) {
    return {{"observed", vec(e.observed)}, {"min", vec(e.min)}, {"q05", vec(e.q05)},
            {"median", vec(e.median)},     {"q95", vec(e.q95)}, {"max", vec(e.max)}};
}

json curve_json(const std::vector<CurvePoint>& c, const char* x, const char* y) {
    json a = json::array();
    for (const auto& p : c) a.push_back({{"threshold", number(p.threshold)}, {x, number(p.x)}, {y, number(p.y)}});
    return a;
}

}  // namespace

json estimate_json(const FitResult& fit) {
    const auto& e = fit.estimate;
    json terms = json::array();
    for (std::size_t k = 0; k < e.labels.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        terms.push_back({{"term", e.labels[k]},
                         {"est", number(e.theta_hat[i])},
                         {"se", number(e.standard_errors[i])},
                         {"t_ratio", number(e.convergence_tratios[i])}});
    }
    return {{"model", to_string(fit.family)},
            {"terms", terms},
            {"converged", e.converged},
            {"degenerate", e.degenerate},
            {"separation", e.separation},
            {"iterations", e.iterations},
            {"max_abs_t_ratio", number(e.max_abs_tratio())},
            {"diagnostics", e.diagnostics}};
}

json gof_json(const GofReport& r) {
    return {{"nsim", r.nsim},
            {"esp", envelope_json(r.esp)},
            {"dsp", envelope_json(r.dsp)},
            {"indegree", envelope_json(r.indegree)},
            {"geodesic", envelope_json(r.geodesic)},
            {"roc", curve_json(r.ties.roc, "fpr", "tpr")},
            {"pr", curve_json(r.ties.pr, "recall", "precision")},
            {"auc_roc", number(r.ties.auc_roc)},
            {"auc_pr", number(r.ties.auc_pr)},
            {"warnings", r.warnings}};
}

json findings_json(const std::vector<AuditFinding>& findings) {
    json a = json::array();
    for (const auto& f : findings) {
        json j = {{"term", f.term.label()},
                  {"binding", to_string(f.term.binding)},
                  {"severity", to_string(f.severity)},
                  {"explanation", f.explanation},
                  {"dependent_wave", f.dependent_wave + 1}};
        j["source_wave"] = f.source_wave ? json(*f.source_wave + 1) : json(nullptr);
        a.push_back(j);
    }
    return a;
}

json probe_json(const ProbeResult& p) {
    auto arm = [](const ArmSummary& s) {
        return json{{"mean_density", number(s.mean_density)},
                    {"sd_density", number(s.sd_density)},
                    {"mean_indegree", vec(s.mean_indegree)},
                    {"mean_outdegree", vec(s.mean_outdegree)}};
    };
    return {{"covariate", p.covariate},
            {"constant", p.constant},
            {"baseline", arm(p.baseline)},
            {"perturbed", arm(p.perturbed)},
            {"divergence", number(p.divergence)},
            {"noise", number(p.noise)},
            {"verdict", p.uses_covariate ? "uses_covariate" : "independent"}};
}

std::vector<std::pair<std::string, std::string>> gof_csv(const GofReport& r, const std::string& header_comment) {
    std::vector<std::pair<std::string, std::string>> files;
    auto curve = [&](const char* name, const char* cols, const std::vector<CurvePoint>& c) {
        std::ostringstream os;
        os << header_comment << "\n" << cols << "\n";
        for (const auto& p : c) os << format_double(p.threshold) << "," << format_double(p.x) << "," << format_double(p.y) << "\n";
        files.emplace_back(name, os.str());
    };
    curve("roc.csv", "threshold,fpr,tpr", r.ties.roc);
    curve("pr.csv", "threshold,recall,precision", r.ties.pr);
    auto hist = [&](const char* name, const Envelope& e, std::size_t first_bucket, bool last_is_unreachable) {
        std::ostringstream os;
        os << header_comment << "\nbucket,observed,q05,median,q95\n";
        for (std::size_t b = 0; b < e.observed.size(); ++b) {
            if (last_is_unreachable && b + 1 == e.observed.size()) os << "inf";
            else os << b + first_bucket;
            os << "," << format_double(e.observed[b]) << "," << format_double(e.q05[b]) << "," << format_double(e.median[b])
               << "," << format_double(e.q95[b]) << "\n";
        }
        files.emplace_back(name, os.str());
    };
    hist("esp.csv", r.esp, 0, false);
    hist("dsp.csv", r.dsp, 0, false);
    hist("indegree.csv", r.indegree, 0, false);
    hist("geodesic.csv", r.geodesic, 1, true);
    return files;
}

}  // namespace netpanel
