#include "netpanel/cli.hpp"

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "netpanel/pipeline.hpp"
#include "netpanel/synthetic.hpp"

namespace netpanel {

using nlohmann::json;

std::string canonical_config(const RunConfig& c) {
    json j = {{"subcommand", c.subcommand},
              {"waves", c.waves},
              {"covariates", c.covariates},
              {"spec", c.spec},
              {"nsim", c.nsim},
              {"allow_leakage", c.allow_leakage},
              {"model", c.model}};
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    j["burnin"] = c.burnin ? json(*c.burnin) : json(nullptr);
    j["thin"] = c.thin ? json(*c.thin) : json(nullptr);
    j["samples"] = c.samples ? json(*c.samples) : json(nullptr);
    return j.dump();
}

namespace {

struct Context {
    const RunConfig& config;
    std::ostream& log;
    std::string hash;
    std::uint64_t seed = 1;
    std::ostringstream file_log;

    void say(const std::string& line) {
        log << line << "\n";
        file_log << line << "\n";
    }
    std::string path(const std::string& name) const { return (std::filesystem::path(config.out) / name).string(); }
    json stamp(json j) const {
        j["config_hash"] = hash;
        j["seed"] = seed;
        return j;
    }
    std::string csv_header() const { return "# config_hash=" + hash + " seed=" + std::to_string(seed); }
    void write_json(const std::string& name, const json& j) const { write_text(path(name), stamp(j).dump(2) + "\n"); }
    void flush_log(const std::string& name) {
        write_text(path(name), "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n" + file_log.str());
    }
};

PipelineOptions options_from(const RunConfig& c, std::uint64_t seed) {
    PipelineOptions o;
    o.seed = seed;
    o.nsim = c.nsim;
    o.allow_leakage = c.allow_leakage;
    if (c.burnin) o.estimation_mcmc.burn_in = o.predict_burn_in = *c.burnin;
    if (c.thin) o.estimation_mcmc.thinning = o.predict_thinning = *c.thin;
    if (c.samples) o.estimation_mcmc.sample_size = *c.samples;
    o.estimation_mcmc.validate();
    return o;
}

Panel panel_from(const RunConfig& c) { return load_panel(c.waves, c.covariates); }

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

void log_estimate(Context& ctx, const FitResult& fit) {
    const auto& e = fit.estimate;
    for (std::size_t k = 0; k < e.labels.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        ctx.say("  " + e.labels[k] + "  est " + format_double(e.theta_hat[i]) + "  se " +
                format_double(e.standard_errors[i]) + "  t " + format_double(e.convergence_tratios[i]));
    }
    for (const auto& d : e.diagnostics) ctx.say("  note: " + d);
    ctx.say(std::string("  converged: ") + (e.converged ? "yes" : "no"));
}

int cmd_estimate(Context& ctx) {
    const auto& c = ctx.config;
    require(c.seed.has_value(), "estimate needs --seed");
    require(!c.spec.empty(), "estimate needs --spec");
    const Panel panel = panel_from(c);
    const ModelSpec spec = load_model_spec(c.spec);
    const auto family = parse_family(c.model);
    for (const auto& f : classify(spec.terms, spec.derived, panel.wave_count() - 1)) {
        if (is_leaking(f)) ctx.say("warning: " + f.term.label() + " is " + to_string(f.severity) + ": " + f.explanation);
    }
    const FitResult fit = fit_model(spec, panel, family, options_from(c, ctx.seed));
    ctx.say("estimate (" + to_string(family) + ", " + std::to_string(panel.wave_count()) + " waves, n = " +
            std::to_string(panel.node_count()) + ")");
    log_estimate(ctx, fit);
    ctx.write_json("estimates.json", estimate_json(fit));
    ctx.flush_log("estimate.log");
    return fit.estimate.converged ? kExitOk : kExitNonConvergence;
}

int cmd_simulate(Context& ctx) {
    const auto& c = ctx.config;
    require(c.seed.has_value(), "simulate needs --seed");
    require(!c.spec.empty(), "simulate needs --spec");
    const Panel panel = panel_from(c);
    const ModelSpec spec = load_model_spec(c.spec);
    const auto family = parse_family(c.model);
    const auto o = options_from(c, ctx.seed);
    const FitResult fit = fit_model(spec, panel, family, o);
    log_estimate(ctx, fit);

    // Next wave after the panel, conditional on its last wave.
    HoldoutSplit split;
    split.training = panel;
    split.covariate_source = panel;
    split.test_wave = panel.wave_count();
    std::vector<Network> sims;
    if (family == ModelFamily::Tergm) {
        sims = predict_wave(fit.tergm, spec.derived, split, c.nsim, prediction_mcmc(o, 0));
    } else {
        sims = predict_wave(fit.saom, split, c.nsim, derive_seed(ctx.seed, {2, 0}));
    }
    const std::size_t n = panel.node_count();
    json draws = json::array();
    std::vector<double> freq(n * n, 0.0);
    for (const auto& g : sims) {
        int mutual = 0;
        for (NodeIndex i = 0; i < n; ++i)
            for (NodeIndex j = 0; j < n; ++j) {
                if (!g.tie(i, j)) continue;
                freq[i * n + j] += 1.0;
                if (i < j && g.tie(j, i)) ++mutual;
            }
        draws.push_back({{"edges", g.edge_count()}, {"mutual", mutual}, {"density", g.density()}});
    }
    std::ostringstream csv;
    csv << ctx.csv_header() << "\nsender,receiver,probability\n";
    for (NodeIndex i = 0; i < n; ++i)
        for (NodeIndex j = 0; j < n; ++j)
            if (i != j) csv << i + 1 << "," << j + 1 << "," << format_double(sims.empty() ? 0.0 : freq[i * n + j] / static_cast<double>(sims.size())) << "\n";
    ctx.write_json("simulations.json", {{"model", to_string(family)},
                                        {"wave", panel.wave_count() + 1},
                                        {"nsim", sims.size()},
                                        {"draws", draws},
                                        {"estimate", estimate_json(fit)}});
    write_text(ctx.path("tie_probabilities.csv"), csv.str());
    ctx.say("simulated " + std::to_string(sims.size()) + " networks for wave " + std::to_string(panel.wave_count() + 1));
    ctx.flush_log("simulate.log");
    return fit.estimate.converged ? kExitOk : kExitNonConvergence;
}

void write_gof(Context& ctx, const std::string& prefix, const GofRun& run) {
    if (!prefix.empty()) std::filesystem::create_directories(ctx.path(prefix));
    const std::string dir = prefix.empty() ? "" : prefix + "/";
    json j = gof_json(run.report);
    j["estimate"] = estimate_json(run.fit);
    j["leaked_terms"] = run.leaked_terms;
    ctx.write_json(dir + "gof.json", j);
    for (const auto& [name, text] : gof_csv(run.report, ctx.csv_header())) write_text(ctx.path(dir + name), text);
}

int cmd_gof(Context& ctx) {
    const auto& c = ctx.config;
    require(!c.spec.empty(), "gof needs --spec");
    const Panel panel = panel_from(c);
    const ModelSpec spec = load_model_spec(c.spec);
    const auto family = parse_family(c.model);
    const GofRun run = run_gof(panel, spec, family, options_from(c, ctx.seed));
    for (const auto& w : run.report.warnings) ctx.say("warning: " + w);
    ctx.say("trained on waves 1-" + std::to_string(panel.wave_count() - 1) + ", predicting wave " +
            std::to_string(panel.wave_count()));
    log_estimate(ctx, run.fit);
    ctx.say("AUC ROC " + format_double(run.report.ties.auc_roc) + ", AUC PR " + format_double(run.report.ties.auc_pr));
    write_gof(ctx, "", run);
    ctx.flush_log("gof.log");
    return run.fit.estimate.converged ? kExitOk : kExitNonConvergence;
}

int cmd_audit(Context& ctx) {
    const auto& c = ctx.config;
    require(!c.spec.empty(), "audit needs --spec");
    const ModelSpec spec = load_model_spec(c.spec);
    std::optional<Panel> panel;
    if (!c.waves.empty()) panel = panel_from(c);
    // Without data the audit is relative: the dependent wave is wave 2.
    const WaveIndex dependent = panel ? panel->wave_count() - 1 : 1;
    const auto findings = classify(spec.terms, spec.derived, dependent);
    bool leaking = false;
    for (const auto& f : findings) {
        ctx.say(f.term.label() + ": " + to_string(f.severity) + " (" + f.explanation + ")");
        leaking = leaking || is_leaking(f);
    }
    json probes = json::array();
    if (panel && leaking && c.nsim > 0) {
        for (const auto& p : probe_leaks(*panel, spec, options_from(c, ctx.seed))) {
            ctx.say("probe " + p.covariate + " -> " + format_double(p.constant) + ": divergence " +
                    format_double(p.divergence) + ", noise " + format_double(p.noise) + ", perturbed density " +
                    format_double(p.perturbed.mean_density) + ", " + (p.uses_covariate ? "uses_covariate" : "independent"));
            probes.push_back(probe_json(p));
        }
    }
    ctx.write_json("audit.json", {{"dependent_wave", dependent + 1},
                                  {"findings", findings_json(findings)},
                                  {"probes", probes},
                                  {"leaking", leaking},
                                  {"allow_leakage", c.allow_leakage}});
    ctx.flush_log("audit.log");
    return leaking && !c.allow_leakage ? kExitLeakage : kExitOk;
}

int cmd_replicate(Context& ctx) {
    const auto& c = ctx.config;
    Panel panel;
    if (c.waves.empty()) {
        panel = simulate_classroom(ClassroomOptions{}, ctx.seed).panel;
        ctx.say("no waves given: using the synthetic classroom panel (seed " + std::to_string(ctx.seed) + ")");
    } else {
        panel = panel_from(c);
    }
    require(panel.wave_count() >= 3, "replicate-flaw needs at least three waves");
    PipelineOptions o = options_from(c, ctx.seed);

    struct Arm {
        std::string name;
        ModelSpec spec;
        ModelFamily family;
        bool leak;
    };
    const std::vector<Arm> arms{{"flawed_tergm", flawed_spec(), ModelFamily::Tergm, true},
                                {"corrected_tergm", corrected_spec(), ModelFamily::Tergm, false},
                                {"corrected_saom", corrected_spec(), ModelFamily::Saom, false}};
    json results = json::object();
    std::ostringstream auc;
    auc << ctx.csv_header() << "\nmodel,auc_roc,auc_pr,converged\n";
    std::vector<GofRun> runs;
    bool all_converged = true;
    for (const auto& arm : arms) {
        o.allow_leakage = arm.leak;
        runs.push_back(run_gof(panel, arm.spec, arm.family, o));
        const auto& r = runs.back();
        ctx.say(arm.name + ":");
        for (const auto& w : r.report.warnings) ctx.say("  warning: " + w);
        log_estimate(ctx, r.fit);
        ctx.say("  AUC ROC " + format_double(r.report.ties.auc_roc) + ", AUC PR " + format_double(r.report.ties.auc_pr));
        write_gof(ctx, arm.name, r);
        results[arm.name] = {{"auc_roc", r.report.ties.auc_roc}, {"auc_pr", r.report.ties.auc_pr},
                             {"estimate", estimate_json(r.fit)}, {"leaked_terms", r.leaked_terms}};
        auc << arm.name << "," << format_double(r.report.ties.auc_roc) << "," << format_double(r.report.ties.auc_pr)
            << "," << (r.fit.estimate.converged ? 1 : 0) << "\n";
        all_converged = all_converged && r.fit.estimate.converged;
    }

    // Estimates side by side, one row per label in first-seen order.
    std::vector<std::string> labels;
    for (const auto& r : runs)
        for (const auto& l : r.fit.estimate.labels)
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    std::ostringstream table;
    table << ctx.csv_header() << "\nterm";
    for (const auto& arm : arms) table << "," << arm.name << "_est," << arm.name << "_se";
    table << "\n";
    for (const auto& l : labels) {
        table << l;
        for (const auto& r : runs) {
            const auto& e = r.fit.estimate;
            const auto it = std::find(e.labels.begin(), e.labels.end(), l);
            if (it == e.labels.end()) {
                table << ",,";
            } else {
                const auto k = it - e.labels.begin();
                table << "," << format_double(e.theta_hat[k]) << "," << format_double(e.standard_errors[k]);
            }
        }
        table << "\n";
    }
    ctx.write_json("comparison.json", {{"waves", panel.wave_count()}, {"n", panel.node_count()}, {"models", results}});
    write_text(ctx.path("comparison.csv"), table.str());
    write_text(ctx.path("auc.csv"), auc.str());
    ctx.flush_log("replicate-flaw.log");
    return all_converged ? kExitOk : kExitNonConvergence;
}

}  // namespace

int run(const RunConfig& config, std::ostream& log) {
    Context ctx{config, log, fnv1a_hex(canonical_config(config)), config.seed.value_or(1), {}};
    try {
        std::filesystem::create_directories(config.out);
        if (config.subcommand == "estimate") return cmd_estimate(ctx);
        if (config.subcommand == "simulate") return cmd_simulate(ctx);
        if (config.subcommand == "gof") return cmd_gof(ctx);
        if (config.subcommand == "audit") return cmd_audit(ctx);
        if (config.subcommand == "replicate-flaw") return cmd_replicate(ctx);
        throw ValidationError("unknown subcommand '" + config.subcommand + "'");
    } catch (const LeakageError& e) {
        log << "leakage: " << e.what() << "\n";
        return kExitLeakage;
    } catch (const ValidationError& e) {
        log << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace netpanel
