#include <iostream>

#include <CLI11.hpp>

#include "netpanel/cli.hpp"

int main(int argc, char** argv) {
    netpanel::RunConfig cfg;
    CLI::App app{"Longitudinal network models: TERGM, SAOM, out-of-sample checks and leakage audits"};
    app.require_subcommand(1, 1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--spec", cfg.spec, "Model spec JSON");
        sub->add_option("--waves", cfg.waves, "Adjacency matrix files, one per wave, in order");
        sub->add_option("--covariates", cfg.covariates, "Node covariate CSV files and name=path dyadic matrices");
        sub->add_option("--seed", cfg.seed, "Master seed");
        sub->add_option("--nsim", cfg.nsim, "Number of simulated networks")->capture_default_str();
        sub->add_option("--burnin", cfg.burnin, "MCMC burn-in proposals");
        sub->add_option("--thin", cfg.thin, "MCMC proposals between retained states");
        sub->add_option("--samples", cfg.samples, "Retained states per MCMC-MLE iteration");
        sub->add_option("--out", cfg.out, "Output directory")->capture_default_str();
        sub->add_flag("--allow-leakage", cfg.allow_leakage, "Let predictions read the held-out wave (reproduces the flaw)");
        sub->add_option("--model", cfg.model, "tergm or saom")->check(CLI::IsMember({"tergm", "saom"}))->capture_default_str();
    };
    for (const char* name : {"estimate", "simulate", "gof", "audit", "replicate-flaw"}) {
        add_common(app.add_subcommand(name));
    }
    app.get_subcommand("estimate")->description("Fit the spec to all waves");
    app.get_subcommand("simulate")->description("Fit, then simulate the wave after the last one");
    app.get_subcommand("gof")->description("Hold out the last wave, fit on the rest and score predictions");
    app.get_subcommand("audit")->description("Classify term bindings and probe leaking covariates");
    app.get_subcommand("replicate-flaw")->description("Flawed vs corrected specification, TERGM vs SAOM");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : netpanel::kExitValidation;
    }
    cfg.subcommand = app.get_subcommands().front()->get_name();
    return netpanel::run(cfg, std::cerr);
}
