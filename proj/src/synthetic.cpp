#include "netpanel/synthetic.hpp"

#include <random>

namespace netpanel {

Network random_digraph(std::size_t n, double density, Rng& rng) {
    Network g(n);
    for (NodeIndex i = 0; i < n; ++i)
        for (NodeIndex j = 0; j < n; ++j)
            if (i != j && uniform01(rng) < density) g.toggle(i, j);
    return g;
}

Panel simulate_tergm_panel(const TergmModel& model, const CovariateTable& covariates, std::size_t n,
                           std::size_t waves, double initial_density, std::size_t proposals_per_wave,
                           std::uint64_t seed) {
    model.validate();
    if (waves < 2) throw ValidationError("a panel needs at least two waves");
    const TermEvaluator ev(model.terms, covariates, n);
    Rng rng(derive_seed(seed, {0}));
    Panel panel;
    panel.waves.push_back(random_digraph(n, initial_density, rng));
    for (std::size_t t = 1; t < waves; ++t) {
        Rng chain(derive_seed(seed, {t}));
        Network state = panel.waves.back();
        run_chain(ev, model.theta, panel.waves.back(), state, proposals_per_wave, chain);
        panel.waves.push_back(std::move(state));
    }
    return panel;
}

Panel simulate_saom_panel(const SaomModel& model, const CovariateTable& covariates, std::size_t n,
                          double initial_density, std::uint64_t seed) {
    model.validate();
    const SaomEvaluator ev(model.effects, covariates, n);
    Rng rng(derive_seed(seed, {0}));
    Panel panel;
    panel.waves.push_back(random_digraph(n, initial_density, rng));
    for (std::size_t p = 0; p < model.rates.size(); ++p) {
        Rng period(derive_seed(seed, {p + 1}));
        panel.waves.push_back(simulate_period(ev, model.beta, model.rates[p], panel.waves.back(), period));
    }
    return panel;
}

Classroom simulate_classroom(const ClassroomOptions& o, std::uint64_t seed) {
    const std::size_t n = o.n;
    Rng rng(derive_seed(seed, {100}));
    std::normal_distribution<double> z(0.0, 1.0);

    std::vector<std::string> sex(n);
    std::vector<double> pop(n), act(n);
    std::vector<std::size_t> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        sex[i] = uniform01(rng) < 0.5 ? "F" : "M";
        cls[i] = i * o.classes / n;
        pop[i] = z(rng);
        act[i] = z(rng);
    }
    DyadMatrix primary{n, std::vector<double>(n * n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && cls[i] == cls[j]) primary.values[i * n + j] = 1.0;

    Classroom out;
    auto& cov = out.truth_covariates;
    cov.set_factor("sex", sex);
    cov.set_dyadic("primary", primary);
    cov.set_numeric("latent_pop", pop);
    cov.set_numeric("latent_act", act);
    out.truth.terms = {make_term(TermKind::Edges),
                       make_term(TermKind::Mutual),
                       make_term(TermKind::GwespOtp),
                       make_term(TermKind::NodeMatch, "sex"),
                       make_term(TermKind::EdgeCov, "primary"),
                       make_term(TermKind::NodeIcov, "latent_pop"),
                       make_term(TermKind::NodeOcov, "latent_act"),
                       make_term(TermKind::MemoryStability)};
    out.truth.theta = {o.edges, o.mutual, o.gwesp, o.same_sex, o.same_class, o.popularity, o.activity, o.stability};

    out.panel = simulate_tergm_panel(out.truth, cov, n, o.waves + o.warmup_waves, o.initial_density,
                                     o.proposals_per_wave, seed);
    out.panel.waves.erase(out.panel.waves.begin(), out.panel.waves.begin() + static_cast<std::ptrdiff_t>(o.warmup_waves));
    NodeCovariate s;
    s.kind = CovariateKind::Factor;
    s.labels = {sex};
    out.panel.node_covariates["sex"] = s;
    out.panel.dyad_covariates["primary"] = primary;
    out.panel.validate();
    return out;
}

}  // namespace netpanel
