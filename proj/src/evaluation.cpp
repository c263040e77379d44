#include "netpanel/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "netpanel/parallel.hpp"

namespace netpanel {

std::vector<std::string> terms_reading_future(std::span<const TermSpec> terms,
                                              std::span<const DerivedDeclaration> derived, const Panel& panel,
                                              WaveIndex dependent_wave, WaveIndex wave) {
    std::vector<std::string> out;
    for (const auto& t : terms) {
        if (!is_node_covariate_term(t.kind)) continue;
        const bool is_derived = std::any_of(derived.begin(), derived.end(),
                                            [&](const DerivedDeclaration& d) { return d.name == t.attr; });
        auto cov = panel.node_covariates.find(t.attr);
        const bool is_static = !is_derived && cov != panel.node_covariates.end() && cov->second.is_static();
        if (is_static) continue;
        if (covariate_source_wave(t, dependent_wave) >= wave) out.push_back(t.label());
    }
    return out;
}

HoldoutSplit holdout_split(const Panel& panel, WaveIndex test_wave, std::span<const TermSpec> terms,
                           std::span<const DerivedDeclaration> derived, bool allow_leakage) {
    panel.validate();
    if (test_wave + 1 != panel.wave_count()) {
        throw ValidationError("the test wave must be the last wave (" + std::to_string(panel.wave_count()) + ")");
    }
    if (test_wave < 2) throw ValidationError("holding out a wave needs at least two training waves");

    HoldoutSplit out;
    out.test_wave = test_wave;
    out.test = panel.waves[test_wave];
    out.training.waves.assign(panel.waves.begin(), panel.waves.begin() + static_cast<std::ptrdiff_t>(test_wave));
    out.training.dyad_covariates = panel.dyad_covariates;
    for (const auto& [name, cov] : panel.node_covariates) {
        NodeCovariate c = cov;
        if (!c.is_static()) {
            if (c.kind == CovariateKind::Numeric) c.numeric.resize(test_wave);
            else c.labels.resize(test_wave);
        }
        out.training.node_covariates[name] = std::move(c);
    }

    out.leaked_terms = terms_reading_future(terms, derived, panel, test_wave, test_wave);
    if (!out.leaked_terms.empty()) {
        std::string list;
        for (const auto& l : out.leaked_terms) list += (list.empty() ? "" : ", ") + l;
        if (!allow_leakage) {
            throw LeakageError("predicting wave " + std::to_string(test_wave + 1) + " would read that wave through: " + list,
                               out.leaked_terms);
        }
        out.warnings.push_back("leakage allowed: covariates of " + list + " are read from held-out wave " +
                               std::to_string(test_wave + 1));
        out.covariate_source = panel;
    } else {
        out.covariate_source = out.training;
    }
    return out;
}

std::vector<Network> predict_wave(const TergmModel& model, std::span<const DerivedDeclaration> derived,
                                  const HoldoutSplit& split, std::size_t nsim, const McmcConfig& cfg,
                                  std::span<const CovariateOverride> overrides) {
    model.validate();
    if (nsim == 0) return {};
    const CovariateTable covariates =
        bind_covariates(split.covariate_source, model.terms, derived, split.test_wave, overrides);
    McmcConfig c = cfg;
    c.sample_size = nsim;
    const Network& previous = split.training.waves.back();
    return sample(model, covariates, previous, c, previous);
}

std::vector<Network> predict_wave(const SaomModel& model, const HoldoutSplit& split, std::size_t nsim,
                                  std::uint64_t seed) {
    model.validate();
    if (nsim == 0) return {};
    if (model.rates.empty()) throw ValidationError("SAOM has no rate to simulate with");
    const CovariateTable covariates = bind_saom_covariates(split.covariate_source, model.effects, split.test_wave);
    const Network& previous = split.training.waves.back();
    const SaomEvaluator ev(model.effects, covariates, previous.size());
    const double rate = model.rates.back();
    return parallel_map(nsim, [&](std::size_t k) {
        Rng rng(derive_seed(seed, {k}));
        return simulate_period(ev, model.beta, rate, previous, rng);
    });
}

// Scoring ------------------------------------------------------------------------

double quantile(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

TiePrediction tie_prediction(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size()) throw ValidationError("scores and truth differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double positives = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
    const double negatives = static_cast<double>(truth.size()) - positives;

    TiePrediction out;
    const double inf = std::numeric_limits<double>::infinity();
    out.roc.push_back({inf, 0.0, 0.0});
    double tp = 0, fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double threshold = scores[order[k]];
        while (k < order.size() && scores[order[k]] == threshold) {
            (truth[order[k]] == 1 ? tp : fp) += 1.0;
            ++k;
        }
        const double fpr = negatives > 0 ? fp / negatives : 0.0;
        const double tpr = positives > 0 ? tp / positives : 0.0;
        out.roc.push_back({threshold, fpr, tpr});
        out.pr.push_back({threshold, tpr, tp / (tp + fp)});
    }
    if (positives == 0 || negatives == 0) {
        out.auc_roc = out.auc_pr = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    for (std::size_t k = 1; k < out.roc.size(); ++k) {
        out.auc_roc += (out.roc[k].x - out.roc[k - 1].x) * (out.roc[k].y + out.roc[k - 1].y) / 2.0;
    }
    double prev_recall = 0.0;
    for (const auto& p : out.pr) {
        out.auc_pr += (p.x - prev_recall) * p.y;
        prev_recall = p.x;
    }
    return out;
}

namespace {

std::vector<double> esp_histogram(const Network& g) {
    const auto h = shared_partner_counts(g, PartnerRelation::Edgewise, PartnerType::OTP);
    return {h.begin(), h.end()};
}

std::vector<double> dsp_histogram(const Network& g) {
    const auto h = shared_partner_counts(g, PartnerRelation::Dyadwise, PartnerType::OTP);
    return {h.begin(), h.end()};
}

std::vector<double> indegree_histogram(const Network& g) {
    std::vector<double> h(g.size(), 0.0);
    for (NodeIndex i = 0; i < g.size(); ++i) h[static_cast<std::size_t>(g.indegree(i))] += 1.0;
    return h;
}

std::vector<double> geodesic_histogram(const Network& g) {
    const auto d = geodesic_distribution(g);
    std::vector<double> h(d.by_distance.begin(), d.by_distance.end());
    h.push_back(static_cast<double>(d.unreachable + d.beyond));
    return h;
}

template <class F>
Envelope envelope(std::span<const Network> sims, const Network& observed, F histogram) {
    Envelope e;
    e.observed = histogram(observed);
    const std::size_t buckets = e.observed.size();
    std::vector<std::vector<double>> per_bucket(buckets);
    for (const auto& s : sims) {
        const auto h = histogram(s);
        for (std::size_t b = 0; b < buckets; ++b) per_bucket[b].push_back(h[b]);
    }
    for (auto& v : per_bucket) {
        e.min.push_back(*std::min_element(v.begin(), v.end()));
        e.max.push_back(*std::max_element(v.begin(), v.end()));
        e.q05.push_back(quantile(v, 0.05));
        e.median.push_back(quantile(v, 0.5));
        e.q95.push_back(quantile(v, 0.95));
    }
    return e;
}

}  // namespace

GofReport score(std::span<const Network> sims, const Network& observed) {
    if (sims.empty()) throw ValidationError("score needs at least one simulated network");
    const std::size_t n = observed.size();
    for (const auto& s : sims)
        if (s.size() != n) throw ValidationError("simulated and observed networks differ in size");

    GofReport r;
    r.nsim = sims.size();
    r.esp = envelope(sims, observed, esp_histogram);
    r.dsp = envelope(sims, observed, dsp_histogram);
    r.indegree = envelope(sims, observed, indegree_histogram);
    r.geodesic = envelope(sims, observed, geodesic_histogram);

    std::vector<double> scores;
    std::vector<int> truth;
    scores.reserve(n * (n - 1));
    for (NodeIndex i = 0; i < n; ++i)
        for (NodeIndex j = 0; j < n; ++j) {
            if (i == j) continue;
            double c = 0;
            for (const auto& s : sims) c += s.tie(i, j);
            scores.push_back(c / static_cast<double>(sims.size()));
            truth.push_back(observed.tie(i, j) ? 1 : 0);
        }
    r.ties = tie_prediction(scores, truth);
    return r;
}

}  // namespace netpanel
