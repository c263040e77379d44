#include "netpanel/tergm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "netpanel/parallel.hpp"

namespace netpanel {

double ParameterEstimate::max_abs_tratio() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < convergence_tratios.size(); ++k) {
        const double t = std::abs(convergence_tratios[k]);
        if (std::isnan(t)) return std::numeric_limits<double>::infinity();
        m = std::max(m, t);
    }
    return m;
}

void TergmModel::validate() const {
    if (terms.size() != theta.size()) {
        throw ValidationError("model has " + std::to_string(terms.size()) + " terms but " +
                              std::to_string(theta.size()) + " coefficients");
    }
    for (const auto& t : terms) validate_term(t);
}

void McmcConfig::validate() const {
    if (burn_in == 0 || thinning == 0 || sample_size == 0) {
        throw ValidationError("MCMC burn-in, thinning and sample size must all be positive");
    }
}

double log_weight(const TergmModel& model, const StatisticContext& ctx) {
    model.validate();
    const auto s = statistic_vector(model.terms, ctx);
    return std::inner_product(s.begin(), s.end(), model.theta.begin(), 0.0);
}

namespace {

template <class OnAccept>
std::size_t mh_steps(const TermEvaluator& ev, std::span<const double> theta, const Network& previous, Network& state,
                     std::size_t proposals, Rng& rng, std::vector<double>& delta, OnAccept&& on_accept) {
    const std::size_t n = state.size();
    const std::size_t p = ev.size();
    std::uniform_int_distribution<std::size_t> pick_i(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_j(0, n - 2);
    std::size_t accepted = 0;
    for (std::size_t step = 0; step < proposals; ++step) {
        const NodeIndex i = pick_i(rng);
        NodeIndex j = pick_j(rng);
        if (j >= i) ++j;
        ev.change(state, previous, i, j, delta);
        double d = 0.0;
        for (std::size_t k = 0; k < p; ++k) d += theta[k] * delta[k];
        const bool removing = state.tie(i, j);
        if (removing) d = -d;
        if (d >= 0.0 || std::log(uniform01(rng)) < d) {
            state.toggle(i, j);
            on_accept(removing ? -1.0 : 1.0);
            ++accepted;
        }
    }
    return accepted;
}

Eigen::MatrixXd covariance_of(const Eigen::MatrixXd& s) {
    const Eigen::RowVectorXd mean = s.colwise().mean();
    const Eigen::MatrixXd centered = s.rowwise() - mean;
    const double denom = std::max<Eigen::Index>(s.rows() - 1, 1);
    return centered.transpose() * centered / denom;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
    return cod.pseudoInverse();
}

}  // namespace

void run_chain(const TermEvaluator& evaluator, std::span<const double> theta, const Network& previous,
               Network& state, std::size_t proposals, Rng& rng) {
    if (state.size() < 2) return;
    std::vector<double> delta(evaluator.size());
    mh_steps(evaluator, theta, previous, state, proposals, rng, delta, [](double) {});
}

ChainSample sample_statistics(const TermEvaluator& evaluator, std::span<const double> theta,
                              const Network& previous, const Network& init, const McmcConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t p = evaluator.size();
    ChainSample out;
    out.statistics.resize(static_cast<Eigen::Index>(cfg.sample_size), static_cast<Eigen::Index>(p));
    Network state = init;
    std::vector<double> stats = evaluator.values(state, previous);
    std::vector<double> delta(p);
    auto track = [&](double sign) {
        for (std::size_t k = 0; k < p; ++k) stats[k] += sign * delta[k];
    };
    const std::size_t n = state.size();
    const std::size_t full = n * (n - 1);
    out.accepted += mh_steps(evaluator, theta, previous, state, cfg.burn_in, rng, delta, track);
    out.proposals += cfg.burn_in;
    for (std::size_t m = 0; m < cfg.sample_size; ++m) {
        out.accepted += mh_steps(evaluator, theta, previous, state, cfg.thinning, rng, delta, track);
        out.proposals += cfg.thinning;
        for (std::size_t k = 0; k < p; ++k) out.statistics(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = stats[k];
        if (state.edge_count() == 0 || state.edge_count() == full) ++out.boundary_hits;
    }
    return out;
}

std::vector<Network> sample(const TergmModel& model, const CovariateTable& covariates, const Network& previous,
                            const McmcConfig& cfg, const Network& init) {
    model.validate();
    cfg.validate();
    if (init.size() != previous.size()) throw ValidationError("init and previous networks differ in size");
    const TermEvaluator ev(model.terms, covariates, init.size());
    Rng rng(cfg.seed);
    Network state = init;
    std::vector<Network> out;
    out.reserve(cfg.sample_size);
    run_chain(ev, model.theta, previous, state, cfg.burn_in, rng);
    for (std::size_t m = 0; m < cfg.sample_size; ++m) {
        run_chain(ev, model.theta, previous, state, cfg.thinning, rng);
        out.push_back(state);
    }
    return out;
}

// Exact enumeration ------------------------------------------------------------

namespace {

std::vector<std::pair<NodeIndex, NodeIndex>> ordered_dyads(std::size_t n) {
    std::vector<std::pair<NodeIndex, NodeIndex>> d;
    for (NodeIndex i = 0; i < n; ++i)
        for (NodeIndex j = 0; j < n; ++j)
            if (i != j) d.emplace_back(i, j);
    return d;
}

}  // namespace

ExactDistribution exact_distribution(const TergmModel& model, const CovariateTable& covariates,
                                     const Network& previous) {
    model.validate();
    const std::size_t n = previous.size();
    if (n > 4) throw ValidationError("exact enumeration supports at most 4 nodes, got " + std::to_string(n));
    const auto dyads = ordered_dyads(n);
    const std::size_t count = std::size_t{1} << dyads.size();
    const TermEvaluator ev(model.terms, covariates, n);

    ExactDistribution out;
    out.graphs.reserve(count);
    std::vector<double> logw(count);
    for (std::size_t mask = 0; mask < count; ++mask) {
        Network g(n);
        for (std::size_t d = 0; d < dyads.size(); ++d)
            if (mask >> d & 1U) g.toggle(dyads[d].first, dyads[d].second);
        const auto s = ev.values(g, previous);
        logw[mask] = std::inner_product(s.begin(), s.end(), model.theta.begin(), 0.0);
        out.graphs.push_back(std::move(g));
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    double z = 0.0;
    for (double w : logw) z += std::exp(w - mx);
    out.probabilities.resize(count);
    for (std::size_t k = 0; k < count; ++k) out.probabilities[k] = std::exp(logw[k] - mx) / z;
    return out;
}

std::vector<double> ExactDistribution::expectation(const TermEvaluator& evaluator, const Network& previous) const {
    std::vector<double> e(evaluator.size(), 0.0);
    for (std::size_t k = 0; k < graphs.size(); ++k) {
        const auto s = evaluator.values(graphs[k], previous);
        for (std::size_t q = 0; q < e.size(); ++q) e[q] += probabilities[k] * s[q];
    }
    return e;
}

std::size_t ExactDistribution::index_of(const Network& net) const {
    const auto dyads = ordered_dyads(net.size());
    std::size_t mask = 0;
    for (std::size_t d = 0; d < dyads.size(); ++d)
        if (net.tie(dyads[d].first, dyads[d].second)) mask |= std::size_t{1} << d;
    return mask;
}

// Estimation ---------------------------------------------------------------------

std::vector<Transition> bind_transitions(const Panel& panel, std::span<const TermSpec> terms,
                                         std::span<const DerivedDeclaration> derived) {
    panel.validate();
    std::vector<Transition> out;
    for (WaveIndex t = 1; t < panel.wave_count(); ++t) {
        out.push_back({t, bind_covariates(panel, terms, derived, t)});
    }
    return out;
}

MpleResult mple(std::span<const TermSpec> terms, const Panel& panel, std::span<const Transition> transitions) {
    const std::size_t p = terms.size();
    const std::size_t n = panel.node_count();
    const std::size_t rows = transitions.size() * n * (n - 1);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    std::vector<double> delta(p);
    Eigen::Index r = 0;
    for (const auto& tr : transitions) {
        const TermEvaluator ev({terms.begin(), terms.end()}, tr.covariates, n);
        const Network& cur = panel.waves[tr.dependent_wave];
        const Network& prev = panel.waves[tr.dependent_wave - 1];
        for (NodeIndex i = 0; i < n; ++i)
            for (NodeIndex j = 0; j < n; ++j) {
                if (i == j) continue;
                ev.change(cur, prev, i, j, delta);
                for (std::size_t k = 0; k < p; ++k) x(r, static_cast<Eigen::Index>(k)) = delta[k];
                y[r] = cur.tie(i, j) ? 1.0 : 0.0;
                ++r;
            }
    }

    MpleResult out;
    out.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    constexpr int kMaxIter = 60;
    constexpr double kDivergence = 25.0;
    for (int it = 1; it <= kMaxIter; ++it) {
        out.iterations = it;
        const Eigen::VectorXd eta = x * out.theta;
        Eigen::VectorXd mu(eta.size());
        Eigen::VectorXd w(eta.size());
        for (Eigen::Index k = 0; k < eta.size(); ++k) {
            mu[k] = 1.0 / (1.0 + std::exp(-eta[k]));
            w[k] = std::max(mu[k] * (1.0 - mu[k]), 1e-12);
        }
        const Eigen::VectorXd grad = x.transpose() * (y - mu);
        const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        const Eigen::VectorXd step = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(info).solve(grad);
        out.theta += step;
        if (!out.theta.allFinite() || out.theta.cwiseAbs().maxCoeff() > kDivergence) {
            out.separation = true;
            break;
        }
        if (step.cwiseAbs().maxCoeff() < 1e-9) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged && !out.separation) {
        // Slow divergence: fitted probabilities collapsing onto the outcomes.
        const Eigen::VectorXd eta = x * out.theta;
        double worst = 0.0;
        for (Eigen::Index k = 0; k < eta.size(); ++k) {
            const double mu = 1.0 / (1.0 + std::exp(-eta[k]));
            worst = std::max(worst, std::abs(mu - y[k]));
        }
        if (worst < 1e-6) out.separation = true;
    }
    return out;
}

namespace {

struct PooledSample {
    Eigen::MatrixXd statistics;
    bool degenerate = false;
};

PooledSample pooled_sample(const std::vector<TermEvaluator>& evaluators, const Panel& panel,
                           std::span<const Transition> transitions, const Eigen::VectorXd& theta,
                           const McmcConfig& cfg, int iteration, double degeneracy_fraction) {
    const std::vector<double> th(theta.data(), theta.data() + theta.size());
    auto chains = parallel_map(transitions.size(), [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(iteration), t}));
        const auto& tr = transitions[t];
        return sample_statistics(evaluators[t], th, panel.waves[tr.dependent_wave - 1],
                                 panel.waves[tr.dependent_wave], cfg, rng);
    });
    PooledSample out;
    out.statistics = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.sample_size), theta.size());
    for (const auto& c : chains) {
        out.statistics += c.statistics;
        if (static_cast<double>(c.boundary_hits) > degeneracy_fraction * static_cast<double>(cfg.sample_size)) {
            out.degenerate = true;
        }
    }
    return out;
}

Eigen::VectorXd tratios(const Eigen::MatrixXd& s, const Eigen::VectorXd& observed) {
    const Eigen::VectorXd mean = s.colwise().mean().transpose();
    const Eigen::VectorXd var = covariance_of(s).diagonal();
    Eigen::VectorXd t(mean.size());
    for (Eigen::Index k = 0; k < t.size(); ++k) {
        const double diff = mean[k] - observed[k];
        if (var[k] > 0.0) {
            t[k] = diff / std::sqrt(var[k]);
        } else {
            t[k] = std::abs(diff) < 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
    }
    return t;
}

// Approximate log-likelihood ratio l(theta) - l(theta0) from a sample at theta0.
double approx_loglik_ratio(const Eigen::MatrixXd& s, const Eigen::VectorXd& observed, const Eigen::VectorXd& dtheta) {
    const Eigen::VectorXd lw = s * dtheta;
    const double mx = lw.maxCoeff();
    const double lse = mx + std::log((lw.array() - mx).exp().sum() / static_cast<double>(lw.size()));
    return dtheta.dot(observed) - lse;
}

}  // namespace

ParameterEstimate estimate(std::span<const TermSpec> terms, const Panel& panel,
                           std::span<const DerivedDeclaration> derived, const McmcConfig& cfg,
                           const EstimationOptions& options) {
    cfg.validate();
    const auto p = static_cast<Eigen::Index>(terms.size());
    const std::size_t n = panel.node_count();
    const auto transitions = bind_transitions(panel, terms, derived);

    std::vector<TermEvaluator> evaluators;
    Eigen::VectorXd observed = Eigen::VectorXd::Zero(p);
    for (const auto& tr : transitions) {
        evaluators.emplace_back(std::vector<TermSpec>(terms.begin(), terms.end()), tr.covariates, n);
        const auto s = evaluators.back().values(panel.waves[tr.dependent_wave], panel.waves[tr.dependent_wave - 1]);
        for (Eigen::Index k = 0; k < p; ++k) observed[k] += s[static_cast<std::size_t>(k)];
    }

    ParameterEstimate est;
    for (const auto& t : terms) est.labels.push_back(t.label());

    const MpleResult init = mple(terms, panel, transitions);
    est.theta_hat = init.theta;
    if (init.separation) {
        est.separation = true;
        est.degenerate = true;
        est.standard_errors = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
        est.covariance = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
        est.convergence_tratios = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
        est.diagnostics.push_back("pseudo-likelihood diverged: the observed ties are perfectly separated by the "
                                  "change statistics, so the maximum likelihood estimate is on the boundary");
        return est;
    }

    Eigen::VectorXd theta = init.theta;
    PooledSample last;
    // Near the solution the t-ratios sit on the Monte Carlo noise floor, so
    // the sample grows from there on.
    McmcConfig run = cfg;
    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        est.iterations = iter;
        last = pooled_sample(evaluators, panel, transitions, theta, run, iter, options.degeneracy_fraction);
        const Eigen::MatrixXd& s = last.statistics;
        est.convergence_tratios = tratios(s, observed);
        {
            std::ostringstream os;
            os << "iteration " << iter << ": max |t| = " << est.max_abs_tratio();
            est.diagnostics.push_back(os.str());
        }
        if (est.max_abs_tratio() < options.tratio_tolerance) {
            est.converged = true;
            break;
        }
        if (iter == options.max_iterations) break;
        if (est.max_abs_tratio() < 3.0 * options.tratio_tolerance) {
            run.sample_size = std::min(2 * run.sample_size, options.max_sample_growth * cfg.sample_size);
        }

        const auto m = static_cast<double>(s.rows());
        Eigen::VectorXd cur = theta;
        for (int inner = 0; inner < options.inner_steps; ++inner) {
            const Eigen::VectorXd lw = s * (cur - theta);
            const Eigen::ArrayXd w = (lw.array() - lw.maxCoeff()).exp();
            const double ess = w.sum() * w.sum() / w.square().sum();
            if (inner > 0 && ess < options.min_ess_fraction * m) break;
            const Eigen::VectorXd wn = (w / w.sum()).matrix();
            const Eigen::VectorXd mean_w = s.transpose() * wn;
            const Eigen::MatrixXd centered = s.rowwise() - mean_w.transpose();
            const Eigen::MatrixXd cov_w = centered.transpose() * wn.asDiagonal() * centered;
            Eigen::VectorXd step = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(cov_w).solve(observed - mean_w);
            if (!step.allFinite()) break;
            const double sup = step.cwiseAbs().maxCoeff();
            if (sup > options.max_step) step *= options.max_step / sup;
            const double base = approx_loglik_ratio(s, observed, cur - theta);
            int halvings = 0;
            while (approx_loglik_ratio(s, observed, cur + step - theta) < base && halvings < 12) {
                step *= 0.5;
                ++halvings;
            }
            cur += step;
            if (step.cwiseAbs().maxCoeff() < 1e-6) break;
        }
        theta = cur;
    }

    est.theta_hat = theta;
    est.degenerate = last.degenerate;
    const Eigen::MatrixXd cov_s = covariance_of(last.statistics);
    est.covariance = pseudo_inverse(cov_s);
    est.standard_errors = est.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    if (last.degenerate) {
        est.diagnostics.push_back("more than " + std::to_string(static_cast<int>(options.degeneracy_fraction * 100)) +
                                  "% of simulated networks were empty or complete");
    }
    if (!est.converged) est.diagnostics.push_back("did not reach the t-ratio criterion");
    return est;
}

}  // namespace netpanel
