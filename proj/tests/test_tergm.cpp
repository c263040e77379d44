#include <doctest.h>

#include <map>

#include "netpanel/tergm.hpp"
#include "support.hpp"

using namespace netpanel;
using testing_support::random_network;

namespace {

TergmModel edges_mutual_stability(double e, double m, double s) {
    return {{make_term(TermKind::Edges), make_term(TermKind::Mutual), make_term(TermKind::MemoryStability)},
            {e, m, s}};
}

std::vector<Network> all_digraphs(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> dyads;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) dyads.emplace_back(i, j);
    std::vector<Network> out;
    for (std::size_t mask = 0; mask < (std::size_t{1} << dyads.size()); ++mask) {
        Network g(n);
        for (std::size_t d = 0; d < dyads.size(); ++d)
            if (mask >> d & 1U) g.toggle(dyads[d].first, dyads[d].second);
        out.push_back(g);
    }
    return out;
}

}  // namespace

TEST_CASE("log_weight") {
    CovariateTable none;
    std::mt19937_64 rng(3);
    const auto g = random_network(6, 0.3, rng);
    const auto prev = random_network(6, 0.3, rng);
    SUBCASE("zero theta") {
        const auto model = edges_mutual_stability(0, 0, 0);
        CHECK(log_weight(model, {g, prev, none}) == 0.0);
    }
    SUBCASE("edges only") {
        const TergmModel model{{make_term(TermKind::Edges)}, {-1.25}};
        CHECK(log_weight(model, {g, prev, none}) == doctest::Approx(-1.25 * double(g.edge_count())));
    }
    SUBCASE("normalised weights over all 64 triads sum to one") {
        const auto model = edges_mutual_stability(-0.4, 1.1, 0.7);
        const auto p3 = random_network(3, 0.5, rng);
        double z = 0.0;
        std::vector<double> w;
        for (const auto& h : all_digraphs(3)) {
            w.push_back(std::exp(log_weight(model, {h, p3, none})));
            z += w.back();
        }
        double total = 0.0;
        for (double v : w) total += v / z;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        const auto exact = exact_distribution(model, none, p3);
        for (std::size_t k = 0; k < w.size(); ++k) CHECK(exact.probabilities[k] == doctest::Approx(w[k] / z));
    }
    SUBCASE("invariant under consistent relabeling") {
        const auto model = edges_mutual_stability(-0.4, 1.1, 0.7);
        const std::vector<std::size_t> perm{3, 1, 5, 0, 2, 4};
        CHECK(log_weight(model, {g, prev, none}) ==
              doctest::Approx(log_weight(model, {g.permuted(perm), prev.permuted(perm), none})));
    }
    SUBCASE("length mismatch") {
        const TergmModel bad{{make_term(TermKind::Edges)}, {1.0, 2.0}};
        CHECK_THROWS_AS(log_weight(bad, {g, prev, none}), ValidationError);
    }
}

TEST_CASE("exact_distribution") {
    CovariateTable none;
    SUBCASE("zero theta is uniform") {
        const auto d = exact_distribution(edges_mutual_stability(0, 0, 0), none, Network(3));
        CHECK(d.probabilities.size() == 64);
        for (double p : d.probabilities) CHECK(p == doctest::Approx(1.0 / 64.0));
    }
    SUBCASE("normalised at n=4") {
        std::mt19937_64 rng(1);
        const auto d = exact_distribution(edges_mutual_stability(-1, 0.5, 0.3), none, random_network(4, 0.4, rng));
        CHECK(d.probabilities.size() == 4096);
        double total = 0.0;
        for (double p : d.probabilities) total += p;
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
    SUBCASE("too large") {
        CHECK_THROWS_AS(exact_distribution(edges_mutual_stability(0, 0, 0), none, Network(5)), ValidationError);
    }
}

TEST_CASE("sampler") {
    CovariateTable none;
    SUBCASE("zero theta gives density one half") {
        const TergmModel model{{make_term(TermKind::Edges)}, {0.0}};
        const McmcConfig cfg{1000, 50, 2000, 17};
        const auto sims = sample(model, none, Network(10), cfg, Network(10));
        CHECK(sims.size() == 2000);
        std::vector<double> dens;
        for (const auto& s : sims) dens.push_back(s.density());
        const auto ms = testing_support::batch_mean_se(dens);
        CHECK(std::abs(ms.mean - 0.5) < 3.0 * ms.se);
    }
    SUBCASE("n=3 statistic means match the exact expectation") {
        std::mt19937_64 rng(2);
        const auto prev = random_network(3, 0.5, rng);
        const auto model = edges_mutual_stability(-0.6, 1.2, 0.8);
        const TermEvaluator ev(model.terms, none, 3);
        const auto exact = exact_distribution(model, none, prev).expectation(ev, prev);
        Rng chain_rng(5);
        const auto s = sample_statistics(ev, model.theta, prev, Network(3), {500, 10, 20000, 0}, chain_rng);
        for (std::size_t k = 0; k < 3; ++k) {
            std::vector<double> col(s.statistics.rows());
            for (Eigen::Index r = 0; r < s.statistics.rows(); ++r) col[r] = s.statistics(r, Eigen::Index(k));
            const auto ms = testing_support::batch_mean_se(col);
            CAPTURE(k);
            CHECK(std::abs(ms.mean - exact[k]) < 3.0 * ms.se);
        }
    }
    SUBCASE("tracked statistics agree with recomputation") {
        std::mt19937_64 rng(4);
        const auto prev = random_network(8, 0.3, rng);
        const TergmModel model{{make_term(TermKind::Edges), make_term(TermKind::GwespOtp),
                                make_term(TermKind::TransitiveTies), make_term(TermKind::MemoryStability)},
                               {-1.0, 0.3, 0.2, 0.9}};
        const TermEvaluator ev(model.terms, none, 8);
        Rng a(9), b(9);
        const auto stats = sample_statistics(ev, model.theta, prev, prev, {100, 40, 50, 0}, a);
        Network state = prev;
        run_chain(ev, model.theta, prev, state, 100, b);
        for (Eigen::Index r = 0; r < 50; ++r) {
            run_chain(ev, model.theta, prev, state, 40, b);
            const auto direct = ev.values(state, prev);
            for (std::size_t k = 0; k < direct.size(); ++k)
                CHECK(stats.statistics(r, Eigen::Index(k)) == doctest::Approx(direct[k]).epsilon(1e-9));
        }
    }
    SUBCASE("fixed seed is reproducible") {
        const auto model = edges_mutual_stability(-1.0, 1.0, 1.0);
        std::mt19937_64 rng(6);
        const auto prev = random_network(12, 0.2, rng);
        const McmcConfig cfg{200, 100, 20, 42};
        CHECK(sample(model, none, prev, cfg, prev) == sample(model, none, prev, cfg, prev));
    }
    SUBCASE("large stability keeps the previous wave") {
        const auto model = edges_mutual_stability(0.0, 0.0, 12.0);
        std::mt19937_64 rng(6);
        const auto prev = random_network(12, 0.2, rng);
        for (const auto& s : sample(model, none, prev, {2000, 500, 20, 3}, prev)) CHECK(s == prev);
    }
}

TEST_CASE("sampler converges to the exact law in total variation") {
    CovariateTable none;
    std::mt19937_64 rng(8);
    const auto prev = random_network(3, 0.5, rng);
    const auto model = edges_mutual_stability(-0.3, 0.9, 0.6);
    const auto exact = exact_distribution(model, none, prev);
    const TermEvaluator ev(model.terms, none, 3);
    Rng chain_rng(77);
    Network state = prev;
    std::vector<double> visits(64, 0.0);
    const std::size_t steps = 1'000'000;
    for (std::size_t k = 0; k < steps; ++k) {
        run_chain(ev, model.theta, prev, state, 1, chain_rng);
        visits[exact.index_of(state)] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t k = 0; k < 64; ++k) tv += std::abs(visits[k] / double(steps) - exact.probabilities[k]);
    CHECK(0.5 * tv < 0.02);
}

TEST_CASE("estimation on identical waves flags separation") {
    std::mt19937_64 rng(12);
    Panel panel;
    const auto g = random_network(10, 0.2, rng);
    panel.waves = {g, g};
    const std::vector<TermSpec> terms{make_term(TermKind::MemoryStability)};
    const auto est = estimate(terms, panel, {}, {1000, 100, 200, 1});
    CHECK(est.separation);
    CHECK_FALSE(est.converged);
    CHECK(est.theta_hat[0] > 10.0);
}

TEST_CASE("mple recovers a dyad-independent model") {
    // Pure logistic data: ties drawn independently with logit -1 + 2 * stability.
    std::mt19937_64 rng(21);
    Panel panel;
    const std::size_t n = 40;
    panel.waves.push_back(random_network(n, 0.3, rng));
    for (int t = 0; t < 2; ++t) {
        Network next(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double eta = panel.waves.back().tie(i, j) ? 1.0 : -3.0;  // -1 +/- 2
                if (std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng)) next.toggle(i, j);
            }
        panel.waves.push_back(next);
    }
    const std::vector<TermSpec> terms{make_term(TermKind::Edges), make_term(TermKind::MemoryStability)};
    const auto transitions = bind_transitions(panel, terms, {});
    const auto fit = mple(terms, panel, transitions);
    CHECK(fit.converged);
    CHECK(fit.theta[0] == doctest::Approx(-1.0).epsilon(0.15));
    CHECK(fit.theta[1] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("MCMC-MLE matches the pseudo-likelihood for dyad-independent terms") {
    std::mt19937_64 rng(22);
    Panel panel;
    const std::size_t n = 25;
    panel.waves.push_back(random_network(n, 0.3, rng));
    for (int t = 0; t < 2; ++t) {
        Network next(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double eta = panel.waves.back().tie(i, j) ? 0.5 : -2.5;
                if (std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng)) next.toggle(i, j);
            }
        panel.waves.push_back(next);
    }
    const std::vector<TermSpec> terms{make_term(TermKind::Edges), make_term(TermKind::MemoryStability)};
    const auto transitions = bind_transitions(panel, terms, {});
    const auto fit = mple(terms, panel, transitions);
    const auto est = estimate(terms, panel, {}, {5000, 1000, 2000, 3});
    CHECK(est.converged);
    CHECK(est.max_abs_tratio() < 0.1);
    for (Eigen::Index k = 0; k < 2; ++k) {
        CHECK(std::abs(est.theta_hat[k] - fit.theta[k]) < 0.5 * est.standard_errors[k]);
    }
}
