#include <doctest.h>

#include <cmath>
#include <numeric>

#include "netpanel/saom.hpp"
#include "support.hpp"

using namespace netpanel;
using testing_support::random_network;
using testing_support::x;

namespace {

// Actor statistic straight from the definition, one loop per effect.
double oracle_actor(SaomEffectKind kind, const Network& g, std::size_t i, const std::vector<double>& v,
                    const std::vector<int>& codes, const DyadMatrix& w) {
    const std::size_t n = g.size();
    const double alpha = kDefaultDecay;
    auto f = [&](int k) { return std::exp(alpha) * (1.0 - std::pow(1.0 - std::exp(-alpha), k)); };
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i || !g.tie(i, j)) continue;
        int tp = 0, cyc = 0, indeg = 0, outdeg = 0;
        for (std::size_t h = 0; h < n; ++h) {
            if (h != i && h != j) {
                tp += x(g, i, h) * x(g, h, j);
                cyc += x(g, j, h) * x(g, h, i);
            }
            if (h != j) {
                indeg += x(g, h, j);
                outdeg += x(g, j, h);
            }
        }
        switch (kind) {
            case SaomEffectKind::Outdegree: s += 1; break;
            case SaomEffectKind::Reciprocity: s += x(g, j, i); break;
            case SaomEffectKind::TransitiveTies: s += tp > 0; break;
            case SaomEffectKind::GwespTransitive: s += f(tp); break;
            case SaomEffectKind::GwespCyclic: s += f(cyc); break;
            case SaomEffectKind::IndegreePopularitySqrt: s += std::sqrt(indeg); break;
            case SaomEffectKind::OutdegreePopularity: s += outdeg; break;
            case SaomEffectKind::Ego: s += v[i]; break;
            case SaomEffectKind::Alter: s += v[j]; break;
            case SaomEffectKind::Same: s += codes[i] == codes[j]; break;
            case SaomEffectKind::Dyadic: s += w(i, j); break;
            case SaomEffectKind::OutdegreeActivitySqrt: break;
        }
    }
    if (kind == SaomEffectKind::OutdegreeActivitySqrt) {
        int d = 0;
        for (std::size_t j = 0; j < n; ++j) d += j != i && g.tie(i, j);
        s = std::pow(d, 1.5);
    }
    return s;
}

struct Fixture {
    std::size_t n;
    CovariateTable table;
    std::vector<double> v;
    std::vector<int> codes;
    DyadMatrix w;
    std::vector<SaomEffect> effects;

    Fixture(std::size_t size, std::mt19937_64& rng) : n(size), w{size, std::vector<double>(size * size, 0.0)} {
        std::uniform_real_distribution<double> u(-1, 1);
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < n; ++i) {
            v.push_back(u(rng));
            labels.push_back(u(rng) > 0 ? "b" : "a");
            codes.push_back(labels.back() == "b");
        }
        for (auto& e : w.values) e = u(rng);
        table.set_numeric("v", v);
        table.set_factor("c", labels);
        table.set_dyadic("w", w);
        for (auto k : kAllSaomEffects) {
            SaomEffect e{k, {}, {}};
            if (k == SaomEffectKind::Ego || k == SaomEffectKind::Alter) e.attr = "v";
            if (k == SaomEffectKind::Same) e.attr = "c";
            if (k == SaomEffectKind::Dyadic) e.attr = "w";
            effects.push_back(e);
        }
    }
};

}  // namespace

TEST_CASE("actor statistics match the brute-force definition") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 3 + rep % 6;
        Fixture fx(n, rng);
        const auto g = random_network(n, 0.1 + 0.03 * rep, rng);
        const SaomEvaluator ev(fx.effects, fx.table, n);
        for (std::size_t k = 0; k < ev.size(); ++k)
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(ev.actor_statistic(k, g, i) ==
                      doctest::Approx(oracle_actor(fx.effects[k].kind, g, i, fx.v, fx.codes, fx.w)).epsilon(1e-12));
            }
    }
}

TEST_CASE("actor change equals the difference of actor statistics") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 3 + rep % 6;
        Fixture fx(n, rng);
        const auto g = random_network(n, 0.5, rng);
        const SaomEvaluator ev(fx.effects, fx.table, n);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t i = pick(rng), j = pick(rng);
        while (j == i) j = pick(rng);
        Network plus = g, minus = g;
        plus.set_tie(i, j, true);
        minus.set_tie(i, j, false);
        for (std::size_t k = 0; k < ev.size(); ++k) {
            const double expected = ev.actor_statistic(k, plus, i) - ev.actor_statistic(k, minus, i);
            CHECK(std::abs(ev.actor_change(k, g, i, j) - expected) < 1e-10);
        }
    }
}

TEST_CASE("objective") {
    std::mt19937_64 rng(13);
    Fixture fx(6, rng);
    const auto g = random_network(6, 0.4, rng);
    SaomModel model{{1.0}, fx.effects, std::vector<double>(fx.effects.size(), 0.0)};
    for (std::size_t k = 0; k < model.beta.size(); ++k) model.beta[k] = 0.1 * static_cast<double>(k) - 0.5;
    const ObjectiveContext ctx{2, g, fx.table};
    const SaomEvaluator ev(fx.effects, fx.table, 6);

    SUBCASE("linear in actor statistics") {
        double expected = 0;
        for (std::size_t k = 0; k < ev.size(); ++k) expected += model.beta[k] * ev.actor_statistic(k, g, 2);
        CHECK(objective(model, ctx, g) == doctest::Approx(expected));
    }
    SUBCASE("difference of two options is the logit input") {
        Network toggled = g;
        toggled.toggle(2, 4);
        const auto p = choice_probabilities(ev, model.beta, g, 2);
        const double diff = objective(model, ctx, toggled) - objective(model, ctx, g);
        CHECK(std::log(p[5] / p[0]) == doctest::Approx(diff));
    }
    SUBCASE("candidate touching another actor's tie is rejected") {
        Network other = g;
        other.toggle(3, 1);
        CHECK_THROWS_AS(objective(model, ctx, other), ValidationError);
    }
    SUBCASE("two changes are rejected") {
        Network two = g;
        two.toggle(2, 0);
        two.toggle(2, 1);
        CHECK_THROWS_AS(objective(model, ctx, two), ValidationError);
    }
}

TEST_CASE("choice probabilities") {
    std::mt19937_64 rng(14);
    Fixture fx(7, rng);
    const auto g = random_network(7, 0.3, rng);
    const SaomEvaluator ev(fx.effects, fx.table, 7);
    std::vector<double> beta(ev.size());
    std::normal_distribution<double> z(0, 1);
    for (auto& b : beta) b = z(rng);
    for (std::size_t i = 0; i < 7; ++i) {
        const auto p = choice_probabilities(ev, beta, g, i);
        CHECK(p.size() == 8);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p[i + 1] == 0.0);
        for (double q : p) CHECK(q >= 0.0);
    }
    SUBCASE("logit over objective values, shift invariant") {
        SaomModel model{{1.0}, fx.effects, beta};
        const ObjectiveContext ctx{3, g, fx.table};
        const double base = objective(model, ctx, g);
        std::vector<double> values{0.0};
        for (std::size_t j = 0; j < 7; ++j) {
            if (j == 3) {
                values.push_back(0.0);
                continue;
            }
            Network c = g;
            c.toggle(3, j);
            values.push_back(objective(model, ctx, c) - base);
        }
        for (double shift : {0.0, 50.0, -700.0}) {
            double z = 0.0;
            for (std::size_t k = 0; k < values.size(); ++k)
                if (k != 4) z += std::exp(values[k] + shift);
            const auto p = choice_probabilities(ev, beta, g, 3);
            for (std::size_t k = 0; k < values.size(); ++k)
                if (k != 4 && std::isfinite(z) && z > 0) CHECK(p[k] == doctest::Approx(std::exp(values[k] + shift) / z));
        }
        std::vector<double> huge(beta.size(), 0.0);
        huge[0] = 800.0;
        const auto p = choice_probabilities(ev, huge, g, 3);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0));
    }
}

TEST_CASE("simulate_period") {
    std::mt19937_64 rng(15);
    CovariateTable none;
    const auto start = random_network(20, 0.1, rng);

    SUBCASE("rate zero returns the start") {
        SaomModel m{{0.0}, {{SaomEffectKind::Outdegree, {}, {}}}, {0.0}};
        CHECK(simulate_period(m, none, start, 3) == start);
    }
    SUBCASE("same seed same result") {
        SaomModel m{{4.0}, {{SaomEffectKind::Outdegree, {}, {}}, {SaomEffectKind::Reciprocity, {}, {}}}, {-1.0, 1.0}};
        CHECK(simulate_period(m, none, start, 9) == simulate_period(m, none, start, 9));
    }
    SUBCASE("zero beta drifts monotonically toward half density") {
        SaomModel m{{0.0}, {{SaomEffectKind::Outdegree, {}, {}}}, {0.0}};
        // n*rate steps per period, each toggling a given ordered dyad with
        // probability 1/n^2, so the density relaxes as
        // 0.5 + (d0 - 0.5) exp(-2 rate / n).
        const std::vector<double> rates{2.0, 5.0, 10.0, 20.0, 60.0};
        double last = start.density();
        for (double r : rates) {
            m.rates = {r};
            double sum = 0;
            const int reps = 200;
            for (int s = 0; s < reps; ++s) sum += simulate_period(m, none, start, 100 + static_cast<std::uint64_t>(s)).density();
            const double mean = sum / reps;
            const double expected = 0.5 + (start.density() - 0.5) * std::exp(-2.0 * r / 20.0);
            CHECK(mean == doctest::Approx(expected).epsilon(0.03));
            CHECK(mean > last - 0.005);
            last = mean;
        }
        CHECK(last == doctest::Approx(0.5).epsilon(0.02));
    }
    SUBCASE("reciprocity raises mutual dyads") {
        auto mutual = [](const Network& g) {
            int c = 0;
            for (std::size_t i = 0; i < g.size(); ++i)
                for (std::size_t j = i + 1; j < g.size(); ++j) c += g.tie(i, j) && g.tie(j, i);
            return c;
        };
        SaomModel flat{{5.0}, {{SaomEffectKind::Outdegree, {}, {}}, {SaomEffectKind::Reciprocity, {}, {}}}, {-1.5, 0.0}};
        SaomModel recip = flat;
        recip.beta = {-1.5, 2.5};
        double a = 0, b = 0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            a += mutual(simulate_period(flat, none, start, s));
            b += mutual(simulate_period(recip, none, start, s));
        }
        CHECK(b > 1.5 * a);
    }
}

TEST_CASE("mapping terms to actor effects") {
    const std::vector<TermSpec> terms{make_term(TermKind::Edges), make_term(TermKind::Mutual),
                                      make_term(TermKind::GwespOtp), make_term(TermKind::GwIndegree),
                                      make_term(TermKind::TwoPath), make_term(TermKind::GwOutdegree),
                                      make_term(TermKind::NodeOfactor, "sex"), make_term(TermKind::MemoryStability)};
    const auto effects = saom_effects_from_terms(terms);
    REQUIRE(effects.size() == 7);
    CHECK(effects[0].kind == SaomEffectKind::Outdegree);
    CHECK(effects[2].kind == SaomEffectKind::GwespTransitive);
    CHECK(effects[3].kind == SaomEffectKind::IndegreePopularitySqrt);
    CHECK(effects[5].kind == SaomEffectKind::OutdegreeActivitySqrt);
    CHECK(effects[6].label() == "ego(sex)");
    const std::vector<TermSpec> bad{make_term(TermKind::CTriple)};
    CHECK_THROWS_AS(saom_effects_from_terms(bad), ValidationError);
    CHECK_THROWS_AS(parse_saom_effect("popularity"), ValidationError);
    CHECK(parse_saom_effect("gwesp_cyclic") == SaomEffectKind::GwespCyclic);
}

TEST_CASE("estimate_mom flags identical waves") {
    std::mt19937_64 rng(16);
    Panel panel;
    const auto g = random_network(12, 0.2, rng);
    panel.waves = {g, g};
    SaomConfig cfg;
    cfg.phase3_iterations = 50;
    const std::vector<SaomEffect> effects{{SaomEffectKind::Outdegree, {}, {}}};
    const auto fit = estimate_mom(effects, panel, cfg);
    CHECK(fit.model.rates[0] == 0.0);
    CHECK(fit.estimate.degenerate);
    CHECK_FALSE(fit.estimate.diagnostics.empty());
}

TEST_CASE("estimate_mom recovers a small model" * doctest::timeout(300)) {
    CovariateTable none;
    std::mt19937_64 rng(17);
    const std::size_t n = 25;
    const auto start = random_network(n, 0.15, rng);
    SaomModel truth{{4.0}, {{SaomEffectKind::Outdegree, {}, {}}, {SaomEffectKind::Reciprocity, {}, {}}}, {-1.5, 1.5}};
    Panel panel;
    panel.waves = {start, simulate_period(truth, none, start, 5)};
    SaomConfig cfg;
    cfg.seed = 3;
    cfg.phase3_iterations = 300;
    const auto fit = estimate_mom(truth.effects, panel, cfg);
    const auto& e = fit.estimate;
    CHECK(e.converged);
    CHECK(std::abs(e.theta_hat[0] - 4.0) < 3 * e.standard_errors[0]);
    CHECK(std::abs(e.theta_hat[1] + 1.5) < 3 * e.standard_errors[1]);
    CHECK(std::abs(e.theta_hat[2] - 1.5) < 3 * e.standard_errors[2]);
}

TEST_CASE("batched option changes agree with single changes") {
    std::mt19937_64 rng(18);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 3 + rep % 8;
        Fixture fx(n, rng);
        const auto g = random_network(n, 0.2 + 0.01 * rep, rng);
        const SaomEvaluator ev(fx.effects, fx.table, n);
        std::vector<double> batch;
        for (std::size_t i = 0; i < n; ++i) {
            ev.option_changes(g, i, batch);
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < ev.size(); ++k) {
                    const double expected = j == i ? 0.0 : ev.actor_change(k, g, i, j);
                    CHECK(std::abs(batch[j * ev.size() + k] - expected) < 1e-10);
                }
        }
    }
}
