#include <doctest.h>

#include "netpanel/io.hpp"
#include "netpanel/leakage_audit.hpp"
#include "netpanel/synthetic.hpp"

using namespace netpanel;

namespace {

TermSpec bound(TermKind kind, std::string attr, Binding b, std::optional<WaveIndex> source = {}) {
    TermSpec t = make_term(kind, std::move(attr));
    t.binding = b;
    t.source_wave = source;
    return t;
}

const std::vector<DerivedDeclaration> kDegrees{{"idegsqrt", AttributeTransform::SqrtIndegree},
                                               {"odegsqrt", AttributeTransform::SqrtOutdegree}};

Severity severity_of(const TermSpec& t, WaveIndex dependent = 3) {
    const std::vector<TermSpec> one{t};
    return classify(one, kDegrees, dependent).front().severity;
}

// Flawed terms with coefficients of the size a fit on classroom data gives.
TergmModel flawed_model(double icov_in) {
    const auto spec = flawed_spec();
    TergmModel m{spec.terms, std::vector<double>(spec.terms.size(), 0.0)};
    for (std::size_t k = 0; k < m.terms.size(); ++k) {
        const auto& t = m.terms[k];
        if (t.kind == TermKind::Edges) m.theta[k] = -3.0;
        if (t.kind == TermKind::Mutual) m.theta[k] = 1.5;
        if (t.kind == TermKind::MemoryStability) m.theta[k] = 1.5;
        if (t.kind == TermKind::NodeIcov && t.attr == "idegsqrt") m.theta[k] = icov_in;
    }
    return m;
}

McmcConfig chain(std::uint64_t seed) {
    McmcConfig c;
    c.burn_in = 3000;
    c.thinning = 150;
    c.seed = seed;
    return c;
}

Panel classroom() {
    ClassroomOptions o;
    o.n = 14;
    o.proposals_per_wave = 5000;
    o.warmup_waves = 1;
    return simulate_classroom(o, 21).panel;
}

}  // namespace

TEST_CASE("classify") {
    CHECK(severity_of(make_term(TermKind::Edges)) == Severity::Endogenous);
    CHECK(severity_of(make_term(TermKind::GwespOtp)) == Severity::Endogenous);
    CHECK(severity_of(make_term(TermKind::MemoryStability)) == Severity::LaggedSafe);
    CHECK(severity_of(bound(TermKind::EdgeCov, "primary", Binding::Lagged)) == Severity::LaggedSafe);
    CHECK(severity_of(bound(TermKind::NodeIcov, "idegsqrt", Binding::Lagged)) == Severity::LaggedSafe);
    CHECK(severity_of(bound(TermKind::NodeIcov, "idegsqrt", Binding::Contemporaneous)) == Severity::Tautological);
    CHECK(severity_of(bound(TermKind::NodeOcov, "odegsqrt", Binding::Contemporaneous)) == Severity::Tautological);
    // in-ties explained by out-degrees of the same wave
    CHECK(severity_of(bound(TermKind::NodeIcov, "odegsqrt", Binding::Contemporaneous)) == Severity::Circular);
    // raw attribute of unknown provenance read at the dependent wave
    CHECK(severity_of(bound(TermKind::NodeIcov, "score", Binding::Contemporaneous)) == Severity::Circular);
    // fixed source waves
    CHECK(severity_of(bound(TermKind::NodeIcov, "idegsqrt", Binding::Lagged, 1)) == Severity::LaggedSafe);
    CHECK(severity_of(bound(TermKind::NodeIcov, "idegsqrt", Binding::Lagged, 3)) == Severity::Tautological);
    CHECK(severity_of(bound(TermKind::NodeIcov, "score", Binding::Lagged, 3)) == Severity::Circular);
}

TEST_CASE("classify the fixture specs") {
    const auto flawed = flawed_spec();
    const auto findings = classify(flawed.terms, flawed.derived, 2);
    REQUIRE(findings.size() == 13);
    int taut = 0, circ = 0;
    for (const auto& f : findings) {
        taut += f.severity == Severity::Tautological;
        circ += f.severity == Severity::Circular;
        CHECK(f.dependent_wave == 2);
        CHECK_FALSE(f.explanation.empty());
        if (is_leaking(f)) {
            REQUIRE(f.source_wave.has_value());
            CHECK(*f.source_wave == 2);
        }
    }
    CHECK(taut == 2);
    CHECK(circ == 1);

    const auto corrected = corrected_spec();
    for (const auto& f : classify(corrected.terms, corrected.derived, 2)) CHECK_FALSE(is_leaking(f));
}

TEST_CASE("divergence") {
    ArmSummary a{0.2, 0.01, {1, 2, 3}, {3, 2, 1}};
    ArmSummary b = a;
    CHECK(divergence(a, b) == 0.0);
    b.mean_density = 0.25;
    b.mean_indegree[1] = 2.5;
    CHECK(divergence(a, b) == doctest::Approx(0.05 + 0.5));
    CHECK(divergence(a, b) == divergence(b, a));
}

TEST_CASE("perturbation probe") {
    const Panel panel = classroom();
    const auto spec = flawed_spec();
    const auto split = holdout_split(panel, 3, spec.terms, spec.derived, true);

    SUBCASE("a used degree covariate fills the network") {
        const auto model = flawed_model(2.3);
        const auto r = perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 10.0, 40, chain(1)});
        CHECK(r.perturbed.mean_density > 0.9);
        CHECK(r.baseline.mean_density < 0.6);
        CHECK(r.uses_covariate);
        CHECK(r.divergence > 3.0 * r.noise);
    }
    SUBCASE("density grows with the constant") {
        const auto model = flawed_model(0.6);
        double last = -1.0;
        for (double c : {2.0, 5.0, 10.0}) {
            const auto r = perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, c, 40, chain(2)});
            CHECK(r.perturbed.mean_density > last);
            last = r.perturbed.mean_density;
        }
    }
    SUBCASE("an unused covariate") {
        const auto model = flawed_model(0.0);
        const auto r = perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 10.0, 40, chain(3)});
        CHECK_FALSE(r.uses_covariate);
        CHECK(r.divergence <= 3.0 * r.noise);
    }
    SUBCASE("several covariates at once") {
        auto model = flawed_model(0.6);
        for (std::size_t k = 0; k < model.terms.size(); ++k)
            if (model.terms[k].kind == TermKind::NodeOcov) model.theta[k] = 0.6;
        const auto one = perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 5.0, 40, chain(5)});
        const auto both =
            perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 5.0, 40, chain(5), {"odegsqrt"}});
        CHECK(both.covariate == "idegsqrt+odegsqrt");
        CHECK(both.perturbed.mean_density > one.perturbed.mean_density);
        CHECK(both.baseline.mean_density == one.baseline.mean_density);
    }
    SUBCASE("bad input") {
        const auto model = flawed_model(1.0);
        CHECK_THROWS_AS(perturbation_probe({model, spec.derived, split, "nope", std::nullopt, 10.0, 40, chain(4)}),
                        ValidationError);
        CHECK_THROWS_AS(perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 10.0, 2, chain(4)}),
                        ValidationError);
        CHECK_THROWS_AS(
            perturbation_probe({model, spec.derived, split, "idegsqrt", std::nullopt, 10.0, 40, chain(4), {"nope"}}),
            ValidationError);
    }
}
