#include "netpanel/saom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "netpanel/parallel.hpp"

namespace netpanel {

namespace {

struct EffectName {
    SaomEffectKind kind;
    const char* name;
};

constexpr EffectName kEffectNames[] = {
    {SaomEffectKind::Outdegree, "outdegree"},
    {SaomEffectKind::Reciprocity, "reciprocity"},
    {SaomEffectKind::TransitiveTies, "transitive_ties"},
    {SaomEffectKind::GwespTransitive, "gwesp_transitive"},
    {SaomEffectKind::GwespCyclic, "gwesp_cyclic"},
    {SaomEffectKind::IndegreePopularitySqrt, "indegree_popularity_sqrt"},
    {SaomEffectKind::OutdegreePopularity, "outdegree_popularity"},
    {SaomEffectKind::OutdegreeActivitySqrt, "outdegree_activity_sqrt"},
    {SaomEffectKind::Ego, "ego"},
    {SaomEffectKind::Alter, "alter"},
    {SaomEffectKind::Same, "same"},
    {SaomEffectKind::Dyadic, "dyadic"},
};

bool is_gwesp(SaomEffectKind k) { return k == SaomEffectKind::GwespTransitive || k == SaomEffectKind::GwespCyclic; }

}  // namespace

std::string to_string(SaomEffectKind kind) {
    for (const auto& e : kEffectNames)
        if (e.kind == kind) return e.name;
    return "unknown";
}

SaomEffectKind parse_saom_effect(const std::string& name) {
    for (const auto& e : kEffectNames)
        if (name == e.name) return e.kind;
    std::string valid;
    for (const auto& e : kEffectNames) {
        if (!valid.empty()) valid += ", ";
        valid += e.name;
    }
    throw ValidationError("unknown SAOM effect '" + name + "'; valid effects: " + valid);
}

bool is_covariate_effect(SaomEffectKind kind) noexcept {
    return kind == SaomEffectKind::Ego || kind == SaomEffectKind::Alter || kind == SaomEffectKind::Same ||
           kind == SaomEffectKind::Dyadic;
}

std::string SaomEffect::label() const {
    std::string s = to_string(kind);
    if (!attr.empty()) s += "(" + attr + ")";
    return s;
}

void SaomModel::validate() const {
    if (effects.size() != beta.size()) {
        throw ValidationError("SAOM has " + std::to_string(effects.size()) + " effects but " +
                              std::to_string(beta.size()) + " parameters");
    }
    for (double r : rates)
        if (!(r >= 0.0)) throw ValidationError("SAOM rates must be nonnegative");
    for (const auto& e : effects) {
        if (is_covariate_effect(e.kind) && e.attr.empty()) {
            throw ValidationError("effect '" + to_string(e.kind) + "' requires an attr");
        }
        if (e.decay && !is_gwesp(e.kind)) {
            throw ValidationError("decay given for non-weighted effect '" + to_string(e.kind) + "'");
        }
    }
}

std::vector<SaomEffect> saom_effects_from_terms(std::span<const TermSpec> terms) {
    std::vector<SaomEffect> out;
    for (const auto& t : terms) {
        SaomEffect e;
        e.attr = t.attr;
        switch (t.kind) {
            case TermKind::Edges: e.kind = SaomEffectKind::Outdegree; break;
            case TermKind::Mutual: e.kind = SaomEffectKind::Reciprocity; break;
            case TermKind::TransitiveTies: e.kind = SaomEffectKind::TransitiveTies; break;
            case TermKind::GwespOtp: e.kind = SaomEffectKind::GwespTransitive; e.decay = t.decay; break;
            case TermKind::GwespItp: e.kind = SaomEffectKind::GwespCyclic; e.decay = t.decay; break;
            case TermKind::GwIndegree: e.kind = SaomEffectKind::IndegreePopularitySqrt; break;
            case TermKind::TwoPath: e.kind = SaomEffectKind::OutdegreePopularity; break;
            case TermKind::GwOutdegree: e.kind = SaomEffectKind::OutdegreeActivitySqrt; break;
            case TermKind::NodeOfactor:
            case TermKind::NodeOcov: e.kind = SaomEffectKind::Ego; break;
            case TermKind::NodeIfactor:
            case TermKind::NodeIcov: e.kind = SaomEffectKind::Alter; break;
            case TermKind::NodeMatch: e.kind = SaomEffectKind::Same; break;
            case TermKind::EdgeCov: e.kind = SaomEffectKind::Dyadic; break;
            case TermKind::MemoryStability: continue;
            default:
                throw ValidationError("term '" + t.label() + "' has no actor-oriented counterpart");
        }
        out.push_back(e);
    }
    return out;
}

CovariateTable bind_saom_covariates(const Panel& panel, std::span<const SaomEffect> effects, WaveIndex dependent_wave) {
    std::vector<TermSpec> surrogate;
    for (const auto& e : effects) {
        if (!is_covariate_effect(e.kind)) continue;
        surrogate.push_back(make_term(e.kind == SaomEffectKind::Dyadic ? TermKind::EdgeCov : TermKind::NodeMatch, e.attr));
    }
    return bind_covariates(panel, surrogate, {}, dependent_wave);
}

// SaomEvaluator ------------------------------------------------------------------

SaomEvaluator::SaomEvaluator(std::vector<SaomEffect> effects, const CovariateTable& covariates, std::size_t n)
    : effects_(std::move(effects)), bound_(effects_.size()) {
    for (std::size_t k = 0; k < effects_.size(); ++k) {
        const auto& e = effects_[k];
        auto& b = bound_[k];
        switch (e.kind) {
            case SaomEffectKind::Ego:
            case SaomEffectKind::Alter:
                if (covariates.has_numeric(e.attr)) {
                    b.values = &covariates.numeric(e.attr);
                } else {
                    const auto& codes = covariates.factor_codes(e.attr);
                    b.indicator.resize(codes.size());
                    for (std::size_t i = 0; i < codes.size(); ++i) b.indicator[i] = codes[i] != 0 ? 1.0 : 0.0;
                }
                if (node_values(k).size() != n) throw ValidationError("covariate '" + e.attr + "' has wrong length");
                break;
            case SaomEffectKind::Same:
                b.codes = &covariates.factor_codes(e.attr);
                if (b.codes->size() != n) throw ValidationError("covariate '" + e.attr + "' has wrong length");
                break;
            case SaomEffectKind::Dyadic:
                b.dyad = &covariates.dyadic(e.attr);
                if (b.dyad->n != n) throw ValidationError("covariate '" + e.attr + "' has wrong size");
                break;
            default: break;
        }
        if (is_gwesp(e.kind)) {
            b.scale = std::exp(e.effective_decay());
            b.ratio = 1.0 - std::exp(-e.effective_decay());
            b.powers.resize(n + 1);
            double v = 1.0;
            for (auto& pw : b.powers) {
                pw = v;
                v *= b.ratio;
            }
        }
    }
    sqrt_.resize(n + 2);
    pow15_.resize(n + 2);
    for (std::size_t d = 0; d < n + 2; ++d) {
        sqrt_[d] = std::sqrt(static_cast<double>(d));
        pow15_[d] = std::pow(static_cast<double>(d), 1.5);
    }
}

const std::vector<double>& SaomEvaluator::node_values(std::size_t k) const {
    return bound_[k].values ? *bound_[k].values : bound_[k].indicator;
}

double SaomEvaluator::actor_statistic(std::size_t k, const Network& x, NodeIndex i) const {
    const auto& b = bound_[k];
    const std::size_t n = x.size();
    auto two_paths = [&](NodeIndex j) {
        int c = 0;
        for (NodeIndex h = 0; h < n; ++h)
            if (h != i && h != j) c += x.tie(i, h) && x.tie(h, j);
        return c;
    };
    auto cycles = [&](NodeIndex j) {
        int c = 0;
        for (NodeIndex h = 0; h < n; ++h)
            if (h != i && h != j) c += x.tie(j, h) && x.tie(h, i);
        return c;
    };
    double s = 0.0;
    if (effects_[k].kind == SaomEffectKind::OutdegreeActivitySqrt) {
        return pow15_[static_cast<std::size_t>(x.outdegree(i))];
    }
    for (NodeIndex j = 0; j < n; ++j) {
        if (j == i || !x.tie(i, j)) continue;
        switch (effects_[k].kind) {
            case SaomEffectKind::Outdegree: s += 1.0; break;
            case SaomEffectKind::Reciprocity: s += x.tie(j, i); break;
            case SaomEffectKind::TransitiveTies: s += two_paths(j) > 0; break;
            case SaomEffectKind::GwespTransitive: s += b.scale * (1.0 - b.powers[static_cast<std::size_t>(two_paths(j))]); break;
            case SaomEffectKind::GwespCyclic: s += b.scale * (1.0 - b.powers[static_cast<std::size_t>(cycles(j))]); break;
            case SaomEffectKind::IndegreePopularitySqrt: s += sqrt_[static_cast<std::size_t>(x.indegree(j))]; break;
            case SaomEffectKind::OutdegreePopularity: s += x.outdegree(j); break;
            case SaomEffectKind::Ego: s += node_values(k)[i]; break;
            case SaomEffectKind::Alter: s += node_values(k)[j]; break;
            case SaomEffectKind::Same: s += (*b.codes)[i] == (*b.codes)[j]; break;
            case SaomEffectKind::Dyadic: s += (*b.dyad)(i, j); break;
            case SaomEffectKind::OutdegreeActivitySqrt: break;
        }
    }
    return s;
}

double SaomEvaluator::actor_change(std::size_t k, const Network& x, NodeIndex i, NodeIndex j) const {
    const auto& b = bound_[k];
    const std::size_t n = x.size();
    const int xij = x.tie(i, j) ? 1 : 0;
    auto t = [&](NodeIndex a, NodeIndex c) { return !(a == i && c == j) && x.tie(a, c); };
    auto two_paths = [&](NodeIndex l) {
        int c = 0;
        for (NodeIndex h = 0; h < n; ++h)
            if (h != i && h != l) c += t(i, h) && t(h, l);
        return c;
    };
    switch (effects_[k].kind) {
        case SaomEffectKind::Outdegree: return 1.0;
        case SaomEffectKind::Reciprocity: return x.tie(j, i) ? 1.0 : 0.0;
        case SaomEffectKind::TransitiveTies: {
            double s = two_paths(j) > 0 ? 1.0 : 0.0;
            for (NodeIndex l = 0; l < n; ++l) {
                if (l == i || l == j) continue;
                if (t(i, l) && t(j, l) && two_paths(l) == 0) s += 1.0;
            }
            return s;
        }
        case SaomEffectKind::GwespTransitive: {
            double s = b.scale * (1.0 - b.powers[static_cast<std::size_t>(two_paths(j))]);
            for (NodeIndex l = 0; l < n; ++l) {
                if (l == i || l == j) continue;
                if (t(i, l) && t(j, l)) s += b.powers[static_cast<std::size_t>(two_paths(l))];
            }
            return s;
        }
        case SaomEffectKind::GwespCyclic: {
            int c = 0;
            for (NodeIndex h = 0; h < n; ++h)
                if (h != i && h != j) c += x.tie(j, h) && x.tie(h, i);
            return b.scale * (1.0 - b.powers[static_cast<std::size_t>(c)]);
        }
        case SaomEffectKind::IndegreePopularitySqrt:
            return sqrt_[static_cast<std::size_t>(x.indegree(j) - xij + 1)];
        case SaomEffectKind::OutdegreePopularity: return static_cast<double>(x.outdegree(j));
        case SaomEffectKind::OutdegreeActivitySqrt: {
            const auto d = static_cast<std::size_t>(x.outdegree(i) - xij);
            return pow15_[d + 1] - pow15_[d];
        }
        case SaomEffectKind::Ego: return node_values(k)[i];
        case SaomEffectKind::Alter: return node_values(k)[j];
        case SaomEffectKind::Same: return (*b.codes)[i] == (*b.codes)[j] ? 1.0 : 0.0;
        case SaomEffectKind::Dyadic: return (*b.dyad)(i, j);
    }
    return 0.0;
}

void SaomEvaluator::option_changes(const Network& x, NodeIndex i, std::vector<double>& out) const {
    const std::size_t n = x.size();
    const std::size_t q = effects_.size();
    out.assign(n * q, 0.0);
    // tp[l]: two-paths i->h->l, cyc[j]: paths j->h->i
    thread_local std::vector<int> tp, cyc;
    tp.assign(n, 0);
    cyc.assign(n, 0);
    const auto out_i = x.row(i);
    const auto in_i = x.column(i);
    for (NodeIndex h = 0; h < n; ++h) {
        if (h == i) continue;
        if (out_i[h]) {
            const auto r = x.row(h);
            for (NodeIndex l = 0; l < n; ++l) tp[l] += r[l];
        }
        if (in_i[h]) {
            const auto c = x.column(h);
            for (NodeIndex j = 0; j < n; ++j) cyc[j] += c[j];
        }
    }
    tp[i] = 0;
    cyc[i] = 0;
    const int out_deg = x.outdegree(i);
    // Ties i->l closed through j contribute weights that depend only on
    // tp[l] and on whether i->j is counted: index 0 for x_ij = 0, 1 for x_ij = 1.
    // gw holds one such pair per effect; only gwesp effects fill theirs.
    thread_local std::vector<double> closed[2];
    thread_local std::vector<std::vector<double>> gw;
    for (auto& c : closed) c.assign(n, 0.0);
    gw.resize(2 * q);
    for (NodeIndex l = 0; l < n; ++l) {
        if (!out_i[l]) continue;
        closed[0][l] = tp[l] == 0;
        closed[1][l] = tp[l] == 1;
    }
    for (std::size_t k = 0; k < q; ++k) {
        if (effects_[k].kind != SaomEffectKind::GwespTransitive) continue;
        const auto& pw = bound_[k].powers;
        gw[2 * k].assign(n, 0.0);
        gw[2 * k + 1].assign(n, 0.0);
        for (NodeIndex l = 0; l < n; ++l) {
            if (!out_i[l]) continue;
            gw[2 * k][l] = pw[static_cast<std::size_t>(tp[l])];
            gw[2 * k + 1][l] = tp[l] > 0 ? pw[static_cast<std::size_t>(tp[l] - 1)] : 0.0;
        }
    }
    for (NodeIndex j = 0; j < n; ++j) {
        if (j == i) continue;
        const int xij = out_i[j];
        const auto out_j = x.row(j);
        auto through_j = [&](const std::vector<double>& w) {
            double s = 0.0;
            for (NodeIndex l = 0; l < n; ++l) s += out_j[l] * w[l];
            return s;
        };
        double* row = &out[j * q];
        for (std::size_t k = 0; k < q; ++k) {
            const auto& b = bound_[k];
            switch (effects_[k].kind) {
                case SaomEffectKind::Outdegree: row[k] = 1.0; break;
                case SaomEffectKind::Reciprocity: row[k] = in_i[j]; break;
                case SaomEffectKind::TransitiveTies:
                    row[k] = (tp[j] > 0 ? 1.0 : 0.0) + through_j(closed[xij]);
                    break;
                case SaomEffectKind::GwespTransitive:
                    row[k] = b.scale * (1.0 - b.powers[static_cast<std::size_t>(tp[j])]) +
                             through_j(gw[2 * k + static_cast<std::size_t>(xij)]);
                    break;
                case SaomEffectKind::GwespCyclic: row[k] = b.scale * (1.0 - b.powers[static_cast<std::size_t>(cyc[j])]); break;
                case SaomEffectKind::IndegreePopularitySqrt:
                    row[k] = sqrt_[static_cast<std::size_t>(x.indegree(j) - xij + 1)];
                    break;
                case SaomEffectKind::OutdegreePopularity: row[k] = x.outdegree(j); break;
                case SaomEffectKind::OutdegreeActivitySqrt: {
                    const auto d = static_cast<std::size_t>(out_deg - xij);
                    row[k] = pow15_[d + 1] - pow15_[d];
                    break;
                }
                case SaomEffectKind::Ego: row[k] = node_values(k)[i]; break;
                case SaomEffectKind::Alter: row[k] = node_values(k)[j]; break;
                case SaomEffectKind::Same: row[k] = (*b.codes)[i] == (*b.codes)[j] ? 1.0 : 0.0; break;
                case SaomEffectKind::Dyadic: row[k] = (*b.dyad)(i, j); break;
            }
        }
    }
}

std::vector<double> SaomEvaluator::network_statistics(const Network& x) const {
    std::vector<double> s(effects_.size(), 0.0);
    for (std::size_t k = 0; k < effects_.size(); ++k)
        for (NodeIndex i = 0; i < x.size(); ++i) s[k] += actor_statistic(k, x, i);
    return s;
}

double objective(const SaomModel& model, const ObjectiveContext& ctx, const Network& candidate) {
    model.validate();
    const std::size_t n = ctx.current.size();
    if (candidate.size() != n) throw ValidationError("candidate network has the wrong size");
    int differences = 0;
    for (NodeIndex a = 0; a < n; ++a)
        for (NodeIndex c = 0; c < n; ++c) {
            if (candidate.tie(a, c) == ctx.current.tie(a, c)) continue;
            if (a != ctx.actor) {
                throw ValidationError("candidate changes tie (" + std::to_string(a) + ", " + std::to_string(c) +
                                      ") which actor " + std::to_string(ctx.actor) + " does not control");
            }
            ++differences;
        }
    if (differences > 1) throw ValidationError("candidate changes more than one tie");
    const SaomEvaluator ev(model.effects, ctx.covariates, n);
    double f = 0.0;
    for (std::size_t k = 0; k < ev.size(); ++k) f += model.beta[k] * ev.actor_statistic(k, candidate, ctx.actor);
    return f;
}

// Simulation -----------------------------------------------------------------------

namespace {

// Objective differences of every option relative to "no change".
void option_values(const SaomEvaluator& ev, std::span<const double> beta, const Network& x, NodeIndex i,
                   std::vector<double>& out) {
    const std::size_t n = x.size();
    const std::size_t q = ev.size();
    thread_local std::vector<double> changes;
    ev.option_changes(x, i, changes);
    out.assign(n + 1, 0.0);
    for (NodeIndex j = 0; j < n; ++j) {
        if (j == i) continue;
        double d = 0.0;
        for (std::size_t k = 0; k < q; ++k) d += beta[k] * changes[j * q + k];
        out[j + 1] = x.tie(i, j) ? -d : d;
    }
}

}  // namespace

std::vector<double> choice_probabilities(const SaomEvaluator& evaluator, std::span<const double> beta,
                                         const Network& x, NodeIndex actor) {
    std::vector<double> v;
    option_values(evaluator, beta, x, actor, v);
    double mx = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k)
        if (k != actor + 1) mx = std::max(mx, v[k]);
    std::vector<double> p(v.size(), 0.0);
    double z = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k == actor + 1) continue;
        p[k] = std::exp(v[k] - mx);
        z += p[k];
    }
    for (auto& q : p) q /= z;
    return p;
}

Network simulate_period(const SaomEvaluator& evaluator, std::span<const double> beta, double rate,
                        const Network& start, Rng& rng) {
    Network x = start;
    const std::size_t n = x.size();
    if (rate <= 0.0 || n < 2) return x;
    const double total_rate = rate * static_cast<double>(n);
    std::vector<double> p;
    double time = 0.0;
    while (true) {
        // Three uniforms per step so that runs with shifted parameters stay
        // aligned on a common random number stream.
        const double u_time = uniform01(rng);
        const double u_actor = uniform01(rng);
        const double u_choice = uniform01(rng);
        time += -std::log1p(-u_time) / total_rate;
        if (time > 1.0) break;
        const auto actor = std::min<NodeIndex>(static_cast<NodeIndex>(u_actor * static_cast<double>(n)), n - 1);
        p = choice_probabilities(evaluator, beta, x, actor);
        double acc = 0.0;
        std::size_t pick = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            acc += p[k];
            if (u_choice < acc) {
                pick = k;
                break;
            }
            if (p[k] > 0.0) pick = k;  // guards against rounding at the top end
        }
        if (pick > 0) x.toggle(actor, pick - 1);
    }
    return x;
}

Network simulate_period(const SaomModel& model, const CovariateTable& covariates, const Network& start,
                        std::uint64_t seed, std::size_t period) {
    model.validate();
    if (period >= model.rates.size()) throw ValidationError("period has no rate");
    const SaomEvaluator ev(model.effects, covariates, start.size());
    Rng rng(seed);
    return simulate_period(ev, model.beta, model.rates[period], start, rng);
}

int hamming_distance(const Network& a, const Network& b) {
    int d = 0;
    for (NodeIndex i = 0; i < a.size(); ++i)
        for (NodeIndex j = 0; j < a.size(); ++j)
            if (i != j) d += a.tie(i, j) != b.tie(i, j);
    return d;
}

// Method of moments ------------------------------------------------------------------

namespace {

class MomProblem {
public:
    MomProblem(std::span<const SaomEffect> effects, const Panel& panel) : panel_(panel) {
        const std::size_t n = panel.node_count();
        for (WaveIndex t = 1; t < panel.wave_count(); ++t) {
            tables_.push_back(bind_saom_covariates(panel, effects, t));
        }
        for (const auto& table : tables_) evaluators_.emplace_back(std::vector<SaomEffect>(effects.begin(), effects.end()), table, n);
        periods_ = panel.wave_count() - 1;
        for (std::size_t p = 0; p < periods_; ++p) {
            if (hamming_distance(panel.waves[p], panel.waves[p + 1]) > 0) active_.push_back(p);
        }
        observed_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
        for (std::size_t a = 0; a < active_.size(); ++a) {
            observed_[static_cast<Eigen::Index>(a)] = hamming_distance(panel.waves[active_[a]], panel.waves[active_[a] + 1]);
        }
        for (std::size_t a = 0; a < active_.size(); ++a) {
            const auto s = evaluators_[active_[a]].network_statistics(panel.waves[active_[a] + 1]);
            for (std::size_t k = 0; k < s.size(); ++k) observed_[static_cast<Eigen::Index>(active_.size() + k)] += s[k];
        }
    }

    std::size_t dim() const { return active_.size() + evaluators_.front().size(); }
    std::size_t rate_count() const { return active_.size(); }
    const std::vector<std::size_t>& active() const { return active_; }
    std::size_t periods() const { return periods_; }
    const Eigen::VectorXd& observed() const { return observed_; }

    Eigen::VectorXd simulate(const Eigen::VectorXd& theta, std::uint64_t seed) const {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.size());
        const std::size_t r = rate_count();
        std::vector<double> beta(theta.data() + r, theta.data() + theta.size());
        for (std::size_t a = 0; a < r; ++a) {
            const std::size_t p = active_[a];
            Rng rng(derive_seed(seed, {p}));
            const Network end = simulate_period(evaluators_[p], beta, theta[static_cast<Eigen::Index>(a)], panel_.waves[p], rng);
            s[static_cast<Eigen::Index>(a)] = hamming_distance(panel_.waves[p], end);
            const auto st = evaluators_[p].network_statistics(end);
            for (std::size_t k = 0; k < st.size(); ++k) s[static_cast<Eigen::Index>(r + k)] += st[k];
        }
        return s;
    }

private:
    const Panel& panel_;
    std::vector<CovariateTable> tables_;
    std::vector<SaomEvaluator> evaluators_;
    std::vector<std::size_t> active_;
    std::size_t periods_ = 0;
    Eigen::VectorXd observed_;
};

Eigen::VectorXd epsilons(const Eigen::VectorXd& theta, std::size_t rates, const SaomConfig& cfg) {
    Eigen::VectorXd eps(theta.size());
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        eps[k] = static_cast<std::size_t>(k) < rates ? cfg.rate_epsilon * std::max(theta[k], 1.0) : cfg.effect_epsilon;
    }
    return eps;
}

struct DerivativeRun {
    Eigen::MatrixXd derivative;
    Eigen::MatrixXd statistics;  // rows = simulations at theta
};

// Finite-difference derivative of expected statistics using common random numbers.
DerivativeRun estimate_derivative(const MomProblem& problem, const Eigen::VectorXd& theta, int iterations,
                                  std::uint64_t seed, const SaomConfig& cfg) {
    const auto q = theta.size();
    const Eigen::VectorXd eps = epsilons(theta, problem.rate_count(), cfg);
    auto runs = parallel_map(static_cast<std::size_t>(iterations), [&](std::size_t r) {
        const std::uint64_t s = derive_seed(seed, {r});
        Eigen::MatrixXd block(q, q + 1);
        block.col(0) = problem.simulate(theta, s);
        for (Eigen::Index k = 0; k < q; ++k) {
            Eigen::VectorXd shifted = theta;
            shifted[k] += eps[k];
            block.col(k + 1) = (problem.simulate(shifted, s) - block.col(0)) / eps[k];
        }
        return block;
    });
    DerivativeRun out;
    out.derivative = Eigen::MatrixXd::Zero(q, q);
    out.statistics.resize(iterations, q);
    for (int r = 0; r < iterations; ++r) {
        out.statistics.row(r) = runs[static_cast<std::size_t>(r)].col(0).transpose();
        out.derivative += runs[static_cast<std::size_t>(r)].rightCols(q);
    }
    out.derivative /= static_cast<double>(iterations);
    return out;
}

Eigen::VectorXd clamp_rates(Eigen::VectorXd theta, const Eigen::VectorXd& before, std::size_t rates) {
    for (std::size_t a = 0; a < rates; ++a) {
        const auto k = static_cast<Eigen::Index>(a);
        if (theta[k] <= 0.0) theta[k] = 0.5 * before[k];
    }
    return theta;
}

Eigen::VectorXd bounded_step(Eigen::VectorXd step, const Eigen::VectorXd& theta, std::size_t rates) {
    for (Eigen::Index k = 0; k < step.size(); ++k) {
        const double cap = static_cast<std::size_t>(k) < rates ? std::max(0.5 * theta[k], 0.1) : 1.0;
        step[k] = std::clamp(step[k], -cap, cap);
    }
    return step;
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[sv.size() - 1] <= 0.0) return std::numeric_limits<double>::infinity();
    return sv[0] / sv[sv.size() - 1];
}

}  // namespace

SaomFit estimate_mom(std::span<const SaomEffect> effects, const Panel& panel, const SaomConfig& cfg) {
    panel.validate();
    if (effects.empty()) throw ValidationError("SAOM needs at least one effect");
    SaomFit fit;
    fit.model.effects.assign(effects.begin(), effects.end());
    fit.model.rates.assign(panel.wave_count() - 1, 0.0);
    fit.model.beta.assign(effects.size(), 0.0);
    fit.model.validate();

    const MomProblem problem(effects, panel);
    auto& est = fit.estimate;
    for (std::size_t p = 0; p < problem.periods(); ++p) est.labels.push_back("rate_period_" + std::to_string(p + 1));
    for (const auto& e : effects) est.labels.push_back(e.label());
    const std::size_t total = problem.periods() + effects.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    est.theta_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(total));
    est.standard_errors = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(total), nan);
    est.covariance = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total), nan);
    est.convergence_tratios = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(total), nan);

    if (problem.rate_count() < problem.periods()) {
        for (std::size_t p = 0; p < problem.periods(); ++p) {
            if (std::find(problem.active().begin(), problem.active().end(), p) == problem.active().end()) {
                est.diagnostics.push_back("period " + std::to_string(p + 1) +
                                          " has no tie changes; its rate is at the boundary 0");
                est.standard_errors[static_cast<Eigen::Index>(p)] = 0.0;
            }
        }
        est.degenerate = true;
    }
    if (problem.rate_count() == 0) {
        est.diagnostics.push_back("no period has any change; effects are not identified");
        return fit;
    }

    const std::size_t r = problem.rate_count();
    const auto q = static_cast<Eigen::Index>(problem.dim());
    const Eigen::VectorXd& obs = problem.observed();
    const std::size_t n = panel.node_count();

    // Starting values: rate from the observed distance, outdegree from density.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(q);
    double density = 0.0;
    for (std::size_t a = 0; a < r; ++a) {
        theta[static_cast<Eigen::Index>(a)] = std::max(obs[static_cast<Eigen::Index>(a)] / static_cast<double>(n), 0.1);
        density += panel.waves[problem.active()[a] + 1].density();
    }
    density = std::clamp(density / static_cast<double>(r), 0.01, 0.99);
    for (std::size_t k = 0; k < effects.size(); ++k) {
        if (effects[k].kind == SaomEffectKind::Outdegree) {
            theta[static_cast<Eigen::Index>(r + k)] = std::log(density / (1.0 - density));
        }
    }

    // Phase 1: derivative matrix and a first Newton step.
    auto phase1 = estimate_derivative(problem, theta, cfg.phase1_iterations, derive_seed(cfg.seed, {1}), cfg);
    Eigen::MatrixXd d = phase1.derivative;
    const double cond = condition_number(d);
    if (!std::isfinite(cond) || cond > cfg.max_condition) {
        std::ostringstream os;
        os << "derivative matrix is near singular (condition number " << cond << ")";
        est.diagnostics.push_back(os.str());
        est.degenerate = true;
    }
    Eigen::MatrixXd d_used = (1.0 - cfg.diagonalize) * d;
    d_used.diagonal() += cfg.diagonalize * d.diagonal();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver(d_used);
    {
        const Eigen::VectorXd mean = phase1.statistics.colwise().mean().transpose();
        const Eigen::VectorXd step = bounded_step(solver.solve(mean - obs), theta, r);
        theta = clamp_rates(theta - step, theta, r);
    }

    // Phase 2: Robbins-Monro with gain halving across subphases; each
    // subphase ends at the average of its iterates.
    double gain = cfg.initial_gain;
    std::uint64_t counter = 0;
    for (int sub = 0; sub < cfg.phase2_subphases; ++sub) {
        const int iterations = static_cast<int>(std::ceil(std::pow(2.52, sub) * (7.0 + static_cast<double>(q))));
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
        for (int it = 0; it < iterations; ++it) {
            const Eigen::VectorXd s = problem.simulate(theta, derive_seed(cfg.seed, {2, counter++}));
            const Eigen::VectorXd step = bounded_step(gain * solver.solve(s - obs), theta, r);
            theta = clamp_rates(theta - step, theta, r);
            sum += theta;
        }
        theta = sum / static_cast<double>(iterations);
        gain *= 0.5;
        est.iterations += iterations;
    }

    // Phase 3: check the moment condition at the averaged estimate. The
    // derivative comes from the first check only. On failure Phase 2 goes on
    // with one more subphase, twice as long at half the gain, and the check
    // is repeated. The best check is what gets reported.
    DerivativeRun phase3;
    Eigen::VectorXd t(q);
    double best = std::numeric_limits<double>::infinity();
    int iterations = static_cast<int>(std::ceil(std::pow(2.52, std::max(cfg.phase2_subphases - 1, 0)) * (7.0 + static_cast<double>(q))));
    auto full_index = [&](Eigen::Index k) {
        return static_cast<std::size_t>(k) < r ? static_cast<Eigen::Index>(problem.active()[static_cast<std::size_t>(k)])
                                               : static_cast<Eigen::Index>(problem.periods()) + (k - static_cast<Eigen::Index>(r));
    };
    std::optional<Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>> restart_solver;
    for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
        const std::uint64_t seed3 = derive_seed(cfg.seed, {3, static_cast<std::uint64_t>(attempt)});
        Eigen::MatrixXd stats;
        if (attempt == 0) {
            const int with_derivative = std::clamp(cfg.phase3_derivative_iterations, 2, std::max(cfg.phase3_iterations, 2));
            phase3 = estimate_derivative(problem, theta, with_derivative, seed3, cfg);
            stats = phase3.statistics;
            Eigen::MatrixXd d3 = (1.0 - cfg.diagonalize) * phase3.derivative;
            d3.diagonal() += cfg.diagonalize * phase3.derivative.diagonal();
            restart_solver.emplace(d3);
        } else {
            iterations *= 2;
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(q);
            for (int it = 0; it < iterations; ++it) {
                const Eigen::VectorXd sim = problem.simulate(theta, derive_seed(cfg.seed, {2, counter++}));
                const Eigen::VectorXd step = bounded_step(gain * restart_solver->solve(sim - obs), theta, r);
                theta = clamp_rates(theta - step, theta, r);
                sum += theta;
            }
            theta = sum / static_cast<double>(iterations);
            gain *= 0.5;
            est.iterations += iterations;
        }
        const int have = static_cast<int>(stats.rows());
        if (cfg.phase3_iterations > have) {
            const int extra = cfg.phase3_iterations - have;
            auto rows = parallel_map(static_cast<std::size_t>(extra), [&](std::size_t r) {
                return problem.simulate(theta, derive_seed(seed3, {1, r}));
            });
            stats.conservativeResize(have + extra, q);
            for (int r = 0; r < extra; ++r) stats.row(have + r) = rows[static_cast<std::size_t>(r)].transpose();
        }
        const Eigen::VectorXd mean = stats.colwise().mean().transpose();
        const Eigen::MatrixXd centered = stats.rowwise() - mean.transpose();
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(stats.rows() - 1);
        for (Eigen::Index k = 0; k < q; ++k) {
            const double sd = std::sqrt(cov(k, k));
            t[k] = sd > 0.0 ? (mean[k] - obs[k]) / sd : (std::abs(mean[k] - obs[k]) < 1e-12 ? 0.0 : nan);
        }
        const double max_t = t.allFinite() ? t.cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
        {
            std::ostringstream os;
            os << "phase 3 check " << attempt + 1 << ": max |t| = " << max_t;
            est.diagnostics.push_back(os.str());
        }
        if (max_t < best) {
            best = max_t;
            const Eigen::MatrixXd dinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(phase3.derivative).pseudoInverse();
            const Eigen::MatrixXd cov_theta = dinv * cov * dinv.transpose();
            for (Eigen::Index a = 0; a < q; ++a) {
                est.theta_hat[full_index(a)] = theta[a];
                est.convergence_tratios[full_index(a)] = t[a];
                for (Eigen::Index b = 0; b < q; ++b) est.covariance(full_index(a), full_index(b)) = cov_theta(a, b);
                est.standard_errors[full_index(a)] = std::sqrt(std::max(cov_theta(a, a), 0.0));
            }
        }
        if (max_t < cfg.tratio_tolerance) {
            est.converged = true;
            break;
        }
    }
    // Inactive periods keep rate 0 and no covariance.
    for (std::size_t p = 0; p < problem.periods(); ++p) {
        if (std::find(problem.active().begin(), problem.active().end(), p) == problem.active().end()) {
            const auto k = static_cast<Eigen::Index>(p);
            est.theta_hat[k] = 0.0;
            est.convergence_tratios[k] = 0.0;
        }
    }
    if (!est.converged) est.diagnostics.push_back("did not reach the t-ratio criterion");

    for (std::size_t p = 0; p < problem.periods(); ++p) fit.model.rates[p] = est.theta_hat[static_cast<Eigen::Index>(p)];
    for (std::size_t k = 0; k < effects.size(); ++k) {
        fit.model.beta[k] = est.theta_hat[static_cast<Eigen::Index>(problem.periods() + k)];
    }
    return fit;
}

}  // namespace netpanel
