#include "netpanel/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace netpanel {

namespace {

struct KindName {
    TermKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {TermKind::Edges, "edges"},
    {TermKind::Mutual, "mutual"},
    {TermKind::TTriple, "ttriple"},
    {TermKind::CTriple, "ctriple"},
    {TermKind::TransitiveTies, "transitive_ties"},
    {TermKind::GwespOtp, "gwesp_otp"},
    {TermKind::GwespItp, "gwesp_itp"},
    {TermKind::GwIndegree, "gw_indegree"},
    {TermKind::GwOutdegree, "gw_outdegree"},
    {TermKind::TwoPath, "twopath"},
    {TermKind::NodeIcov, "node_icov"},
    {TermKind::NodeOcov, "node_ocov"},
    {TermKind::NodeIfactor, "node_ifactor"},
    {TermKind::NodeOfactor, "node_ofactor"},
    {TermKind::NodeMatch, "node_match"},
    {TermKind::EdgeCov, "edge_cov"},
    {TermKind::MemoryStability, "memory_stability"},
};

std::string fmt_decay(double d) {
    std::ostringstream os;
    os << d;
    return os.str();
}

}  // namespace

std::string to_string(TermKind kind) {
    for (const auto& kn : kKindNames)
        if (kn.kind == kind) return kn.name;
    return "unknown";
}

std::string to_string(Binding binding) {
    switch (binding) {
        case Binding::Endogenous: return "Endogenous";
        case Binding::Lagged: return "Lagged";
        case Binding::Contemporaneous: return "Contemporaneous";
    }
    return "unknown";
}

TermKind parse_term_kind(const std::string& name) {
    for (const auto& kn : kKindNames)
        if (name == kn.name) return kn.kind;
    std::string valid;
    for (const auto& kn : kKindNames) {
        if (!valid.empty()) valid += ", ";
        valid += kn.name;
    }
    throw ValidationError("unknown term '" + name + "'; valid kinds: " + valid);
}

Binding parse_binding(const std::string& name) {
    if (name == "Endogenous") return Binding::Endogenous;
    if (name == "Lagged") return Binding::Lagged;
    if (name == "Contemporaneous") return Binding::Contemporaneous;
    throw ValidationError("unknown binding '" + name + "' (expected Endogenous, Lagged or Contemporaneous)");
}

bool is_weighted(TermKind kind) noexcept {
    return kind == TermKind::GwespOtp || kind == TermKind::GwespItp || kind == TermKind::GwIndegree ||
           kind == TermKind::GwOutdegree;
}

bool is_node_covariate_term(TermKind kind) noexcept {
    return kind == TermKind::NodeIcov || kind == TermKind::NodeOcov || kind == TermKind::NodeIfactor ||
           kind == TermKind::NodeOfactor || kind == TermKind::NodeMatch;
}

bool is_covariate_term(TermKind kind) noexcept {
    return is_node_covariate_term(kind) || kind == TermKind::EdgeCov;
}

bool is_structural(TermKind kind) noexcept {
    return !is_covariate_term(kind) && kind != TermKind::MemoryStability;
}

std::string TermSpec::label() const {
    std::string s = to_string(kind);
    if (!attr.empty()) {
        s += "(" + attr + ")";
    } else if (is_weighted(kind)) {
        s += "(" + fmt_decay(effective_decay()) + ")";
    }
    return s;
}

TermSpec make_term(TermKind kind, std::string attr, std::optional<double> decay) {
    TermSpec t;
    t.kind = kind;
    t.attr = std::move(attr);
    t.decay = decay;
    if (kind == TermKind::MemoryStability || is_covariate_term(kind)) {
        t.binding = Binding::Lagged;
    } else {
        t.binding = Binding::Endogenous;
    }
    return t;
}

void validate_term(const TermSpec& term) {
    const std::string name = to_string(term.kind);
    if (term.decay && !is_weighted(term.kind)) {
        throw ValidationError("decay given for non-weighted term '" + name + "'");
    }
    if (term.decay && !(*term.decay >= 0.0)) {
        throw ValidationError("decay for '" + name + "' must be nonnegative");
    }
    if (is_covariate_term(term.kind)) {
        if (term.attr.empty()) throw ValidationError("term '" + name + "' requires an attr");
        if (term.binding == Binding::Endogenous) {
            throw ValidationError("covariate term '" + term.label() + "' must be Lagged or Contemporaneous");
        }
    } else {
        if (!term.attr.empty()) throw ValidationError("term '" + name + "' takes no attr");
        if (term.source_wave) throw ValidationError("term '" + name + "' takes no source_wave");
    }
    if (term.kind == TermKind::MemoryStability && term.binding != Binding::Lagged) {
        throw ValidationError("memory_stability must have binding Lagged");
    }
    if (is_structural(term.kind) && term.binding != Binding::Endogenous) {
        throw ValidationError("structural term '" + name + "' must have binding Endogenous");
    }
}

// CovariateTable -----------------------------------------------------------

void CovariateTable::set_numeric(const std::string& name, std::vector<double> values) {
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<int> codes(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        codes[k] = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), values[k]) - sorted.begin());
    }
    numeric_[name] = std::move(values);
    codes_[name] = std::move(codes);
}

void CovariateTable::set_factor(const std::string& name, const std::vector<std::string>& labels) {
    std::vector<std::string> levels = labels;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<int> codes(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
        codes[k] = static_cast<int>(std::lower_bound(levels.begin(), levels.end(), labels[k]) - levels.begin());
    }
    numeric_.erase(name);
    codes_[name] = std::move(codes);
}

void CovariateTable::set_dyadic(const std::string& name, DyadMatrix matrix) { dyadic_[name] = std::move(matrix); }

void CovariateTable::set_constant(const std::string& name, double value, std::size_t n) {
    set_numeric(name, std::vector<double>(n, value));
}

bool CovariateTable::contains(const std::string& name) const {
    return codes_.count(name) || dyadic_.count(name);
}

const std::vector<double>& CovariateTable::numeric(const std::string& name) const {
    auto it = numeric_.find(name);
    if (it == numeric_.end()) {
        if (codes_.count(name)) throw ValidationError("covariate '" + name + "' is a factor, numeric values needed");
        throw ValidationError("missing covariate '" + name + "'");
    }
    return it->second;
}

const std::vector<int>& CovariateTable::factor_codes(const std::string& name) const {
    auto it = codes_.find(name);
    if (it == codes_.end()) throw ValidationError("missing covariate '" + name + "'");
    return it->second;
}

const DyadMatrix& CovariateTable::dyadic(const std::string& name) const {
    auto it = dyadic_.find(name);
    if (it == dyadic_.end()) throw ValidationError("missing dyadic covariate '" + name + "'");
    return it->second;
}

std::vector<std::string> CovariateTable::names() const {
    std::set<std::string> all;
    for (const auto& [k, v] : codes_) all.insert(k);
    for (const auto& [k, v] : dyadic_) all.insert(k);
    return {all.begin(), all.end()};
}

// TermEvaluator ------------------------------------------------------------

TermEvaluator::TermEvaluator(std::vector<TermSpec> terms, const CovariateTable& covariates, std::size_t n)
    : terms_(std::move(terms)), bound_(terms_.size()), n_(n) {
    for (std::size_t k = 0; k < terms_.size(); ++k) {
        const auto& t = terms_[k];
        validate_term(t);
        auto& b = bound_[k];
        switch (t.kind) {
            case TermKind::NodeIcov:
            case TermKind::NodeOcov: b.node = &covariates.numeric(t.attr); break;
            case TermKind::NodeIfactor:
            case TermKind::NodeOfactor:
            case TermKind::NodeMatch: b.codes = &covariates.factor_codes(t.attr); break;
            case TermKind::EdgeCov: b.dyad = &covariates.dyadic(t.attr); break;
            default: break;
        }
        if ((b.node && b.node->size() != n) || (b.codes && b.codes->size() != n) || (b.dyad && b.dyad->n != n)) {
            throw ValidationError("covariate '" + t.attr + "' does not match network size " + std::to_string(n));
        }
        if (is_weighted(t.kind)) {
            const double a = t.effective_decay();
            b.scale = std::exp(a);
            b.ratio = 1.0 - std::exp(-a);
            b.powers.resize(n + 1);
            double v = 1.0;
            for (auto& pw : b.powers) {
                pw = v;
                v *= b.ratio;
            }
        }
    }
}

std::vector<double> TermEvaluator::values(const Network& current, const Network& previous) const {
    std::vector<double> out(terms_.size());
    values(current, previous, out);
    return out;
}

void TermEvaluator::values(const Network& current, const Network& previous, std::span<double> out) const {
    for (std::size_t k = 0; k < terms_.size(); ++k) out[k] = value_of(k, current, previous);
}

void TermEvaluator::change(const Network& current, const Network& previous, NodeIndex i, NodeIndex j,
                           std::span<double> out) const {
    for (std::size_t k = 0; k < terms_.size(); ++k) out[k] = change_of(k, current, previous, i, j);
}

double TermEvaluator::value_of(std::size_t k, const Network& x, const Network& prev) const {
    const auto& b = bound_[k];
    const std::size_t n = x.size();
    double s = 0.0;
    switch (terms_[k].kind) {
        case TermKind::Edges: return static_cast<double>(x.edge_count());
        case TermKind::Mutual:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = i + 1; j < n; ++j) s += x.tie(i, j) && x.tie(j, i);
            return s;
        case TermKind::TTriple:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j) {
                    if (!x.tie(i, j)) continue;
                    for (NodeIndex h = 0; h < n; ++h)
                        if (h != i && h != j) s += x.tie(j, h) && x.tie(i, h);
                }
            return s;
        case TermKind::CTriple:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j) {
                    if (!x.tie(i, j)) continue;
                    for (NodeIndex h = 0; h < n; ++h)
                        if (h != i && h != j) s += x.tie(j, h) && x.tie(h, i);
                }
            return s / 3.0;
        case TermKind::TransitiveTies:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j)
                    if (x.tie(i, j) && shared_partners(x, i, j, PartnerType::OTP) > 0) s += 1.0;
            return s;
        case TermKind::GwespOtp:
        case TermKind::GwespItp: {
            const auto type = terms_[k].kind == TermKind::GwespOtp ? PartnerType::OTP : PartnerType::ITP;
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j)
                    if (x.tie(i, j)) s += 1.0 - std::pow(b.ratio, shared_partners(x, i, j, type));
            return b.scale * s;
        }
        case TermKind::GwIndegree:
            for (NodeIndex i = 0; i < n; ++i) s += 1.0 - std::pow(b.ratio, x.indegree(i));
            return b.scale * s;
        case TermKind::GwOutdegree:
            for (NodeIndex i = 0; i < n; ++i) s += 1.0 - std::pow(b.ratio, x.outdegree(i));
            return b.scale * s;
        case TermKind::TwoPath:
            for (NodeIndex h = 0; h < n; ++h) {
                double recip = 0.0;
                for (NodeIndex i = 0; i < n; ++i) recip += x.tie(i, h) && x.tie(h, i);
                s += static_cast<double>(x.indegree(h)) * x.outdegree(h) - recip;
            }
            return s;
        case TermKind::NodeIcov:
            for (NodeIndex j = 0; j < n; ++j) s += x.indegree(j) * (*b.node)[j];
            return s;
        case TermKind::NodeOcov:
            for (NodeIndex i = 0; i < n; ++i) s += x.outdegree(i) * (*b.node)[i];
            return s;
        case TermKind::NodeIfactor:
            for (NodeIndex j = 0; j < n; ++j)
                if ((*b.codes)[j] != 0) s += x.indegree(j);
            return s;
        case TermKind::NodeOfactor:
            for (NodeIndex i = 0; i < n; ++i)
                if ((*b.codes)[i] != 0) s += x.outdegree(i);
            return s;
        case TermKind::NodeMatch:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j)
                    if (x.tie(i, j) && (*b.codes)[i] == (*b.codes)[j]) s += 1.0;
            return s;
        case TermKind::EdgeCov:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j)
                    if (x.tie(i, j)) s += (*b.dyad)(i, j);
            return s;
        case TermKind::MemoryStability:
            for (NodeIndex i = 0; i < n; ++i)
                for (NodeIndex j = 0; j < n; ++j)
                    if (i != j && x.tie(i, j) == prev.tie(i, j)) s += 1.0;
            return s;
    }
    return s;
}

double TermEvaluator::change_of(std::size_t k, const Network& x, const Network& prev, NodeIndex i,
                                NodeIndex j) const {
    const auto& b = bound_[k];
    const std::size_t n = x.size();
    const int xij = x.tie(i, j) ? 1 : 0;
    // Two-paths a->h->c with (i, j) itself taken as absent.
    auto paths = [&](NodeIndex a, NodeIndex c) -> std::size_t {
        const auto r = x.row(a);
        const auto col = x.column(c);
        std::size_t c2 = 0;
        for (NodeIndex h = 0; h < n; ++h) c2 += r[h] & col[h];
        if (xij) {
            if (a == i) c2 -= x.tie(j, c);
            if (c == j) c2 -= x.tie(a, i);
        }
        return c2;
    };
    double s = 0.0;
    switch (terms_[k].kind) {
        case TermKind::Edges: return 1.0;
        case TermKind::Mutual: return x.tie(j, i) ? 1.0 : 0.0;
        case TermKind::TTriple:
            for (NodeIndex h = 0; h < n; ++h) {
                if (h == i || h == j) continue;
                s += (x.tie(j, h) && x.tie(i, h)) + (x.tie(h, i) && x.tie(h, j)) + (x.tie(i, h) && x.tie(h, j));
            }
            return s;
        case TermKind::CTriple:
            for (NodeIndex h = 0; h < n; ++h)
                if (h != i && h != j) s += x.tie(j, h) && x.tie(h, i);
            return s;
        case TermKind::TransitiveTies: {
            if (paths(i, j) > 0) s += 1.0;
            for (NodeIndex m = 0; m < n; ++m) {
                if (m == i || m == j) continue;
                // tie i->m closed by the new path i->j->m
                if (x.tie(i, m) && x.tie(j, m) && paths(i, m) == 0) s += 1.0;
                // tie m->j closed by the new path m->i->j
                if (x.tie(m, j) && x.tie(m, i) && paths(m, j) == 0) s += 1.0;
            }
            return s;
        }
        case TermKind::GwespOtp: {
            // partners h of edge a->c with a->h->c
            s += b.scale * (1.0 - b.powers[paths(i, j)]);
            for (NodeIndex m = 0; m < n; ++m) {
                if (m == i || m == j) continue;
                if (x.tie(i, m) && x.tie(j, m)) s += b.powers[paths(i, m)];
                if (x.tie(m, j) && x.tie(m, i)) s += b.powers[paths(m, j)];
            }
            return s;
        }
        case TermKind::GwespItp: {
            // partners h of edge a->c with c->h->a
            s += b.scale * (1.0 - b.powers[paths(j, i)]);
            for (NodeIndex m = 0; m < n; ++m) {
                if (m == i || m == j) continue;
                if (x.tie(m, i) && x.tie(j, m)) s += b.powers[paths(i, m)];
                if (x.tie(j, m) && x.tie(m, i)) s += b.powers[paths(m, j)];
            }
            return s;
        }
        case TermKind::GwIndegree: return b.powers[static_cast<std::size_t>(x.indegree(j) - xij)];
        case TermKind::GwOutdegree: return b.powers[static_cast<std::size_t>(x.outdegree(i) - xij)];
        case TermKind::TwoPath: {
            const int xji = x.tie(j, i) ? 1 : 0;
            return static_cast<double>(x.outdegree(j) - xji + x.indegree(i) - xji);
        }
        case TermKind::NodeIcov: return (*b.node)[j];
        case TermKind::NodeOcov: return (*b.node)[i];
        case TermKind::NodeIfactor: return (*b.codes)[j] != 0 ? 1.0 : 0.0;
        case TermKind::NodeOfactor: return (*b.codes)[i] != 0 ? 1.0 : 0.0;
        case TermKind::NodeMatch: return (*b.codes)[i] == (*b.codes)[j] ? 1.0 : 0.0;
        case TermKind::EdgeCov: return (*b.dyad)(i, j);
        case TermKind::MemoryStability: return prev.tie(i, j) ? 1.0 : -1.0;
    }
    return s;
}

// Free functions -------------------------------------------------------------

double statistic_value(const TermSpec& term, const StatisticContext& ctx) {
    TermEvaluator ev({term}, ctx.covariates, ctx.current.size());
    return ev.values(ctx.current, ctx.previous)[0];
}

double change_statistic(const TermSpec& term, const StatisticContext& ctx, NodeIndex i, NodeIndex j) {
    if (i == j) throw ValidationError("change statistic requested for a self-dyad");
    TermEvaluator ev({term}, ctx.covariates, ctx.current.size());
    double out = 0.0;
    ev.change(ctx.current, ctx.previous, i, j, std::span<double>(&out, 1));
    return out;
}

std::vector<double> statistic_vector(std::span<const TermSpec> terms, const StatisticContext& ctx) {
    TermEvaluator ev({terms.begin(), terms.end()}, ctx.covariates, ctx.current.size());
    return ev.values(ctx.current, ctx.previous);
}

// Binding --------------------------------------------------------------------

WaveIndex covariate_source_wave(const TermSpec& term, WaveIndex dependent_wave) {
    if (term.source_wave) return *term.source_wave;
    if (term.binding == Binding::Contemporaneous) return dependent_wave;
    if (dependent_wave == 0) throw ValidationError("lagged term '" + term.label() + "' has no previous wave");
    return dependent_wave - 1;
}

CovariateTable bind_covariates(const Panel& panel, std::span<const TermSpec> terms,
                               std::span<const DerivedDeclaration> derived, WaveIndex dependent_wave,
                               std::span<const CovariateOverride> overrides) {
    CovariateTable table;
    std::map<std::string, WaveIndex> bound_from;
    const std::size_t n = panel.node_count();

    for (const auto& term : terms) {
        if (!is_covariate_term(term.kind)) continue;
        validate_term(term);
        const std::string& name = term.attr;

        if (term.kind == TermKind::EdgeCov) {
            auto it = panel.dyad_covariates.find(name);
            if (it == panel.dyad_covariates.end()) throw ValidationError("missing dyadic covariate '" + name + "'");
            table.set_dyadic(name, it->second);
            continue;
        }

        const auto decl = std::find_if(derived.begin(), derived.end(),
                                       [&](const DerivedDeclaration& d) { return d.name == name; });
        const auto cov = panel.node_covariates.find(name);
        const bool is_static = decl == derived.end() && cov != panel.node_covariates.end() && cov->second.is_static();

        WaveIndex source = 0;
        if (!is_static) {
            source = covariate_source_wave(term, dependent_wave);
            if (auto prior = bound_from.find(name); prior != bound_from.end() && prior->second != source) {
                throw ValidationError("covariate '" + name + "' is bound to waves " + std::to_string(prior->second + 1) +
                                      " and " + std::to_string(source + 1) + " by different terms");
            }
            bound_from[name] = source;
        }

        const auto override_it = std::find_if(overrides.begin(), overrides.end(), [&](const CovariateOverride& o) {
            return o.name == name && (is_static || o.wave == source);
        });
        if (override_it != overrides.end()) {
            if (override_it->values.size() != n) {
                throw ValidationError("override for '" + name + "' has wrong length");
            }
            table.set_numeric(name, override_it->values);
            continue;
        }

        if (decl != derived.end()) {
            if (source >= panel.wave_count()) {
                throw LeakageError("term '" + term.label() + "' reads wave " + std::to_string(source + 1) +
                                       ", which is not available for covariate resolution",
                                   {term.label()});
            }
            table.set_numeric(name, apply_transform(panel.waves[source], decl->transform));
            continue;
        }
        if (cov == panel.node_covariates.end()) throw ValidationError("missing covariate '" + name + "'");
        const NodeCovariate& c = cov->second;
        const std::size_t w = is_static ? 0 : source;
        if (w >= c.wave_count()) {
            throw LeakageError("term '" + term.label() + "' reads covariate '" + name + "' at wave " +
                                   std::to_string(w + 1) + ", which is not available",
                               {term.label()});
        }
        if (c.kind == CovariateKind::Numeric) {
            table.set_numeric(name, c.numeric[w]);
        } else {
            if (term.kind == TermKind::NodeIcov || term.kind == TermKind::NodeOcov) {
                throw ValidationError("term '" + term.label() + "' needs a numeric covariate; '" + name +
                                      "' is a factor");
            }
            table.set_factor(name, c.labels[w]);
        }
    }
    return table;
}

}  // namespace netpanel
