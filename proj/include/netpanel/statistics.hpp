#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpanel/graph.hpp"

namespace netpanel {

enum class TermKind {
    Edges,
    Mutual,
    TTriple,
    CTriple,
    TransitiveTies,
    GwespOtp,
    GwespItp,
    GwIndegree,
    GwOutdegree,
    TwoPath,
    NodeIcov,
    NodeOcov,
    NodeIfactor,
    NodeOfactor,
    NodeMatch,
    EdgeCov,
    MemoryStability,
};

inline constexpr TermKind kAllTermKinds[] = {
    TermKind::Edges,       TermKind::Mutual,      TermKind::TTriple,     TermKind::CTriple,
    TermKind::TransitiveTies, TermKind::GwespOtp, TermKind::GwespItp,    TermKind::GwIndegree,
    TermKind::GwOutdegree, TermKind::TwoPath,     TermKind::NodeIcov,    TermKind::NodeOcov,
    TermKind::NodeIfactor, TermKind::NodeOfactor, TermKind::NodeMatch,   TermKind::EdgeCov,
    TermKind::MemoryStability,
};

/// When a term's inputs are fixed relative to the dependent wave:
/// structural terms are Endogenous, memory terms and predetermined covariates
/// Lagged, and covariates read from the dependent wave itself Contemporaneous.
enum class Binding { Endogenous, Lagged, Contemporaneous };

/// ln 2, the default for geometrically weighted terms.
inline constexpr double kDefaultDecay = 0.693;

std::string to_string(TermKind kind);
std::string to_string(Binding binding);
/// Throws ValidationError listing the valid names.
TermKind parse_term_kind(const std::string& name);
Binding parse_binding(const std::string& name);

bool is_weighted(TermKind kind) noexcept;
bool is_node_covariate_term(TermKind kind) noexcept;
bool is_covariate_term(TermKind kind) noexcept;
bool is_structural(TermKind kind) noexcept;

struct TermSpec {
    TermKind kind = TermKind::Edges;
    std::optional<double> decay;
    std::string attr;
    Binding binding = Binding::Endogenous;
    /// Fixed wave the covariate is read from. When empty the wave follows
    /// from the binding relative to the dependent wave.
    std::optional<WaveIndex> source_wave;

    double effective_decay() const noexcept { return decay.value_or(kDefaultDecay); }
    /// Short display name such as "node_icov(idegsqrt)" or "gwesp_otp(0.693)".
    std::string label() const;

    friend bool operator==(const TermSpec&, const TermSpec&) = default;
};

/// Term with the binding implied by its kind. Covariate terms default to Lagged.
TermSpec make_term(TermKind kind, std::string attr = {}, std::optional<double> decay = {});

/// Checks the TermSpec invariants; throws ValidationError.
void validate_term(const TermSpec& term);

/// Declares that `name` is computed from a network wave by `transform`.
struct DerivedDeclaration {
    std::string name;
    AttributeTransform transform = AttributeTransform::SqrtIndegree;
};

/// Covariate values resolved for one dependent wave.
class CovariateTable {
public:
    void set_numeric(const std::string& name, std::vector<double> values);
    void set_factor(const std::string& name, const std::vector<std::string>& labels);
    void set_dyadic(const std::string& name, DyadMatrix matrix);
    /// Replaces the values of a numeric or factor entry with a constant.
    void set_constant(const std::string& name, double value, std::size_t n);

    bool contains(const std::string& name) const;
    bool has_numeric(const std::string& name) const { return numeric_.count(name) != 0; }
    const std::vector<double>& numeric(const std::string& name) const;
    /// Level codes with 0 for the reference (lowest) level. Numeric covariates
    /// are coded by their sorted distinct values.
    const std::vector<int>& factor_codes(const std::string& name) const;
    const DyadMatrix& dyadic(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, std::vector<double>> numeric_;
    std::map<std::string, std::vector<int>> codes_;
    std::map<std::string, DyadMatrix> dyadic_;
};

struct StatisticContext {
    const Network& current;
    const Network& previous;
    const CovariateTable& covariates;
};

/// Per-term statistics over a fixed term list with covariates resolved once.
/// The sampler and the estimators evaluate through this.
class TermEvaluator {
public:
    TermEvaluator(std::vector<TermSpec> terms, const CovariateTable& covariates, std::size_t n);

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<TermSpec>& terms() const noexcept { return terms_; }

    void values(const Network& current, const Network& previous, std::span<double> out) const;
    std::vector<double> values(const Network& current, const Network& previous) const;
    /// s(x with x_ij = 1) - s(x with x_ij = 0) for every term.
    void change(const Network& current, const Network& previous, NodeIndex i, NodeIndex j,
                std::span<double> out) const;

private:
    struct Bound {
        const std::vector<double>* node = nullptr;
        const std::vector<int>* codes = nullptr;
        const DyadMatrix* dyad = nullptr;
        double ratio = 0.0;  // 1 - exp(-decay)
        double scale = 1.0;  // exp(decay)
        std::vector<double> powers;  // ratio^k, k = 0..n
    };

    double value_of(std::size_t k, const Network& x, const Network& prev) const;
    double change_of(std::size_t k, const Network& x, const Network& prev, NodeIndex i, NodeIndex j) const;

    std::vector<TermSpec> terms_;
    std::vector<Bound> bound_;
    std::size_t n_ = 0;
};

double statistic_value(const TermSpec& term, const StatisticContext& ctx);
double change_statistic(const TermSpec& term, const StatisticContext& ctx, NodeIndex i, NodeIndex j);
std::vector<double> statistic_vector(std::span<const TermSpec> terms, const StatisticContext& ctx);

/// Replaces the covariate values stored for `name` at wave `wave`.
struct CovariateOverride {
    std::string name;
    WaveIndex wave = 0;
    std::vector<double> values;
};

/// Wave a covariate term reads from when modelling `dependent_wave`.
WaveIndex covariate_source_wave(const TermSpec& term, WaveIndex dependent_wave);

/// Resolves every covariate term against the panel for one dependent wave.
/// Derived attributes are recomputed from their source wave. Throws
/// LeakageError when a source wave is not in the panel and ValidationError on
/// a missing covariate or conflicting bindings of one name.
CovariateTable bind_covariates(const Panel& panel, std::span<const TermSpec> terms,
                               std::span<const DerivedDeclaration> derived, WaveIndex dependent_wave,
                               std::span<const CovariateOverride> overrides = {});

}  // namespace netpanel
