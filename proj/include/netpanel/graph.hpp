#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netpanel/error.hpp"

namespace netpanel {

using NodeIndex = std::size_t;
using WaveIndex = std::size_t;

enum class DegreeMode { In, Out };

/// Directed binary network on a fixed node set with dense row-major storage.
/// Degrees are cached and kept in sync by toggle().
class Network {
public:
    Network() = default;
    explicit Network(std::size_t n);

    /// Builds from a row-major 0/1 matrix. Throws ValidationError on a
    /// non-binary entry or a self-loop.
    static Network from_matrix(std::size_t n, std::span<const int> entries);

    std::size_t size() const noexcept { return n_; }
    bool tie(NodeIndex i, NodeIndex j) const noexcept { return adj_[i * n_ + j] != 0; }
    void set_tie(NodeIndex i, NodeIndex j, bool value);
    void toggle(NodeIndex i, NodeIndex j);

    std::size_t edge_count() const noexcept { return edges_; }
    int indegree(NodeIndex j) const noexcept { return in_[j]; }
    int outdegree(NodeIndex i) const noexcept { return out_[i]; }
    double density() const noexcept;

    std::span<const std::uint8_t> row(NodeIndex i) const noexcept {
        return {adj_.data() + i * n_, n_};
    }
    /// Entry h is x_hj.
    std::span<const std::uint8_t> column(NodeIndex j) const noexcept {
        return {adjt_.data() + j * n_, n_};
    }

    Network complement() const;
    /// Returns the network with node k relabeled perm[k].
    Network permuted(std::span<const std::size_t> perm) const;

    friend bool operator==(const Network& a, const Network& b) noexcept {
        return a.n_ == b.n_ && a.adj_ == b.adj_;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> adj_;
    std::vector<std::uint8_t> adjt_;
    std::vector<int> in_;
    std::vector<int> out_;
    std::size_t edges_ = 0;
};

/// Square real-valued dyadic matrix, row-major.
struct DyadMatrix {
    std::size_t n = 0;
    std::vector<double> values;

    double operator()(NodeIndex i, NodeIndex j) const noexcept { return values[i * n + j]; }
};

enum class CovariateKind { Numeric, Factor };

/// A node covariate holding either one vector (static) or one per wave.
/// Factor covariates keep their raw labels in `labels`, numeric ones use `numeric`.
struct NodeCovariate {
    CovariateKind kind = CovariateKind::Numeric;
    std::vector<std::vector<double>> numeric;
    std::vector<std::vector<std::string>> labels;

    bool is_static() const noexcept {
        return kind == CovariateKind::Numeric ? numeric.size() == 1 : labels.size() == 1;
    }
    std::size_t wave_count() const noexcept {
        return kind == CovariateKind::Numeric ? numeric.size() : labels.size();
    }
};

struct Panel {
    std::vector<Network> waves;
    std::map<std::string, NodeCovariate> node_covariates;
    std::map<std::string, DyadMatrix> dyad_covariates;

    std::size_t node_count() const noexcept { return waves.empty() ? 0 : waves.front().size(); }
    std::size_t wave_count() const noexcept { return waves.size(); }

    /// Checks the panel invariants; throws ValidationError.
    void validate() const;
};

enum class AttributeTransform { SqrtIndegree, SqrtOutdegree };

AttributeTransform parse_transform(const std::string& name);
std::string to_string(AttributeTransform t);

struct DerivedAttribute {
    std::string name;
    WaveIndex source_wave = 0;
    AttributeTransform transform = AttributeTransform::SqrtIndegree;
    std::vector<double> values;
};

std::vector<int> degrees(const Network& net, DegreeMode mode);

std::vector<double> apply_transform(const Network& net, AttributeTransform transform);

DerivedAttribute derive_attribute(const Panel& panel, WaveIndex wave, AttributeTransform transform,
                                  std::string name = {});
DerivedAttribute derive_attribute(const Panel& panel, WaveIndex wave, const std::string& transform,
                                  std::string name = {});

/// Counts of ordered pairs by directed distance. Index d-1 holds pairs at
/// distance d for d = 1..max_bucket; `unreachable` holds the rest.
struct GeodesicDistribution {
    std::vector<std::size_t> by_distance;
    std::size_t unreachable = 0;
    // Finite distances above the bucket limit, kept apart unless pooling is on.
    std::size_t beyond = 0;

    std::size_t total() const noexcept;
};

/// max_bucket defaults to n-1, where nothing is pooled. A smaller bucket
/// limit pools longer distances into `unreachable` only when pool_beyond is set.
GeodesicDistribution geodesic_distribution(const Network& net, std::optional<std::size_t> max_bucket = {},
                                           bool pool_beyond = false);

enum class PartnerRelation { Edgewise, Dyadwise };
enum class PartnerType { OTP, ITP };

/// Number of shared partners of the ordered pair (i, j).
int shared_partners(const Network& net, NodeIndex i, NodeIndex j, PartnerType type);

/// Histogram over shared partner counts 0..n-2.
std::vector<std::size_t> shared_partner_counts(const Network& net, PartnerRelation relation, PartnerType type);

}  // namespace netpanel
