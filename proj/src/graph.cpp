#include "netpanel/graph.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace netpanel {

Network::Network(std::size_t n) : n_(n), adj_(n * n, 0), adjt_(n * n, 0), in_(n, 0), out_(n, 0) {}

Network Network::from_matrix(std::size_t n, std::span<const int> entries) {
    if (entries.size() != n * n) {
        throw ValidationError("adjacency matrix has " + std::to_string(entries.size()) + " entries, expected " +
                              std::to_string(n * n));
    }
    Network net(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const int v = entries[i * n + j];
            if (v != 0 && v != 1) {
                throw ValidationError("non-binary entry " + std::to_string(v) + " at (" + std::to_string(i) + ", " +
                                      std::to_string(j) + ")");
            }
            if (i == j && v != 0) {
                throw ValidationError("self-loop at (" + std::to_string(i) + ", " + std::to_string(i) + ")");
            }
            if (v) net.set_tie(i, j, true);
        }
    }
    return net;
}

void Network::set_tie(NodeIndex i, NodeIndex j, bool value) {
    if (i == j) throw ValidationError("self-loops are not allowed");
    if (tie(i, j) != value) toggle(i, j);
}

void Network::toggle(NodeIndex i, NodeIndex j) {
    auto& cell = adj_[i * n_ + j];
    adjt_[j * n_ + i] ^= 1;
    if (cell) {
        cell = 0;
        --out_[i];
        --in_[j];
        --edges_;
    } else {
        cell = 1;
        ++out_[i];
        ++in_[j];
        ++edges_;
    }
}

double Network::density() const noexcept {
    if (n_ < 2) return 0.0;
    return static_cast<double>(edges_) / static_cast<double>(n_ * (n_ - 1));
}

Network Network::complement() const {
    Network out(n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            if (i != j && !tie(i, j)) out.toggle(i, j);
    return out;
}

Network Network::permuted(std::span<const std::size_t> perm) const {
    Network out(n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            if (tie(i, j)) out.toggle(perm[i], perm[j]);
    return out;
}

void Panel::validate() const {
    if (waves.size() < 2) throw ValidationError("a panel needs at least two waves");
    const std::size_t n = waves.front().size();
    for (std::size_t t = 0; t < waves.size(); ++t) {
        if (waves[t].size() != n) {
            throw ValidationError("wave " + std::to_string(t + 1) + " has " + std::to_string(waves[t].size()) +
                                  " nodes, expected " + std::to_string(n));
        }
    }
    for (const auto& [name, cov] : node_covariates) {
        if (dyad_covariates.count(name)) {
            throw ValidationError("covariate '" + name + "' is declared both as node and dyadic covariate");
        }
        const std::size_t k = cov.wave_count();
        if (k != 1 && k != waves.size()) {
            throw ValidationError("covariate '" + name + "' must be static or given for every wave");
        }
        for (std::size_t w = 0; w < k; ++w) {
            const std::size_t len = cov.kind == CovariateKind::Numeric ? cov.numeric[w].size() : cov.labels[w].size();
            if (len != n) throw ValidationError("covariate '" + name + "' has length " + std::to_string(len));
        }
    }
    for (const auto& [name, m] : dyad_covariates) {
        if (m.n != n || m.values.size() != n * n) {
            throw ValidationError("dyadic covariate '" + name + "' is not " + std::to_string(n) + "x" +
                                  std::to_string(n));
        }
    }
}

AttributeTransform parse_transform(const std::string& name) {
    if (name == "sqrt_indegree") return AttributeTransform::SqrtIndegree;
    if (name == "sqrt_outdegree") return AttributeTransform::SqrtOutdegree;
    throw ValidationError("unknown transform '" + name + "' (expected sqrt_indegree or sqrt_outdegree)");
}

std::string to_string(AttributeTransform t) {
    return t == AttributeTransform::SqrtIndegree ? "sqrt_indegree" : "sqrt_outdegree";
}

std::vector<int> degrees(const Network& net, DegreeMode mode) {
    const std::size_t n = net.size();
    std::vector<int> d(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (net.tie(i, j)) ++d[mode == DegreeMode::In ? j : i];
    return d;
}

std::vector<double> apply_transform(const Network& net, AttributeTransform transform) {
    const auto d = degrees(net, transform == AttributeTransform::SqrtIndegree ? DegreeMode::In : DegreeMode::Out);
    std::vector<double> v(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) v[k] = std::sqrt(static_cast<double>(d[k]));
    return v;
}

DerivedAttribute derive_attribute(const Panel& panel, WaveIndex wave, AttributeTransform transform, std::string name) {
    if (wave >= panel.waves.size()) {
        throw ValidationError("wave " + std::to_string(wave + 1) + " is out of range");
    }
    DerivedAttribute attr;
    attr.name = name.empty() ? to_string(transform) : std::move(name);
    attr.source_wave = wave;
    attr.transform = transform;
    attr.values = apply_transform(panel.waves[wave], transform);
    return attr;
}

DerivedAttribute derive_attribute(const Panel& panel, WaveIndex wave, const std::string& transform, std::string name) {
    return derive_attribute(panel, wave, parse_transform(transform), std::move(name));
}

std::size_t GeodesicDistribution::total() const noexcept {
    std::size_t s = unreachable + beyond;
    for (auto c : by_distance) s += c;
    return s;
}

GeodesicDistribution geodesic_distribution(const Network& net, std::optional<std::size_t> max_bucket,
                                           bool pool_beyond) {
    const std::size_t n = net.size();
    const std::size_t buckets = max_bucket.value_or(n > 0 ? n - 1 : 0);
    GeodesicDistribution out;
    out.by_distance.assign(buckets, 0);
    constexpr std::size_t unseen = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(n);
    std::deque<NodeIndex> queue;
    for (NodeIndex s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), unseen);
        dist[s] = 0;
        queue.assign(1, s);
        while (!queue.empty()) {
            const NodeIndex u = queue.front();
            queue.pop_front();
            const auto row = net.row(u);
            for (NodeIndex v = 0; v < n; ++v) {
                if (row[v] && dist[v] == unseen) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (NodeIndex t = 0; t < n; ++t) {
            if (t == s) continue;
            if (dist[t] == unseen) {
                ++out.unreachable;
            } else if (dist[t] <= buckets) {
                ++out.by_distance[dist[t] - 1];
            } else if (pool_beyond) {
                ++out.unreachable;
            } else {
                ++out.beyond;
            }
        }
    }
    return out;
}

int shared_partners(const Network& net, NodeIndex i, NodeIndex j, PartnerType type) {
    const std::size_t n = net.size();
    int count = 0;
    for (NodeIndex h = 0; h < n; ++h) {
        if (h == i || h == j) continue;
        if (type == PartnerType::OTP) {
            count += net.tie(i, h) && net.tie(h, j);
        } else {
            count += net.tie(j, h) && net.tie(h, i);
        }
    }
    return count;
}

std::vector<std::size_t> shared_partner_counts(const Network& net, PartnerRelation relation, PartnerType type) {
    const std::size_t n = net.size();
    std::vector<std::size_t> hist(n >= 2 ? n - 1 : 1, 0);
    for (NodeIndex i = 0; i < n; ++i) {
        for (NodeIndex j = 0; j < n; ++j) {
            if (i == j) continue;
            if (relation == PartnerRelation::Edgewise && !net.tie(i, j)) continue;
            ++hist[static_cast<std::size_t>(shared_partners(net, i, j, type))];
        }
    }
    return hist;
}

}  // namespace netpanel
