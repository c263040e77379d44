#pragma once

// Shared fixtures and brute-force oracles for the test suites. Nothing here
// calls into the statistic implementations it is used to check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "netpanel/graph.hpp"
#include "netpanel/statistics.hpp"

namespace testing_support {

using netpanel::Network;

inline Network random_network(std::size_t n, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(density);
    Network g(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && coin(rng)) g.toggle(i, j);
    return g;
}

inline Network from_edges(std::size_t n, std::initializer_list<std::pair<int, int>> edges) {
    Network g(n);
    for (auto [a, b] : edges) g.set_tie(static_cast<std::size_t>(a), static_cast<std::size_t>(b), true);
    return g;
}

inline int x(const Network& g, std::size_t a, std::size_t b) { return g.tie(a, b) ? 1 : 0; }

// Triple enumeration oracles ------------------------------------------------

inline double oracle_ttriple(const Network& g) {
    const std::size_t n = g.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t h = 0; h < n; ++h)
                if (i != j && j != h && i != h) s += x(g, i, j) * x(g, j, h) * x(g, i, h);
    return s;
}

inline double oracle_ctriple(const Network& g) {
    const std::size_t n = g.size();
    double s = 0;
    // one representative per cycle: the smallest index first
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            for (std::size_t h = i + 1; h < n; ++h)
                if (j != h) s += x(g, i, j) * x(g, j, h) * x(g, h, i);
    return s;
}

inline double oracle_transitive_ties(const Network& g) {
    const std::size_t n = g.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || !g.tie(i, j)) continue;
            bool closed = false;
            for (std::size_t h = 0; h < n && !closed; ++h) closed = h != i && h != j && g.tie(i, h) && g.tie(h, j);
            s += closed;
        }
    return s;
}

inline double oracle_twopath(const Network& g) {
    const std::size_t n = g.size();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t h = 0; h < n; ++h)
                if (i != j && h != i && h != j) s += x(g, i, h) * x(g, h, j);
    return s;
}

inline int oracle_partners(const Network& g, std::size_t i, std::size_t j, bool otp) {
    int c = 0;
    for (std::size_t h = 0; h < g.size(); ++h) {
        if (h == i || h == j) continue;
        c += otp ? x(g, i, h) * x(g, h, j) : x(g, j, h) * x(g, h, i);
    }
    return c;
}

// e^a * sum_k [1 - (1 - e^-a)^k] EP_k, built from the partner histogram.
inline double oracle_gwesp(const Network& g, double decay, bool otp) {
    const std::size_t n = g.size();
    std::vector<double> ep(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && g.tie(i, j)) ep[static_cast<std::size_t>(oracle_partners(g, i, j, otp))] += 1;
    double s = 0;
    for (std::size_t k = 1; k < n; ++k) s += (1.0 - std::pow(1.0 - std::exp(-decay), double(k))) * ep[k];
    return std::exp(decay) * s;
}

inline Network with_tie(const Network& g, std::size_t i, std::size_t j, bool on) {
    Network h = g;
    h.set_tie(i, j, on);
    return h;
}

}  // namespace testing_support

namespace testing_support {

// Mean and batch-means standard error of a correlated series.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe batch_mean_se(const std::vector<double>& v, std::size_t batches = 50) {
    const std::size_t len = v.size() / batches;
    double total = 0.0;
    for (double x : v) total += x;
    MeanSe out;
    out.mean = total / double(v.size());
    double ss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
        double m = 0.0;
        for (std::size_t k = 0; k < len; ++k) m += v[b * len + k];
        m /= double(len);
        ss += (m - out.mean) * (m - out.mean);
    }
    out.se = std::sqrt(ss / double(batches - 1) / double(batches));
    return out;
}

}  // namespace testing_support
