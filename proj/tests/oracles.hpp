#pragma once

// Independent reference implementations used only by the tests.

#include "cgl/graph.hpp"
#include "cgl/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using cgl::Edge;
using cgl::Graph;
using cgl::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline Graph random_graph(Index n, double p, std::uint64_t seed) {
    cgl::Rng rng(seed);
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (rng.bernoulli(p)) edges.emplace_back(i, j);
        }
    }
    return Graph(n, std::move(edges));
}

/// Random connected graph: a random spanning tree plus extra edges.
inline Graph random_connected_graph(Index n, double p, std::uint64_t seed) {
    cgl::Rng rng(seed);
    std::vector<Edge> edges;
    for (Index i = 1; i < n; ++i) edges.emplace_back(static_cast<Index>(rng.below(i)), i);
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (rng.bernoulli(p)) edges.emplace_back(i, j);
        }
    }
    return Graph(n, std::move(edges));
}

inline MatrixXd adjacency(const Graph& g) {
    MatrixXd a = MatrixXd::Zero(g.num_nodes(), g.num_nodes());
    for (const auto& [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
    return a;
}

/// Core numbers straight from the definition: for each k, prune nodes of
/// degree < k until none remain; core(i) is the last k at which i survives.
inline std::vector<int> kcore(const Graph& g) {
    const Index n = g.num_nodes();
    const MatrixXd a = adjacency(g);
    std::vector<int> core(static_cast<std::size_t>(n), 0);
    for (int k = 1; k <= n; ++k) {
        std::vector<bool> alive(static_cast<std::size_t>(n), true);
        bool changed = true;
        while (changed) {
            changed = false;
            for (Index i = 0; i < n; ++i) {
                if (!alive[i]) continue;
                int d = 0;
                for (Index j = 0; j < n; ++j) d += alive[j] && a(i, j) > 0 ? 1 : 0;
                if (d < k) {
                    alive[i] = false;
                    changed = true;
                }
            }
        }
        for (Index i = 0; i < n; ++i) {
            if (alive[i]) core[i] = k;
        }
    }
    return core;
}

/// Walks of the given length from each node, by explicit enumeration.
inline VectorXd walks(const Graph& g, int length) {
    VectorXd out = VectorXd::Zero(g.num_nodes());
    std::function<double(Index, int)> count = [&](Index at, int left) -> double {
        if (left == 0) return 1.0;
        double s = 0.0;
        for (Index j : g.neighbors(at)) s += count(j, left - 1);
        return s;
    };
    for (Index i = 0; i < g.num_nodes(); ++i) out[i] = count(i, length);
    return out;
}

/// Cheeger constants by scanning all subsets as sorted index vectors.
inline double cheeger_classical(const Graph& g) {
    const Index n = g.num_nodes();
    double best = std::numeric_limits<double>::infinity();
    for (Index size = 1; size <= n / 2; ++size) {
        std::vector<bool> pick(static_cast<std::size_t>(n), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
            double cut = 0.0;
            for (const auto& [u, v] : g.edges()) cut += pick[u] != pick[v] ? 1.0 : 0.0;
            best = std::min(best, cut / static_cast<double>(size));
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return best;
}

inline double cheeger_centrality(const Graph& g, const VectorXd& v) {
    const Index n = g.num_nodes();
    const double total = v.sum();
    double best = std::numeric_limits<double>::infinity();
    for (Index size = 1; size < n; ++size) {
        std::vector<bool> pick(static_cast<std::size_t>(n), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
            double mass = 0.0;
            for (Index i = 0; i < n; ++i) mass += pick[i] ? v[i] : 0.0;
            if (mass > 0.5 * total) continue;
            std::set<Index> boundary;
            for (const auto& [a, b] : g.edges()) {
                if (pick[a] && !pick[b]) boundary.insert(b);
                if (pick[b] && !pick[a]) boundary.insert(a);
            }
            best = std::min(best, static_cast<double>(boundary.size()) / mass);
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return best;
}

/// Minimum over all relabelings of alpha ||A1 - P A2 P^T||_F + beta ||X1 - P X2||_F.
inline double permutation_distance(const Graph& g1, const Graph& g2, double alpha, double beta) {
    const Index n = g1.num_nodes();
    const MatrixXd a1 = adjacency(g1), a2 = adjacency(g2);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) {
                const double d = a1(i, j) - a2(perm[i], perm[j]);
                s += d * d;
            }
        }
        double f = 0.0;
        if (g1.features() && g2.features()) {
            for (Index i = 0; i < n; ++i) f += (g1.features()->row(i) - g2.features()->row(perm[i])).squaredNorm();
        }
        best = std::min(best, alpha * std::sqrt(s) + beta * std::sqrt(f));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("cgl_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle
