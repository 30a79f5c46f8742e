#pragma once

#include "cgl/graph.hpp"

#include <cstdint>
#include <vector>

namespace cgl {

/// Stochastic block model. Each unordered pair is drawn independently with
/// the probability of its block pair; labels carry block membership.
Graph gen_sbm(const std::vector<Index>& sizes, const MatrixXd& probabilities, std::uint64_t seed);

/// Barabási–Albert graph: a seed of n0 nodes with r0 random edges, then one
/// node per step attaching to r distinct existing nodes with probability
/// proportional to degree + 1. Always has r0 + r * (n - n0) edges.
Graph gen_ba(Index n, Index n0, Index r0, Index r, std::uint64_t seed);

/// Expected average degree of gen_ba: 2r + 2 r0 / n - 2 n0 r / n.
double ba_average_degree(Index n, Index n0, Index r0, Index r);

struct SbbamSpec {
    std::vector<Index> block_sizes;
    std::vector<Index> ba_r;
    /// Per-block seed sizes; empty means n0_k = r_k.
    std::vector<Index> ba_n0;
    /// Per-block seed edge counts; empty means r0_k = r_k (r_k - 1) / 2.
    std::vector<Index> ba_r0;
    double p_off = 0.0;
    std::uint64_t seed = 0;

    /// Three blocks of 100 nodes with r = 5, 10, 15 and p_off = 0.1.
    static SbbamSpec reference(std::uint64_t seed);
};

/// K Barabási–Albert blocks joined by Bernoulli(p_off) cross-block edges.
Graph gen_sbbam(const SbbamSpec& spec);

struct RewireResult {
    Graph graph;
    /// Pairing before simplification; may hold self-loops and repeated pairs.
    std::vector<Edge> multigraph;
};

/// Configuration-model rewiring: every edge is broken into two stubs with
/// probability r, stubs are paired uniformly at random and the result is
/// simplified. Attributes are carried over.
RewireResult config_rewire_detailed(const Graph& g, double r, std::uint64_t seed);
Graph config_rewire(const Graph& g, double r, std::uint64_t seed);

}  // namespace cgl
