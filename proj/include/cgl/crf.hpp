#pragma once

#include "cgl/graph.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cgl {

/// Any graph model mapping (graph, features) to per-node predictions.
using Predictor = std::function<MatrixXd(const Graph&, const MatrixXd&)>;

struct StructuralNeighbor {
    Graph graph;
    Index distance = 0;
};

/// Each neighbor flips d distinct off-diagonal pairs, with d drawn from
/// C(r, d) / 2^r. Features and labels are carried over unchanged.
std::vector<StructuralNeighbor> sample_structural_neighbors(const Graph& g, Index radius, int count,
                                                            std::uint64_t seed);

enum class CrfSpace { structure, feature };
enum class CrfSimilarity { cosine, binomial_prior, uniform };

CrfSimilarity parse_crf_similarity(const std::string& name);

struct CrfConfig {
    double sigma = 0.9;
    int iterations = 2;
    int neighbors = 5;
    CrfSpace space = CrfSpace::feature;
    /// Structure space: number of pair flips the prior ranges over.
    Index radius = 1;
    /// Feature space: perturbation budget and norm order.
    double eps = 0.1;
    double p = 2.0;
    CrfSimilarity similarity = CrfSimilarity::cosine;
    std::uint64_t seed = 0;
    /// Upper limit on model evaluations, checked before the first call.
    std::uint64_t max_model_calls = 100000;
};

/// Model evaluations made by crf_smooth: sum over k = 0..K of L^k.
std::uint64_t crf_model_calls(const CrfConfig& cfg);

/// Mean-field smoothing over a depth-K tree of sampled neighbors:
/// Y~(a) = (sigma Y(a) + (1 - sigma) sum_b g_ab Y~(b)) / (sigma + (1 - sigma) sum_b g_ab),
/// with Y~ = Y at the leaves. Cosine similarity is clamped to [0, 1].
MatrixXd crf_smooth(const Predictor& model, const Graph& g, const MatrixXd& x, const CrfConfig& cfg);

/// Lower bound on the number of graphs within Hamming radius r, over
/// n(n+1)/2 pair slots: 2^(H(e) L) / sqrt(4 n (n+1) e (1 - e)), e = r / L.
double neighborhood_lower_bound(Index n, Index r);
/// Exact sum_{d <= r} C(n(n+1)/2, d).
std::uint64_t neighborhood_count(Index n, Index r);

}  // namespace cgl
