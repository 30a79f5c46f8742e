#pragma once

#include "cgl/graph.hpp"

#include <string>
#include <vector>

namespace cgl {

enum class CentralityKind { degree, kcore, pagerank, walk };

std::string to_string(CentralityKind kind);
CentralityKind parse_centrality_kind(const std::string& name);

struct CentralityOptions {
    CentralityKind kind = CentralityKind::degree;
    int walk_length = 2;
    double pagerank_alpha = 0.85;
    double pagerank_tol = 1e-12;
    int pagerank_max_iter = 10000;
    /// Entries below this are raised to it. Non-positive disables clamping.
    double clamp_eps = 1e-6;
};

/// Diagonal of a centrality matrix.
struct CentralityVector {
    CentralityKind kind = CentralityKind::degree;
    int walk_length = 0;
    VectorXd values;
    /// Set when at least one entry was clamped.
    bool clamped = false;
    std::vector<Index> clamped_nodes;
};

/// Core number of every node by bucket peeling.
std::vector<int> kcore(const Graph& g);

/// Stationary vector of the damped random walk; dangling nodes jump uniformly.
/// Throws ConvergenceError when the L1 residual stays above tol.
VectorXd pagerank(const Graph& g, double alpha = 0.85, double tol = 1e-12, int max_iter = 10000);

/// Number of walks of the given length leaving each node, A^length * 1.
VectorXd walk_count(const Graph& g, int length);

/// Raw centrality, with PageRank mapped to 1 / (1 - PR(i)).
CentralityVector centrality_matrix(const Graph& g, const CentralityOptions& options);
CentralityVector centrality_matrix(const Graph& g, CentralityKind kind, double clamp_eps = 1e-6);

}  // namespace cgl
