#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace cgl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

using Labels = std::vector<int>;

/// Unordered node pair stored with first < second.
using Edge = std::pair<Index, Index>;

/// Undirected simple graph with optional node features and labels.
///
/// Edges are normalized on construction: endpoints are ordered, duplicates
/// are merged and self-loops are dropped. The value is immutable afterwards.
class Graph {
public:
    Graph() = default;
    Graph(Index n, std::vector<Edge> edges);

    Index num_nodes() const { return n_; }
    Index num_edges() const { return static_cast<Index>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }

    std::span<const Index> neighbors(Index i) const {
        return {adj_.data() + offsets_[i], adj_.data() + offsets_[i + 1]};
    }
    Index degree(Index i) const { return offsets_[i + 1] - offsets_[i]; }
    VectorXd degrees() const;
    bool has_edge(Index i, Index j) const;

    MatrixXd dense_adjacency() const;
    SparseMatrix sparse_adjacency() const;

    const std::optional<MatrixXd>& features() const { return features_; }
    const std::optional<Labels>& labels() const { return labels_; }
    Graph with_features(MatrixXd x) const;
    Graph with_labels(Labels y) const;
    Graph without_attributes() const;

    /// Structural equality plus exact equality of attributes.
    friend bool operator==(const Graph& a, const Graph& b);

private:
    Index n_ = 0;
    std::vector<Edge> edges_;
    std::vector<Index> offsets_{0};
    std::vector<Index> adj_;
    std::optional<MatrixXd> features_;
    std::optional<Labels> labels_;
};

/// Node-to-cluster assignment with an explicit cluster count.
struct Partition {
    std::vector<int> assignment;
    int num_clusters = 0;

    static Partition from_labels(const std::vector<int>& labels);
    Index size() const { return static_cast<Index>(assignment.size()); }
};

// ---------------------------------------------------------------------------
// File formats
//
// Edge list: UTF-8 text, one "u v" pair per line, '#' starts a comment. A
// comment of the form "# nodes: N" fixes the node count so that isolated
// trailing nodes survive a round trip. Features and labels are headerless
// CSV, one row per node in node order.

Graph load_edge_list(const std::filesystem::path& path, std::optional<Index> n_hint = std::nullopt);
MatrixXd load_features(const std::filesystem::path& path, Index n);
Labels load_labels(const std::filesystem::path& path, Index n);

/// Writes edges.txt and, when present, features.csv and labels.csv.
void write_graph(const Graph& g, const std::filesystem::path& dir);
/// Inverse of write_graph.
Graph read_graph(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Statistics and distances

struct GraphStats {
    double edge_density = 0.0;
    std::optional<double> homophily;
    VectorXd degrees;
    Index min_degree = 0;
    Index max_degree = 0;
};

GraphStats graph_stats(const Graph& g);

/// Connected component id per node, ids assigned in order of first node.
std::vector<int> connected_components(const Graph& g, int* count = nullptr);
/// Largest shortest-path distance; requires a connected graph.
Index diameter(const Graph& g);
/// Subgraph induced on the kept nodes, reindexed in increasing order.
Graph induced_subgraph(const Graph& g, const std::vector<bool>& keep);

enum class NormKind { hamming, frobenius, spectral };

/// alpha * ||A1 - A2|| + beta * ||X1 - X2||_F at the identity alignment.
/// Hamming counts differing unordered pairs once.
double graph_distance(const Graph& g1, const Graph& g2, double alpha, double beta, NormKind norm);

/// Exhaustive minimum over node permutations (n <= 8).
double permutation_distance(const Graph& g1, const Graph& g2, double alpha, double beta);

}  // namespace cgl
