#pragma once

#include "cgl/nn.hpp"

#include <cstdint>
#include <vector>

namespace cgl {

/// Two cliques of the given size joined by one bridge edge; labels mark the clique.
Graph two_cliques(Index clique_size);

/// Random train / val / test split of the first `count` indices.
void split_indices(Index count, double train_frac, double val_frac, std::uint64_t seed, std::vector<Index>& train,
                   std::vector<Index>& val, std::vector<Index>& test);

/// signal onehot(label mod dim) + noise * N(0, 1) per row.
MatrixXd noisy_label_features(const Labels& labels, Index dim, double noise, std::uint64_t seed);

/// Node task on two_cliques with features signal * onehot(label) + noise * N(0, 1).
NodeTask two_clique_task(Index clique_size, Index feature_dim, double noise, std::uint64_t seed);

struct TwoBlockOptions {
    Index block_size = 60;
    Index feature_dim = 4;
    /// Sparse block: every node links to this many uniformly random block nodes.
    Index sparse_links = 2;
    double sparse_noise = 0.4;
    double dense_p_in = 0.3;
    double dense_p_out = 0.01;
    double dense_noise = 1.5;
};

/// Disjoint union of a sparse block with label-independent edges and clean
/// features, and a dense homophilic block with noisy features.
struct TwoBlockTask {
    NodeTask task;
    std::vector<Index> sparse_nodes;
    std::vector<Index> dense_nodes;
};

TwoBlockTask two_block_task(std::uint64_t seed, const TwoBlockOptions& options = {});

/// Graph classification: class 0 is two bridged cliques, class 1 a ring of
/// the same size. Training labels are flipped with probability label_noise.
GraphDataset two_clique_graphs(Index count, double label_noise, std::uint64_t seed);

}  // namespace cgl
