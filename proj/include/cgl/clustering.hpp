#pragma once

#include "cgl/graph.hpp"

#include <cstdint>
#include <vector>

namespace cgl {

struct KMeansOptions {
    int n_init = 10;
    int max_iter = 300;
    double tol = 1e-6;
};

struct ClusterResult {
    Partition partition;
    MatrixXd centroids;
    double inertia = 0.0;
    std::uint64_t seed = 0;
    /// Set when the best run ended with an unused cluster id.
    bool empty_cluster = false;
    /// Inertia after each Lloyd iteration of the winning restart.
    std::vector<double> inertia_history;
};

/// Lloyd's algorithm from k-means++ seeding; best of n_init restarts, ties to
/// the earliest restart. Empty clusters are re-seeded from the farthest point.
ClusterResult kmeans(const MatrixXd& points, int clusters, std::uint64_t seed, const KMeansOptions& options = {});

struct SpectralOptions {
    KMeansOptions kmeans;
    bool normalize_rows = false;
};

/// k-means on the rows of the top eigenvectors (largest algebraic
/// eigenvalues) of V^e2 A V^e3.
ClusterResult spectral_cluster(const Graph& g, const VectorXd& v, double e2, double e3, int clusters,
                               std::uint64_t seed, const SpectralOptions& options = {});

/// Adjusted mutual information with arithmetic-mean normalization.
double ami(const Partition& p1, const Partition& p2);
/// Adjusted Rand index.
double ari(const Partition& p1, const Partition& p2);
double mutual_information(const Partition& p1, const Partition& p2);
double entropy(const Partition& p);

}  // namespace cgl
