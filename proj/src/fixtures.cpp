#include "cgl/fixtures.hpp"

#include "cgl/rng.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace cgl {

Graph two_cliques(Index clique_size) {
    if (clique_size < 1) throw std::invalid_argument("two_cliques: clique size must be positive");
    std::vector<Edge> edges;
    for (Index b = 0; b < 2; ++b) {
        const Index off = b * clique_size;
        for (Index i = 0; i < clique_size; ++i) {
            for (Index j = i + 1; j < clique_size; ++j) edges.emplace_back(off + i, off + j);
        }
    }
    edges.emplace_back(clique_size - 1, clique_size);
    Labels y(static_cast<std::size_t>(2 * clique_size));
    for (Index i = 0; i < 2 * clique_size; ++i) y[i] = i < clique_size ? 0 : 1;
    return Graph(2 * clique_size, std::move(edges)).with_labels(std::move(y));
}

void split_indices(Index count, double train_frac, double val_frac, std::uint64_t seed, std::vector<Index>& train,
                   std::vector<Index>& val, std::vector<Index>& test) {
    std::vector<Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Index{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(count));
    const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(count));
    train.assign(order.begin(), order.begin() + n_train);
    val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    test.assign(order.begin() + n_train + n_val, order.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    std::sort(test.begin(), test.end());
}

namespace {

MatrixXd class_features(const Labels& y, Index dim, const std::vector<double>& noise, Rng& rng) {
    MatrixXd x = MatrixXd::Zero(static_cast<Index>(y.size()), dim);
    for (Index i = 0; i < x.rows(); ++i) {
        x(i, y[i] % dim) = 1.0;
        for (Index j = 0; j < dim; ++j) x(i, j) += noise[i] * rng.normal();
    }
    return x;
}

}  // namespace

MatrixXd noisy_label_features(const Labels& labels, Index dim, double noise, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("noisy_label_features: dim must be positive");
    Rng rng(seed);
    return class_features(labels, dim, std::vector<double>(labels.size(), noise), rng);
}

NodeTask two_clique_task(Index clique_size, Index feature_dim, double noise, std::uint64_t seed) {
    if (feature_dim < 2) throw std::invalid_argument("two_clique_task: need at least two feature columns");
    NodeTask t;
    t.graph = two_cliques(clique_size);
    t.labels = *t.graph.labels();
    const Rng root(seed);
    Rng rng = root.split(0);
    t.features = class_features(t.labels, feature_dim, std::vector<double>(t.labels.size(), noise), rng);
    split_indices(t.graph.num_nodes(), 0.3, 0.2, root.split(1).next(), t.train, t.val, t.test);
    return t;
}

TwoBlockTask two_block_task(std::uint64_t seed, const TwoBlockOptions& o) {
    const Index n = o.block_size;
    if (n < 4) throw std::invalid_argument("two_block_task: block too small");
    const Rng root(seed);
    Rng rng = root.split(0);
    Labels y(static_cast<std::size_t>(2 * n));
    for (auto& v : y) v = static_cast<int>(rng.below(2));
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < o.sparse_links; ++k) {
            const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - 1)));
            edges.emplace_back(i, j < i ? j : j + 1);
        }
    }
    for (Index i = n; i < 2 * n; ++i) {
        for (Index j = i + 1; j < 2 * n; ++j) {
            if (rng.bernoulli(y[i] == y[j] ? o.dense_p_in : o.dense_p_out)) edges.emplace_back(i, j);
        }
    }
    std::vector<double> noise(static_cast<std::size_t>(2 * n));
    for (Index i = 0; i < 2 * n; ++i) noise[i] = i < n ? o.sparse_noise : o.dense_noise;
    TwoBlockTask out;
    out.task.graph = Graph(2 * n, std::move(edges)).with_labels(y);
    out.task.labels = y;
    out.task.features = class_features(y, o.feature_dim, noise, rng);
    split_indices(2 * n, 0.4, 0.2, root.split(1).next(), out.task.train, out.task.val, out.task.test);
    for (Index i = 0; i < 2 * n; ++i) (i < n ? out.sparse_nodes : out.dense_nodes).push_back(i);
    return out;
}

GraphDataset two_clique_graphs(Index count, double label_noise, std::uint64_t seed) {
    if (count < 3) throw std::invalid_argument("two_clique_graphs: need at least three graphs");
    GraphDataset data;
    data.num_classes = 2;
    const Rng root(seed);
    Rng rng = root.split(0);
    for (Index s = 0; s < count; ++s) {
        const int label = static_cast<int>(s % 2);
        const Index k = 3 + static_cast<Index>(rng.below(4));
        Graph g;
        if (label == 0) {
            g = two_cliques(k).without_attributes();
        } else {
            std::vector<Edge> ring;
            for (Index i = 0; i < 2 * k; ++i) ring.emplace_back(i, (i + 1) % (2 * k));
            g = Graph(2 * k, std::move(ring));
        }
        MatrixXd x(g.num_nodes(), 2);
        for (Index i = 0; i < g.num_nodes(); ++i) {
            x(i, 0) = 1.0;
            x(i, 1) = 0.1 * rng.normal();
        }
        data.graphs.push_back({std::move(g), std::move(x), label});
    }
    split_indices(count, 0.6, 0.2, root.split(1).next(), data.train, data.val, data.test);
    Rng flip = root.split(2);
    for (Index i : data.train) {
        if (flip.bernoulli(label_noise)) data.graphs[i].label = 1 - data.graphs[i].label;
    }
    return data;
}

}  // namespace cgl
