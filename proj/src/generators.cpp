#include "cgl/generators.hpp"

#include "cgl/rng.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace cgl {

Graph gen_sbm(const std::vector<Index>& sizes, const MatrixXd& probabilities, std::uint64_t seed) {
    const Index k = static_cast<Index>(sizes.size());
    if (probabilities.rows() != k || probabilities.cols() != k) {
        throw std::invalid_argument("gen_sbm: probability matrix must be K x K");
    }
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
            const double p = probabilities(a, b);
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("gen_sbm: probabilities must lie in [0, 1]");
            if (p != probabilities(b, a)) throw std::invalid_argument("gen_sbm: probability matrix must be symmetric");
        }
    }
    Labels block;
    for (Index b = 0; b < k; ++b) {
        if (sizes[b] < 0) throw std::invalid_argument("gen_sbm: negative block size");
        block.insert(block.end(), static_cast<std::size_t>(sizes[b]), static_cast<int>(b));
    }
    const Index n = static_cast<Index>(block.size());
    Rng rng(seed);
    std::vector<Edge> edges;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (rng.bernoulli(probabilities(block[i], block[j]))) edges.emplace_back(i, j);
        }
    }
    return Graph(n, std::move(edges)).with_labels(std::move(block));
}

namespace {

void check_ba(Index n, Index n0, Index r0, Index r) {
    if (n0 < 1 || n0 >= n) throw std::invalid_argument("gen_ba: requires 1 <= n0 < n");
    if (r < 0 || r > n0) throw std::invalid_argument("gen_ba: requires 0 <= r <= n0");
    if (r0 < 0 || r0 > n0 * (n0 - 1) / 2) throw std::invalid_argument("gen_ba: requires 0 <= r0 <= n0 (n0 - 1) / 2");
}

// Appends a Barabási–Albert graph on nodes [offset, offset + n).
void append_ba(std::vector<Edge>& edges, Index offset, Index n, Index n0, Index r0, Index r, Rng& rng) {
    check_ba(n, n0, r0, r);
    std::vector<double> weight(static_cast<std::size_t>(n), 1.0);

    // Seed graph: r0 distinct pairs drawn uniformly from the n0 seed nodes.
    std::vector<Edge> pairs;
    for (Index i = 0; i < n0; ++i) {
        for (Index j = i + 1; j < n0; ++j) pairs.emplace_back(i, j);
    }
    for (Index t = 0; t < r0; ++t) {
        const auto pick = t + static_cast<Index>(rng.below(static_cast<std::uint64_t>(pairs.size() - t)));
        std::swap(pairs[t], pairs[pick]);
        const auto [u, v] = pairs[t];
        edges.emplace_back(offset + u, offset + v);
        weight[u] += 1.0;
        weight[v] += 1.0;
    }

    std::vector<Index> chosen;
    for (Index node = n0; node < n; ++node) {
        chosen.clear();
        double total = 0.0;
        for (Index j = 0; j < node; ++j) total += weight[j];
        for (Index s = 0; s < r; ++s) {
            double target = rng.uniform() * total;
            Index pick = -1;
            for (Index j = 0; j < node; ++j) {
                if (std::find(chosen.begin(), chosen.end(), j) != chosen.end()) continue;
                pick = j;
                target -= weight[j];
                if (target < 0.0) break;
            }
            chosen.push_back(pick);
            total -= weight[pick];
        }
        for (Index j : chosen) {
            edges.emplace_back(offset + j, offset + node);
            weight[j] += 1.0;
        }
        weight[node] += static_cast<double>(r);
    }
}

}  // namespace

Graph gen_ba(Index n, Index n0, Index r0, Index r, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    append_ba(edges, 0, n, n0, r0, r, rng);
    return Graph(n, std::move(edges));
}

double ba_average_degree(Index n, Index n0, Index r0, Index r) {
    const double nn = static_cast<double>(n);
    return 2.0 * static_cast<double>(r) + 2.0 * static_cast<double>(r0) / nn -
           2.0 * static_cast<double>(n0) * static_cast<double>(r) / nn;
}

SbbamSpec SbbamSpec::reference(std::uint64_t seed) {
    SbbamSpec s;
    s.block_sizes = {100, 100, 100};
    s.ba_r = {5, 10, 15};
    s.p_off = 0.1;
    s.seed = seed;
    return s;
}

Graph gen_sbbam(const SbbamSpec& spec) {
    const std::size_t k = spec.block_sizes.size();
    if (k == 0) throw std::invalid_argument("gen_sbbam: no blocks");
    if (spec.ba_r.size() != k) throw std::invalid_argument("gen_sbbam: ba_r must have one entry per block");
    if (!spec.ba_n0.empty() && spec.ba_n0.size() != k) throw std::invalid_argument("gen_sbbam: ba_n0 size mismatch");
    if (!spec.ba_r0.empty() && spec.ba_r0.size() != k) throw std::invalid_argument("gen_sbbam: ba_r0 size mismatch");
    if (!(spec.p_off >= 0.0 && spec.p_off <= 1.0)) throw std::invalid_argument("gen_sbbam: p_off must lie in [0, 1]");

    Rng rng(spec.seed);
    std::vector<Edge> edges;
    Labels block;
    Index offset = 0;
    for (std::size_t b = 0; b < k; ++b) {
        const Index r = spec.ba_r[b];
        const Index n0 = spec.ba_n0.empty() ? r : spec.ba_n0[b];
        const Index r0 = spec.ba_r0.empty() ? r * (r - 1) / 2 : spec.ba_r0[b];
        Rng block_rng = rng.split(b);
        append_ba(edges, offset, spec.block_sizes[b], n0, r0, r, block_rng);
        block.insert(block.end(), static_cast<std::size_t>(spec.block_sizes[b]), static_cast<int>(b));
        offset += spec.block_sizes[b];
    }
    Rng cross = rng.split(k);
    const Index n = offset;
    for (Index i = 0; i < n; ++i) {
        for (Index j = i + 1; j < n; ++j) {
            if (block[i] != block[j] && cross.bernoulli(spec.p_off)) edges.emplace_back(i, j);
        }
    }
    return Graph(n, std::move(edges)).with_labels(std::move(block));
}

RewireResult config_rewire_detailed(const Graph& g, double r, std::uint64_t seed) {
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("config_rewire: r must lie in [0, 1]");
    Rng rng(seed);
    std::vector<Edge> multigraph;
    std::vector<Index> stubs;
    for (const auto& e : g.edges()) {
        if (rng.bernoulli(r)) {
            stubs.push_back(e.first);
            stubs.push_back(e.second);
        } else {
            multigraph.push_back(e);
        }
    }
    std::shuffle(stubs.begin(), stubs.end(), rng);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2) multigraph.emplace_back(stubs[i], stubs[i + 1]);

    Graph simple(g.num_nodes(), multigraph);
    if (g.features()) simple = simple.with_features(*g.features());
    if (g.labels()) simple = simple.with_labels(*g.labels());
    return {std::move(simple), std::move(multigraph)};
}

Graph config_rewire(const Graph& g, double r, std::uint64_t seed) {
    return config_rewire_detailed(g, r, seed).graph;
}

}  // namespace cgl
