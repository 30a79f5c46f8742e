#include "cgl/crf.hpp"

#include "cgl/error.hpp"
#include "cgl/rng.hpp"
#include "cgl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace cgl {

namespace {

// Unordered pair with index k in row-major upper-triangular order.
Edge pair_of(std::uint64_t k, Index n) {
    Index i = 0;
    std::uint64_t row = static_cast<std::uint64_t>(n - 1);
    while (k >= row) {
        k -= row;
        ++i;
        --row;
    }
    return {i, i + 1 + static_cast<Index>(k)};
}

double log_binomial(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

double prior_weight(Index r, Index d) {
    return std::exp(log_binomial(static_cast<double>(r), static_cast<double>(d)) - static_cast<double>(r) * std::log(2.0));
}

double cosine(const MatrixXd& a, const MatrixXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(a.cwiseProduct(b).sum() / (na * nb), 0.0, 1.0);
}

struct Smoother {
    const Predictor& model;
    const CrfConfig& cfg;

    MatrixXd run(const Graph& g, const MatrixXd& x, int depth, const Rng& rng) const {
        MatrixXd base = model(g, x);
        if (depth == 0) return base;
        MatrixXd acc = MatrixXd::Zero(base.rows(), base.cols());
        double weight = 0.0;
        if (cfg.space == CrfSpace::structure) {
            const auto nbrs = sample_structural_neighbors(g, cfg.radius, cfg.neighbors, rng.split(0).next());
            for (int b = 0; b < cfg.neighbors; ++b) {
                const MatrixXd child = run(nbrs[b].graph, x, depth - 1, rng.split(b + 1));
                const double w = similarity(x, x, nbrs[b].distance);
                acc += w * child;
                weight += w;
            }
        } else {
            for (int b = 0; b < cfg.neighbors; ++b) {
                Rng local = rng.split(b + 1);
                Rng draw = local.split(0);
                const MatrixXd xb = x + sample_perturbation(x.rows(), x.cols(), cfg.eps, cfg.p, draw).z;
                const MatrixXd child = run(g, xb, depth - 1, local.split(1));
                const double w = similarity(x, xb, 0);
                acc += w * child;
                weight += w;
            }
        }
        const double denom = cfg.sigma + (1.0 - cfg.sigma) * weight;
        if (denom == 0.0) return base;
        return (cfg.sigma * base + (1.0 - cfg.sigma) * acc) / denom;
    }

    double similarity(const MatrixXd& a, const MatrixXd& b, Index distance) const {
        switch (cfg.similarity) {
            case CrfSimilarity::cosine: return cosine(a, b);
            case CrfSimilarity::binomial_prior: return prior_weight(cfg.radius, distance);
            case CrfSimilarity::uniform: return 1.0;
        }
        return 0.0;
    }
};

}  // namespace

std::vector<StructuralNeighbor> sample_structural_neighbors(const Graph& g, Index radius, int count,
                                                            std::uint64_t seed) {
    const Index n = g.num_nodes();
    const std::uint64_t pairs = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(std::max<Index>(n - 1, 0)) / 2;
    if (radius < 0 || static_cast<std::uint64_t>(radius) > pairs) {
        throw std::invalid_argument("sample_structural_neighbors: radius must lie in [0, n(n-1)/2]");
    }
    if (count < 0) throw std::invalid_argument("sample_structural_neighbors: negative count");
    Rng rng(seed);
    std::vector<StructuralNeighbor> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        std::uint64_t d = 0;
        int tries = 0;
        do {
            d = rng.binomial(static_cast<std::uint64_t>(radius), 0.5);
            if (++tries > 100) throw std::runtime_error("sample_structural_neighbors: cannot place flips");
        } while (d > pairs);
        // Floyd's algorithm for d distinct pair indices.
        std::unordered_set<std::uint64_t> chosen;
        for (std::uint64_t j = pairs - d; j < pairs; ++j) {
            const std::uint64_t t = rng.below(j + 1);
            chosen.insert(chosen.count(t) ? j : t);
        }
        std::vector<std::uint64_t> flips(chosen.begin(), chosen.end());
        std::sort(flips.begin(), flips.end());
        std::vector<Edge> edges;
        std::vector<Edge> toggles;
        for (std::uint64_t k : flips) toggles.push_back(pair_of(k, n));
        std::size_t t = 0;
        const auto& current = g.edges();
        std::size_t e = 0;
        // Merge the sorted edge list with the sorted toggles (symmetric difference).
        while (e < current.size() || t < toggles.size()) {
            if (t == toggles.size() || (e < current.size() && current[e] < toggles[t])) {
                edges.push_back(current[e++]);
            } else if (e == current.size() || toggles[t] < current[e]) {
                edges.push_back(toggles[t++]);
            } else {
                ++e;
                ++t;
            }
        }
        Graph h(n, std::move(edges));
        if (g.features()) h = h.with_features(*g.features());
        if (g.labels()) h = h.with_labels(*g.labels());
        out.push_back({std::move(h), static_cast<Index>(d)});
    }
    return out;
}

CrfSimilarity parse_crf_similarity(const std::string& name) {
    if (name == "cosine") return CrfSimilarity::cosine;
    if (name == "binomial_prior" || name == "binomial") return CrfSimilarity::binomial_prior;
    if (name == "uniform") return CrfSimilarity::uniform;
    throw std::invalid_argument("unknown similarity: " + name);
}

std::uint64_t crf_model_calls(const CrfConfig& cfg) {
    std::uint64_t total = 0;
    std::uint64_t level = 1;
    const std::uint64_t cap = std::numeric_limits<std::uint64_t>::max() / 4;
    for (int k = 0; k <= cfg.iterations; ++k) {
        total += level;
        if (total > cap) return cap;
        if (k < cfg.iterations) {
            if (level > cap / static_cast<std::uint64_t>(std::max(cfg.neighbors, 1))) return cap;
            level *= static_cast<std::uint64_t>(cfg.neighbors);
        }
    }
    return total;
}

MatrixXd crf_smooth(const Predictor& model, const Graph& g, const MatrixXd& x, const CrfConfig& cfg) {
    if (!(cfg.sigma >= 0.0 && cfg.sigma <= 1.0)) throw std::invalid_argument("crf_smooth: sigma must lie in [0, 1]");
    if (cfg.iterations < 0) throw std::invalid_argument("crf_smooth: iterations must be >= 0");
    if (cfg.neighbors < 1) throw std::invalid_argument("crf_smooth: need at least one neighbor");
    if (x.rows() != g.num_nodes()) throw ShapeError("crf_smooth: feature rows must equal node count");
    if (cfg.sigma == 1.0 || cfg.iterations == 0) return model(g, x);
    if (crf_model_calls(cfg) > cfg.max_model_calls) {
        throw ScaleError("crf_smooth: model call budget exceeded (" + std::to_string(crf_model_calls(cfg)) + ")");
    }
    const Smoother s{model, cfg};
    return s.run(g, x, cfg.iterations, Rng(cfg.seed));
}

double neighborhood_lower_bound(Index n, Index r) {
    if (n < 1) throw std::invalid_argument("neighborhood_lower_bound: n must be positive");
    const double slots = 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
    if (r < 0 || static_cast<double>(r) > slots) throw std::invalid_argument("neighborhood_lower_bound: r out of range");
    const double e = static_cast<double>(r) / slots;
    if (e <= 0.0 || e >= 1.0) throw std::domain_error("neighborhood_lower_bound: relative radius must lie in (0, 1)");
    const double h = -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e);
    const double nn = static_cast<double>(n);
    return std::exp2(h * slots) / std::sqrt(4.0 * nn * (nn + 1.0) * e * (1.0 - e));
}

std::uint64_t neighborhood_count(Index n, Index r) {
    const std::uint64_t slots = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n + 1) / 2;
    if (slots > 60) throw ScaleError("neighborhood_count: at most 60 pair slots");
    std::uint64_t total = 0;
    std::uint64_t c = 1;  // C(slots, d)
    for (std::uint64_t d = 0; d <= static_cast<std::uint64_t>(r) && d <= slots; ++d) {
        total += c;
        c = c * (slots - d) / (d + 1);
    }
    return total;
}

}  // namespace cgl
